// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <doctest.h>

#include "kvevict/experiment.hpp"
#include "kvevict/trace_io.hpp"
#include "support.hpp"

using kvevict::ExperimentSpec;
using kvevict::MetricsRecord;

namespace {

// Like support::thrown_token but returns the whole message, so tests can pin
// the field path inside "spec-error: <path> <reason>".
std::string thrown_message(const std::function<void()>& f) {
    try {
        f();
    } catch (const kvevict::contract_error& e) {
        return e.what();
    }
    return "";
}

constexpr const char* kSmallStream = R"("stream": {
    "n_visual": 16, "n_text": 8, "n_layers": 2, "decode_steps": 8, "seed": 99
})";

std::string wrap_spec(const std::string& body) {
    return "{" + std::string(kSmallStream) + "," + body + "}";
}

}  // namespace

TEST_CASE("a minimal spec parses with defaults") {
    const ExperimentSpec spec =
        kvevict::experiment_from_json(R"({"policies":[{"policy":"full"}]})");
    CHECK(spec.policies.size() == 1);
    CHECK(spec.policies[0].id == "full");
    CHECK(spec.policies[0].policy == kvevict::Policy::Full);
    CHECK(spec.repetitions == 1);
    CHECK_FALSE(spec.sweep.has_value());
    CHECK_FALSE(spec.output.has_value());
    CHECK_FALSE(spec.emit_timing);
    CHECK(spec.stream.n_visual == 128);  // stream block omitted, defaults apply
}

TEST_CASE("a full spec echoes every field") {
    const std::string text = wrap_spec(R"("policies": [
        {"id": "prune", "policy": "hae",
         "dap": {"r": 0.01, "alpha": 0.5, "max_evict": 6},
         "ddes": {"k": 2, "buffer": 3, "protect_recent": 2},
         "bytes_per_entry": 1024},
        {"policy": "greedy", "greedy": {"budget": 20, "recent_window": 4}}
      ],
      "sweep": {"name": "r", "values": [0.0, 0.01]},
      "repetitions": 2,
      "emit_timing": true,
      "output": {"path": "report.csv", "format": "csv"})");
    const ExperimentSpec spec = kvevict::experiment_from_json(text);

    CHECK(spec.stream.n_visual == 16);
    CHECK(spec.stream.seed == 99);
    REQUIRE(spec.policies.size() == 2);
    CHECK(spec.policies[0].id == "prune");
    CHECK(spec.policies[0].config.dap.r == 0.01);
    CHECK(spec.policies[0].config.dap.max_evict == std::size_t{6});
    REQUIRE(spec.policies[0].config.ddes.has_value());
    CHECK(spec.policies[0].config.ddes->buffer == 3);
    CHECK(spec.policies[0].config.bytes_per_entry == 1024);
    CHECK(spec.policies[1].id == "greedy");
    CHECK(spec.policies[1].config.greedy.budget == 20);
    REQUIRE(spec.sweep.has_value());
    CHECK(spec.sweep->values == std::vector<double>{0.0, 0.01});
    CHECK(spec.repetitions == 2);
    CHECK(spec.emit_timing);
    REQUIRE(spec.output.has_value());
    CHECK(spec.output->format == "csv");
}

TEST_CASE("spec errors name the offending field") {
    CHECK(thrown_message([] { kvevict::experiment_from_json(R"({})"); })
              .find("policies") != std::string::npos);
    CHECK(thrown_message([] {
              kvevict::experiment_from_json(R"({"policies":[{"policy":"h2o"}]})");
          }).find("policies[0].policy") != std::string::npos);
    CHECK(thrown_message([] {
              kvevict::experiment_from_json(
                  R"({"policies":[{"policy":"full"}],"sweep":{"values":[1]}})");
          }).find("sweep.name") != std::string::npos);
    CHECK(thrown_message([] {
              kvevict::experiment_from_json(
                  R"({"policies":[{"policy":"full"}],"repetitions":0})");
          }).find("repetitions") != std::string::npos);
    CHECK(thrown_message([] {
              kvevict::experiment_from_json(
                  R"({"policies":[{"policy":"full"}],"output":{"path":"x","format":"xml"}})");
          }).find("output.format") != std::string::npos);
    CHECK(support::thrown_token([] { kvevict::experiment_from_json("not json"); }) ==
          "spec-error");
}

TEST_CASE("an unknown sweep knob fails at execution") {
    const ExperimentSpec spec = kvevict::experiment_from_json(
        wrap_spec(R"("policies":[{"policy":"full"}],
                     "sweep":{"name":"temperature","values":[1.0]})"));
    CHECK(support::thrown_token([&] { kvevict::run_experiment(spec); }) == "spec-error");
}

TEST_CASE("sweeping the retention threshold never grows the cache") {
    const ExperimentSpec spec = kvevict::experiment_from_json(
        wrap_spec(R"("policies":[{"policy":"hae","dap":{"alpha":1.0}}],
                     "sweep":{"name":"r","values":[0.0, 0.005, 0.02, 0.08]})"));
    const std::vector<MetricsRecord> records = kvevict::run_experiment(spec);
    REQUIRE(records.size() == 4);
    CHECK(records[0].policy == "hae@r=0");
    CHECK(records[1].policy == "hae@r=0.005");
    CHECK(records[3].policy == "hae@r=0.08");
    for (std::size_t i = 1; i < records.size(); ++i) {
        CHECK(records[i].retained_entries <= records[i - 1].retained_entries);
    }
}

TEST_CASE("cells run policy-major, then sweep value, then repetition") {
    const ExperimentSpec spec = kvevict::experiment_from_json(
        wrap_spec(R"("policies":[{"policy":"full"},{"policy":"window","greedy":{"budget":12}}],
                     "sweep":{"name":"alpha","values":[0.0, 1.0]},
                     "repetitions":2)"));
    const std::vector<MetricsRecord> records = kvevict::run_experiment(spec);
    const std::vector<std::string> expected = {
        "full@alpha=0",   "full@alpha=0",   "full@alpha=1",   "full@alpha=1",
        "window@alpha=0", "window@alpha=0", "window@alpha=1", "window@alpha=1"};
    REQUIRE(records.size() == expected.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].policy == expected[i]);
    }
}

TEST_CASE("repetitions of a deterministic cell are identical") {
    const ExperimentSpec spec = kvevict::experiment_from_json(
        wrap_spec(R"("policies":[{"policy":"greedy","greedy":{"budget":18,"recent_window":3}}],
                     "repetitions":3)"));
    const std::vector<MetricsRecord> records = kvevict::run_experiment(spec);
    REQUIRE(records.size() == 3);
    for (const MetricsRecord& r : records) {
        CHECK(r.policy == records[0].policy);
        CHECK(r.retained_entries == records[0].retained_entries);
        CHECK(r.eviction_loss == records[0].eviction_loss);
        CHECK(r.wall_ms == 0.0);  // timing suppressed unless requested
    }
}

TEST_CASE("parallel and sequential execution produce the same records") {
    const std::string body =
        R"("policies":[{"policy":"hae","dap":{"r":0.01,"alpha":1.0},
                        "ddes":{"k":2,"buffer":3,"protect_recent":2}},
                       {"policy":"greedy","greedy":{"budget":20,"recent_window":4}}],
           "repetitions":2)";
    ExperimentSpec sequential = kvevict::experiment_from_json(wrap_spec(body));
    ExperimentSpec parallel = sequential;
    parallel.parallel_cells = true;

    const std::vector<MetricsRecord> a = kvevict::run_experiment(sequential);
    const std::vector<MetricsRecord> b = kvevict::run_experiment(parallel);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].policy == b[i].policy);
        CHECK(a[i].retained_entries == b[i].retained_entries);
        CHECK(a[i].evicted_entries == b[i].evicted_entries);
        CHECK(a[i].eviction_loss == b[i].eviction_loss);
        CHECK(a[i].overlap_rates == b[i].overlap_rates);
    }
}

TEST_CASE("report files are byte-identical across runs") {
    const char* path = "kvevict_report_test.csv";
    const ExperimentSpec spec = kvevict::experiment_from_json(wrap_spec(
        std::string(R"("policies":[{"policy":"hae","dap":{"r":0.01,"alpha":1.0}},
                       {"policy":"full"}],
           "output":{"path":")") +
        path + R"(","format":"csv"})"));

    kvevict::run_experiment(spec);
    const std::string first = kvevict::read_text_file(path);
    kvevict::run_experiment(spec);
    const std::string second = kvevict::read_text_file(path);
    std::remove(path);

    CHECK(first == second);
    CHECK(first.rfind("policy,seed,retained,evicted,cache_bytes,loss,wall_ms,overlap_mean\n",
                      0) == 0);
    // The reference policy has no pruning decision, so its overlap column is
    // empty and the row ends directly after the wall-time field.
    CHECK(first.find("full,99,") != std::string::npos);
}

TEST_CASE("JSON reports parse back into equivalent records") {
    const ExperimentSpec spec = kvevict::experiment_from_json(
        wrap_spec(R"("policies":[{"policy":"hae","dap":{"r":0.01,"alpha":1.0}},
                     {"policy":"full"}])"));
    const std::vector<MetricsRecord> records = kvevict::run_experiment(spec);
    const std::vector<MetricsRecord> back =
        kvevict::records_from_report_json(kvevict::render_report(records, "json"));

    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].policy == records[i].policy);
        CHECK(back[i].seed == records[i].seed);
        CHECK(back[i].retained_entries == records[i].retained_entries);
        CHECK(back[i].evicted_entries == records[i].evicted_entries);
        CHECK(back[i].cache_bytes == records[i].cache_bytes);
        CHECK(back[i].eviction_loss == records[i].eviction_loss);
        CHECK(kvevict::overlap_mean(back[i]) == kvevict::overlap_mean(records[i]));
    }
}

TEST_CASE("report rendering rejects bad input") {
    CHECK(support::thrown_token([] {
              kvevict::render_report({}, "csv");
          }) == "format-error");
    MetricsRecord r;
    r.policy = "full";
    CHECK(support::thrown_token([&] {
              kvevict::render_report({r}, "xml");
          }) == "format-error");
    CHECK(support::thrown_token([] {
              kvevict::records_from_report_json(R"({"policy":"full"})");
          }) == "format-error");
}

TEST_CASE("theory instances render to a fixed CSV shape") {
    kvevict::TheoryInstance t;
    t.seed = 5;
    t.lambda = 0.5;
    t.epsilon = 0.25;
    t.q = 2.0;
    t.delay = 3;
    t.loss = 0.125;
    t.bound_holds = true;
    CHECK(kvevict::render_theory_csv({t}) ==
          "seed,lambda,epsilon,q,delay,loss,bound_holds\n"
          "5,0.5,0.25,2,3,0.125,1\n");
}

TEST_CASE("the seed environment override rewrites the stream seed") {
    const char* path = "kvevict_spec_test.json";
    kvevict::write_text_file(path, wrap_spec(R"("policies":[{"policy":"full"}])"));

    REQUIRE(setenv("KVEVICT_SEED", "777", 1) == 0);
    const ExperimentSpec spec = kvevict::load_experiment_spec(path);
    CHECK(spec.stream.seed == 777);

    REQUIRE(setenv("KVEVICT_SEED", "12abc", 1) == 0);
    CHECK(support::thrown_token([&] { kvevict::load_experiment_spec(path); }) ==
          "spec-error");

    REQUIRE(unsetenv("KVEVICT_SEED") == 0);
    const ExperimentSpec plain = kvevict::load_experiment_spec(path);
    CHECK(plain.stream.seed == 99);
    std::remove(path);
}
