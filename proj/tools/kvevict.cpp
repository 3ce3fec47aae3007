// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kvevict/check.hpp"
#include "kvevict/dap.hpp"
#include "kvevict/experiment.hpp"
#include "kvevict/metrics.hpp"
#include "kvevict/simulator.hpp"
#include "kvevict/theory.hpp"
#include "kvevict/trace_io.hpp"

namespace {

std::string optional_component(const std::optional<double>& v) {
    if (!v.has_value()) {
        return std::string();
    }
    std::ostringstream os;
    os << *v;
    return std::move(os).str();
}

int cmd_run(const std::string& spec_path, const std::string& output_override,
            const std::string& format_override, bool parallel, const std::string& events_path) {
    kvevict::ExperimentSpec spec = kvevict::load_experiment_spec(spec_path);
    if (!output_override.empty()) {
        kvevict::OutputSpec out;
        out.path = output_override;
        out.format = format_override.empty() ? "csv" : format_override;
        spec.output = out;
    }
    if (parallel) {
        spec.parallel_cells = true;
    }

    std::ofstream events;
    if (!events_path.empty()) {
        events.open(events_path, std::ios::binary | std::ios::trunc);
        KVEVICT_REQUIRE(events.good(), "io-error",
                        "cannot open \"" + events_path + "\" for writing");
        // Per-step events from concurrent cells would interleave, so an event
        // log forces the sequential path.
        spec.parallel_cells = false;
        for (kvevict::PolicyBundle& bundle : spec.policies) {
            bundle.config.event_log = &events;
        }
    }

    const std::vector<kvevict::MetricsRecord> records = kvevict::run_experiment(spec);
    if (!spec.output.has_value()) {
        std::cout << kvevict::render_report(records, "csv");
    }
    return 0;
}

int cmd_sparsity(const std::string& trace_path, double threshold) {
    const kvevict::TraceDocument doc =
        kvevict::trace_document_from_json(kvevict::read_text_file(trace_path));
    std::cout << "layer,overall,visual,text\n";
    for (std::size_t layer = 0; layer < doc.layers.size(); ++layer) {
        const kvevict::ModalitySparsity s =
            kvevict::modality_sparsity(doc.layers[layer], threshold);
        std::cout << layer << ',' << s.overall << ',' << optional_component(s.visual) << ','
                  << optional_component(s.text) << '\n';
    }
    return 0;
}

int cmd_overlap(const std::string& trace_path, double r, double alpha,
                std::optional<std::size_t> max_evict) {
    const kvevict::TraceDocument doc =
        kvevict::trace_document_from_json(kvevict::read_text_file(trace_path));
    kvevict::DapConfig cfg;
    cfg.r = r;
    cfg.alpha = alpha;
    cfg.max_evict = max_evict;

    const kvevict::PruneDecision origin = kvevict::prune_prefill(doc.layers[0], cfg);
    std::vector<std::vector<std::size_t>> evictable;
    evictable.reserve(doc.layers.size());
    for (const kvevict::AttentionMatrix& layer : doc.layers) {
        evictable.push_back(kvevict::prune_prefill(layer, cfg).evicted);
    }
    const std::vector<double> rates = kvevict::overlap_rate(origin.evicted, evictable);

    std::cout << "layer,overlap\n";
    for (std::size_t layer = 0; layer < rates.size(); ++layer) {
        std::cout << layer << ',' << rates[layer] << '\n';
    }
    return 0;
}

int cmd_verify_theory(std::size_t instances, std::uint64_t seed, const std::string& output) {
    const std::vector<kvevict::TheoryInstance> results =
        kvevict::run_theory_monte_carlo(instances, seed);
    const std::string csv = kvevict::render_theory_csv(results);
    if (output.empty()) {
        std::cout << csv;
    } else {
        kvevict::write_text_file(output, csv);
    }
    std::size_t violations = 0;
    for (const kvevict::TheoryInstance& t : results) {
        if (!t.bound_holds) {
            ++violations;
        }
    }
    if (violations > 0) {
        std::cerr << violations << " of " << results.size() << " instances violated the bound\n";
        return 2;
    }
    std::cerr << "all " << results.size() << " instances satisfied the bound\n";
    return 0;
}

int cmd_generate(const kvevict::StreamConfig& cfg, const std::string& output) {
    const kvevict::GeneratedTrace trace = kvevict::generate_trace(cfg);
    const std::string json = kvevict::trace_to_json(trace);
    if (output.empty()) {
        std::cout << json << '\n';
    } else {
        kvevict::write_text_file(output, json);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KV-cache eviction policies on synthetic attention streams"};
    app.require_subcommand(1);

    // run
    std::string run_spec;
    std::string run_output;
    std::string run_format;
    std::string run_events;
    bool run_parallel = false;
    CLI::App* run = app.add_subcommand("run", "execute an experiment spec");
    run->add_option("--spec", run_spec, "experiment spec JSON file")->required();
    run->add_option("--output", run_output, "report path (overrides the spec)");
    run->add_option("--format", run_format, "report format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    run->add_flag("--parallel", run_parallel, "run independent cells in parallel");
    run->add_option("--events", run_events, "write per-step decode events (JSON lines)");

    // sparsity
    std::string sparsity_trace;
    double sparsity_threshold = kvevict::kDefaultSparsityThreshold;
    CLI::App* sparsity = app.add_subcommand("sparsity", "per-layer modality sparsity of a trace");
    sparsity->add_option("--trace", sparsity_trace, "trace JSON file")->required();
    sparsity->add_option("--threshold", sparsity_threshold, "sparsity threshold");

    // overlap
    std::string overlap_trace;
    double overlap_r = 0.0;
    double overlap_alpha = 0.0;
    std::size_t overlap_cap = 0;
    CLI::App* overlap =
        app.add_subcommand("overlap", "cross-layer agreement of first-layer prefill evictions");
    overlap->add_option("--trace", overlap_trace, "trace JSON file")->required();
    overlap->add_option("--r", overlap_r, "retention threshold fraction")->required();
    overlap->add_option("--alpha", overlap_alpha, "per-token max-attention guard");
    overlap->add_option("--max-evict", overlap_cap, "eviction cap (0 = uncapped)");

    // verify-theory
    std::size_t theory_instances = 1000;
    std::uint64_t theory_seed = 42;
    std::string theory_output;
    CLI::App* theory =
        app.add_subcommand("verify-theory", "Monte-Carlo checks of the decay-model loss bound");
    theory->add_option("--instances", theory_instances, "number of random instances");
    theory->add_option("--seed", theory_seed, "master seed");
    theory->add_option("--output", theory_output, "CSV path (default: stdout)");

    // generate
    kvevict::StreamConfig gen_cfg;
    std::string gen_output;
    CLI::App* generate = app.add_subcommand("generate", "emit a synthetic attention trace");
    generate->add_option("--seed", gen_cfg.seed, "PRNG seed");
    generate->add_option("--visual", gen_cfg.n_visual, "visual token count");
    generate->add_option("--text", gen_cfg.n_text, "text token count");
    generate->add_option("--layers", gen_cfg.n_layers, "layer count");
    generate->add_option("--steps", gen_cfg.decode_steps, "decode step count");
    generate->add_option("--rho", gen_cfg.rho, "cross-layer salience correlation");
    generate->add_option("--head-dim", gen_cfg.head_dim, "logit scaling dimension");
    generate->add_option("--output", gen_output, "trace path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(run_spec, run_output, run_format, run_parallel, run_events);
        }
        if (sparsity->parsed()) {
            return cmd_sparsity(sparsity_trace, sparsity_threshold);
        }
        if (overlap->parsed()) {
            return cmd_overlap(overlap_trace, overlap_r, overlap_alpha,
                               overlap_cap > 0 ? std::optional<std::size_t>(overlap_cap)
                                               : std::nullopt);
        }
        if (theory->parsed()) {
            return cmd_verify_theory(theory_instances, theory_seed, theory_output);
        }
        if (generate->parsed()) {
            return cmd_generate(gen_cfg, gen_output);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
