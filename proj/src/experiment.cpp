// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include "kvevict/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <string>
#include <utility>

#include <json.hpp>

#include "kvevict/check.hpp"
#include "kvevict/trace_io.hpp"
#include "text_format.hpp"

namespace kvevict {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void spec_error(const std::string& path, const std::string& what) {
    KVEVICT_REQUIRE(false, "spec-error", path + " " + what);
    std::abort();  // unreachable, KVEVICT_REQUIRE(false, ...) always throws
}

double read_double(const ordered_json& obj, const std::string& path, const char* field,
                   double fallback) {
    if (!obj.contains(field)) {
        return fallback;
    }
    const ordered_json& v = obj[field];
    if (!v.is_number()) {
        spec_error(path + "." + field, "must be a number");
    }
    return v.get<double>();
}

std::size_t read_size(const ordered_json& obj, const std::string& path, const char* field,
                      std::size_t fallback) {
    if (!obj.contains(field)) {
        return fallback;
    }
    const ordered_json& v = obj[field];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        spec_error(path + "." + field, "must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

bool read_bool(const ordered_json& obj, const std::string& path, const char* field,
               bool fallback) {
    if (!obj.contains(field)) {
        return fallback;
    }
    const ordered_json& v = obj[field];
    if (!v.is_boolean()) {
        spec_error(path + "." + field, "must be a boolean");
    }
    return v.get<bool>();
}

std::string read_string(const ordered_json& obj, const std::string& path, const char* field,
                        const std::string& fallback) {
    if (!obj.contains(field)) {
        return fallback;
    }
    const ordered_json& v = obj[field];
    if (!v.is_string()) {
        spec_error(path + "." + field, "must be a string");
    }
    return v.get<std::string>();
}

SalienceDist parse_salience(const ordered_json& obj, const std::string& path) {
    if (!obj.is_object()) {
        spec_error(path, "must be an object");
    }
    SalienceDist d;
    d.heavy_prob = read_double(obj, path, "heavy_prob", d.heavy_prob);
    d.heavy_loc = read_double(obj, path, "heavy_loc", d.heavy_loc);
    d.base_loc = read_double(obj, path, "base_loc", d.base_loc);
    d.sigma = read_double(obj, path, "sigma", d.sigma);
    return d;
}

StreamConfig parse_stream(const ordered_json& obj, const std::string& path) {
    if (!obj.is_object()) {
        spec_error(path, "must be an object");
    }
    StreamConfig cfg;
    cfg.n_visual = read_size(obj, path, "n_visual", cfg.n_visual);
    cfg.n_text = read_size(obj, path, "n_text", cfg.n_text);
    cfg.n_layers = read_size(obj, path, "n_layers", cfg.n_layers);
    cfg.decode_steps = read_size(obj, path, "decode_steps", cfg.decode_steps);
    cfg.head_dim = read_size(obj, path, "head_dim", cfg.head_dim);
    cfg.rho = read_double(obj, path, "rho", cfg.rho);
    cfg.seed = read_size(obj, path, "seed", cfg.seed);
    if (obj.contains("visual_salience")) {
        cfg.visual_salience = parse_salience(obj["visual_salience"], path + ".visual_salience");
    }
    if (obj.contains("text_salience")) {
        cfg.text_salience = parse_salience(obj["text_salience"], path + ".text_salience");
    }
    return cfg;
}

PolicyBundle parse_bundle(const ordered_json& obj, const std::string& path) {
    if (!obj.is_object()) {
        spec_error(path, "must be an object");
    }
    if (!obj.contains("policy")) {
        spec_error(path + ".policy", "is required");
    }
    const std::string name = read_string(obj, path, "policy", "");
    PolicyBundle bundle;
    try {
        bundle.policy = policy_from_string(name);
    } catch (const contract_error&) {
        spec_error(path + ".policy", "must be one of full, hae, greedy, window");
    }
    bundle.id = read_string(obj, path, "id", name);

    if (obj.contains("dap")) {
        const ordered_json& dap = obj["dap"];
        const std::string dap_path = path + ".dap";
        if (!dap.is_object()) {
            spec_error(dap_path, "must be an object");
        }
        bundle.config.dap.r = read_double(dap, dap_path, "r", bundle.config.dap.r);
        bundle.config.dap.alpha = read_double(dap, dap_path, "alpha", bundle.config.dap.alpha);
        if (dap.contains("max_evict")) {
            bundle.config.dap.max_evict = read_size(dap, dap_path, "max_evict", 0);
        }
    }
    if (obj.contains("ddes")) {
        const ordered_json& ddes = obj["ddes"];
        const std::string ddes_path = path + ".ddes";
        if (!ddes.is_object()) {
            spec_error(ddes_path, "must be an object");
        }
        DdesConfig cfg;
        cfg.k = read_size(ddes, ddes_path, "k", cfg.k);
        cfg.buffer = read_size(ddes, ddes_path, "buffer", cfg.buffer);
        cfg.protect_recent = read_size(ddes, ddes_path, "protect_recent", cfg.protect_recent);
        bundle.config.ddes = cfg;
    }
    if (obj.contains("greedy")) {
        const ordered_json& greedy = obj["greedy"];
        const std::string greedy_path = path + ".greedy";
        if (!greedy.is_object()) {
            spec_error(greedy_path, "must be an object");
        }
        bundle.config.greedy.budget =
            read_size(greedy, greedy_path, "budget", bundle.config.greedy.budget);
        bundle.config.greedy.recent_window =
            read_size(greedy, greedy_path, "recent_window", bundle.config.greedy.recent_window);
    }
    bundle.config.bytes_per_entry =
        read_size(obj, path, "bytes_per_entry", bundle.config.bytes_per_entry);
    return bundle;
}

std::size_t round_to_size(double value, const std::string& path) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        spec_error(path, "must round to a non-negative integer");
    }
    return static_cast<std::size_t>(std::llround(value));
}

// Applies one sweep knob onto a copy of the bundle's configuration. Decode
// knobs instantiate the recycle-bin config when the bundle left it out.
PolicyBundle apply_sweep(PolicyBundle bundle, const std::string& name, double value) {
    if (name == "r") {
        bundle.config.dap.r = value;
    } else if (name == "alpha") {
        bundle.config.dap.alpha = value;
    } else if (name == "k") {
        DdesConfig cfg = bundle.config.ddes.value_or(DdesConfig{});
        cfg.k = round_to_size(value, "sweep.values");
        bundle.config.ddes = cfg;
    } else if (name == "buffer") {
        DdesConfig cfg = bundle.config.ddes.value_or(DdesConfig{});
        cfg.buffer = round_to_size(value, "sweep.values");
        bundle.config.ddes = cfg;
    } else if (name == "protect_recent") {
        DdesConfig cfg = bundle.config.ddes.value_or(DdesConfig{});
        cfg.protect_recent = round_to_size(value, "sweep.values");
        bundle.config.ddes = cfg;
    } else if (name == "budget") {
        bundle.config.greedy.budget = round_to_size(value, "sweep.values");
    } else if (name == "recent_window") {
        bundle.config.greedy.recent_window = round_to_size(value, "sweep.values");
    } else {
        spec_error("sweep.name", "must be one of r, alpha, k, buffer, protect_recent, "
                                 "budget, recent_window");
    }
    return bundle;
}

std::string render_optional_mean(const MetricsRecord& record) {
    const std::optional<double> mean = overlap_mean(record);
    return mean.has_value() ? detail::format_double(*mean) : std::string();
}

}  // namespace

void ExperimentSpec::validate() const {
    KVEVICT_REQUIRE(repetitions >= 1, "spec-error", "repetitions must be >= 1");
    KVEVICT_REQUIRE(!policies.empty(), "spec-error", "policies must be non-empty");
    if (sweep.has_value()) {
        KVEVICT_REQUIRE(!sweep->values.empty(), "spec-error", "sweep.values must be non-empty");
        KVEVICT_REQUIRE(!sweep->name.empty(), "spec-error", "sweep.name must be non-empty");
    }
    if (output.has_value()) {
        KVEVICT_REQUIRE(!output->path.empty(), "spec-error", "output.path must be non-empty");
        KVEVICT_REQUIRE(output->format == "csv" || output->format == "json", "spec-error",
                        "output.format must be csv or json");
    }
    stream.validate();
}

ExperimentSpec experiment_from_json(const std::string& text) {
    ordered_json doc = ordered_json::parse(text, /*cb=*/nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) {
        spec_error("document", "must be a JSON object");
    }

    ExperimentSpec spec;
    if (doc.contains("stream")) {
        spec.stream = parse_stream(doc["stream"], "stream");
    }
    if (!doc.contains("policies") || !doc["policies"].is_array() || doc["policies"].empty()) {
        spec_error("policies", "must be a non-empty array");
    }
    const ordered_json& policies = doc["policies"];
    for (std::size_t i = 0; i < policies.size(); ++i) {
        spec.policies.push_back(
            parse_bundle(policies[i], "policies[" + std::to_string(i) + "]"));
    }
    if (doc.contains("sweep")) {
        const ordered_json& sweep = doc["sweep"];
        if (!sweep.is_object()) {
            spec_error("sweep", "must be an object");
        }
        SweepSpec s;
        s.name = read_string(sweep, "sweep", "name", "");
        if (s.name.empty()) {
            spec_error("sweep.name", "is required");
        }
        if (!sweep.contains("values") || !sweep["values"].is_array() || sweep["values"].empty()) {
            spec_error("sweep.values", "must be a non-empty array of numbers");
        }
        for (const ordered_json& v : sweep["values"]) {
            if (!v.is_number()) {
                spec_error("sweep.values", "must be a non-empty array of numbers");
            }
            s.values.push_back(v.get<double>());
        }
        spec.sweep = std::move(s);
    }
    spec.repetitions = read_size(doc, "document", "repetitions", spec.repetitions);
    if (spec.repetitions < 1) {
        spec_error("repetitions", "must be >= 1");
    }
    spec.emit_timing = read_bool(doc, "document", "emit_timing", spec.emit_timing);
    spec.parallel_cells = read_bool(doc, "document", "parallel_cells", spec.parallel_cells);
    if (doc.contains("output")) {
        const ordered_json& output = doc["output"];
        if (!output.is_object()) {
            spec_error("output", "must be an object");
        }
        OutputSpec o;
        o.path = read_string(output, "output", "path", "");
        if (o.path.empty()) {
            spec_error("output.path", "is required");
        }
        o.format = read_string(output, "output", "format", o.format);
        if (o.format != "csv" && o.format != "json") {
            spec_error("output.format", "must be csv or json");
        }
        spec.output = std::move(o);
    }
    spec.validate();
    return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
    ExperimentSpec spec = experiment_from_json(read_text_file(path));
    if (const char* env = std::getenv("KVEVICT_SEED")) {
        char* end = nullptr;
        const unsigned long long value = std::strtoull(env, &end, 10);
        KVEVICT_REQUIRE(end != env && *end == '\0', "spec-error",
                        "KVEVICT_SEED must be an unsigned integer");
        spec.stream.seed = static_cast<std::uint64_t>(value);
    }
    return spec;
}

std::vector<MetricsRecord> run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const GeneratedTrace trace = generate_trace(spec.stream);

    struct Cell {
        PolicyBundle bundle;
        std::string label;
    };
    std::vector<Cell> cells;
    for (const PolicyBundle& bundle : spec.policies) {
        if (spec.sweep.has_value()) {
            for (double value : spec.sweep->values) {
                Cell cell;
                cell.bundle = apply_sweep(bundle, spec.sweep->name, value);
                cell.label =
                    bundle.id + "@" + spec.sweep->name + "=" + detail::format_double(value);
                for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
                    cells.push_back(cell);
                }
            }
        } else {
            Cell cell;
            cell.bundle = bundle;
            cell.label = bundle.id;
            for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
                cells.push_back(cell);
            }
        }
    }

    std::vector<MetricsRecord> records(cells.size());
    const std::int64_t cell_count = static_cast<std::int64_t>(cells.size());
    // Cells share the immutable trace and write disjoint slots, so the
    // parallel path cannot change the declared record order.
#pragma omp parallel for schedule(dynamic) if (spec.parallel_cells)
    for (std::int64_t i = 0; i < cell_count; ++i) {
        const Cell& cell = cells[static_cast<std::size_t>(i)];
        MetricsRecord record = run_policy(trace, cell.bundle.policy, cell.bundle.config);
        record.policy = cell.label;
        if (!spec.emit_timing) {
            record.wall_ms = 0.0;
        }
        records[static_cast<std::size_t>(i)] = std::move(record);
    }

    if (spec.output.has_value()) {
        emit_report(records, spec.output->format, spec.output->path);
    }
    return records;
}

std::string render_report(const std::vector<MetricsRecord>& records, const std::string& format) {
    KVEVICT_REQUIRE(!records.empty(), "format-error", "refusing to render an empty report");
    if (format == "csv") {
        std::string out = "policy,seed,retained,evicted,cache_bytes,loss,wall_ms,overlap_mean\n";
        for (const MetricsRecord& r : records) {
            out += r.policy;
            out += ',';
            out += detail::format_uint(r.seed);
            out += ',';
            out += detail::format_uint(r.retained_entries);
            out += ',';
            out += detail::format_uint(r.evicted_entries);
            out += ',';
            out += detail::format_uint(r.cache_bytes);
            out += ',';
            out += detail::format_double(r.eviction_loss);
            out += ',';
            out += detail::format_double(r.wall_ms);
            out += ',';
            out += render_optional_mean(r);
            out += '\n';
        }
        return out;
    }
    if (format == "json") {
        ordered_json doc = ordered_json::array();
        for (const MetricsRecord& r : records) {
            ordered_json row;
            row["policy"] = r.policy;
            row["seed"] = r.seed;
            row["retained"] = r.retained_entries;
            row["evicted"] = r.evicted_entries;
            row["cache_bytes"] = r.cache_bytes;
            row["loss"] = r.eviction_loss;
            row["wall_ms"] = r.wall_ms;
            const std::optional<double> mean = overlap_mean(r);
            if (mean.has_value()) {
                row["overlap_mean"] = *mean;
            } else {
                row["overlap_mean"] = nullptr;
            }
            doc.push_back(std::move(row));
        }
        return doc.dump();
    }
    KVEVICT_REQUIRE(false, "format-error", "unknown report format \"" + format + "\"");
}

void emit_report(const std::vector<MetricsRecord>& records, const std::string& format,
                 const std::string& path) {
    write_text_file(path, render_report(records, format));
}

std::vector<MetricsRecord> records_from_report_json(const std::string& text) {
    ordered_json doc = ordered_json::parse(text, /*cb=*/nullptr, /*allow_exceptions=*/false);
    KVEVICT_REQUIRE(!doc.is_discarded() && doc.is_array(), "format-error",
                    "report must be a JSON array");
    std::vector<MetricsRecord> records;
    records.reserve(doc.size());
    for (const ordered_json& row : doc) {
        KVEVICT_REQUIRE(row.is_object(), "format-error", "report rows must be objects");
        MetricsRecord r;
        r.policy = row.value("policy", std::string());
        r.seed = row.value("seed", std::uint64_t{0});
        r.retained_entries = row.value("retained", std::size_t{0});
        r.evicted_entries = row.value("evicted", std::size_t{0});
        r.cache_bytes = row.value("cache_bytes", std::size_t{0});
        r.eviction_loss = row.value("loss", 0.0);
        r.wall_ms = row.value("wall_ms", 0.0);
        if (row.contains("overlap_mean") && row["overlap_mean"].is_number()) {
            r.overlap_rates = {row["overlap_mean"].get<double>()};
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::string render_theory_csv(const std::vector<TheoryInstance>& instances) {
    std::string out = "seed,lambda,epsilon,q,delay,loss,bound_holds\n";
    for (const TheoryInstance& t : instances) {
        out += detail::format_uint(t.seed);
        out += ',';
        out += detail::format_double(t.lambda);
        out += ',';
        out += detail::format_double(t.epsilon);
        out += ',';
        out += detail::format_double(t.q);
        out += ',';
        out += detail::format_uint(t.delay);
        out += ',';
        out += detail::format_double(t.loss);
        out += ',';
        out += t.bound_holds ? '1' : '0';
        out += '\n';
    }
    return out;
}

}  // namespace kvevict
