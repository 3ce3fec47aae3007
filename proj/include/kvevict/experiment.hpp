// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kvevict/simulator.hpp"
#include "kvevict/theory.hpp"

namespace kvevict {

/// One-dimensional parameter grid applied on top of each policy bundle.
/// Supported names: r, alpha (pruning), k, buffer, protect_recent (decode
/// eviction), budget, recent_window (baselines). Integer knobs round.
struct SweepSpec {
    std::string name;
    std::vector<double> values;
};

/// A named policy with its full configuration.
struct PolicyBundle {
    std::string id;
    Policy policy = Policy::Full;
    PolicyConfig config;
};

struct OutputSpec {
    std::string path;
    std::string format = "csv";  // csv or json
};

/**
 * @brief A complete experiment: one stream, a list of policies, an optional
 *        sweep, and repetition count.
 *
 * Cells execute as policy (outer) x sweep value x repetition (inner), each
 * producing one MetricsRecord in that order. The same generated trace is
 * shared by every cell because the stream config never varies within a spec.
 */
struct ExperimentSpec {
    StreamConfig stream;
    std::vector<PolicyBundle> policies;
    std::optional<SweepSpec> sweep;
    std::size_t repetitions = 1;
    // Keep measured wall times in emitted reports. Off by default so that a
    // spec run twice produces byte-identical report files.
    bool emit_timing = false;
    // Run independent cells in parallel. Record order is unaffected.
    bool parallel_cells = false;
    std::optional<OutputSpec> output;

    void validate() const;
};

// Parses a spec document; error messages are "spec-error: <field path>".
ExperimentSpec experiment_from_json(const std::string& text);

// Reads and parses a spec file, then applies the KVEVICT_SEED environment
// override (when set, it replaces stream.seed).
ExperimentSpec load_experiment_spec(const std::string& path);

// Executes every cell and, when output is configured, writes the report file.
// Records come back in declaration order regardless of parallel_cells.
std::vector<MetricsRecord> run_experiment(const ExperimentSpec& spec);

// Report rendering. CSV column order is fixed:
// policy,seed,retained,evicted,cache_bytes,loss,wall_ms,overlap_mean
// JSON is an array of objects with those same fields. Unknown format ->
// "format-error"; empty records -> contract error, nothing written.
std::string render_report(const std::vector<MetricsRecord>& records, const std::string& format);
void emit_report(const std::vector<MetricsRecord>& records, const std::string& format,
                 const std::string& path);

// Parses a JSON report back into records (report fields only; per-layer
// overlap detail collapses to its mean).
std::vector<MetricsRecord> records_from_report_json(const std::string& text);

// CSV for the Monte-Carlo delay-bound checks, one row per instance:
// seed,lambda,epsilon,q,delay,loss,bound_holds
std::string render_theory_csv(const std::vector<TheoryInstance>& instances);

}  // namespace kvevict
