// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

// Micro-benchmark comparing the OpenMP kernels against their serial reference
// implementations, plus the decode-policy wall-time contrast. Results are
// printed as a small table; every parallel result is also checked for bit
// equality with the serial one, so a kernel regression shows up here even
// without the unit suite.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kvevict/metrics.hpp"
#include "kvevict/rng.hpp"
#include "kvevict/simulator.hpp"

namespace {

kvevict::AttentionMatrix random_matrix(std::size_t rows, std::size_t n_visual,
                                       std::size_t n_text, std::uint64_t seed) {
    kvevict::rng::Stream stream(seed);
    kvevict::AttentionMatrix m;
    m.col_modality.assign(n_visual, kvevict::TokenModality::Visual);
    m.col_modality.insert(m.col_modality.end(), n_text, kvevict::TokenModality::Text);
    m.row_modality.assign(rows, kvevict::TokenModality::Text);
    for (std::size_t i = 0; i < rows; ++i) {
        kvevict::AttentionRow row;
        row.step = i;
        row.probs.resize(n_visual + n_text);
        for (double& v : row.probs) {
            v = stream.next_canonical();
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

// Best-of-N wall time of a callable, in milliseconds.
double time_ms(const std::function<void()>& f, int repeats) {
    double best = 0.0;
    for (int i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        f();
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        if (i == 0 || ms < best) {
            best = ms;
        }
    }
    return best;
}

void print_row(const char* kernel, double serial_ms, double parallel_ms, bool match) {
    std::printf("%-18s %10.3f %12.3f %9.2fx   %s\n", kernel, serial_ms, parallel_ms,
                serial_ms / parallel_ms, match ? "bit-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t rows = 2000;
    std::size_t n_visual = 1500;
    std::size_t n_text = 500;
    int repeats = 5;
    std::size_t policy_cache = 1000;
    std::size_t policy_steps = 3000;

    CLI::App app{"kernel and policy benchmarks"};
    app.add_option("--rows", rows, "attention matrix rows");
    app.add_option("--visual", n_visual, "visual columns");
    app.add_option("--text", n_text, "text columns");
    app.add_option("--repeats", repeats, "timing repetitions (best-of)");
    app.add_option("--cache", policy_cache, "context length for the policy comparison");
    app.add_option("--steps", policy_steps, "decode steps for the policy comparison");
    CLI11_PARSE(app, argc, argv);

    const kvevict::AttentionMatrix m = random_matrix(rows, n_visual, n_text, 12345);
    std::printf("matrix: %zu rows x %zu cols, best of %d\n\n", rows, n_visual + n_text,
                repeats);
    std::printf("%-18s %10s %12s %9s\n", "kernel", "serial ms", "parallel ms", "speedup");

    {
        double serial_out = 0.0;
        double parallel_out = 0.0;
        const double s =
            time_ms([&] { serial_out = kvevict::serial::sparsity_rate(m, 0.5); }, repeats);
        const double p =
            time_ms([&] { parallel_out = kvevict::sparsity_rate(m, 0.5); }, repeats);
        print_row("sparsity_rate", s, p, serial_out == parallel_out);
    }
    {
        kvevict::ModalitySparsity serial_out;
        kvevict::ModalitySparsity parallel_out;
        const double s = time_ms(
            [&] { serial_out = kvevict::serial::modality_sparsity(m, 0.5); }, repeats);
        const double p =
            time_ms([&] { parallel_out = kvevict::modality_sparsity(m, 0.5); }, repeats);
        print_row("modality_sparsity", s, p,
                  serial_out.overall == parallel_out.overall &&
                      serial_out.visual == parallel_out.visual &&
                      serial_out.text == parallel_out.text);
    }
    {
        std::vector<double> serial_out;
        std::vector<double> parallel_out;
        const double s =
            time_ms([&] { serial_out = kvevict::serial::cumulative_scores(m); }, repeats);
        const double p =
            time_ms([&] { parallel_out = kvevict::cumulative_scores(m); }, repeats);
        print_row("cumulative_scores", s, p, serial_out == parallel_out);
    }

    // Policy contrast: recycle-bin decode vs the per-step sorting baseline on
    // one layer with a held cache size.
    kvevict::StreamConfig cfg;
    cfg.n_visual = policy_cache * 4 / 5;
    cfg.n_text = policy_cache - cfg.n_visual;
    cfg.n_layers = 1;
    cfg.decode_steps = policy_steps;
    cfg.seed = 99;
    const kvevict::GeneratedTrace trace = kvevict::generate_trace(cfg);

    kvevict::PolicyConfig hae_cfg;
    kvevict::DdesConfig ddes;
    ddes.k = 8;
    ddes.buffer = 16;
    ddes.protect_recent = 8;
    hae_cfg.ddes = ddes;
    kvevict::PolicyConfig greedy_cfg;
    greedy_cfg.greedy.budget = policy_cache;
    greedy_cfg.greedy.recent_window = 8;

    const kvevict::MetricsRecord hae =
        kvevict::run_policy(trace, kvevict::Policy::Hae, hae_cfg);
    const kvevict::MetricsRecord greedy =
        kvevict::run_policy(trace, kvevict::Policy::Greedy, greedy_cfg);
    std::printf("\npolicy decode (%zu entries, %zu steps):\n", policy_cache, policy_steps);
    std::printf("  hae     %10.1f ms  (loss %.4f)\n", hae.wall_ms, hae.eviction_loss);
    std::printf("  greedy  %10.1f ms  (loss %.4f)\n", greedy.wall_ms, greedy.eviction_loss);
    return 0;
}
