// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kvevict/attention.hpp"
#include "kvevict/dap.hpp"
#include "kvevict/ddes.hpp"
#include "kvevict/simulator.hpp"

// JSON serialization of traces, decisions, and decode events. Two document
// shapes exist:
//
//   single matrix   {"version": 1, "modalities": [...], "rows": [[...], ...]}
//   full trace      {"version": 1, "seed": ..., "prng": "...",
//                    "config": {...}, "layers": [<matrix document>, ...]}
//
// where each layer holds the prefill rows followed by the full-cache decode
// rows. Parsers throw contract_error("format-error: ...") on malformed input;
// file helpers throw contract_error("io-error: ...").
namespace kvevict {

std::string matrix_to_json(const AttentionMatrix& m);
AttentionMatrix matrix_from_json(const std::string& text);

// Serializes the whole trace, materializing every decode row. Intended for
// modest traces (export, analysis); policy runs never need this.
std::string trace_to_json(const GeneratedTrace& trace);

/// An imported trace file: per-layer matrices plus whatever header fields the
/// document carried. Accepts both document shapes (a bare matrix imports as a
/// single layer with no header).
struct TraceDocument {
    std::optional<std::uint64_t> seed;
    std::string prng;
    std::optional<StreamConfig> config;
    std::vector<AttentionMatrix> layers;
};

TraceDocument trace_document_from_json(const std::string& text);

std::string decision_to_json(const PruneDecision& decision);
PruneDecision decision_from_json(const std::string& text);

// One decode event as a single JSON line (no trailing newline):
// {"step":, "cache_size":, "marked":, "flushed":[...], "loss":}
std::string event_to_json_line(const StepEvent& event);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace kvevict
