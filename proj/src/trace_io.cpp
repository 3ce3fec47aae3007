// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include "kvevict/trace_io.hpp"

#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "kvevict/check.hpp"
#include "kvevict/rng.hpp"
#include "text_format.hpp"

namespace kvevict {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json parse_or_throw(const std::string& text) {
    ordered_json doc = ordered_json::parse(text, /*cb=*/nullptr, /*allow_exceptions=*/false);
    KVEVICT_REQUIRE(!doc.is_discarded(), "format-error", "document is not valid JSON");
    return doc;
}

ordered_json matrix_to_value(const AttentionMatrix& m) {
    ordered_json doc;
    doc["version"] = 1;
    ordered_json modalities = ordered_json::array();
    for (TokenModality mod : m.col_modality) {
        modalities.push_back(std::string(to_string(mod)));
    }
    doc["modalities"] = std::move(modalities);
    ordered_json rows = ordered_json::array();
    for (const AttentionRow& row : m.rows) {
        rows.push_back(row.probs);
    }
    doc["rows"] = std::move(rows);
    return doc;
}

AttentionMatrix matrix_from_value(const ordered_json& doc) {
    KVEVICT_REQUIRE(doc.is_object(), "format-error", "matrix document must be a JSON object");
    if (doc.contains("version")) {
        KVEVICT_REQUIRE(doc["version"].is_number_integer() && doc["version"].get<int>() == 1,
                        "format-error", "unsupported matrix document version");
    }
    KVEVICT_REQUIRE(doc.contains("modalities") && doc["modalities"].is_array(), "format-error",
                    "matrix document needs a \"modalities\" array");
    KVEVICT_REQUIRE(doc.contains("rows") && doc["rows"].is_array(), "format-error",
                    "matrix document needs a \"rows\" array");

    AttentionMatrix m;
    for (const ordered_json& v : doc["modalities"]) {
        KVEVICT_REQUIRE(v.is_string(), "format-error", "modality labels must be strings");
        m.col_modality.push_back(modality_from_string(v.get<std::string>()));
    }
    const ordered_json& rows = doc["rows"];
    KVEVICT_REQUIRE(rows.size() <= m.col_modality.size(), "format-error",
                    "more rows than modality labels");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ordered_json& row = rows[i];
        KVEVICT_REQUIRE(row.is_array(), "format-error", "each row must be an array of numbers");
        AttentionRow out;
        out.step = i;
        out.probs.reserve(row.size());
        for (const ordered_json& v : row) {
            KVEVICT_REQUIRE(v.is_number(), "format-error", "row values must be numbers");
            out.probs.push_back(v.get<double>());
        }
        m.rows.push_back(std::move(out));
    }
    // Rows are queries over the same token sequence the columns describe.
    m.row_modality.assign(m.col_modality.begin(),
                          m.col_modality.begin() + static_cast<std::ptrdiff_t>(m.rows.size()));
    validate_structure(m);
    return m;
}

ordered_json salience_to_value(const SalienceDist& d) {
    ordered_json doc;
    doc["heavy_prob"] = d.heavy_prob;
    doc["heavy_loc"] = d.heavy_loc;
    doc["base_loc"] = d.base_loc;
    doc["sigma"] = d.sigma;
    return doc;
}

SalienceDist salience_from_value(const ordered_json& doc) {
    KVEVICT_REQUIRE(doc.is_object(), "format-error", "salience config must be a JSON object");
    SalienceDist d;
    if (doc.contains("heavy_prob")) d.heavy_prob = doc["heavy_prob"].get<double>();
    if (doc.contains("heavy_loc")) d.heavy_loc = doc["heavy_loc"].get<double>();
    if (doc.contains("base_loc")) d.base_loc = doc["base_loc"].get<double>();
    if (doc.contains("sigma")) d.sigma = doc["sigma"].get<double>();
    return d;
}

ordered_json stream_config_to_value(const StreamConfig& cfg) {
    ordered_json doc;
    doc["n_visual"] = cfg.n_visual;
    doc["n_text"] = cfg.n_text;
    doc["n_layers"] = cfg.n_layers;
    doc["decode_steps"] = cfg.decode_steps;
    doc["head_dim"] = cfg.head_dim;
    doc["rho"] = cfg.rho;
    doc["seed"] = cfg.seed;
    doc["visual_salience"] = salience_to_value(cfg.visual_salience);
    doc["text_salience"] = salience_to_value(cfg.text_salience);
    return doc;
}

StreamConfig stream_config_from_value(const ordered_json& doc) {
    KVEVICT_REQUIRE(doc.is_object(), "format-error", "stream config must be a JSON object");
    StreamConfig cfg;
    if (doc.contains("n_visual")) cfg.n_visual = doc["n_visual"].get<std::size_t>();
    if (doc.contains("n_text")) cfg.n_text = doc["n_text"].get<std::size_t>();
    if (doc.contains("n_layers")) cfg.n_layers = doc["n_layers"].get<std::size_t>();
    if (doc.contains("decode_steps")) cfg.decode_steps = doc["decode_steps"].get<std::size_t>();
    if (doc.contains("head_dim")) cfg.head_dim = doc["head_dim"].get<std::size_t>();
    if (doc.contains("rho")) cfg.rho = doc["rho"].get<double>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("visual_salience")) {
        cfg.visual_salience = salience_from_value(doc["visual_salience"]);
    }
    if (doc.contains("text_salience")) {
        cfg.text_salience = salience_from_value(doc["text_salience"]);
    }
    return cfg;
}

std::vector<std::size_t> index_array_from_value(const ordered_json& doc, const char* field) {
    KVEVICT_REQUIRE(doc.is_array(), "format-error",
                    std::string("\"") + field + "\" must be an array of indices");
    std::vector<std::size_t> out;
    out.reserve(doc.size());
    for (const ordered_json& v : doc) {
        KVEVICT_REQUIRE(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0),
                        "format-error",
                        std::string("\"") + field + "\" entries must be non-negative integers");
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

}  // namespace

std::string matrix_to_json(const AttentionMatrix& m) { return matrix_to_value(m).dump(); }

AttentionMatrix matrix_from_json(const std::string& text) {
    return matrix_from_value(parse_or_throw(text));
}

std::string trace_to_json(const GeneratedTrace& trace) {
    ordered_json doc;
    doc["version"] = 1;
    doc["seed"] = trace.seed();
    doc["prng"] = std::string(rng::kAlgorithmId);
    doc["config"] = stream_config_to_value(trace.config());
    ordered_json layers = ordered_json::array();
    for (std::size_t layer = 0; layer < trace.layer_count(); ++layer) {
        layers.push_back(matrix_to_value(trace.full_matrix(layer)));
    }
    doc["layers"] = std::move(layers);
    return doc.dump();
}

TraceDocument trace_document_from_json(const std::string& text) {
    const ordered_json doc = parse_or_throw(text);
    KVEVICT_REQUIRE(doc.is_object(), "format-error", "trace document must be a JSON object");

    TraceDocument out;
    if (!doc.contains("layers")) {
        // Bare matrix document: one layer, no header.
        out.layers.push_back(matrix_from_value(doc));
        return out;
    }

    if (doc.contains("seed")) {
        KVEVICT_REQUIRE(doc["seed"].is_number_integer() || doc["seed"].is_number_unsigned(),
                        "format-error", "\"seed\" must be an integer");
        out.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("prng")) {
        KVEVICT_REQUIRE(doc["prng"].is_string(), "format-error", "\"prng\" must be a string");
        out.prng = doc["prng"].get<std::string>();
    }
    if (doc.contains("config")) {
        out.config = stream_config_from_value(doc["config"]);
    }
    KVEVICT_REQUIRE(doc["layers"].is_array() && !doc["layers"].empty(), "format-error",
                    "\"layers\" must be a non-empty array");
    for (const ordered_json& layer : doc["layers"]) {
        out.layers.push_back(matrix_from_value(layer));
    }
    return out;
}

std::string decision_to_json(const PruneDecision& decision) {
    ordered_json doc;
    doc["retained"] = decision.retained;
    doc["evicted"] = decision.evicted;
    doc["layer_origin"] = decision.layer_origin;
    return doc.dump();
}

PruneDecision decision_from_json(const std::string& text) {
    const ordered_json doc = parse_or_throw(text);
    KVEVICT_REQUIRE(doc.is_object(), "format-error", "decision document must be a JSON object");
    KVEVICT_REQUIRE(doc.contains("retained") && doc.contains("evicted"), "format-error",
                    "decision document needs \"retained\" and \"evicted\" arrays");
    PruneDecision decision;
    decision.retained = index_array_from_value(doc["retained"], "retained");
    decision.evicted = index_array_from_value(doc["evicted"], "evicted");
    if (doc.contains("layer_origin")) {
        decision.layer_origin = doc["layer_origin"].get<std::size_t>();
    }
    return decision;
}

std::string event_to_json_line(const StepEvent& event) {
    // Hand-rendered to keep the documented field order and number formatting
    // stable across library versions.
    std::string line = "{\"step\":";
    line += detail::format_int(event.step);
    line += ",\"cache_size\":";
    line += detail::format_uint(event.cache_size);
    line += ",\"marked\":";
    line += event.marked.has_value() ? detail::format_uint(*event.marked) : "null";
    line += ",\"flushed\":[";
    for (std::size_t i = 0; i < event.flushed.size(); ++i) {
        if (i > 0) {
            line += ',';
        }
        line += detail::format_uint(event.flushed[i]);
    }
    line += "],\"loss\":";
    line += detail::format_double(event.loss);
    line += '}';
    return line;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    KVEVICT_REQUIRE(in.good(), "io-error", "cannot open \"" + path + "\" for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    KVEVICT_REQUIRE(!in.bad(), "io-error", "read failure on \"" + path + "\"");
    return std::move(buf).str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    KVEVICT_REQUIRE(out.good(), "io-error", "cannot open \"" + path + "\" for writing");
    out << content;
    out.flush();
    KVEVICT_REQUIRE(out.good(), "io-error", "write failure on \"" + path + "\"");
}

}  // namespace kvevict
