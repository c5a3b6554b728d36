// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "seqedit/core.hpp"

namespace seqedit {

struct AdapterSpec {
    std::string id;
    nlohmann::json params = nlohmann::json::object();

    friend bool operator==(const AdapterSpec&, const AdapterSpec&) = default;
};

struct MaskSpec {
    std::string provider = "constant";
    std::string query;  // text query; the file stem for directory-backed masks
    nlohmann::json params = nlohmann::json::object();
    bool binary = true;

    friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

/// Everything a CLI run depends on. Serialized as the run-config JSON
/// document; see README for the schema. Precedence: built-in defaults of the
/// subcommand, then the config file, then command-line flags.
struct RunConfig {
    std::uint64_t seed = 0;
    AdapterSpec backend{"toy", nlohmann::json::object()};
    AdapterSpec codec{"identity", nlohmann::json::object()};
    AdapterSpec embedder{"stub", nlohmann::json::object()};
    int steps = 50;
    int s_edit = 20;
    int s_context = 50;
    bool inject_f = true;
    bool inject_q = true;
    bool inject_k = true;
    bool inject_v = true;
    std::optional<LayerSet> layers;  // backend default when absent
    double guidance_scale = 7.5;
    std::string source_prompt;
    std::string target_prompt;
    std::string inversion_prompt;
    double inversion_guidance = 1.0;
    std::string follower_value = "live";  // live | inverted
    std::string reference = "chained";    // chained | fixed
    int ref_index = 0;
    std::optional<MaskSpec> mask;
    int image_width = 0;   // 0 keeps the input size
    int image_height = 0;
    int window = 512;
    int stride = 256;
    int workers = 1;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::json to_json(const RunConfig& config);
/// Strict: unknown keys and wrong types are Config errors. Missing keys keep
/// the values already in `base`.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void save_config(const RunConfig& config, const std::filesystem::path& path);

/// Checks ranges that do not need a backend (steps, thresholds, workers,
/// enum strings).
void validate_config(const RunConfig& config);

/// The injection part of the config.
InjectionSchedule schedule_of(const RunConfig& config);

}  // namespace seqedit
