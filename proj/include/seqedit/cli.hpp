// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "seqedit/config.hpp"
#include "seqedit/error.hpp"

namespace seqedit {

/// Process exit codes of the seqedit tool.
enum class ExitCode : int {
    Ok = 0,
    Internal = 1,  // unexpected failure
    Usage = 2,     // bad command line
    Config = 3,    // invalid configuration, plan or inputs
    Io = 4,        // unreadable or unwritable files
    Backend = 5,   // backend, codec, embedder or numeric failure
    Registry = 6,  // unknown or duplicate adapter id
};

ExitCode exit_code_for(ErrorKind kind);

struct ArtifactEntry {
    std::string path;  // relative to the output directory
    std::string sha256;

    friend bool operator==(const ArtifactEntry&, const ArtifactEntry&) = default;
};

struct ImageEntry {
    std::string id;
    std::string input;  // as given on the command line
    std::string input_sha256;
    std::string output;  // relative to the output directory; empty when not produced
    std::string output_sha256;

    friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

/// manifest.json of a run. Holds no wall-clock data, so two runs with the
/// same inputs and config give byte-identical manifests; stage timings go to
/// the timings.json sidecar.
struct RunManifest {
    std::string command;
    RunConfig config;
    std::string backend_id;
    LayerSet layers;  // resolved
    std::vector<ImageEntry> images;
    std::vector<ArtifactEntry> artifacts;
    nlohmann::json details = nlohmann::json::object();  // command specific, e.g. the crop plan
    std::size_t completed = 0;
    bool complete = false;

    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);
void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

/// Wall-clock seconds per named stage.
class StageTimer {
public:
    class Scope {
    public:
        Scope(StageTimer& timer, std::string stage);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        StageTimer& m_timer;
        std::string m_stage;
        std::chrono::steady_clock::time_point m_start;
    };

    Scope scope(std::string stage) { return Scope(*this, std::move(stage)); }
    void add(const std::string& stage, double seconds) { m_seconds[stage] += seconds; }
    nlohmann::json to_json() const;

private:
    std::map<std::string, double> m_seconds;
};

/// Image files (.png, .ppm, .pgm) of a directory sorted by name, or the path
/// itself when it is a file.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& input);

/// Entry point of the seqedit tool; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace seqedit
