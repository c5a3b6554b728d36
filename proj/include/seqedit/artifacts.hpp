// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "seqedit/ddim.hpp"
#include "seqedit/sampler.hpp"

namespace seqedit {

/// Tensor container file, byte layout:
///
///   u64 LE   header length N
///   N bytes  UTF-8 JSON header, space padded to a multiple of 8
///   data     concatenated little-endian IEEE-754 float64 payloads
///
/// Header: {"__metadata__": {...}, "<name>": {"dtype": "F64", "shape": [...],
/// "data_offsets": [begin, end]}, ...}. Offsets are relative to the start of
/// the data section; tensors are written in name order.
struct TensorFile {
    nlohmann::json metadata = nlohmann::json::object();
    std::map<std::string, Tensor> tensors;
};

void write_tensor_file(const TensorFile& file, const std::filesystem::path& path);
TensorFile read_tensor_file(const std::filesystem::path& path);

/// Tensor names:
///   latent.<level>                      levels 0..T
///   eps_inv.<step>                      steps 0..T-1
///   trace.<step>.attn.<layer>.<q|k|v>
///   trace.<step>.res.<layer>
/// Metadata holds image_id, prompt, guidance_scale, layers and total_steps.
void save_inversion_record(const InversionRecord& record, const std::filesystem::path& path);
InversionRecord load_inversion_record(const std::filesystem::path& path);

/// Tensor names: final_latent plus trace.* as above.
void save_edit_trace(const EditTrace& trace, const std::filesystem::path& path);
EditTrace load_edit_trace(const std::filesystem::path& path);

/// Lowercase hex SHA-256 of a file.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

/// Writes text atomically (temp file + rename).
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace seqedit
