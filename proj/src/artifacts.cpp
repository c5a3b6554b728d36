// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/artifacts.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace seqedit {

using nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "the container writer assumes a little-endian host");

namespace {

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

}  // namespace

void write_text_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        SEQEDIT_CHECK(f.good(), Io, "cannot open ", tmp, " for writing");
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        SEQEDIT_CHECK(f.good(), Io, "write to ", tmp, " failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    SEQEDIT_CHECK(!ec, Io, "cannot move ", tmp, " to ", path, ": ", ec.message());
}

std::string read_text_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    SEQEDIT_CHECK(f.good(), Io, "cannot open ", path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_tensor_file(const TensorFile& file, const fs::path& path) {
    json header = json::object();
    header["__metadata__"] = file.metadata;
    std::uint64_t offset = 0;
    for (const auto& [name, t] : file.tensors) {
        SEQEDIT_CHECK(name != "__metadata__", Validation, "reserved tensor name");
        const std::uint64_t bytes = t.size() * sizeof(double);
        header[name] = {{"dtype", "F64"}, {"shape", t.shape()}, {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    std::string head = header.dump();
    while (head.size() % 8 != 0) head.push_back(' ');

    std::string out;
    out.reserve(8 + head.size() + offset);
    put_u64(out, head.size());
    out += head;
    for (const auto& [name, t] : file.tensors) {
        const auto* p = reinterpret_cast<const char*>(t.values().data());
        out.append(p, t.size() * sizeof(double));
    }
    write_text_file(path, out);
}

TensorFile read_tensor_file(const fs::path& path) {
    const std::string raw = read_text_file(path);
    SEQEDIT_CHECK(raw.size() >= 8, Io, path, ": truncated container");
    const std::uint64_t n = get_u64(raw.data());
    SEQEDIT_CHECK(n <= raw.size() - 8, Io, path, ": header length ", n, " exceeds file size");
    json header;
    try {
        header = json::parse(raw.substr(8, n));
    } catch (const json::exception& e) {
        raise(ErrorKind::Io, path, ": bad container header: ", e.what());
    }
    const std::size_t data_begin = 8 + n;
    const std::size_t data_size = raw.size() - data_begin;

    TensorFile file;
    for (const auto& [name, entry] : header.items()) {
        if (name == "__metadata__") {
            file.metadata = entry;
            continue;
        }
        try {
            SEQEDIT_CHECK(entry.at("dtype") == "F64", Io, path, ": tensor '", name, "' has unsupported dtype ",
                          entry.at("dtype").dump());
            const auto shape = entry.at("shape").get<Shape>();
            const auto begin = entry.at("data_offsets").at(0).get<std::uint64_t>();
            const auto end = entry.at("data_offsets").at(1).get<std::uint64_t>();
            Tensor t(shape);
            SEQEDIT_CHECK(begin <= end && end <= data_size && end - begin == t.size() * sizeof(double), Io, path,
                          ": tensor '", name, "' has inconsistent offsets");
            std::memcpy(t.values().data(), raw.data() + data_begin + begin, end - begin);
            file.tensors.emplace(name, std::move(t));
        } catch (const json::exception& e) {
            raise(ErrorKind::Io, path, ": malformed entry for '", name, "': ", e.what());
        }
    }
    return file;
}

namespace {

json layers_json(const LayerSet& l) {
    return {{"attention", l.attention_layers}, {"resnet", l.resnet_layers}};
}

LayerSet layers_from(const json& j) {
    return {j.at("attention").get<std::vector<int>>(), j.at("resnet").get<std::vector<int>>()};
}

void put_bundle(TensorFile& file, const FeatureBundle& b, const std::string& prefix) {
    for (const auto& [layer, f] : b.attention) {
        const std::string p = prefix + "attn." + std::to_string(layer) + ".";
        if (f.q) file.tensors.emplace(p + "q", *f.q);
        if (f.k) file.tensors.emplace(p + "k", *f.k);
        if (f.v) file.tensors.emplace(p + "v", *f.v);
    }
    for (const auto& [layer, f] : b.resnet) {
        if (f) file.tensors.emplace(prefix + "res." + std::to_string(layer), *f);
    }
}

void put_trace(TensorFile& file, const FeatureTrace& trace) {
    json branches = json::array();
    for (const auto& b : trace.bundles()) {
        const std::string prefix = "trace." + std::to_string(b.step_index) + ".";
        put_bundle(file, b, prefix);
        if (b.unconditional) {
            put_bundle(file, *b.unconditional, prefix + "uncond.");
            branches.push_back(b.step_index);
        }
    }
    file.metadata["trace"] = {{"origin", trace.origin() == TraceOrigin::Inversion ? "inversion" : "edit"},
                              {"source_image_id", trace.source_image_id()},
                              {"steps", trace.size()},
                              {"unconditional_steps", branches}};
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

FeatureTrace take_trace(TensorFile& file, const fs::path& path) {
    const json& meta = file.metadata.at("trace");
    const auto steps = meta.at("steps").get<std::size_t>();
    const std::string id = meta.at("source_image_id").get<std::string>();
    std::vector<FeatureBundle> bundles(steps);
    std::vector<FeatureBundle> uncond(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        bundles[s].step_index = uncond[s].step_index = static_cast<int>(s);
        bundles[s].path_id = uncond[s].path_id = id;
    }
    for (auto it = file.tensors.begin(); it != file.tensors.end();) {
        if (it->first.rfind("trace.", 0) != 0) {
            ++it;
            continue;
        }
        auto parts = split(it->first, '.');
        const bool is_uncond = parts.size() > 2 && parts[2] == "uncond";
        if (is_uncond) parts.erase(parts.begin() + 2);
        int step = -1;
        int layer = -1;
        try {
            step = std::stoi(parts.at(1));
            layer = std::stoi(parts.at(3));
        } catch (const std::exception&) {
            raise(ErrorKind::Io, path, ": bad trace tensor name '", it->first, "'");
        }
        SEQEDIT_CHECK(step >= 0 && static_cast<std::size_t>(step) < steps, Io, path, ": trace step ", step,
                      " outside ", steps, " steps");
        auto ref = share(std::move(it->second));
        auto& b = (is_uncond ? uncond : bundles)[static_cast<std::size_t>(step)];
        if (parts[2] == "res" && parts.size() == 4) {
            b.resnet[layer] = ref;
        } else if (parts[2] == "attn" && parts.size() == 5) {
            auto& a = b.attention[layer];
            if (parts[4] == "q") a.q = ref;
            else if (parts[4] == "k") a.k = ref;
            else if (parts[4] == "v") a.v = ref;
            else raise(ErrorKind::Io, path, ": bad trace tensor name '", it->first, "'");
        } else {
            raise(ErrorKind::Io, path, ": bad trace tensor name '", it->first, "'");
        }
        it = file.tensors.erase(it);
    }
    for (const auto& s : meta.value("unconditional_steps", json::array())) {
        const auto i = s.get<std::size_t>();
        SEQEDIT_CHECK(i < steps, Io, path, ": unconditional step ", i, " outside ", steps, " steps");
        bundles[i].unconditional = std::make_shared<const FeatureBundle>(std::move(uncond[i]));
    }
    const auto origin = meta.at("origin") == "edit" ? TraceOrigin::Edit : TraceOrigin::Inversion;
    return FeatureTrace(origin, id, std::move(bundles));
}

Tensor take(TensorFile& file, const std::string& name, const fs::path& path) {
    auto it = file.tensors.find(name);
    SEQEDIT_CHECK(it != file.tensors.end(), Io, path, ": missing tensor '", name, "'");
    Tensor t = std::move(it->second);
    file.tensors.erase(it);
    return t;
}

}  // namespace

void save_inversion_record(const InversionRecord& record, const fs::path& path) {
    record.validate();
    TensorFile file;
    file.metadata = {{"kind", "inversion_record"},
                     {"image_id", record.image_id},
                     {"prompt", record.prompt},
                     {"guidance_scale", record.guidance_scale},
                     {"layers", layers_json(record.layers)},
                     {"total_steps", record.total_steps}};
    for (std::size_t i = 0; i < record.latents.size(); ++i) file.tensors.emplace("latent." + std::to_string(i), record.latents[i]);
    for (std::size_t i = 0; i < record.eps_inv.size(); ++i) file.tensors.emplace("eps_inv." + std::to_string(i), record.eps_inv[i]);
    put_trace(file, record.trace);
    write_tensor_file(file, path);
}

InversionRecord load_inversion_record(const fs::path& path) {
    TensorFile file = read_tensor_file(path);
    InversionRecord r;
    try {
        const json& m = file.metadata;
        SEQEDIT_CHECK(m.value("kind", "") == "inversion_record", Io, path, " is not an inversion record");
        r.image_id = m.at("image_id").get<std::string>();
        r.prompt = m.at("prompt").get<std::string>();
        r.guidance_scale = m.at("guidance_scale").get<double>();
        r.layers = layers_from(m.at("layers"));
        r.total_steps = m.at("total_steps").get<int>();
        for (int i = 0; i <= r.total_steps; ++i) r.latents.push_back(take(file, "latent." + std::to_string(i), path));
        for (int i = 0; i < r.total_steps; ++i) r.eps_inv.push_back(take(file, "eps_inv." + std::to_string(i), path));
        r.trace = take_trace(file, path);
    } catch (const json::exception& e) {
        raise(ErrorKind::Io, path, ": malformed record metadata: ", e.what());
    }
    r.validate();
    return r;
}

void save_edit_trace(const EditTrace& trace, const fs::path& path) {
    TensorFile file;
    file.metadata = {{"kind", "edit_trace"}, {"total_steps", trace.total_steps}};
    file.tensors.emplace("final_latent", trace.final_latent);
    put_trace(file, trace.features);
    write_tensor_file(file, path);
}

EditTrace load_edit_trace(const fs::path& path) {
    TensorFile file = read_tensor_file(path);
    EditTrace t;
    try {
        SEQEDIT_CHECK(file.metadata.value("kind", "") == "edit_trace", Io, path, " is not an edit trace");
        t.total_steps = file.metadata.at("total_steps").get<int>();
        t.final_latent = take(file, "final_latent", path);
        t.features = take_trace(file, path);
    } catch (const json::exception& e) {
        raise(ErrorKind::Io, path, ": malformed trace metadata: ", e.what());
    }
    return t;
}

namespace {

std::string to_hex(const unsigned char* d, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < n; ++i) {
        s.push_back(digits[d[i] >> 4]);
        s.push_back(digits[d[i] & 0xF]);
    }
    return s;
}

}  // namespace

std::string sha256_bytes(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    SEQEDIT_CHECK(EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) == 1, Backend,
                  "SHA-256 failed");
    return to_hex(digest, len);
}

std::string sha256_file(const fs::path& path) {
    return sha256_bytes(read_text_file(path));
}

}  // namespace seqedit
