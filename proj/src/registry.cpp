// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/registry.hpp"

#include "seqedit/toy_unet.hpp"

namespace seqedit {

using nlohmann::json;

std::string_view to_string(AdapterKind kind) {
    switch (kind) {
        case AdapterKind::Backend: return "backend";
        case AdapterKind::Embedder: return "embedder";
        case AdapterKind::MaskProvider: return "mask-provider";
        case AdapterKind::Codec: return "codec";
    }
    return "adapter";
}

AdapterRegistry::AdapterRegistry()
    : backends(AdapterKind::Backend),
      embedders(AdapterKind::Embedder),
      mask_providers(AdapterKind::MaskProvider),
      codecs(AdapterKind::Codec) {}

namespace {

template <typename T>
T param(const json& params, const char* key, T fallback, std::string_view adapter) {
    if (!params.contains(key)) return fallback;
    try {
        return params.at(key).get<T>();
    } catch (const json::exception&) {
        raise(ErrorKind::Config, adapter, " parameter '", key, "' has the wrong type: ", params.at(key).dump());
    }
}

void reject_unknown(const json& params, std::initializer_list<const char*> known, std::string_view adapter) {
    for (const auto& [k, v] : params.items()) {
        bool ok = false;
        for (const char* name : known) ok = ok || k == name;
        SEQEDIT_CHECK(ok, Config, "unknown ", adapter, " parameter '", k, "'");
    }
}

}  // namespace

AdapterRegistry AdapterRegistry::with_builtins() {
    AdapterRegistry r;
    r.register_backend("toy", [](const json& p, std::uint64_t seed) -> std::unique_ptr<DenoiserBackend> {
        reject_unknown(p, {"seed", "base_channels", "embedding_dim", "groups", "data_variance", "residual_gain"},
                       "toy backend");
        ToyUNetConfig c;
        c.seed = param<std::uint64_t>(p, "seed", seed, "toy backend");
        c.base_channels = param(p, "base_channels", c.base_channels, "toy backend");
        c.embedding_dim = param(p, "embedding_dim", c.embedding_dim, "toy backend");
        c.groups = param(p, "groups", c.groups, "toy backend");
        c.data_variance = param(p, "data_variance", c.data_variance, "toy backend");
        c.residual_gain = param(p, "residual_gain", c.residual_gain, "toy backend");
        return std::make_unique<ToyUNet>(c);
    });
    r.register_codec("identity", [](const json& p, std::uint64_t) -> std::unique_ptr<Codec> {
        reject_unknown(p, {}, "identity codec");
        return std::make_unique<IdentityCodec>();
    });
    r.register_embedder("stub", [](const json& p, std::uint64_t) -> std::unique_ptr<Embedder> {
        reject_unknown(p, {"seed", "dim", "grid"}, "stub embedder");
        return std::make_unique<StubEmbedder>(param<std::uint64_t>(p, "seed", 7, "stub embedder"),
                                              param(p, "dim", 64, "stub embedder"),
                                              param(p, "grid", 8, "stub embedder"));
    });
    r.register_mask_provider("constant", [](const json& p, std::uint64_t) -> std::unique_ptr<MaskProvider> {
        reject_unknown(p, {"value"}, "constant mask");
        return std::make_unique<ConstantMaskProvider>(param(p, "value", 1.0, "constant mask"));
    });
    r.register_mask_provider("rectangle", [](const json& p, std::uint64_t) -> std::unique_ptr<MaskProvider> {
        reject_unknown(p, {"x0", "y0", "x1", "y1"}, "rectangle mask");
        return std::make_unique<RectangleMaskProvider>(
            param(p, "x0", 0.0, "rectangle mask"), param(p, "y0", 0.0, "rectangle mask"),
            param(p, "x1", 1.0, "rectangle mask"), param(p, "y1", 1.0, "rectangle mask"));
    });
    r.register_mask_provider("file", [](const json& p, std::uint64_t) -> std::unique_ptr<MaskProvider> {
        reject_unknown(p, {"path"}, "file mask");
        const auto path = param<std::string>(p, "path", "", "file mask");
        SEQEDIT_CHECK(!path.empty(), Config, "file mask needs params.path");
        return std::make_unique<FileMaskProvider>(path);
    });
    return r;
}

}  // namespace seqedit
