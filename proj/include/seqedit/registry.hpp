// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "seqedit/denoiser.hpp"
#include "seqedit/error.hpp"
#include "seqedit/image.hpp"
#include "seqedit/mask.hpp"
#include "seqedit/metrics.hpp"

namespace seqedit {

enum class AdapterKind { Backend, Embedder, MaskProvider, Codec };

std::string_view to_string(AdapterKind kind);

/// Factories receive the adapter's "params" object and the run's master seed.
template <typename T>
using AdapterFactory = std::function<std::unique_ptr<T>(const nlohmann::json& params, std::uint64_t seed)>;

/// Named factories for one adapter kind.
template <typename T>
class AdapterTable {
public:
    explicit AdapterTable(AdapterKind kind) : m_kind(kind) {}

    void add(const std::string& id, AdapterFactory<T> factory) {
        SEQEDIT_CHECK(!id.empty(), Registry, to_string(m_kind), " adapter id must not be empty");
        SEQEDIT_CHECK(factory != nullptr, Registry, to_string(m_kind), " adapter '", id, "' has no factory");
        SEQEDIT_CHECK(!m_factories.contains(id), Registry, to_string(m_kind), " adapter '", id,
                      "' is already registered");
        m_factories.emplace(id, std::move(factory));
    }

    bool contains(const std::string& id) const { return m_factories.contains(id); }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& [id, f] : m_factories) out.push_back(id);
        return out;
    }

    std::unique_ptr<T> create(const std::string& id, const nlohmann::json& params, std::uint64_t seed) const {
        auto it = m_factories.find(id);
        if (it == m_factories.end()) {
            std::string known;
            for (const auto& k : ids()) known += (known.empty() ? "" : ", ") + k;
            raise(ErrorKind::Registry, "unknown ", to_string(m_kind), " '", id, "'; registered: ", known);
        }
        auto made = it->second(params.is_null() ? nlohmann::json::object() : params, seed);
        SEQEDIT_CHECK(made != nullptr, Registry, to_string(m_kind), " factory '", id, "' returned nothing");
        return made;
    }

private:
    AdapterKind m_kind;
    std::map<std::string, AdapterFactory<T>> m_factories;
};

class AdapterRegistry {
public:
    AdapterRegistry();

    /// Registry holding the toy backend, the identity codec, the stub
    /// embedder and the constant, rectangle and file mask providers.
    static AdapterRegistry with_builtins();

    void register_backend(const std::string& id, AdapterFactory<DenoiserBackend> f) { backends.add(id, std::move(f)); }
    void register_embedder(const std::string& id, AdapterFactory<Embedder> f) { embedders.add(id, std::move(f)); }
    void register_mask_provider(const std::string& id, AdapterFactory<MaskProvider> f) {
        mask_providers.add(id, std::move(f));
    }
    void register_codec(const std::string& id, AdapterFactory<Codec> f) { codecs.add(id, std::move(f)); }

    AdapterTable<DenoiserBackend> backends;
    AdapterTable<Embedder> embedders;
    AdapterTable<MaskProvider> mask_providers;
    AdapterTable<Codec> codecs;
};

}  // namespace seqedit
