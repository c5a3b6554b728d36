// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/config.hpp"

#include <set>

#include "seqedit/artifacts.hpp"
#include "seqedit/error.hpp"

namespace seqedit {

using nlohmann::json;

namespace {

json adapter_json(const AdapterSpec& a) {
    return {{"id", a.id}, {"params", a.params}};
}

// Reads known keys from an object and rejects the rest.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : m_j(j), m_where(std::move(where)) {
        SEQEDIT_CHECK(j.is_object(), Config, m_where, " must be an object");
        for (const auto& [k, v] : j.items()) m_unused.insert(k);
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (!m_j.contains(key)) return;
        m_unused.erase(key);
        try {
            out = m_j.at(key).get<T>();
        } catch (const json::exception&) {
            raise(ErrorKind::Config, m_where, ".", key, " has the wrong type: ", m_j.at(key).dump());
        }
    }

    const json* child(const char* key) {
        if (!m_j.contains(key)) return nullptr;
        m_unused.erase(key);
        return &m_j.at(key);
    }

    void finish() const {
        if (!m_unused.empty()) raise(ErrorKind::Config, "unknown key '", *m_unused.begin(), "' in ", m_where);
    }

private:
    const json& m_j;
    std::string m_where;
    std::set<std::string> m_unused;
};

void read_adapter(const json& j, AdapterSpec& out, const std::string& where) {
    if (j.is_string()) {
        out.id = j.get<std::string>();
        out.params = json::object();
        return;
    }
    ObjectReader r(j, where);
    r.get("id", out.id);
    if (const json* p = r.child("params")) {
        SEQEDIT_CHECK(p->is_object(), Config, where, ".params must be an object");
        out.params = *p;
    }
    r.finish();
}

}  // namespace

json to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["backend"] = adapter_json(c.backend);
    j["codec"] = adapter_json(c.codec);
    j["embedder"] = adapter_json(c.embedder);
    j["steps"] = c.steps;
    j["schedule"] = {{"s_edit", c.s_edit},
                     {"s_context", c.s_context},
                     {"inject", {{"f", c.inject_f}, {"q", c.inject_q}, {"k", c.inject_k}, {"v", c.inject_v}}}};
    j["layers"] = c.layers ? json{{"attention", c.layers->attention_layers}, {"resnet", c.layers->resnet_layers}}
                           : json(nullptr);
    j["guidance_scale"] = c.guidance_scale;
    j["source_prompt"] = c.source_prompt;
    j["target_prompt"] = c.target_prompt;
    j["inversion"] = {{"prompt", c.inversion_prompt}, {"guidance_scale", c.inversion_guidance}};
    j["follower_value"] = c.follower_value;
    j["reference"] = {{"strategy", c.reference}, {"index", c.ref_index}};
    j["mask"] = c.mask ? json{{"provider", c.mask->provider},
                              {"query", c.mask->query},
                              {"params", c.mask->params},
                              {"binary", c.mask->binary}}
                       : json(nullptr);
    j["image"] = {{"width", c.image_width}, {"height", c.image_height}};
    j["panorama"] = {{"window", c.window}, {"stride", c.stride}};
    j["workers"] = c.workers;
    return j;
}

RunConfig config_from_json(const json& j, RunConfig c) {
    ObjectReader r(j, "config");
    r.get("seed", c.seed);
    if (const json* a = r.child("backend")) read_adapter(*a, c.backend, "backend");
    if (const json* a = r.child("codec")) read_adapter(*a, c.codec, "codec");
    if (const json* a = r.child("embedder")) read_adapter(*a, c.embedder, "embedder");
    r.get("steps", c.steps);
    if (const json* s = r.child("schedule")) {
        ObjectReader sr(*s, "schedule");
        sr.get("s_edit", c.s_edit);
        sr.get("s_context", c.s_context);
        if (const json* inj = sr.child("inject")) {
            ObjectReader ir(*inj, "schedule.inject");
            ir.get("f", c.inject_f);
            ir.get("q", c.inject_q);
            ir.get("k", c.inject_k);
            ir.get("v", c.inject_v);
            ir.finish();
        }
        sr.finish();
    }
    if (const json* l = r.child("layers")) {
        if (l->is_null()) {
            c.layers.reset();
        } else {
            ObjectReader lr(*l, "layers");
            LayerSet set = c.layers.value_or(LayerSet{});
            lr.get("attention", set.attention_layers);
            lr.get("resnet", set.resnet_layers);
            lr.finish();
            c.layers = set;
        }
    }
    r.get("guidance_scale", c.guidance_scale);
    r.get("source_prompt", c.source_prompt);
    r.get("target_prompt", c.target_prompt);
    if (const json* inv = r.child("inversion")) {
        ObjectReader ir(*inv, "inversion");
        ir.get("prompt", c.inversion_prompt);
        ir.get("guidance_scale", c.inversion_guidance);
        ir.finish();
    }
    r.get("follower_value", c.follower_value);
    if (const json* ref = r.child("reference")) {
        ObjectReader rr(*ref, "reference");
        rr.get("strategy", c.reference);
        rr.get("index", c.ref_index);
        rr.finish();
    }
    if (const json* m = r.child("mask")) {
        if (m->is_null()) {
            c.mask.reset();
        } else {
            MaskSpec spec = c.mask.value_or(MaskSpec{});
            ObjectReader mr(*m, "mask");
            mr.get("provider", spec.provider);
            mr.get("query", spec.query);
            if (const json* p = mr.child("params")) {
                SEQEDIT_CHECK(p->is_object(), Config, "mask.params must be an object");
                spec.params = *p;
            }
            mr.get("binary", spec.binary);
            mr.finish();
            c.mask = spec;
        }
    }
    if (const json* img = r.child("image")) {
        ObjectReader ir(*img, "image");
        ir.get("width", c.image_width);
        ir.get("height", c.image_height);
        ir.finish();
    }
    if (const json* p = r.child("panorama")) {
        ObjectReader pr(*p, "panorama");
        pr.get("window", c.window);
        pr.get("stride", c.stride);
        pr.finish();
    }
    r.get("workers", c.workers);
    r.finish();
    return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    const std::string text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorKind::Config, path, ": not valid JSON: ", e.what());
    }
    try {
        return config_from_json(j, std::move(base));
    } catch (const Error& e) {
        raise(e.kind(), path, ": ", e.what());
    }
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
    write_text_file(path, to_json(config).dump(2) + "\n");
}

InjectionSchedule schedule_of(const RunConfig& c) {
    return {c.steps, c.s_edit, c.s_context, c.inject_f, c.inject_q, c.inject_k, c.inject_v};
}

void validate_config(const RunConfig& c) {
    try {
        validate_schedule(schedule_of(c));
    } catch (const Error& e) {
        raise(ErrorKind::Config, e.what());
    }
    SEQEDIT_CHECK(c.follower_value == "live" || c.follower_value == "inverted", Config,
                  "follower_value must be 'live' or 'inverted', got '", c.follower_value, "'");
    SEQEDIT_CHECK(c.reference == "chained" || c.reference == "fixed", Config,
                  "reference.strategy must be 'chained' or 'fixed', got '", c.reference, "'");
    SEQEDIT_CHECK(c.ref_index >= 0, Config, "reference.index must be >= 0");
    SEQEDIT_CHECK(c.workers >= 1, Config, "workers must be >= 1");
    SEQEDIT_CHECK(c.guidance_scale >= 0.0 && c.inversion_guidance >= 0.0, Config, "guidance scales must be >= 0");
    SEQEDIT_CHECK(c.image_width >= 0 && c.image_height >= 0, Config, "image size must be >= 0");
    SEQEDIT_CHECK(c.window > 0 && c.stride > 0, Config, "panorama window and stride must be positive");
}

}  // namespace seqedit
