// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "seqedit/artifacts.hpp"
#include "seqedit/drivers.hpp"
#include "seqedit/mask.hpp"
#include "seqedit/metrics.hpp"
#include "seqedit/registry.hpp"
#include "seqedit/toy_data.hpp"

namespace seqedit {

using nlohmann::json;
namespace fs = std::filesystem;

ExitCode exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation:
        case ErrorKind::Range:
        case ErrorKind::Config: return ExitCode::Config;
        case ErrorKind::Io: return ExitCode::Io;
        case ErrorKind::Shape:
        case ErrorKind::Numeric:
        case ErrorKind::Backend: return ExitCode::Backend;
        case ErrorKind::Registry: return ExitCode::Registry;
    }
    return ExitCode::Internal;
}

// ---------------------------------------------------------------- manifest

json to_json(const RunManifest& m) {
    json images = json::array();
    for (const auto& e : m.images) {
        images.push_back({{"id", e.id},
                          {"input", e.input},
                          {"input_sha256", e.input_sha256},
                          {"output", e.output},
                          {"output_sha256", e.output_sha256}});
    }
    json artifacts = json::array();
    for (const auto& a : m.artifacts) artifacts.push_back({{"path", a.path}, {"sha256", a.sha256}});
    return {{"format", "seqedit-manifest/1"},
            {"command", m.command},
            {"seed", m.config.seed},
            {"backend", m.backend_id},
            {"schedule",
             {{"total_steps", m.config.steps},
              {"s_edit", m.config.s_edit},
              {"s_context", m.config.s_context},
              {"inject",
               {{"f", m.config.inject_f}, {"q", m.config.inject_q}, {"k", m.config.inject_k},
                {"v", m.config.inject_v}}}}},
            {"layers", {{"attention", m.layers.attention_layers}, {"resnet", m.layers.resnet_layers}}},
            {"config", to_json(m.config)},
            {"images", images},
            {"artifacts", artifacts},
            {"details", m.details},
            {"completed", m.completed},
            {"complete", m.complete},
            {"timings", "timings.json"}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        SEQEDIT_CHECK(j.at("format") == "seqedit-manifest/1", Config, "unsupported manifest format ",
                      j.at("format").dump());
        m.command = j.at("command").get<std::string>();
        m.config = config_from_json(j.at("config"));
        m.backend_id = j.at("backend").get<std::string>();
        m.layers = {j.at("layers").at("attention").get<std::vector<int>>(),
                    j.at("layers").at("resnet").get<std::vector<int>>()};
        for (const auto& e : j.at("images")) {
            m.images.push_back({e.at("id"), e.at("input"), e.at("input_sha256"), e.at("output"),
                                e.at("output_sha256")});
        }
        for (const auto& a : j.at("artifacts")) m.artifacts.push_back({a.at("path"), a.at("sha256")});
        m.details = j.at("details");
        m.completed = j.at("completed").get<std::size_t>();
        m.complete = j.at("complete").get<bool>();
    } catch (const json::exception& e) {
        raise(ErrorKind::Config, "malformed manifest: ", e.what());
    }
    return m;
}

void save_manifest(const RunManifest& manifest, const fs::path& path) {
    write_text_file(path, to_json(manifest).dump(2) + "\n");
}

RunManifest load_manifest(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        raise(ErrorKind::Config, path, ": not valid JSON: ", e.what());
    }
    return manifest_from_json(j);
}

StageTimer::Scope::Scope(StageTimer& timer, std::string stage)
    : m_timer(timer), m_stage(std::move(stage)), m_start(std::chrono::steady_clock::now()) {}

StageTimer::Scope::~Scope() {
    m_timer.add(m_stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - m_start).count());
}

json StageTimer::to_json() const {
    json j = json::object();
    for (const auto& [k, v] : m_seconds) j[k] = v;
    return {{"wall_seconds", j}};
}

std::vector<fs::path> list_images(const fs::path& input) {
    SEQEDIT_CHECK(fs::exists(input), Io, "input ", input, " does not exist");
    if (!fs::is_directory(input)) return {input};
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(input)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".ppm" || ext == ".pgm") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    SEQEDIT_CHECK(!out.empty(), Io, "no images (.png, .ppm, .pgm) in ", input);
    return out;
}

namespace {

// ---------------------------------------------------------------- flags

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend;
    std::optional<int> steps;
    std::vector<int> attention_layers;
    std::vector<int> resnet_layers;
    CLI::Option* attention_opt = nullptr;
    CLI::Option* resnet_opt = nullptr;
    std::optional<double> guidance;
    std::optional<std::string> inversion_prompt;
    std::optional<double> inversion_guidance;
    std::optional<int> width;
    std::optional<int> height;
    std::optional<int> workers;
    bool quiet = false;
};

struct EditFlags {
    std::optional<std::string> source_prompt;
    std::optional<std::string> target_prompt;
    std::optional<int> s_edit;
    std::optional<int> s_context;
    std::optional<bool> inject_f, inject_q, inject_k, inject_v;
    std::optional<std::string> follower_value;
    std::optional<std::string> mask_provider;
    std::optional<std::string> mask_query;
    std::optional<std::string> mask_path;
    std::vector<double> mask_rect;
    CLI::Option* mask_rect_opt = nullptr;
    bool mask_soft = false;
};

void add_common(CLI::App* app, CommonFlags& f, bool needs_layers = true) {
    app->add_option("--config", f.config_path, "Run-config JSON file; flags override its values")
        ->check(CLI::ExistingFile);
    app->add_option("--out", f.out, "Output directory")->required();
    app->add_option("--seed", f.seed, "Master seed");
    app->add_option("--backend", f.backend, "Denoiser backend id");
    app->add_option("--steps", f.steps, "DDIM steps T");
    if (needs_layers) {
        f.attention_opt = app->add_option("--attention-layers", f.attention_layers, "Attention layer indices")
                              ->delimiter(',');
        f.resnet_opt = app->add_option("--resnet-layers", f.resnet_layers, "Resnet layer indices")->delimiter(',');
    }
    app->add_option("--guidance", f.guidance, "Classifier-free guidance scale for editing");
    app->add_option("--inversion-prompt", f.inversion_prompt, "Prompt used during inversion");
    app->add_option("--inversion-guidance", f.inversion_guidance, "Guidance scale used during inversion");
    app->add_option("--width", f.width, "Resize inputs to this width (0 keeps the size)");
    app->add_option("--height", f.height, "Resize inputs to this height (0 keeps the size)");
    app->add_option("--workers", f.workers, "Worker threads where parallelism is safe");
    app->add_flag("--quiet", f.quiet, "No progress output");
}

void add_edit(CLI::App* app, EditFlags& f) {
    app->add_option("--source-prompt", f.source_prompt, "Prompt describing the inputs");
    app->add_option("--target-prompt", f.target_prompt, "Edit prompt");
    app->add_option("--s-edit", f.s_edit, "Full-injection steps");
    app->add_option("--s-context", f.s_context, "Context-sharing steps");
    app->add_option("--inject-f", f.inject_f, "Inject resnet features (true/false)");
    app->add_option("--inject-q", f.inject_q, "Inject attention queries (true/false)");
    app->add_option("--inject-k", f.inject_k, "Inject attention keys (true/false)");
    app->add_option("--inject-v", f.inject_v, "Inject attention values (true/false)");
    app->add_option("--follower-value", f.follower_value, "Follower V source in full injection: live|inverted");
    app->add_option("--mask-provider", f.mask_provider, "Mask provider id (constant, rectangle, file)");
    app->add_option("--mask-query", f.mask_query, "Mask query; the image name when empty");
    app->add_option("--mask-path", f.mask_path, "Mask file or directory for the file provider");
    f.mask_rect_opt = app->add_option("--mask-rect", f.mask_rect, "Rectangle x0,y0,x1,y1 as fractions")
                          ->delimiter(',')
                          ->expected(4);
    app->add_flag("--mask-soft", f.mask_soft, "Keep fractional mask values instead of thresholding");
}

template <typename T>
void take(const std::optional<T>& flag, T& field) {
    if (flag) field = *flag;
}

RunConfig resolve_config(RunConfig defaults, const CommonFlags& f, const EditFlags* e) {
    RunConfig c = f.config_path.empty() ? defaults : load_config(f.config_path, defaults);
    take(f.seed, c.seed);
    if (f.backend) c.backend = {*f.backend, json::object()};
    take(f.steps, c.steps);
    if ((f.attention_opt && f.attention_opt->count() > 0) || (f.resnet_opt && f.resnet_opt->count() > 0)) {
        LayerSet l = c.layers.value_or(LayerSet{});
        if (f.attention_opt->count() > 0) l.attention_layers = f.attention_layers;
        if (f.resnet_opt->count() > 0) l.resnet_layers = f.resnet_layers;
        c.layers = l;
    }
    take(f.guidance, c.guidance_scale);
    take(f.inversion_prompt, c.inversion_prompt);
    take(f.inversion_guidance, c.inversion_guidance);
    take(f.width, c.image_width);
    take(f.height, c.image_height);
    take(f.workers, c.workers);
    if (e) {
        take(e->source_prompt, c.source_prompt);
        take(e->target_prompt, c.target_prompt);
        take(e->s_edit, c.s_edit);
        take(e->s_context, c.s_context);
        take(e->inject_f, c.inject_f);
        take(e->inject_q, c.inject_q);
        take(e->inject_k, c.inject_k);
        take(e->inject_v, c.inject_v);
        take(e->follower_value, c.follower_value);
        if (e->mask_provider || e->mask_query || e->mask_path || e->mask_rect_opt->count() > 0 || e->mask_soft) {
            MaskSpec m = c.mask.value_or(MaskSpec{});
            take(e->mask_provider, m.provider);
            take(e->mask_query, m.query);
            if (e->mask_path) {
                if (!e->mask_provider) m.provider = "file";
                m.params = {{"path", *e->mask_path}};
            }
            if (e->mask_rect_opt->count() > 0) {
                if (!e->mask_provider) m.provider = "rectangle";
                m.params = {{"x0", e->mask_rect[0]}, {"y0", e->mask_rect[1]}, {"x1", e->mask_rect[2]},
                            {"y1", e->mask_rect[3]}};
            }
            if (e->mask_soft) m.binary = false;
            c.mask = m;
        }
    }
    validate_config(c);
    return c;
}

// ---------------------------------------------------------------- runtime

struct Runtime {
    AdapterRegistry registry = AdapterRegistry::with_builtins();
    std::unique_ptr<DenoiserBackend> backend;
    std::unique_ptr<Codec> codec;
    NoiseSchedule noise;
    LayerSet layers;

    explicit Runtime(const RunConfig& c) : noise(c.steps) {
        backend = registry.backends.create(c.backend.id, c.backend.params, c.seed);
        codec = registry.codecs.create(c.codec.id, c.codec.params, c.seed);
        SEQEDIT_CHECK(codec->latent_channels() == backend->latent_channels(), Config, "codec '", codec->id(),
                      "' yields ", codec->latent_channels(), " channels, backend '", backend->id(), "' expects ",
                      backend->latent_channels());
        layers = c.layers.value_or(backend->default_layers()).normalized();
    }

    SequenceContext context(TraceAccessLog* log = nullptr) {
        return {*backend, *codec, noise, {}, log};
    }
};

SequenceContext context_for(Runtime& rt, const RunConfig& c) {
    SequenceContext ctx = rt.context();
    ctx.inversion = {c.inversion_prompt, c.inversion_guidance};
    return ctx;
}

Image to_rgb(Image img) {
    if (img.channels == 3) return img;
    Image out(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, std::min(c, img.channels - 1));
    return out;
}

Image load_input(const fs::path& path, const RunConfig& c, const Runtime& rt) {
    Image img = to_rgb(load_image(path));
    if (c.image_width > 0 || c.image_height > 0) {
        const int w = c.image_width > 0 ? c.image_width : img.width;
        const int h = c.image_height > 0 ? c.image_height : img.height;
        if (w != img.width || h != img.height) img = resize_bilinear(img, w, h);
    }
    const int multiple = rt.backend->spatial_multiple() * rt.codec->downsample_factor();
    SEQEDIT_CHECK(img.width % multiple == 0 && img.height % multiple == 0, Config, path, " is ", img.width, "x",
                  img.height, "; backend '", rt.backend->id(), "' needs multiples of ", multiple,
                  " (use --width/--height)");
    return img;
}

EditPlan make_plan(const RunConfig& c, const Runtime& rt) {
    EditPlan p;
    p.target_prompt = c.target_prompt;
    p.source_prompt = c.source_prompt;
    if (c.reference == "fixed") p.reference_strategy = FixedReference{c.ref_index};
    else p.reference_strategy = ChainedReference{};
    p.schedule = schedule_of(c);
    p.layers = rt.layers;
    p.guidance_scale = c.guidance_scale;
    p.seed = c.seed;
    p.follower_value = c.follower_value == "inverted" ? ValueSource::Inverted : ValueSource::Live;
    p.backend_id = rt.backend->id();
    p.codec_id = rt.codec->id();
    return p;
}

struct OutputDir {
    fs::path root;

    fs::path operator/(const std::string& rel) const { return root / rel; }

    ArtifactEntry artifact(const std::string& rel) const { return {rel, sha256_file(root / rel)}; }
};

std::string stem_of(const fs::path& p) {
    return p.stem().string();
}

class Progress {
public:
    explicit Progress(bool quiet) : m_quiet(quiet) {}
    template <typename... Args>
    void operator()(Args&&... args) const {
        if (m_quiet) return;
        (std::cerr << ... << args) << '\n';
    }

private:
    bool m_quiet;
};

RunManifest start_manifest(const std::string& command, const RunConfig& c, const Runtime& rt) {
    RunManifest m;
    m.command = command;
    m.config = c;
    m.backend_id = rt.backend->id();
    m.layers = rt.layers;
    return m;
}

void finish_run(RunManifest& m, const OutputDir& out, const StageTimer& timer) {
    save_config(m.config, out / "config.json");
    m.artifacts.insert(m.artifacts.begin(), out.artifact("config.json"));
    save_manifest(m, out / "manifest.json");
    write_text_file(out / "timings.json", timer.to_json().dump(2) + "\n");
}

std::vector<Mask> acquire_masks(const RunConfig& c, Runtime& rt, const std::vector<Image>& images,
                                const std::vector<std::string>& ids, RunManifest& m, const OutputDir& out) {
    std::vector<Mask> masks;
    if (!c.mask) return masks;
    auto provider = rt.registry.mask_providers.create(c.mask->provider, c.mask->params, c.seed);
    const int f = rt.codec->downsample_factor();
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string query = c.mask->query.empty() ? ids[i] : c.mask->query;
        masks.push_back(
            acquire_mask(images[i], query, *provider, images[i].height / f, images[i].width / f, c.mask->binary));
        const std::string rel = "masks/" + ids[i] + ".png";
        save_mask(masks.back(), out / rel);
        m.artifacts.push_back(out.artifact(rel));
    }
    return masks;
}

void check_same_size(const std::vector<Image>& images, const std::vector<fs::path>& paths) {
    for (std::size_t i = 1; i < images.size(); ++i) {
        SEQEDIT_CHECK(images[i].width == images[0].width && images[i].height == images[0].height, Config, paths[i],
                      " is ", images[i].width, "x", images[i].height, " but ", paths[0], " is ", images[0].width,
                      "x", images[0].height, "; all images of a sequence must match (use --width/--height)");
    }
}

// ---------------------------------------------------------------- commands

struct InvertArgs {
    std::string input;
};

int cmd_invert(const InvertArgs& a, const CommonFlags& f) {
    RunConfig defaults;
    const RunConfig c = resolve_config(defaults, f, nullptr);
    StageTimer timer;
    Progress log(f.quiet);
    Runtime rt(c);
    const OutputDir out{f.out};
    RunManifest m = start_manifest("invert", c, rt);
    EditPlan plan = make_plan(c, rt);
    const SequenceContext ctx = context_for(rt, c);

    const auto inputs = list_images(a.input);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::string id = stem_of(inputs[i]);
        Image img;
        {
            auto t = timer.scope("load");
            img = load_input(inputs[i], c, rt);
        }
        InversionRecord rec;
        {
            auto t = timer.scope("invert");
            rec = invert_for_plan(img, id, i, plan, ctx);
        }
        const std::string rel = "records/" + id + ".st";
        {
            auto t = timer.scope("write");
            save_inversion_record(rec, out / rel);
        }
        m.images.push_back({id, inputs[i].string(), sha256_file(inputs[i]), rel, sha256_file(out / rel)});
        log("inverted ", id, " (", i + 1, "/", inputs.size(), ")");
    }
    m.completed = inputs.size();
    m.complete = true;
    finish_run(m, out, timer);
    return 0;
}

struct VideoArgs {
    std::string frames;
    bool resume = false;
    std::size_t stop_after = 0;
};

int cmd_edit_video(const VideoArgs& a, const CommonFlags& f, const EditFlags& e) {
    RunConfig defaults;
    defaults.s_edit = 15;
    defaults.s_context = 50;
    const RunConfig c = resolve_config(defaults, f, &e);
    SEQEDIT_CHECK(c.reference == "chained", Config, "edit-video uses chained referencing");
    StageTimer timer;
    Progress log(f.quiet);
    Runtime rt(c);
    const OutputDir out{f.out};
    const fs::path manifest_path = out / "manifest.json";

    const auto inputs = list_images(a.frames);
    std::vector<Image> frames;
    std::vector<std::string> ids;
    {
        auto t = timer.scope("load");
        for (const auto& p : inputs) {
            frames.push_back(load_input(p, c, rt));
            ids.push_back(stem_of(p));
        }
    }
    check_same_size(frames, inputs);

    RunManifest m = start_manifest("edit-video", c, rt);
    EditPlan plan = make_plan(c, rt);
    plan.masks = acquire_masks(c, rt, frames, ids, m, out);
    validate_plan(plan, frames.size());

    const SequenceContext ctx = context_for(rt, c);
    ChainedEditor editor(ctx, plan);
    const std::string record_rel = "state/predecessor_record.st";
    const std::string trace_rel = "state/predecessor_trace.st";

    if (a.resume) {
        SEQEDIT_CHECK(fs::exists(manifest_path), Io, "nothing to resume: ", manifest_path, " does not exist");
        RunManifest prev = load_manifest(manifest_path);
        SEQEDIT_CHECK(prev.command == "edit-video", Config, manifest_path, " belongs to '", prev.command, "'");
        SEQEDIT_CHECK(prev.config == c, Config, "config differs from the interrupted run in ", manifest_path);
        SEQEDIT_CHECK(prev.completed <= frames.size(), Config, "manifest lists ", prev.completed,
                      " completed frames but only ", frames.size(), " frames exist");
        for (std::size_t i = 0; i < prev.completed; ++i) {
            SEQEDIT_CHECK(prev.images[i].id == ids[i], Config, "frame ", i, " was '", prev.images[i].id,
                          "' in the interrupted run, now '", ids[i], "'");
        }
        if (prev.completed > 0) {
            auto t = timer.scope("resume");
            editor.resume(load_inversion_record(out / record_rel), load_edit_trace(out / trace_rel), prev.completed);
            m.images.assign(prev.images.begin(), prev.images.begin() + static_cast<std::ptrdiff_t>(prev.completed));
        }
        log("resuming after ", prev.completed, " of ", frames.size(), " frames");
    }

    for (std::size_t i = editor.frames_done(); i < frames.size(); ++i) {
        ChainedEditor::Step step;
        {
            auto t = timer.scope("edit");
            step = editor.edit_next(frames[i], ids[i]);
        }
        const std::string rel = "frames/" + ids[i] + ".png";
        {
            auto t = timer.scope("write");
            save_image(step.image, out / rel);
            save_inversion_record(*editor.predecessor_record(), out / record_rel);
            save_edit_trace(*editor.predecessor_trace(), out / trace_rel);
        }
        m.images.push_back({ids[i], inputs[i].string(), sha256_file(inputs[i]), rel, sha256_file(out / rel)});
        m.completed = i + 1;
        m.complete = m.completed == frames.size();
        save_manifest(m, manifest_path);
        log("edited ", ids[i], " (", i + 1, "/", frames.size(), ")");
        if (a.stop_after > 0 && m.completed >= a.stop_after && !m.complete) {
            write_text_file(out / "timings.json", timer.to_json().dump(2) + "\n");
            log("stopped after ", m.completed, " frames; rerun with --resume");
            return 0;
        }
    }
    m.completed = frames.size();
    m.complete = true;
    m.artifacts.push_back(out.artifact(record_rel));
    m.artifacts.push_back(out.artifact(trace_rel));
    finish_run(m, out, timer);
    return 0;
}

struct ViewsArgs {
    std::string images;
    std::optional<int> ref_index;
};

int cmd_edit_views(const ViewsArgs& a, const CommonFlags& f, const EditFlags& e) {
    RunConfig defaults;
    defaults.reference = "fixed";
    defaults.ref_index = 0;
    RunConfig c = resolve_config(defaults, f, &e);
    take(a.ref_index, c.ref_index);
    SEQEDIT_CHECK(c.reference == "fixed", Config, "edit-views uses a fixed reference");
    validate_config(c);
    StageTimer timer;
    Progress log(f.quiet);
    Runtime rt(c);
    const OutputDir out{f.out};

    const auto inputs = list_images(a.images);
    std::vector<Image> images;
    std::vector<std::string> ids;
    {
        auto t = timer.scope("load");
        for (const auto& p : inputs) {
            images.push_back(load_input(p, c, rt));
            ids.push_back(stem_of(p));
        }
    }
    check_same_size(images, inputs);
    SEQEDIT_CHECK(static_cast<std::size_t>(c.ref_index) < images.size(), Config, "reference index ", c.ref_index,
                  " but only ", images.size(), " images");

    RunManifest m = start_manifest("edit-views", c, rt);
    EditPlan plan = make_plan(c, rt);
    plan.masks = acquire_masks(c, rt, images, ids, m, out);

    SequenceResult result;
    {
        auto t = timer.scope("edit");
        result = edit_multiview(images, plan, context_for(rt, c), {c.workers, {}});
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string rel = "views/" + ids[i] + ".png";
        save_image(result.images[i], out / rel);
        m.images.push_back({ids[i], inputs[i].string(), sha256_file(inputs[i]), rel, sha256_file(out / rel)});
    }
    m.details = {{"ref_index", c.ref_index}};
    m.completed = images.size();
    m.complete = true;
    finish_run(m, out, timer);
    log("edited ", images.size(), " views with reference ", ids[static_cast<std::size_t>(c.ref_index)]);
    return 0;
}

json plan_json(const CropPlan& p) {
    json offsets = json::array();
    for (const auto& o : p.offsets) offsets.push_back({o.y, o.x});
    return {{"height", p.height}, {"width", p.width},     {"window", p.window},
            {"stride", p.stride}, {"snapped", p.snapped}, {"windows", p.offsets.size()},
            {"offsets", offsets}};
}

struct PanoramaArgs {
    std::string image;
    bool dry_run = false;
    std::optional<int> window;
    std::optional<int> stride;
    std::optional<std::string> reference;
    std::optional<int> ref_index;
};

int cmd_edit_panorama(const PanoramaArgs& a, const CommonFlags& f, const EditFlags& e) {
    RunConfig defaults;
    defaults.image_width = 2048;
    defaults.image_height = 512;
    defaults.window = 512;
    defaults.stride = 256;
    defaults.s_edit = 20;
    defaults.s_context = 20;
    RunConfig c = resolve_config(defaults, f, &e);
    take(a.window, c.window);
    take(a.stride, c.stride);
    take(a.reference, c.reference);
    take(a.ref_index, c.ref_index);
    validate_config(c);
    StageTimer timer;
    Progress log(f.quiet);
    Runtime rt(c);
    const OutputDir out{f.out};

    const fs::path input = a.image;
    SEQEDIT_CHECK(fs::is_regular_file(input), Io, "panorama input ", input, " is not a file");
    Image img;
    {
        auto t = timer.scope("load");
        img = load_input(input, c, rt);
    }
    RunManifest m = start_manifest("edit-panorama", c, rt);
    const CropPlan pixel_plan = make_crop_plan(img.height, img.width, c.window, c.stride);
    m.details = {{"crop_plan", plan_json(pixel_plan)}, {"dry_run", a.dry_run}};
    if (pixel_plan.snapped) log("crop plan: last window snapped to the canvas edge");
    log("crop plan: ", pixel_plan.offsets.size(), " windows of ", c.window, " px, stride ", c.stride, " on ",
        img.width, "x", img.height);

    const std::string id = stem_of(input);
    if (a.dry_run) {
        m.images.push_back({id, input.string(), sha256_file(input), "", ""});
        m.complete = true;
        finish_run(m, out, timer);
        std::cout << plan_json(pixel_plan).dump() << '\n';
        return 0;
    }

    EditPlan plan = make_plan(c, rt);
    plan.masks = acquire_masks(c, rt, {img}, {id}, m, out);
    PanoramaResult result;
    {
        auto t = timer.scope("edit");
        result = edit_panorama(img, plan, context_for(rt, c), {c.window, c.stride});
    }
    const std::string rel = "panorama.png";
    save_image(result.image, out / rel);
    m.images.push_back({id, input.string(), sha256_file(input), rel, sha256_file(out / rel)});
    m.completed = 1;
    m.complete = true;
    finish_run(m, out, timer);
    log("edited panorama ", id);
    return 0;
}

struct EvaluateArgs {
    std::string sources;
    std::string outputs;
    std::string source_text;
    std::string target_text;
    std::optional<std::string> embedder;
    int patch_rows = 1;
    int patch_cols = 1;
};

json report_json(const MetricsReport& r) {
    json images = json::array();
    for (std::size_t i = 0; i < r.image_names.size(); ++i) {
        images.push_back({{"name", r.image_names[i]},
                          {"directional_score", r.directional[i]},
                          {"text_image_similarity", r.text_similarity[i]},
                          {"structure_distance", r.structure[i]}});
    }
    return {{"embedder", r.embedder_id},
            {"source_text", r.source_text},
            {"target_text", r.target_text},
            {"images", images},
            {"mean_directional_score", r.mean_directional},
            {"mean_text_image_similarity", r.mean_text_similarity},
            {"mean_structure_distance", r.mean_structure},
            {"consistency_score", r.consistency}};
}

int cmd_evaluate(const EvaluateArgs& a, const CommonFlags& f) {
    RunConfig c = resolve_config(RunConfig{}, f, nullptr);
    if (a.embedder) c.embedder = {*a.embedder, json::object()};
    StageTimer timer;
    AdapterRegistry registry = AdapterRegistry::with_builtins();
    auto embedder = registry.embedders.create(c.embedder.id, c.embedder.params, c.seed);
    const OutputDir out{f.out};

    const auto sources = list_images(a.sources);
    const auto outputs = list_images(a.outputs);
    std::vector<std::string> names;
    std::vector<Image> src_images, out_images;
    RunManifest m;
    m.command = "evaluate";
    m.config = c;
    m.backend_id = c.backend.id;
    {
        auto t = timer.scope("load");
        for (const auto& s : sources) {
            const auto match = std::find_if(outputs.begin(), outputs.end(),
                                            [&](const fs::path& o) { return stem_of(o) == stem_of(s); });
            SEQEDIT_CHECK(match != outputs.end(), Io, "no output for source ", s, " in ", a.outputs);
            names.push_back(stem_of(s));
            src_images.push_back(to_rgb(load_image(s)));
            out_images.push_back(to_rgb(load_image(*match)));
            m.images.push_back({names.back(), s.string(), sha256_file(s), match->string(), sha256_file(*match)});
        }
    }
    MetricsReport report;
    {
        auto t = timer.scope("score");
        report = evaluate_pairs(names, src_images, out_images, a.source_text, a.target_text, *embedder, pixel_mse,
                                {a.patch_rows, a.patch_cols});
    }
    write_text_file(out / "metrics.json", report_json(report).dump(2) + "\n");
    m.artifacts.push_back(out.artifact("metrics.json"));
    m.details = {{"metrics", "metrics.json"}};
    m.completed = names.size();
    m.complete = true;
    finish_run(m, out, timer);
    if (!f.quiet) std::cout << report_json(report).dump(2) << '\n';
    return 0;
}

struct ToyDataArgs {
    std::string out;
    std::string kind = "clip";
    int width = 16;
    int height = 16;
    int count = 5;
    int shift = 1;
    std::uint64_t seed = 0;
};

int cmd_toy_data(const ToyDataArgs& a) {
    SEQEDIT_CHECK(a.width > 0 && a.height > 0 && a.count > 0, Config, "toy data needs positive sizes and count");
    std::vector<Image> images;
    if (a.kind == "clip") {
        images = make_shape_clip(a.width, a.height, a.count, a.shift, a.seed);
    } else if (a.kind == "set") {
        for (int i = 0; i < a.count; ++i) images.push_back(make_shape_image(a.width, a.height, a.seed + static_cast<std::uint64_t>(i)));
    } else {
        raise(ErrorKind::Config, "toy data kind must be 'clip' or 'set', got '", a.kind, "'");
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%04zu.png", i);
        save_image(images[i], fs::path(a.out) / name);
    }
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"seqedit: consistent text-guided editing of image sequences"};
    app.require_subcommand(1);

    CommonFlags invert_flags;
    InvertArgs invert_args;
    auto* invert = app.add_subcommand("invert", "DDIM-invert images and store inversion records");
    invert->add_option("input", invert_args.input, "Image file or directory")->required();
    add_common(invert, invert_flags);

    CommonFlags video_flags;
    EditFlags video_edit;
    VideoArgs video_args;
    auto* video = app.add_subcommand("edit-video", "Edit video frames with chained referencing");
    video->add_option("frames", video_args.frames, "Directory of frames (sorted by name) or a single frame")
        ->required();
    add_common(video, video_flags);
    add_edit(video, video_edit);
    video->add_flag("--resume", video_args.resume, "Continue an interrupted run in --out");
    video->add_option("--stop-after", video_args.stop_after, "Stop after this many frames (0 runs all)");

    CommonFlags pano_flags;
    EditFlags pano_edit;
    PanoramaArgs pano_args;
    auto* pano = app.add_subcommand("edit-panorama", "Edit a wide image through overlapping windows");
    pano->add_option("image", pano_args.image, "Panorama image")->required();
    add_common(pano, pano_flags);
    add_edit(pano, pano_edit);
    pano->add_option("--window", pano_args.window, "Window size in pixels");
    pano->add_option("--stride", pano_args.stride, "Window stride in pixels");
    pano->add_option("--reference", pano_args.reference, "chained|fixed");
    pano->add_option("--ref-index", pano_args.ref_index, "Reference window for fixed referencing");
    pano->add_flag("--dry-run", pano_args.dry_run, "Only compute and record the crop plan");

    CommonFlags views_flags;
    EditFlags views_edit;
    ViewsArgs views_args;
    auto* views = app.add_subcommand("edit-views", "Edit multiview images with one fixed reference");
    views->add_option("images", views_args.images, "Directory of views (sorted by name)")->required();
    add_common(views, views_flags);
    add_edit(views, views_edit);
    views->add_option("--ref-index", views_args.ref_index, "Index of the reference view");

    CommonFlags eval_flags;
    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Score edited outputs against their sources");
    evaluate->add_option("sources", eval_args.sources, "Source images")->required();
    evaluate->add_option("outputs", eval_args.outputs, "Edited images with matching names")->required();
    evaluate->add_option("--src-text", eval_args.source_text, "Text describing the sources")->required();
    evaluate->add_option("--trg-text", eval_args.target_text, "Edit target text")->required();
    evaluate->add_option("--embedder", eval_args.embedder, "Embedder id");
    evaluate->add_option("--patch-rows", eval_args.patch_rows, "Structure distance patch rows");
    evaluate->add_option("--patch-cols", eval_args.patch_cols, "Structure distance patch columns");
    add_common(evaluate, eval_flags, false);

    ToyDataArgs toy_args;
    auto* toy = app.add_subcommand("toy-data", "Write synthetic shape images for trying the tool");
    toy->add_option("--out", toy_args.out, "Output directory")->required();
    toy->add_option("--kind", toy_args.kind, "clip (translated shapes) or set (independent images)");
    toy->add_option("--width", toy_args.width, "Image width");
    toy->add_option("--height", toy_args.height, "Image height");
    toy->add_option("--count", toy_args.count, "Number of images");
    toy->add_option("--shift", toy_args.shift, "Per-frame shift in pixels for clips");
    toy->add_option("--seed", toy_args.seed, "Scene seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::Usage);
    }

    try {
        if (*invert) return cmd_invert(invert_args, invert_flags);
        if (*video) return cmd_edit_video(video_args, video_flags, video_edit);
        if (*pano) return cmd_edit_panorama(pano_args, pano_flags, pano_edit);
        if (*views) return cmd_edit_views(views_args, views_flags, views_edit);
        if (*evaluate) return cmd_evaluate(eval_args, eval_flags);
        if (*toy) return cmd_toy_data(toy_args);
    } catch (const Error& e) {
        std::cerr << "seqedit: " << to_string(e.kind()) << " error: " << e.what() << '\n';
        return static_cast<int>(exit_code_for(e.kind()));
    } catch (const fs::filesystem_error& e) {
        std::cerr << "seqedit: io error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::Io);
    } catch (const std::exception& e) {
        std::cerr << "seqedit: internal error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::Internal);
    }
    return static_cast<int>(ExitCode::Usage);
}

}  // namespace seqedit
