// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/toy_unet.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "seqedit/error.hpp"
#include "seqedit/rng.hpp"

namespace seqedit {

namespace {

using Vector = Eigen::VectorXd;
using ConstFeatureMap = Eigen::Map<const RowMatrix>;

using WeightRng = NormalRng;

struct Linear {
    RowMatrix w;
    Vector b;

    static Linear make(WeightRng& rng, int in, int out, double gain = 1.0) {
        return {rng.matrix(out, in, gain / std::sqrt(in)), rng.vector(out, 0.02)};
    }
    Vector operator()(const Vector& x) const { return w * x + b; }
};

/// Feature map stored as [C, H*W] with its spatial size.
struct Features {
    RowMatrix data;
    std::int64_t height = 0;
    std::int64_t width = 0;

    Eigen::Index channels() const { return data.rows(); }
};

Features from_tensor(const Tensor& t) {
    Features f;
    f.height = t.dim(1);
    f.width = t.dim(2);
    f.data = ConstFeatureMap(t.data(), t.dim(0), t.dim(1) * t.dim(2));
    return f;
}

Tensor to_tensor(const Features& f) {
    Tensor t({f.channels(), f.height, f.width});
    Eigen::Map<RowMatrix>(t.data(), f.channels(), f.height * f.width) = f.data;
    return t;
}

struct Conv {
    RowMatrix w;  // [out, in * k * k]
    Vector b;
    int kernel = 3;

    static Conv make(WeightRng& rng, int in, int out, int kernel, double gain = 1.0) {
        const int fan_in = in * kernel * kernel;
        return {rng.matrix(out, fan_in, gain / std::sqrt(fan_in)), rng.vector(out, 0.02), kernel};
    }

    Features operator()(const Features& x) const {
        const auto hw = x.height * x.width;
        if (kernel == 1) return {(w * x.data).colwise() + b, x.height, x.width};
        const int pad = kernel / 2;
        const auto cin = x.channels();
        RowMatrix cols = RowMatrix::Zero(cin * kernel * kernel, hw);
        for (Eigen::Index c = 0; c < cin; ++c) {
            for (int ky = 0; ky < kernel; ++ky) {
                for (int kx = 0; kx < kernel; ++kx) {
                    const auto row = (c * kernel + ky) * kernel + kx;
                    for (std::int64_t y = 0; y < x.height; ++y) {
                        const auto sy = y + ky - pad;
                        if (sy < 0 || sy >= x.height) continue;
                        for (std::int64_t xx = 0; xx < x.width; ++xx) {
                            const auto sx = xx + kx - pad;
                            if (sx < 0 || sx >= x.width) continue;
                            cols(row, y * x.width + xx) = x.data(c, sy * x.width + sx);
                        }
                    }
                }
            }
        }
        return {(w * cols).colwise() + b, x.height, x.width};
    }
};

struct GroupNorm {
    int groups = 4;
    Vector gamma;
    Vector beta;

    static GroupNorm make(int channels, int groups) {
        return {groups, Vector::Ones(channels), Vector::Zero(channels)};
    }

    Features operator()(const Features& x) const {
        Features out = x;
        const auto c = x.channels();
        const auto per_group = c / groups;
        const auto n = static_cast<double>(per_group * x.data.cols());
        for (int g = 0; g < groups; ++g) {
            auto block = x.data.middleRows(g * per_group, per_group);
            const double mean = block.sum() / n;
            const double var = (block.array() - mean).square().sum() / n;
            const double inv = 1.0 / std::sqrt(var + 1e-5);
            for (Eigen::Index r = 0; r < per_group; ++r) {
                const auto ch = g * per_group + r;
                out.data.row(ch) = ((x.data.row(ch).array() - mean) * inv * gamma[ch] + beta[ch]).matrix();
            }
        }
        return out;
    }
};

Features silu(Features x) {
    x.data = x.data.array() / (1.0 + (-x.data.array()).exp());
    return x;
}

Vector silu(const Vector& v) {
    return v.array() / (1.0 + (-v.array()).exp());
}

Features avg_pool2(const Features& x) {
    Features out;
    out.height = x.height / 2;
    out.width = x.width / 2;
    out.data.resize(x.channels(), out.height * out.width);
    for (Eigen::Index c = 0; c < x.channels(); ++c)
        for (std::int64_t y = 0; y < out.height; ++y)
            for (std::int64_t xx = 0; xx < out.width; ++xx) {
                const auto i = 2 * y * x.width + 2 * xx;
                out.data(c, y * out.width + xx) =
                    0.25 * (x.data(c, i) + x.data(c, i + 1) + x.data(c, i + x.width) + x.data(c, i + x.width + 1));
            }
    return out;
}

Features upsample2(const Features& x) {
    Features out;
    out.height = x.height * 2;
    out.width = x.width * 2;
    out.data.resize(x.channels(), out.height * out.width);
    for (Eigen::Index c = 0; c < x.channels(); ++c)
        for (std::int64_t y = 0; y < out.height; ++y)
            for (std::int64_t xx = 0; xx < out.width; ++xx)
                out.data(c, y * out.width + xx) = x.data(c, (y / 2) * x.width + xx / 2);
    return out;
}

Features concat(const Features& a, const Features& b) {
    Features out;
    out.height = a.height;
    out.width = a.width;
    out.data.resize(a.channels() + b.channels(), a.data.cols());
    out.data << a.data, b.data;
    return out;
}

struct ResBlock {
    GroupNorm norm1;
    Conv conv1;
    Linear emb;
    GroupNorm norm2;
    Conv conv2;
    std::optional<Conv> skip;

    static ResBlock make(WeightRng& rng, int in, int out, int emb_dim, int groups) {
        ResBlock r{GroupNorm::make(in, groups),
                   Conv::make(rng, in, out, 3),
                   Linear::make(rng, emb_dim, out),
                   GroupNorm::make(out, groups),
                   Conv::make(rng, out, out, 3, 0.5),
                   std::nullopt};
        if (in != out) r.skip = Conv::make(rng, in, out, 1);
        return r;
    }

    Features operator()(const Features& x, const Vector& embedding) const {
        Features h = conv1(silu(norm1(x)));
        h.data.colwise() += emb(silu(embedding));
        h = conv2(silu(norm2(h)));
        h.data += skip ? (*skip)(x).data : x.data;
        return h;
    }
};

struct AttnBlock {
    GroupNorm norm;
    RowMatrix wq, wk, wv, wo;

    static AttnBlock make(WeightRng& rng, int channels, int groups) {
        const double s = 1.0 / std::sqrt(channels);
        return {GroupNorm::make(channels, groups), rng.matrix(channels, channels, 2.0 * s),
                rng.matrix(channels, channels, 2.0 * s), rng.matrix(channels, channels, s),
                rng.matrix(channels, channels, s)};
    }
};

Vector timestep_embedding(int timestep, int dim) {
    Vector e(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e[i] = std::cos(timestep * freq);
        e[i + half] = std::sin(timestep * freq);
    }
    return e;
}

}  // namespace

struct ToyUNet::Weights {
    Linear time1, time2, cond;
    Conv conv_in;
    ResBlock down0, down1, mid;
    ResBlock up_res[3];
    AttnBlock up_attn[3];
    GroupNorm norm_out;
    Conv conv_out;
};

ToyUNet::ToyUNet(ToyUNetConfig config) : m_config(config) {
    const int c0 = config.base_channels;
    const int c1 = 2 * c0;
    const int e = config.embedding_dim;
    const int g = config.groups;
    SEQEDIT_CHECK(c0 > 0 && c0 % g == 0 && e % 2 == 0, Config, "toy U-Net: base_channels must be a positive ",
                  "multiple of groups and embedding_dim even");

    WeightRng rng(config.seed);
    m_weights = std::unique_ptr<Weights>(new Weights{
        Linear::make(rng, e, e),
        Linear::make(rng, e, e),
        Linear::make(rng, e, e),
        Conv::make(rng, 3, c0, 3),
        ResBlock::make(rng, c0, c0, e, g),
        ResBlock::make(rng, c0, c1, e, g),
        ResBlock::make(rng, c1, c1, e, g),
        {ResBlock::make(rng, c1, c1, e, g), ResBlock::make(rng, 2 * c1, c1, e, g),
         ResBlock::make(rng, c1 + c0, c0, e, g)},
        {AttnBlock::make(rng, c1, g), AttnBlock::make(rng, c1, g), AttnBlock::make(rng, c0, g)},
        GroupNorm::make(c0, g),
        Conv::make(rng, c0, 3, 3),
    });

    NoiseSchedule schedule(1, config.schedule);
    m_train_alpha_bar.resize(static_cast<std::size_t>(config.schedule.train_steps));
    for (int t = 0; t < config.schedule.train_steps; ++t) m_train_alpha_bar[t] = schedule.train_alpha_bar(t);
}

ToyUNet::~ToyUNet() = default;

ToyUNet::ToyUNet(const ToyUNet& other)
    : DenoiserBackend(other),
      m_config(other.m_config),
      m_train_alpha_bar(other.m_train_alpha_bar),
      m_weights(std::make_unique<Weights>(*other.m_weights)) {}

std::unique_ptr<DenoiserBackend> ToyUNet::clone() const {
    return std::make_unique<ToyUNet>(*this);
}

std::vector<LayerAddress> ToyUNet::enumerate_layers(std::int64_t latent_height, std::int64_t latent_width) const {
    SEQEDIT_CHECK(latent_height % 4 == 0 && latent_width % 4 == 0 && latent_height > 0 && latent_width > 0, Shape,
                  "toy U-Net latents must be positive multiples of 4, got ", latent_height, "x", latent_width);
    const std::int64_t channels[3] = {2 * m_config.base_channels, 2 * m_config.base_channels,
                                      m_config.base_channels};
    std::vector<LayerAddress> out;
    for (int block = 0; block < 3; ++block) {
        const auto h = latent_height >> (2 - block);
        const auto w = latent_width >> (2 - block);
        out.push_back({block, LayerKind::Resnet, block, h, w, h * w, channels[block]});
        out.push_back({block, LayerKind::Attention, block, h, w, h * w, channels[block]});
    }
    return out;
}

LayerSet ToyUNet::default_layers() const {
    return {{0, 1, 2}, {0}};
}

Conditioning ToyUNet::encode_text(std::string_view text) const {
    Tensor embedding = hashed_text_vector(text, m_config.embedding_dim, m_config.seed);
    return {std::string(text), std::move(embedding)};
}

namespace {

struct HookContext {
    const HookPlan& plan;
    FeatureBundle& captured;
};

Features apply_resnet_hook(int index, Features f, HookContext& ctx) {
    if (auto it = ctx.plan.resnet_overrides.find(index); it != ctx.plan.resnet_overrides.end() && it->second) {
        f = from_tensor(*it->second);
    }
    if (ctx.plan.capture.has_resnet(index)) ctx.captured.resnet[index] = share(to_tensor(f));
    return f;
}

Features apply_attention(int index, const AttnBlock& block, const Features& x, HookContext& ctx) {
    const RowMatrix tokens = block.norm(x).data.transpose();  // [HW, C]
    RowMatrix q = tokens * block.wq.transpose();
    RowMatrix k = tokens * block.wk.transpose();
    RowMatrix v = tokens * block.wv.transpose();
    if (auto it = ctx.plan.attention_overrides.find(index); it != ctx.plan.attention_overrides.end()) {
        if (it->second.q) q = it->second.q->matrix();
        if (it->second.k) k = it->second.k->matrix();
        if (it->second.v) v = it->second.v->matrix();
    }
    if (ctx.plan.capture.has_attention(index)) {
        ctx.captured.attention[index] = {share(Tensor::from_matrix(q)), share(Tensor::from_matrix(k)),
                                         share(Tensor::from_matrix(v))};
    }
    const RowMatrix mixed = attention(q, k, v, static_cast<int>(q.cols())) * block.wo.transpose();
    Features out = x;
    out.data += mixed.transpose();
    return out;
}

}  // namespace

NoisePrediction ToyUNet::forward(const Tensor& latent, int timestep, const Conditioning& cond, const HookPlan& plan,
                                 std::uint64_t /*seed*/) {
    SEQEDIT_CHECK(timestep >= 0 && static_cast<std::size_t>(timestep) < m_train_alpha_bar.size(), Range,
                  "timestep ", timestep, " outside the training schedule");
    SEQEDIT_CHECK(cond.embedding.size() == static_cast<std::size_t>(m_config.embedding_dim), Shape,
                  "conditioning has ", cond.embedding.size(), " values, toy U-Net expects ", m_config.embedding_dim);
    const auto& w = *m_weights;

    const Vector cond_vec = Eigen::Map<const Vector>(cond.embedding.data(), m_config.embedding_dim);
    const Vector emb = w.time2(silu(w.time1(timestep_embedding(timestep, m_config.embedding_dim)))) + w.cond(cond_vec);

    NoisePrediction out;
    HookContext ctx{plan, out.captured};

    Features h = w.conv_in(from_tensor(latent));
    const Features skip0 = w.down0(h, emb);
    const Features skip1 = w.down1(avg_pool2(skip0), emb);
    h = w.mid(avg_pool2(skip1), emb);

    h = apply_resnet_hook(0, w.up_res[0](h, emb), ctx);
    h = apply_attention(0, w.up_attn[0], h, ctx);
    h = concat(upsample2(h), skip1);
    h = apply_resnet_hook(1, w.up_res[1](h, emb), ctx);
    h = apply_attention(1, w.up_attn[1], h, ctx);
    h = concat(upsample2(h), skip0);
    h = apply_resnet_hook(2, w.up_res[2](h, emb), ctx);
    h = apply_attention(2, w.up_attn[2], h, ctx);

    const Features residual = w.conv_out(silu(w.norm_out(h)));
    // Gaussian-prior optimal denoiser for data of variance data_variance, plus
    // the network residual faded out toward high noise.
    const double abar = m_train_alpha_bar[static_cast<std::size_t>(timestep)];
    const double prior = std::sqrt(1.0 - abar) / (abar * m_config.data_variance + 1.0 - abar);
    const double gain = m_config.residual_gain * abar;
    out.eps = Tensor(latent.shape());
    for (std::size_t i = 0; i < out.eps.size(); ++i) {
        out.eps[i] = prior * latent[i] + gain * residual.data.data()[i];
    }
    return out;
}

}  // namespace seqedit
