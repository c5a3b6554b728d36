// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <cmath>
#include <random>

#include "../support.hpp"
#include "seqedit/rng.hpp"

using namespace seqedit;

namespace {

// Softmax attention written out with scalar loops.
RowMatrix scalar_attention(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v, int d) {
    RowMatrix out = RowMatrix::Zero(q.rows(), v.cols());
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        std::vector<double> logits(static_cast<std::size_t>(k.rows()));
        double top = -1e300;
        for (Eigen::Index j = 0; j < k.rows(); ++j) {
            double dot = 0;
            for (Eigen::Index c = 0; c < q.cols(); ++c) dot += q(i, c) * k(j, c);
            logits[j] = dot / std::sqrt(static_cast<double>(d));
            top = std::max(top, logits[j]);
        }
        double total = 0;
        for (auto& l : logits) total += (l = std::exp(l - top));
        for (Eigen::Index j = 0; j < k.rows(); ++j)
            for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) += logits[j] / total * v(j, c);
    }
    return out;
}

Tensor toy_latent(std::uint64_t seed, int size = 16) {
    NormalRng rng(seed);
    Tensor t({3, size, size});
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

}  // namespace

TEST_SUITE("denoiser") {

TEST_CASE("attention of one key returns its value") {
    RowMatrix q(1, 2), k(1, 2), v(1, 3);
    q << 0.3, -2.0;
    k << 5.0, 1.0;
    v << 1.5, -4.0, 2.25;
    CHECK(attention(q, k, v, 2) == v);
}

TEST_CASE("equal keys average the values") {
    RowMatrix q(2, 2), k(2, 2), v(2, 2);
    q << 1.0, 2.0, -3.0, 0.5;
    k << 0.7, 0.1, 0.7, 0.1;
    v << 1.0, 3.0, 5.0, -1.0;
    const auto out = attention(q, k, v, 2);
    for (int i = 0; i < 2; ++i) {
        CHECK(out(i, 0) == doctest::Approx(3.0).epsilon(1e-15));
        CHECK(out(i, 1) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("two-token attention matches the scalar softmax") {
    RowMatrix q(1, 2), k(2, 2), v(2, 2);
    q << 1, 0;
    k << 1, 0, 0, 1;
    v << 2, 0, 0, 2;
    // softmax(1/sqrt(2), 0) from the scalar oracle, frozen.
    const double w0 = 0.6697615493266569;
    const auto oracle = scalar_attention(q, k, v, 2);
    CHECK(oracle(0, 0) == doctest::Approx(2 * w0).epsilon(1e-15));
    CHECK(oracle(0, 1) == doctest::Approx(2 * (1 - w0)).epsilon(1e-15));
    const auto out = attention(q, k, v, 2);
    CHECK(std::abs(out(0, 0) - oracle(0, 0)) < 1e-15);
    CHECK(std::abs(out(0, 1) - oracle(0, 1)) < 1e-15);
}

TEST_CASE("random attention matches the scalar oracle and keeps Q's token count") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 20; ++trial) {
        RowMatrix q(3 + trial % 4, 5), k(7, 5), v(7, 4);
        for (auto* m : {&q, &k, &v})
            for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
        const auto out = attention(q, k, v, 5);
        CHECK(out.rows() == q.rows());
        CHECK((out - scalar_attention(q, k, v, 5)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("attention shape errors") {
    CHECK_THROWS_AS(attention(RowMatrix(1, 2), RowMatrix(2, 3), RowMatrix(2, 2), 2), Error);
    CHECK_THROWS_AS(attention(RowMatrix(1, 2), RowMatrix(2, 2), RowMatrix(3, 2), 2), Error);
    CHECK_THROWS_AS(attention(RowMatrix(1, 2), RowMatrix(2, 2), RowMatrix(2, 2), 0), Error);
}

TEST_CASE("toy enumeration") {
    ToyUNet net;
    const auto layers = net.enumerate_layers(16, 16);
    int attention = 0, resnet_lowest = 0;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::Attention) ++attention;
        if (l.kind == LayerKind::Resnet && l.resolution_level == 0) ++resnet_lowest;
    }
    CHECK(attention >= 3);
    CHECK(resnet_lowest >= 1);
    CHECK(layers == net.enumerate_layers(16, 16));
    CHECK(net.default_layers() == LayerSet{{0, 1, 2}, {0}});
}

TEST_CASE("production layout carries the upsample indices 4, 7, 9") {
    const auto layers = stable_diffusion_upsample_layout(64, 64);
    for (int index : {4, 7, 9}) {
        bool found = false;
        for (const auto& l : layers) found |= l.kind == LayerKind::Attention && l.index == index;
        CHECK(found);
    }
    CHECK(stable_diffusion_default_layers() == LayerSet{{4, 7, 9}, {4}});
}

TEST_CASE("overrides are validated against the enumeration") {
    ToyUNet net;
    const auto cond = net.encode_text("a cat");
    const auto z = toy_latent(1);
    HookPlan unknown;
    unknown.resnet_overrides[9] = share(Tensor({16, 4, 4}));
    try {
        net.predict_noise(z, 500, cond, unknown);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Range);
    }
    HookPlan wrong;
    wrong.attention_overrides[0].k = share(Tensor({3, 3}));
    try {
        net.predict_noise(z, 500, cond, wrong);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Shape);
    }
}

TEST_CASE("empty plan and self-injection reproduce the vanilla pass") {
    ToyUNet net;
    const auto cond = net.encode_text("a red cube");
    const auto z = toy_latent(2);
    const auto plain = net.predict_noise(z, 741, cond, {});
    HookPlan capture;
    capture.capture = net.default_layers();
    capture.capture.resnet_layers = {0, 1, 2};
    const auto captured = net.predict_noise(z, 741, cond, capture);
    CHECK(testing::bit_equal(plain.eps, captured.eps));

    HookPlan inject;
    for (const auto& [l, a] : captured.captured.attention) inject.attention_overrides[l] = {a.q, a.k, a.v};
    inject.resnet_overrides = captured.captured.resnet;
    CHECK(testing::bit_equal(net.predict_noise(z, 741, cond, inject).eps, plain.eps));
}

TEST_CASE("overriding a layer leaves upstream layers alone") {
    ToyUNet net;
    const auto cond = net.encode_text("a red cube");
    const auto z = toy_latent(3);
    HookPlan plan;
    plan.capture = {{0, 1, 2}, {0, 1, 2}};
    const auto base = net.predict_noise(z, 300, cond, plan);
    const auto& shape = base.captured.attention.at(2).k->shape();
    std::mt19937_64 rng(5);
    plan.attention_overrides[2].k = share(testing::random_tensor(shape, rng));
    const auto changed = net.predict_noise(z, 300, cond, plan);
    CHECK_FALSE(testing::bit_equal(base.eps, changed.eps));
    CHECK(changed.eps.shape() == base.eps.shape());
    for (int l : {0, 1}) {
        CHECK(testing::bit_equal(*base.captured.attention.at(l).v, *changed.captured.attention.at(l).v));
        CHECK(testing::bit_equal(*base.captured.resnet.at(l), *changed.captured.resnet.at(l)));
    }
    CHECK(testing::bit_equal(*base.captured.resnet.at(2), *changed.captured.resnet.at(2)));
    CHECK(testing::bit_equal(*base.captured.attention.at(2).q, *changed.captured.attention.at(2).q));
    CHECK(*changed.captured.attention.at(2).k == *plan.attention_overrides[2].k);
}

TEST_CASE("toy prediction is deterministic across instances and clones") {
    ToyUNet a, b;
    const auto z = toy_latent(4);
    const auto eps = a.predict_noise(z, 981, a.encode_text("snowy"), {}).eps;
    CHECK(testing::bit_equal(eps, b.predict_noise(z, 981, b.encode_text("snowy"), {}).eps));
    auto clone = a.clone();
    CHECK(testing::bit_equal(eps, clone->predict_noise(z, 981, clone->encode_text("snowy"), {}).eps));
}

TEST_CASE("toy golden output") {
    ToyUNet net;
    const auto eps = net.predict_noise(toy_latent(2026), 501, net.encode_text("a watercolor painting"), {}).eps;
    double sum = 0, sum_sq = 0;
    for (double v : eps.values()) {
        sum += v;
        sum_sq += v * v;
    }
    // Recorded once from this backbone and pinned.
    CHECK(eps[0] == doctest::Approx(-0.85997842796995538).epsilon(1e-12));
    CHECK(eps[417] == doctest::Approx(0.49494846840523166).epsilon(1e-12));
    CHECK(sum == doctest::Approx(-49.947395982496246).epsilon(1e-10));
    CHECK(sum_sq == doctest::Approx(785.28537582673914).epsilon(1e-12));
}

}
