#include <doctest.h>

#include <cmath>

#include "dgadet/errors.hpp"
#include "dgadet/nn/adam.hpp"
#include "dgadet/errors.hpp"
#include "dgadet/nn/tape.hpp"

using dgadet::Rng;
using dgadet::nn::Adam;
using dgadet::nn::Tape;
using dgadet::nn::Tensor;
using dgadet::nn::xavier_normal_init;

TEST_CASE("softmax of a zero vector is uniform") {
    Tape t(false);
    auto y = t.softmax(t.constant(Tensor::from({1, 4}, {0, 0, 0, 0})));
    for (int i = 0; i < 4; ++i) CHECK(t.val(y).data[i] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(7);
    Tensor X = Tensor::zeros({16, 11});
    for (float& v : X.data) v = static_cast<float>(rng.normal(0, 3));
    Tape t(false);
    auto y = t.softmax(t.constant(X));
    for (int64_t r = 0; r < 16; ++r) {
        double s = 0;
        for (int64_t c = 0; c < 11; ++c) s += t.val(y).at(r, c);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("layer_norm output is standardized per row") {
    Rng rng(8);
    Tensor X = Tensor::zeros({10, 32});
    for (float& v : X.data) v = static_cast<float>(rng.normal(1.5, 2.0));
    Tensor g = Tensor::full({32}, 1.0f);
    Tensor b = Tensor::zeros({32});
    Tape t(false);
    auto y = t.layer_norm(t.constant(X), t.constant(g), t.constant(b));
    for (int64_t r = 0; r < 10; ++r) {
        double mu = 0, var = 0;
        for (int64_t c = 0; c < 32; ++c) mu += t.val(y).at(r, c);
        mu /= 32;
        for (int64_t c = 0; c < 32; ++c) {
            double d = t.val(y).at(r, c) - mu;
            var += d * d;
        }
        var /= 32;
        CHECK(std::fabs(mu) < 1e-5);
        CHECK(std::fabs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("mean_pool_time with a single real position returns that row") {
    Tensor H = Tensor::from({2, 2}, {1, 3, 5, 7});
    std::vector<uint8_t> mask = {1, 0};
    Tape t(false);
    auto y = t.mean_pool_time(t.constant(H), mask, 1, 2);
    CHECK(t.val(y).data[0] == doctest::Approx(1.0));
    CHECK(t.val(y).data[1] == doctest::Approx(3.0));
}

TEST_CASE("pooling rejects an all-pad mask") {
    Tensor H = Tensor::from({2, 2}, {1, 3, 5, 7});
    std::vector<uint8_t> mask = {0, 0};
    Tape t(false);
    CHECK_THROWS_AS(t.max_pool_time(t.constant(H), mask, 1, 2), dgadet::InvariantError);
    CHECK_THROWS_AS(t.mean_pool_time(t.constant(H), mask, 1, 2), dgadet::InvariantError);
}

TEST_CASE("cross_entropy of uniform two-class logits is ln 2") {
    Tape t(false);
    auto loss = t.cross_entropy(t.constant(Tensor::from({1, 2}, {0, 0})), {0}, {1.0f});
    CHECK(t.val(loss).data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("cross_entropy ignores zero-weight rows") {
    Tensor X = Tensor::from({2, 3}, {5, -2, 1, 0, 0, 0});
    Tape t(false);
    auto a = t.cross_entropy(t.constant(X), {0, 1}, {1.0f, 0.0f});
    Tensor X1 = Tensor::from({1, 3}, {5, -2, 1});
    auto b = t.cross_entropy(t.constant(X1), {0}, {1.0f});
    CHECK(t.val(a).data[0] == doctest::Approx(t.val(b).data[0]).epsilon(1e-7));
}

TEST_CASE("attention matches a brute-force oracle on a small case") {
    // independent double-precision reference
    const int64_t B = 2, L = 3, D = 4, H = 2, hd = D / H;
    Rng rng(21);
    Tensor Q = Tensor::zeros({B * L, D}), K = Q, V = Q;
    for (float& v : Q.data) v = static_cast<float>(rng.normal(0, 1));
    for (float& v : K.data) v = static_cast<float>(rng.normal(0, 1));
    for (float& v : V.data) v = static_cast<float>(rng.normal(0, 1));
    std::vector<uint8_t> mask = {1, 1, 0, 1, 1, 1};

    Tape t(false);
    auto out = t.attention(t.constant(Q), t.constant(K), t.constant(V), mask, B, L, H);

    for (int64_t b = 0; b < B; ++b) {
        for (int64_t h = 0; h < H; ++h) {
            for (int64_t i = 0; i < L; ++i) {
                std::vector<double> score(static_cast<size_t>(L));
                double mx = -1e300;
                for (int64_t j = 0; j < L; ++j) {
                    double s = 0;
                    for (int64_t c = 0; c < hd; ++c) {
                        s += static_cast<double>(Q.at(b * L + i, h * hd + c)) *
                             static_cast<double>(K.at(b * L + j, h * hd + c));
                    }
                    s /= std::sqrt(static_cast<double>(hd));
                    if (!mask[static_cast<size_t>(b * L + j)]) s += -1e9;
                    score[static_cast<size_t>(j)] = s;
                    mx = std::max(mx, s);
                }
                double Z = 0;
                for (int64_t j = 0; j < L; ++j) Z += std::exp(score[static_cast<size_t>(j)] - mx);
                for (int64_t c = 0; c < hd; ++c) {
                    double o = 0;
                    for (int64_t j = 0; j < L; ++j) {
                        o += std::exp(score[static_cast<size_t>(j)] - mx) / Z *
                             static_cast<double>(V.at(b * L + j, h * hd + c));
                    }
                    CHECK(t.val(out).at(b * L + i, h * hd + c) ==
                          doctest::Approx(o).epsilon(1e-5));
                }
            }
        }
    }
}

TEST_CASE("dropout is identity when train flag is off") {
    Rng rng(5);
    Tensor X = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tape t(false);
    auto y = t.dropout(t.constant(X), 0.5f, false, rng);
    CHECK(t.val(y).data == X.data);
}

TEST_CASE("matmul reports both shapes on mismatch") {
    Tape t(false);
    auto a = t.constant(Tensor::zeros({2, 3}));
    auto b = t.constant(Tensor::zeros({4, 2}));
    try {
        t.matmul(a, b);
        FAIL("expected throw");
    } catch (const dgadet::InvariantError& e) {
        std::string msg = e.what();
        CHECK(msg.find("(2,3)") != std::string::npos);
        CHECK(msg.find("(4,2)") != std::string::npos);
    }
}

TEST_CASE("embedding_lookup rejects out-of-range ids") {
    Tape t(false);
    auto tab = t.constant(Tensor::zeros({4, 2}));
    CHECK_THROWS_AS(t.embedding_lookup(tab, {0, 4}), dgadet::InvariantError);
}

TEST_CASE("adam first step moves by about lr per coordinate") {
    Tensor p = Tensor::from({3}, {1.0f, 2.0f, -3.0f});
    p.set_requires_grad(true);
    p.grad = {0.5f, -0.25f, 4.0f};
    Adam opt;
    opt.add_param("p", &p, 0.01f);
    opt.step();
    // t=1: mhat=g, vhat=g^2, update = -lr*g/(|g|+eps) ~= -lr*sign(g)
    CHECK(p.data[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
    CHECK(p.data[1] == doctest::Approx(2.0 + 0.01).epsilon(1e-4));
    CHECK(p.data[2] == doctest::Approx(-3.0 - 0.01).epsilon(1e-4));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from({2}, {1.0f, -1.0f});
    p.set_requires_grad(true);
    Adam opt;
    opt.add_param("p", &p, 0.1f);
    opt.step();
    CHECK(p.data[0] == doctest::Approx(1.0f));
    CHECK(p.data[1] == doctest::Approx(-1.0f));
}

TEST_CASE("adam per-group learning rates scale the update") {
    Tensor a = Tensor::from({1}, {0.0f});
    Tensor b = Tensor::from({1}, {0.0f});
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    a.grad = {1.0f};
    b.grad = {1.0f};
    Adam opt;
    opt.add_param("head", &a, 1e-4f);
    opt.add_param("backbone", &b, 1e-6f);
    opt.step();
    CHECK(a.data[0] == doctest::Approx(-1e-4).epsilon(1e-3));
    CHECK(b.data[0] == doctest::Approx(-1e-6).epsilon(1e-3));
    CHECK(a.data[0] / b.data[0] == doctest::Approx(100.0).epsilon(1e-3));
}

TEST_CASE("adam requires initialization") {
    Adam opt;
    CHECK_THROWS_AS(opt.step(), dgadet::InvariantError);
}

TEST_CASE("xavier init: variance near 2/(fan_in+fan_out), deterministic, 2-D only") {
    Tensor t1 = xavier_normal_init({256, 256}, 77);
    Tensor t2 = xavier_normal_init({256, 256}, 77);
    CHECK(t1.data == t2.data);
    double mean = 0;
    for (float v : t1.data) mean += v;
    mean /= static_cast<double>(t1.data.size());
    double var = 0;
    for (float v : t1.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(t1.data.size());
    const double expected = 1.0 / 256.0;
    CHECK(var > expected * 0.9);
    CHECK(var < expected * 1.1);
    CHECK_THROWS_AS(xavier_normal_init({4}, 1), dgadet::InvariantError);
}

TEST_CASE("forward results are bit-identical across runs") {
    auto run = [] {
        Rng rng(3);
        Tensor X = Tensor::zeros({8, 8});
        for (float& v : X.data) v = static_cast<float>(rng.normal(0, 1));
        Tensor W = xavier_normal_init({8, 8}, 4);
        Tape t(false);
        auto y = t.gelu(t.matmul(t.constant(X), t.constant(W)));
        return t.val(y).data;
    };
    CHECK(run() == run());
}
