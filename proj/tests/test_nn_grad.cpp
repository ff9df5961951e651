#include <doctest.h>

#include <cmath>
#include <functional>

#include "dgadet/errors.hpp"
#include "dgadet/nn/tape.hpp"
#include "f64_ref.hpp"
#include "grad_check.hpp"

using dgadet::Rng;
using dgadet::nn::Tape;
using dgadet::nn::Tensor;
using gradcheck::F64Params;

namespace {

Tensor randn(std::vector<int64_t> shape, uint64_t seed, float scale = 1.0f) {
    Tensor t = Tensor::zeros(std::move(shape));
    Rng rng(seed);
    for (float& v : t.data) v = static_cast<float>(rng.normal(0.0, scale));
    return t;
}

void run_check(std::vector<Tensor*> params, const std::function<Tape::Ref(Tape&)>& build,
               const std::function<double(const F64Params&)>& f64_loss, double tol = 1e-3) {
    for (Tensor* p : params) p->set_requires_grad(true);
    Tape tape;
    tape.backward(build(tape));
    Rng rng(99);
    auto rep = gradcheck::compare(params, f64_loss, 8, 1e-3, rng);
    CHECK(rep.checked >= 8);
    CHECK(rep.max_rel_error < tol);
}

}  // namespace

TEST_CASE("grad: matmul + gelu") {
    Tensor A = randn({6, 5}, 1);
    Tensor B = randn({5, 7}, 2);
    run_check(
        {&A, &B},
        [&](Tape& t) { return t.sum_all(t.gelu(t.matmul(t.leaf(A), t.leaf(B)))); },
        [](const F64Params& p) {
            return f64ref::sum(f64ref::gelu(f64ref::matmul(p[0], p[1], 6, 5, 7)));
        });
}

TEST_CASE("grad: add_bias + relu") {
    Tensor X = randn({9, 4}, 3);
    Tensor b = randn({4}, 4);
    run_check(
        {&X, &b},
        [&](Tape& t) { return t.sum_all(t.relu(t.add_bias(t.leaf(X), t.leaf(b)))); },
        [](const F64Params& p) {
            return f64ref::sum(f64ref::relu(f64ref::add_bias(p[0], p[1], 9, 4)));
        });
}

TEST_CASE("grad: elementwise add and mul") {
    Tensor X = randn({5, 5}, 5);
    Tensor Y = randn({5, 5}, 6);
    run_check(
        {&X, &Y},
        [&](Tape& t) {
            return t.sum_all(t.gelu(t.mul(t.add(t.leaf(X), t.leaf(Y)), t.leaf(Y))));
        },
        [](const F64Params& p) {
            return f64ref::sum(f64ref::gelu(f64ref::mul(f64ref::add(p[0], p[1]), p[1])));
        });
}

TEST_CASE("grad: layer_norm") {
    Tensor X = randn({7, 6}, 7);
    Tensor g = Tensor::full({6}, 1.0f);
    Tensor be = randn({6}, 8, 0.1f);
    run_check(
        {&X, &g, &be},
        [&](Tape& t) {
            return t.sum_all(t.gelu(t.layer_norm(t.leaf(X), t.leaf(g), t.leaf(be))));
        },
        [](const F64Params& p) {
            return f64ref::sum(f64ref::gelu(f64ref::layer_norm(p[0], p[1], p[2], 7, 6)));
        });
}

TEST_CASE("grad: softmax") {
    Tensor X = randn({4, 6}, 9);
    Tensor C = randn({4, 6}, 10);
    const auto c64 = f64ref::from_f32(C.data);
    run_check(
        {&X},
        [&](Tape& t) { return t.sum_all(t.mul(t.softmax(t.leaf(X)), t.constant(C))); },
        [c64](const F64Params& p) {
            return f64ref::sum(f64ref::mul(f64ref::softmax_rows(p[0], 4, 6), c64));
        });
}

TEST_CASE("grad: embedding_lookup and gather_rows") {
    Tensor T = randn({12, 5}, 11);
    std::vector<int32_t> ids = {3, 0, 7, 3, 11, 2};
    std::vector<int32_t> sub = {1, 4, 4, 0};
    run_check(
        {&T},
        [&](Tape& t) {
            return t.sum_all(t.gelu(t.gather_rows(t.embedding_lookup(t.leaf(T), ids), sub)));
        },
        [ids, sub](const F64Params& p) {
            auto emb = f64ref::gather_rows(p[0], ids, 5);
            return f64ref::sum(f64ref::gelu(f64ref::gather_rows(emb, sub, 5)));
        });
}

TEST_CASE("grad: pooling with mask") {
    const int64_t B = 3, L = 4, D = 5;
    Tensor H = randn({B * L, D}, 12);
    std::vector<uint8_t> mask = {1, 1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 0};
    Tensor C = randn({B, 2 * D}, 13);
    const auto c64 = f64ref::from_f32(C.data);
    run_check(
        {&H},
        [&](Tape& t) {
            auto h = t.leaf(H);
            auto mx = t.max_pool_time(h, mask, B, L);
            auto mn = t.mean_pool_time(h, mask, B, L);
            return t.sum_all(t.mul(t.concat_cols(mx, mn), t.constant(C)));
        },
        [mask, c64](const F64Params& p) {
            auto mx = f64ref::max_pool_time(p[0], mask, B, L, D);
            auto mn = f64ref::mean_pool_time(p[0], mask, B, L, D);
            return f64ref::sum(f64ref::mul(f64ref::concat_cols(mx, mn, B, D, D), c64));
        });
}

TEST_CASE("grad: cross_entropy with position weights") {
    Tensor X = randn({6, 9}, 14);
    std::vector<int32_t> targets = {0, 3, 8, 1, 1, 5};
    std::vector<float> weights = {1, 0, 1, 1, 0, 1};
    run_check(
        {&X},
        [&](Tape& t) { return t.cross_entropy(t.leaf(X), targets, weights); },
        [targets, weights](const F64Params& p) {
            return f64ref::cross_entropy(p[0], targets, weights, 6, 9);
        });
}

TEST_CASE("grad: attention") {
    const int64_t B = 2, L = 4, D = 8, H = 2;
    Tensor Q = randn({B * L, D}, 15, 0.7f);
    Tensor K = randn({B * L, D}, 16, 0.7f);
    Tensor V = randn({B * L, D}, 17, 0.7f);
    std::vector<uint8_t> mask = {1, 1, 1, 0, 1, 1, 0, 0};
    Tensor C = randn({B * L, D}, 18);
    const auto c64 = f64ref::from_f32(C.data);
    run_check(
        {&Q, &K, &V},
        [&](Tape& t) {
            auto o = t.attention(t.leaf(Q), t.leaf(K), t.leaf(V), mask, B, L, H);
            return t.sum_all(t.mul(o, t.constant(C)));
        },
        [mask, c64](const F64Params& p) {
            auto o = f64ref::attention(p[0], p[1], p[2], mask, B, L, H, D);
            return f64ref::sum(f64ref::mul(o, c64));
        });
}

TEST_CASE("grad: dropout uses a fixed mask per seed") {
    Tensor X = randn({8, 8}, 19);
    Tensor C = randn({8, 8}, 20);
    const auto c64 = f64ref::from_f32(C.data);
    run_check(
        {&X},
        [&](Tape& t) {
            Rng rng(42);  // same stream every evaluation -> same mask
            return t.sum_all(t.mul(t.dropout(t.leaf(X), 0.3f, true, rng), t.constant(C)));
        },
        [c64](const F64Params& p) {
            dgadet::Rng rng(42);
            return f64ref::sum(f64ref::mul(f64ref::dropout(p[0], 0.3, rng), c64));
        });
}

TEST_CASE("grad: linear loss sum(W x) gives outer-product gradient") {
    Tensor W = randn({3, 4}, 21);
    Tensor x = randn({4, 1}, 22);
    W.set_requires_grad(true);
    Tape t;
    auto loss = t.sum_all(t.matmul(t.leaf(W), t.leaf(x)));
    t.backward(loss);
    for (int64_t r = 0; r < 3; ++r) {
        for (int64_t c = 0; c < 4; ++c) {
            CHECK(W.grad[static_cast<size_t>(r * 4 + c)] ==
                  doctest::Approx(x.data[static_cast<size_t>(c)]).epsilon(1e-6));
        }
    }
}

TEST_CASE("grad: repeated backward accumulates (doubles)") {
    Tensor W = randn({3, 3}, 23);
    W.set_requires_grad(true);
    Tape t;
    auto loss = t.sum_all(t.gelu(t.leaf(W)));
    t.backward(loss);
    std::vector<float> once = W.grad;
    t.backward(loss);
    for (size_t i = 0; i < once.size(); ++i) {
        CHECK(W.grad[i] == doctest::Approx(2.0f * once[i]).epsilon(1e-6));
    }
}

TEST_CASE("grad: non-scalar loss rejected") {
    Tensor W = randn({2, 2}, 24);
    W.set_requires_grad(true);
    Tape t;
    auto y = t.gelu(t.leaf(W));
    CHECK_THROWS_AS(t.backward(y), dgadet::InvariantError);
}
