#include "dgadet/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "dgadet/errors.hpp"
#include "dgadet/nn/kernels.hpp"

namespace dgadet::nn {

namespace {
constexpr float kMaskPenalty = -1e9f;
constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}  // namespace

const Tensor& Tape::val(Ref r) const {
    const Node& n = nodes_[static_cast<size_t>(r)];
    return n.param ? *n.param : n.value;
}

std::vector<float>& Tape::grad_of(Ref r) {
    Node& n = nodes_[static_cast<size_t>(r)];
    if (n.grad.empty()) n.grad.assign(val(r).data.size(), 0.0f);
    return n.grad;
}

void Tape::accumulate(Ref r, const float* g, size_t n) {
    Node& node = nodes_[static_cast<size_t>(r)];
    if (!node.requires_grad) return;
    std::vector<float>& dst = grad_of(r);
    for (size_t i = 0; i < n; ++i) dst[i] += g[i];
}

bool Tape::wants_grad(const std::vector<Ref>& parents) const {
    if (!grad_enabled_) return false;
    for (Ref p : parents) {
        if (nodes_[static_cast<size_t>(p)].requires_grad) return true;
    }
    return false;
}

Tape::Ref Tape::leaf(Tensor& param) {
    Node n;
    n.param = &param;
    n.requires_grad = grad_enabled_ && param.requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Ref>(nodes_.size() - 1);
}

Tape::Ref Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = false;
    nodes_.push_back(std::move(n));
    return static_cast<Ref>(nodes_.size() - 1);
}

Tape::Ref Tape::push(Tensor value, std::vector<Ref> parents, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = wants_grad(parents);
    n.parents = std::move(parents);
    if (n.requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Ref>(nodes_.size() - 1);
}

// ---------------------------------------------------------------- matmul

Tape::Ref Tape::matmul(Ref a, Ref b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require(A.rank() == 2 && B.rank() == 2 && A.shape[1] == B.shape[0],
            "matmul: incompatible shapes " + shape_str(A.shape) + " x " + shape_str(B.shape));
    const int64_t M = A.shape[0], K = A.shape[1], N = B.shape[1];
    Tensor C = Tensor::zeros({M, N});
    gemm(C.data.data(), A.data.data(), B.data.data(), M, K, N, false);
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(C), {a, b}, [a, b, out, M, K, N](Tape& t) {
        const std::vector<float>& dC = t.grad_of(out);
        if (t.nodes_[static_cast<size_t>(a)].requires_grad) {
            gemm_abt(t.grad_of(a).data(), dC.data(), t.val(b).data.data(), M, N, K, true);
        }
        if (t.nodes_[static_cast<size_t>(b)].requires_grad) {
            gemm_atb(t.grad_of(b).data(), t.val(a).data.data(), dC.data(), M, K, N, true);
        }
    });
}

// ---------------------------------------------------------------- add / bias

Tape::Ref Tape::add(Ref a, Ref b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require(A.shape == B.shape,
            "add: shape mismatch " + shape_str(A.shape) + " vs " + shape_str(B.shape));
    Tensor C = A;
    C.set_requires_grad(false);
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] += B.data[i];
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(C), {a, b}, [a, b, out](Tape& t) {
        const std::vector<float>& dC = t.grad_of(out);
        t.accumulate(a, dC.data(), dC.size());
        t.accumulate(b, dC.data(), dC.size());
    });
}

Tape::Ref Tape::mul(Ref a, Ref b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require(A.shape == B.shape,
            "mul: shape mismatch " + shape_str(A.shape) + " vs " + shape_str(B.shape));
    Tensor C = A;
    C.set_requires_grad(false);
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] *= B.data[i];
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(C), {a, b}, [a, b, out](Tape& t) {
        const std::vector<float>& dC = t.grad_of(out);
        if (t.nodes_[static_cast<size_t>(a)].requires_grad) {
            const std::vector<float>& bv = t.val(b).data;
            std::vector<float>& da = t.grad_of(a);
            for (size_t i = 0; i < dC.size(); ++i) da[i] += dC[i] * bv[i];
        }
        if (t.nodes_[static_cast<size_t>(b)].requires_grad) {
            const std::vector<float>& av = t.val(a).data;
            std::vector<float>& db = t.grad_of(b);
            for (size_t i = 0; i < dC.size(); ++i) db[i] += dC[i] * av[i];
        }
    });
}

Tape::Ref Tape::add_bias(Ref x, Ref bias) {
    const Tensor& X = val(x);
    const Tensor& B = val(bias);
    require(X.rank() == 2 && B.rank() == 1 && X.shape[1] == B.shape[0],
            "add_bias: shape mismatch " + shape_str(X.shape) + " vs " + shape_str(B.shape));
    const int64_t R = X.shape[0], C = X.shape[1];
    Tensor Y = X;
    Y.set_requires_grad(false);
    for (int64_t r = 0; r < R; ++r) {
        float* y = Y.data.data() + r * C;
        const float* b = B.data.data();
        for (int64_t c = 0; c < C; ++c) y[c] += b[c];
    }
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {x, bias}, [x, bias, out, R, C](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        t.accumulate(x, dY.data(), dY.size());
        if (t.nodes_[static_cast<size_t>(bias)].requires_grad) {
            std::vector<float>& db = t.grad_of(bias);
            for (int64_t r = 0; r < R; ++r) {
                const float* dy = dY.data() + r * C;
                for (int64_t c = 0; c < C; ++c) db[static_cast<size_t>(c)] += dy[c];
            }
        }
    });
}

// ---------------------------------------------------------------- pointwise

Tape::Ref Tape::relu(Ref x) {
    const Tensor& X = val(x);
    Tensor Y = X;
    Y.set_requires_grad(false);
    for (float& v : Y.data) v = std::max(0.0f, v);
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {x}, [x, out](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        const std::vector<float>& xv = t.val(x).data;
        std::vector<float>& dx = t.grad_of(x);
        for (size_t i = 0; i < dY.size(); ++i) {
            if (xv[i] > 0.0f) dx[i] += dY[i];
        }
    });
}

Tape::Ref Tape::gelu(Ref x) {
    const Tensor& X = val(x);
    Tensor Y = X;
    Y.set_requires_grad(false);
    for (float& v : Y.data) {
        const double u = v;
        v = static_cast<float>(0.5 * u * (1.0 + std::erf(u * kInvSqrt2)));
    }
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {x}, [x, out](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        const std::vector<float>& xv = t.val(x).data;
        std::vector<float>& dx = t.grad_of(x);
        for (size_t i = 0; i < dY.size(); ++i) {
            const double u = xv[i];
            const double cdf = 0.5 * (1.0 + std::erf(u * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * u * u);
            dx[i] += dY[i] * static_cast<float>(cdf + u * pdf);
        }
    });
}

Tape::Ref Tape::dropout(Ref x, float p, bool train, Rng& rng) {
    const Tensor& X = val(x);
    if (!train || p <= 0.0f) {
        Tensor Y = X;
        Y.set_requires_grad(false);
        const Ref out = static_cast<Ref>(nodes_.size());
        return push(std::move(Y), {x}, [x, out](Tape& t) {
            const std::vector<float>& dY = t.grad_of(out);
            t.accumulate(x, dY.data(), dY.size());
        });
    }
    require(p < 1.0f, "dropout: p must be < 1");
    auto mask = std::make_shared<std::vector<uint8_t>>(X.data.size());
    const float inv_keep = 1.0f / (1.0f - p);
    Tensor Y = X;
    Y.set_requires_grad(false);
    for (size_t i = 0; i < Y.data.size(); ++i) {
        const bool keep = rng.uniform_real() >= p;
        (*mask)[i] = keep ? 1 : 0;
        Y.data[i] = keep ? Y.data[i] * inv_keep : 0.0f;
    }
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {x}, [x, out, mask, inv_keep](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        std::vector<float>& dx = t.grad_of(x);
        for (size_t i = 0; i < dY.size(); ++i) {
            if ((*mask)[i]) dx[i] += dY[i] * inv_keep;
        }
    });
}

// ---------------------------------------------------------------- layer norm

Tape::Ref Tape::layer_norm(Ref x, Ref gamma, Ref beta, float eps) {
    const Tensor& X = val(x);
    const Tensor& G = val(gamma);
    const Tensor& Bt = val(beta);
    require(X.rank() == 2, "layer_norm: input must be 2-D, got " + shape_str(X.shape));
    const int64_t R = X.shape[0], C = X.shape[1];
    require(G.rank() == 1 && G.shape[0] == C && Bt.shape == G.shape,
            "layer_norm: param shape mismatch " + shape_str(G.shape) + " vs input " +
                shape_str(X.shape));
    Tensor Y = Tensor::zeros({R, C});
    auto rstd = std::make_shared<std::vector<float>>(static_cast<size_t>(R));
    auto mean = std::make_shared<std::vector<float>>(static_cast<size_t>(R));
    for (int64_t r = 0; r < R; ++r) {
        const float* xr = X.data.data() + r * C;
        float mu = 0.0f;
        for (int64_t c = 0; c < C; ++c) mu += xr[c];
        mu /= static_cast<float>(C);
        float var = 0.0f;
        for (int64_t c = 0; c < C; ++c) {
            const float d = xr[c] - mu;
            var += d * d;
        }
        var /= static_cast<float>(C);
        const float rs = 1.0f / std::sqrt(var + eps);
        (*mean)[static_cast<size_t>(r)] = mu;
        (*rstd)[static_cast<size_t>(r)] = rs;
        float* yr = Y.data.data() + r * C;
        for (int64_t c = 0; c < C; ++c) {
            yr[c] = (xr[c] - mu) * rs * G.data[static_cast<size_t>(c)] +
                    Bt.data[static_cast<size_t>(c)];
        }
    }
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {x, gamma, beta},
                [x, gamma, beta, out, R, C, mean, rstd](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        const std::vector<float>& xv = t.val(x).data;
        const std::vector<float>& g = t.val(gamma).data;
        const bool wx = t.nodes_[static_cast<size_t>(x)].requires_grad;
        const bool wg = t.nodes_[static_cast<size_t>(gamma)].requires_grad;
        const bool wb = t.nodes_[static_cast<size_t>(beta)].requires_grad;
        std::vector<float> dxhat(static_cast<size_t>(C));
        for (int64_t r = 0; r < R; ++r) {
            const float* dy = dY.data() + r * C;
            const float* xr = xv.data() + r * C;
            const float mu = (*mean)[static_cast<size_t>(r)];
            const float rs = (*rstd)[static_cast<size_t>(r)];
            float s1 = 0.0f, s2 = 0.0f;
            for (int64_t c = 0; c < C; ++c) {
                const float xh = (xr[c] - mu) * rs;
                dxhat[static_cast<size_t>(c)] = dy[c] * g[static_cast<size_t>(c)];
                s1 += dxhat[static_cast<size_t>(c)];
                s2 += dxhat[static_cast<size_t>(c)] * xh;
            }
            if (wx) {
                std::vector<float>& dx = t.grad_of(x);
                for (int64_t c = 0; c < C; ++c) {
                    const float xh = (xr[c] - mu) * rs;
                    dx[static_cast<size_t>(r * C + c)] +=
                        rs * (dxhat[static_cast<size_t>(c)] -
                              (s1 + xh * s2) / static_cast<float>(C));
                }
            }
            if (wg) {
                std::vector<float>& dg = t.grad_of(gamma);
                for (int64_t c = 0; c < C; ++c) {
                    dg[static_cast<size_t>(c)] += dy[c] * (xr[c] - mu) * rs;
                }
            }
            if (wb) {
                std::vector<float>& db = t.grad_of(beta);
                for (int64_t c = 0; c < C; ++c) db[static_cast<size_t>(c)] += dy[c];
            }
        }
    });
}

// ---------------------------------------------------------------- softmax

Tape::Ref Tape::softmax(Ref x, int axis) {
    const Tensor& X = val(x);
    require(X.rank() >= 1 && X.rank() <= 2, "softmax: expected 1-D or 2-D input");
    require(axis == -1 || axis == static_cast<int>(X.rank()) - 1,
            "softmax: only the last axis is supported");
    const int64_t C = X.shape.back();
    const int64_t R = X.numel() / C;
    Tensor Y = X;
    Y.set_requires_grad(false);
    softmax_rows(Y.data.data(), R, C);
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {x}, [x, out, R, C](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        const std::vector<float>& yv = t.val(out).data;
        std::vector<float>& dx = t.grad_of(x);
        for (int64_t r = 0; r < R; ++r) {
            const float* dy = dY.data() + r * C;
            const float* y = yv.data() + r * C;
            float dot = 0.0f;
            for (int64_t c = 0; c < C; ++c) dot += dy[c] * y[c];
            float* d = dx.data() + r * C;
            for (int64_t c = 0; c < C; ++c) d[c] += y[c] * (dy[c] - dot);
        }
    });
}

// ---------------------------------------------------------------- lookup / gather

Tape::Ref Tape::embedding_lookup(Ref table, const std::vector<int32_t>& ids) {
    const Tensor& T = val(table);
    require(T.rank() == 2, "embedding_lookup: table must be 2-D");
    const int64_t V = T.shape[0], D = T.shape[1];
    for (int32_t id : ids) {
        require(id >= 0 && id < V, "embedding_lookup: id " + std::to_string(id) +
                                       " out of range [0," + std::to_string(V) + ")");
    }
    const int64_t n = static_cast<int64_t>(ids.size());
    Tensor Y = Tensor::zeros({n, D});
    for (int64_t i = 0; i < n; ++i) {
        std::memcpy(Y.data.data() + i * D, T.data.data() + static_cast<int64_t>(ids[i]) * D,
                    static_cast<size_t>(D) * sizeof(float));
    }
    auto idv = std::make_shared<std::vector<int32_t>>(ids);
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {table}, [table, out, idv, D](Tape& t) {
        if (!t.nodes_[static_cast<size_t>(table)].requires_grad) return;
        const std::vector<float>& dY = t.grad_of(out);
        std::vector<float>& dT = t.grad_of(table);
        for (size_t i = 0; i < idv->size(); ++i) {
            const float* src = dY.data() + static_cast<int64_t>(i) * D;
            float* dst = dT.data() + static_cast<int64_t>((*idv)[i]) * D;
            for (int64_t c = 0; c < D; ++c) dst[c] += src[c];
        }
    });
}

Tape::Ref Tape::gather_rows(Ref x, std::vector<int32_t> rows) {
    const Tensor& X = val(x);
    require(X.rank() == 2, "gather_rows: input must be 2-D");
    const int64_t R = X.shape[0], C = X.shape[1];
    for (int32_t r : rows) require(r >= 0 && r < R, "gather_rows: row index out of range");
    const int64_t n = static_cast<int64_t>(rows.size());
    Tensor Y = Tensor::zeros({n, C});
    for (int64_t i = 0; i < n; ++i) {
        std::memcpy(Y.data.data() + i * C, X.data.data() + static_cast<int64_t>(rows[i]) * C,
                    static_cast<size_t>(C) * sizeof(float));
    }
    auto idx = std::make_shared<std::vector<int32_t>>(std::move(rows));
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {x}, [x, out, idx, C](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        std::vector<float>& dX = t.grad_of(x);
        for (size_t i = 0; i < idx->size(); ++i) {
            const float* src = dY.data() + static_cast<int64_t>(i) * C;
            float* dst = dX.data() + static_cast<int64_t>((*idx)[i]) * C;
            for (int64_t c = 0; c < C; ++c) dst[c] += src[c];
        }
    });
}

Tape::Ref Tape::concat_cols(Ref a, Ref b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require(A.rank() == 2 && B.rank() == 2 && A.shape[0] == B.shape[0],
            "concat_cols: shape mismatch " + shape_str(A.shape) + " vs " + shape_str(B.shape));
    const int64_t R = A.shape[0], C1 = A.shape[1], C2 = B.shape[1];
    Tensor Y = Tensor::zeros({R, C1 + C2});
    for (int64_t r = 0; r < R; ++r) {
        std::memcpy(Y.data.data() + r * (C1 + C2), A.data.data() + r * C1,
                    static_cast<size_t>(C1) * sizeof(float));
        std::memcpy(Y.data.data() + r * (C1 + C2) + C1, B.data.data() + r * C2,
                    static_cast<size_t>(C2) * sizeof(float));
    }
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {a, b}, [a, b, out, R, C1, C2](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        const bool wa = t.nodes_[static_cast<size_t>(a)].requires_grad;
        const bool wb = t.nodes_[static_cast<size_t>(b)].requires_grad;
        for (int64_t r = 0; r < R; ++r) {
            const float* dy = dY.data() + r * (C1 + C2);
            if (wa) {
                float* da = t.grad_of(a).data() + r * C1;
                for (int64_t c = 0; c < C1; ++c) da[c] += dy[c];
            }
            if (wb) {
                float* db = t.grad_of(b).data() + r * C2;
                for (int64_t c = 0; c < C2; ++c) db[c] += dy[C1 + c];
            }
        }
    });
}

// ---------------------------------------------------------------- pooling

Tape::Ref Tape::max_pool_time(Ref h, const std::vector<uint8_t>& mask, int64_t batch,
                              int64_t seq_len) {
    const Tensor& H = val(h);
    require(H.rank() == 2 && H.shape[0] == batch * seq_len,
            "max_pool_time: input shape " + shape_str(H.shape) + " does not match batch " +
                std::to_string(batch) + " x seq " + std::to_string(seq_len));
    require(mask.size() == static_cast<size_t>(batch * seq_len), "max_pool_time: mask size mismatch");
    const int64_t D = H.shape[1];
    Tensor Y = Tensor::zeros({batch, D});
    auto argmax = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(batch * D));
    for (int64_t b = 0; b < batch; ++b) {
        bool any = false;
        for (int64_t t = 0; t < seq_len; ++t) {
            if (!mask[static_cast<size_t>(b * seq_len + t)]) continue;
            const float* row = H.data.data() + (b * seq_len + t) * D;
            if (!any) {
                for (int64_t c = 0; c < D; ++c) {
                    Y.data[static_cast<size_t>(b * D + c)] = row[c];
                    (*argmax)[static_cast<size_t>(b * D + c)] =
                        static_cast<int32_t>(b * seq_len + t);
                }
                any = true;
            } else {
                for (int64_t c = 0; c < D; ++c) {
                    if (row[c] > Y.data[static_cast<size_t>(b * D + c)]) {
                        Y.data[static_cast<size_t>(b * D + c)] = row[c];
                        (*argmax)[static_cast<size_t>(b * D + c)] =
                            static_cast<int32_t>(b * seq_len + t);
                    }
                }
            }
        }
        require(any, "max_pool_time: sequence " + std::to_string(b) + " has an all-pad mask");
    }
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {h}, [h, out, argmax, batch, seq_len](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        std::vector<float>& dH = t.grad_of(h);
        const int64_t D = t.val(out).shape[1];
        for (int64_t b = 0; b < batch; ++b) {
            for (int64_t c = 0; c < D; ++c) {
                const int64_t row = (*argmax)[static_cast<size_t>(b * D + c)];
                dH[static_cast<size_t>(row * D + c)] += dY[static_cast<size_t>(b * D + c)];
            }
        }
        (void)seq_len;
    });
}

Tape::Ref Tape::mean_pool_time(Ref h, const std::vector<uint8_t>& mask, int64_t batch,
                               int64_t seq_len) {
    const Tensor& H = val(h);
    require(H.rank() == 2 && H.shape[0] == batch * seq_len,
            "mean_pool_time: input shape " + shape_str(H.shape) + " does not match batch " +
                std::to_string(batch) + " x seq " + std::to_string(seq_len));
    require(mask.size() == static_cast<size_t>(batch * seq_len),
            "mean_pool_time: mask size mismatch");
    const int64_t D = H.shape[1];
    Tensor Y = Tensor::zeros({batch, D});
    auto counts = std::make_shared<std::vector<float>>(static_cast<size_t>(batch), 0.0f);
    for (int64_t b = 0; b < batch; ++b) {
        float n = 0.0f;
        for (int64_t t = 0; t < seq_len; ++t) {
            if (!mask[static_cast<size_t>(b * seq_len + t)]) continue;
            n += 1.0f;
            const float* row = H.data.data() + (b * seq_len + t) * D;
            for (int64_t c = 0; c < D; ++c) Y.data[static_cast<size_t>(b * D + c)] += row[c];
        }
        require(n > 0.0f, "mean_pool_time: sequence " + std::to_string(b) + " has an all-pad mask");
        (*counts)[static_cast<size_t>(b)] = n;
        for (int64_t c = 0; c < D; ++c) Y.data[static_cast<size_t>(b * D + c)] /= n;
    }
    auto mk = std::make_shared<std::vector<uint8_t>>(mask);
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(Y), {h}, [h, out, counts, mk, batch, seq_len](Tape& t) {
        const std::vector<float>& dY = t.grad_of(out);
        std::vector<float>& dH = t.grad_of(h);
        const int64_t D = t.val(out).shape[1];
        for (int64_t b = 0; b < batch; ++b) {
            const float inv = 1.0f / (*counts)[static_cast<size_t>(b)];
            for (int64_t s = 0; s < seq_len; ++s) {
                if (!(*mk)[static_cast<size_t>(b * seq_len + s)]) continue;
                float* d = dH.data() + (b * seq_len + s) * D;
                const float* dy = dY.data() + b * D;
                for (int64_t c = 0; c < D; ++c) d[c] += dy[c] * inv;
            }
        }
    });
}

// ---------------------------------------------------------------- cross entropy

Tape::Ref Tape::cross_entropy(Ref logits, const std::vector<int32_t>& targets,
                              const std::vector<float>& weights) {
    const Tensor& X = val(logits);
    require(X.rank() == 2, "cross_entropy: logits must be 2-D");
    const int64_t R = X.shape[0], V = X.shape[1];
    require(static_cast<int64_t>(targets.size()) == R && targets.size() == weights.size(),
            "cross_entropy: row count " + std::to_string(R) + " vs targets " +
                std::to_string(targets.size()) + " / weights " + std::to_string(weights.size()));
    double wsum = 0.0;
    for (float w : weights) wsum += w;
    if (wsum <= 0.0) {
        return constant(Tensor::scalar(0.0f));
    }
    double loss = 0.0;
    for (int64_t r = 0; r < R; ++r) {
        if (weights[static_cast<size_t>(r)] == 0.0f) continue;
        const int32_t tgt = targets[static_cast<size_t>(r)];
        require(tgt >= 0 && tgt < V, "cross_entropy: target out of range");
        const float* row = X.data.data() + r * V;
        float mx = row[0];
        for (int64_t c = 1; c < V; ++c) mx = std::max(mx, row[c]);
        double se = 0.0;
        for (int64_t c = 0; c < V; ++c) se += std::exp(static_cast<double>(row[c] - mx));
        const double lse = std::log(se) + mx;
        loss += weights[static_cast<size_t>(r)] * (lse - row[tgt]);
    }
    loss /= wsum;
    auto tgt = std::make_shared<std::vector<int32_t>>(targets);
    auto wts = std::make_shared<std::vector<float>>(weights);
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(Tensor::scalar(static_cast<float>(loss)), {logits},
                [logits, out, tgt, wts, R, V, wsum](Tape& t) {
        const float gscale = t.grad_of(out)[0];
        const std::vector<float>& xv = t.val(logits).data;
        std::vector<float>& dx = t.grad_of(logits);
        std::vector<float> prob(static_cast<size_t>(V));
        for (int64_t r = 0; r < R; ++r) {
            const float w = (*wts)[static_cast<size_t>(r)];
            if (w == 0.0f) continue;
            const float* row = xv.data() + r * V;
            float mx = row[0];
            for (int64_t c = 1; c < V; ++c) mx = std::max(mx, row[c]);
            double se = 0.0;
            for (int64_t c = 0; c < V; ++c) {
                prob[static_cast<size_t>(c)] = std::exp(row[c] - mx);
                se += prob[static_cast<size_t>(c)];
            }
            const float inv = static_cast<float>(1.0 / se);
            const float scale = gscale * w / static_cast<float>(wsum);
            float* d = dx.data() + r * V;
            for (int64_t c = 0; c < V; ++c) d[c] += scale * prob[static_cast<size_t>(c)] * inv;
            d[(*tgt)[static_cast<size_t>(r)]] -= scale;
        }
    });
}

// ---------------------------------------------------------------- attention

Tape::Ref Tape::attention(Ref q, Ref k, Ref v, const std::vector<uint8_t>& key_mask,
                          int64_t batch, int64_t seq_len, int64_t n_heads) {
    const Tensor& Q = val(q);
    const Tensor& K = val(k);
    const Tensor& V = val(v);
    require(Q.shape == K.shape && K.shape == V.shape,
            "attention: Q/K/V shape mismatch " + shape_str(Q.shape) + " vs " +
                shape_str(K.shape) + " vs " + shape_str(V.shape));
    require(Q.rank() == 2 && Q.shape[0] == batch * seq_len,
            "attention: expected (batch*seq, dim) input, got " + shape_str(Q.shape));
    const int64_t D = Q.shape[1];
    require(D % n_heads == 0, "attention: model dim " + std::to_string(D) +
                                  " not divisible by heads " + std::to_string(n_heads));
    require(key_mask.size() == static_cast<size_t>(batch * seq_len),
            "attention: mask size mismatch");
    const int64_t hd = D / n_heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    Tensor O = Tensor::zeros({batch * seq_len, D});
    auto probs =
        std::make_shared<std::vector<float>>(static_cast<size_t>(batch * n_heads * seq_len * seq_len));
    auto mk = std::make_shared<std::vector<uint8_t>>(key_mask);

#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t h = 0; h < n_heads; ++h) {
            float* P = probs->data() + ((b * n_heads) + h) * seq_len * seq_len;
            const int64_t base = b * seq_len;
            const int64_t off = h * hd;
            for (int64_t i = 0; i < seq_len; ++i) {
                const float* qi = Q.data.data() + (base + i) * D + off;
                float* Pi = P + i * seq_len;
                for (int64_t j = 0; j < seq_len; ++j) {
                    const float* kj = K.data.data() + (base + j) * D + off;
                    float s = 0.0f;
                    for (int64_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
                    s *= scale;
                    if (!(*mk)[static_cast<size_t>(base + j)]) s += kMaskPenalty;
                    Pi[j] = s;
                }
            }
            softmax_rows(P, seq_len, seq_len);
            for (int64_t i = 0; i < seq_len; ++i) {
                float* oi = O.data.data() + (base + i) * D + off;
                const float* Pi = P + i * seq_len;
                for (int64_t j = 0; j < seq_len; ++j) {
                    const float pij = Pi[j];
                    if (pij == 0.0f) continue;
                    const float* vj = V.data.data() + (base + j) * D + off;
                    for (int64_t c = 0; c < hd; ++c) oi[c] += pij * vj[c];
                }
            }
        }
    }

    const Ref out = static_cast<Ref>(nodes_.size());
    return push(std::move(O), {q, k, v},
                [q, k, v, out, probs, mk, batch, seq_len, n_heads, hd, scale](Tape& t) {
        const int64_t D = n_heads * hd;
        const std::vector<float>& dO = t.grad_of(out);
        const std::vector<float>& Qv = t.val(q).data;
        const std::vector<float>& Kv = t.val(k).data;
        const std::vector<float>& Vv = t.val(v).data;
        std::vector<float>& dQ = t.grad_of(q);
        std::vector<float>& dK = t.grad_of(k);
        std::vector<float>& dV = t.grad_of(v);
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t b = 0; b < batch; ++b) {
            for (int64_t h = 0; h < n_heads; ++h) {
                const float* P = probs->data() + ((b * n_heads) + h) * seq_len * seq_len;
                const int64_t base = b * seq_len;
                const int64_t off = h * hd;
                std::vector<float> dS(static_cast<size_t>(seq_len));
                for (int64_t i = 0; i < seq_len; ++i) {
                    const float* doi = dO.data() + (base + i) * D + off;
                    const float* Pi = P + i * seq_len;
                    // dP_ij = dO_i . V_j ; dS = softmax backward ; then Q/K grads
                    float dot = 0.0f;
                    for (int64_t j = 0; j < seq_len; ++j) {
                        if (Pi[j] == 0.0f) {
                            dS[static_cast<size_t>(j)] = 0.0f;
                            continue;
                        }
                        const float* vj = Vv.data() + (base + j) * D + off;
                        float dp = 0.0f;
                        for (int64_t c = 0; c < hd; ++c) dp += doi[c] * vj[c];
                        dS[static_cast<size_t>(j)] = dp;
                        dot += dp * Pi[j];
                    }
                    for (int64_t j = 0; j < seq_len; ++j) {
                        const float pij = Pi[j];
                        if (pij == 0.0f) continue;
                        const float ds = pij * (dS[static_cast<size_t>(j)] - dot) * scale;
                        const float* kj = Kv.data() + (base + j) * D + off;
                        const float* qi = Qv.data() + (base + i) * D + off;
                        float* dqi = dQ.data() + (base + i) * D + off;
                        float* dkj = dK.data() + (base + j) * D + off;
                        float* dvj = dV.data() + (base + j) * D + off;
                        const float* doi2 = doi;
                        for (int64_t c = 0; c < hd; ++c) {
                            dqi[c] += ds * kj[c];
                            dkj[c] += ds * qi[c];
                            dvj[c] += pij * doi2[c];
                        }
                    }
                }
            }
        }
    });
}

Tape::Ref Tape::sum_all(Ref x) {
    const Tensor& X = val(x);
    double s = 0.0;
    for (float v : X.data) s += v;
    const Ref out = static_cast<Ref>(nodes_.size());
    return push(Tensor::scalar(static_cast<float>(s)), {x}, [x, out](Tape& t) {
        const float g = t.grad_of(out)[0];
        std::vector<float>& dx = t.grad_of(x);
        for (float& d : dx) d += g;
    });
}

// ---------------------------------------------------------------- backward

void Tape::backward(Ref loss) {
    require(grad_enabled_, "backward: tape was created with gradients disabled");
    require(loss >= 0 && static_cast<size_t>(loss) < nodes_.size(), "backward: bad loss ref");
    require(val(loss).numel() == 1,
            "backward: loss must be a scalar, got shape " + shape_str(val(loss).shape));
    for (Node& n : nodes_) n.grad.clear();
    grad_of(loss)[0] = 1.0f;
    for (int64_t i = loss; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.back) n.back(*this);
    }
    for (Node& n : nodes_) {
        if (n.param && n.param->requires_grad && !n.grad.empty()) {
            for (size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
        }
    }
}

Tensor xavier_normal_init(const std::vector<int64_t>& shape, uint64_t seed) {
    require(shape.size() == 2, "xavier_normal_init: shape must be 2-D, got " + shape_str(shape));
    const double sigma = std::sqrt(2.0 / static_cast<double>(shape[0] + shape[1]));
    Tensor t = Tensor::zeros(shape);
    Rng rng(seed);
    for (float& v : t.data) v = static_cast<float>(rng.normal(0.0, sigma));
    return t;
}

}  // namespace dgadet::nn
