#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dgadet/nn/tensor.hpp"
#include "dgadet/rng.hpp"

namespace dgadet::nn {

// Reverse-mode autodiff over an append-only tape. Forward ops push nodes in
// topological order; backward walks the tape in reverse. Leaves alias
// long-lived parameter Tensors; backward accumulates into Tensor::grad, so
// calling backward twice doubles the stored gradients.
class Tape {
public:
    using Ref = int32_t;

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }
    size_t size() const { return nodes_.size(); }

    Ref leaf(Tensor& param);
    Ref constant(Tensor value);

    // ---- forward ops ----
    Ref matmul(Ref a, Ref b);
    Ref add(Ref a, Ref b);                    // same shape (scalars included)
    Ref mul(Ref a, Ref b);                    // hadamard, same shape
    Ref add_bias(Ref x, Ref bias);            // [R,C] + [C]
    Ref relu(Ref x);
    Ref gelu(Ref x);
    Ref dropout(Ref x, float p, bool train, Rng& rng);
    Ref layer_norm(Ref x, Ref gamma, Ref beta, float eps = 1e-5f);
    Ref softmax(Ref x, int axis = -1);        // last axis only
    Ref embedding_lookup(Ref table, const std::vector<int32_t>& ids);
    Ref gather_rows(Ref x, std::vector<int32_t> rows);
    Ref concat_cols(Ref a, Ref b);            // [R,C1] ++ [R,C2]
    Ref max_pool_time(Ref h, const std::vector<uint8_t>& mask, int64_t batch, int64_t seq_len);
    Ref mean_pool_time(Ref h, const std::vector<uint8_t>& mask, int64_t batch, int64_t seq_len);
    Ref cross_entropy(Ref logits, const std::vector<int32_t>& targets,
                      const std::vector<float>& weights);
    Ref attention(Ref q, Ref k, Ref v, const std::vector<uint8_t>& key_mask, int64_t batch,
                  int64_t seq_len, int64_t n_heads);
    Ref sum_all(Ref x);

    void backward(Ref loss);

    const Tensor& val(Ref r) const;
    // Gradient buffer of a node after backward(); empty if the node did not
    // participate. Exposed for tests.
    const std::vector<float>& node_grad(Ref r) const { return nodes_[static_cast<size_t>(r)].grad; }

private:
    struct Node {
        Tensor value;              // owned output (unused for leaves)
        Tensor* param = nullptr;   // set for leaves
        std::vector<float> grad;
        std::vector<Ref> parents;
        std::function<void(Tape&)> back;
        bool requires_grad = false;
    };

    Ref push(Tensor value, std::vector<Ref> parents, std::function<void(Tape&)> back);
    bool wants_grad(const std::vector<Ref>& parents) const;
    std::vector<float>& grad_of(Ref r);
    void accumulate(Ref r, const float* g, size_t n);

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;

    friend struct TapeTestAccess;
};

// Xavier-normal initialization: N(0, 2/(fan_in+fan_out)) over a 2-D shape.
Tensor xavier_normal_init(const std::vector<int64_t>& shape, uint64_t seed);

}  // namespace dgadet::nn
