#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dgadet/nn/tensor.hpp"

namespace dgadet::nn {

struct AdamConfig {
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Bias-corrected Adam with per-group learning rates (e.g. head vs backbone).
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void add_param(std::string name, Tensor* p, float lr);
    void add_params(const std::vector<std::pair<std::string, Tensor*>>& params, float lr);

    void step();
    void zero_grad();

    int64_t step_count() const { return t_; }
    size_t param_count() const { return slots_.size(); }
    const AdamConfig& config() const { return cfg_; }

    // Moment serialization for resumable training.
    struct SlotView {
        const std::string& name;
        const std::vector<float>& m;
        const std::vector<float>& v;
    };
    std::vector<SlotView> slots() const;
    void restore_slot(const std::string& name, std::vector<float> m, std::vector<float> v);
    void set_step_count(int64_t t) { t_ = t; }

private:
    struct Slot {
        std::string name;
        Tensor* p;
        float lr;
        std::vector<float> m, v;
    };
    AdamConfig cfg_;
    std::vector<Slot> slots_;
    int64_t t_ = 0;
};

}  // namespace dgadet::nn
