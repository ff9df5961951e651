#include "dgadet/nn/adam.hpp"

#include <cmath>

#include "dgadet/errors.hpp"

namespace dgadet::nn {

void Adam::add_param(std::string name, Tensor* p, float lr) {
    require(p != nullptr && p->requires_grad,
            "Adam: parameter '" + name + "' must exist and require gradients");
    Slot s;
    s.name = std::move(name);
    s.p = p;
    s.lr = lr;
    s.m.assign(p->data.size(), 0.0f);
    s.v.assign(p->data.size(), 0.0f);
    slots_.push_back(std::move(s));
}

void Adam::add_params(const std::vector<std::pair<std::string, Tensor*>>& params, float lr) {
    for (const auto& [name, p] : params) add_param(name, p, lr);
}

void Adam::step() {
    require(!slots_.empty(), "Adam: optimizer has no parameters (state uninitialized)");
    ++t_;
    const float b1 = cfg_.beta1, b2 = cfg_.beta2;
    const float bc1 = 1.0f - std::pow(b1, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(b2, static_cast<float>(t_));
    for (Slot& s : slots_) {
        require(s.p->grad.size() == s.p->data.size(),
                "Adam: gradients for '" + s.name + "' are not populated");
        const float lr = s.lr;
        float* p = s.p->data.data();
        const float* g = s.p->grad.data();
        float* m = s.m.data();
        float* v = s.v.data();
        const size_t n = s.p->data.size();
        for (size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            const float mhat = m[i] / bc1;
            const float vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Slot& s : slots_) s.p->zero_grad();
}

std::vector<Adam::SlotView> Adam::slots() const {
    std::vector<SlotView> out;
    out.reserve(slots_.size());
    for (const Slot& s : slots_) out.push_back(SlotView{s.name, s.m, s.v});
    return out;
}

void Adam::restore_slot(const std::string& name, std::vector<float> m, std::vector<float> v) {
    for (Slot& s : slots_) {
        if (s.name != name) continue;
        require(m.size() == s.p->data.size() && v.size() == s.p->data.size(),
                "Adam: moment size mismatch for '" + name + "'");
        s.m = std::move(m);
        s.v = std::move(v);
        return;
    }
    throw InvariantError("Adam: unknown parameter '" + name + "' in restore");
}

}  // namespace dgadet::nn
