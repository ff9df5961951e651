#include "dgadet/nn/tensor.hpp"

#include <cmath>
#include <sstream>

#include "dgadet/errors.hpp"

namespace dgadet::nn {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
    Tensor t;
    t.shape = std::move(shape);
    const auto n = static_cast<size_t>(shape_numel(t.shape));
    t.data.assign(n, 0.0f);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
    Tensor t = zeros(std::move(shape));
    for (float& x : t.data) x = value;
    return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<float> values) {
    require(shape_numel(shape) == static_cast<int64_t>(values.size()),
            "Tensor::from: shape " + shape_str(shape) + " does not match value count " +
                std::to_string(values.size()));
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
}

Tensor Tensor::scalar(float value) { return from({1}, {value}); }

void Tensor::set_requires_grad(bool on) {
    requires_grad = on;
    if (on) {
        grad.assign(data.size(), 0.0f);
    } else {
        grad.clear();
        grad.shrink_to_fit();
    }
}

void Tensor::zero_grad() {
    if (requires_grad) grad.assign(data.size(), 0.0f);
}

bool all_finite(const float* p, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(p[i])) return false;
    }
    return true;
}

}  // namespace dgadet::nn
