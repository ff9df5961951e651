#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dgadet::nn {

// Dense row-major f32 tensor. grad is allocated only while requires_grad is
// set, matching the one-buffer-per-parameter layout the optimizer expects.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;
    bool requires_grad = false;
    std::vector<float> grad;

    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<int64_t> shape, float value);
    static Tensor from(std::vector<int64_t> shape, std::vector<float> values);
    static Tensor scalar(float value);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t dim(size_t i) const { return shape.at(i); }
    size_t rank() const { return shape.size(); }

    void set_requires_grad(bool on);
    void zero_grad();

    float& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    float at(int64_t i) const { return data[static_cast<size_t>(i)]; }
    float& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape.back() + c)]; }
    float at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * shape.back() + c)]; }
};

int64_t shape_numel(const std::vector<int64_t>& shape);
std::string shape_str(const std::vector<int64_t>& shape);
bool all_finite(const float* p, size_t n);

}  // namespace dgadet::nn
