#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace evo {

// Dense row-major float tensor. Shapes used in practice:
//   {N,C,H,W}  activations
//   {out,in}   dense weights
//   {co,ci,kh,kw} conv kernels
//   {out}      biases
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0f);
    }
    Tensor(std::vector<int> s, std::vector<float> d)
        : shape(std::move(s)), data(std::move(d)) {}

    static std::int64_t numel_of(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    bool empty() const { return data.empty(); }

    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }

    float& operator[](std::size_t i) { return data[i]; }
    float operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace evo
