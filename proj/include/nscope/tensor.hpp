#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nscope {

// Dense row-major float32 tensor. Rank 0 is a scalar holding one element.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, float v);
    static Tensor scalar(float v);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    // Rank-2 accessors.
    int rows() const;
    int cols() const;
    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace nscope
