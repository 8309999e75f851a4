#include "nscope/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nscope {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got " + shape_str(shape));
        n *= e;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
}

Tensor Tensor::full(std::vector<int> s, float v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
}

Tensor Tensor::scalar(float v) {
    Tensor t;
    t.data.assign(1, v);
    return t;
}

int Tensor::rows() const {
    if (shape.size() != 2) throw std::logic_error("rows(): tensor is not rank 2, shape " + shape_str(shape));
    return shape[0];
}

int Tensor::cols() const {
    if (shape.size() != 2) throw std::logic_error("cols(): tensor is not rank 2, shape " + shape_str(shape));
    return shape[1];
}

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace nscope
