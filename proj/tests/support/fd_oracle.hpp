#pragma once

// Test-only oracle: re-evaluates a recorded tape in double precision with one
// leaf element perturbed, yielding central finite differences that share no
// numeric code with the float32 forward/backward implementation under test.

#include <cmath>
#include <vector>

#include "nscope/tape.hpp"

namespace nscope::testing {

inline std::vector<std::vector<double>> eval_tape_double(const Tape& tape, NodeId out, NodeId leaf,
                                                         int elem, double delta) {
    std::vector<std::vector<double>> vals(static_cast<size_t>(out) + 1);
    for (NodeId id = 0; id <= out; ++id) {
        const Node& n = tape.node(id);
        auto& v = vals[id];
        switch (n.op) {
            case Op::Leaf: {
                v.assign(n.value.data.begin(), n.value.data.end());
                if (id == leaf) v[elem] += delta;
                break;
            }
            case Op::Matmul: {
                const auto& a = vals[n.inputs[0]];
                const auto& b = vals[n.inputs[1]];
                const auto& sa = tape.node(n.inputs[0]).value.shape;
                const auto& sb = tape.node(n.inputs[1]).value.shape;
                const int m = sa[0], k = sa[1], nn = sb[1];
                v.assign(static_cast<size_t>(m) * nn, 0.0);
                for (int i = 0; i < m; ++i)
                    for (int t = 0; t < k; ++t)
                        for (int j = 0; j < nn; ++j) v[i * nn + j] += a[i * k + t] * b[t * nn + j];
                break;
            }
            case Op::Add: {
                const auto& a = vals[n.inputs[0]];
                const auto& b = vals[n.inputs[1]];
                v = a;
                if (a.size() == b.size())
                    for (size_t i = 0; i < v.size(); ++i) v[i] += b[i];
                else
                    for (size_t i = 0; i < v.size(); ++i) v[i] += b[i % b.size()];
                break;
            }
            case Op::Mul: {
                const auto& a = vals[n.inputs[0]];
                const auto& b = vals[n.inputs[1]];
                v = a;
                if (a.size() == b.size())
                    for (size_t i = 0; i < v.size(); ++i) v[i] *= b[i];
                else
                    for (size_t i = 0; i < v.size(); ++i) v[i] *= b[i % b.size()];
                break;
            }
            case Op::Scale: {
                v = vals[n.inputs[0]];
                for (auto& x : v) x *= n.scale;
                break;
            }
            case Op::Silu: {
                v = vals[n.inputs[0]];
                for (auto& x : v) x = x / (1.0 + std::exp(-x));
                break;
            }
            case Op::SoftmaxRows: {
                const auto& a = vals[n.inputs[0]];
                const int rows = n.value.shape[0], cols = n.value.shape[1];
                v.resize(a.size());
                for (int i = 0; i < rows; ++i) {
                    double mx = a[i * cols];
                    for (int j = 1; j < cols; ++j) mx = std::max(mx, a[i * cols + j]);
                    double sum = 0;
                    for (int j = 0; j < cols; ++j) sum += (v[i * cols + j] = std::exp(a[i * cols + j] - mx));
                    for (int j = 0; j < cols; ++j) v[i * cols + j] /= sum;
                }
                break;
            }
            case Op::LogSoftmaxRows: {
                const auto& a = vals[n.inputs[0]];
                const int rows = n.value.shape[0], cols = n.value.shape[1];
                v.resize(a.size());
                for (int i = 0; i < rows; ++i) {
                    double mx = a[i * cols];
                    for (int j = 1; j < cols; ++j) mx = std::max(mx, a[i * cols + j]);
                    double sum = 0;
                    for (int j = 0; j < cols; ++j) sum += std::exp(a[i * cols + j] - mx);
                    const double lse = mx + std::log(sum);
                    for (int j = 0; j < cols; ++j) v[i * cols + j] = a[i * cols + j] - lse;
                }
                break;
            }
            case Op::LayerNorm: {
                const auto& a = vals[n.inputs[0]];
                const auto& g = vals[n.inputs[1]];
                const auto& b = vals[n.inputs[2]];
                const int rows = n.value.shape[0], cols = n.value.shape[1];
                v.resize(a.size());
                for (int i = 0; i < rows; ++i) {
                    double mean = 0;
                    for (int j = 0; j < cols; ++j) mean += a[i * cols + j];
                    mean /= cols;
                    double var = 0;
                    for (int j = 0; j < cols; ++j) var += (a[i * cols + j] - mean) * (a[i * cols + j] - mean);
                    var /= cols;
                    const double inv = 1.0 / std::sqrt(var + n.eps);
                    for (int j = 0; j < cols; ++j) v[i * cols + j] = (a[i * cols + j] - mean) * inv * g[j] + b[j];
                }
                break;
            }
            case Op::Embedding: {
                const auto& t = vals[n.inputs[0]];
                const int d = tape.node(n.inputs[0]).value.shape[1];
                v.resize(n.ids.size() * static_cast<size_t>(d));
                for (size_t i = 0; i < n.ids.size(); ++i)
                    for (int j = 0; j < d; ++j) v[i * d + j] = t[static_cast<size_t>(n.ids[i]) * d + j];
                break;
            }
            case Op::Transpose2d: {
                const auto& a = vals[n.inputs[0]];
                const auto& sa = tape.node(n.inputs[0]).value.shape;
                const int r = sa[0], c = sa[1];
                v.resize(a.size());
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) v[static_cast<size_t>(j) * r + i] = a[static_cast<size_t>(i) * c + j];
                break;
            }
            case Op::Reshape:
                v = vals[n.inputs[0]];
                break;
            case Op::SliceCols: {
                const auto& a = vals[n.inputs[0]];
                const auto& sa = tape.node(n.inputs[0]).value.shape;
                const int r = sa[0], c = sa[1], w = n.c1 - n.c0;
                v.resize(static_cast<size_t>(r) * w);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < w; ++j) v[static_cast<size_t>(i) * w + j] = a[static_cast<size_t>(i) * c + n.c0 + j];
                break;
            }
            case Op::ConcatCols: {
                const int rows = n.value.shape[0], total = n.value.shape[1];
                v.resize(static_cast<size_t>(rows) * total);
                int off = 0;
                for (NodeId p : n.inputs) {
                    const int w = tape.node(p).value.shape[1];
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < w; ++j) v[static_cast<size_t>(i) * total + off + j] = vals[p][static_cast<size_t>(i) * w + j];
                    off += w;
                }
                break;
            }
            case Op::SumAll: {
                double s = 0;
                for (double x : vals[n.inputs[0]]) s += x;
                v.assign(1, s);
                break;
            }
            case Op::PickNll: {
                const auto& a = vals[n.inputs[0]];
                const int cols = tape.node(n.inputs[0]).value.shape[1];
                double s = 0;
                for (size_t i = 0; i < n.ids.size(); ++i) s -= n.weights[i] * a[i * cols + n.ids[i]];
                v.assign(1, s);
                break;
            }
        }
    }
    return vals;
}

inline double eval_scalar_perturbed(const Tape& tape, NodeId out, NodeId leaf, int elem, double delta) {
    return eval_tape_double(tape, out, leaf, elem, delta)[out][0];
}

inline double central_difference(const Tape& tape, NodeId out, NodeId leaf, int elem, double h) {
    const double up = eval_scalar_perturbed(tape, out, leaf, elem, h);
    const double dn = eval_scalar_perturbed(tape, out, leaf, elem, -h);
    return (up - dn) / (2.0 * h);
}

// Relative error with a floor so near-zero coordinates compare absolutely.
inline double rel_err(double got, double ref, double floor = 0.1) {
    return std::abs(got - ref) / std::max({std::abs(got), std::abs(ref), floor});
}

}  // namespace nscope::testing
