#include "nscope/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "nscope/kernels.hpp"

namespace nscope {

namespace {

[[noreturn]] void shape_fail(const char* prim, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(prim) + ": incompatible shapes " + shape_str(a.shape) +
                                " and " + shape_str(b.shape));
}

[[noreturn]] void shape_fail(const char* prim, const Tensor& a, const std::string& what) {
    throw std::invalid_argument(std::string(prim) + ": " + what + ", got shape " + shape_str(a.shape));
}

bool row_broadcast(const Tensor& a, const Tensor& b) {
    return a.rank() == 2 && b.rank() == 1 && b.shape[0] == a.shape[1];
}

float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace

int Tape::check(NodeId n) const {
    if (n < 0 || n >= static_cast<int>(nodes_.size()))
        throw std::out_of_range("tape: node id " + std::to_string(n) + " out of range");
    return n;
}

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::leaf(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(v);
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0]) shape_fail("matmul", ta, tb);
    Node n;
    n.op = Op::Matmul;
    n.inputs = {a, b};
    n.value = Tensor({ta.shape[0], tb.shape[1]});
    kernels::matmul(ta.data.data(), tb.data.data(), n.value.data.data(), ta.shape[0], ta.shape[1], tb.shape[1]);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    Node n;
    n.op = Op::Add;
    n.inputs = {a, b};
    n.value = ta;
    if (ta.same_shape(tb)) {
        for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += tb.data[i];
    } else if (row_broadcast(ta, tb)) {
        const int cols = ta.shape[1];
        for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += tb.data[i % cols];
    } else {
        shape_fail("add", ta, tb);
    }
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    Node n;
    n.op = Op::Mul;
    n.inputs = {a, b};
    n.value = ta;
    if (ta.same_shape(tb)) {
        for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= tb.data[i];
    } else if (row_broadcast(ta, tb)) {
        const int cols = ta.shape[1];
        for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= tb.data[i % cols];
    } else {
        shape_fail("mul", ta, tb);
    }
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, float c) {
    Node n;
    n.op = Op::Scale;
    n.inputs = {a};
    n.scale = c;
    n.value = value(a);
    for (auto& v : n.value.data) v *= c;
    return push(std::move(n));
}

NodeId Tape::silu(NodeId a) {
    Node n;
    n.op = Op::Silu;
    n.inputs = {a};
    n.value = value(a);
    for (auto& v : n.value.data) v = v * sigmoidf(v);
    return push(std::move(n));
}

NodeId Tape::softmax_rows(NodeId a) {
    const Tensor& ta = value(a);
    if (ta.rank() != 2) shape_fail("softmax_rows", ta, "expected rank 2");
    Node n;
    n.op = Op::SoftmaxRows;
    n.inputs = {a};
    n.value = Tensor(ta.shape);
    kernels::softmax_rows(ta.data.data(), n.value.data.data(), ta.shape[0], ta.shape[1]);
    return push(std::move(n));
}

NodeId Tape::log_softmax_rows(NodeId a) {
    const Tensor& ta = value(a);
    if (ta.rank() != 2) shape_fail("log_softmax_rows", ta, "expected rank 2");
    Node n;
    n.op = Op::LogSoftmaxRows;
    n.inputs = {a};
    n.value = Tensor(ta.shape);
    const int rows = ta.shape[0], cols = ta.shape[1];
    for (int i = 0; i < rows; ++i) {
        const float* xi = ta.data.data() + static_cast<size_t>(i) * cols;
        float* yi = n.value.data.data() + static_cast<size_t>(i) * cols;
        float mx = xi[0];
        for (int j = 1; j < cols; ++j) mx = xi[j] > mx ? xi[j] : mx;
        float sum = 0.0f;
        for (int j = 0; j < cols; ++j) sum += std::exp(xi[j] - mx);
        const float lse = mx + std::log(sum);
        for (int j = 0; j < cols; ++j) yi[j] = xi[j] - lse;
    }
    return push(std::move(n));
}

NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, float eps) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gain);
    const Tensor& tb = value(bias);
    if (tx.rank() != 2) shape_fail("layer_norm", tx, "expected rank-2 input");
    if (!row_broadcast(tx, tg) || !row_broadcast(tx, tb)) shape_fail("layer_norm", tg, tb);
    Node n;
    n.op = Op::LayerNorm;
    n.inputs = {x, gain, bias};
    n.eps = eps;
    n.value = Tensor(tx.shape);
    kernels::layer_norm_rows(tx.data.data(), tg.data.data(), tb.data.data(), n.value.data.data(),
                             tx.shape[0], tx.shape[1], eps);
    return push(std::move(n));
}

NodeId Tape::embedding(NodeId table, const std::vector<int>& ids) {
    const Tensor& tt = value(table);
    if (tt.rank() != 2) shape_fail("embedding", tt, "expected rank-2 table");
    for (int id : ids)
        if (id < 0 || id >= tt.shape[0])
            throw std::invalid_argument("embedding: id " + std::to_string(id) + " out of table rows " +
                                        std::to_string(tt.shape[0]));
    Node n;
    n.op = Op::Embedding;
    n.inputs = {table};
    n.ids = ids;
    const int d = tt.shape[1];
    n.value = Tensor({static_cast<int>(ids.size()), d});
    for (size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < d; ++j) n.value.data[i * d + j] = tt.data[static_cast<size_t>(ids[i]) * d + j];
    return push(std::move(n));
}

NodeId Tape::transpose2d(NodeId a) {
    const Tensor& ta = value(a);
    if (ta.rank() != 2) shape_fail("transpose2d", ta, "expected rank 2");
    Node n;
    n.op = Op::Transpose2d;
    n.inputs = {a};
    const int r = ta.shape[0], c = ta.shape[1];
    n.value = Tensor({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) n.value.data[static_cast<size_t>(j) * r + i] = ta.data[static_cast<size_t>(i) * c + j];
    return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, std::vector<int> new_shape) {
    const Tensor& ta = value(a);
    if (shape_numel(new_shape) != ta.numel())
        throw std::invalid_argument("reshape: element count mismatch, " + shape_str(ta.shape) + " to " +
                                    shape_str(new_shape));
    Node n;
    n.op = Op::Reshape;
    n.inputs = {a};
    n.reshape_from = ta.shape;
    n.value = ta;
    n.value.shape = std::move(new_shape);
    return push(std::move(n));
}

NodeId Tape::slice_cols(NodeId a, int c0, int c1) {
    const Tensor& ta = value(a);
    if (ta.rank() != 2 || c0 < 0 || c1 > ta.shape[1] || c0 >= c1)
        shape_fail("slice_cols", ta, "invalid column range [" + std::to_string(c0) + "," + std::to_string(c1) + ")");
    Node n;
    n.op = Op::SliceCols;
    n.inputs = {a};
    n.c0 = c0;
    n.c1 = c1;
    const int r = ta.shape[0], c = ta.shape[1], w = c1 - c0;
    n.value = Tensor({r, w});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) n.value.data[static_cast<size_t>(i) * w + j] = ta.data[static_cast<size_t>(i) * c + c0 + j];
    return push(std::move(n));
}

NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    int rows = value(parts[0]).rows();
    int total = 0;
    for (NodeId p : parts) {
        const Tensor& t = value(p);
        if (t.rank() != 2 || t.shape[0] != rows) shape_fail("concat_cols", t, "row count mismatch");
        total += t.shape[1];
    }
    Node n;
    n.op = Op::ConcatCols;
    n.inputs = parts;
    n.value = Tensor({rows, total});
    int off = 0;
    for (NodeId p : parts) {
        const Tensor& t = value(p);
        const int w = t.shape[1];
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < w; ++j)
                n.value.data[static_cast<size_t>(i) * total + off + j] = t.data[static_cast<size_t>(i) * w + j];
        off += w;
    }
    return push(std::move(n));
}

NodeId Tape::sum_all(NodeId a) {
    Node n;
    n.op = Op::SumAll;
    n.inputs = {a};
    float s = 0.0f;
    for (float v : value(a).data) s += v;
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

NodeId Tape::pick_nll(NodeId logprobs, const std::vector<int>& ids, const std::vector<float>& weights) {
    const Tensor& lp = value(logprobs);
    if (lp.rank() != 2 || static_cast<int>(ids.size()) != lp.shape[0] || weights.size() != ids.size())
        shape_fail("pick_nll", lp, "ids/weights must match row count");
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] < 0 || ids[i] >= lp.shape[1])
            throw std::invalid_argument("pick_nll: target id out of range at row " + std::to_string(i));
    Node n;
    n.op = Op::PickNll;
    n.inputs = {logprobs};
    n.ids = ids;
    n.weights = weights;
    float s = 0.0f;
    const int cols = lp.shape[1];
    for (size_t i = 0; i < ids.size(); ++i) s -= weights[i] * lp.data[i * cols + ids[i]];
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

void Tape::mark_site(const std::string& id, NodeId n) {
    check(n);
    auto [it, fresh] = sites_.emplace(id, n);
    if (!fresh) throw std::invalid_argument("tape: site '" + id + "' already registered");
}

NodeId Tape::site(const std::string& id) const {
    auto it = sites_.find(id);
    if (it == sites_.end()) throw std::invalid_argument("tape: unknown site '" + id + "'");
    return it->second;
}

std::vector<Tensor> Tape::backward(NodeId loss) const {
    const Node& ln = nodes_[check(loss)];
    if (ln.value.numel() != 1)
        throw std::invalid_argument("backward: loss node must be scalar, got shape " + shape_str(ln.value.shape));

    std::vector<Tensor> grads(nodes_.size());
    grads[loss] = Tensor(ln.value.shape.empty() ? std::vector<int>{} : ln.value.shape);
    grads[loss].data[0] = 1.0f;

    auto accum = [&](NodeId target, const std::vector<int>& shape, auto&& fill) {
        if (grads[target].data.empty()) grads[target] = Tensor(shape);
        fill(grads[target]);
    };

    for (NodeId id = loss; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (grads[id].data.empty() || n.op == Op::Leaf) continue;
        const Tensor& g = grads[id];

        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Matmul: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const Tensor& b = nodes_[n.inputs[1]].value;
                const int m = a.shape[0], k = a.shape[1], nn = b.shape[1];
                accum(n.inputs[0], a.shape, [&](Tensor& da) {
                    Tensor tmp({m, k});
                    kernels::matmul_nt(g.data.data(), b.data.data(), tmp.data.data(), m, nn, k);
                    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += tmp.data[i];
                });
                accum(n.inputs[1], b.shape, [&](Tensor& db) {
                    Tensor tmp({k, nn});
                    kernels::matmul_tn(a.data.data(), g.data.data(), tmp.data.data(), k, m, nn);
                    for (size_t i = 0; i < db.data.size(); ++i) db.data[i] += tmp.data[i];
                });
                break;
            }
            case Op::Add: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const Tensor& b = nodes_[n.inputs[1]].value;
                accum(n.inputs[0], a.shape, [&](Tensor& da) {
                    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += g.data[i];
                });
                if (a.same_shape(b)) {
                    accum(n.inputs[1], b.shape, [&](Tensor& db) {
                        for (size_t i = 0; i < db.data.size(); ++i) db.data[i] += g.data[i];
                    });
                } else {
                    const int cols = a.shape[1];
                    accum(n.inputs[1], b.shape, [&](Tensor& db) {
                        for (size_t i = 0; i < g.data.size(); ++i) db.data[i % cols] += g.data[i];
                    });
                }
                break;
            }
            case Op::Mul: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const Tensor& b = nodes_[n.inputs[1]].value;
                if (a.same_shape(b)) {
                    accum(n.inputs[0], a.shape, [&](Tensor& da) {
                        for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += g.data[i] * b.data[i];
                    });
                    accum(n.inputs[1], b.shape, [&](Tensor& db) {
                        for (size_t i = 0; i < db.data.size(); ++i) db.data[i] += g.data[i] * a.data[i];
                    });
                } else {
                    const int cols = a.shape[1];
                    accum(n.inputs[0], a.shape, [&](Tensor& da) {
                        for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += g.data[i] * b.data[i % cols];
                    });
                    accum(n.inputs[1], b.shape, [&](Tensor& db) {
                        for (size_t i = 0; i < g.data.size(); ++i) db.data[i % cols] += g.data[i] * a.data[i];
                    });
                }
                break;
            }
            case Op::Scale: {
                accum(n.inputs[0], nodes_[n.inputs[0]].value.shape, [&](Tensor& da) {
                    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += g.data[i] * n.scale;
                });
                break;
            }
            case Op::Silu: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                accum(n.inputs[0], x.shape, [&](Tensor& da) {
                    for (size_t i = 0; i < da.data.size(); ++i) {
                        const float s = sigmoidf(x.data[i]);
                        da.data[i] += g.data[i] * s * (1.0f + x.data[i] * (1.0f - s));
                    }
                });
                break;
            }
            case Op::SoftmaxRows: {
                const Tensor& y = n.value;
                const int rows = y.shape[0], cols = y.shape[1];
                accum(n.inputs[0], y.shape, [&](Tensor& da) {
                    for (int i = 0; i < rows; ++i) {
                        const float* yi = y.data.data() + static_cast<size_t>(i) * cols;
                        const float* gi = g.data.data() + static_cast<size_t>(i) * cols;
                        float dot = 0.0f;
                        for (int j = 0; j < cols; ++j) dot += gi[j] * yi[j];
                        float* di = da.data.data() + static_cast<size_t>(i) * cols;
                        for (int j = 0; j < cols; ++j) di[j] += yi[j] * (gi[j] - dot);
                    }
                });
                break;
            }
            case Op::LogSoftmaxRows: {
                const Tensor& y = n.value;  // log p
                const int rows = y.shape[0], cols = y.shape[1];
                accum(n.inputs[0], y.shape, [&](Tensor& da) {
                    for (int i = 0; i < rows; ++i) {
                        const float* yi = y.data.data() + static_cast<size_t>(i) * cols;
                        const float* gi = g.data.data() + static_cast<size_t>(i) * cols;
                        float gsum = 0.0f;
                        for (int j = 0; j < cols; ++j) gsum += gi[j];
                        float* di = da.data.data() + static_cast<size_t>(i) * cols;
                        for (int j = 0; j < cols; ++j) di[j] += gi[j] - std::exp(yi[j]) * gsum;
                    }
                });
                break;
            }
            case Op::LayerNorm: {
                const Tensor& x = nodes_[n.inputs[0]].value;
                const Tensor& gain = nodes_[n.inputs[1]].value;
                const int rows = x.shape[0], cols = x.shape[1];
                const float invc = 1.0f / static_cast<float>(cols);
                accum(n.inputs[0], x.shape, [&](Tensor& dx) {
                    for (int i = 0; i < rows; ++i) {
                        const float* xi = x.data.data() + static_cast<size_t>(i) * cols;
                        const float* gi = g.data.data() + static_cast<size_t>(i) * cols;
                        float mean = 0.0f;
                        for (int j = 0; j < cols; ++j) mean += xi[j];
                        mean *= invc;
                        float var = 0.0f;
                        for (int j = 0; j < cols; ++j) var += (xi[j] - mean) * (xi[j] - mean);
                        var *= invc;
                        const float inv = 1.0f / std::sqrt(var + n.eps);
                        // dxhat_j = g_j * gain_j;   xhat_j = (x_j - mean) * inv
                        float sum_dxhat = 0.0f, sum_dxhat_xhat = 0.0f;
                        for (int j = 0; j < cols; ++j) {
                            const float dxh = gi[j] * gain.data[j];
                            const float xh = (xi[j] - mean) * inv;
                            sum_dxhat += dxh;
                            sum_dxhat_xhat += dxh * xh;
                        }
                        float* di = dx.data.data() + static_cast<size_t>(i) * cols;
                        for (int j = 0; j < cols; ++j) {
                            const float dxh = gi[j] * gain.data[j];
                            const float xh = (xi[j] - mean) * inv;
                            di[j] += inv * (dxh - invc * sum_dxhat - xh * invc * sum_dxhat_xhat);
                        }
                    }
                });
                accum(n.inputs[1], gain.shape, [&](Tensor& dg) {
                    for (int i = 0; i < rows; ++i) {
                        const float* xi = x.data.data() + static_cast<size_t>(i) * cols;
                        const float* gi = g.data.data() + static_cast<size_t>(i) * cols;
                        float mean = 0.0f;
                        for (int j = 0; j < cols; ++j) mean += xi[j];
                        mean *= invc;
                        float var = 0.0f;
                        for (int j = 0; j < cols; ++j) var += (xi[j] - mean) * (xi[j] - mean);
                        var *= invc;
                        const float inv = 1.0f / std::sqrt(var + n.eps);
                        for (int j = 0; j < cols; ++j) dg.data[j] += gi[j] * (xi[j] - mean) * inv;
                    }
                });
                accum(n.inputs[2], nodes_[n.inputs[2]].value.shape, [&](Tensor& db) {
                    const int c = cols;
                    for (size_t i = 0; i < g.data.size(); ++i) db.data[i % c] += g.data[i];
                });
                break;
            }
            case Op::Embedding: {
                const Tensor& table = nodes_[n.inputs[0]].value;
                const int d = table.shape[1];
                accum(n.inputs[0], table.shape, [&](Tensor& dt) {
                    for (size_t i = 0; i < n.ids.size(); ++i)
                        for (int j = 0; j < d; ++j)
                            dt.data[static_cast<size_t>(n.ids[i]) * d + j] += g.data[i * d + j];
                });
                break;
            }
            case Op::Transpose2d: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const int r = a.shape[0], c = a.shape[1];
                accum(n.inputs[0], a.shape, [&](Tensor& da) {
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < c; ++j)
                            da.data[static_cast<size_t>(i) * c + j] += g.data[static_cast<size_t>(j) * r + i];
                });
                break;
            }
            case Op::Reshape: {
                accum(n.inputs[0], n.reshape_from, [&](Tensor& da) {
                    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += g.data[i];
                });
                break;
            }
            case Op::SliceCols: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const int c = a.shape[1], w = n.c1 - n.c0;
                accum(n.inputs[0], a.shape, [&](Tensor& da) {
                    for (int i = 0; i < a.shape[0]; ++i)
                        for (int j = 0; j < w; ++j)
                            da.data[static_cast<size_t>(i) * c + n.c0 + j] += g.data[static_cast<size_t>(i) * w + j];
                });
                break;
            }
            case Op::ConcatCols: {
                const int total = n.value.shape[1];
                const int rows = n.value.shape[0];
                int off = 0;
                for (NodeId p : n.inputs) {
                    const Tensor& t = nodes_[p].value;
                    const int w = t.shape[1];
                    const int o = off;
                    accum(p, t.shape, [&](Tensor& dp) {
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < w; ++j)
                                dp.data[static_cast<size_t>(i) * w + j] += g.data[static_cast<size_t>(i) * total + o + j];
                    });
                    off += w;
                }
                break;
            }
            case Op::SumAll: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const float gv = g.data[0];
                accum(n.inputs[0], a.shape, [&](Tensor& da) {
                    for (auto& v : da.data) v += gv;
                });
                break;
            }
            case Op::PickNll: {
                const Tensor& lp = nodes_[n.inputs[0]].value;
                const int cols = lp.shape[1];
                const float gv = g.data[0];
                accum(n.inputs[0], lp.shape, [&](Tensor& da) {
                    for (size_t i = 0; i < n.ids.size(); ++i)
                        da.data[i * cols + n.ids[i]] -= gv * n.weights[i];
                });
                break;
            }
        }
    }
    return grads;
}

std::map<std::string, Tensor> Tape::grad_wrt(NodeId loss, const std::vector<std::string>& site_ids) const {
    std::vector<NodeId> targets;
    targets.reserve(site_ids.size());
    for (const auto& id : site_ids) targets.push_back(site(id));
    std::vector<Tensor> grads = backward(loss);
    std::map<std::string, Tensor> out;
    for (size_t i = 0; i < site_ids.size(); ++i) {
        NodeId t = targets[i];
        if (grads[t].data.empty()) grads[t] = Tensor(nodes_[t].value.shape);  // not on a path to the loss
        out[site_ids[i]] = std::move(grads[t]);
    }
    return out;
}

ForwardRecord record_forward(const ComputationFn& program, const std::vector<Tensor>& inputs,
                             const std::vector<std::string>& capture) {
    ForwardRecord rec;
    std::vector<NodeId> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.push_back(rec.tape.leaf(t));
    rec.output_nodes = program(rec.tape, leaves);
    for (const auto& id : capture)
        if (!rec.tape.has_site(id))
            throw std::invalid_argument("record_forward: captured site '" + id + "' was never marked");
    rec.outputs.reserve(rec.output_nodes.size());
    for (NodeId n : rec.output_nodes) rec.outputs.push_back(rec.tape.value(n));
    return rec;
}

}  // namespace nscope
