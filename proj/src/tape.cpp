#include "g2dm/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace g2dm {

namespace {
constexpr double kLogClamp = 1e-12;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}
}  // namespace

void Tape::check_finite(const Tensor& t, VarId id) const {
    if (!t.all_finite()) {
        throw NumericError("non-finite value at engine node " + std::to_string(id));
    }
}

Tape::VarId Tape::push(Node n) {
    const VarId id = nodes_.size();
    check_finite(n.value, id);
    nodes_.push_back(std::move(n));
    return id;
}

Tape::VarId Tape::leaf(const Tensor& t, bool requires_grad) {
    Node n;
    n.op = Op::kLeaf;
    n.value = t;
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Tape::VarId Tape::matmul(VarId a, VarId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0]) {
        throw DimensionError("matmul shape mismatch " + A.shape_str() + " x " + B.shape_str());
    }
    const std::size_t n = A.shape[0], k = A.shape[1], m = B.shape[1];
    Node out;
    out.op = Op::kMatMul;
    out.in0 = a;
    out.in1 = b;
    out.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    out.value = Tensor({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A.values[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) {
                out.value.values[i * m + j] += av * B.values[p * m + j];
            }
        }
    }
    return push(std::move(out));
}

Tape::VarId Tape::add_row(VarId x, VarId bias) {
    const Tensor& X = nodes_[x].value;
    const Tensor& b = nodes_[bias].value;
    if (X.shape.size() != 2 || b.shape.size() != 1 || X.shape[1] != b.shape[0]) {
        throw DimensionError("add_row shape mismatch " + X.shape_str() + " + " + b.shape_str());
    }
    Node out;
    out.op = Op::kAddRow;
    out.in0 = x;
    out.in1 = bias;
    out.requires_grad = nodes_[x].requires_grad || nodes_[bias].requires_grad;
    out.value = X;
    const std::size_t m = b.shape[0];
    for (std::size_t i = 0; i < X.shape[0]; ++i)
        for (std::size_t j = 0; j < m; ++j) out.value.values[i * m + j] += b.values[j];
    return push(std::move(out));
}

Tape::VarId Tape::add(VarId a, VarId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (!A.same_shape(B)) throw DimensionError("add shape mismatch");
    Node out;
    out.op = Op::kAdd;
    out.in0 = a;
    out.in1 = b;
    out.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    out.value = A;
    for (std::size_t i = 0; i < B.size(); ++i) out.value.values[i] += B.values[i];
    return push(std::move(out));
}

Tape::VarId Tape::sub(VarId a, VarId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (!A.same_shape(B)) throw DimensionError("sub shape mismatch");
    Node out;
    out.op = Op::kSub;
    out.in0 = a;
    out.in1 = b;
    out.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    out.value = A;
    for (std::size_t i = 0; i < B.size(); ++i) out.value.values[i] -= B.values[i];
    return push(std::move(out));
}

Tape::VarId Tape::scale(VarId x, double c) {
    Node out;
    out.op = Op::kScale;
    out.in0 = x;
    out.c = c;
    out.requires_grad = nodes_[x].requires_grad;
    out.value = nodes_[x].value;
    for (double& v : out.value.values) v *= c;
    return push(std::move(out));
}

Tape::VarId Tape::add_const(VarId x, double c) {
    Node out;
    out.op = Op::kAddConst;
    out.in0 = x;
    out.c = c;
    out.requires_grad = nodes_[x].requires_grad;
    out.value = nodes_[x].value;
    for (double& v : out.value.values) v += c;
    return push(std::move(out));
}

Tape::VarId Tape::relu(VarId x) {
    Node out;
    out.op = Op::kRelu;
    out.in0 = x;
    out.requires_grad = nodes_[x].requires_grad;
    out.value = nodes_[x].value;
    for (double& v : out.value.values) v = std::max(v, 0.0);
    return push(std::move(out));
}

Tape::VarId Tape::square(VarId x) {
    Node out;
    out.op = Op::kSquare;
    out.in0 = x;
    out.requires_grad = nodes_[x].requires_grad;
    out.value = nodes_[x].value;
    for (double& v : out.value.values) v *= v;
    return push(std::move(out));
}

Tape::VarId Tape::log_(VarId x) {
    Node out;
    out.op = Op::kLog;
    out.in0 = x;
    out.requires_grad = nodes_[x].requires_grad;
    out.value = nodes_[x].value;
    for (double& v : out.value.values) v = std::log(std::max(v, kLogClamp));
    return push(std::move(out));
}

Tape::VarId Tape::mean_all(VarId x) {
    const Tensor& X = nodes_[x].value;
    if (X.size() == 0) throw DimensionError("mean of empty tensor");
    double s = 0.0;
    for (double v : X.values) s += v;
    Node out;
    out.op = Op::kMeanAll;
    out.in0 = x;
    out.requires_grad = nodes_[x].requires_grad;
    out.value = Tensor::scalar(s / static_cast<double>(X.size()));
    return push(std::move(out));
}

Tape::VarId Tape::max_all(VarId x) {
    const Tensor& X = nodes_[x].value;
    if (X.size() == 0) throw DimensionError("max of empty tensor");
    Node out;
    out.op = Op::kMaxAll;
    out.in0 = x;
    out.requires_grad = nodes_[x].requires_grad;
    out.value = Tensor::scalar(*std::max_element(X.values.begin(), X.values.end()));
    return push(std::move(out));
}

Tape::VarId Tape::softmax_cross_entropy(VarId logits, const Tensor& targets) {
    const Tensor& L = nodes_[logits].value;
    if (L.shape.size() != 2 || !L.same_shape(targets)) {
        throw DimensionError("softmax_cross_entropy shape mismatch");
    }
    const std::size_t n = L.shape[0], c = L.shape[1];
    Node out;
    out.op = Op::kSoftmaxXent;
    out.in0 = logits;
    out.requires_grad = nodes_[logits].requires_grad;
    out.aux = Tensor({2 * n, c});  // rows [0,n): softmax probs, rows [n,2n): targets
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = L.values[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, L.values[i * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(L.values[i * c + j] - mx);
        const double logz = std::log(z);
        for (std::size_t j = 0; j < c; ++j) {
            const double logp = L.values[i * c + j] - mx - logz;
            out.aux.values[i * c + j] = std::exp(logp);
            out.aux.values[(n + i) * c + j] = targets.values[i * c + j];
            total -= targets.values[i * c + j] * logp;
        }
    }
    out.value = Tensor::scalar(total / static_cast<double>(n));
    return push(std::move(out));
}

Tape::VarId Tape::bce_logits(VarId logits, const Tensor& labels) {
    const Tensor& L = nodes_[logits].value;
    const std::size_t n = L.size();
    if (labels.size() != n) throw DimensionError("bce_logits label count mismatch");
    Node out;
    out.op = Op::kBceLogits;
    out.in0 = logits;
    out.requires_grad = nodes_[logits].requires_grad;
    out.aux = Tensor({2 * n});  // [0,n): sigmoid, [n,2n): labels
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = L.values[i];
        const double y = labels.values[i];
        total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
        out.aux.values[i] = sigmoid(x);
        out.aux.values[n + i] = y;
    }
    out.value = Tensor::scalar(total / static_cast<double>(n));
    return push(std::move(out));
}

void Tape::backward(VarId out) {
    if (nodes_[out].value.size() != 1) throw DimensionError("backward requires a scalar output");
    for (Node& n : nodes_) {
        if (n.requires_grad) n.grad = Tensor::zeros(n.value.shape);
    }
    if (!nodes_[out].requires_grad) return;
    nodes_[out].grad.values[0] = 1.0;

    for (VarId id = out + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad) continue;
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::kLeaf:
                break;
            case Op::kMatMul: {
                Node& a = nodes_[n.in0];
                Node& b = nodes_[n.in1];
                const std::size_t nr = a.value.shape[0], k = a.value.shape[1],
                                  m = b.value.shape[1];
                if (a.requires_grad) {
                    for (std::size_t i = 0; i < nr; ++i)
                        for (std::size_t j = 0; j < m; ++j) {
                            const double gv = g.values[i * m + j];
                            if (gv == 0.0) continue;
                            for (std::size_t p = 0; p < k; ++p)
                                a.grad.values[i * k + p] += gv * b.value.values[p * m + j];
                        }
                }
                if (b.requires_grad) {
                    for (std::size_t i = 0; i < nr; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                            const double av = a.value.values[i * k + p];
                            if (av == 0.0) continue;
                            for (std::size_t j = 0; j < m; ++j)
                                b.grad.values[p * m + j] += av * g.values[i * m + j];
                        }
                }
                break;
            }
            case Op::kAddRow: {
                Node& x = nodes_[n.in0];
                Node& b = nodes_[n.in1];
                const std::size_t m = b.value.shape[0];
                if (x.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i) x.grad.values[i] += g.values[i];
                if (b.requires_grad)
                    for (std::size_t i = 0; i < n.value.shape[0]; ++i)
                        for (std::size_t j = 0; j < m; ++j)
                            b.grad.values[j] += g.values[i * m + j];
                break;
            }
            case Op::kAdd: {
                Node& a = nodes_[n.in0];
                Node& b = nodes_[n.in1];
                if (a.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i) a.grad.values[i] += g.values[i];
                if (b.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i) b.grad.values[i] += g.values[i];
                break;
            }
            case Op::kSub: {
                Node& a = nodes_[n.in0];
                Node& b = nodes_[n.in1];
                if (a.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i) a.grad.values[i] += g.values[i];
                if (b.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i) b.grad.values[i] -= g.values[i];
                break;
            }
            case Op::kScale: {
                Node& x = nodes_[n.in0];
                if (x.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        x.grad.values[i] += n.c * g.values[i];
                break;
            }
            case Op::kAddConst: {
                Node& x = nodes_[n.in0];
                if (x.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i) x.grad.values[i] += g.values[i];
                break;
            }
            case Op::kRelu: {
                Node& x = nodes_[n.in0];
                if (x.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (x.value.values[i] > 0.0) x.grad.values[i] += g.values[i];
                break;
            }
            case Op::kSquare: {
                Node& x = nodes_[n.in0];
                if (x.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        x.grad.values[i] += 2.0 * x.value.values[i] * g.values[i];
                break;
            }
            case Op::kLog: {
                Node& x = nodes_[n.in0];
                if (x.requires_grad)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        x.grad.values[i] += g.values[i] / std::max(x.value.values[i], kLogClamp);
                break;
            }
            case Op::kMeanAll: {
                Node& x = nodes_[n.in0];
                if (x.requires_grad) {
                    const double gv = g.values[0] / static_cast<double>(x.value.size());
                    for (double& d : x.grad.values) d += gv;
                }
                break;
            }
            case Op::kMaxAll: {
                Node& x = nodes_[n.in0];
                if (x.requires_grad) {
                    const std::size_t idx = static_cast<std::size_t>(
                        std::max_element(x.value.values.begin(), x.value.values.end()) -
                        x.value.values.begin());
                    x.grad.values[idx] += g.values[0];
                }
                break;
            }
            case Op::kSoftmaxXent: {
                Node& x = nodes_[n.in0];
                if (x.requires_grad) {
                    const std::size_t nr = x.value.shape[0], c = x.value.shape[1];
                    const double gv = g.values[0] / static_cast<double>(nr);
                    for (std::size_t i = 0; i < nr; ++i)
                        for (std::size_t j = 0; j < c; ++j)
                            x.grad.values[i * c + j] +=
                                gv * (n.aux.values[i * c + j] - n.aux.values[(nr + i) * c + j]);
                }
                break;
            }
            case Op::kBceLogits: {
                Node& x = nodes_[n.in0];
                if (x.requires_grad) {
                    const std::size_t nr = x.value.size();
                    const double gv = g.values[0] / static_cast<double>(nr);
                    for (std::size_t i = 0; i < nr; ++i)
                        x.grad.values[i] += gv * (n.aux.values[i] - n.aux.values[nr + i]);
                }
                break;
            }
        }
    }
}

}  // namespace g2dm
