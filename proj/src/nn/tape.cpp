#include "wcgnn/nn/tape.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace wcgnn::nn {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
    }
}

// c += a * b
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c.data() + i * p;
        const double* ai = a.data() + i * m;
        for (std::size_t k = 0; k < m; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.data() + k * p;
            for (std::size_t j = 0; j < p; ++j) ci[j] += aik * bk[j];
        }
    }
}

// c += a * b^T
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.rows(), m = a.cols(), p = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.data() + i * m;
        double* ci = c.data() + i * p;
        for (std::size_t j = 0; j < p; ++j) {
            const double* bj = b.data() + j * m;
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k) s += ai[k] * bj[k];
            ci[j] += s;
        }
    }
}

// c += a^T * b
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.data() + i * m;
        const double* bi = b.data() + i * p;
        for (std::size_t k = 0; k < m; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            double* ck = c.data() + k * p;
            for (std::size_t j = 0; j < p; ++j) ck[j] += aik * bi[j];
        }
    }
}

}  // namespace

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

bool Tape::any_requires_grad(std::initializer_list<Var> vs) const {
    for (Var v : vs) {
        if (nodes_[v.id].requires_grad) return true;
    }
    return false;
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::parameter(Tensor value) {
    Node n;
    n.requires_grad = true;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (x.cols() != y.rows()) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(x.cols()) + " vs " +
                         std::to_string(y.rows()) + ")");
    }
    Node n;
    n.op = Op::matmul;
    n.inputs = {a.id, b.id};
    n.requires_grad = any_requires_grad({a, b});
    n.value = Tensor(x.rows(), y.cols());
    gemm_nn(x, y, n.value);
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    Node n;
    n.op = Op::add;
    n.inputs = {a.id, b.id};
    n.requires_grad = any_requires_grad({a, b});
    n.value = value(a);
    const Tensor& y = value(b);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += y[i];
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    require_same_shape(value(a), value(b), "sub");
    Node n;
    n.op = Op::sub;
    n.inputs = {a.id, b.id};
    n.requires_grad = any_requires_grad({a, b});
    n.value = value(a);
    const Tensor& y = value(b);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= y[i];
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    require_same_shape(value(a), value(b), "mul");
    Node n;
    n.op = Op::mul;
    n.inputs = {a.id, b.id};
    n.requires_grad = any_requires_grad({a, b});
    n.value = value(a);
    const Tensor& y = value(b);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= y[i];
    return push(std::move(n));
}

Var Tape::div(Var a, Var b) {
    require_same_shape(value(a), value(b), "div");
    Node n;
    n.op = Op::div;
    n.inputs = {a.id, b.id};
    n.requires_grad = any_requires_grad({a, b});
    n.value = value(a);
    const Tensor& y = value(b);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] /= y[i];
    return push(std::move(n));
}

Var Tape::add_row(Var a, Var row) {
    const Tensor& x = value(a);
    const Tensor& r = value(row);
    if (r.rows() != 1 || r.cols() != x.cols()) throw ShapeError("add_row: row must be 1 x cols(a)");
    Node n;
    n.op = Op::add_row;
    n.inputs = {a.id, row.id};
    n.requires_grad = any_requires_grad({a, row});
    n.value = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) n.value(i, j) += r[j];
    }
    return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
    Node n;
    n.op = Op::scale;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.scalar = s;
    n.value = value(a);
    for (double& x : n.value.buffer()) x *= s;
    return push(std::move(n));
}

Var Tape::add_scalar(Var a, double s) {
    Node n;
    n.op = Op::add_scalar;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.scalar = s;
    n.value = value(a);
    for (double& x : n.value.buffer()) x += s;
    return push(std::move(n));
}

Var Tape::relu(Var a) {
    Node n;
    n.op = Op::relu;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.value = value(a);
    for (double& x : n.value.buffer()) x = x > 0.0 ? x : 0.0;
    return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
    Node n;
    n.op = Op::sigmoid;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.value = value(a);
    for (double& x : n.value.buffer()) {
        // Split by sign so exp never overflows.
        if (x >= 0.0) {
            x = 1.0 / (1.0 + std::exp(-x));
        } else {
            const double e = std::exp(x);
            x = e / (1.0 + e);
        }
    }
    return push(std::move(n));
}

Var Tape::log(Var a) {
    Node n;
    n.op = Op::log;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.value = value(a);
    for (double& x : n.value.buffer()) x = std::log(x);
    return push(std::move(n));
}

Var Tape::square(Var a) {
    Node n;
    n.op = Op::square;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.value = value(a);
    for (double& x : n.value.buffer()) x *= x;
    return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t rows = value(parts[0]).rows();
    std::size_t cols = 0;
    Node n;
    n.op = Op::concat_cols;
    for (Var p : parts) {
        if (value(p).rows() != rows) throw ShapeError("concat_cols: row counts differ");
        cols += value(p).cols();
        n.inputs.push_back(p.id);
        n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
    }
    n.value = Tensor(rows, cols);
    std::size_t offset = 0;
    for (Var p : parts) {
        const Tensor& x = value(p);
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy_n(x.data() + i * x.cols(), x.cols(), n.value.data() + i * cols + offset);
        }
        offset += x.cols();
    }
    return push(std::move(n));
}

Var Tape::gather_rows(Var a, IndexList rows) {
    const Tensor& x = value(a);
    Node n;
    n.op = Op::gather_rows;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.value = Tensor(rows->size(), x.cols());
    for (std::size_t i = 0; i < rows->size(); ++i) {
        const std::size_t r = (*rows)[i];
        if (r >= x.rows()) throw ShapeError("gather_rows: index out of range");
        std::copy_n(x.data() + r * x.cols(), x.cols(), n.value.data() + i * x.cols());
    }
    n.index = std::move(rows);
    return push(std::move(n));
}

Var Tape::segment_max(Var a, IndexList seg, std::size_t num_segments) {
    const Tensor& x = value(a);
    if (seg->size() != x.rows()) throw ShapeError("segment_max: one segment id per row required");
    const std::size_t c = x.cols();
    Node n;
    n.op = Op::segment_max;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.value = Tensor(num_segments, c);
    n.argmax.assign(num_segments * c, kNone);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const std::size_t s = (*seg)[r];
        if (s >= num_segments) throw ShapeError("segment_max: segment id out of range");
        const double* xr = x.data() + r * c;
        double* out = n.value.data() + s * c;
        std::size_t* arg = n.argmax.data() + s * c;
        for (std::size_t j = 0; j < c; ++j) {
            // Strict comparison keeps the lowest row index on ties.
            if (arg[j] == kNone || xr[j] > out[j]) {
                out[j] = xr[j];
                arg[j] = r;
            }
        }
    }
    n.index = std::move(seg);
    n.scalar = static_cast<double>(num_segments);
    return push(std::move(n));
}

Var Tape::segment_sum(Var a, IndexList seg, std::size_t num_segments) {
    const Tensor& x = value(a);
    if (seg->size() != x.rows()) throw ShapeError("segment_sum: one segment id per row required");
    const std::size_t c = x.cols();
    Node n;
    n.op = Op::segment_sum;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.value = Tensor(num_segments, c);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const std::size_t s = (*seg)[r];
        if (s >= num_segments) throw ShapeError("segment_sum: segment id out of range");
        for (std::size_t j = 0; j < c; ++j) n.value(s, j) += x(r, j);
    }
    n.index = std::move(seg);
    return push(std::move(n));
}

Var Tape::row_sum(Var a) {
    const Tensor& x = value(a);
    Node n;
    n.op = Op::row_sum;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.value = Tensor(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j);
        n.value[i] = s;
    }
    return push(std::move(n));
}

Var Tape::sum(Var a) {
    Node n;
    n.op = Op::sum;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    double s = 0.0;
    for (double x : value(a).buffer()) s += x;
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

Var Tape::ball_project(Var a) {
    const Tensor& x = value(a);
    Node n;
    n.op = Op::ball_project;
    n.inputs = {a.id};
    n.requires_grad = any_requires_grad({a});
    n.value = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double norm2 = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) norm2 += x(i, j) * x(i, j);
        const double norm = std::sqrt(norm2);
        if (norm > 1.0) {
            for (std::size_t j = 0; j < x.cols(); ++j) n.value(i, j) /= norm;
        }
    }
    return push(std::move(n));
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(Var loss) {
    const Tensor& l = value(loss);
    if (l.rows() != 1 || l.cols() != 1) throw ShapeError("backward: loss must be a 1 x 1 scalar");
    for (Node& n : nodes_) n.grad = Tensor();
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss.id)[0] = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        const Node& n = nodes_[id];
        if (n.op == Op::leaf || !n.requires_grad || n.grad.empty()) continue;
        backprop_node(id);
    }
}

void Tape::backprop_node(std::size_t id) {
    // grad_buffer() only touches other nodes' grads, so these references stay valid.
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };
    auto in_value = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

    switch (n.op) {
        case Op::leaf: break;
        case Op::matmul:
            if (wants(0)) gemm_nt(g, in_value(1), grad_buffer(n.inputs[0]));
            if (wants(1)) gemm_tn(in_value(0), g, grad_buffer(n.inputs[1]));
            break;
        case Op::add:
        case Op::sub:
            if (wants(0)) {
                Tensor& ga = grad_buffer(n.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (wants(1)) {
                Tensor& gb = grad_buffer(n.inputs[1]);
                const double sign = n.op == Op::add ? 1.0 : -1.0;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
            }
            break;
        case Op::mul:
            if (wants(0)) {
                Tensor& ga = grad_buffer(n.inputs[0]);
                const Tensor& b = in_value(1);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
            }
            if (wants(1)) {
                Tensor& gb = grad_buffer(n.inputs[1]);
                const Tensor& a = in_value(0);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
            }
            break;
        case Op::div: {
            const Tensor& b = in_value(1);
            if (wants(0)) {
                Tensor& ga = grad_buffer(n.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / b[i];
            }
            if (wants(1)) {
                Tensor& gb = grad_buffer(n.inputs[1]);
                // d(a/b)/db = -(a/b)/b
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * n.value[i] / b[i];
            }
            break;
        }
        case Op::add_row:
            if (wants(0)) {
                Tensor& ga = grad_buffer(n.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (wants(1)) {
                Tensor& gr = grad_buffer(n.inputs[1]);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
                }
            }
            break;
        case Op::scale: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
            break;
        }
        case Op::add_scalar: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            break;
        }
        case Op::relu: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (n.value[i] > 0.0) ga[i] += g[i];
            }
            break;
        }
        case Op::sigmoid: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = n.value[i];
                ga[i] += g[i] * y * (1.0 - y);
            }
            break;
        }
        case Op::log: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            const Tensor& a = in_value(0);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
            break;
        }
        case Op::square: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            const Tensor& a = in_value(0);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * a[i] * g[i];
            break;
        }
        case Op::concat_cols: {
            std::size_t offset = 0;
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                const std::size_t w = in_value(k).cols();
                if (wants(k)) {
                    Tensor& gk = grad_buffer(n.inputs[k]);
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                        for (std::size_t j = 0; j < w; ++j) gk(i, j) += g(i, offset + j);
                    }
                }
                offset += w;
            }
            break;
        }
        case Op::gather_rows: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            const std::size_t c = g.cols();
            for (std::size_t i = 0; i < n.index->size(); ++i) {
                double* dst = ga.data() + (*n.index)[i] * c;
                const double* src = g.data() + i * c;
                for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
            }
            break;
        }
        case Op::segment_max: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            const std::size_t c = g.cols();
            for (std::size_t s = 0; s < g.rows(); ++s) {
                for (std::size_t j = 0; j < c; ++j) {
                    const std::size_t r = n.argmax[s * c + j];
                    if (r != kNone) ga(r, j) += g(s, j);
                }
            }
            break;
        }
        case Op::segment_sum: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            const std::size_t c = g.cols();
            for (std::size_t r = 0; r < n.index->size(); ++r) {
                const std::size_t s = (*n.index)[r];
                for (std::size_t j = 0; j < c; ++j) ga(r, j) += g(s, j);
            }
            break;
        }
        case Op::row_sum: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            for (std::size_t i = 0; i < ga.rows(); ++i) {
                for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g[i];
            }
            break;
        }
        case Op::sum: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            for (double& x : ga.buffer()) x += g[0];
            break;
        }
        case Op::ball_project: {
            Tensor& ga = grad_buffer(n.inputs[0]);
            const Tensor& x = in_value(0);
            const std::size_t c = x.cols();
            for (std::size_t i = 0; i < x.rows(); ++i) {
                double norm2 = 0.0;
                for (std::size_t j = 0; j < c; ++j) norm2 += x(i, j) * x(i, j);
                const double norm = std::sqrt(norm2);
                if (norm <= 1.0) {
                    for (std::size_t j = 0; j < c; ++j) ga(i, j) += g(i, j);
                    continue;
                }
                // d(x/|x|) = (I - y y^T) / |x|
                double ydotg = 0.0;
                for (std::size_t j = 0; j < c; ++j) ydotg += n.value(i, j) * g(i, j);
                for (std::size_t j = 0; j < c; ++j) ga(i, j) += (g(i, j) - n.value(i, j) * ydotg) / norm;
            }
            break;
        }
    }
}

}  // namespace wcgnn::nn
