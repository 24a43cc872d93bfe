#include "ap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ap/common.hpp"
#include "ap/erf.hpp"

namespace ap::ad {

namespace {

constexpr double kTwoInvSqrtPi = 1.1283791670955125739;  // 2 / sqrt(pi)

// Sorted accumulation: any permutation of the same addends yields the same
// double, which entity-pooling reductions rely on for exact permutation
// invariance.
double ordered_sum(std::vector<double>& addends) {
    std::sort(addends.begin(), addends.end());
    double sum = 0.0;
    for (double v : addends) sum += v;
    return sum;
}

// Forward products use this fixed accumulation (ascending k per coefficient)
// instead of a blocked GEMM, so a row's result never depends on its position
// in the matrix. Entity rows then stay bit-identical under permutation; the
// backward pass keeps the fast blocked products because gradients carry no
// such exactness contract.
void product_accumulate(const Tensor& a, const Tensor& b, Tensor& out) {
    const int rows = a.shape[0];
    const int inner = a.shape[1];
    const int cols = b.shape[1];
    for (int r = 0; r < rows; ++r) {
        for (int k = 0; k < inner; ++k) {
            const double ark = a.data[r * inner + k];
            const double* brow = &b.data[static_cast<size_t>(k) * cols];
            double* orow = &out.data[static_cast<size_t>(r) * cols];
            for (int c = 0; c < cols; ++c) orow[c] += ark * brow[c];
        }
    }
}

int product(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        AP_CHECK(d > 0, "tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

void check_same_graph(Value a, Value b) {
    AP_CHECK(a.valid() && b.valid(), "operation on an empty value");
    AP_CHECK(a.graph == b.graph, "values belong to different graphs");
}

void check_same_shape(Value a, Value b) {
    AP_CHECK(a.shape() == b.shape(), "operand shapes must match");
}

}  // namespace

Tensor::Tensor(std::vector<int> shape_in) : shape(std::move(shape_in)) {
    data.assign(product(shape), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::constant(std::vector<int> shape, double fill) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = fill;
    return t;
}

Tensor Tensor::row(const std::vector<double>& values) {
    Tensor t({1, static_cast<int>(values.size())});
    t.data = values;
    return t;
}

Tensor Tensor::column(const std::vector<double>& values) {
    Tensor t({static_cast<int>(values.size()), 1});
    t.data = values;
    return t;
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m) {
    Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            t.data[r * m.cols() + c] = m(r, c);
        }
    }
    return t;
}

int Tensor::dim(int i) const {
    AP_CHECK(i >= 0 && i < rank(), "tensor dimension index out of range");
    return shape[i];
}

int Tensor::numel() const { return static_cast<int>(data.size()); }

double& Tensor::operator()(int r, int c) {
    AP_CHECK(rank() == 2, "2d access on a tensor of different rank");
    AP_CHECK(r >= 0 && r < shape[0] && c >= 0 && c < shape[1], "tensor index out of range");
    return data[r * shape[1] + c];
}

double Tensor::operator()(int r, int c) const {
    return const_cast<Tensor&>(*this)(r, c);
}

Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
Tensor::matrix() {
    AP_CHECK(rank() == 2, "matrix view requires a rank-2 tensor");
    return {data.data(), shape[0], shape[1]};
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
Tensor::matrix() const {
    AP_CHECK(rank() == 2, "matrix view requires a rank-2 tensor");
    return {data.data(), shape[0], shape[1]};
}

const Tensor& Value::tensor() const {
    AP_CHECK(valid(), "dereferencing an empty value");
    return graph->value_of(index);
}

const Tensor& Value::grad() const {
    AP_CHECK(valid(), "dereferencing an empty value");
    return graph->grad_buffer(index);
}

Value Graph::leaf(Tensor t) { return emplace(std::move(t), true, nullptr); }

Value Graph::constant(Tensor t) { return emplace(std::move(t), false, nullptr); }

Value Graph::emplace(Tensor value, bool requires_grad, std::function<void()> backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Graph::value_of(int index) const {
    AP_CHECK(index >= 0 && index < size(), "node index out of range");
    return nodes_[index].value;
}

Tensor& Graph::grad_buffer(int index) {
    AP_CHECK(index >= 0 && index < size(), "node index out of range");
    Node& node = nodes_[index];
    if (node.grad.data.empty()) {
        node.grad = Tensor::zeros(node.value.shape);
    }
    return node.grad;
}

bool Graph::requires_grad(int index) const {
    AP_CHECK(index >= 0 && index < size(), "node index out of range");
    return nodes_[index].requires_grad;
}

void Graph::backward(Value root) {
    AP_CHECK(root.graph == this, "backward root belongs to a different graph");
    AP_CHECK(!backward_done_, "backward may run once per graph");
    AP_CHECK(root.tensor().numel() == 1, "backward root must be a scalar");
    backward_done_ = true;
    grad_buffer(root.index).data[0] = 1.0;
    for (int i = root.index; i >= 0; --i) {
        const Node& node = nodes_[i];
        if (!node.requires_grad || !node.backward) continue;
        if (node.grad.data.empty()) continue;  // no path to the root
        node.backward();
    }
}

Value add(Value a, Value b) {
    check_same_graph(a, b);
    check_same_shape(a, b);
    Graph* g = a.graph;
    Tensor out = a.tensor();
    const Tensor& tb = b.tensor();
    for (int i = 0; i < out.numel(); ++i) out.data[i] += tb.data[i];
    const bool rg = g->requires_grad(a.index) || g->requires_grad(b.index);
    const int oi = g->size();
    const int ai = a.index, bi = b.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai, bi] {
            const Tensor& go = g->grad_buffer(oi);
            if (g->requires_grad(ai)) {
                Tensor& ga = g->grad_buffer(ai);
                for (int i = 0; i < go.numel(); ++i) ga.data[i] += go.data[i];
            }
            if (g->requires_grad(bi)) {
                Tensor& gb = g->grad_buffer(bi);
                for (int i = 0; i < go.numel(); ++i) gb.data[i] += go.data[i];
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value sub(Value a, Value b) {
    check_same_graph(a, b);
    check_same_shape(a, b);
    Graph* g = a.graph;
    Tensor out = a.tensor();
    const Tensor& tb = b.tensor();
    for (int i = 0; i < out.numel(); ++i) out.data[i] -= tb.data[i];
    const bool rg = g->requires_grad(a.index) || g->requires_grad(b.index);
    const int oi = g->size();
    const int ai = a.index, bi = b.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai, bi] {
            const Tensor& go = g->grad_buffer(oi);
            if (g->requires_grad(ai)) {
                Tensor& ga = g->grad_buffer(ai);
                for (int i = 0; i < go.numel(); ++i) ga.data[i] += go.data[i];
            }
            if (g->requires_grad(bi)) {
                Tensor& gb = g->grad_buffer(bi);
                for (int i = 0; i < go.numel(); ++i) gb.data[i] -= go.data[i];
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value mul(Value a, Value b) {
    check_same_graph(a, b);
    check_same_shape(a, b);
    Graph* g = a.graph;
    Tensor out = a.tensor();
    const Tensor& tb = b.tensor();
    for (int i = 0; i < out.numel(); ++i) out.data[i] *= tb.data[i];
    const bool rg = g->requires_grad(a.index) || g->requires_grad(b.index);
    const int oi = g->size();
    const int ai = a.index, bi = b.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai, bi] {
            const Tensor& go = g->grad_buffer(oi);
            const Tensor& ta = g->value_of(ai);
            const Tensor& tb2 = g->value_of(bi);
            if (g->requires_grad(ai)) {
                Tensor& ga = g->grad_buffer(ai);
                for (int i = 0; i < go.numel(); ++i) ga.data[i] += go.data[i] * tb2.data[i];
            }
            if (g->requires_grad(bi)) {
                Tensor& gb = g->grad_buffer(bi);
                for (int i = 0; i < go.numel(); ++i) gb.data[i] += go.data[i] * ta.data[i];
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value add_scalar(Value a, double s) {
    AP_CHECK(a.valid(), "operation on an empty value");
    Graph* g = a.graph;
    Tensor out = a.tensor();
    for (double& v : out.data) v += s;
    const bool rg = g->requires_grad(a.index);
    const int oi = g->size();
    const int ai = a.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai] {
            const Tensor& go = g->grad_buffer(oi);
            Tensor& ga = g->grad_buffer(ai);
            for (int i = 0; i < go.numel(); ++i) ga.data[i] += go.data[i];
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value mul_scalar(Value a, double s) {
    AP_CHECK(a.valid(), "operation on an empty value");
    Graph* g = a.graph;
    Tensor out = a.tensor();
    for (double& v : out.data) v *= s;
    const bool rg = g->requires_grad(a.index);
    const int oi = g->size();
    const int ai = a.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai, s] {
            const Tensor& go = g->grad_buffer(oi);
            Tensor& ga = g->grad_buffer(ai);
            for (int i = 0; i < go.numel(); ++i) ga.data[i] += s * go.data[i];
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

namespace {

// Shared scaffolding for elementwise y = f(x) with dy/dx from (x, y).
Value unary_op(Value a, double (*fwd)(double), double (*dfdx)(double, double)) {
    AP_CHECK(a.valid(), "operation on an empty value");
    Graph* g = a.graph;
    Tensor out = a.tensor();
    for (double& v : out.data) v = fwd(v);
    const bool rg = g->requires_grad(a.index);
    const int oi = g->size();
    const int ai = a.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai, dfdx] {
            const Tensor& go = g->grad_buffer(oi);
            const Tensor& tx = g->value_of(ai);
            const Tensor& ty = g->value_of(oi);
            Tensor& ga = g->grad_buffer(ai);
            for (int i = 0; i < go.numel(); ++i) {
                ga.data[i] += go.data[i] * dfdx(tx.data[i], ty.data[i]);
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

}  // namespace

Value relu(Value a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value tanh(Value a) {
    return unary_op(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Value exp(Value a) {
    return unary_op(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Value log(Value a) {
    for (double v : a.tensor().data) {
        AP_CHECK(v > 0.0, "log requires strictly positive entries");
    }
    return unary_op(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Value sqrt(Value a) {
    for (double v : a.tensor().data) {
        AP_CHECK(v > 0.0, "sqrt requires strictly positive entries");
    }
    return unary_op(
        a, [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

Value erf(Value a) {
    return unary_op(
        a, [](double x) { return ap::erf(x); },
        [](double x, double) { return kTwoInvSqrtPi * std::exp(-x * x); });
}

Value min(Value a, Value b) { return sub(b, relu(sub(b, a))); }

Value max(Value a, Value b) { return add(a, relu(sub(b, a))); }

Value matmul(Value a, Value b) {
    check_same_graph(a, b);
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    AP_CHECK(ta.rank() == 2 && tb.rank() == 2, "matmul requires rank-2 tensors");
    AP_CHECK(ta.shape[1] == tb.shape[0], "inner matmul dimensions must agree");
    Graph* g = a.graph;
    Tensor out({ta.shape[0], tb.shape[1]});
    product_accumulate(ta, tb, out);
    const bool rg = g->requires_grad(a.index) || g->requires_grad(b.index);
    const int oi = g->size();
    const int ai = a.index, bi = b.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai, bi] {
            const Tensor& go = g->grad_buffer(oi);
            if (g->requires_grad(ai)) {
                g->grad_buffer(ai).matrix() += go.matrix() * g->value_of(bi).matrix().transpose();
            }
            if (g->requires_grad(bi)) {
                g->grad_buffer(bi).matrix() += g->value_of(ai).matrix().transpose() * go.matrix();
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value affine(Value x, Value w, Value b) {
    check_same_graph(x, w);
    check_same_graph(x, b);
    const Tensor& tx = x.tensor();
    const Tensor& tw = w.tensor();
    const Tensor& tb = b.tensor();
    AP_CHECK(tx.rank() == 2 && tw.rank() == 2 && tb.rank() == 2, "affine requires rank-2 tensors");
    AP_CHECK(tx.shape[1] == tw.shape[0], "affine input width must match the weight rows");
    AP_CHECK(tb.shape[0] == 1 && tb.shape[1] == tw.shape[1], "affine bias must be (1, out)");
    Graph* g = x.graph;
    Tensor out({tx.shape[0], tw.shape[1]});
    for (int r = 0; r < tx.shape[0]; ++r) {
        for (int c = 0; c < tw.shape[1]; ++c) out(r, c) = tb.data[static_cast<size_t>(c)];
    }
    product_accumulate(tx, tw, out);
    const bool rg =
        g->requires_grad(x.index) || g->requires_grad(w.index) || g->requires_grad(b.index);
    const int oi = g->size();
    const int xi = x.index, wi = w.index, bi = b.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, xi, wi, bi] {
            const Tensor& go = g->grad_buffer(oi);
            if (g->requires_grad(xi)) {
                g->grad_buffer(xi).matrix() += go.matrix() * g->value_of(wi).matrix().transpose();
            }
            if (g->requires_grad(wi)) {
                g->grad_buffer(wi).matrix() += g->value_of(xi).matrix().transpose() * go.matrix();
            }
            if (g->requires_grad(bi)) {
                g->grad_buffer(bi).matrix().row(0) += go.matrix().colwise().sum();
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value softmax_rows(Value a) {
    AP_CHECK(a.valid(), "operation on an empty value");
    const Tensor& ta = a.tensor();
    AP_CHECK(ta.rank() == 2, "softmax_rows requires a rank-2 tensor");
    Graph* g = a.graph;
    const int rows = ta.shape[0];
    const int cols = ta.shape[1];
    Tensor out({rows, cols});
    std::vector<double> addends(static_cast<size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        double m = ta.data[r * cols];
        for (int c = 1; c < cols; ++c) m = std::max(m, ta.data[r * cols + c]);
        for (int c = 0; c < cols; ++c) {
            const double e = std::exp(ta.data[r * cols + c] - m);
            out.data[r * cols + c] = e;
            addends[static_cast<size_t>(c)] = e;
        }
        // Summing in sorted order makes the result independent of the column
        // order, so permuting entities permutes the outputs bit-exactly.
        const double z = ordered_sum(addends);
        for (int c = 0; c < cols; ++c) out.data[r * cols + c] /= z;
    }
    const bool rg = g->requires_grad(a.index);
    const int oi = g->size();
    const int ai = a.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai, rows, cols] {
            const Tensor& go = g->grad_buffer(oi);
            const Tensor& y = g->value_of(oi);
            Tensor& ga = g->grad_buffer(ai);
            for (int r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (int c = 0; c < cols; ++c) {
                    dot += go.data[r * cols + c] * y.data[r * cols + c];
                }
                for (int c = 0; c < cols; ++c) {
                    const int i = r * cols + c;
                    ga.data[i] += y.data[i] * (go.data[i] - dot);
                }
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value reduce_sum(Value a) {
    AP_CHECK(a.valid(), "operation on an empty value");
    Graph* g = a.graph;
    double total = 0.0;
    for (double v : a.tensor().data) total += v;
    Tensor out({1, 1});
    out.data[0] = total;
    const bool rg = g->requires_grad(a.index);
    const int oi = g->size();
    const int ai = a.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai] {
            const double go = g->grad_buffer(oi).data[0];
            Tensor& ga = g->grad_buffer(ai);
            for (double& v : ga.data) v += go;
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value reduce_mean(Value a) {
    AP_CHECK(a.valid(), "operation on an empty value");
    const int n = a.tensor().numel();
    return mul_scalar(reduce_sum(a), 1.0 / static_cast<double>(n));
}

Value concat_cols(const std::vector<Value>& parts) {
    AP_CHECK(!parts.empty(), "concat_cols needs at least one tensor");
    Graph* g = parts.front().graph;
    const int rows = parts.front().tensor().shape[0];
    int cols = 0;
    bool rg = false;
    for (const Value& p : parts) {
        check_same_graph(parts.front(), p);
        AP_CHECK(p.tensor().rank() == 2, "concat_cols requires rank-2 tensors");
        AP_CHECK(p.tensor().shape[0] == rows, "concat_cols requires equal row counts");
        cols += p.tensor().shape[1];
        rg = rg || g->requires_grad(p.index);
    }
    Tensor out({rows, cols});
    int offset = 0;
    for (const Value& p : parts) {
        const Tensor& tp = p.tensor();
        const int pc = tp.shape[1];
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < pc; ++c) {
                out.data[r * cols + offset + c] = tp.data[r * pc + c];
            }
        }
        offset += pc;
    }
    const int oi = g->size();
    std::vector<int> indices;
    std::vector<int> widths;
    for (const Value& p : parts) {
        indices.push_back(p.index);
        widths.push_back(p.tensor().shape[1]);
    }
    std::function<void()> back;
    if (rg) {
        back = [g, oi, indices, widths, rows, cols] {
            const Tensor& go = g->grad_buffer(oi);
            int offset2 = 0;
            for (size_t p = 0; p < indices.size(); ++p) {
                const int pc = widths[p];
                if (g->requires_grad(indices[p])) {
                    Tensor& gp = g->grad_buffer(indices[p]);
                    for (int r = 0; r < rows; ++r) {
                        for (int c = 0; c < pc; ++c) {
                            gp.data[r * pc + c] += go.data[r * cols + offset2 + c];
                        }
                    }
                }
                offset2 += pc;
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value gather_rows(Value x, const std::vector<int>& rows) {
    AP_CHECK(x.valid(), "operation on an empty value");
    const Tensor& tx = x.tensor();
    AP_CHECK(tx.rank() == 2, "gather_rows requires a rank-2 tensor");
    Graph* g = x.graph;
    const int cols = tx.shape[1];
    Tensor out({static_cast<int>(rows.size()), cols});
    for (size_t r = 0; r < rows.size(); ++r) {
        AP_CHECK(rows[r] >= 0 && rows[r] < tx.shape[0], "gather_rows index out of range");
        for (int c = 0; c < cols; ++c) {
            out.data[r * cols + c] = tx.data[rows[r] * cols + c];
        }
    }
    const bool rg = g->requires_grad(x.index);
    const int oi = g->size();
    const int xi = x.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, xi, rows, cols] {
            const Tensor& go = g->grad_buffer(oi);
            Tensor& gx = g->grad_buffer(xi);
            for (size_t r = 0; r < rows.size(); ++r) {
                for (int c = 0; c < cols; ++c) {
                    gx.data[rows[r] * cols + c] += go.data[r * cols + c];
                }
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value reshape(Value a, std::vector<int> shape) {
    AP_CHECK(a.valid(), "operation on an empty value");
    Graph* g = a.graph;
    Tensor out = a.tensor();
    AP_CHECK(product(shape) == out.numel(), "reshape must preserve the element count");
    out.shape = std::move(shape);
    const bool rg = g->requires_grad(a.index);
    const int oi = g->size();
    const int ai = a.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai] {
            const Tensor& go = g->grad_buffer(oi);
            Tensor& ga = g->grad_buffer(ai);
            for (int i = 0; i < go.numel(); ++i) ga.data[i] += go.data[i];
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value cumsum_rows(Value a) {
    AP_CHECK(a.valid(), "operation on an empty value");
    const Tensor& ta = a.tensor();
    AP_CHECK(ta.rank() == 2, "cumsum_rows requires a rank-2 tensor");
    Graph* g = a.graph;
    const int rows = ta.shape[0];
    const int cols = ta.shape[1];
    Tensor out = ta;
    for (int r = 1; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            out.data[r * cols + c] += out.data[(r - 1) * cols + c];
        }
    }
    const bool rg = g->requires_grad(a.index);
    const int oi = g->size();
    const int ai = a.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, ai, rows, cols] {
            const Tensor& go = g->grad_buffer(oi);
            Tensor& ga = g->grad_buffer(ai);
            std::vector<double> run(cols, 0.0);
            for (int r = rows - 1; r >= 0; --r) {
                for (int c = 0; c < cols; ++c) {
                    run[c] += go.data[r * cols + c];
                    ga.data[r * cols + c] += run[c];
                }
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value conv2d(Value x, Value w, Value bias) {
    check_same_graph(x, w);
    check_same_graph(x, bias);
    const Tensor& tx = x.tensor();
    const Tensor& tw = w.tensor();
    const Tensor& tb = bias.tensor();
    AP_CHECK(tx.rank() == 4, "conv2d input must be (B, Cin, H, W)");
    AP_CHECK(tw.rank() == 4, "conv2d weight must be (Cout, Cin, kh, kw)");
    AP_CHECK(tx.shape[1] == tw.shape[1], "conv2d channel counts must agree");
    AP_CHECK(tb.rank() == 2 && tb.shape[0] == 1 && tb.shape[1] == tw.shape[0],
             "conv2d bias must be (1, Cout)");
    const int B = tx.shape[0], Cin = tx.shape[1], H = tx.shape[2], W = tx.shape[3];
    const int Cout = tw.shape[0], kh = tw.shape[2], kw = tw.shape[3];
    AP_CHECK(H >= kh && W >= kw, "conv2d kernel larger than the input");
    const int Ho = H - kh + 1, Wo = W - kw + 1;

    Graph* g = x.graph;
    Tensor out({B, Cout, Ho, Wo});
    auto xat = [&](int b, int c, int i, int j) {
        return tx.data[((b * Cin + c) * H + i) * W + j];
    };
    auto wat = [&](int o, int c, int i, int j) {
        return tw.data[((o * Cin + c) * kh + i) * kw + j];
    };
    for (int b = 0; b < B; ++b) {
        for (int o = 0; o < Cout; ++o) {
            for (int i = 0; i < Ho; ++i) {
                for (int j = 0; j < Wo; ++j) {
                    double acc = tb.data[o];
                    for (int c = 0; c < Cin; ++c) {
                        for (int di = 0; di < kh; ++di) {
                            for (int dj = 0; dj < kw; ++dj) {
                                acc += xat(b, c, i + di, j + dj) * wat(o, c, di, dj);
                            }
                        }
                    }
                    out.data[((b * Cout + o) * Ho + i) * Wo + j] = acc;
                }
            }
        }
    }
    const bool rg =
        g->requires_grad(x.index) || g->requires_grad(w.index) || g->requires_grad(bias.index);
    const int oi = g->size();
    const int xi = x.index, wi = w.index, bi = bias.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, xi, wi, bi, B, Cin, H, W, Cout, kh, kw, Ho, Wo] {
            const Tensor& go = g->grad_buffer(oi);
            const Tensor& tx2 = g->value_of(xi);
            const Tensor& tw2 = g->value_of(wi);
            const bool need_x = g->requires_grad(xi);
            const bool need_w = g->requires_grad(wi);
            const bool need_b = g->requires_grad(bi);
            Tensor* gx = need_x ? &g->grad_buffer(xi) : nullptr;
            Tensor* gw = need_w ? &g->grad_buffer(wi) : nullptr;
            Tensor* gb = need_b ? &g->grad_buffer(bi) : nullptr;
            for (int b = 0; b < B; ++b) {
                for (int o = 0; o < Cout; ++o) {
                    for (int i = 0; i < Ho; ++i) {
                        for (int j = 0; j < Wo; ++j) {
                            const double up = go.data[((b * Cout + o) * Ho + i) * Wo + j];
                            if (up == 0.0) continue;
                            if (need_b) gb->data[o] += up;
                            for (int c = 0; c < Cin; ++c) {
                                for (int di = 0; di < kh; ++di) {
                                    for (int dj = 0; dj < kw; ++dj) {
                                        const int xoff =
                                            ((b * Cin + c) * H + i + di) * W + j + dj;
                                        const int woff =
                                            ((o * Cin + c) * kh + di) * kw + dj;
                                        if (need_x) gx->data[xoff] += up * tw2.data[woff];
                                        if (need_w) gw->data[woff] += up * tx2.data[xoff];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value attn_scores(Value q, Value k, int n) {
    check_same_graph(q, k);
    const Tensor& tq = q.tensor();
    const Tensor& tk = k.tensor();
    AP_CHECK(tq.rank() == 2 && tk.rank() == 2, "attention inputs must be rank-2");
    AP_CHECK(n > 0, "attention needs at least one entity");
    AP_CHECK(tq.shape[1] == tk.shape[1], "query and key widths must match");
    AP_CHECK(tk.shape[0] == tq.shape[0] * n, "keys must hold n entities per query row");
    Graph* g = q.graph;
    const int B = tq.shape[0];
    const int F = tq.shape[1];
    Tensor out({B, n});
    for (int b = 0; b < B; ++b) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int f = 0; f < F; ++f) {
                acc += tq.data[b * F + f] * tk.data[(b * n + j) * F + f];
            }
            out.data[b * n + j] = acc;
        }
    }
    const bool rg = g->requires_grad(q.index) || g->requires_grad(k.index);
    const int oi = g->size();
    const int qi = q.index, ki = k.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, qi, ki, B, F, n] {
            const Tensor& go = g->grad_buffer(oi);
            const Tensor& tq2 = g->value_of(qi);
            const Tensor& tk2 = g->value_of(ki);
            const bool need_q = g->requires_grad(qi);
            const bool need_k = g->requires_grad(ki);
            Tensor* gq = need_q ? &g->grad_buffer(qi) : nullptr;
            Tensor* gk = need_k ? &g->grad_buffer(ki) : nullptr;
            for (int b = 0; b < B; ++b) {
                for (int j = 0; j < n; ++j) {
                    const double up = go.data[b * n + j];
                    if (up == 0.0) continue;
                    for (int f = 0; f < F; ++f) {
                        if (need_q) gq->data[b * F + f] += up * tk2.data[(b * n + j) * F + f];
                        if (need_k) gk->data[(b * n + j) * F + f] += up * tq2.data[b * F + f];
                    }
                }
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value attn_mix(Value weights, Value v) {
    check_same_graph(weights, v);
    const Tensor& tw = weights.tensor();
    const Tensor& tv = v.tensor();
    AP_CHECK(tw.rank() == 2 && tv.rank() == 2, "attention inputs must be rank-2");
    const int B = tw.shape[0];
    const int n = tw.shape[1];
    AP_CHECK(tv.shape[0] == B * n, "values must hold n entities per weight row");
    const int F = tv.shape[1];
    Graph* g = weights.graph;
    Tensor out({B, F});
    // Per-feature sorted accumulation keeps the pooled vector bit-identical
    // under any permutation of the n entities.
    std::vector<double> addends(static_cast<size_t>(n));
    for (int b = 0; b < B; ++b) {
        for (int f = 0; f < F; ++f) {
            for (int j = 0; j < n; ++j) {
                addends[static_cast<size_t>(j)] =
                    tw.data[b * n + j] * tv.data[(b * n + j) * F + f];
            }
            out.data[b * F + f] = ordered_sum(addends);
        }
    }
    const bool rg = g->requires_grad(weights.index) || g->requires_grad(v.index);
    const int oi = g->size();
    const int wi = weights.index, vi = v.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, wi, vi, B, n, F] {
            const Tensor& go = g->grad_buffer(oi);
            const Tensor& tw2 = g->value_of(wi);
            const Tensor& tv2 = g->value_of(vi);
            const bool need_w = g->requires_grad(wi);
            const bool need_v = g->requires_grad(vi);
            Tensor* gw = need_w ? &g->grad_buffer(wi) : nullptr;
            Tensor* gv = need_v ? &g->grad_buffer(vi) : nullptr;
            for (int b = 0; b < B; ++b) {
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int f = 0; f < F; ++f) {
                        const double up = go.data[b * F + f];
                        if (need_v) gv->data[(b * n + j) * F + f] += tw2.data[b * n + j] * up;
                        acc += up * tv2.data[(b * n + j) * F + f];
                    }
                    if (need_w) gw->data[b * n + j] += acc;
                }
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

Value gaussian_log_prob(Value mean, Value log_std, Value sample) {
    check_same_graph(mean, log_std);
    check_same_graph(mean, sample);
    const Tensor& tm = mean.tensor();
    const Tensor& ts = log_std.tensor();
    const Tensor& tx = sample.tensor();
    AP_CHECK(tm.rank() == 2 && tx.rank() == 2, "mean and sample must be rank-2");
    AP_CHECK(tm.shape == tx.shape, "mean and sample shapes must match");
    AP_CHECK(ts.rank() == 2 && ts.shape[0] == 1 && ts.shape[1] == tm.shape[1],
             "log_std must be (1, d)");
    AP_CHECK(!mean.graph->requires_grad(sample.index),
             "the density is differentiated in its parameters, not the sample");
    Graph* g = mean.graph;
    const int B = tm.shape[0];
    const int d = tm.shape[1];
    constexpr double kLog2Pi = 1.8378770664093454836;
    Tensor out({B, 1});
    for (int b = 0; b < B; ++b) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) {
            const double s = ts.data[j];
            const double z = (tx.data[b * d + j] - tm.data[b * d + j]) * std::exp(-s);
            acc += z * z + 2.0 * s + kLog2Pi;
        }
        out.data[b] = -0.5 * acc;
    }
    const bool rg = g->requires_grad(mean.index) || g->requires_grad(log_std.index);
    const int oi = g->size();
    const int mi = mean.index, si = log_std.index, xi = sample.index;
    std::function<void()> back;
    if (rg) {
        back = [g, oi, mi, si, xi, B, d] {
            const Tensor& go = g->grad_buffer(oi);
            const Tensor& tm2 = g->value_of(mi);
            const Tensor& ts2 = g->value_of(si);
            const Tensor& tx2 = g->value_of(xi);
            const bool need_m = g->requires_grad(mi);
            const bool need_s = g->requires_grad(si);
            Tensor* gm = need_m ? &g->grad_buffer(mi) : nullptr;
            Tensor* gs = need_s ? &g->grad_buffer(si) : nullptr;
            for (int b = 0; b < B; ++b) {
                const double up = go.data[b];
                if (up == 0.0) continue;
                for (int j = 0; j < d; ++j) {
                    const double inv_sigma = std::exp(-ts2.data[j]);
                    const double z = (tx2.data[b * d + j] - tm2.data[b * d + j]) * inv_sigma;
                    if (need_m) gm->data[b * d + j] += up * z * inv_sigma;
                    if (need_s) gs->data[j] += up * (z * z - 1.0);
                }
            }
        };
    }
    return g->emplace(std::move(out), rg, std::move(back));
}

}  // namespace ap::ad
