#pragma once

#include <Eigen/Core>
#include <functional>
#include <initializer_list>
#include <vector>

namespace ap::ad {

// Dense row-major tensor of doubles. Rank is the length of the shape vector;
// rank-2 tensors map onto Eigen matrices for the heavy operations.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape);
    static Tensor constant(std::vector<int> shape, double fill);
    static Tensor row(const std::vector<double>& values);     // shape (1, n)
    static Tensor column(const std::vector<double>& values);  // shape (n, 1)
    static Tensor from_matrix(const Eigen::MatrixXd& m);

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const;
    int numel() const;

    double& operator()(int r, int c);        // rank-2 access
    double operator()(int r, int c) const;

    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> matrix();
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    matrix() const;

    std::vector<int> shape;
    std::vector<double> data;
};

class Graph;

// Handle to a node on the tape. Cheap to copy; owned by the graph.
struct Value {
    Graph* graph = nullptr;
    int index = -1;

    bool valid() const { return graph != nullptr && index >= 0; }
    const Tensor& tensor() const;
    const Tensor& grad() const;
    const std::vector<int>& shape() const { return tensor().shape; }
};

// Reverse-mode tape. Build a computation forward, then call backward once on
// a scalar root; gradients accumulate in creation-reverse order. Graphs are
// single-use and must outlive their Values.
class Graph {
  public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Value leaf(Tensor t);      // differentiable input
    Value constant(Tensor t);  // data with no gradient

    // Seeds d(root)/d(root) = 1 and runs the tape backward. The root must be
    // a scalar (one element). Callable once per graph.
    void backward(Value root);

    int size() const { return static_cast<int>(nodes_.size()); }

    // Internal node bookkeeping, public for the operation implementations.
    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily on first accumulation
        bool requires_grad = false;
        std::function<void()> backward;
    };

    const Tensor& value_of(int index) const;
    Tensor& grad_buffer(int index);  // zeros-initialized on first use
    bool requires_grad(int index) const;
    Value emplace(Tensor value, bool requires_grad, std::function<void()> backward);

  private:
    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// Elementwise arithmetic (shapes must match exactly).
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);

Value add_scalar(Value a, double s);
Value mul_scalar(Value a, double s);

// Elementwise nonlinearities.
Value relu(Value a);
Value tanh(Value a);
Value exp(Value a);
Value log(Value a);    // requires strictly positive entries
Value sqrt(Value a);   // requires strictly positive entries
Value erf(Value a);

// Elementwise min/max of same-shape tensors (built from relu internally, so
// the subgradient at ties follows the relu convention).
Value min(Value a, Value b);
Value max(Value a, Value b);

// (m, k) x (k, n) -> (m, n).
Value matmul(Value a, Value b);

// X (B, in) * W (in, out) + b (1, out) broadcast over rows -> (B, out).
Value affine(Value x, Value w, Value b);

// Row-wise softmax of a (B, n) tensor.
Value softmax_rows(Value a);

// Sum / mean over every element -> scalar shape (1, 1).
Value reduce_sum(Value a);
Value reduce_mean(Value a);

// Horizontal concatenation of (B, n_i) tensors -> (B, sum n_i).
Value concat_cols(const std::vector<Value>& parts);

// Rows of X (n, f) selected by index -> (m, f); duplicate indices accumulate
// gradient.
Value gather_rows(Value x, const std::vector<int>& rows);

// Same data, new shape (same element count).
Value reshape(Value a, std::vector<int> shape);

// Running sum down the rows of a (T, n) tensor.
Value cumsum_rows(Value a);

// Valid-padding stride-1 convolution: X (B, Cin, H, W), W (Cout, Cin, kh,
// kw), bias (Cout) -> (B, Cout, H-kh+1, W-kw+1).
Value conv2d(Value x, Value w, Value bias);

// Attention helpers over a per-row set of n entities. Q (B, F), K/V laid out
// as (B*n, F) with entity j of row b at index b*n + j.
Value attn_scores(Value q, Value k, int n);                  // -> (B, n)
Value attn_mix(Value weights, Value v);                      // (B, n) x (B*n, F) -> (B, F)

// Row-wise diagonal-Gaussian log density: mean (B, d), log_std (1, d),
// sample (B, d) constant -> (B, 1).
Value gaussian_log_prob(Value mean, Value log_std, Value sample);

}  // namespace ap::ad
