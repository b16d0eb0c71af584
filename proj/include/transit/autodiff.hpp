#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <vector>

namespace transit::ad {

using Mat = Eigen::MatrixXd;

class Tape;

struct Node {
    Mat val;
    Mat grad;           // allocated on demand during backward
    bool requires_grad = false;
    std::function<void()> back;  // accumulates into input grads
    Tape* tape = nullptr;
};

using Var = Node*;

// Reverse-mode tape over dense double matrices.  Supports exactly the
// operations the policy, halt/extension heads and baseline net need; not
// a general tensor framework.  Nodes are created in topological order,
// so backward() is a single reverse sweep.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    Var make(Mat val, bool requires_grad, std::function<void()> back = nullptr);
    Var constant(Mat val) { return make(std::move(val), false); }
    Var constant_scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

    // Leaf referencing external parameter storage; backward accumulates
    // into *external_grad.
    Var leaf(const Mat& value, Mat* external_grad);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
    void backward(Var loss);

    static Mat& grad_of(Var v);

private:
    bool grad_enabled_;
    std::deque<Node> nodes_;
};

Var add(Var a, Var b);                 // same shape
Var sub(Var a, Var b);
Var add_rowwise(Var a, Var row);       // row: 1 x cols(a)
Var mul_rowwise(Var a, Var row);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var relu(Var a);
Var tanh_(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp_(Var a);
Var log_(Var a);
Var softmax_rows(Var a);
Var layernorm_rows(Var a, double eps = 1e-5);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, int start, int len);
Var reshape(Var a, int rows, int cols);
// Rows of `a` selected by index; index -1 yields a zero row.
Var gather_rows(Var a, const std::vector<int>& indices);
// Row k of the result is the mean of a's rows listed in groups[k]
// (zero row for an empty group).
Var group_mean_rows(Var a, const std::vector<std::vector<int>>& groups);
Var repeat_rows(Var a, int count);     // a: 1 x d
Var sum_all(Var a);                    // 1 x 1
Var select(Var a, int i, int j);       // 1 x 1
Var sub_bcast(Var a, Var s);           // a - s, s: 1 x 1
Var neg(Var a);

// Numerically stable log softmax of a column vector (m x 1).
Var log_softmax_col(Var a);

}  // namespace transit::ad
