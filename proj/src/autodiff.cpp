#include "transit/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace transit::ad {

Var Tape::make(Mat val, bool requires_grad, std::function<void()> back) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.val = std::move(val);
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.back = std::move(back);
    n.tape = this;
    return &n;
}

Var Tape::leaf(const Mat& value, Mat* external_grad) {
    Var v = make(value, external_grad != nullptr);
    if (v->requires_grad) {
        v->back = [v, external_grad]() { *external_grad += v->grad; };
    }
    return v;
}

Mat& Tape::grad_of(Var v) {
    if (v->grad.size() == 0) v->grad = Mat::Zero(v->val.rows(), v->val.cols());
    return v->grad;
}

void Tape::backward(Var loss) {
    if (!grad_enabled_) throw std::runtime_error("backward on a no-grad tape");
    if (loss->val.size() != 1) throw std::runtime_error("backward expects a scalar loss");
    grad_of(loss).setOnes();
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->requires_grad && it->back && it->grad.size() != 0) it->back();
    }
}

namespace {

Tape& tape_of(Var a) { return *a->tape; }

bool any_grad(std::initializer_list<Var> vs) {
    for (Var v : vs)
        if (v->requires_grad) return true;
    return false;
}

Mat& g(Var v) { return Tape::grad_of(v); }

}  // namespace

Var add(Var a, Var b) {
    Var out = tape_of(a).make(a->val + b->val, any_grad({a, b}));
    if (out->requires_grad)
        out->back = [a, b, out]() {
            if (a->requires_grad) g(a) += out->grad;
            if (b->requires_grad) g(b) += out->grad;
        };
    return out;
}

Var sub(Var a, Var b) {
    Var out = tape_of(a).make(a->val - b->val, any_grad({a, b}));
    if (out->requires_grad)
        out->back = [a, b, out]() {
            if (a->requires_grad) g(a) += out->grad;
            if (b->requires_grad) g(b) -= out->grad;
        };
    return out;
}

Var add_rowwise(Var a, Var row) {
    Mat v = a->val;
    v.rowwise() += row->val.row(0);
    Var out = tape_of(a).make(std::move(v), any_grad({a, row}));
    if (out->requires_grad)
        out->back = [a, row, out]() {
            if (a->requires_grad) g(a) += out->grad;
            if (row->requires_grad) g(row) += out->grad.colwise().sum();
        };
    return out;
}

Var mul_rowwise(Var a, Var row) {
    Mat v = a->val;
    v.array().rowwise() *= row->val.row(0).array();
    Var out = tape_of(a).make(std::move(v), any_grad({a, row}));
    if (out->requires_grad)
        out->back = [a, row, out]() {
            if (a->requires_grad)
                g(a).array() += out->grad.array().rowwise() * row->val.row(0).array();
            if (row->requires_grad)
                g(row) += (out->grad.array() * a->val.array()).colwise().sum().matrix();
        };
    return out;
}

Var hadamard(Var a, Var b) {
    Var out = tape_of(a).make((a->val.array() * b->val.array()).matrix(), any_grad({a, b}));
    if (out->requires_grad)
        out->back = [a, b, out]() {
            if (a->requires_grad) g(a).array() += out->grad.array() * b->val.array();
            if (b->requires_grad) g(b).array() += out->grad.array() * a->val.array();
        };
    return out;
}

Var scale(Var a, double s) {
    Var out = tape_of(a).make(a->val * s, a->requires_grad);
    if (out->requires_grad)
        out->back = [a, s, out]() { g(a) += out->grad * s; };
    return out;
}

Var matmul(Var a, Var b) {
    Var out = tape_of(a).make(a->val * b->val, any_grad({a, b}));
    if (out->requires_grad)
        out->back = [a, b, out]() {
            if (a->requires_grad) g(a) += out->grad * b->val.transpose();
            if (b->requires_grad) g(b) += a->val.transpose() * out->grad;
        };
    return out;
}

Var transpose(Var a) {
    Var out = tape_of(a).make(a->val.transpose(), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() { g(a) += out->grad.transpose(); };
    return out;
}

Var relu(Var a) {
    Var out = tape_of(a).make(a->val.cwiseMax(0.0), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() {
            g(a).array() += out->grad.array() * (a->val.array() > 0.0).cast<double>();
        };
    return out;
}

Var tanh_(Var a) {
    Var out = tape_of(a).make(a->val.array().tanh().matrix(), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() {
            g(a).array() += out->grad.array() * (1.0 - out->val.array().square());
        };
    return out;
}

Var sigmoid(Var a) {
    Var out = tape_of(a).make(
        (1.0 / (1.0 + (-a->val.array()).exp())).matrix(), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() {
            g(a).array() += out->grad.array() * out->val.array() * (1.0 - out->val.array());
        };
    return out;
}

Var softplus(Var a) {
    // log(1 + e^x), computed stably as max(x, 0) + log1p(e^{-|x|}).
    Mat v = a->val.unaryExpr(
        [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
    Var out = tape_of(a).make(std::move(v), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() {
            g(a).array() += out->grad.array() * (1.0 / (1.0 + (-a->val.array()).exp()));
        };
    return out;
}

Var exp_(Var a) {
    Var out = tape_of(a).make(a->val.array().exp().matrix(), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() { g(a).array() += out->grad.array() * out->val.array(); };
    return out;
}

Var log_(Var a) {
    Var out = tape_of(a).make(a->val.array().log().matrix(), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() { g(a).array() += out->grad.array() / a->val.array(); };
    return out;
}

Var softmax_rows(Var a) {
    Mat v = a->val;
    for (int i = 0; i < v.rows(); ++i) {
        Eigen::RowVectorXd row = v.row(i);
        double m = row.maxCoeff();
        Eigen::ArrayXd e = (row.array() - m).exp();
        v.row(i) = (e / e.sum()).matrix();
    }
    Var out = tape_of(a).make(std::move(v), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() {
            for (int i = 0; i < out->val.rows(); ++i) {
                Eigen::ArrayXd y = out->val.row(i).array();
                Eigen::ArrayXd dy = out->grad.row(i).array();
                double dot = (y * dy).sum();
                g(a).row(i).array() += y * (dy - dot);
            }
        };
    return out;
}

Var layernorm_rows(Var a, double eps) {
    const int cols = static_cast<int>(a->val.cols());
    Mat v(a->val.rows(), cols);
    Eigen::VectorXd inv_sigma(a->val.rows());
    for (int i = 0; i < a->val.rows(); ++i) {
        double mu = a->val.row(i).mean();
        Eigen::ArrayXd centered = a->val.row(i).array() - mu;
        double var = centered.square().mean();
        inv_sigma(i) = 1.0 / std::sqrt(var + eps);
        v.row(i) = (centered * inv_sigma(i)).matrix();
    }
    Var out = tape_of(a).make(std::move(v), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out, inv_sigma, cols]() {
            for (int i = 0; i < out->val.rows(); ++i) {
                Eigen::ArrayXd xhat = out->val.row(i).array();
                Eigen::ArrayXd dy = out->grad.row(i).array();
                double mean_dy = dy.mean();
                double mean_dy_xhat = (dy * xhat).mean();
                g(a).row(i).array() +=
                    inv_sigma(i) * (dy - mean_dy - xhat * mean_dy_xhat);
            }
        };
    return out;
}

Var concat_cols(const std::vector<Var>& parts) {
    int rows = static_cast<int>(parts.front()->val.rows());
    int cols = 0;
    bool req = false;
    for (Var p : parts) {
        cols += static_cast<int>(p->val.cols());
        req = req || p->requires_grad;
    }
    Mat v(rows, cols);
    int off = 0;
    for (Var p : parts) {
        v.middleCols(off, p->val.cols()) = p->val;
        off += static_cast<int>(p->val.cols());
    }
    std::vector<Var> inputs = parts;
    Var out = tape_of(parts.front()).make(std::move(v), req);
    if (out->requires_grad)
        out->back = [inputs, out]() {
            int off = 0;
            for (Var p : inputs) {
                if (p->requires_grad)
                    g(p) += out->grad.middleCols(off, p->val.cols());
                off += static_cast<int>(p->val.cols());
            }
        };
    return out;
}

Var slice_cols(Var a, int start, int len) {
    Var out = tape_of(a).make(a->val.middleCols(start, len), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, start, len, out]() { g(a).middleCols(start, len) += out->grad; };
    return out;
}

Var reshape(Var a, int rows, int cols) {
    // Column-major reinterpretation of the same buffer.
    if (rows * cols != a->val.size()) throw std::runtime_error("reshape: size mismatch");
    Mat v = Eigen::Map<const Mat>(a->val.data(), rows, cols);
    Var out = tape_of(a).make(std::move(v), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() {
            g(a) += Eigen::Map<const Mat>(out->grad.data(), a->val.rows(), a->val.cols());
        };
    return out;
}

Var gather_rows(Var a, const std::vector<int>& indices) {
    Mat v(static_cast<int>(indices.size()), a->val.cols());
    for (size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] < 0)
            v.row(k).setZero();
        else
            v.row(k) = a->val.row(indices[k]);
    }
    Var out = tape_of(a).make(std::move(v), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, indices, out]() {
            for (size_t k = 0; k < indices.size(); ++k)
                if (indices[k] >= 0) g(a).row(indices[k]) += out->grad.row(k);
        };
    return out;
}

Var group_mean_rows(Var a, const std::vector<std::vector<int>>& groups) {
    Mat v = Mat::Zero(static_cast<int>(groups.size()), a->val.cols());
    for (size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].empty()) continue;
        for (int idx : groups[k]) v.row(k) += a->val.row(idx);
        v.row(k) /= static_cast<double>(groups[k].size());
    }
    Var out = tape_of(a).make(std::move(v), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, groups, out]() {
            for (size_t k = 0; k < groups.size(); ++k) {
                if (groups[k].empty()) continue;
                double inv = 1.0 / static_cast<double>(groups[k].size());
                for (int idx : groups[k]) g(a).row(idx) += out->grad.row(k) * inv;
            }
        };
    return out;
}

Var repeat_rows(Var a, int count) {
    Mat v = a->val.row(0).replicate(count, 1);
    Var out = tape_of(a).make(std::move(v), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() { g(a) += out->grad.colwise().sum(); };
    return out;
}

Var sum_all(Var a) {
    Var out = tape_of(a).make(Mat::Constant(1, 1, a->val.sum()), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, out]() { g(a).array() += out->grad(0, 0); };
    return out;
}

Var select(Var a, int i, int j) {
    Var out = tape_of(a).make(Mat::Constant(1, 1, a->val(i, j)), a->requires_grad);
    if (out->requires_grad)
        out->back = [a, i, j, out]() { g(a)(i, j) += out->grad(0, 0); };
    return out;
}

Var sub_bcast(Var a, Var s) {
    Var out = tape_of(a).make((a->val.array() - s->val(0, 0)).matrix(), any_grad({a, s}));
    if (out->requires_grad)
        out->back = [a, s, out]() {
            if (a->requires_grad) g(a) += out->grad;
            if (s->requires_grad) g(s)(0, 0) -= out->grad.sum();
        };
    return out;
}

Var neg(Var a) { return scale(a, -1.0); }

Var log_softmax_col(Var a) {
    double m = a->val.maxCoeff();
    Var shifted = sub_bcast(a, a->tape->constant_scalar(m));
    Var lse = log_(sum_all(exp_(shifted)));
    return sub_bcast(shifted, lse);
}

}  // namespace transit::ad
