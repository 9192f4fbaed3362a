#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace pverify::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    const Eigen::MatrixXd& val() const;
    const Eigen::MatrixXd& grad() const;
    double scalar() const { return val()(0, 0); }
    long rows() const { return val().rows(); }
    long cols() const { return val().cols(); }
    Tape* tape() const { return tape_; }
    int id() const { return id_; }

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Reverse-mode tape over dense double matrices. One tape per forward pass.
class Tape {
public:
    Var constant(Eigen::MatrixXd value);
    Var leaf(Eigen::MatrixXd value);  // gradient is tracked and readable

    /// Backpropagates from a 1x1 output node.
    void backward(Var output);

    const Eigen::MatrixXd& value(int id) const { return nodes_[id].value; }
    Eigen::MatrixXd& grad(int id);
    size_t size() const { return nodes_.size(); }

    /// back(tape, self_id) accumulates into the parents' grads; null for
    /// constants and leaves.
    int push(Eigen::MatrixXd value, std::function<void(Tape&, int)> back);

private:
    struct Node {
        Eigen::MatrixXd value;
        Eigen::MatrixXd grad;
        bool grad_init = false;
        std::function<void(Tape&, int)> back;
    };
    std::vector<Node> nodes_;
};

// Elementwise and matrix ops. Shapes must agree where not broadcast.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);            // elementwise
Var divide(Var a, Var b);         // elementwise
Var matmul(Var a, Var b);
Var transpose(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

Var add_rowvec(Var x, Var b);     // b is 1 x d, added to every row
Var mul_colvec(Var x, Var c);     // c is n x 1, scales each row
Var div_colvec(Var x, Var c);

Var tanh_(Var a);
Var relu_(Var a);
Var log_(Var a);                  // caller guarantees positive entries
Var exp_(Var a);
Var square_(Var a);
Var sqrt_(Var a);

Var softmax_rows(Var a);          // independent softmax per row

Var sum_all(Var a);               // 1 x 1
Var mean_all(Var a);
Var rowwise_sum(Var a);           // n x 1
Var mean_rows(Var a);             // 1 x d (column means)

Var rows(Var a, long start, long count);
Var cols(Var a, long start, long count);
Var row_gather(Var a, const std::vector<int>& indices);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);

}  // namespace pverify::ad
