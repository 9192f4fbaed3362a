#include "pverify/autodiff.hpp"

#include <stdexcept>

namespace pverify::ad {

const Eigen::MatrixXd& Var::val() const { return tape_->value(id_); }
const Eigen::MatrixXd& Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Eigen::MatrixXd value) {
    return Var(this, push(std::move(value), nullptr));
}

Var Tape::leaf(Eigen::MatrixXd value) {
    return Var(this, push(std::move(value), nullptr));
}

int Tape::push(Eigen::MatrixXd value, std::function<void(Tape&, int)> back) {
    nodes_.push_back(Node{std::move(value), {}, false, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
}

Eigen::MatrixXd& Tape::grad(int id) {
    Node& n = nodes_[id];
    if (!n.grad_init) {
        n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
        n.grad_init = true;
    }
    return n.grad;
}

void Tape::backward(Var output) {
    if (output.val().size() != 1)
        throw std::logic_error("backward requires a scalar output");
    for (auto& n : nodes_) n.grad_init = false;
    grad(output.id())(0, 0) = 1.0;
    for (int i = output.id(); i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.back && n.grad_init) n.back(*this, i);
    }
}

namespace {
void check_same_tape(Var a, Var b) {
    if (a.tape() != b.tape())
        throw std::logic_error("operands belong to different tapes");
}
}  // namespace

Var add(Var a, Var b) {
    check_same_tape(a, b);
    Tape* t = a.tape();
    int aid = a.id(), bid = b.id();
    return Var(t, t->push(a.val() + b.val(), [aid, bid](Tape& tp, int self) {
        tp.grad(aid) += tp.grad(self);
        tp.grad(bid) += tp.grad(self);
    }));
}

Var sub(Var a, Var b) {
    check_same_tape(a, b);
    Tape* t = a.tape();
    int aid = a.id(), bid = b.id();
    return Var(t, t->push(a.val() - b.val(), [aid, bid](Tape& tp, int self) {
        tp.grad(aid) += tp.grad(self);
        tp.grad(bid) -= tp.grad(self);
    }));
}

Var mul(Var a, Var b) {
    check_same_tape(a, b);
    Tape* t = a.tape();
    int aid = a.id(), bid = b.id();
    return Var(t, t->push(a.val().cwiseProduct(b.val()), [aid, bid](Tape& tp, int self) {
        tp.grad(aid) += tp.grad(self).cwiseProduct(tp.value(bid));
        tp.grad(bid) += tp.grad(self).cwiseProduct(tp.value(aid));
    }));
}

Var divide(Var a, Var b) {
    check_same_tape(a, b);
    Tape* t = a.tape();
    int aid = a.id(), bid = b.id();
    return Var(t, t->push(a.val().cwiseQuotient(b.val()), [aid, bid](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        const auto& bv = tp.value(bid);
        tp.grad(aid) += g.cwiseQuotient(bv);
        tp.grad(bid) -= g.cwiseProduct(tp.value(aid)).cwiseQuotient(bv.cwiseProduct(bv));
    }));
}

Var matmul(Var a, Var b) {
    check_same_tape(a, b);
    Tape* t = a.tape();
    int aid = a.id(), bid = b.id();
    return Var(t, t->push(a.val() * b.val(), [aid, bid](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        tp.grad(aid) += g * tp.value(bid).transpose();
        tp.grad(bid) += tp.value(aid).transpose() * g;
    }));
}

Var transpose(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(a.val().transpose(), [aid](Tape& tp, int self) {
        tp.grad(aid) += tp.grad(self).transpose();
    }));
}

Var scale(Var a, double s) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(a.val() * s, [aid, s](Tape& tp, int self) {
        tp.grad(aid) += tp.grad(self) * s;
    }));
}

Var add_scalar(Var a, double s) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(Eigen::MatrixXd(a.val().array() + s), [aid](Tape& tp, int self) {
        tp.grad(aid) += tp.grad(self);
    }));
}

Var neg(Var a) { return scale(a, -1.0); }

Var add_rowvec(Var x, Var b) {
    check_same_tape(x, b);
    Tape* t = x.tape();
    int xid = x.id(), bid = b.id();
    Eigen::MatrixXd v = x.val();
    v.rowwise() += Eigen::RowVectorXd(b.val().row(0));
    return Var(t, t->push(std::move(v), [xid, bid](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        tp.grad(xid) += g;
        tp.grad(bid).row(0) += g.colwise().sum();
    }));
}

Var mul_colvec(Var x, Var c) {
    check_same_tape(x, c);
    Tape* t = x.tape();
    int xid = x.id(), cid = c.id();
    Eigen::MatrixXd v = (x.val().array().colwise() * c.val().col(0).array()).matrix();
    return Var(t, t->push(std::move(v), [xid, cid](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        tp.grad(xid) += (g.array().colwise() * tp.value(cid).col(0).array()).matrix();
        tp.grad(cid).col(0) +=
            g.cwiseProduct(tp.value(xid)).rowwise().sum();
    }));
}

Var div_colvec(Var x, Var c) {
    check_same_tape(x, c);
    Tape* t = x.tape();
    int xid = x.id(), cid = c.id();
    Eigen::MatrixXd v = (x.val().array().colwise() / c.val().col(0).array()).matrix();
    return Var(t, t->push(std::move(v), [xid, cid](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        Eigen::ArrayXd cv = tp.value(cid).col(0).array();
        tp.grad(xid) += (g.array().colwise() / cv).matrix();
        tp.grad(cid).col(0) -=
            ((g.cwiseProduct(tp.value(xid)).rowwise().sum().array()) / (cv * cv)).matrix();
    }));
}

Var tanh_(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(Eigen::MatrixXd(a.val().array().tanh()), [aid](Tape& tp, int self) {
        const auto& y = tp.value(self);
        tp.grad(aid).array() += tp.grad(self).array() * (1.0 - y.array().square());
    }));
}

Var relu_(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(a.val().cwiseMax(0.0), [aid](Tape& tp, int self) {
        tp.grad(aid).array() +=
            tp.grad(self).array() * (tp.value(aid).array() > 0.0).cast<double>();
    }));
}

Var log_(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(Eigen::MatrixXd(a.val().array().log()), [aid](Tape& tp, int self) {
        tp.grad(aid).array() += tp.grad(self).array() / tp.value(aid).array();
    }));
}

Var exp_(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(Eigen::MatrixXd(a.val().array().exp()), [aid](Tape& tp, int self) {
        tp.grad(aid).array() += tp.grad(self).array() * tp.value(self).array();
    }));
}

Var square_(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(Eigen::MatrixXd(a.val().array().square()), [aid](Tape& tp, int self) {
        tp.grad(aid).array() += 2.0 * tp.grad(self).array() * tp.value(aid).array();
    }));
}

Var sqrt_(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(Eigen::MatrixXd(a.val().array().sqrt()), [aid](Tape& tp, int self) {
        tp.grad(aid).array() += 0.5 * tp.grad(self).array() / tp.value(self).array();
    }));
}

Var softmax_rows(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    Eigen::MatrixXd y = a.val();
    for (long r = 0; r < y.rows(); ++r) {
        Eigen::ArrayXd row = y.row(r).transpose().array();
        row -= row.maxCoeff();
        row = row.exp();
        y.row(r) = (row / row.sum()).matrix().transpose();
    }
    return Var(t, t->push(std::move(y), [aid](Tape& tp, int self) {
        const auto& y = tp.value(self);
        const auto& g = tp.grad(self);
        auto& ga = tp.grad(aid);
        for (long r = 0; r < y.rows(); ++r) {
            double dot = g.row(r).dot(y.row(r));
            ga.row(r).array() += (g.row(r).array() - dot) * y.row(r).array();
        }
    }));
}

Var sum_all(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = a.val().sum();
    return Var(t, t->push(std::move(v), [aid](Tape& tp, int self) {
        tp.grad(aid).array() += tp.grad(self)(0, 0);
    }));
}

Var mean_all(Var a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.val().size()));
}

Var rowwise_sum(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(a.val().rowwise().sum(), [aid](Tape& tp, int self) {
        Eigen::VectorXd g = tp.grad(self).col(0);
        tp.grad(aid).colwise() += g;
    }));
}

Var mean_rows(Var a) {
    Tape* t = a.tape();
    int aid = a.id();
    double inv_n = 1.0 / static_cast<double>(a.val().rows());
    return Var(t, t->push(a.val().colwise().mean(), [aid, inv_n](Tape& tp, int self) {
        Eigen::RowVectorXd g = tp.grad(self).row(0) * inv_n;
        tp.grad(aid).rowwise() += g;
    }));
}

Var rows(Var a, long start, long count) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(a.val().middleRows(start, count),
                          [aid, start, count](Tape& tp, int self) {
                              tp.grad(aid).middleRows(start, count) += tp.grad(self);
                          }));
}

Var cols(Var a, long start, long count) {
    Tape* t = a.tape();
    int aid = a.id();
    return Var(t, t->push(a.val().middleCols(start, count),
                          [aid, start, count](Tape& tp, int self) {
                              tp.grad(aid).middleCols(start, count) += tp.grad(self);
                          }));
}

Var row_gather(Var a, const std::vector<int>& indices) {
    Tape* t = a.tape();
    int aid = a.id();
    Eigen::MatrixXd v(static_cast<long>(indices.size()), a.val().cols());
    for (size_t i = 0; i < indices.size(); ++i) v.row(i) = a.val().row(indices[i]);
    return Var(t, t->push(std::move(v), [aid, indices](Tape& tp, int self) {
        for (size_t i = 0; i < indices.size(); ++i)
            tp.grad(aid).row(indices[i]) += tp.grad(self).row(i);
    }));
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::logic_error("concat_rows of nothing");
    Tape* t = parts[0].tape();
    long total = 0;
    for (const auto& p : parts) total += p.rows();
    Eigen::MatrixXd v(total, parts[0].cols());
    std::vector<int> ids;
    std::vector<long> offsets;
    long off = 0;
    for (const auto& p : parts) {
        v.middleRows(off, p.rows()) = p.val();
        ids.push_back(p.id());
        offsets.push_back(off);
        off += p.rows();
    }
    return Var(t, t->push(std::move(v), [ids, offsets](Tape& tp, int self) {
        for (size_t i = 0; i < ids.size(); ++i) {
            long n = tp.value(ids[i]).rows();
            tp.grad(ids[i]) += tp.grad(self).middleRows(offsets[i], n);
        }
    }));
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::logic_error("concat_cols of nothing");
    Tape* t = parts[0].tape();
    long total = 0;
    for (const auto& p : parts) total += p.cols();
    Eigen::MatrixXd v(parts[0].rows(), total);
    std::vector<int> ids;
    std::vector<long> offsets;
    long off = 0;
    for (const auto& p : parts) {
        v.middleCols(off, p.cols()) = p.val();
        ids.push_back(p.id());
        offsets.push_back(off);
        off += p.cols();
    }
    return Var(t, t->push(std::move(v), [ids, offsets](Tape& tp, int self) {
        for (size_t i = 0; i < ids.size(); ++i) {
            long n = tp.value(ids[i]).cols();
            tp.grad(ids[i]) += tp.grad(self).middleCols(offsets[i], n);
        }
    }));
}

}  // namespace pverify::ad
