#include "pverify/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace pverify {

Eigen::MatrixXd& ParamStore::create(const std::string& name, long rows, long cols) {
    auto [it, inserted] = params_.emplace(name, Eigen::MatrixXd::Zero(rows, cols));
    if (!inserted) throw std::logic_error("duplicate parameter " + name);
    return it->second;
}

Eigen::MatrixXd& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::logic_error("unknown parameter " + name);
    return it->second;
}

const Eigen::MatrixXd& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::logic_error("unknown parameter " + name);
    return it->second;
}

namespace {
uint64_t fnv1a_bytes(uint64_t h, const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}
}  // namespace

uint64_t ParamStore::hash(const std::vector<std::string>& names) const {
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    uint64_t h = 1469598103934665603ull;
    for (const auto& name : sorted) {
        h = fnv1a_bytes(h, name.data(), name.size());
        const auto& m = at(name);
        h = fnv1a_bytes(h, m.data(), sizeof(double) * m.size());
    }
    return h;
}

uint64_t ParamStore::hash_all() const {
    std::vector<std::string> names;
    for (const auto& [name, _] : params_) names.push_back(name);
    return hash(names);
}

ad::Var TapeBinder::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    ad::Var v = tape_.leaf(store_.at(name));
    bound_.emplace(name, v);
    return v;
}

std::map<std::string, Eigen::MatrixXd> TapeBinder::grads() const {
    std::map<std::string, Eigen::MatrixXd> out;
    for (const auto& [name, var] : bound_) out.emplace(name, var.grad());
    return out;
}

void AdamOptimizer::step(ParamStore& store,
                         const std::map<std::string, Eigen::MatrixXd>& grads,
                         const std::function<double(const std::string&)>& lr_for) {
    for (const auto& [name, g] : grads) {
        Eigen::MatrixXd& p = store.at(name);
        State& s = state_[name];
        if (s.t == 0) {
            s.m = Eigen::MatrixXd::Zero(p.rows(), p.cols());
            s.v = Eigen::MatrixXd::Zero(p.rows(), p.cols());
        }
        ++s.t;
        s.m = beta1_ * s.m + (1.0 - beta1_) * g;
        s.v = (beta2_ * s.v.array() + (1.0 - beta2_) * g.array().square()).matrix();
        double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
        double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
        Eigen::ArrayXXd m_hat = s.m.array() / bc1;
        Eigen::ArrayXXd v_hat = s.v.array() / bc2;
        p.array() -= lr_for(name) * m_hat / (v_hat.sqrt() + eps_);
    }
}

void init_normal(Eigen::MatrixXd& m, std::mt19937& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (long c = 0; c < m.cols(); ++c)
        for (long r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

}  // namespace pverify
