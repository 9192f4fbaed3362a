#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pverify/autodiff.hpp"

namespace pverify {

/// Named parameter tensors plus their optimizer state.
class ParamStore {
public:
    Eigen::MatrixXd& create(const std::string& name, long rows, long cols);
    Eigen::MatrixXd& at(const std::string& name);
    const Eigen::MatrixXd& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) > 0; }
    const std::map<std::string, Eigen::MatrixXd>& all() const { return params_; }
    std::map<std::string, Eigen::MatrixXd>& all() { return params_; }

    /// FNV-1a over the raw bytes of the named tensors, in sorted name order.
    uint64_t hash(const std::vector<std::string>& names) const;
    uint64_t hash_all() const;

private:
    std::map<std::string, Eigen::MatrixXd> params_;
};

/// Binds store parameters onto a tape as leaves, once per name, and collects
/// their gradients after backward.
class TapeBinder {
public:
    TapeBinder(ad::Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

    ad::Var operator()(const std::string& name);

    /// Gradients of every parameter bound on this tape (call after backward).
    std::map<std::string, Eigen::MatrixXd> grads() const;

private:
    ad::Tape& tape_;
    const ParamStore& store_;
    std::map<std::string, ad::Var> bound_;
};

/// Adaptive moment estimation. Steps only the parameters present in the
/// gradient map, so parameters untouched by a pass keep their state.
class AdamOptimizer {
public:
    AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// lr_for maps a parameter name to its learning rate (parameter groups).
    void step(ParamStore& store,
              const std::map<std::string, Eigen::MatrixXd>& grads,
              const std::function<double(const std::string&)>& lr_for);

    void reset(const std::string& name) { state_.erase(name); }

private:
    struct State {
        Eigen::MatrixXd m, v;
        long t = 0;
    };
    double beta1_, beta2_, eps_;
    std::map<std::string, State> state_;
};

/// Deterministic N(0, stddev) initialization.
void init_normal(Eigen::MatrixXd& m, std::mt19937& rng, double stddev = 0.02);

}  // namespace pverify
