#pragma once

#include "lur/common.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace lur::models {

inline constexpr std::size_t kDefaultSvrCap = 5000;

struct SvrParams {
    double C = 1.0;
    double epsilon = 0.1;
    double gamma = 0.1;
    double tolerance = 1e-3;
    std::size_t cap = kDefaultSvrCap;
};

/// Raw dual solution of epsilon-SVR with an RBF kernel. alpha pairs with the
/// upper tube constraint, alpha_star with the lower one; at most one of each
/// pair is nonzero.
struct SvrDual {
    std::vector<double> alpha;
    std::vector<double> alpha_star;
    double bias = 0.0;
    double objective = 0.0; // minimized dual: 1/2 b'Kb + eps sum(a + a*) - y'b, b = a - a*
    double kkt_gap = 0.0;   // maximal violating pair at termination
    long iterations = 0;
};

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma);

/// SMO with second-order working-set selection. `c_per_sample` gives the box
/// bound for both variables of each sample.
SvrDual solve_svr_dual(const Matrix &x, std::span<const double> y, std::span<const double> c_per_sample,
                       double epsilon, double gamma, double tolerance);

/// Dual objective (minimization form) of an arbitrary point, for oracles.
double svr_dual_objective(const Matrix &x, std::span<const double> y, std::span<const double> alpha,
                          std::span<const double> alpha_star, double epsilon, double gamma);

struct SvrModel {
    double gamma = 0.0;
    double bias = 0.0;
    Matrix support;           // one row per support vector
    std::vector<double> coef; // alpha - alpha_star per support vector

    double predict(std::span<const double> x) const;
};

struct SvrFit {
    SvrModel model;
    SvrDual dual;
};

/// Throws ValidationError when n exceeds `p.cap`.
SvrFit fit_svr(const Matrix &x, std::span<const double> y, const SvrParams &p);

} // namespace lur::models
