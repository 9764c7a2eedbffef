#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace sindex {

// Adaptive Gauss-Kronrod over [a, b], split at the interior breakpoints.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const std::vector<double>& breaks = {}, double tol = 1e-13);

struct MinResult {
    double x;
    double fx;
    int evals;
};

MinResult brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                         int bits = 30, int max_iter = 200);

// Root of a monotone function bracketed by [lo, hi].
double bracketed_root(const std::function<double(double)>& f, double lo, double hi,
                      double rel_tol = 1e-12, int max_iter = 200);

struct NelderMeadOptions {
    double step = 0.1;
    double f_tol = 1e-12;
    double x_tol = 1e-9;
    int max_evals = 4000;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double fx;
    int evals;
    bool converged;
};

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opt = {});

std::uint64_t splitmix64(std::uint64_t x);

double median(std::vector<double> v);

}  // namespace sindex
