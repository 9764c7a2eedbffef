#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sindex {

class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ErrorKind { LogGamma, GaussianSymmetric, GeneralUnimodal };

// Density Q(gamma) exp(gamma t(s)) with unique mode e0.
// gamma is the shape for LogGamma and sigma for GaussianSymmetric.
struct ErrorModel {
    ErrorKind kind = ErrorKind::LogGamma;
    double gamma = 1.0;
    std::function<double(double)> t_fn;
    double e0 = 0.0;
    double log_norm = 0.0;  // log Q(gamma), GeneralUnimodal only

    static ErrorModel log_gamma(double shape);
    static ErrorModel gaussian(double sigma);
    // Normalizing constant is obtained by quadrature.
    static ErrorModel general(std::function<double(double)> t, double e0, double gamma);

    double t(double s) const;
};

struct Deviance {
    double value;
    bool saturated;
};

// d*(u) and its first three derivatives in u.
struct DevianceDerivs {
    double d, d1, d2, d3;
    bool saturated;
};

constexpr double kSaturationResidual = 700.0;
constexpr double kSaturatedDeviance = 1e300;

double density(const ErrorModel& m, double s);
double cdf(const ErrorModel& m, double s);

Deviance deviance(const ErrorModel& m, double y, double a);
Deviance deviance_star(const ErrorModel& m, double u);
DevianceDerivs deviance_derivs(const ErrorModel& m, double u);

// e^u - 1 - u for u <= kSaturationResidual; expm1(u) - u loses digits near 0,
// so the series is used there.
inline double log_gamma_deviance(double u) {
    if (std::abs(u) < 0.2) {
        double term = u * u / 2.0, sum = term;
        for (int k = 3; k <= 13; ++k) {
            term *= u / k;
            sum += term;
        }
        return sum;
    }
    return std::expm1(u) - u;
}

// Residuals s on the left and right of e0 with d*(s) = v.
std::pair<double, double> deviance_level_set(const ErrorModel& m, double v);

std::vector<double> sample_errors(const ErrorModel& m, std::size_t n, std::uint64_t seed);
std::vector<double> sample_errors(const ErrorModel& m, std::size_t n, std::mt19937_64& rng);

}  // namespace sindex
