#include "sindex/error_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "sindex/numerics.hpp"

namespace sindex {

namespace {

void check_model(const ErrorModel& m) {
    if (!(m.gamma > 0.0) || !std::isfinite(m.gamma)) throw InputError("invalid input: model parameter must be positive");
    if (m.kind == ErrorKind::GeneralUnimodal && !m.t_fn) throw InputError("invalid input: missing t function");
}

// Unnormalized log density gamma (t(s) - t(e0)) of a general model.
double general_log_kernel(const ErrorModel& m, double s) { return m.gamma * (m.t_fn(s) - m.t_fn(m.e0)); }

std::pair<double, double> general_support(const ErrorModel& m) {
    const double cut = std::log(1e-20);
    double lo = m.e0 - 1.0, hi = m.e0 + 1.0;
    for (int k = 0; k < 60 && general_log_kernel(m, lo) > cut; ++k) lo = m.e0 - 2.0 * (m.e0 - lo);
    for (int k = 0; k < 60 && general_log_kernel(m, hi) > cut; ++k) hi = m.e0 + 2.0 * (hi - m.e0);
    return {lo, hi};
}

}  // namespace

ErrorModel ErrorModel::log_gamma(double shape) {
    ErrorModel m;
    m.kind = ErrorKind::LogGamma;
    m.gamma = shape;
    m.e0 = 0.0;
    check_model(m);
    return m;
}

ErrorModel ErrorModel::gaussian(double sigma) {
    ErrorModel m;
    m.kind = ErrorKind::GaussianSymmetric;
    m.gamma = sigma;
    m.e0 = 0.0;
    check_model(m);
    return m;
}

ErrorModel ErrorModel::general(std::function<double(double)> t, double e0, double gamma) {
    ErrorModel m;
    m.kind = ErrorKind::GeneralUnimodal;
    m.gamma = gamma;
    m.t_fn = std::move(t);
    m.e0 = e0;
    check_model(m);
    auto [lo, hi] = general_support(m);
    double z = integrate([&](double s) { return std::exp(general_log_kernel(m, s)); }, lo, hi, {m.e0}, 1e-12);
    if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("density normalization failed");
    m.log_norm = -std::log(z);
    return m;
}

double ErrorModel::t(double s) const {
    switch (kind) {
    case ErrorKind::LogGamma: return s - std::exp(s);
    case ErrorKind::GaussianSymmetric: return -s * s / (2.0 * gamma * gamma);
    case ErrorKind::GeneralUnimodal: return t_fn(s);
    }
    return 0.0;
}

double density(const ErrorModel& m, double s) {
    if (!std::isfinite(s)) throw InputError("invalid input: non-finite argument");
    check_model(m);
    switch (m.kind) {
    case ErrorKind::LogGamma: {
        // gamma log gamma - lgamma(gamma) + gamma (s - e^s)
        //   = [gamma log gamma - gamma - lgamma(gamma)] - gamma d*(s)
        const double g = m.gamma;
        if (s > kSaturationResidual) return 0.0;
        const double lc = g * std::log(g) - g - std::lgamma(g);
        return std::exp(lc - g * deviance_star(m, s).value);
    }
    case ErrorKind::GaussianSymmetric: {
        const double z = s / m.gamma;
        return std::exp(-0.5 * z * z) / (m.gamma * std::sqrt(2.0 * M_PI));
    }
    case ErrorKind::GeneralUnimodal: return std::exp(m.log_norm + general_log_kernel(m, s));
    }
    return 0.0;
}

double cdf(const ErrorModel& m, double s) {
    check_model(m);
    if (std::isnan(s)) throw InputError("invalid input: NaN argument");
    switch (m.kind) {
    case ErrorKind::LogGamma: {
        if (s > kSaturationResidual) return 1.0;
        const double x = m.gamma * std::exp(s);
        if (x == 0.0) return 0.0;
        return boost::math::gamma_p(m.gamma, x);
    }
    case ErrorKind::GaussianSymmetric: return 0.5 * boost::math::erfc(-s / (m.gamma * std::sqrt(2.0)));
    case ErrorKind::GeneralUnimodal: {
        auto [lo, hi] = general_support(m);
        if (s <= lo) return 0.0;
        if (s >= hi) return 1.0;
        return integrate([&](double v) { return density(m, v); }, lo, s, {m.e0}, 1e-12);
    }
    }
    return 0.0;
}

DevianceDerivs deviance_derivs(const ErrorModel& m, double u) {
    if (!std::isfinite(u)) throw InputError("invalid input: non-finite residual");
    switch (m.kind) {
    case ErrorKind::LogGamma: {
        if (u > kSaturationResidual) return {kSaturatedDeviance, kSaturatedDeviance, kSaturatedDeviance, kSaturatedDeviance, true};
        const double em1 = std::expm1(u);
        const double e = em1 + 1.0;
        const double d = log_gamma_deviance(u);
        return {d, em1, e, e, false};
    }
    case ErrorKind::GaussianSymmetric: {
        const double s2 = m.gamma * m.gamma;
        return {u * u / (2.0 * s2), u / s2, 1.0 / s2, 0.0, false};
    }
    case ErrorKind::GeneralUnimodal: {
        auto t = [&](double s) { return m.t_fn(s); };
        const double sc = std::max(1.0, std::abs(u));
        const double h1 = 1e-5 * sc, h2 = 1e-4 * sc, h3 = 2e-3 * sc;
        const double d = std::max(0.0, t(m.e0) - t(u));
        const double d1 = -(t(u + h1) - t(u - h1)) / (2.0 * h1);
        const double d2 = -(t(u + h2) - 2.0 * t(u) + t(u - h2)) / (h2 * h2);
        const double d3 = -(t(u + 2 * h3) - 2.0 * t(u + h3) + 2.0 * t(u - h3) - t(u - 2 * h3)) / (2.0 * h3 * h3 * h3);
        return {d, d1, d2, d3, false};
    }
    }
    return {0, 0, 0, 0, false};
}

Deviance deviance_star(const ErrorModel& m, double u) {
    if (!std::isfinite(u)) throw InputError("invalid input: non-finite residual");
    switch (m.kind) {
    case ErrorKind::LogGamma: {
        auto dd = deviance_derivs(m, u);
        return {std::max(0.0, dd.d), dd.saturated};
    }
    case ErrorKind::GaussianSymmetric: return {u * u / (2.0 * m.gamma * m.gamma), false};
    case ErrorKind::GeneralUnimodal: return {std::max(0.0, m.t_fn(m.e0) - m.t_fn(u)), false};
    }
    return {0.0, false};
}

Deviance deviance(const ErrorModel& m, double y, double a) {
    if (!std::isfinite(y) || !std::isfinite(a)) throw InputError("invalid input: non-finite argument");
    return deviance_star(m, y - a);
}

std::pair<double, double> deviance_level_set(const ErrorModel& m, double v) {
    if (!(v > 0.0)) return {m.e0, m.e0};
    switch (m.kind) {
    case ErrorKind::GaussianSymmetric: {
        const double r = m.gamma * std::sqrt(2.0 * v);
        return {-r, r};
    }
    case ErrorKind::LogGamma: {
        auto f = [&](double s) { return deviance_star(m, s).value - v; };
        const double hi = std::log1p(v) + 1.0;
        const double right = bracketed_root(f, 0.0, hi, 1e-15);
        const double left = bracketed_root(f, -v - 1.0, 0.0, 1e-15);
        return {left, right};
    }
    case ErrorKind::GeneralUnimodal: {
        auto f = [&](double s) { return deviance_star(m, s).value - v; };
        double lo = m.e0 - 1.0, hi = m.e0 + 1.0;
        for (int k = 0; k < 80 && f(lo) < 0.0; ++k) lo = m.e0 - 2.0 * (m.e0 - lo);
        for (int k = 0; k < 80 && f(hi) < 0.0; ++k) hi = m.e0 + 2.0 * (hi - m.e0);
        return {bracketed_root(f, lo, m.e0, 1e-15), bracketed_root(f, m.e0, hi, 1e-15)};
    }
    }
    return {m.e0, m.e0};
}

std::vector<double> sample_errors(const ErrorModel& m, std::size_t n, std::mt19937_64& rng) {
    check_model(m);
    std::vector<double> out(n);
    switch (m.kind) {
    case ErrorKind::LogGamma: {
        std::gamma_distribution<double> g(m.gamma, 1.0 / m.gamma);
        for (auto& e : out) {
            double v = g(rng);
            e = std::log(std::max(v, std::numeric_limits<double>::min()));
        }
        break;
    }
    case ErrorKind::GaussianSymmetric: {
        std::normal_distribution<double> g(0.0, m.gamma);
        for (auto& e : out) e = g(rng);
        break;
    }
    case ErrorKind::GeneralUnimodal: {
        // Tabulated inverse CDF.
        auto [lo, hi] = general_support(m);
        const int grid = 8001;
        std::vector<double> s(grid), F(grid, 0.0);
        for (int k = 0; k < grid; ++k) s[k] = lo + (hi - lo) * k / (grid - 1);
        for (int k = 1; k < grid; ++k) F[k] = F[k - 1] + 0.5 * (density(m, s[k]) + density(m, s[k - 1])) * (s[k] - s[k - 1]);
        for (auto& f : F) f /= F.back();
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (auto& e : out) {
            const double p = u01(rng);
            auto it = std::lower_bound(F.begin(), F.end(), p);
            std::size_t k = std::clamp<std::size_t>(it - F.begin(), 1, grid - 1);
            const double w = F[k] > F[k - 1] ? (p - F[k - 1]) / (F[k] - F[k - 1]) : 0.5;
            e = s[k - 1] + w * (s[k] - s[k - 1]);
        }
        break;
    }
    }
    return out;
}

std::vector<double> sample_errors(const ErrorModel& m, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_errors(m, n, rng);
}

}  // namespace sindex
