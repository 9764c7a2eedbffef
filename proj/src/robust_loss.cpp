#include "sindex/robust_loss.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "sindex/numerics.hpp"

namespace sindex {

namespace {

// rho(s) = f(s^2); f and its derivatives in v = s^2.
struct FDerivs {
    double f, f1, f2, f3;
};

inline FDerivs f_derivs(LossFamily fam, double v) {
    if (fam == LossFamily::ClassicalSquared) return {v, 1.0, 0.0, 0.0};
    if (v >= 1.0) return {1.0, 0.0, 0.0, 0.0};
    const double w = 1.0 - v;
    return {v * (3.0 - 3.0 * v + v * v), 3.0 * w * w, -6.0 * w, 6.0};
}

inline double tukey_f(double v) { return v >= 1.0 ? 1.0 : v * (3.0 - 3.0 * v + v * v); }

inline double tukey_f1(double v) {
    if (v >= 1.0) return 0.0;
    const double w = 1.0 - v;
    return 3.0 * w * w;
}

double upper_tail(const ErrorModel& m, double s) {
    if (m.kind == ErrorKind::LogGamma) {
        if (s > kSaturationResidual) return 0.0;
        return boost::math::gamma_q(m.gamma, m.gamma * std::exp(s));
    }
    return 1.0 - cdf(m, s);
}

// E rho_T(sqrt(d*(eps))/S) under the log-Gamma model.
double tukey_scale_expectation(const ErrorModel& m, double S) {
    const double S2 = S * S;
    auto [lo, hi] = deviance_level_set(m, S2);
    auto f = [&](double s) { return tukey_f(deviance_star(m, s).value / S2) * density(m, s); };
    return integrate_density(m, f, lo, hi) + cdf(m, lo) + upper_tail(m, hi);
}

}  // namespace

double rho(const LossSpec& spec, double s) {
    const double v = s * s;
    if (spec.family == LossFamily::ClassicalSquared) return v;
    return tukey_f(v);
}

RhoDerivs rho_derivatives(const LossSpec& spec, double s) {
    if (spec.family == LossFamily::ClassicalSquared) return {2.0 * s, 2.0, 0.0};
    if (std::abs(s) >= 1.0) return {0.0, 0.0, 0.0};
    const double s2 = s * s;
    return {6.0 * s - 12.0 * s * s2 + 6.0 * s * s2 * s2, 6.0 - 36.0 * s2 + 30.0 * s2 * s2, -72.0 * s + 120.0 * s * s2};
}

Scores scores_star(const LossSpec& spec, const ErrorModel& m, double u) {
    const DevianceDerivs dd = deviance_derivs(m, u);
    if (dd.saturated) {
        if (spec.bounded()) return {1.0, 0.0, 0.0, 0.0};
        return {kSaturatedDeviance, -kSaturatedDeviance, kSaturatedDeviance, -kSaturatedDeviance};
    }
    const double a2 = spec.alpha * spec.alpha;
    const double v = dd.d / a2;
    const FDerivs f = f_derivs(spec.family, v);
    if (spec.bounded() && v >= 1.0) return {1.0, 0.0, 0.0, 0.0};
    const double p1 = dd.d1 / a2, p2 = dd.d2 / a2, p3 = dd.d3 / a2;
    const double g1 = f.f1 * p1;
    const double g2 = f.f2 * p1 * p1 + f.f1 * p2;
    const double g3 = f.f3 * p1 * p1 * p1 + 3.0 * f.f2 * p1 * p2 + f.f1 * p3;
    return {f.f, -g1, g2, -g3};
}

double phi_star(const LossSpec& spec, const ErrorModel& m, double u) {
    const Deviance d = deviance_star(m, u);
    if (d.saturated) return spec.bounded() ? 1.0 : kSaturatedDeviance;
    const double v = d.value / (spec.alpha * spec.alpha);
    return spec.bounded() ? tukey_f(v) : v;
}

double psi_star(const LossSpec& spec, const ErrorModel& m, double u) { return scores_star(spec, m, u).psi; }
double chi_star(const LossSpec& spec, const ErrorModel& m, double u) { return scores_star(spec, m, u).chi; }
double chi1_star(const LossSpec& spec, const ErrorModel& m, double u) { return scores_star(spec, m, u).chi1; }

ScaleRoot tukey_scale_root(const double* d, const double* w, std::size_t n, double b) {
    double W = 0.0, sup = 0.0, dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        W += w[i];
        if (d[i] > 0.0 && w[i] > 0.0) {
            sup += w[i];
            dmax = std::max(dmax, d[i]);
        }
    }
    const double target = b * W;
    if (!(W > 0.0) || dmax == 0.0 || sup <= target * (1.0 + 1e-12)) return {0.0, true};

    // G(t) = sum w f(d t) is concave and increasing in t = 1/s^2, so Newton
    // started from t = 0 approaches the root monotonically from the left.
    auto G = [&](double t, double& dG) {
        double g = 0.0;
        dG = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = d[i] * t;
            g += w[i] * tukey_f(v);
            dG += w[i] * d[i] * tukey_f1(v);
        }
        return g;
    };
    double t = 0.0;
    bool ok = false;
    for (int it = 0; it < 200; ++it) {
        double dG;
        const double g = G(t, dG);
        const double r = target - g;
        if (std::abs(r) <= 1e-15 * W) {
            ok = true;
            break;
        }
        if (!(dG > 0.0)) break;
        const double tn = t + r / dG;
        if (!(tn > t) && r > 0.0) break;
        const bool small = std::abs(tn - t) <= 1e-15 * tn;
        t = tn;
        if (small) {
            ok = true;
            break;
        }
    }
    if (!ok) {
        double lo = 0.0, hi = 1.0 / dmax, dG;
        while (G(hi, dG) < target) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (G(mid, dG) < target ? lo : hi) = mid;
        }
        t = 0.5 * (lo + hi);
    }
    return {1.0 / std::sqrt(t), false};
}

double integrate_density(const ErrorModel& m, const std::function<double(double)>& f, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    std::vector<double> br{m.e0};
    const double sd = m.kind == ErrorKind::LogGamma ? 1.0 / std::sqrt(m.gamma) : m.gamma;
    for (double k : {0.25, 1.0, 3.0, 6.0}) {
        br.push_back(m.e0 - k * sd);
        br.push_back(m.e0 + k * sd);
    }
    for (double x = 0.25; x < 4096.0; x *= 4.0) {
        br.push_back(m.e0 - x);
        br.push_back(m.e0 + x);
    }
    br.push_back(0.5 * (lo + m.e0));
    br.push_back(0.5 * (hi + m.e0));
    return integrate(f, lo, hi, br, 1e-11);
}

double s_star(double gamma, double b) {
    if (!(gamma > 0.0)) throw InputError("gamma must be positive");
    if (!(b > 0.0 && b < 1.0)) throw InputError("b must lie in (0, 1)");
    const ErrorModel m = ErrorModel::log_gamma(gamma);
    auto h = [&](double logS) { return tukey_scale_expectation(m, std::exp(logS)) - b; };
    double lo = 0.0, hi = 0.0;
    try {
        int k = 0;
        while (h(lo) < 0.0 && k++ < 200) lo -= 1.0;
        k = 0;
        while (h(hi) > 0.0 && k++ < 200) hi += 1.0;
        return std::exp(bracketed_root(h, lo, hi, 1e-14));
    } catch (const NumericalError&) {
        throw NumericalError("calibration failed");
    }
}

GammaEstimate s_star_inverse(double s, double b) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("scale must be positive");
    const double s_lo = s_star(kGammaMax, b), s_hi = s_star(kGammaMin, b);
    if (s >= s_hi) return {kGammaMin, s > s_hi};
    if (s <= s_lo) return {kGammaMax, s < s_lo};
    auto f = [&](double lg) { return s_star(std::exp(lg), b) - s; };
    const double lg = bracketed_root(f, std::log(kGammaMin), std::log(kGammaMax), 1e-13);
    return {std::exp(lg), false};
}

double efficiency(double c, double gamma) {
    if (!(c > 0.0) || !(gamma > 0.0)) throw InputError("c and gamma must be positive");
    const ErrorModel m = ErrorModel::log_gamma(gamma);
    const LossSpec spec = LossSpec::tukey(c);
    auto [lo, hi] = deviance_level_set(m, c * c);
    const double e_chi = integrate_density(m, [&](double s) { return scores_star(spec, m, s).chi * density(m, s); }, lo, hi);
    const double e_psi2 = integrate_density(
        m, [&](double s) { const double p = scores_star(spec, m, s).psi; return p * p * density(m, s); }, lo, hi);
    if (!(e_psi2 > 0.0)) throw NumericalError("calibration failed");
    return e_chi * e_chi / (gamma * e_psi2);
}

Calibration calibrate_tuning(double gamma, double target_eff, double s_floor) {
    if (!(target_eff > 0.0 && target_eff < 1.0)) throw InputError("target efficiency must lie in (0, 1)");
    constexpr double c_max = 100.0, c_min = 0.05;
    const double e_max = efficiency(c_max, gamma);
    if (e_max < target_eff) return {c_max, e_max, false, true};
    double c = c_min;
    if (efficiency(c_min, gamma) < target_eff)
        c = bracketed_root([&](double x) { return efficiency(x, gamma) - target_eff; }, c_min, c_max, 1e-9);
    Calibration out{c, efficiency(c, gamma), false, false};
    if (s_floor > c) {
        out.c = s_floor;
        out.efficiency = efficiency(s_floor, gamma);
        out.floor_binds = true;
    }
    return out;
}

}  // namespace sindex
