#pragma once

#include <cstddef>
#include <functional>

#include "sindex/error_models.hpp"

namespace sindex {

enum class LossFamily { TukeyBisquare, ClassicalSquared };

struct LossSpec {
    LossFamily family = LossFamily::TukeyBisquare;
    double alpha = 1.0;

    static LossSpec tukey(double c) { return {LossFamily::TukeyBisquare, c}; }
    static LossSpec classical() { return {LossFamily::ClassicalSquared, 1.0}; }
    bool bounded() const { return family == LossFamily::TukeyBisquare; }
};

constexpr double kTukeyEfficiencyC = 1.6394;
constexpr double kDefaultB = 0.5;

// rho(s) without tuning constant scaling.
double rho(const LossSpec& spec, double s);

struct RhoDerivs {
    double Psi, dPsi, d2Psi;
};
RhoDerivs rho_derivatives(const LossSpec& spec, double s);

// phi = rho(sqrt(d*(u))/alpha); psi, chi, chi1 are its first three
// derivatives in the fitted value a, evaluated at residual u = y - a.
struct Scores {
    double phi, psi, chi, chi1;
};
Scores scores_star(const LossSpec& spec, const ErrorModel& m, double u);

double phi_star(const LossSpec& spec, const ErrorModel& m, double u);
double psi_star(const LossSpec& spec, const ErrorModel& m, double u);
double chi_star(const LossSpec& spec, const ErrorModel& m, double u);
double chi1_star(const LossSpec& spec, const ErrorModel& m, double u);

inline double phi(const LossSpec& s, const ErrorModel& m, double y, double a) { return phi_star(s, m, y - a); }
inline double psi(const LossSpec& s, const ErrorModel& m, double y, double a) { return psi_star(s, m, y - a); }
inline double chi(const LossSpec& s, const ErrorModel& m, double y, double a) { return chi_star(s, m, y - a); }
inline double chi1(const LossSpec& s, const ErrorModel& m, double y, double a) { return chi1_star(s, m, y - a); }

// Solution s of sum_i w_i rho_T(sqrt(d_i)/s) = b sum_i w_i.
struct ScaleRoot {
    double s;
    bool degenerate;  // all deviances zero or b unattainable; s = 0
};
ScaleRoot tukey_scale_root(const double* d, const double* w, std::size_t n, double b);

// Integral of f against the model density over [lo, hi] with breakpoints
// placed for the log-Gamma left tail.
double integrate_density(const ErrorModel& m, const std::function<double(double)>& f, double lo, double hi);

double s_star(double gamma, double b = kDefaultB);

struct GammaEstimate {
    double gamma;
    bool clamped;
};
GammaEstimate s_star_inverse(double s, double b = kDefaultB);

constexpr double kGammaMin = 0.05;
constexpr double kGammaMax = 500.0;

double efficiency(double c, double gamma);

struct Calibration {
    double c;
    double efficiency;
    bool floor_binds;
    bool unreachable;
};
Calibration calibrate_tuning(double gamma, double target_eff, double s_floor);

}  // namespace sindex
