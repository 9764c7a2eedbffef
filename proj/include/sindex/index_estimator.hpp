#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sindex/local_smoother.hpp"

namespace sindex {

enum class TauMode { Indicator, DistanceTimesIndicator };

struct WeightFn {
    Eigen::VectorXd center;
    double radius = 1.0;
    TauMode mode = TauMode::Indicator;

    // Center (1/2, ..., 1/2) and radius 0.4 sqrt(log log n).
    static WeightFn standard(std::size_t q, std::size_t n, TauMode mode = TauMode::Indicator);
    static WeightFn none(std::size_t q);
};

double trimming_radius(std::size_t n);
double weight_tau(const WeightFn& w, const Eigen::VectorXd& x);
std::vector<double> tau_weights(const WeightFn& w, const Eigen::MatrixXd& X);

Eigen::VectorXd theta_to_beta(const Eigen::VectorXd& theta_star);
Eigen::VectorXd beta_to_theta(const Eigen::VectorXd& beta);
// Unit vector with positive last component.
Eigen::VectorXd canonical_sign(const Eigen::VectorXd& beta);

// Delta_n(beta) = sum_i m_i phi(y_i, eta_beta(beta'x_i)) tau_i with m_i = 1/n
// unless masses are given; the masses also enter every local fit.
double profile_objective(const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k,
                         const LossSpec& loss, const ErrorModel& m, std::span<const double> tau,
                         std::span<const double> mass = {});

struct SphereOptions {
    int grid = 64;       // q = 2
    int restarts = 8;    // q > 2
    std::uint64_t seed = 1;
    double angle_tol = 1e-7;
};

struct SphereResult {
    Eigen::VectorXd beta;
    double value;
    bool flagged;  // no restart improved on the initial point
    int evals;
};

SphereResult optimize_sphere(const std::function<double(const Eigen::VectorXd&)>& f, std::size_t q,
                             const SphereOptions& opt, const std::optional<Eigen::VectorXd>& init = std::nullopt);

// Solution of sum_i w_i rho_T(sqrt(d_i)/s) = b sum_i w_i.
ScaleRoot global_scale(std::span<const double> deviances, std::span<const double> tau, double b_const = kDefaultB);

struct NuisanceFit {
    double gamma_hat = 0.0;
    bool gamma_clamped = false;
    double s_n = 0.0;
    double c_hat = 0.0;
    double c_calibrated = 0.0;
    bool floor_binds = false;
    Eigen::VectorXd beta_tilde;
};

NuisanceFit fit_initial_s(const Dataset& data, const KernelSpec& k, const ErrorModel& m, std::span<const double> tau,
                          double b_const = kDefaultB, double target_eff = 0.90, const SphereOptions& sphere = {});

// S-scale sigma(beta) of the initial fit, exposed for tests.
ScaleRoot initial_scale(const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k, const ErrorModel& m,
                        std::span<const double> tau, double b_const = kDefaultB);

struct FitConfig {
    LossFamily family = LossFamily::TukeyBisquare;
    ErrorModel model = ErrorModel::log_gamma(1.0);  // only the deviance is used
    KernelKind kernel = KernelKind::Epanechnikov;
    double h1 = 0.15;
    double h2 = 0.15;
    std::optional<WeightFn> tau;             // default WeightFn::standard
    std::optional<NuisanceFit> nuisance;     // computed when absent (robust only)
    std::optional<double> fixed_alpha;       // bypasses the nuisance fit
    std::optional<double> nuisance_h;        // bandwidth of the initial S-fit; h1 by default
    double target_eff = 0.90;
    double b_const = kDefaultB;
    SphereOptions sphere;
    std::optional<Eigen::VectorXd> init;
};

struct IndexFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd theta_star;
    double h1 = 0.0, h2 = 0.0;
    double alpha_hat = 1.0;
    std::optional<double> gamma_hat;
    std::optional<double> sigma_hat;
    double objective = 0.0;
    bool sphere_flagged = false;
    LossSpec loss;
    ErrorModel model;
    KernelKind kernel = KernelKind::Epanechnikov;
    WeightFn tau;
    std::optional<NuisanceFit> nuisance;
    Dataset data;

    // Step 3 local-linear link estimate.
    double eta(double u) const;
    // Step 1 local-constant link estimate at the fitted index.
    double eta_step1(double u) const;
    std::vector<double> projections() const;
};

IndexFit fit_three_step(const Dataset& data, const FitConfig& cfg);

struct SymmetricConfig {
    KernelKind kernel = KernelKind::Epanechnikov;
    double h1 = 0.15;
    double h2 = 0.15;
    double c0 = 1.54764;
    double c1 = 4.685;
    double b_const = kDefaultB;
    std::optional<WeightFn> tau;
    SphereOptions sphere;
};

IndexFit fit_symmetric_mm(const Dataset& data, const SymmetricConfig& cfg);

struct CovarianceResult {
    Eigen::MatrixXd B1;            // (q-1)x(q-1), canonical frame
    Eigen::MatrixXd Sigma1;        // without the factor 4
    Eigen::MatrixXd cov_tangent;   // B1^-1 Sigma1 B1^-T / n
    Eigen::MatrixXd cov_beta;      // q x q, original coordinates
    Eigen::MatrixXd cov_theta;     // delta method
    Eigen::MatrixXd cov_theta_literal;  // 4 Sigma1 and division by beta_q^2
    Eigen::MatrixXd rotation;
};

CovarianceResult asymptotic_covariance(const IndexFit& fit);

// Householder R with R beta = e_q.
Eigen::MatrixXd canonical_rotation(const Eigen::VectorXd& beta);

}  // namespace sindex
