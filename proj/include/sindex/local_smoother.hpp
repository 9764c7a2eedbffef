#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sindex/error_models.hpp"
#include "sindex/robust_loss.hpp"

namespace sindex {

struct Dataset {
    Eigen::MatrixXd X;  // n x q
    Eigen::VectorXd y;
    std::size_t n() const { return static_cast<std::size_t>(y.size()); }
    std::size_t q() const { return static_cast<std::size_t>(X.cols()); }
};

enum class KernelKind { Epanechnikov, Gaussian };

struct KernelSpec {
    KernelKind kind = KernelKind::Epanechnikov;
    double h = 0.1;
};

double kernel_value(KernelKind k, double t);
double kernel_deriv(KernelKind k, double t);

constexpr double kMinKernelMass = 1e-12;

struct KernelWeights {
    std::vector<double> w;  // normalized
    double raw_mass;        // sum_i K_h(p_i - u)
};
KernelWeights kernel_weights(double u, std::span<const double> proj, const KernelSpec& k);

// Responses with their projections. mass, when non-empty, multiplies each
// kernel weight (reweighted samples).
struct LocalSample {
    std::span<const double> proj;
    std::span<const double> y;
    std::span<const double> mass = {};
};

struct LocalFit {
    double a = 0.0;
    double b = 0.0;
    double weight_mass = 0.0;
    double h_used = 0.0;
    bool converged = false;
};

LocalFit local_m_constant(double u, const LocalSample& s, const KernelSpec& k, const LossSpec& loss,
                          const ErrorModel& m);
LocalFit local_m_linear(double u, const LocalSample& s, const KernelSpec& k, const LossSpec& loss,
                        const ErrorModel& m);

// Weighted objectives, exposed for oracle checks.
double local_constant_objective(double a, double u, const LocalSample& s, const KernelSpec& k,
                                const LossSpec& loss, const ErrorModel& m);
double local_linear_objective(double a, double b, double u, const LocalSample& s, const KernelSpec& k,
                              const LossSpec& loss, const ErrorModel& m);

ScaleRoot local_s_scale(double a, double u, const LocalSample& s, const KernelSpec& k, const ErrorModel& m,
                        double b_const = kDefaultB);

struct LocalSLocation {
    double a;
    double s;
    bool degenerate;
};
LocalSLocation local_s_location(double u, const LocalSample& s, const KernelSpec& k, const ErrorModel& m,
                                double b_const = kDefaultB);

double local_median(double u, const LocalSample& s, const KernelSpec& k);

struct EtaDerivatives {
    double du;
    Eigen::VectorXd dbeta;
    double F;  // (1/n) sum K chi, the curvature denominator
};

// Implicit-function derivatives of the local-constant fit eta_beta(u) at the
// converged value eta_u. mass defaults to 1/n per observation.
EtaDerivatives eta_derivatives(double u, const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k,
                               const LossSpec& loss, const ErrorModel& m, double eta_u,
                               std::span<const double> mass = {});

struct EtaPoint {
    double eta;
    double du;
    Eigen::VectorXd dbeta;
};
// Refit eta_beta(u) and its first derivatives.
EtaPoint eta_point(double u, const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k,
                   const LossSpec& loss, const ErrorModel& m, std::span<const double> mass = {});

struct EtaSecondDerivatives {
    double uu;
    Eigen::VectorXd u_beta;  // d/du of d eta/d beta
    Eigen::VectorXd beta_u;  // d/d beta of d eta/du
    Eigen::MatrixXd beta_beta;
};
EtaSecondDerivatives eta_second_derivatives(double u, const Eigen::VectorXd& beta, const Dataset& data,
                                            const KernelSpec& k, const LossSpec& loss, const ErrorModel& m,
                                            std::span<const double> mass = {});

}  // namespace sindex
