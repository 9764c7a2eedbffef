#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sindex/index_estimator.hpp"

namespace sindex {

// Derivation-consistent formulas use chi-sum denominators and the symmetric
// second-derivative matrix; Literal uses the psi-sum D_n with K_h scaling,
// the displayed V and no tangent-space correction.
enum class EifMode { Consistent, Literal };

struct CanonicalData {
    Dataset data;       // rows x -> R x
    Eigen::MatrixXd R;  // R beta = e_q
};
CanonicalData rotate_to_canonical(const Dataset& data, const Eigen::VectorXd& beta);

// Point-free ingredients of the local fit at (beta, u).
struct LocalEifTerms {
    double u = 0.0, h = 0.0;
    double eta = 0.0, du = 0.0;
    Eigen::VectorXd dbeta;
    double B = 0.0;     // (1/n) sum K chi
    double E = 0.0;     // (1/n) sum K' psi
    double Echi = 0.0;  // (1/n) sum K' chi
    double F1 = 0.0;    // (1/n) sum K chi1
    double D = 0.0;     // (1/n) sum K_h psi
    Eigen::VectorXd G;     // (1/n) sum K' psi x
    Eigen::VectorXd gchi;  // (1/n) sum K' chi x
};
LocalEifTerms local_eif_terms(double u, const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k,
                              const LossSpec& loss, const ErrorModel& m);

struct EtaInfluence {
    double eta;
    double du;
    Eigen::VectorXd dbeta;
};
EtaInfluence eta_influence(const LocalEifTerms& t, const Eigen::VectorXd& beta, double y0, const Eigen::VectorXd& x0,
                           KernelKind kernel, const LossSpec& loss, const ErrorModel& m,
                           EifMode mode = EifMode::Consistent);

double eif_eta(double u, const Eigen::VectorXd& beta, const Dataset& data, double y0, const Eigen::VectorXd& x0,
               const KernelSpec& k, const LossSpec& loss, const ErrorModel& m);
double eif_eta_du(double u, const Eigen::VectorXd& beta, const Dataset& data, double y0, const Eigen::VectorXd& x0,
                  const KernelSpec& k, const LossSpec& loss, const ErrorModel& m);
Eigen::VectorXd eif_eta_dbeta(double u, const Eigen::VectorXd& beta, const Dataset& data, double y0,
                              const Eigen::VectorXd& x0, const KernelSpec& k, const LossSpec& loss,
                              const ErrorModel& m);

struct EifReport {
    double y0 = 0.0;
    Eigen::VectorXd x0;
    Eigen::VectorXd eif_beta;       // original coordinates
    Eigen::VectorXd eif_canonical;  // last coordinate exactly 0
    Eigen::VectorXd ell;
    Eigen::MatrixXd M;
    double tangent_shift = 0.0;     // beta' grad Delta_n
    double solver_residual = 0.0;
    Eigen::MatrixXd rotation;
};

// Everything in the index influence that does not depend on the added point.
class EifContext {
public:
    EifContext(const IndexFit& fit, EifMode mode = EifMode::Consistent);
    EifReport evaluate(double y0, const Eigen::VectorXd& x0) const;
    const Eigen::MatrixXd& M() const { return M_; }
    const Eigen::MatrixXd& rotation() const { return R_; }

private:
    IndexFit fit_;
    EifMode mode_;
    Eigen::MatrixXd R_;
    CanonicalData rot_;
    Eigen::VectorXd eq_;
    std::vector<double> tau_;
    std::vector<LocalEifTerms> terms_;
    std::vector<double> psi_, chi_;
    std::vector<Eigen::VectorXd> nu_;
    Eigen::MatrixXd M_;
    double c_ = 0.0;
};

EifReport eif_beta(const IndexFit& fit, double y0, const Eigen::VectorXd& x0, EifMode mode = EifMode::Consistent);

struct EifCell {
    double y0;
    Eigen::VectorXd x0;
    Eigen::VectorXd eif;  // empty when flagged
    double norm;
    bool flagged;
};
std::vector<EifCell> eif_map(const IndexFit& fit, const std::vector<double>& y_grid,
                             const std::vector<Eigen::VectorXd>& x_grid, EifMode mode = EifMode::Consistent);

// Finite-eps reweighting oracle for q = 2: beta at masses (1 - eps)/n on the
// data and eps on (y0, x0), found as the root of the angular derivative of
// the reweighted profile objective near theta_init.
double reweighted_angle(const IndexFit& fit, double y0, const Eigen::VectorXd& x0, double eps, double theta_init);
Eigen::VectorXd eif_beta_oracle(const IndexFit& fit, double y0, const Eigen::VectorXd& x0, double eps = 1e-4);

// Fit with beta replaced by the exact stationary point of the profile
// objective (q = 2), so first-order conditions hold to rounding.
IndexFit polish_stationary(const IndexFit& fit);

}  // namespace sindex
