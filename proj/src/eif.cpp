#include "sindex/eif.hpp"

#include <cmath>

#include "sindex/numerics.hpp"

namespace sindex {

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::Vector2d unit_angle(double th) { return {std::cos(th), std::sin(th)}; }

}  // namespace

CanonicalData rotate_to_canonical(const Dataset& data, const Eigen::VectorXd& beta) {
    if (std::abs(beta.norm() - 1.0) > 1e-8) throw InputError("invalid input: beta must be a unit vector");
    const Eigen::MatrixXd R = canonical_rotation(beta);
    return {Dataset{data.X * R.transpose(), data.y}, R};
}

LocalEifTerms local_eif_terms(double u, const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k,
                              const LossSpec& loss, const ErrorModel& m) {
    const std::size_t n = data.n();
    const Eigen::Index q = static_cast<Eigen::Index>(data.q());
    const Eigen::VectorXd proj = data.X * beta;
    const LocalFit fit = local_m_constant(u, LocalSample{as_span(proj), as_span(data.y)}, k, loss, m);
    LocalEifTerms t;
    t.u = u;
    t.h = fit.h_used;
    t.eta = fit.a;
    t.G = Eigen::VectorXd::Zero(q);
    t.gchi = Eigen::VectorXd::Zero(q);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ti = (proj(i) - u) / t.h;
        const double kv = kernel_value(k.kind, ti), kd = kernel_deriv(k.kind, ti);
        if (kv == 0.0 && kd == 0.0) continue;
        const Scores sc = scores_star(loss, m, data.y(i) - t.eta);
        t.B += inv_n * kv * sc.chi;
        t.E += inv_n * kd * sc.psi;
        t.Echi += inv_n * kd * sc.chi;
        t.F1 += inv_n * kv * sc.chi1;
        t.D += inv_n * kv / t.h * sc.psi;
        t.G += (inv_n * kd * sc.psi) * data.X.row(i).transpose();
        t.gchi += (inv_n * kd * sc.chi) * data.X.row(i).transpose();
    }
    if (!(std::abs(t.B) >= 1e-10)) throw NumericalError("degenerate curvature");
    t.du = t.E / (t.h * t.B);
    t.dbeta = -t.G / (t.h * t.B);
    return t;
}

EtaInfluence eta_influence(const LocalEifTerms& t, const Eigen::VectorXd& beta, double y0, const Eigen::VectorXd& x0,
                           KernelKind kernel, const LossSpec& loss, const ErrorModel& m, EifMode mode) {
    const double h = t.h;
    const double t0 = (beta.dot(x0) - t.u) / h;
    const double K0 = kernel_value(kernel, t0), K0d = kernel_deriv(kernel, t0);
    EtaInfluence out{0.0, 0.0, Eigen::VectorXd::Zero(x0.size())};
    if (K0 == 0.0 && K0d == 0.0) return out;
    const Scores s0 = scores_star(loss, m, y0 - t.eta);
    if (mode == EifMode::Consistent) {
        out.eta = -K0 * s0.psi / t.B;
        const double curv = K0 * s0.chi + t.F1 * out.eta;
        out.du = ((K0d * s0.psi + t.Echi * out.eta) / h - t.du * curv) / t.B;
        out.dbeta = -(K0d * s0.psi * x0 + t.gchi * out.eta) / (h * t.B) - t.dbeta * (curv / t.B);
    } else {
        if (!(std::abs(t.D) >= 1e-300)) throw NumericalError("degenerate curvature");
        const double Kh = K0 / h, Khd = K0d / h, D = t.D;
        const double Fn = t.B / h, En = t.E / h;
        out.eta = -Kh * s0.psi / D;
        out.dbeta = -((Khd * s0.psi / h) * x0 + (Kh * s0.chi) * t.dbeta) / D +
                    (Kh * s0.psi / (D * D)) * (t.G / h + Fn * t.dbeta);
        out.du = (Khd * s0.psi / h - Kh * s0.chi * t.du) / D - Kh * s0.psi / (D * D) * (Fn * t.du - En / h);
    }
    return out;
}

double eif_eta(double u, const Eigen::VectorXd& beta, const Dataset& data, double y0, const Eigen::VectorXd& x0,
               const KernelSpec& k, const LossSpec& loss, const ErrorModel& m) {
    return eta_influence(local_eif_terms(u, beta, data, k, loss, m), beta, y0, x0, k.kind, loss, m).eta;
}

double eif_eta_du(double u, const Eigen::VectorXd& beta, const Dataset& data, double y0, const Eigen::VectorXd& x0,
                  const KernelSpec& k, const LossSpec& loss, const ErrorModel& m) {
    return eta_influence(local_eif_terms(u, beta, data, k, loss, m), beta, y0, x0, k.kind, loss, m).du;
}

Eigen::VectorXd eif_eta_dbeta(double u, const Eigen::VectorXd& beta, const Dataset& data, double y0,
                              const Eigen::VectorXd& x0, const KernelSpec& k, const LossSpec& loss,
                              const ErrorModel& m) {
    return eta_influence(local_eif_terms(u, beta, data, k, loss, m), beta, y0, x0, k.kind, loss, m).dbeta;
}

EifContext::EifContext(const IndexFit& fit, EifMode mode)
    : fit_(fit), mode_(mode), R_(canonical_rotation(fit.beta)), rot_(rotate_to_canonical(fit.data, fit.beta)) {
    const std::size_t n = fit.data.n();
    const Eigen::Index q = static_cast<Eigen::Index>(fit.data.q());
    eq_ = Eigen::VectorXd::Unit(q, q - 1);
    tau_ = tau_weights(fit.tau, fit.data.X);
    const KernelSpec k1{fit.kernel, fit.h1};
    terms_.resize(n);
    psi_.assign(n, 0.0);
    chi_.assign(n, 0.0);
    nu_.assign(n, Eigen::VectorXd::Zero(q));
    M_ = Eigen::MatrixXd::Zero(q, q);
    for (std::size_t i = 0; i < n; ++i) {
        if (tau_[i] == 0.0) continue;
        const Eigen::VectorXd xi = rot_.data.X.row(i).transpose();
        terms_[i] = local_eif_terms(xi(q - 1), eq_, rot_.data, k1, fit.loss, fit.model);
        const Scores sc = scores_star(fit.loss, fit.model, fit.data.y(i) - terms_[i].eta);
        psi_[i] = sc.psi;
        chi_[i] = sc.chi;
        nu_[i] = terms_[i].dbeta + terms_[i].du * xi;
        const EtaSecondDerivatives sd = eta_second_derivatives(xi(q - 1), eq_, rot_.data, k1, fit.loss, fit.model);
        Eigen::MatrixXd V = sd.beta_beta + sd.uu * xi * xi.transpose();
        if (mode == EifMode::Consistent) {
            const Eigen::VectorXd v = 0.5 * (sd.u_beta + sd.beta_u);
            V += v * xi.transpose() + xi * v.transpose();
        } else {
            V += sd.u_beta * xi.transpose() + sd.beta_u * xi.transpose();
        }
        M_ += tau_[i] * (chi_[i] * nu_[i] * nu_[i].transpose() + psi_[i] * V);
        c_ += tau_[i] * psi_[i] * nu_[i](q - 1);
    }
    M_ /= static_cast<double>(n);
    c_ /= static_cast<double>(n);
}

EifReport EifContext::evaluate(double y0, const Eigen::VectorXd& x0) const {
    const std::size_t n = fit_.data.n();
    const Eigen::Index q = static_cast<Eigen::Index>(fit_.data.q());
    if (x0.size() != q) throw InputError("invalid input: x0 dimension mismatch");
    if (!std::isfinite(y0) || !x0.allFinite()) throw InputError("invalid input: non-finite point");
    const Eigen::VectorXd x0r = R_ * x0;
    Eigen::VectorXd ell = Eigen::VectorXd::Zero(q);
    for (std::size_t i = 0; i < n; ++i) {
        if (tau_[i] == 0.0) continue;
        const EtaInfluence inf = eta_influence(terms_[i], eq_, y0, x0r, fit_.kernel, fit_.loss, fit_.model, mode_);
        const Eigen::VectorXd xi = rot_.data.X.row(i).transpose();
        ell += tau_[i] * (chi_[i] * inf.eta * nu_[i] + psi_[i] * (inf.dbeta + inf.du * xi));
    }
    ell /= static_cast<double>(n);
    const double tau0 = weight_tau(fit_.tau, x0);
    if (tau0 != 0.0) {
        const LocalEifTerms t0 =
            local_eif_terms(x0r(q - 1), eq_, rot_.data, KernelSpec{fit_.kernel, fit_.h1}, fit_.loss, fit_.model);
        const Eigen::VectorXd nu0 = t0.dbeta + t0.du * x0r;
        ell += scores_star(fit_.loss, fit_.model, y0 - t0.eta).psi * tau0 * nu0;
    }

    EifReport rep;
    rep.y0 = y0;
    rep.x0 = x0;
    rep.ell = ell;
    rep.M = M_;
    rep.rotation = R_;
    rep.tangent_shift = c_;
    Eigen::MatrixXd A = M_.topLeftCorner(q - 1, q - 1);
    if (mode_ == EifMode::Consistent) A -= c_ * Eigen::MatrixXd::Identity(q - 1, q - 1);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) > 1e10) throw NumericalError("degenerate EIF system");
    const Eigen::VectorXd sol = -A.partialPivLu().solve(ell.head(q - 1));
    rep.solver_residual = (A * sol + ell.head(q - 1)).norm();
    rep.eif_canonical = Eigen::VectorXd::Zero(q);
    rep.eif_canonical.head(q - 1) = sol;
    rep.eif_beta = R_.transpose() * rep.eif_canonical;
    return rep;
}

EifReport eif_beta(const IndexFit& fit, double y0, const Eigen::VectorXd& x0, EifMode mode) {
    return EifContext(fit, mode).evaluate(y0, x0);
}

std::vector<EifCell> eif_map(const IndexFit& fit, const std::vector<double>& y_grid,
                             const std::vector<Eigen::VectorXd>& x_grid, EifMode mode) {
    const EifContext ctx(fit, mode);
    std::vector<EifCell> out;
    for (const auto& x0 : x_grid) {
        for (double y0 : y_grid) {
            EifCell cell{y0, x0, {}, 0.0, true};
            try {
                const EifReport r = ctx.evaluate(y0, x0);
                if (r.eif_beta.allFinite()) {
                    cell.eif = r.eif_beta;
                    cell.norm = r.eif_beta.norm();
                    cell.flagged = false;
                }
            } catch (const std::exception&) {
            }
            out.push_back(std::move(cell));
        }
    }
    return out;
}

double reweighted_angle(const IndexFit& fit, double y0, const Eigen::VectorXd& x0, double eps, double theta_init) {
    if (fit.data.q() != 2) throw InputError("invalid input: the reweighting oracle needs q = 2");
    if (!(eps >= 0.0 && eps < 1.0)) throw InputError("invalid input: eps must lie in [0, 1)");
    const std::size_t n = fit.data.n();
    Dataset aug;
    aug.X.resize(n + 1, 2);
    aug.y.resize(n + 1);
    aug.X.topRows(n) = fit.data.X;
    aug.y.head(n) = fit.data.y;
    aug.X.row(n) = x0.transpose();
    aug.y(n) = y0;
    std::vector<double> mass(n + 1, (1.0 - eps) / n);
    mass[n] = eps;
    std::vector<double> tau = tau_weights(fit.tau, aug.X);
    const KernelSpec k1{fit.kernel, fit.h1};
    auto obj = [&](double th) {
        return profile_objective(unit_angle(th), aug, k1, fit.loss, fit.model, tau, mass);
    };
    constexpr double delta = 1e-5;
    auto deriv = [&](double th) { return (obj(th + delta) - obj(th - delta)) / (2.0 * delta); };
    double w = 0.01;
    double lo = theta_init - w, hi = theta_init + w;
    double flo = deriv(lo), fhi = deriv(hi);
    while ((flo > 0.0) == (fhi > 0.0) && w < 0.5) {
        w *= 2.0;
        lo = theta_init - w;
        hi = theta_init + w;
        flo = deriv(lo);
        fhi = deriv(hi);
    }
    return bracketed_root(deriv, lo, hi, 1e-14);
}

Eigen::VectorXd eif_beta_oracle(const IndexFit& fit, double y0, const Eigen::VectorXd& x0, double eps) {
    const double th_hat = std::atan2(fit.beta(1), fit.beta(0));
    const double th0 = reweighted_angle(fit, y0, x0, 0.0, th_hat);
    const double the = reweighted_angle(fit, y0, x0, eps, th0);
    return Eigen::Vector2d(-std::sin(th0), std::cos(th0)) * ((the - th0) / eps);
}

IndexFit polish_stationary(const IndexFit& fit) {
    const double th_hat = std::atan2(fit.beta(1), fit.beta(0));
    const double th0 = reweighted_angle(fit, fit.data.y(0), fit.data.X.row(0).transpose(), 0.0, th_hat);
    IndexFit out = fit;
    out.beta = canonical_sign(unit_angle(th0));
    out.theta_star = beta_to_theta(out.beta);
    const std::vector<double> tau = tau_weights(fit.tau, fit.data.X);
    out.objective = profile_objective(out.beta, fit.data, KernelSpec{fit.kernel, fit.h1}, fit.loss, fit.model, tau);
    return out;
}

}  // namespace sindex
