#include "sindex/index_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sindex/numerics.hpp"

namespace sindex {

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

void check_data(const Dataset& d) {
    if (d.n() == 0) throw InputError("invalid input: empty dataset");
    if (static_cast<std::size_t>(d.X.rows()) != d.n()) throw InputError("invalid input: X and y sizes differ");
    if (d.q() < 2) throw InputError("invalid input: q must be at least 2");
    if (!d.X.allFinite() || !d.y.allFinite()) throw InputError("invalid input: non-finite data");
}

Eigen::VectorXd beta_from_angles(const Eigen::VectorXd& phi) {
    const int q = static_cast<int>(phi.size()) + 1;
    Eigen::VectorXd b(q);
    double s = 1.0;
    for (int k = 0; k < q - 1; ++k) {
        b(k) = s * std::cos(phi(k));
        s *= std::sin(phi(k));
    }
    b(q - 1) = s;
    return b;
}

Eigen::VectorXd angles_from_beta(const Eigen::VectorXd& b) {
    const int q = static_cast<int>(b.size());
    Eigen::VectorXd phi(q - 1);
    for (int k = 0; k < q - 2; ++k) phi(k) = std::atan2(b.tail(q - k - 1).norm(), b(k));
    phi(q - 2) = std::atan2(b(q - 1), b(q - 2));
    return phi;
}

}  // namespace

WeightFn WeightFn::standard(std::size_t q, std::size_t n, TauMode mode) {
    return {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(q), 0.5), trimming_radius(n), mode};
}

WeightFn WeightFn::none(std::size_t q) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q)), std::numeric_limits<double>::infinity(),
            TauMode::Indicator};
}

double trimming_radius(std::size_t n) {
    if (n < 3) throw InputError("invalid input: trimming radius needs n >= 3");
    return 0.4 * std::sqrt(std::log(std::log(static_cast<double>(n))));
}

double weight_tau(const WeightFn& w, const Eigen::VectorXd& x) {
    if (x.size() != w.center.size()) throw InputError("invalid input: dimension mismatch");
    const double r = (x - w.center).norm();
    if (r > w.radius) return 0.0;
    return w.mode == TauMode::Indicator ? 1.0 : r;
}

std::vector<double> tau_weights(const WeightFn& w, const Eigen::MatrixXd& X) {
    std::vector<double> t(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) t[i] = weight_tau(w, X.row(i).transpose());
    return t;
}

Eigen::VectorXd theta_to_beta(const Eigen::VectorXd& theta_star) {
    Eigen::VectorXd t(theta_star.size() + 1);
    t.head(theta_star.size()) = theta_star;
    t(theta_star.size()) = 1.0;
    return t / t.norm();
}

Eigen::VectorXd beta_to_theta(const Eigen::VectorXd& beta) {
    const Eigen::Index q = beta.size();
    if (q < 2) throw InputError("invalid input: q must be at least 2");
    if (!(beta(q - 1) > 1e-12)) throw InputError("near-boundary parametrization");
    return beta.head(q - 1) / beta(q - 1);
}

Eigen::VectorXd canonical_sign(const Eigen::VectorXd& beta) {
    const double nrm = beta.norm();
    if (!(nrm > 0.0)) throw InputError("invalid input: zero direction");
    Eigen::VectorXd b = beta / nrm;
    if (b(b.size() - 1) < 0.0) b = -b;
    return b;
}

double profile_objective(const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k,
                         const LossSpec& loss, const ErrorModel& m, std::span<const double> tau,
                         std::span<const double> mass) {
    const std::size_t n = data.n();
    if (tau.size() != n) throw InputError("invalid input: tau size mismatch");
    const Eigen::VectorXd proj = data.X * beta;
    const LocalSample s{as_span(proj), as_span(data.y), mass};
    double tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mi = mass.empty() ? 1.0 / n : mass[i];
        if (tau[i] == 0.0 || mi == 0.0) continue;
        const LocalFit f = local_m_constant(proj(i), s, k, loss, m);
        tot += mi * tau[i] * phi(loss, m, data.y(i), f.a);
    }
    return tot;
}

SphereResult optimize_sphere(const std::function<double(const Eigen::VectorXd&)>& f, std::size_t q,
                             const SphereOptions& opt, const std::optional<Eigen::VectorXd>& init) {
    if (q < 2) throw InputError("invalid input: q must be at least 2");
    int evals = 0;
    auto F = [&](const Eigen::VectorXd& b) {
        ++evals;
        return f(canonical_sign(b));
    };
    SphereResult out{Eigen::VectorXd::Unit(q, q - 1), std::numeric_limits<double>::infinity(), false, 0};
    if (q == 2) {
        auto g = [&](double th) { return F(Eigen::Vector2d(std::cos(th), std::sin(th))); };
        const int G = std::max(opt.grid, 4);
        const double step = M_PI / G;
        int kb = 0;
        double fb = std::numeric_limits<double>::infinity();
        for (int k = 0; k < G; ++k) {
            const double v = g(k * step);
            if (v < fb) {
                fb = v;
                kb = k;
            }
        }
        const MinResult r = brent_minimize(g, (kb - 1) * step, (kb + 1) * step, 40, 200);
        double th = kb * step;
        if (r.fx <= fb) {
            th = r.x;
            fb = r.fx;
        }
        out.beta = canonical_sign(Eigen::Vector2d(std::cos(th), std::sin(th)));
        out.value = fb;
    } else {
        std::vector<Eigen::VectorXd> starts;
        starts.push_back(init ? canonical_sign(*init) : Eigen::VectorXd(Eigen::VectorXd::Unit(q, q - 1)));
        std::mt19937_64 rng(opt.seed);
        std::normal_distribution<double> nd;
        for (int r = 0; r < opt.restarts; ++r) {
            Eigen::VectorXd v(q);
            for (std::size_t j = 0; j < q; ++j) v(j) = nd(rng);
            starts.push_back(canonical_sign(v));
        }
        const double f0 = F(starts[0]);
        out.beta = starts[0];
        out.value = f0;
        NelderMeadOptions nm;
        nm.step = 0.25;
        nm.f_tol = 1e-12;
        nm.x_tol = opt.angle_tol;
        nm.max_evals = 400 * static_cast<int>(q);
        for (const auto& s : starts) {
            const auto res = nelder_mead([&](const Eigen::VectorXd& phi) { return F(beta_from_angles(phi)); },
                                         angles_from_beta(s), nm);
            if (res.fx < out.value) {
                out.value = res.fx;
                out.beta = canonical_sign(beta_from_angles(res.x));
            }
        }
        out.flagged = !(out.value < f0);
    }
    if (init) {
        const Eigen::VectorXd b0 = canonical_sign(*init);
        const double f0 = F(b0);
        if (f0 < out.value) {
            out.value = f0;
            out.beta = b0;
        }
    }
    out.evals = evals;
    return out;
}

ScaleRoot global_scale(std::span<const double> deviances, std::span<const double> tau, double b_const) {
    if (deviances.size() != tau.size()) throw InputError("invalid input: size mismatch");
    double tot = 0.0;
    for (double t : tau) tot += t;
    if (!(tot > 0.0)) throw InputError("invalid input: all trimming weights are zero");
    return tukey_scale_root(deviances.data(), tau.data(), deviances.size(), b_const);
}

ScaleRoot initial_scale(const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k, const ErrorModel& m,
                        std::span<const double> tau, double b_const) {
    const std::size_t n = data.n();
    if (tau.size() != n) throw InputError("invalid input: tau size mismatch");
    const Eigen::VectorXd proj = data.X * beta;
    const LocalSample s{as_span(proj), as_span(data.y)};
    std::vector<double> d, w;
    for (std::size_t i = 0; i < n; ++i) {
        if (tau[i] == 0.0) continue;
        const LocalSLocation loc = local_s_location(proj(i), s, k, m, b_const);
        const Deviance dv = deviance(m, data.y(i), loc.a);
        d.push_back(dv.saturated ? kSaturatedDeviance : dv.value);
        w.push_back(tau[i]);
    }
    return global_scale(d, w, b_const);
}

NuisanceFit fit_initial_s(const Dataset& data, const KernelSpec& k, const ErrorModel& m, std::span<const double> tau,
                          double b_const, double target_eff, const SphereOptions& sphere) {
    check_data(data);
    auto obj = [&](const Eigen::VectorXd& b) { return initial_scale(b, data, k, m, tau, b_const).s; };
    const SphereResult r = optimize_sphere(obj, data.q(), sphere);
    const ScaleRoot sr = initial_scale(r.beta, data, k, m, tau, b_const);
    if (sr.degenerate || !(sr.s > 0.0)) throw NumericalError("initial fit failed");
    NuisanceFit nf;
    nf.beta_tilde = r.beta;
    nf.s_n = sr.s;
    const GammaEstimate g = s_star_inverse(sr.s, b_const);
    nf.gamma_hat = g.gamma;
    nf.gamma_clamped = g.clamped;
    const Calibration cal = calibrate_tuning(g.gamma, target_eff, sr.s);
    nf.c_hat = cal.c;
    nf.floor_binds = cal.floor_binds;
    nf.c_calibrated = cal.floor_binds ? calibrate_tuning(g.gamma, target_eff, 0.0).c : cal.c;
    return nf;
}

std::vector<double> IndexFit::projections() const {
    const Eigen::VectorXd p = data.X * beta;
    return {p.data(), p.data() + p.size()};
}

double IndexFit::eta(double u) const {
    const std::vector<double> p = projections();
    return local_m_linear(u, LocalSample{p, as_span(data.y)}, KernelSpec{kernel, h2}, loss, model).a;
}

double IndexFit::eta_step1(double u) const {
    const std::vector<double> p = projections();
    return local_m_constant(u, LocalSample{p, as_span(data.y)}, KernelSpec{kernel, h1}, loss, model).a;
}

IndexFit fit_three_step(const Dataset& data, const FitConfig& cfg) {
    check_data(data);
    if (!(cfg.h1 > 0.0) || !(cfg.h2 > 0.0)) throw InputError("invalid input: bandwidths must be positive");
    const std::size_t q = data.q();
    IndexFit fit;
    fit.tau = cfg.tau ? *cfg.tau : WeightFn::standard(q, data.n());
    const std::vector<double> tw = tau_weights(fit.tau, data.X);
    fit.model = cfg.model;
    fit.kernel = cfg.kernel;
    fit.h1 = cfg.h1;
    fit.h2 = cfg.h2;

    std::optional<Eigen::VectorXd> init = cfg.init;
    if (cfg.family == LossFamily::ClassicalSquared) {
        fit.loss = LossSpec::classical();
    } else if (cfg.fixed_alpha) {
        fit.loss = LossSpec::tukey(*cfg.fixed_alpha);
    } else {
        const KernelSpec kn{cfg.kernel, cfg.nuisance_h.value_or(cfg.h1)};
        fit.nuisance = cfg.nuisance ? *cfg.nuisance
                                    : fit_initial_s(data, kn, cfg.model, tw, cfg.b_const, cfg.target_eff, cfg.sphere);
        fit.loss = LossSpec::tukey(fit.nuisance->c_hat);
        fit.gamma_hat = fit.nuisance->gamma_hat;
        if (!init) init = fit.nuisance->beta_tilde;
    }
    fit.alpha_hat = fit.loss.alpha;

    const KernelSpec k1{cfg.kernel, cfg.h1};
    auto obj = [&](const Eigen::VectorXd& b) { return profile_objective(b, data, k1, fit.loss, fit.model, tw); };
    const SphereResult r = optimize_sphere(obj, q, cfg.sphere, init);
    fit.beta = r.beta;
    fit.objective = r.value;
    fit.sphere_flagged = r.flagged;
    fit.theta_star = beta_to_theta(fit.beta);
    fit.data = data;
    return fit;
}

IndexFit fit_symmetric_mm(const Dataset& data, const SymmetricConfig& cfg) {
    check_data(data);
    if (!(cfg.c1 > cfg.c0)) throw InputError("invalid input: c1 must exceed c0");
    const WeightFn tau = cfg.tau ? *cfg.tau : WeightFn::standard(data.q(), data.n());
    const std::vector<double> tw = tau_weights(tau, data.X);
    const KernelSpec k1{cfg.kernel, cfg.h1};

    // rho_T(r / (c0 sigma)) = f(d / sigma^2) with d = (r / c0)^2.
    auto sigma_tilde = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd proj = data.X * b;
        const LocalSample s{as_span(proj), as_span(data.y)};
        std::vector<double> d, w;
        for (std::size_t i = 0; i < data.n(); ++i) {
            if (tw[i] == 0.0) continue;
            const double r = (data.y(i) - local_median(proj(i), s, k1)) / cfg.c0;
            d.push_back(r * r);
            w.push_back(tw[i]);
        }
        return global_scale(d, w, cfg.b_const);
    };
    const SphereResult init = optimize_sphere([&](const Eigen::VectorXd& b) { return sigma_tilde(b).s; }, data.q(),
                                              cfg.sphere);
    const ScaleRoot sr = sigma_tilde(init.beta);
    if (sr.degenerate || !(sr.s > 0.0)) throw NumericalError("initial fit failed");

    // With d = r^2 / (2 sigma^2), rho_T(r / (c1 sigma)) needs alpha = c1 / sqrt(2).
    FitConfig fc;
    fc.family = LossFamily::TukeyBisquare;
    fc.model = ErrorModel::gaussian(sr.s);
    fc.kernel = cfg.kernel;
    fc.h1 = cfg.h1;
    fc.h2 = cfg.h2;
    fc.tau = tau;
    fc.fixed_alpha = cfg.c1 / std::sqrt(2.0);
    fc.sphere = cfg.sphere;
    fc.init = init.beta;
    IndexFit fit = fit_three_step(data, fc);
    fit.sigma_hat = sr.s;
    return fit;
}

Eigen::MatrixXd canonical_rotation(const Eigen::VectorXd& beta) {
    const Eigen::Index q = beta.size();
    Eigen::VectorXd v = beta - Eigen::VectorXd::Unit(q, q - 1);
    const double vv = v.squaredNorm();
    if (vv < 1e-30) return Eigen::MatrixXd::Identity(q, q);
    return Eigen::MatrixXd::Identity(q, q) - 2.0 * v * v.transpose() / vv;
}

CovarianceResult asymptotic_covariance(const IndexFit& fit) {
    const Dataset& data = fit.data;
    const std::size_t n = data.n();
    const Eigen::Index q = static_cast<Eigen::Index>(data.q());
    const Eigen::MatrixXd R = canonical_rotation(fit.beta);
    const Dataset rot{data.X * R.transpose(), data.y};
    const Eigen::VectorXd eq = Eigen::VectorXd::Unit(q, q - 1);
    const std::vector<double> tw = tau_weights(fit.tau, data.X);
    const KernelSpec k1{fit.kernel, fit.h1};

    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(q, q), S = Eigen::MatrixXd::Zero(q, q);
    for (std::size_t i = 0; i < n; ++i) {
        if (tw[i] == 0.0) continue;
        const Eigen::VectorXd xi = rot.X.row(i).transpose();
        const EtaPoint ep = eta_point(xi(q - 1), eq, rot, k1, fit.loss, fit.model);
        const Eigen::VectorXd nu = ep.dbeta + ep.du * xi;
        const Scores sc = scores_star(fit.loss, fit.model, data.y(i) - ep.eta);
        B += (sc.chi * tw[i]) * nu * nu.transpose();
        S += (sc.psi * sc.psi * tw[i] * tw[i]) * nu * nu.transpose();
    }
    B /= static_cast<double>(n);
    S /= static_cast<double>(n);

    CovarianceResult out;
    out.rotation = R;
    out.B1 = B.topLeftCorner(q - 1, q - 1);
    out.Sigma1 = S.topLeftCorner(q - 1, q - 1);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.B1);
    const auto sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) > 1e10) throw NumericalError("degenerate information");
    const Eigen::MatrixXd Binv = out.B1.inverse();
    out.cov_tangent = Binv * out.Sigma1 * Binv.transpose() / static_cast<double>(n);

    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(q, q);
    C.topLeftCorner(q - 1, q - 1) = out.cov_tangent;
    out.cov_beta = R.transpose() * C * R;

    const double bq = fit.beta(q - 1);
    Eigen::MatrixXd J(q - 1, q);
    J.leftCols(q - 1) = Eigen::MatrixXd::Identity(q - 1, q - 1) / bq;
    J.col(q - 1) = -fit.beta.head(q - 1) / (bq * bq);
    out.cov_theta = J * out.cov_beta * J.transpose();

    // Upper-left blocks taken in the original coordinates.
    const Eigen::MatrixXd Bo = R.transpose() * B * R, So = R.transpose() * S * R;
    const Eigen::MatrixXd Bo1 = Bo.topLeftCorner(q - 1, q - 1);
    const Eigen::MatrixXd Bo1inv = Bo1.inverse();
    out.cov_theta_literal =
        Bo1inv * (4.0 * So.topLeftCorner(q - 1, q - 1)) * Bo1inv.transpose() / (static_cast<double>(n) * bq * bq);
    return out;
}

}  // namespace sindex
