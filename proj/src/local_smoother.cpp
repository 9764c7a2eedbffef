#include "sindex/local_smoother.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sindex/numerics.hpp"

namespace sindex {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Kernel neighborhood of u: responses, scaled offsets t = (p - u)/h and
// normalized weights.
struct Hood {
    std::vector<double> y, t, w;
    double raw = 0.0;
    double h = 0.0;
};

void check_sample(const LocalSample& s) {
    if (s.proj.empty()) throw InputError("invalid input: empty sample");
    if (s.y.size() != s.proj.size()) throw InputError("invalid input: size mismatch");
    if (!s.mass.empty() && s.mass.size() != s.proj.size()) throw InputError("invalid input: size mismatch");
}

void gather(double u, const LocalSample& s, const KernelSpec& k, Hood& nb) {
    check_sample(s);
    if (!(k.h > 0.0)) throw InputError("invalid input: bandwidth must be positive");
    double h = k.h;
    for (int attempt = 0; attempt <= 5; ++attempt, h *= 1.5) {
        nb.y.clear();
        nb.t.clear();
        nb.w.clear();
        double raw = 0.0;
        for (std::size_t i = 0; i < s.proj.size(); ++i) {
            const double t = (s.proj[i] - u) / h;
            double kv = kernel_value(k.kind, t);
            if (!s.mass.empty()) kv *= s.mass[i];
            if (kv <= 0.0) continue;
            nb.y.push_back(s.y[i]);
            nb.t.push_back(t);
            nb.w.push_back(kv);
            raw += kv / h;
        }
        if (raw > kMinKernelMass) {
            const double tot = std::accumulate(nb.w.begin(), nb.w.end(), 0.0);
            for (double& w : nb.w) w /= tot;
            nb.raw = raw;
            nb.h = h;
            return;
        }
    }
    throw NumericalError("no effective neighbors");
}

// phi* without the dispatch of phi_star for the two closed-form models.
inline double fast_phi(const LossSpec& loss, const ErrorModel& m, double u) {
    double d;
    if (m.kind == ErrorKind::LogGamma && u <= kSaturationResidual) {
        d = std::abs(u) < 0.2 ? log_gamma_deviance(u) : std::exp(u) - 1.0 - u;
    } else if (m.kind == ErrorKind::GaussianSymmetric) {
        d = u * u / (2.0 * m.gamma * m.gamma);
    } else {
        return phi_star(loss, m, u);
    }
    const double v = d / (loss.alpha * loss.alpha);
    if (!loss.bounded()) return v;
    return v >= 1.0 ? 1.0 : v * (3.0 - 3.0 * v + v * v);
}

// psi and chi by the same shortcut; falls back to scores_star.
inline void fast_psi_chi(const LossSpec& loss, const ErrorModel& m, double u, double& psi, double& chi) {
    double d, d1, d2;
    if (m.kind == ErrorKind::LogGamma && u <= kSaturationResidual) {
        if (std::abs(u) < 0.2) {
            d = log_gamma_deviance(u);
            d1 = u + d;
        } else {
            d1 = std::exp(u) - 1.0;
            d = d1 - u;
        }
        d2 = d1 + 1.0;
    } else if (m.kind == ErrorKind::GaussianSymmetric) {
        const double s2 = m.gamma * m.gamma;
        d = u * u / (2.0 * s2);
        d1 = u / s2;
        d2 = 1.0 / s2;
    } else {
        const Scores sc = scores_star(loss, m, u);
        psi = sc.psi;
        chi = sc.chi;
        return;
    }
    const double a2 = loss.alpha * loss.alpha;
    const double v = d / a2, p1 = d1 / a2, p2 = d2 / a2;
    double f1 = 1.0, f2 = 0.0;
    if (loss.bounded()) {
        if (v >= 1.0) {
            psi = chi = 0.0;
            return;
        }
        const double w = 1.0 - v;
        f1 = 3.0 * w * w;
        f2 = -6.0 * w;
    }
    psi = -f1 * p1;
    chi = f2 * p1 * p1 + f1 * p2;
}

// Q(a) = sum w phi*(r - a) over a location problem.
struct LocProblem {
    const std::vector<double>& r;
    const std::vector<double>& w;
    const LossSpec& loss;
    const ErrorModel& m;

    double Q(double a) const {
        double q = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) q += w[i] * fast_phi(loss, m, r[i] - a);
        return q;
    }
    void grad_hess(double a, double& g, double& H) const {
        g = H = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            double ps, ch;
            fast_psi_chi(loss, m, r[i] - a, ps, ch);
            g += w[i] * ps;
            H += w[i] * ch;
        }
    }
};

double classical_location(const std::vector<double>& r, const std::vector<double>& w, const ErrorModel& m) {
    switch (m.kind) {
    case ErrorKind::LogGamma: {
        const double mx = *std::max_element(r.begin(), r.end());
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) s += w[i] * std::exp(r[i] - mx);
        return mx + std::log(s);
    }
    case ErrorKind::GaussianSymmetric: {
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) s += w[i] * r[i];
        return s;
    }
    case ErrorKind::GeneralUnimodal: break;
    }
    // Convex deviance: damped Newton from the weighted mean.
    double a = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) a += w[i] * r[i];
    a -= m.e0;
    const LossSpec cl = LossSpec::classical();
    LocProblem P{r, w, cl, m};
    double Qa = P.Q(a);
    for (int it = 0; it < 100; ++it) {
        double g, H;
        P.grad_hess(a, g, H);
        if (!(H > 0.0)) break;
        double step = -g / H;
        bool moved = false;
        for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
            const double Qn = P.Q(a + step);
            if (Qn <= Qa) {
                a += step;
                Qa = Qn;
                moved = true;
                break;
            }
        }
        if (!moved || std::abs(step) < 1e-14 * (1.0 + std::abs(a))) break;
    }
    return a;
}

// Newton steps on Q, kept only while they do not increase Q.
double newton_polish(const LocProblem& P, double a, double& Qa) {
    for (int it = 0; it < 50; ++it) {
        double g, H;
        P.grad_hess(a, g, H);
        if (!(H > 0.0)) break;
        const double step = -g / H;
        const double Qn = P.Q(a + step);
        if (!(Qn <= Qa + 1e-15 * (1.0 + std::abs(Qa)))) break;
        a += step;
        Qa = Qn;
        if (std::abs(step) <= 1e-14 * (1.0 + std::abs(a))) break;
    }
    return a;
}

// Safeguarded Newton on Q' inside [lo, hi]: the bracket shrinks toward the
// side where Q decreases, so the iteration settles on a local minimum.
double refine_cell(const LocProblem& P, double x, double lo, double hi) {
    for (int it = 0; it < 60; ++it) {
        double g, H;
        P.grad_hess(x, g, H);
        if (g == 0.0) break;
        (g > 0.0 ? hi : lo) = x;
        double xn = H > 0.0 ? x - g / H : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        const bool done = std::abs(xn - x) <= 1e-12 * (1.0 + std::abs(x)) || hi - lo <= 1e-12 * (1.0 + std::abs(x));
        x = xn;
        if (done) break;
    }
    return x;
}

std::pair<double, double> weighted_quantile_pair(const std::vector<double>& r, const std::vector<double>& w, double p1,
                                                 double p2) {
    thread_local std::vector<std::size_t> idx;
    idx.resize(r.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
    double tot = 0.0;
    for (double v : w) tot += v;
    double cum = 0.0, v1 = r[idx.back()], v2 = r[idx.back()];
    bool got1 = false;
    for (std::size_t i : idx) {
        cum += w[i];
        if (!got1 && cum >= p1 * tot) {
            v1 = r[i];
            got1 = true;
        }
        if (cum >= p2 * tot) {
            v2 = r[i];
            break;
        }
    }
    return {v1, v2};
}

// Bracket of the weighted central half, padded by 1 + 1.5 IQR.
std::pair<double, double> central_range(const std::vector<double>& r, const std::vector<double>& w) {
    const auto [q1, q3] = weighted_quantile_pair(r, w, 0.25, 0.75);
    const double pad = 1.0 + 1.5 * (q3 - q1);
    return {q1 - pad, q3 + pad};
}

// Global search for a bounded loss: grid, refinement of the best discrete
// local minima, Newton polish of the winner.
double robust_location(const LocProblem& P, double seed, double& Qbest) {
    const auto [mn, mx] = std::minmax_element(P.r.begin(), P.r.end());
    const double lo = *mn - 1.0, hi = *mx + 1.0;
    constexpr int G = 16;
    const double step = (hi - lo) / (G - 1);
    double ga[G], gq[G];
    for (int k = 0; k < G; ++k) {
        ga[k] = lo + k * step;
        gq[k] = P.Q(ga[k]);
    }
    struct Cand {
        double q, x, lo, hi;
    };
    std::vector<Cand> cands;
    for (int k = 0; k < G; ++k) {
        const bool left = k == 0 || gq[k] <= gq[k - 1];
        const bool right = k == G - 1 || gq[k] <= gq[k + 1];
        if (left && right) cands.push_back({gq[k], ga[k], ga[std::max(k - 1, 0)], ga[std::min(k + 1, G - 1)]});
    }
    if (std::isfinite(seed) && seed > lo && seed < hi) cands.push_back({P.Q(seed), seed, seed - step, seed + step});
    // Far outliers stretch the grid until every clean response shares one
    // cell; a second grid over the central weighted range finds that basin.
    const auto [clo, chi] = central_range(P.r, P.w);
    if (3.0 * (chi - clo) < hi - lo) {
        const double cstep = (chi - clo) / (G - 1);
        double ca[G], cq[G];
        for (int k = 0; k < G; ++k) {
            ca[k] = clo + k * cstep;
            cq[k] = P.Q(ca[k]);
        }
        for (int k = 0; k < G; ++k) {
            const bool left = k == 0 || cq[k] <= cq[k - 1];
            const bool right = k == G - 1 || cq[k] <= cq[k + 1];
            if (left && right) cands.push_back({cq[k], ca[k], ca[k] - cstep, ca[k] + cstep});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.q < b.q; });
    if (cands.size() > 3) cands.resize(3);

    double best = ga[0];
    Qbest = gq[0];
    for (int k = 1; k < G; ++k)
        if (gq[k] < Qbest) {
            Qbest = gq[k];
            best = ga[k];
        }
    for (const Cand& c : cands) {
        const double x = refine_cell(P, c.x, c.lo, c.hi);
        const double qx = P.Q(x);
        if (qx < Qbest) {
            Qbest = qx;
            best = x;
        }
    }
    return newton_polish(P, best, Qbest);
}

double location_fit(const std::vector<double>& r, const std::vector<double>& w, const LossSpec& loss,
                    const ErrorModel& m, double* Qout = nullptr) {
    const double seed = classical_location(r, w, m);
    LocProblem P{r, w, loss, m};
    double Q;
    double a;
    if (!loss.bounded()) {
        a = seed;
        if (Qout) Q = P.Q(a);
    } else {
        a = robust_location(P, seed, Q);
    }
    if (Qout) *Qout = Q;
    return a;
}

// Local-linear objective in (a, c) with c = b h the slope per bandwidth unit.
struct LinProblem {
    const Hood& nb;
    const LossSpec& loss;
    const ErrorModel& m;

    double Q(double a, double c) const {
        double q = 0.0;
        for (std::size_t i = 0; i < nb.y.size(); ++i) q += nb.w[i] * fast_phi(loss, m, nb.y[i] - a - c * nb.t[i]);
        return q;
    }
    void grad_hess(double a, double c, Eigen::Vector2d& g, Eigen::Matrix2d& H) const {
        g.setZero();
        H.setZero();
        for (std::size_t i = 0; i < nb.y.size(); ++i) {
            double ps, ch;
            fast_psi_chi(loss, m, nb.y[i] - a - c * nb.t[i], ps, ch);
            const double t = nb.t[i], w = nb.w[i];
            g(0) += w * ps;
            g(1) += w * ps * t;
            H(0, 0) += w * ch;
            H(0, 1) += w * ch * t;
            H(1, 1) += w * ch * t * t;
        }
        H(1, 0) = H(0, 1);
    }
};

// Damped Newton in (a, c); without backtracking only full steps that do not
// increase Q are taken.
void newton2(const LinProblem& P, double& a, double& c, double& Qv, bool backtrack) {
    for (int it = 0; it < 100; ++it) {
        Eigen::Vector2d g;
        Eigen::Matrix2d H;
        P.grad_hess(a, c, g, H);
        Eigen::Vector2d step;
        const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(0, 1);
        if (H(0, 0) > 0.0 && det > 1e-12 * H(0, 0) * std::max(H(1, 1), 1e-300)) {
            step = -H.ldlt().solve(g);
        } else if (H(0, 0) > 0.0) {
            step << -g(0) / H(0, 0), 0.0;
        } else {
            break;
        }
        bool moved = false;
        for (int ls = 0; ls < (backtrack ? 30 : 1); ++ls, step *= 0.5) {
            const double Qn = P.Q(a + step(0), c + step(1));
            if (Qn <= Qv + 1e-15 * (1.0 + std::abs(Qv))) {
                a += step(0);
                c += step(1);
                Qv = Qn;
                moved = true;
                break;
            }
        }
        if (!moved || step.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + std::abs(a) + std::abs(c))) break;
    }
}

// Minimizes over c with a fixed; same grid and Brent scheme as the level.
double robust_slope(const LinProblem& P, double a, double c0, double span) {
    double tmax = 0.0;
    for (double t : P.nb.t) tmax = std::max(tmax, std::abs(t));
    if (tmax < 1e-12) return c0;
    constexpr int G = 16;
    const double half = span / tmax;
    const double lo = c0 - half, hi = c0 + half, step = (hi - lo) / (G - 1);
    double gc[G], gq[G];
    for (int k = 0; k < G; ++k) {
        gc[k] = lo + k * step;
        gq[k] = P.Q(a, gc[k]);
    }
    double best = c0, Qb = P.Q(a, c0);
    std::vector<std::pair<double, int>> mins;
    for (int k = 0; k < G; ++k) {
        const bool left = k == 0 || gq[k] <= gq[k - 1];
        const bool right = k == G - 1 || gq[k] <= gq[k + 1];
        if (left && right) mins.push_back({gq[k], k});
    }
    std::sort(mins.begin(), mins.end());
    if (mins.size() > 4) mins.resize(4);
    for (auto [q, k] : mins) {
        const MinResult res =
            brent_minimize([&](double c) { return P.Q(a, c); }, gc[std::max(k - 1, 0)], gc[std::min(k + 1, G - 1)], 52, 200);
        if (res.fx < Qb) {
            Qb = res.fx;
            best = res.x;
        }
    }
    return best;
}

}  // namespace

double kernel_value(KernelKind k, double t) {
    if (k == KernelKind::Epanechnikov) return std::abs(t) < 1.0 ? 0.75 * (1.0 - t * t) : 0.0;
    return kInvSqrt2Pi * std::exp(-0.5 * t * t);
}

double kernel_deriv(KernelKind k, double t) {
    if (k == KernelKind::Epanechnikov) return std::abs(t) < 1.0 ? -1.5 * t : 0.0;
    return -t * kInvSqrt2Pi * std::exp(-0.5 * t * t);
}

KernelWeights kernel_weights(double u, std::span<const double> proj, const KernelSpec& k) {
    if (proj.empty()) throw InputError("invalid input: empty sample");
    if (!(k.h > 0.0)) throw InputError("invalid input: bandwidth must be positive");
    KernelWeights out{std::vector<double>(proj.size()), 0.0};
    double tot = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        out.w[i] = kernel_value(k.kind, (proj[i] - u) / k.h);
        tot += out.w[i];
    }
    out.raw_mass = tot / k.h;
    if (!(out.raw_mass > kMinKernelMass)) throw NumericalError("no effective neighbors");
    for (double& w : out.w) w /= tot;
    return out;
}

LocalFit local_m_constant(double u, const LocalSample& s, const KernelSpec& k, const LossSpec& loss,
                          const ErrorModel& m) {
    thread_local Hood nb;
    gather(u, s, k, nb);
    LocalFit fit;
    fit.a = location_fit(nb.y, nb.w, loss, m);
    fit.weight_mass = nb.raw;
    fit.h_used = nb.h;
    fit.converged = std::isfinite(fit.a);
    return fit;
}

double local_constant_objective(double a, double u, const LocalSample& s, const KernelSpec& k,
                                const LossSpec& loss, const ErrorModel& m) {
    Hood nb;
    gather(u, s, k, nb);
    return LocProblem{nb.y, nb.w, loss, m}.Q(a);
}

double local_linear_objective(double a, double b, double u, const LocalSample& s, const KernelSpec& k,
                              const LossSpec& loss, const ErrorModel& m) {
    Hood nb;
    gather(u, s, k, nb);
    return LinProblem{nb, loss, m}.Q(a, b * nb.h);
}

LocalFit local_m_linear(double u, const LocalSample& s, const KernelSpec& k, const LossSpec& loss,
                        const ErrorModel& m) {
    thread_local Hood nb;
    gather(u, s, k, nb);
    const LossSpec cl = LossSpec::classical();
    const LinProblem PC{nb, cl, m};
    double ac = classical_location(nb.y, nb.w, m), cc = 0.0, Qc = PC.Q(ac, cc);
    newton2(PC, ac, cc, Qc, true);

    LocalFit fit;
    fit.weight_mass = nb.raw;
    fit.h_used = nb.h;
    if (!loss.bounded()) {
        fit.a = ac;
        fit.b = cc / nb.h;
        fit.converged = std::isfinite(ac) && std::isfinite(cc);
        return fit;
    }

    const LinProblem P{nb, loss, m};
    const auto [mn, mx] = std::minmax_element(nb.y.begin(), nb.y.end());
    const double span = *mx - *mn + 2.0;
    std::vector<double> r(nb.y.size());

    double Qr;
    const double ar = location_fit(nb.y, nb.w, loss, m, &Qr);
    struct Start {
        double a, c;
    };
    double best_a = ar, best_c = 0.0, best_q = Qr;
    for (Start st : {Start{ar, 0.0}, Start{ac, cc}}) {
        double a = st.a, c = st.c;
        for (int sweep = 0; sweep < 5; ++sweep) {
            for (std::size_t i = 0; i < r.size(); ++i) r[i] = nb.y[i] - c * nb.t[i];
            a = location_fit(r, nb.w, loss, m);
            c = robust_slope(P, a, c, span);
        }
        double Qv = P.Q(a, c);
        NelderMeadOptions opt;
        opt.step = 0.05;
        opt.f_tol = 1e-15;
        opt.x_tol = 1e-10;
        opt.max_evals = 1500;
        const auto nm = nelder_mead([&](const Eigen::VectorXd& x) { return P.Q(x(0), x(1)); },
                                    Eigen::Vector2d(a, c), opt);
        if (nm.fx < Qv) {
            a = nm.x(0);
            c = nm.x(1);
            Qv = nm.fx;
        }
        newton2(P, a, c, Qv, false);
        if (Qv < best_q) {
            best_q = Qv;
            best_a = a;
            best_c = c;
        }
    }
    fit.a = best_a;
    fit.b = best_c / nb.h;
    fit.converged = std::isfinite(best_a) && std::isfinite(best_c);
    return fit;
}

ScaleRoot local_s_scale(double a, double u, const LocalSample& s, const KernelSpec& k, const ErrorModel& m,
                        double b_const) {
    thread_local Hood nb;
    gather(u, s, k, nb);
    std::vector<double> d(nb.y.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Deviance dv = deviance(m, nb.y[i], a);
        d[i] = dv.saturated ? kSaturatedDeviance : dv.value;
    }
    return tukey_scale_root(d.data(), nb.w.data(), d.size(), b_const);
}

LocalSLocation local_s_location(double u, const LocalSample& s, const KernelSpec& k, const ErrorModel& m,
                                double b_const) {
    Hood nb;
    gather(u, s, k, nb);
    if (nb.y.size() == 1) return {nb.y[0] - m.e0, 0.0, true};
    std::vector<double> d(nb.y.size());
    const LossSpec raw = LossSpec::classical();
    auto scale = [&](double a) {
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double u = nb.y[i] - a;
            d[i] = m.kind == ErrorKind::LogGamma && u > kSaturationResidual ? kSaturatedDeviance
                                                                             : std::max(0.0, fast_phi(raw, m, u));
        }
        return tukey_scale_root(d.data(), nb.w.data(), d.size(), b_const).s;
    };
    struct Cand {
        double s, x, lo, hi;
    };
    std::vector<Cand> mins;
    auto scan = [&](double lo, double hi) {
        constexpr int G = 32;
        double ga[G], gs[G];
        for (int j = 0; j < G; ++j) {
            ga[j] = lo + (hi - lo) * j / (G - 1);
            gs[j] = scale(ga[j]);
        }
        for (int j = 0; j < G; ++j) {
            const bool left = j == 0 || gs[j] <= gs[j - 1];
            const bool right = j == G - 1 || gs[j] <= gs[j + 1];
            if (left && right) mins.push_back({gs[j], ga[j], ga[std::max(j - 1, 0)], ga[std::min(j + 1, G - 1)]});
        }
    };
    const auto [mn, mx] = std::minmax_element(nb.y.begin(), nb.y.end());
    const double lo = *mn - 1.0, hi = *mx + 1.0;
    scan(lo, hi);
    const auto [clo, chi] = central_range(nb.y, nb.w);
    if (3.0 * (chi - clo) < hi - lo) scan(clo, chi);
    std::sort(mins.begin(), mins.end(), [](const Cand& a, const Cand& b) { return a.s < b.s; });
    if (mins.size() > 2) mins.resize(2);
    double best = mins.front().x, sb = mins.front().s;
    for (const Cand& c : mins) {
        const MinResult r = brent_minimize(scale, c.lo, c.hi, 52, 200);
        if (r.fx < sb) {
            sb = r.fx;
            best = r.x;
        }
    }
    return {best, sb, sb == 0.0};
}

double local_median(double u, const LocalSample& s, const KernelSpec& k) {
    Hood nb;
    gather(u, s, k, nb);
    std::vector<std::size_t> idx(nb.y.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return nb.y[a] < nb.y[b]; });
    double cum = 0.0;
    for (std::size_t i : idx) {
        cum += nb.w[i];
        if (cum >= 0.5 - 1e-12) return nb.y[i];
    }
    return nb.y[idx.back()];
}

EtaDerivatives eta_derivatives(double u, const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k,
                               const LossSpec& loss, const ErrorModel& m, double eta_u, std::span<const double> mass) {
    const std::size_t n = data.n(), q = data.q();
    if (static_cast<std::size_t>(beta.size()) != q) throw InputError("invalid input: dimension mismatch");
    if (!mass.empty() && mass.size() != n) throw InputError("invalid input: size mismatch");
    const Eigen::VectorXd proj = data.X * beta;
    double F = 0.0, E = 0.0;
    Eigen::VectorXd G = Eigen::VectorXd::Zero(q);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (proj(i) - u) / k.h;
        const double kv = kernel_value(k.kind, t), kd = kernel_deriv(k.kind, t);
        if (kv == 0.0 && kd == 0.0) continue;
        const double mi = mass.empty() ? 1.0 / n : mass[i];
        const Scores sc = scores_star(loss, m, data.y(i) - eta_u);
        F += mi * kv * sc.chi;
        E += mi * kd * sc.psi;
        G += (mi * kd * sc.psi) * data.X.row(i).transpose();
    }
    if (!(std::abs(F) >= 1e-10)) throw NumericalError("degenerate curvature");
    return {E / (k.h * F), -G / (k.h * F), F};
}

EtaPoint eta_point(double u, const Eigen::VectorXd& beta, const Dataset& data, const KernelSpec& k,
                   const LossSpec& loss, const ErrorModel& m, std::span<const double> mass) {
    const Eigen::VectorXd proj = data.X * beta;
    const LocalSample s{{proj.data(), static_cast<std::size_t>(proj.size())},
                        {data.y.data(), static_cast<std::size_t>(data.y.size())},
                        mass};
    const LocalFit fit = local_m_constant(u, s, k, loss, m);
    const KernelSpec ku{k.kind, fit.h_used};
    EtaDerivatives d = eta_derivatives(u, beta, data, ku, loss, m, fit.a, mass);
    return {fit.a, d.du, std::move(d.dbeta)};
}

EtaSecondDerivatives eta_second_derivatives(double u, const Eigen::VectorXd& beta, const Dataset& data,
                                            const KernelSpec& k, const LossSpec& loss, const ErrorModel& m,
                                            std::span<const double> mass) {
    const int q = static_cast<int>(beta.size());
    const double du = 1e-3 * k.h, db = 1e-3;
    EtaSecondDerivatives out;
    {
        const EtaPoint p = eta_point(u + du, beta, data, k, loss, m, mass);
        const EtaPoint n = eta_point(u - du, beta, data, k, loss, m, mass);
        out.uu = (p.du - n.du) / (2.0 * du);
        out.u_beta = (p.dbeta - n.dbeta) / (2.0 * du);
    }
    out.beta_u.resize(q);
    out.beta_beta.resize(q, q);
    for (int j = 0; j < q; ++j) {
        Eigen::VectorXd bp = beta, bn = beta;
        bp(j) += db;
        bn(j) -= db;
        const EtaPoint p = eta_point(u, bp, data, k, loss, m, mass);
        const EtaPoint n = eta_point(u, bn, data, k, loss, m, mass);
        out.beta_u(j) = (p.du - n.du) / (2.0 * db);
        out.beta_beta.col(j) = (p.dbeta - n.dbeta) / (2.0 * db);
    }
    out.beta_beta = 0.5 * (out.beta_beta + out.beta_beta.transpose()).eval();
    return out;
}

}  // namespace sindex
