#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "sindex/index_estimator.hpp"
#include "sindex/sim.hpp"

using namespace sindex;

namespace {

const ErrorModel kLG = ErrorModel::log_gamma(1.0);

Eigen::VectorXd unit(std::initializer_list<double> v) {
    Eigen::VectorXd b(v.size());
    int j = 0;
    for (double x : v) b(j++) = x;
    return b / b.norm();
}

Dataset linear_noiseless(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U;
    Dataset d;
    d.X.resize(n, 2);
    d.y.resize(n);
    const Eigen::Vector2d b0(1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2);
    for (std::size_t i = 0; i < n; ++i) {
        d.X(i, 0) = U(rng);
        d.X(i, 1) = U(rng);
        d.y(i) = 0.3 + 0.8 * d.X.row(i).dot(b0);
    }
    return d;
}

double rho_tukey(double s) {
    return std::abs(s) >= 1.0 ? 1.0 : 1.0 - std::pow(1.0 - s * s, 3);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Eigen::MatrixXd random_rotation(std::size_t q, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    Eigen::MatrixXd A(q, q);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) A(i, j) = N(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Q = qr.householderQ();
    if (Q.determinant() < 0) Q.col(0) *= -1.0;
    return Q;
}

}  // namespace

TEST(WeightTau, CenterAndFarPoints) {
    WeightFn w = WeightFn::standard(2, 100);
    const Eigen::Vector2d c(0.5, 0.5);
    EXPECT_EQ(weight_tau(w, c), 1.0);
    const Eigen::Vector2d far = c + Eigen::Vector2d(2.0 * w.radius, 0.0);
    EXPECT_EQ(weight_tau(w, far), 0.0);
    w.mode = TauMode::DistanceTimesIndicator;
    EXPECT_EQ(weight_tau(w, c), 0.0);
    EXPECT_EQ(weight_tau(w, far), 0.0);
    const Eigen::Vector2d inside = c + Eigen::Vector2d(0.3, 0.0);
    EXPECT_NEAR(weight_tau(w, inside), 0.3, 1e-15);
}

TEST(WeightTau, TrimmingRadiusAtOneHundred) {
    EXPECT_NEAR(trimming_radius(100), 0.4943, 1e-4);
}

TEST(WeightTau, NeverNegative) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-1.0, 2.0);
    for (TauMode mode : {TauMode::Indicator, TauMode::DistanceTimesIndicator}) {
        const WeightFn w = WeightFn::standard(3, 50, mode);
        for (int k = 0; k < 200; ++k) {
            const Eigen::Vector3d x(U(rng), U(rng), U(rng));
            const double t = weight_tau(w, x);
            EXPECT_GE(t, 0.0);
            if ((x - w.center).norm() > w.radius) EXPECT_EQ(t, 0.0);
        }
    }
}

TEST(Theta, Examples) {
    EXPECT_NEAR(beta_to_theta(unit({1.0, 1.0}))(0), 1.0, 1e-15);
    const Eigen::VectorXd b = theta_to_beta(Eigen::VectorXd::Zero(3));
    EXPECT_EQ(b, Eigen::VectorXd::Unit(4, 3));
}

TEST(Theta, RoundTrip) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N;
    for (int k = 0; k < 100; ++k) {
        const int q = 2 + k % 4;
        Eigen::VectorXd b(q);
        for (int j = 0; j < q; ++j) b(j) = N(rng);
        b = canonical_sign(b);
        const Eigen::VectorXd t = beta_to_theta(b);
        EXPECT_LT((theta_to_beta(t) - b).norm(), 1e-12);
        EXPECT_LT((t * b(q - 1) - b.head(q - 1)).norm(), 1e-12);
    }
}

TEST(Theta, BoundaryThrows) {
    EXPECT_THROW(beta_to_theta(Eigen::Vector2d(1.0, 0.0)), InputError);
}

TEST(Sphere, KnownMinimizer) {
    for (const Eigen::VectorXd& v : {unit({0.3, 0.8}), unit({-0.5, 0.2, 0.7}), unit({0.1, -0.4, 0.3, 0.6})}) {
        const auto r = optimize_sphere([&](const Eigen::VectorXd& b) { return (b - v).squaredNorm(); }, v.size(), {});
        EXPECT_LT((r.beta - v).norm(), 1e-5) << v.transpose();
        EXPECT_NEAR(r.beta.norm(), 1.0, 1e-12);
    }
}

TEST(Sphere, AntipodalObjectiveGivesPositiveLastComponent) {
    for (const Eigen::VectorXd& v : {unit({0.6, -0.8}), unit({0.2, 0.5, -0.9})}) {
        const auto r = optimize_sphere([&](const Eigen::VectorXd& b) { return -std::pow(b.dot(v), 2); }, v.size(), {});
        EXPECT_GT(r.beta(v.size() - 1), 0.0);
        EXPECT_LT((r.beta + v).norm(), 1e-4);
    }
}

TEST(Sphere, RefinementNeverWorseThanGrid) {
    auto f = [](const Eigen::VectorXd& b) { return std::sin(7.0 * b(0)) + b(1) * b(1); };
    const auto r = optimize_sphere(f, 2, {});
    double grid_best = 1e300;
    for (int k = 0; k < 64; ++k) {
        const double th = k * std::numbers::pi / 64;
        grid_best = std::min(grid_best, f(canonical_sign(Eigen::Vector2d(std::cos(th), std::sin(th)))));
    }
    EXPECT_LE(r.value, grid_best);
}

TEST(ProfileObjective, NoiselessLinearIsNearlyZero) {
    const Dataset d = linear_noiseless(200, 4);
    const auto tau = tau_weights(WeightFn::none(2), d.X);
    for (const ErrorModel& m : {kLG, ErrorModel::gaussian(1.0)}) {
        const double v = profile_objective(unit({1.0, 1.0}), d, KernelSpec{KernelKind::Epanechnikov, 0.1},
                                           LossSpec::classical(), m, tau);
        EXPECT_LT(v, 1e-3);
        EXPECT_GE(v, 0.0);
    }
}

TEST(ProfileObjective, PermutationInvariant) {
    SimConfig cfg;
    const Dataset d = gen_clean(80, 3, cfg);
    std::vector<int> perm(d.n());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
    Dataset p;
    p.X.resize(d.n(), 2);
    p.y.resize(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) {
        p.X.row(i) = d.X.row(perm[i]);
        p.y(i) = d.y(perm[i]);
    }
    const WeightFn w = WeightFn::standard(2, d.n());
    const KernelSpec k{KernelKind::Epanechnikov, 0.15};
    for (const LossSpec& loss : {LossSpec::classical(), LossSpec::tukey(1.6394)}) {
        const double a = profile_objective(unit({1.0, 2.0}), d, k, loss, kLG, tau_weights(w, d.X));
        const double b = profile_objective(unit({1.0, 2.0}), p, k, loss, kLG, tau_weights(w, p.X));
        // Only the summation order differs.
        EXPECT_NEAR(a, b, 1e-13 * std::abs(a));
    }
}

TEST(ProfileObjective, TinyTrimmingKeepsOnlyCentralPoints) {
    SimConfig cfg;
    Dataset d = gen_clean(60, 5, cfg);
    d.X.row(0) << 0.5, 0.5;
    const WeightFn tiny{Eigen::Vector2d(0.5, 0.5), 1e-6, TauMode::Indicator};
    const auto tau = tau_weights(tiny, d.X);
    EXPECT_EQ(std::count(tau.begin(), tau.end(), 1.0), 1);
    const KernelSpec k{KernelKind::Epanechnikov, 0.2};
    const Eigen::VectorXd b = unit({1.0, 1.0});
    const Eigen::VectorXd proj = d.X * b;
    const LocalFit f = local_m_constant(proj(0), LocalSample{{proj.data(), 60}, {d.y.data(), 60}}, k,
                                        LossSpec::classical(), kLG);
    const double expect = phi(LossSpec::classical(), kLG, d.y(0), f.a) / 60.0;
    EXPECT_NEAR(profile_objective(b, d, k, LossSpec::classical(), kLG, tau), expect, 1e-15);
}

TEST(GlobalScale, SolvesItsEquation) {
    std::mt19937_64 rng(6);
    std::exponential_distribution<double> E;
    std::vector<double> d(50), t(50);
    for (int i = 0; i < 50; ++i) {
        d[i] = E(rng);
        t[i] = i % 3 ? 1.0 : 0.5;
    }
    const ScaleRoot r = global_scale(d, t);
    double lhs = 0.0, tot = 0.0;
    for (int i = 0; i < 50; ++i) {
        lhs += t[i] * rho_tukey(std::sqrt(d[i]) / r.s);
        tot += t[i];
    }
    EXPECT_NEAR(lhs, kDefaultB * tot, 1e-9);
}

TEST(GlobalScale, ScalesWithTheResiduals) {
    std::vector<double> d{0.1, 0.4, 0.9, 2.0, 0.05}, t(5, 1.0), d4(5);
    for (int i = 0; i < 5; ++i) d4[i] = 4.0 * d[i];
    EXPECT_NEAR(global_scale(d4, t).s, 2.0 * global_scale(d, t).s, 1e-10);
}

TEST(GlobalScale, ZeroWeightsThrow) {
    std::vector<double> d{1.0, 2.0}, t{0.0, 0.0};
    EXPECT_THROW(global_scale(d, t), InputError);
}

TEST(GlobalScale, AllZeroDeviancesAreDegenerate) {
    std::vector<double> d(5, 0.0), t(5, 1.0);
    EXPECT_TRUE(global_scale(d, t).degenerate);
}

TEST(InitialFit, NoiselessDataFails) {
    const Dataset d = linear_noiseless(40, 7);
    const auto tau = tau_weights(WeightFn::none(2), d.X);
    SphereOptions so;
    so.grid = 8;
    // A local S-location interpolates noiseless responses, leaving no scale to estimate.
    try {
        const NuisanceFit nf = fit_initial_s(d, KernelSpec{KernelKind::Epanechnikov, 0.05}, kLG, tau, kDefaultB,
                                             0.90, so);
        EXPECT_LT(nf.s_n, 1e-2);
    } catch (const NumericalError& e) {
        EXPECT_STREQ(e.what(), "initial fit failed");
    }
}

TEST(InitialFit, ScaleResidualAndInvariants) {
    SimConfig cfg;
    const Dataset d = gen_clean(100, 8, cfg);
    const auto tau = tau_weights(WeightFn::standard(2, 100), d.X);
    const KernelSpec k{KernelKind::Epanechnikov, 0.2};
    const NuisanceFit nf = fit_initial_s(d, k, kLG, tau);
    EXPECT_GE(nf.c_hat, nf.s_n);
    EXPECT_GT(nf.gamma_hat, 0.0);
    EXPECT_NEAR(nf.beta_tilde.norm(), 1.0, 1e-12);
    EXPECT_GT(nf.beta_tilde(1), 0.0);
    const Eigen::VectorXd proj = d.X * nf.beta_tilde;
    const LocalSample s{{proj.data(), 100}, {d.y.data(), 100}};
    double lhs = 0.0, tot = 0.0;
    for (int i = 0; i < 100; ++i) {
        if (tau[i] == 0.0) continue;
        const double a = local_s_location(proj(i), s, k, kLG).a;
        lhs += rho_tukey(std::sqrt(deviance(kLG, d.y(i), a).value) / nf.s_n);
        tot += 1.0;
    }
    EXPECT_NEAR(lhs, kDefaultB * tot, 1e-9);
}

TEST(InitialFit, ShapeEstimateIsInTheRightBand) {
    SimConfig cfg;
    std::vector<double> g;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Dataset d = gen_clean(400, 100 + seed, cfg);
        const auto tau = tau_weights(WeightFn::standard(2, 400), d.X);
        g.push_back(fit_initial_s(d, KernelSpec{KernelKind::Epanechnikov, 0.2}, kLG, tau).gamma_hat);
    }
    const double med = median(g);
    EXPECT_GE(med, 2.0);
    EXPECT_LE(med, 4.5);
}

TEST(ThreeStep, ClassicalCleanMeanSquaredError) {
    SimConfig cfg;
    std::vector<Eigen::VectorXd> est;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        FitConfig fc;
        fc.family = LossFamily::ClassicalSquared;
        est.push_back(fit_three_step(gen_clean(100, seed, cfg), fc).beta);
    }
    EXPECT_LE(mse_beta(est, cfg.beta0), 0.02);
}

TEST(ThreeStep, BoundedLossResistsModerateContamination) {
    SimConfig cfg;
    std::vector<Eigen::VectorXd> cl, rb;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Dataset d = gen_contaminated(100, Scheme::M1, seed, cfg);
        FitConfig fc;
        fc.family = LossFamily::ClassicalSquared;
        cl.push_back(fit_three_step(d, fc).beta);
        fc.family = LossFamily::TukeyBisquare;
        fc.fixed_alpha = 1.6394;
        rb.push_back(fit_three_step(d, fc).beta);
    }
    EXPECT_LE(mse_beta(rb, cfg.beta0), 0.03);
    EXPECT_GE(mse_beta(cl, cfg.beta0), 0.1);
}

TEST(ThreeStep, UnitDirectionWithPositiveLastComponent) {
    SimConfig cfg;
    const Dataset d = gen_clean(60, 11, cfg);
    FitConfig fc;
    fc.family = LossFamily::ClassicalSquared;
    fc.init = Eigen::Vector2d(1.0, -1.0);
    const IndexFit f = fit_three_step(d, fc);
    EXPECT_NEAR(f.beta.norm(), 1.0, 1e-12);
    EXPECT_GT(f.beta(1), 0.0);
    EXPECT_LT((f.theta_star * f.beta(1) - f.beta.head(1)).norm(), 1e-12);
}

TEST(ThreeStep, NoWorseThanTheInitialPoint) {
    SimConfig cfg;
    const Dataset d = gen_contaminated(80, Scheme::S1, 12, cfg);
    FitConfig fc;
    fc.fixed_alpha = 1.6394;
    fc.init = unit({0.2, 1.0});
    const IndexFit f = fit_three_step(d, fc);
    const double at_init = profile_objective(*fc.init, d, KernelSpec{fc.kernel, fc.h1}, f.loss, f.model,
                                             tau_weights(f.tau, d.X));
    EXPECT_LE(f.objective, at_init + 1e-12);
}

TEST(ThreeStep, RotationEquivariance) {
    SimConfig cfg;
    const Dataset d = gen_clean(100, 13, cfg);
    FitConfig fc;
    fc.family = LossFamily::ClassicalSquared;
    fc.tau = WeightFn::none(2);
    const IndexFit f = fit_three_step(d, fc);
    for (std::uint64_t seed : {1, 2, 3}) {
        const Eigen::MatrixXd R = random_rotation(2, seed);
        const Dataset r{d.X * R.transpose(), d.y};
        const IndexFit fr = fit_three_step(r, fc);
        EXPECT_LT((fr.beta - canonical_sign(R * f.beta)).norm(), 1e-3);
    }
}

TEST(ThreeStep, ClassicalFamilyIgnoresNuisance) {
    SimConfig cfg;
    const Dataset d = gen_clean(60, 14, cfg);
    FitConfig fc;
    fc.family = LossFamily::ClassicalSquared;
    const IndexFit f = fit_three_step(d, fc);
    EXPECT_FALSE(f.nuisance.has_value());
    EXPECT_EQ(f.alpha_hat, 1.0);
}

class SymmetricNormal : public ::testing::Test {
protected:
    static Dataset normal_flat(std::uint64_t seed, double scale = 1.0) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U;
        std::normal_distribution<double> N;
        Dataset d;
        d.X.resize(200, 2);
        d.y.resize(200);
        for (int i = 0; i < 200; ++i) {
            d.X(i, 0) = U(rng);
            d.X(i, 1) = U(rng);
            d.y(i) = scale * N(rng);
        }
        return d;
    }
};

TEST_F(SymmetricNormal, ScaleIsFisherConsistent) {
    std::vector<double> s;
    for (std::uint64_t seed = 0; seed < 20; ++seed) s.push_back(*fit_symmetric_mm(normal_flat(seed), {}).sigma_hat);
    const double med = median(s);
    EXPECT_GE(med, 0.8);
    EXPECT_LE(med, 1.2);
}

TEST_F(SymmetricNormal, LinearLinkDirection) {
    std::vector<double> err;
    const Eigen::Vector2d b0(1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Dataset d = normal_flat(seed, 0.1);
        for (int i = 0; i < 200; ++i) d.y(i) += 2.0 * d.X.row(i).dot(b0);
        err.push_back((fit_symmetric_mm(d, {}).beta - b0).norm());
    }
    EXPECT_LE(median(err), 0.1);
}

TEST_F(SymmetricNormal, ScaleEquivariance) {
    Dataset d = normal_flat(5);
    for (int i = 0; i < 200; ++i) d.y(i) += std::sin(3.0 * (d.X(i, 0) + 2.0 * d.X(i, 1)));
    const IndexFit f = fit_symmetric_mm(d, {});
    Dataset d3 = d;
    d3.y *= 3.0;
    const IndexFit f3 = fit_symmetric_mm(d3, {});
    EXPECT_NEAR(*f3.sigma_hat, 3.0 * *f.sigma_hat, 1e-6 * *f3.sigma_hat);
    EXPECT_LT((f3.beta - f.beta).norm(), 1e-3);
}

class Covariance : public ::testing::Test {
protected:
    static IndexFit classical_fit(std::size_t n, std::uint64_t seed) {
        SimConfig cfg;
        FitConfig fc;
        fc.family = LossFamily::ClassicalSquared;
        return fit_three_step(gen_clean(n, seed, cfg), fc);
    }
};

TEST_F(Covariance, SandwichPiecesArePositiveSemidefinite) {
    SimConfig cfg;
    FitConfig fc;
    fc.fixed_alpha = 1.6394;
    const IndexFit f = fit_three_step(gen_clean(100, 21, cfg), fc);
    const CovarianceResult c = asymptotic_covariance(f);
    for (const Eigen::MatrixXd& M : {c.Sigma1, c.cov_tangent, c.cov_beta}) {
        EXPECT_LT((M - M.transpose()).norm(), 1e-12 * (1.0 + M.norm()));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    }
}

TEST_F(Covariance, ClassicalInformationFactorizes) {
    // Errors are independent of x, so sum chi_i nu nu' / n ~ mean(chi) sum nu nu' / n.
    const IndexFit f = classical_fit(400, 22);
    const CovarianceResult c = asymptotic_covariance(f);
    const Eigen::MatrixXd& R = c.rotation;
    const Dataset rot{f.data.X * R.transpose(), f.data.y};
    const auto tw = tau_weights(f.tau, f.data.X);
    const Eigen::VectorXd eq = Eigen::VectorXd::Unit(2, 1);
    double nn = 0.0, chi = 0.0, cnt = 0.0;
    for (std::size_t i = 0; i < f.data.n(); ++i) {
        if (tw[i] == 0.0) continue;
        const Eigen::VectorXd xi = rot.X.row(i).transpose();
        const EtaPoint ep = eta_point(xi(1), eq, rot, KernelSpec{f.kernel, f.h1}, f.loss, f.model);
        const double nu = ep.dbeta(0) + ep.du * xi(0);
        nn += nu * nu;
        chi += scores_star(f.loss, f.model, f.data.y(i) - ep.eta).chi;
        cnt += 1.0;
    }
    const double factored = (chi / cnt) * nn / f.data.n();
    EXPECT_NEAR(c.B1(0, 0), factored, 0.1 * factored);
}

TEST_F(Covariance, WaldCoverage) {
    const double theta0 = 1.0;
    int covered = 0;
    const double z = boost::math::quantile(boost::math::normal(), 0.975);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const IndexFit f = classical_fit(200, 1000 + seed);
        const CovarianceResult c = asymptotic_covariance(f);
        if (std::abs(f.theta_star(0) - theta0) <= z * std::sqrt(c.cov_theta(0, 0))) ++covered;
    }
    EXPECT_GE(covered, 85);
    EXPECT_LE(covered, 99);
}
