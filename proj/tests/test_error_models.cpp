#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "sindex/error_models.hpp"

using namespace sindex;

namespace {

double gk(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

}  // namespace

TEST(Density, LogGammaShapeOneAtZero) {
    EXPECT_NEAR(density(ErrorModel::log_gamma(1.0), 0.0), std::exp(-1.0), 1e-14);
}

TEST(Density, LogGammaMatchesGammaDensityChangeOfVariables) {
    // log G with G ~ Gamma(shape g, rate g): f(s) = g^g e^{g s} exp(-g e^s) / Gamma(g).
    for (double g : {0.5, 1.0, 3.0, 10.0}) {
        const ErrorModel m = ErrorModel::log_gamma(g);
        for (double s : {-4.0, -1.0, -0.2, 0.0, 0.3, 1.5}) {
            const double ref = std::exp(g * std::log(g) + g * s - g * std::exp(s) - std::lgamma(g));
            EXPECT_NEAR(density(m, s), ref, 1e-12 * std::max(1.0, ref)) << g << " " << s;
        }
    }
}

TEST(Density, LogGammaNormalizes) {
    const ErrorModel m = ErrorModel::log_gamma(3.0);
    const double total = gk([&](double s) { return density(m, s); }, -30.0, -2.0) +
                         gk([&](double s) { return density(m, s); }, -2.0, 10.0);
    EXPECT_NEAR(total, 1.0, 1e-8);
}

TEST(Density, GaussianMode) {
    EXPECT_NEAR(density(ErrorModel::gaussian(1.0), 0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-14);
}

TEST(Density, GeneralUnimodalNormalizesByQuadrature) {
    const ErrorModel m = ErrorModel::general([](double s) { return -0.5 * s * s; }, 0.0, 1.0);
    EXPECT_NEAR(density(m, 0.7), std::exp(-0.245) / std::sqrt(2.0 * std::numbers::pi), 1e-8);
}

TEST(Cdf, LogGammaMatchesRegularizedIncompleteGamma) {
    for (double g : {1.0, 3.0}) {
        const ErrorModel m = ErrorModel::log_gamma(g);
        for (double s : {-3.0, -0.5, 0.0, 0.4}) {
            EXPECT_NEAR(cdf(m, s), boost::math::gamma_p(g, g * std::exp(s)), 1e-9);
        }
    }
}

TEST(Deviance, ClosedForms) {
    const ErrorModel lg = ErrorModel::log_gamma(1.0);
    EXPECT_EQ(deviance(lg, 1.3, 1.3).value, 0.0);
    EXPECT_NEAR(deviance(lg, std::log(2.0), 0.0).value, 1.0 - std::log(2.0), 1e-15);
    EXPECT_NEAR(deviance_star(lg, 1.0).value, std::exp(1.0) - 2.0, 1e-15);
    EXPECT_NEAR(deviance_star(lg, -1.0).value, std::exp(-1.0), 1e-15);
    EXPECT_NEAR(deviance(ErrorModel::gaussian(1.0), 2.0, 0.0).value, 2.0, 1e-15);
}

TEST(Deviance, ZeroExactlyAtMode) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    for (const ErrorModel& m : {ErrorModel::log_gamma(2.0), ErrorModel::gaussian(1.5)}) {
        for (int k = 0; k < 100; ++k) {
            const double y = U(rng), a = U(rng);
            EXPECT_EQ(deviance(m, a + m.e0, a).value, 0.0);
            if (std::abs(y - a - m.e0) > 1e-6) EXPECT_GT(deviance(m, y, a).value, 0.0);
        }
    }
}

TEST(Deviance, EqualsStarOfResidual) {
    const ErrorModel m = ErrorModel::log_gamma(3.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-4.0, 4.0);
    for (int k = 0; k < 100; ++k) {
        const double y = U(rng), a = U(rng);
        EXPECT_EQ(deviance(m, y, a).value, deviance_star(m, y - a).value);
    }
}

TEST(Deviance, StrictlyConvexForLogGamma) {
    const ErrorModel m = ErrorModel::log_gamma(1.0);
    const double h = 1e-3;
    for (double u = -5.0; u <= 5.0; u += 0.05) {
        const double d2 = deviance_star(m, u + h).value - 2.0 * deviance_star(m, u).value + deviance_star(m, u - h).value;
        EXPECT_GT(d2, 0.0) << u;
    }
}

TEST(Deviance, AccurateNearZero) {
    // e^u - 1 - u = u^2/2 + u^3/6 + ... ; the naive difference loses all digits here.
    const ErrorModel m = ErrorModel::log_gamma(1.0);
    const double u = 1e-6;
    const double ref = u * u / 2.0 + u * u * u / 6.0 + u * u * u * u / 24.0;
    EXPECT_NEAR(deviance_star(m, u).value, ref, 1e-14 * ref);
}

TEST(Deviance, SaturatesInsteadOfOverflowing) {
    const Deviance d = deviance_star(ErrorModel::log_gamma(1.0), 800.0);
    EXPECT_TRUE(d.saturated);
    EXPECT_EQ(d.value, kSaturatedDeviance);
    EXPECT_FALSE(deviance_star(ErrorModel::log_gamma(1.0), 600.0).saturated);
}

TEST(Deviance, DerivativesMatchFiniteDifferences) {
    const ErrorModel m = ErrorModel::log_gamma(1.0);
    const double h = 1e-5;
    for (double u : {-2.0, -0.5, -0.05, 0.01, 0.15, 0.3, 1.7}) {
        const DevianceDerivs dd = deviance_derivs(m, u);
        const auto D = [&](double v) { return deviance_derivs(m, v); };
        EXPECT_NEAR(dd.d1, (D(u + h).d - D(u - h).d) / (2 * h), 1e-8);
        EXPECT_NEAR(dd.d2, (D(u + h).d1 - D(u - h).d1) / (2 * h), 1e-8);
        EXPECT_NEAR(dd.d3, (D(u + h).d2 - D(u - h).d2) / (2 * h), 1e-8);
    }
}

TEST(LevelSet, BothBranchesHitTheLevel) {
    const ErrorModel m = ErrorModel::log_gamma(3.0);
    for (double v : {0.01, 0.5, 2.0, 10.0}) {
        const auto [l, r] = deviance_level_set(m, v);
        EXPECT_LT(l, m.e0);
        EXPECT_GT(r, m.e0);
        EXPECT_NEAR(deviance_star(m, l).value, v, 1e-9 * std::max(1.0, v));
        EXPECT_NEAR(deviance_star(m, r).value, v, 1e-9 * std::max(1.0, v));
    }
}

TEST(Sampler, DeterministicUnderSeed) {
    const ErrorModel m = ErrorModel::log_gamma(3.0);
    EXPECT_EQ(sample_errors(m, 50, 9), sample_errors(m, 50, 9));
    EXPECT_NE(sample_errors(m, 50, 9), sample_errors(m, 50, 10));
}

class SamplerMoments : public ::testing::Test {
protected:
    static void SetUpTestSuite() { eps_ = sample_errors(ErrorModel::log_gamma(3.0), 100000, 2024); }
    static std::vector<double> eps_;
};
std::vector<double> SamplerMoments::eps_;

TEST_F(SamplerMoments, MeanOneOnTheGammaScale) {
    double s = 0.0;
    for (double e : eps_) s += std::exp(e);
    EXPECT_NEAR(s / eps_.size(), 1.0, 0.02);
}

TEST_F(SamplerMoments, VarianceIsTrigamma) {
    double m = 0.0, v = 0.0;
    for (double e : eps_) m += e;
    m /= eps_.size();
    for (double e : eps_) v += (e - m) * (e - m);
    v /= eps_.size() - 1;
    // Two routes for the reference: the special function and quadrature of the density.
    const ErrorModel lg = ErrorModel::log_gamma(3.0);
    const double mu = gk([&](double s) { return s * density(lg, s); }, -30.0, 10.0);
    const double var_q = gk([&](double s) { return (s - mu) * (s - mu) * density(lg, s); }, -30.0, 10.0);
    EXPECT_NEAR(var_q, boost::math::trigamma(3.0), 1e-8);
    EXPECT_NEAR(v, boost::math::trigamma(3.0), 0.02);
}

TEST_F(SamplerMoments, ModeNearZero) {
    // Gaussian kernel density estimate maximized on a fine grid.
    std::vector<double> sorted = eps_;
    std::sort(sorted.begin(), sorted.end());
    const double bw = 0.05;
    double best = -1.0, arg = 0.0;
    for (double s = -0.5; s <= 0.5; s += 0.005) {
        const auto lo = std::lower_bound(sorted.begin(), sorted.end(), s - 5 * bw);
        const auto hi = std::upper_bound(sorted.begin(), sorted.end(), s + 5 * bw);
        double f = 0.0;
        for (auto it = lo; it != hi; ++it) f += std::exp(-0.5 * std::pow((*it - s) / bw, 2));
        if (f > best) {
            best = f;
            arg = s;
        }
    }
    EXPECT_NEAR(arg, 0.0, 0.05);
}

TEST_F(SamplerMoments, KolmogorovSmirnovAgainstCdf) {
    std::vector<double> sorted = eps_;
    std::sort(sorted.begin(), sorted.end());
    const ErrorModel m = ErrorModel::log_gamma(3.0);
    double ks = 0.0;
    const double n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); i += 7) {
        const double F = cdf(m, sorted[i]);
        ks = std::max({ks, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
    }
    EXPECT_LT(ks, 0.01);
}

TEST(Sampler, SmallShapeStillMeanOne) {
    const auto e = sample_errors(ErrorModel::log_gamma(0.5), 100000, 3);
    double s = 0.0;
    for (double v : e) s += std::exp(v);
    EXPECT_NEAR(s / e.size(), 1.0, 0.03);
}

TEST(ErrorModel, RejectsInvalidShape) {
    EXPECT_THROW(ErrorModel::log_gamma(-1.0), InputError);
    EXPECT_THROW(ErrorModel::gaussian(0.0), InputError);
}
