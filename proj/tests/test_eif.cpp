#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sindex/eif.hpp"
#include "sindex/sim.hpp"

using namespace sindex;

namespace {

const LossSpec kTukey = LossSpec::tukey(kTukeyEfficiencyC);
const ErrorModel kLG = ErrorModel::log_gamma(1.0);
const KernelSpec kGauss{KernelKind::Gaussian, 0.1};

Eigen::VectorXd random_unit(std::mt19937_64& rng, int q) {
    std::normal_distribution<double> N;
    Eigen::VectorXd v(q);
    for (int j = 0; j < q; ++j) v(j) = N(rng);
    return v / v.norm();
}

// Data with the added point appended and masses (1 - eps)/n, eps.
struct Augmented {
    Dataset data;
    std::vector<double> mass;
};

Augmented augment(const Dataset& d, double y0, const Eigen::VectorXd& x0, double eps) {
    const std::size_t n = d.n();
    Augmented a;
    a.data.X.resize(n + 1, d.q());
    a.data.y.resize(n + 1);
    a.data.X.topRows(n) = d.X;
    a.data.X.row(n) = x0.transpose();
    a.data.y.head(n) = d.y;
    a.data.y(n) = y0;
    a.mass.assign(n + 1, (1.0 - eps) / n);
    a.mass[n] = eps;
    return a;
}

class EifFit : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        SimConfig cfg;
        data_ = new Dataset(gen_clean(50, 100, cfg));
        FitConfig fc;
        fc.kernel = KernelKind::Gaussian;
        fc.h1 = fc.h2 = 0.1;
        fc.fixed_alpha = kTukeyEfficiencyC;
        fc.tau = WeightFn::none(2);
        fit_ = new IndexFit(polish_stationary(fit_three_step(*data_, fc)));
        fc.tau.reset();
        trimmed_ = new IndexFit(fit_three_step(*data_, fc));
    }
    static void TearDownTestSuite() {
        delete data_;
        delete fit_;
        delete trimmed_;
    }
    static Dataset* data_;
    static IndexFit* fit_;
    static IndexFit* trimmed_;
};
Dataset* EifFit::data_ = nullptr;
IndexFit* EifFit::fit_ = nullptr;
IndexFit* EifFit::trimmed_ = nullptr;

}  // namespace

TEST(Rotation, IdentityAtTheLastAxis) {
    const Eigen::Vector3d e(0, 0, 1);
    EXPECT_EQ(canonical_rotation(e), Eigen::Matrix3d::Identity());
}

TEST(Rotation, MapsBetaToTheLastAxisAndIsOrthogonal) {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 100; ++k) {
        const int q = 2 + k % 4;
        const Eigen::VectorXd b = random_unit(rng, q);
        Dataset d;
        d.X = Eigen::MatrixXd::Random(5, q);
        d.y = Eigen::VectorXd::Zero(5);
        const CanonicalData c = rotate_to_canonical(d, b);
        EXPECT_LT((c.R * b - Eigen::VectorXd::Unit(q, q - 1)).norm(), 1e-14);
        EXPECT_LT((c.R.transpose() * c.R - Eigen::MatrixXd::Identity(q, q)).norm(), 1e-14);
        EXPECT_LT((c.data.X - d.X * c.R.transpose()).norm(), 1e-14);
    }
}

TEST_F(EifFit, LinkInfluenceVanishesAtTheMode) {
    const double u = 0.7;
    const Eigen::VectorXd& b = fit_->beta;
    const Eigen::VectorXd p = data_->X * b;
    const double a = local_m_constant(u, LocalSample{{p.data(), 50}, {data_->y.data(), 50}}, kGauss, kTukey, kLG).a;
    const Eigen::Vector2d x0 = b * u;
    EXPECT_NEAR(eif_eta(u, b, *data_, a + kLG.e0, x0, kGauss, kTukey, kLG), 0.0, 1e-12);
}

TEST_F(EifFit, LinkInfluenceOfAFarPointIsNegligible) {
    const Eigen::Vector2d x0 = fit_->beta * 5.0;
    EXPECT_NEAR(eif_eta(0.7, fit_->beta, *data_, 0.5, x0, kGauss, kTukey, kLG), 0.0, 1e-12);
    EXPECT_NEAR(eif_eta_du(0.7, fit_->beta, *data_, 0.5, x0, kGauss, kTukey, kLG), 0.0, 1e-12);
    EXPECT_LT(eif_eta_dbeta(0.7, fit_->beta, *data_, 0.5, x0, kGauss, kTukey, kLG).norm(), 1e-12);
}

TEST_F(EifFit, LinkInfluenceMatchesReweightedRefit) {
    const double eps = 1e-5;
    const Eigen::VectorXd& b = fit_->beta;
    for (double u : {0.4, 0.7, 1.0}) {
        const EtaPoint base = eta_point(u, b, *data_, kGauss, kTukey, kLG);
        for (double dy : {-0.6, 0.5, 1.0}) {
            const double y0 = base.eta + dy;
            const Eigen::VectorXd x0 = b * (u + 0.03);
            const Augmented a = augment(*data_, y0, x0, eps);
            const EtaPoint pert = eta_point(u, b, a.data, kGauss, kTukey, kLG, a.mass);
            const EtaPoint zero = eta_point(u, b, a.data, kGauss, kTukey, kLG,
                                            augment(*data_, y0, x0, 0.0).mass);
            const double oracle = (pert.eta - zero.eta) / eps;
            const double formula = eif_eta(u, b, *data_, y0, x0, kGauss, kTukey, kLG);
            ASSERT_GT(std::abs(oracle), 1e-2);
            EXPECT_NEAR(formula, oracle, 0.01 * std::abs(oracle)) << u << " " << dy;

            const double oracle_du = (pert.du - zero.du) / eps;
            EXPECT_NEAR(eif_eta_du(u, b, *data_, y0, x0, kGauss, kTukey, kLG), oracle_du, 0.02 * std::abs(oracle_du))
                << u << " " << dy;
            const Eigen::VectorXd oracle_db = (pert.dbeta - zero.dbeta) / eps;
            const Eigen::VectorXd db = eif_eta_dbeta(u, b, *data_, y0, x0, kGauss, kTukey, kLG);
            EXPECT_LT((db - oracle_db).norm(), 0.02 * oracle_db.norm()) << u << " " << dy;
        }
    }
}

TEST_F(EifFit, DirectionDerivativeInfluenceRotatesWithTheData) {
    std::mt19937_64 rng(4);
    const Eigen::Vector2d x0(0.4, 0.6);
    const Eigen::VectorXd db = eif_eta_dbeta(0.8, fit_->beta, *data_, 0.3, x0, kGauss, kTukey, kLG);
    for (int k = 0; k < 3; ++k) {
        const double th = std::uniform_real_distribution<double>(0.0, 6.28)(rng);
        Eigen::Matrix2d R;
        R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        const Dataset rd{data_->X * R.transpose(), data_->y};
        const Eigen::VectorXd dbr =
            eif_eta_dbeta(0.8, R * fit_->beta, rd, 0.3, R * x0, kGauss, kTukey, kLG);
        EXPECT_LT((dbr - R * db).norm(), 1e-8);
    }
}

TEST_F(EifFit, LastCanonicalCoordinateIsExactlyZero) {
    for (EifMode mode : {EifMode::Consistent, EifMode::Literal}) {
        const EifReport r = eif_beta(*fit_, 0.5, Eigen::Vector2d(0.3, 0.6), mode);
        EXPECT_EQ(r.eif_canonical(1), 0.0);
        EXPECT_LT((r.eif_beta - r.rotation.transpose() * r.eif_canonical).norm(), 1e-15);
        EXPECT_TRUE(r.eif_beta.allFinite());
    }
}

TEST_F(EifFit, IndexInfluenceMatchesReweightedRefit) {
    for (const auto& [y0, x0] : {std::pair<double, Eigen::Vector2d>{0.5, {0.3, 0.6}}, {-1.0, {0.5, 0.5}},
                                 {1.2, {0.8, 0.3}}}) {
        const Eigen::VectorXd f = eif_beta(*fit_, y0, x0).eif_beta;
        const Eigen::VectorXd o = eif_beta_oracle(*fit_, y0, x0, 1e-4);
        ASSERT_GT(o.norm(), 1e-3);
        EXPECT_LT((f - o).norm(), 0.05 * o.norm()) << y0;
    }
}

TEST_F(EifFit, SolverResidual) {
    const EifReport r = eif_beta(*fit_, 0.5, Eigen::Vector2d(0.3, 0.6));
    EXPECT_LT(r.solver_residual, 1e-10);
    // Recomputed from the reported pieces.
    const double a = r.M(0, 0) - r.tangent_shift;
    EXPECT_NEAR(a * r.eif_canonical(0) + r.ell(0), 0.0, 1e-10);
}

TEST_F(EifFit, FarTrimmedPointHasNoInfluence) {
    const EifReport r = eif_beta(*trimmed_, 0.5, Eigen::Vector2d(10.0, 10.0));
    EXPECT_LT(r.eif_beta.norm(), 1e-8);
}

TEST_F(EifFit, BoundedInTheResponse) {
    const EifContext ctx(*fit_);
    const Eigen::Vector2d x0(0.4, 0.5);
    double sup = 0.0, arg = 0.0;
    for (int s : {-1, 1}) {
        for (double e = -2.0; e <= 6.0; e += 0.25) {
            const double y0 = s * std::pow(10.0, e);
            const double v = ctx.evaluate(y0, x0).eif_beta.norm();
            EXPECT_TRUE(std::isfinite(v));
            if (v > sup) {
                sup = v;
                arg = y0;
            }
        }
    }
    EXPECT_GT(sup, 0.0);
    EXPECT_LE(std::abs(arg), 10.0);
    // The bisquare rejects the point outright.
    EXPECT_EQ(ctx.evaluate(1e6, x0).eif_beta.norm(), 0.0);
    EXPECT_EQ(ctx.evaluate(-1e6, x0).eif_beta.norm(), 0.0);
}

TEST_F(EifFit, MapHasOneCellPerGridPoint) {
    const std::vector<double> ys{-1.0, 0.0, 1.0};
    const std::vector<Eigen::VectorXd> xs{Eigen::Vector2d(0.2, 0.3), Eigen::Vector2d(0.5, 0.5),
                                          Eigen::Vector2d(10.0, 10.0)};
    const auto cells = eif_map(*trimmed_, ys, xs);
    ASSERT_EQ(cells.size(), 9u);
    for (const EifCell& c : cells) {
        if (c.flagged) continue;
        EXPECT_TRUE(std::isfinite(c.norm));
        if (c.x0(0) == 10.0) EXPECT_LT(c.norm, 1e-8);
    }
}

TEST_F(EifFit, OracleNeedsTwoCovariates) {
    SimConfig cfg;
    cfg.q = 3;
    cfg.beta0 = Eigen::Vector3d::Constant(1.0 / std::sqrt(3.0));
    const Dataset d = gen_clean(30, 1, cfg);
    FitConfig fc;
    fc.family = LossFamily::ClassicalSquared;
    const IndexFit f = fit_three_step(d, fc);
    EXPECT_THROW(eif_beta_oracle(f, 0.0, Eigen::Vector3d(0.5, 0.5, 0.5)), InputError);
}
