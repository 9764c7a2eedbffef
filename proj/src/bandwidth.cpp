#include "sindex/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace sindex {

namespace {

Dataset subset(const Dataset& d, const std::vector<std::size_t>& idx) {
    Dataset s;
    s.X.resize(static_cast<Eigen::Index>(idx.size()), d.X.cols());
    s.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        s.X.row(k) = d.X.row(idx[k]);
        s.y(k) = d.y(idx[k]);
    }
    return s;
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& fold) {
    std::vector<char> out(n, 0);
    for (std::size_t i : fold) out[i] = 1;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
        if (!out[i]) keep.push_back(i);
    return keep;
}

LossSpec fold_loss(const CvConfig& cfg) {
    return cfg.family == LossFamily::ClassicalSquared ? LossSpec::classical() : LossSpec::tukey(cfg.alpha);
}

void check_grid(std::vector<double>& grid) {
    if (grid.empty()) throw InputError("invalid input: empty bandwidth grid");
    for (double h : grid)
        if (!(h > 0.0) || !std::isfinite(h)) throw InputError("invalid input: bandwidths must be positive");
    std::sort(grid.begin(), grid.end());
}

}  // namespace

Partition kfold_partition(std::size_t n, std::size_t K, std::uint64_t seed) {
    if (K < 2) throw InputError("invalid input: K must be at least 2");
    if (K > n) throw InputError("invalid input: more folds than observations");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    Partition folds(K);
    for (std::size_t pos = 0; pos < n; ++pos) folds[pos % K].push_back(perm[pos]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::vector<double> bandwidth_grid(double lo, double hi, int count) {
    if (count < 1) throw InputError("invalid input: grid count must be positive");
    if (!(lo > 0.0) || !(hi >= lo)) throw InputError("invalid input: grid bounds");
    if (count == 1) return {lo};
    std::vector<double> g(count);
    for (int k = 0; k < count; ++k) g[k] = lo + (hi - lo) * k / (count - 1);
    return g;
}

std::vector<double> parse_range(const std::string& spec) {
    std::stringstream ss(spec);
    std::string a, b, c;
    const std::string err = "invalid grid '" + spec + "': expected lo:hi:count";
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c) || a.empty() || b.empty() ||
        c.empty())
        throw InputError(err);
    double lo, hi;
    int count;
    try {
        std::size_t p1, p2, p3;
        lo = std::stod(a, &p1);
        hi = std::stod(b, &p2);
        count = std::stoi(c, &p3);
        if (p1 != a.size() || p2 != b.size() || p3 != c.size()) throw InputError(err);
    } catch (const std::logic_error&) {
        throw InputError(err);
    }
    if (count < 1 || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw InputError(err);
    if (count == 1) return {lo};
    std::vector<double> g(count);
    for (int k = 0; k < count; ++k) g[k] = lo + (hi - lo) * k / (count - 1);
    return g;
}

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> g = parse_range(spec);
    if (!(g.front() > 0.0)) throw InputError("invalid grid '" + spec + "': bandwidths must be positive");
    return g;
}

double cv_term(double y, double yhat, const CvConfig& cfg) {
    const Deviance d = deviance(cfg.model, y, yhat);
    if (cfg.family == LossFamily::ClassicalSquared) return d.saturated ? kSaturatedDeviance : d.value;
    if (d.saturated) return 1.0;
    return rho(LossSpec::tukey(cfg.c_rcv), std::sqrt(d.value) / cfg.c_rcv);
}

std::vector<double> cv_predictions_h1(double h, const Dataset& data, const Partition& folds, const CvConfig& cfg) {
    const std::size_t n = data.n();
    std::vector<double> yhat(n, std::numeric_limits<double>::quiet_NaN());
    const LossSpec loss = fold_loss(cfg);
    const WeightFn tau = cfg.tau ? *cfg.tau : WeightFn::standard(data.q(), n);
    for (const auto& fold : folds) {
        try {
            const Dataset train = subset(data, complement(n, fold));
            FitConfig fc;
            fc.family = cfg.family;
            fc.model = cfg.model;
            fc.kernel = cfg.kernel;
            fc.h1 = fc.h2 = h;
            fc.tau = tau;
            fc.fixed_alpha = loss.alpha;
            fc.sphere = cfg.sphere;
            const IndexFit fit = fit_three_step(train, fc);
            const std::vector<double> p = fit.projections();
            const LocalSample s{p, {train.y.data(), static_cast<std::size_t>(train.y.size())}};
            for (std::size_t i : fold) {
                try {
                    const double u = data.X.row(i).dot(fit.beta);
                    yhat[i] = local_m_constant(u, s, KernelSpec{cfg.kernel, h}, loss, cfg.model).a;
                } catch (const NumericalError&) {
                }
            }
        } catch (const NumericalError&) {
        }
    }
    return yhat;
}

std::vector<double> cv_predictions_h2(double h, const Dataset& data, const Eigen::VectorXd& beta,
                                      const Partition& folds, const CvConfig& cfg) {
    const std::size_t n = data.n();
    std::vector<double> yhat(n, std::numeric_limits<double>::quiet_NaN());
    const LossSpec loss = fold_loss(cfg);
    const Eigen::VectorXd proj = data.X * beta;
    for (const auto& fold : folds) {
        const std::vector<std::size_t> keep = complement(n, fold);
        std::vector<double> p(keep.size()), y(keep.size());
        for (std::size_t k = 0; k < keep.size(); ++k) {
            p[k] = proj(keep[k]);
            y[k] = data.y(keep[k]);
        }
        const LocalSample s{p, y};
        for (std::size_t i : fold) {
            try {
                yhat[i] = local_m_linear(proj(i), s, KernelSpec{cfg.kernel, h}, loss, cfg.model).a;
            } catch (const NumericalError&) {
            }
        }
    }
    return yhat;
}

CvScore cv_score(const Dataset& data, const std::vector<double>& yhat, const CvConfig& cfg) {
    CvScore out{0.0, false};
    for (std::size_t i = 0; i < yhat.size(); ++i) {
        if (std::isfinite(yhat[i])) {
            out.score += cv_term(data.y(i), yhat[i], cfg);
        } else {
            out.score += cfg.family == LossFamily::ClassicalSquared ? kSaturatedDeviance : 1.0;
            out.flagged = true;
        }
    }
    return out;
}

double rcv_score(double h, const Dataset& data, const Partition& folds, const CvConfig& cfg) {
    CvConfig c = cfg;
    c.family = LossFamily::TukeyBisquare;
    return cv_score(data, cv_predictions_h1(h, data, folds, c), c).score;
}

double ccv_score(double h, const Dataset& data, const Partition& folds, const CvConfig& cfg) {
    CvConfig c = cfg;
    c.family = LossFamily::ClassicalSquared;
    return cv_score(data, cv_predictions_h1(h, data, folds, c), c).score;
}

std::size_t argmin_first(const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k)
        if (scores[k] < scores[best]) best = k;
    return best;
}

namespace {

template <class Predict>
CvResult select(const Dataset& data, std::vector<double> grid, std::size_t K, std::uint64_t seed, const CvConfig& cfg,
                Predict predict) {
    check_grid(grid);
    CvResult r;
    r.grid = grid;
    r.folds = kfold_partition(data.n(), K, seed);
    for (double h : grid) {
        const CvScore s = cv_score(data, predict(h, r.folds), cfg);
        r.scores.push_back(s.score);
        r.flagged.push_back(s.flagged);
    }
    if (std::all_of(r.flagged.begin(), r.flagged.end(), [](bool f) { return f; })) throw NumericalError("CV failed");
    r.chosen = grid[argmin_first(r.scores)];
    return r;
}

}  // namespace

CvResult select_h1(const Dataset& data, std::vector<double> grid, std::size_t K, std::uint64_t seed,
                   const CvConfig& cfg) {
    return select(data, std::move(grid), K, seed, cfg,
                  [&](double h, const Partition& f) { return cv_predictions_h1(h, data, f, cfg); });
}

CvResult select_h2(const Dataset& data, const Eigen::VectorXd& beta, std::vector<double> grid, std::size_t K,
                   std::uint64_t seed, const CvConfig& cfg) {
    return select(data, std::move(grid), K, seed, cfg,
                  [&](double h, const Partition& f) { return cv_predictions_h2(h, data, beta, f, cfg); });
}

}  // namespace sindex
