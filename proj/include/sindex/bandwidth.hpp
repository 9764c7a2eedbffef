#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sindex/index_estimator.hpp"

namespace sindex {

using Partition = std::vector<std::vector<std::size_t>>;

Partition kfold_partition(std::size_t n, std::size_t K, std::uint64_t seed);

// count equidistant points on [lo, hi].
std::vector<double> bandwidth_grid(double lo, double hi, int count);
// "lo:hi:count"; parse_grid also requires lo > 0.
std::vector<double> parse_range(const std::string& spec);
std::vector<double> parse_grid(const std::string& spec);

struct CvConfig {
    LossFamily family = LossFamily::TukeyBisquare;
    ErrorModel model = ErrorModel::log_gamma(1.0);
    KernelKind kernel = KernelKind::Epanechnikov;
    std::optional<WeightFn> tau;
    double c_rcv = kTukeyEfficiencyC;  // constant of the robust criterion
    double alpha = 1.0;                // tuning constant of the robust fold fits
    SphereOptions sphere;
};

struct CvResult {
    std::vector<double> grid;
    std::vector<double> scores;
    std::vector<bool> flagged;
    double chosen = 0.0;
    Partition folds;
};

// One criterion term: rho_T(sqrt(d)/c) for the robust family, d otherwise.
double cv_term(double y, double yhat, const CvConfig& cfg);

// Out-of-fold predictions; NaN where a prediction failed.
std::vector<double> cv_predictions_h1(double h, const Dataset& data, const Partition& folds, const CvConfig& cfg);
std::vector<double> cv_predictions_h2(double h, const Dataset& data, const Eigen::VectorXd& beta,
                                      const Partition& folds, const CvConfig& cfg);

struct CvScore {
    double score;
    bool flagged;
};
// Failed predictions contribute rho_max = 1 (robust) or the saturated
// deviance (classical) and flag the score.
CvScore cv_score(const Dataset& data, const std::vector<double>& yhat, const CvConfig& cfg);

double rcv_score(double h, const Dataset& data, const Partition& folds, const CvConfig& cfg);
double ccv_score(double h, const Dataset& data, const Partition& folds, const CvConfig& cfg);

CvResult select_h1(const Dataset& data, std::vector<double> grid, std::size_t K, std::uint64_t seed,
                   const CvConfig& cfg);
CvResult select_h2(const Dataset& data, const Eigen::VectorXd& beta, std::vector<double> grid, std::size_t K,
                   std::uint64_t seed, const CvConfig& cfg);

// Ties go to the smaller bandwidth.
std::size_t argmin_first(const std::vector<double>& scores);

}  // namespace sindex
