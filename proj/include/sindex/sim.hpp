#pragma once

#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sindex/bandwidth.hpp"

namespace sindex {

enum class Scheme { C0, M1, M2, M3, S1, S2, S3 };

std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);
// 3/4/5 for M1-M3, 100/500/1000 for S1-S3, 0 for C0.
double scheme_k(Scheme s);
bool is_moderate(Scheme s);

std::function<double(double)> link_function(const std::string& name);

struct SimConfig {
    std::size_t n = 100;
    std::size_t n_reps = 100;
    std::size_t q = 2;
    double gamma0 = 3.0;
    Eigen::VectorXd beta0 = Eigen::Vector2d(1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2);
    std::string link = "sin2pi";
    std::vector<Scheme> schemes{Scheme::C0};
    std::size_t K = 5;
    std::vector<double> h1_grid = bandwidth_grid(0.05, 0.35, 5);
    std::vector<double> h2_grid = bandwidth_grid(0.05, 0.35, 5);
    std::vector<std::string> estimators{"classical", "robust"};
    std::uint64_t base_seed = 0;
    TauMode tau_mode = TauMode::Indicator;
    std::string output = "sim";
    double contamination = 0.10;
    KernelKind kernel = KernelKind::Epanechnikov;
    std::size_t workers = 0;  // 0: SINDEX_WORKERS or hardware concurrency

    void validate() const;
    // 1000 replications with the fine 13- and 25-point bandwidth grids.
    static SimConfig full_scale();
};

SimConfig sim_config_from_json(const std::string& text);
SimConfig load_sim_config(const std::string& path);
std::string sim_config_to_json(const SimConfig& cfg);

// Orthogonal direction driving the moderate schemes: (-b2, b1) for q = 2,
// the same rotation in the first two coordinates otherwise.
Eigen::VectorXd beta_perp(const Eigen::VectorXd& beta0);

struct SimData {
    Dataset data;
    std::vector<char> contaminated;
    std::vector<double> eta0;  // eta_0(beta0' x_i)
};

// Covariates, errors and the contamination draws come from separate
// streams of the same seed, so every scheme shares the clean sample.
SimData generate(std::size_t n, Scheme scheme, std::uint64_t seed, const SimConfig& cfg);
Dataset gen_clean(std::size_t n, std::uint64_t seed, const SimConfig& cfg);
Dataset gen_contaminated(std::size_t n, Scheme scheme, std::uint64_t seed, const SimConfig& cfg);

double mse_beta(const std::vector<Eigen::VectorXd>& estimates, const Eigen::VectorXd& beta0);
double mse_eta(const std::vector<std::vector<double>>& sq_errors);
double medse_eta(const std::vector<std::vector<double>>& sq_errors);

struct PipelineConfig {
    LossFamily family = LossFamily::TukeyBisquare;
    KernelKind kernel = KernelKind::Epanechnikov;
    std::vector<double> h1_grid = bandwidth_grid(0.05, 0.35, 5);
    std::vector<double> h2_grid = bandwidth_grid(0.05, 0.35, 5);
    std::size_t K = 5;
    TauMode tau_mode = TauMode::Indicator;
    double target_eff = 0.90;
    double c_rcv = kTukeyEfficiencyC;
    std::optional<double> pilot_h;  // bandwidth of the initial S-fit; grid midpoint by default
    SphereOptions sphere;
};

struct PipelineResult {
    IndexFit fit;
    CvResult cv_h1;
    CvResult cv_h2;
};

// h1 by CV, three-step fit, then h2 by CV with the index held fixed.
PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& cfg, std::uint64_t seed);

struct RepRecord {
    Scheme scheme = Scheme::C0;
    std::string estimator;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    Eigen::VectorXd beta;
    double sq_err_beta = 0.0;
    std::vector<double> sq_err_eta;
    double h1 = 0.0, h2 = 0.0;
    double alpha_hat = 0.0;
    double gamma_hat = 0.0;
    double seconds = 0.0;
};

struct AggregateRow {
    Scheme scheme;
    std::string estimator;
    double mse_beta = 0.0;
    double mse_eta = 0.0;
    double medse_eta = 0.0;
    double median_h1 = 0.0;
    double median_h2 = 0.0;
    std::size_t n_reps = 0;
    std::size_t n_failed = 0;
    double wall_time = 0.0;
};

struct SimResult {
    std::vector<RepRecord> reps;
    std::vector<AggregateRow> aggregate;
    bool aborted = false;
    std::string report;
};

std::size_t worker_count(std::size_t requested);

// Runs every (scheme, rep) pair on a worker pool. Stops early and sets
// aborted once more than 20% of the reps of one estimator fail.
SimResult run_replications(const SimConfig& cfg);
std::vector<AggregateRow> aggregate(const std::vector<RepRecord>& reps, const SimConfig& cfg);

// <prefix>_reps.csv (one row per rep and estimator) and <prefix>_aggregate.csv.
void write_results(const SimResult& result, const std::string& prefix);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

// Header y,x1,...,xq. Errors carry the offending line number.
Dataset read_data_csv(const std::string& path, std::optional<std::size_t> expected_q = std::nullopt);
Dataset parse_data_csv(const std::string& text, std::optional<std::size_t> expected_q = std::nullopt);
void write_data_csv(const Dataset& data, const std::string& path);
std::string format_data_csv(const Dataset& data);

}  // namespace sindex
