#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sindex/eif.hpp"
#include "sindex/sim.hpp"

using namespace sindex;

namespace {

struct FitOptions {
    std::string data, loss = "tukey", kernel = "epanechnikov", h1_grid = "0.05:0.35:5", h2_grid = "0.05:0.35:5";
    std::size_t kfolds = 5;
    std::uint64_t seed = 0;
    std::size_t q = 0;
    std::string tau_mode = "indicator";
    double eff = 0.90;
};

void add_fit_options(CLI::App* app, FitOptions& o) {
    app->add_option("--data", o.data, "CSV with header y,x1,...,xq")->required();
    app->add_option("--loss", o.loss, "tukey or classical")->check(CLI::IsMember({"tukey", "classical"}));
    app->add_option("--kernel", o.kernel)->check(CLI::IsMember({"epanechnikov", "gaussian"}));
    app->add_option("--kfolds", o.kfolds, "cross-validation folds");
    app->add_option("--seed", o.seed, "fold partition seed")->required();
    app->add_option("--h1-grid", o.h1_grid, "lo:hi:count");
    app->add_option("--h2-grid", o.h2_grid, "lo:hi:count");
    app->add_option("--q", o.q, "expected number of covariates");
    app->add_option("--tau", o.tau_mode)->check(CLI::IsMember({"indicator", "distance"}));
    app->add_option("--eff", o.eff, "target efficiency of the tuning constant");
}

PipelineConfig pipeline_config(const FitOptions& o) {
    PipelineConfig pc;
    pc.family = o.loss == "tukey" ? LossFamily::TukeyBisquare : LossFamily::ClassicalSquared;
    pc.kernel = o.kernel == "gaussian" ? KernelKind::Gaussian : KernelKind::Epanechnikov;
    pc.h1_grid = parse_grid(o.h1_grid);
    pc.h2_grid = parse_grid(o.h2_grid);
    pc.K = o.kfolds;
    pc.tau_mode = o.tau_mode == "distance" ? TauMode::DistanceTimesIndicator : TauMode::Indicator;
    pc.target_eff = o.eff;
    return pc;
}

Dataset load(const FitOptions& o) {
    return read_data_csv(o.data, o.q ? std::optional<std::size_t>(o.q) : std::nullopt);
}

std::string vec(const Eigen::VectorXd& v) {
    std::string s;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%.6f", j ? " " : "", v(j));
        s += buf;
    }
    return s;
}

int cmd_calibrate(double gamma, double eff, double floor) {
    const Calibration c = calibrate_tuning(gamma, eff, floor);
    std::printf("gamma       %.6f\n", gamma);
    std::printf("target_eff  %.4f\n", eff);
    std::printf("c           %.6f\n", c.c);
    std::printf("efficiency  %.6f\n", c.efficiency);
    std::printf("s_star      %.6f\n", s_star(gamma));
    std::printf("floor_binds %d\n", c.floor_binds ? 1 : 0);
    std::printf("unreachable %d\n", c.unreachable ? 1 : 0);
    return 0;
}

int cmd_fit(const FitOptions& o, const std::string& json_out) {
    const Dataset data = load(o);
    const PipelineResult r = run_pipeline(data, pipeline_config(o), o.seed);
    const IndexFit& f = r.fit;
    nlohmann::json j;
    j["beta"] = std::vector<double>(f.beta.data(), f.beta.data() + f.beta.size());
    j["theta_star"] = std::vector<double>(f.theta_star.data(), f.theta_star.data() + f.theta_star.size());
    j["h1"] = f.h1;
    j["h2"] = f.h2;
    j["c_hat"] = f.loss.alpha;
    j["objective"] = f.objective;
    j["sphere_flagged"] = f.sphere_flagged;
    std::printf("beta        %s\n", vec(f.beta).c_str());
    std::printf("theta_star  %s\n", vec(f.theta_star).c_str());
    std::printf("h1          %.4f\n", f.h1);
    std::printf("h2          %.4f\n", f.h2);
    if (f.gamma_hat) {
        std::printf("gamma_hat   %.6f\n", *f.gamma_hat);
        j["gamma_hat"] = *f.gamma_hat;
    } else {
        std::printf("gamma_hat   NA\n");
    }
    std::printf("c_hat       %.6f\n", f.loss.alpha);
    try {
        const CovarianceResult cov = asymptotic_covariance(f);
        const Eigen::VectorXd se = cov.cov_theta.diagonal().cwiseSqrt();
        std::printf("se_theta    %s\n", vec(se).c_str());
        j["se_theta"] = std::vector<double>(se.data(), se.data() + se.size());
    } catch (const NumericalError& e) {
        std::printf("se_theta    NA (%s)\n", e.what());
    }
    if (!json_out.empty()) {
        std::ofstream out(json_out);
        if (!out) throw InputError("cannot write '" + json_out + "'");
        out << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_gen(std::size_t n, const std::string& scheme, std::uint64_t seed, const std::string& config,
            const std::string& out) {
    SimConfig cfg = config.empty() ? SimConfig{} : load_sim_config(config);
    const SimData sd = generate(n ? n : cfg.n, parse_scheme(scheme), seed, cfg);
    write_data_csv(sd.data, out);
    return 0;
}

int cmd_sim(SimConfig cfg, bool quiet) {
    const SimResult r = run_replications(cfg);
    write_results(r, cfg.output);
    if (!quiet) std::fputs(aggregate_csv(r.aggregate).c_str(), stdout);
    if (r.aborted) {
        std::fprintf(stderr, "%s\n", r.report.c_str());
        return 2;
    }
    return 0;
}

int cmd_eif(const FitOptions& o, const std::string& y_grid, const std::string& x_grid, const std::string& mode,
            double h1, double h2, const std::string& out_path) {
    const Dataset data = load(o);
    IndexFit fit;
    if (h1 > 0.0) {
        PipelineConfig pc = pipeline_config(o);
        FitConfig fc;
        fc.family = pc.family;
        fc.kernel = pc.kernel;
        fc.h1 = h1;
        fc.h2 = h2 > 0.0 ? h2 : h1;
        fc.tau = WeightFn::standard(data.q(), data.n(), pc.tau_mode);
        fc.target_eff = pc.target_eff;
        fit = fit_three_step(data, fc);
    } else {
        fit = run_pipeline(data, pipeline_config(o), o.seed).fit;
    }
    const std::vector<double> ys = parse_range(y_grid), xs = parse_range(x_grid);
    const std::size_t q = data.q();
    std::vector<Eigen::VectorXd> xgrid;
    std::vector<std::size_t> idx(q, 0);
    for (;;) {
        Eigen::VectorXd x(q);
        for (std::size_t j = 0; j < q; ++j) x(j) = xs[idx[j]];
        xgrid.push_back(x);
        std::size_t j = 0;
        while (j < q && ++idx[j] == xs.size()) idx[j++] = 0;
        if (j == q) break;
    }
    const auto cells = eif_map(fit, ys, xgrid, mode == "literal" ? EifMode::Literal : EifMode::Consistent);
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write '" + out_path + "'");
    out << "y0";
    for (std::size_t j = 1; j <= q; ++j) out << ",x0_" << j;
    out << ",eif_norm";
    for (std::size_t j = 1; j <= q; ++j) out << ",eif_" << j;
    out << ",flag\n";
    std::size_t flagged = 0;
    char buf[40];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return std::string(buf);
    };
    for (const auto& c : cells) {
        out << num(c.y0);
        for (std::size_t j = 0; j < q; ++j) out << ',' << num(c.x0(j));
        out << ',' << (c.flagged ? "" : num(c.norm));
        for (std::size_t j = 0; j < q; ++j) out << ',' << (c.flagged ? "" : num(c.eif(j)));
        out << ',' << (c.flagged ? 1 : 0) << '\n';
        flagged += c.flagged;
    }
    std::printf("beta        %s\n", vec(fit.beta).c_str());
    std::printf("cells       %zu\n", cells.size());
    std::printf("flagged     %zu\n", flagged);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust profile estimation of single index models"};
    app.require_subcommand(1);

    double cal_gamma = 3.0, cal_eff = 0.90, cal_floor = 0.0;
    auto* cal = app.add_subcommand("calibrate", "tuning constant for a target efficiency");
    cal->add_option("--gamma", cal_gamma, "error shape")->required();
    cal->add_option("--eff", cal_eff, "target asymptotic efficiency");
    cal->add_option("--floor", cal_floor, "lower bound on c");

    FitOptions fo;
    std::string fit_json;
    auto* fit = app.add_subcommand("fit", "cross-validated robust or classical fit of a CSV dataset");
    add_fit_options(fit, fo);
    fit->add_option("--json", fit_json, "also write the estimates as JSON");

    std::size_t gen_n = 0;
    std::string gen_scheme = "C0", gen_config, gen_out;
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("gen", "generate a simulated dataset");
    gen->add_option("--n", gen_n);
    gen->add_option("--scheme", gen_scheme);
    gen->add_option("--seed", gen_seed)->required();
    gen->add_option("--config", gen_config);
    gen->add_option("--out", gen_out)->required();

    auto* sim = app.add_subcommand("sim", "Monte Carlo study");
    sim->require_subcommand(1);
    auto* run = sim->add_subcommand("run", "run replications");
    std::string sim_config, sim_output, sim_schemes;
    std::uint64_t sim_seed = 0;
    std::size_t sim_reps = 0, sim_n = 0, sim_workers = 0;
    bool sim_full = false, sim_quiet = false;
    run->add_option("--config", sim_config, "JSON file with SimConfig keys");
    run->add_option("--seed", sim_seed, "base seed")->required();
    run->add_option("--n-reps", sim_reps);
    run->add_option("--n", sim_n);
    run->add_option("--scheme", sim_schemes, "comma-separated, e.g. C0,M1,S3");
    run->add_option("--output", sim_output, "output prefix");
    run->add_option("--workers", sim_workers);
    run->add_flag("--full", sim_full, "1000 replications and the 13/25-point grids (slow)");
    run->add_flag("--quiet", sim_quiet);

    FitOptions eo;
    std::string eif_y = "-2:4:13", eif_x = "0:1:5", eif_mode = "consistent", eif_out = "eif.csv";
    double eif_h1 = 0.0, eif_h2 = 0.0;
    auto* eif = app.add_subcommand("eif", "empirical influence map of the index estimate");
    add_fit_options(eif, eo);
    eif->add_option("--y-grid", eif_y, "lo:hi:count");
    eif->add_option("--x-grid", eif_x, "lo:hi:count per coordinate");
    eif->add_option("--mode", eif_mode)->check(CLI::IsMember({"consistent", "literal"}));
    eif->add_option("--h1", eif_h1, "fixed bandwidth, skips cross-validation");
    eif->add_option("--h2", eif_h2);
    eif->add_option("--out", eif_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (cal->parsed()) return cmd_calibrate(cal_gamma, cal_eff, cal_floor);
        if (fit->parsed()) return cmd_fit(fo, fit_json);
        if (gen->parsed()) return cmd_gen(gen_n, gen_scheme, gen_seed, gen_config, gen_out);
        if (run->parsed()) {
            SimConfig cfg = sim_full ? SimConfig::full_scale() : SimConfig{};
            if (!sim_config.empty()) {
                const SimConfig file = load_sim_config(sim_config);
                if (sim_full) {
                    const auto h1 = cfg.h1_grid, h2 = cfg.h2_grid;
                    cfg = file;
                    cfg.n_reps = 1000;
                    cfg.h1_grid = h1;
                    cfg.h2_grid = h2;
                } else {
                    cfg = file;
                }
            }
            if (sim_full) std::fprintf(stderr, "warning: full-scale study, expect hours of compute\n");
            cfg.base_seed = sim_seed;
            if (sim_reps) cfg.n_reps = sim_reps;
            if (sim_n) cfg.n = sim_n;
            if (sim_workers) cfg.workers = sim_workers;
            if (!sim_output.empty()) cfg.output = sim_output;
            if (!sim_schemes.empty()) {
                cfg.schemes.clear();
                std::stringstream ss(sim_schemes);
                std::string s;
                while (std::getline(ss, s, ',')) cfg.schemes.push_back(parse_scheme(s));
            }
            cfg.validate();
            return cmd_sim(cfg, sim_quiet);
        }
        if (eif->parsed()) return cmd_eif(eo, eif_y, eif_x, eif_mode, eif_h1, eif_h2, eif_out);
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    }
    return 1;
}
