#include "sindex/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sindex/numerics.hpp"

namespace sindex {

namespace {

using nlohmann::json;

const std::vector<std::pair<Scheme, std::string>> kSchemeNames{
    {Scheme::C0, "C0"}, {Scheme::M1, "M1"}, {Scheme::M2, "M2"}, {Scheme::M3, "M3"},
    {Scheme::S1, "S1"}, {Scheme::S2, "S2"}, {Scheme::S3, "S3"}};

// Stream tags for the independent draws of one replication.
constexpr std::uint64_t kStreamX = 0x78ULL, kStreamErr = 0x65ULL, kStreamContam = 0x63ULL, kStreamCv = 0x6bULL;

std::uint64_t stream(std::uint64_t seed, std::uint64_t tag) { return splitmix64(splitmix64(seed) ^ tag); }

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

double median_or_nan(const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : median(v);
}

std::vector<double> grid_from_json(const json& j, const char* key) {
    if (j.is_string()) return parse_grid(j.get<std::string>());
    if (!j.is_array()) throw InputError(std::string("config error: ") + key + " must be an array or lo:hi:count");
    std::vector<double> g;
    for (const auto& v : j) g.push_back(v.get<double>());
    return g;
}

TauMode parse_tau_mode(const std::string& s) {
    if (s == "indicator") return TauMode::Indicator;
    if (s == "distance") return TauMode::DistanceTimesIndicator;
    throw InputError("config error: tau_mode must be indicator or distance");
}

KernelKind parse_kernel(const std::string& s) {
    if (s == "epanechnikov") return KernelKind::Epanechnikov;
    if (s == "gaussian") return KernelKind::Gaussian;
    throw InputError("config error: kernel must be epanechnikov or gaussian");
}

LossFamily estimator_family(const std::string& e) {
    if (e == "robust") return LossFamily::TukeyBisquare;
    if (e == "classical") return LossFamily::ClassicalSquared;
    throw InputError("config error: unknown estimator '" + e + "'");
}

}  // namespace

std::string scheme_name(Scheme s) {
    for (const auto& [k, v] : kSchemeNames)
        if (k == s) return v;
    return "?";
}

Scheme parse_scheme(const std::string& name) {
    for (const auto& [k, v] : kSchemeNames)
        if (v == name) return k;
    throw InputError("invalid scheme '" + name + "': expected C0, M1-M3 or S1-S3");
}

double scheme_k(Scheme s) {
    switch (s) {
        case Scheme::M1: return 3.0;
        case Scheme::M2: return 4.0;
        case Scheme::M3: return 5.0;
        case Scheme::S1: return 100.0;
        case Scheme::S2: return 500.0;
        case Scheme::S3: return 1000.0;
        default: return 0.0;
    }
}

bool is_moderate(Scheme s) { return s == Scheme::M1 || s == Scheme::M2 || s == Scheme::M3; }

std::function<double(double)> link_function(const std::string& name) {
    if (name == "sin2pi") return [](double u) { return std::sin(2.0 * std::numbers::pi * u); };
    if (name == "linear") return [](double u) { return u; };
    if (name == "quadratic") return [](double u) { return u * u; };
    throw InputError("invalid link '" + name + "': expected sin2pi, linear or quadratic");
}

void SimConfig::validate() const {
    if (n < 2) throw InputError("config error: n must be at least 2");
    if (n_reps < 1) throw InputError("config error: n_reps must be positive");
    if (q < 2) throw InputError("config error: q must be at least 2");
    if (static_cast<std::size_t>(beta0.size()) != q) throw InputError("config error: beta0 must have q entries");
    if (std::abs(beta0.norm() - 1.0) > 1e-8) throw InputError("config error: beta0 must be a unit vector");
    if (!(gamma0 > 0.0)) throw InputError("config error: gamma0 must be positive");
    if (K < 2 || K > n) throw InputError("config error: K must lie in [2, n]");
    if (h1_grid.empty() || h2_grid.empty()) throw InputError("config error: empty bandwidth grid");
    if (schemes.empty()) throw InputError("config error: no scheme given");
    if (estimators.empty()) throw InputError("config error: no estimator given");
    for (const auto& e : estimators) estimator_family(e);
    if (!(contamination >= 0.0 && contamination <= 1.0)) throw InputError("config error: contamination in [0, 1]");
    link_function(link);
}

SimConfig SimConfig::full_scale() {
    SimConfig c;
    c.n_reps = 1000;
    c.h1_grid = bandwidth_grid(0.05, 0.35, 13);
    c.h2_grid = bandwidth_grid(0.05, 0.35, 25);
    return c;
}

SimConfig sim_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config error: ") + e.what());
    }
    if (!j.is_object()) throw InputError("config error: top level must be an object");
    SimConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "n") c.n = v.get<std::size_t>();
            else if (key == "n_reps") c.n_reps = v.get<std::size_t>();
            else if (key == "q") c.q = v.get<std::size_t>();
            else if (key == "gamma0") c.gamma0 = v.get<double>();
            else if (key == "beta0") {
                const auto b = v.get<std::vector<double>>();
                c.beta0 = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
            } else if (key == "link") c.link = v.get<std::string>();
            else if (key == "scheme") {
                c.schemes.clear();
                if (v.is_string()) c.schemes.push_back(parse_scheme(v.get<std::string>()));
                else
                    for (const auto& s : v) c.schemes.push_back(parse_scheme(s.get<std::string>()));
            } else if (key == "K") c.K = v.get<std::size_t>();
            else if (key == "h1_grid") c.h1_grid = grid_from_json(v, "h1_grid");
            else if (key == "h2_grid") c.h2_grid = grid_from_json(v, "h2_grid");
            else if (key == "estimators") c.estimators = v.get<std::vector<std::string>>();
            else if (key == "base_seed") c.base_seed = v.get<std::uint64_t>();
            else if (key == "tau_mode") c.tau_mode = parse_tau_mode(v.get<std::string>());
            else if (key == "output") c.output = v.get<std::string>();
            else if (key == "contamination") c.contamination = v.get<double>();
            else if (key == "kernel") c.kernel = parse_kernel(v.get<std::string>());
            else if (key == "workers") c.workers = v.get<std::size_t>();
            else throw InputError("config error: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("config error: ") + e.what());
    }
    if (j.contains("q") && !j.contains("beta0")) c.beta0 = Eigen::VectorXd::Constant(c.q, 1.0 / std::sqrt(c.q));
    c.validate();
    return c;
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return sim_config_from_json(ss.str());
}

std::string sim_config_to_json(const SimConfig& c) {
    json j;
    j["n"] = c.n;
    j["n_reps"] = c.n_reps;
    j["q"] = c.q;
    j["gamma0"] = c.gamma0;
    j["beta0"] = std::vector<double>(c.beta0.data(), c.beta0.data() + c.beta0.size());
    j["link"] = c.link;
    std::vector<std::string> s;
    for (Scheme sc : c.schemes) s.push_back(scheme_name(sc));
    j["scheme"] = s;
    j["K"] = c.K;
    j["h1_grid"] = c.h1_grid;
    j["h2_grid"] = c.h2_grid;
    j["estimators"] = c.estimators;
    j["base_seed"] = c.base_seed;
    j["tau_mode"] = c.tau_mode == TauMode::Indicator ? "indicator" : "distance";
    j["output"] = c.output;
    j["contamination"] = c.contamination;
    j["kernel"] = c.kernel == KernelKind::Epanechnikov ? "epanechnikov" : "gaussian";
    j["workers"] = c.workers;
    return j.dump(2);
}

Eigen::VectorXd beta_perp(const Eigen::VectorXd& b) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(b.size());
    p(0) = -b(1);
    p(1) = b(0);
    if (b.size() > 2) p -= p.dot(b) * b;
    const double nrm = p.norm();
    if (nrm < 1e-12) throw InputError("config error: beta0 has no orthogonal direction in its first two coordinates");
    return p / nrm;
}

SimData generate(std::size_t n, Scheme scheme, std::uint64_t seed, const SimConfig& cfg) {
    const std::size_t q = cfg.q;
    std::mt19937_64 rx(stream(seed, kStreamX)), rc(stream(seed, kStreamContam));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    SimData out;
    out.data.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) out.data.X(i, j) = unif(rx);
    const std::vector<double> eps = sample_errors(ErrorModel::log_gamma(cfg.gamma0), n, stream(seed, kStreamErr));
    const auto eta = link_function(cfg.link);
    out.data.y.resize(static_cast<Eigen::Index>(n));
    out.eta0.resize(n);
    out.contaminated.assign(n, 0);
    const Eigen::VectorXd perp = is_moderate(scheme) ? beta_perp(cfg.beta0) : Eigen::VectorXd();
    const double logk = scheme == Scheme::C0 ? 0.0 : std::log(scheme_k(scheme));
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd x = out.data.X.row(i).transpose();
        out.eta0[i] = eta(x.dot(cfg.beta0));
        out.data.y(i) = out.eta0[i] + eps[i];
        // The uniform is drawn for every point so the pattern is shared across schemes.
        const double u = unif(rc);
        if (scheme != Scheme::C0 && u > 1.0 - cfg.contamination) {
            out.contaminated[i] = 1;
            out.data.y(i) = logk + (is_moderate(scheme) ? eta(x.dot(perp)) : 0.0) + eps[i];
        }
    }
    return out;
}

Dataset gen_clean(std::size_t n, std::uint64_t seed, const SimConfig& cfg) {
    return generate(n, Scheme::C0, seed, cfg).data;
}

Dataset gen_contaminated(std::size_t n, Scheme scheme, std::uint64_t seed, const SimConfig& cfg) {
    if (scheme == Scheme::C0) throw InputError("invalid input: contamination needs a scheme other than C0");
    return generate(n, scheme, seed, cfg).data;
}

double mse_beta(const std::vector<Eigen::VectorXd>& est, const Eigen::VectorXd& beta0) {
    if (est.empty()) throw InputError("invalid input: no successful replication");
    double s = 0.0;
    for (const auto& b : est) s += (b - beta0).squaredNorm();
    return s / static_cast<double>(est.size());
}

double mse_eta(const std::vector<std::vector<double>>& sq) {
    if (sq.empty()) throw InputError("invalid input: no successful replication");
    std::vector<double> per;
    for (const auto& r : sq) per.push_back(mean_of(r));
    return mean_of(per);
}

double medse_eta(const std::vector<std::vector<double>>& sq) {
    if (sq.empty()) throw InputError("invalid input: no successful replication");
    std::vector<double> per;
    for (const auto& r : sq) per.push_back(median(r));
    return median(per);
}

PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& cfg, std::uint64_t seed) {
    const std::size_t n = data.n(), q = data.q();
    const ErrorModel model = ErrorModel::log_gamma(1.0);
    const WeightFn tau = WeightFn::standard(q, n, cfg.tau_mode);
    const bool robust = cfg.family != LossFamily::ClassicalSquared;
    std::vector<double> g1 = cfg.h1_grid;
    std::sort(g1.begin(), g1.end());
    if (g1.empty()) throw InputError("invalid input: empty bandwidth grid");
    const double pilot = cfg.pilot_h ? *cfg.pilot_h : g1[g1.size() / 2];

    std::optional<NuisanceFit> nf;
    if (robust) {
        const std::vector<double> tw = tau_weights(tau, data.X);
        nf = fit_initial_s(data, KernelSpec{cfg.kernel, pilot}, model, tw, kDefaultB, cfg.target_eff, cfg.sphere);
    }
    CvConfig cv;
    cv.family = cfg.family;
    cv.model = model;
    cv.kernel = cfg.kernel;
    cv.tau = tau;
    cv.c_rcv = cfg.c_rcv;
    cv.alpha = robust ? nf->c_hat : 1.0;
    cv.sphere = cfg.sphere;
    const std::uint64_t cv_seed = stream(seed, kStreamCv);

    PipelineResult r;
    r.cv_h1 = select_h1(data, cfg.h1_grid, cfg.K, cv_seed, cv);
    FitConfig fc;
    fc.family = cfg.family;
    fc.model = model;
    fc.kernel = cfg.kernel;
    fc.h1 = fc.h2 = r.cv_h1.chosen;
    fc.tau = tau;
    fc.nuisance = nf;
    fc.nuisance_h = pilot;
    fc.target_eff = cfg.target_eff;
    fc.sphere = cfg.sphere;
    r.fit = fit_three_step(data, fc);
    cv.alpha = r.fit.loss.alpha;
    r.cv_h2 = select_h2(data, r.fit.beta, cfg.h2_grid, cfg.K, cv_seed, cv);
    r.fit.h2 = r.cv_h2.chosen;
    return r;
}

std::size_t worker_count(std::size_t requested) {
    std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SINDEX_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) hw = static_cast<std::size_t>(v);
    }
    return requested == 0 ? hw : std::min(requested, hw);
}

std::vector<AggregateRow> aggregate(const std::vector<RepRecord>& reps, const SimConfig& cfg) {
    std::vector<AggregateRow> rows;
    for (Scheme s : cfg.schemes) {
        for (const auto& e : cfg.estimators) {
            AggregateRow a{s, e};
            std::vector<Eigen::VectorXd> betas;
            std::vector<std::vector<double>> sq;
            std::vector<double> h1, h2;
            for (const auto& r : reps) {
                if (r.scheme != s || r.estimator != e) continue;
                ++a.n_reps;
                a.wall_time += r.seconds;
                if (!r.ok) {
                    ++a.n_failed;
                    continue;
                }
                betas.push_back(r.beta);
                sq.push_back(r.sq_err_eta);
                h1.push_back(r.h1);
                h2.push_back(r.h2);
            }
            const double nan = std::numeric_limits<double>::quiet_NaN();
            a.mse_beta = betas.empty() ? nan : mse_beta(betas, cfg.beta0);
            a.mse_eta = sq.empty() ? nan : mse_eta(sq);
            a.medse_eta = sq.empty() ? nan : medse_eta(sq);
            a.median_h1 = median_or_nan(h1);
            a.median_h2 = median_or_nan(h2);
            rows.push_back(a);
        }
    }
    return rows;
}

SimResult run_replications(const SimConfig& cfg) {
    cfg.validate();
    const std::size_t n_s = cfg.schemes.size(), n_e = cfg.estimators.size();
    const std::size_t n_tasks = n_s * cfg.n_reps;
    std::vector<RepRecord> slots(n_tasks * n_e);
    std::vector<char> done(n_tasks, 0);
    std::vector<std::atomic<std::size_t>> failures(n_s * n_e);
    const std::size_t max_failed = cfg.n_reps / 5;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex report_mu;
    std::string report;

    auto run_task = [&](std::size_t t) {
        const std::size_t si = t / cfg.n_reps, rep = t % cfg.n_reps;
        const Scheme scheme = cfg.schemes[si];
        const std::uint64_t seed = cfg.base_seed ^ static_cast<std::uint64_t>(rep);
        const SimData sd = generate(cfg.n, scheme, seed, cfg);
        for (std::size_t ei = 0; ei < n_e; ++ei) {
            RepRecord& r = slots[t * n_e + ei];
            r.scheme = scheme;
            r.estimator = cfg.estimators[ei];
            r.rep = rep;
            r.seed = seed;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                PipelineConfig pc;
                pc.family = estimator_family(r.estimator);
                pc.kernel = cfg.kernel;
                pc.h1_grid = cfg.h1_grid;
                pc.h2_grid = cfg.h2_grid;
                pc.K = cfg.K;
                pc.tau_mode = cfg.tau_mode;
                const PipelineResult pr = run_pipeline(sd.data, pc, seed);
                r.beta = pr.fit.beta;
                r.sq_err_beta = (pr.fit.beta - cfg.beta0).squaredNorm();
                const std::vector<double> p = pr.fit.projections();
                r.sq_err_eta.resize(cfg.n);
                for (std::size_t i = 0; i < cfg.n; ++i) {
                    const double e = pr.fit.eta(p[i]) - sd.eta0[i];
                    r.sq_err_eta[i] = e * e;
                }
                r.h1 = pr.fit.h1;
                r.h2 = pr.fit.h2;
                r.alpha_hat = pr.fit.loss.alpha;
                r.gamma_hat = pr.fit.gamma_hat.value_or(std::numeric_limits<double>::quiet_NaN());
                r.ok = true;
            } catch (const std::exception& ex) {
                r.ok = false;
                r.error = ex.what();
                if (++failures[si * n_e + ei] > max_failed && !stop.exchange(true)) {
                    std::lock_guard<std::mutex> lk(report_mu);
                    report = "aborted: more than 20% failed replications for scheme " + scheme_name(scheme) +
                             ", estimator " + r.estimator + " (last error at seed " + std::to_string(seed) +
                             ": " + r.error + ")";
                }
            }
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        done[t] = 1;
    };

    auto worker = [&] {
        for (;;) {
            if (stop.load()) return;
            const std::size_t t = next.fetch_add(1);
            if (t >= n_tasks) return;
            run_task(t);
        }
    };
    const std::size_t nw = std::min(worker_count(cfg.workers), n_tasks);
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < nw; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    SimResult res;
    for (std::size_t t = 0; t < n_tasks; ++t)
        if (done[t])
            for (std::size_t ei = 0; ei < n_e; ++ei) res.reps.push_back(std::move(slots[t * n_e + ei]));
    res.aborted = stop.load();
    res.report = report;
    res.aggregate = aggregate(res.reps, cfg);
    return res;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string s = "scheme,estimator,mse_beta,mse_eta,medse_eta,median_h1,median_h2,n_reps,n_failed\n";
    for (const auto& a : rows) {
        s += scheme_name(a.scheme) + "," + a.estimator + "," + fmt(a.mse_beta) + "," + fmt(a.mse_eta) + "," +
             fmt(a.medse_eta) + "," + fmt(a.median_h1) + "," + fmt(a.median_h2) + "," + std::to_string(a.n_reps) +
             "," + std::to_string(a.n_failed) + "\n";
    }
    return s;
}

void write_results(const SimResult& result, const std::string& prefix) {
    std::size_t q = 0;
    for (const auto& r : result.reps)
        if (r.ok) q = std::max<std::size_t>(q, static_cast<std::size_t>(r.beta.size()));
    std::ofstream reps(prefix + "_reps.csv");
    if (!reps) throw InputError("cannot write '" + prefix + "_reps.csv'");
    reps << "scheme,estimator,rep,seed,ok";
    for (std::size_t j = 1; j <= q; ++j) reps << ",beta_" << j;
    reps << ",sq_err_beta,mean_se_eta,median_se_eta,h1,h2,alpha_hat,gamma_hat,error\n";
    for (const auto& r : result.reps) {
        reps << scheme_name(r.scheme) << ',' << r.estimator << ',' << r.rep << ',' << r.seed << ',' << (r.ok ? 1 : 0);
        for (std::size_t j = 0; j < q; ++j) reps << ',' << (r.ok ? fmt(r.beta(j)) : "");
        if (r.ok) {
            reps << ',' << fmt(r.sq_err_beta) << ',' << fmt(mean_of(r.sq_err_eta)) << ','
                 << fmt(median(r.sq_err_eta)) << ',' << fmt(r.h1) << ',' << fmt(r.h2) << ',' << fmt(r.alpha_hat)
                 << ',' << fmt(r.gamma_hat) << ",\n";
        } else {
            reps << ",,,,,,,," << csv_quote(r.error) << '\n';
        }
    }
    std::ofstream agg(prefix + "_aggregate.csv");
    if (!agg) throw InputError("cannot write '" + prefix + "_aggregate.csv'");
    agg << aggregate_csv(result.aggregate);
}

Dataset parse_data_csv(const std::string& text, std::optional<std::size_t> expected_q) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto split = [](const std::string& l) {
        std::vector<std::string> f;
        std::string cur;
        std::istringstream ls(l);
        while (std::getline(ls, cur, ',')) f.push_back(cur);
        if (!l.empty() && l.back() == ',') f.emplace_back();
        return f;
    };
    auto trim = [](std::string s) {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
        std::size_t b = 0;
        while (b < s.size() && s[b] == ' ') ++b;
        return s.substr(b);
    };
    if (!std::getline(in, line)) throw InputError("line 1: empty file, expected header y,x1,...,xq");
    ++lineno;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> head = split(trim(line));
    for (auto& h : head) h = trim(h);
    bool header_ok = head.size() >= 2 && head[0] == "y";
    for (std::size_t j = 1; header_ok && j < head.size(); ++j) header_ok = head[j] == "x" + std::to_string(j);
    if (!header_ok) throw InputError("line 1: expected header y,x1,...,xq");
    const std::size_t q = head.size() - 1;
    if (expected_q && *expected_q != q)
        throw InputError("config error: data has " + std::to_string(q) + " covariates, config expects q = " +
                         std::to_string(*expected_q));
    std::vector<double> vals;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        const std::vector<std::string> f = split(line);
        if (f.size() != q + 1)
            throw InputError("line " + std::to_string(lineno) + ": expected " + std::to_string(q + 1) + " fields, got " +
                             std::to_string(f.size()));
        for (const auto& raw : f) {
            const std::string s = trim(raw);
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
                throw InputError("line " + std::to_string(lineno) + ": '" + s + "' is not a finite number");
            vals.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw InputError("line " + std::to_string(lineno + 1) + ": no data rows");
    Dataset d;
    d.X.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(q));
    d.y.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
        d.y(i) = vals[i * (q + 1)];
        for (std::size_t j = 0; j < q; ++j) d.X(i, j) = vals[i * (q + 1) + 1 + j];
    }
    return d;
}

Dataset read_data_csv(const std::string& path, std::optional<std::size_t> expected_q) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open data file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_data_csv(ss.str(), expected_q);
}

std::string format_data_csv(const Dataset& d) {
    std::string s = "y";
    for (std::size_t j = 1; j <= d.q(); ++j) s += ",x" + std::to_string(j);
    s += '\n';
    for (std::size_t i = 0; i < d.n(); ++i) {
        s += fmt(d.y(i));
        for (std::size_t j = 0; j < d.q(); ++j) s += "," + fmt(d.X(i, j));
        s += '\n';
    }
    return s;
}

void write_data_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write data file '" + path + "'");
    out << format_data_csv(d);
}

}  // namespace sindex
