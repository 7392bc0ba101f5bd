#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "simlab/complexity_calc.hpp"
#include "simlab/estimators.hpp"
#include "simlab/exp_harness.hpp"
#include "simlab/harmonic_core.hpp"
#include "simlab/harmonic_tensor.hpp"

using namespace simlab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_json(const json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

int cmd_basis(int d, int lmax, bool check) {
    if (d < 3) throw ConfigError("basis: d must be >= 3");
    if (!check) {
        std::cout << "l,n_dl,Q_l(1)\n";
        for (int l = 0; l <= lmax; ++l)
            std::cout << l << ',' << harmonic_dim_f(d, l) << ',' << fmt(gegenbauer_eval(d, l, 1.0)) << '\n';
        return 0;
    }
    const Quadrature& q = tau_d1_quadrature(d, default_quadrature_points(lmax));
    GegenbauerBasis basis(d, lmax);
    std::vector<std::vector<double>> vals;
    for (double t : q.nodes) vals.push_back(basis.eval_all(t));
    std::cout << "l,k,inner_product,error\n";
    double worst = 0.0;
    for (int l = 0; l <= lmax; ++l)
        for (int k = 0; k <= lmax; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * vals[i][l] * vals[i][k];
            const double err = std::abs(s - (l == k ? 1.0 : 0.0));
            worst = std::max(worst, err);
            std::cout << l << ',' << k << ',' << fmt(s) << ',' << fmt(err) << '\n';
        }
    return worst <= 1e-10 ? 0 : 1;
}

int cmd_tensor(int d, int lmax, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0);
    std::cout << "check,l,error\n";
    double worst = 0.0;
    for (int l = 1; l <= lmax; ++l) {
        const Vec z = random_unit(d, rng), w = random_unit(d, rng);
        const DenseSymTensor h = harmonic_tensor_dense(z, l);
        const double def = std::abs(contract_power(h, w) - gegenbauer_eval(d, l, w.dot(z)));
        double tr = 0.0;
        if (l >= 2)
            for (double e : trace_pair(h, 0, 1).entries) tr = std::max(tr, std::abs(e));
        double mv = 0.0;
        for (int a = 1; a < l || (l == 1 && a == 1); ++a) {
            const int b = l - a;
            Vec v = Vec::Random(static_cast<Eigen::Index>(ipow(d, b)));
            if (b == 0) v = Vec::Ones(1);
            HarmonicMatvec op(z, l, a, b);
            mv = std::max(mv, (op.apply(v) - dense_unfolded_matvec(h, a, v)).cwiseAbs().maxCoeff());
            if (l == 1) break;
        }
        std::cout << "defining_relation," << l << ',' << fmt(def) << '\n';
        std::cout << "traceless," << l << ',' << fmt(tr) << '\n';
        std::cout << "implicit_matvec," << l << ',' << fmt(mv) << '\n';
        worst = std::max({worst, def, tr, mv});
    }
    return worst <= 1e-9 ? 0 : 1;
}

int cmd_simulate(const std::string& link_path, int d, std::size_t m, std::uint64_t seed, bool null_model,
                 const std::string& out) {
    const LinkSpec link = LinkSpec::from_json(read_json_file(link_path));
    Dataset ds;
    if (null_model) {
        ds = sample_null(link, d, m, seed);
    } else {
        Rng rng = make_rng(seed, 0x77);
        ds = sample_planted(link, random_unit(d, rng), m, seed);
    }
    std::ofstream os(out);
    if (!os) throw ConfigError("cannot write " + out);
    write_dataset(ds, os);
    return 0;
}

// Config: {"link": ..., "transformation": {...}, "estimator": {...}, "calibration_seed": S}
int cmd_estimate(const std::string& algo, int ell, const std::string& data_path, const std::string& cfg_path,
                 const std::string& out) {
    const json cfg = read_json_file(cfg_path);
    if (!cfg.contains("link")) throw ConfigError("estimate: config needs 'link'");
    const LinkSpec link = LinkSpec::from_json(cfg.at("link"));
    EstimatorConfig ec = EstimatorConfig::from_json(cfg.value("estimator", json::object()));
    ec.algorithm = parse_algorithm(algo);
    if (ell > 0) ec.l = ell;
    std::ifstream in(data_path);
    if (!in) throw ConfigError("cannot open " + data_path);
    const Dataset data = read_dataset(in);

    ExperimentConfig xc;
    xc.link = link;
    xc.estimator = ec;
    xc.d_grid = {data.d};
    xc.master_seed = cfg.value("calibration_seed", std::uint64_t{1});
    if (cfg.contains("transformation")) {
        const json& t = cfg.at("transformation");
        xc.transform.kind = t.value("kind", xc.transform.kind);
        xc.transform.kappa = t.value("kappa", xc.transform.kappa);
        xc.transform.n_cal = t.value("n_cal", xc.transform.n_cal);
    }
    TransformCache cache;
    const bool label = ec.algorithm == Algorithm::hesgd || ec.algorithm == Algorithm::prtr;
    int degree = ec.l;
    if (ec.algorithm == Algorithm::spectral1) degree = 1;
    if (ec.algorithm == Algorithm::spectral2) degree = 2;
    if (label && ec.k_star > 0) degree = ec.k_star;
    const Transformation& T = cache.get(xc, data.d, label ? "label" : xc.transform.kind, degree);
    const Transformation* boost_T = nullptr;
    if (ec.algorithm == Algorithm::prtr && degree % 2 == 1 && degree >= 3)
        boost_T = &cache.get(xc, data.d, "partial-trace", degree);
    if (ec.algorithm == Algorithm::spectral1 && ec.boost_after_spectral)
        boost_T = &cache.get(xc, data.d, xc.transform.kind, ec.boost_degree);

    EstimatorResult res = run_estimator(data, T, ec, boost_T);
    json j = res.to_json();
    j["config"] = cfg;
    j["config"]["estimator"] = ec.to_json();
    j["transformation"] = {{"kind", T.kind}, {"l", T.l}, {"beta", T.beta}, {"beta_se", T.beta_se}, {"kappa", T.kappa}};
    write_json(j, out);
    return 0;
}

int cmd_complexity(const std::string& link_path, int d, int lmax, std::size_t nmc, std::uint64_t seed,
                   const std::string& out) {
    const LinkSpec link = LinkSpec::from_json(read_json_file(link_path));
    const auto kstar = link.information_exponent();
    if (lmax <= 0) lmax = kstar ? *kstar + 2 : 6;
    const ComplexityProfile p = xi_profile(link, d, lmax, nmc, seed);
    const OptimalDegree ms = m_star(p), qs = q_star(p);
    json j;
    j["link"] = link.to_json();
    j["profile"] = p.to_json();
    j["m_star"] = ms.to_json();
    j["q_star"] = qs.to_json();
    j["l_m_star"] = ms.degree;
    j["l_T_star"] = qs.degree;
    // Reported separately: sample lower bound, runtime lower bound, and d times the sample bound.
    j["sample_lower_bound"] = ms.infinite ? json(nullptr) : json(ms.value);
    j["runtime_lower_bound"] = qs.infinite ? json(nullptr) : json(qs.value);
    j["d_times_sample_lower_bound"] = ms.infinite ? json(nullptr) : json(d * ms.value);
    if (kstar) {
        j["gaussian_rates_with_norm"] = gaussian_rates(*kstar, true, lmax).to_json();
        j["gaussian_rates_without_norm"] = gaussian_rates(*kstar, false, lmax).to_json();
    }
    write_json(j, out);
    return 0;
}

int cmd_sweep(const std::string& cfg_path, const std::string& out_dir) {
    const ExperimentConfig cfg = ExperimentConfig::from_json(read_json_file(cfg_path));
    TransformCache cache;
    const SweepResult res = sweep(cfg, cache);
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(std::filesystem::path(out_dir) / "results.csv");
    if (!csv) throw ConfigError("cannot write results.csv in " + out_dir);
    write_results_csv(res.rows, cfg.timing, csv);
    json s = res.summary();
    s["config"] = cfg.to_json();
    write_json(s, (std::filesystem::path(out_dir) / "summary.json").string());
    std::cerr << res.rows.size() << " rows, " << res.failures << " failed\n";
    return res.failures > 0 ? kExitPartial : 0;
}

struct CriticalRun {
    json out = json::array();
    std::vector<std::pair<double, double>> points;
    bool exhausted = false;
};

CriticalRun run_critical(const ExperimentConfig& cfg, const std::vector<int>& dims) {
    CriticalRun run;
    TransformCache cache;
    for (int d : dims) {
        try {
            const CriticalResult r = critical_m(cfg, d, cache);
            run.out.push_back(r.to_json());
            run.points.emplace_back(d, cfg.interpolate ? r.m_c_interp : static_cast<double>(r.m_c));
            std::cerr << "d=" << d << " m_c=" << r.m_c << " interp=" << r.m_c_interp << '\n';
        } catch (const RangeExhausted& e) {
            run.exhausted = true;
            json c = json::array();
            for (const auto& p : e.curve) c.push_back({{"m", p.m}, {"trials", p.trials}, {"rate", p.rate}});
            run.out.push_back({{"d", d}, {"error", e.what()}, {"curve", c}});
            std::cerr << "d=" << d << ": " << e.what() << '\n';
        }
    }
    return run;
}

int cmd_critical(const std::string& cfg_path, const std::vector<int>& dims, const std::string& out) {
    const ExperimentConfig cfg = ExperimentConfig::from_json(read_json_file(cfg_path));
    const CriticalRun run = run_critical(cfg, dims.empty() ? cfg.d_grid : dims);
    write_json(run.out, out);
    return run.exhausted ? kExitPartial : 0;
}

// Either fit given points ({"points": [[d, m_c], ...]}) or run critical-m over the d grid first.
int cmd_scaling(const std::string& cfg_path, const std::string& points_path, const std::string& out) {
    json j;
    std::vector<std::pair<double, double>> points;
    bool exhausted = false;
    if (!points_path.empty()) {
        const json p = read_json_file(points_path);
        try {
            points = p.at("points").get<std::vector<std::pair<double, double>>>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("scaling: ") + e.what());
        }
    } else if (!cfg_path.empty()) {
        const ExperimentConfig cfg = ExperimentConfig::from_json(read_json_file(cfg_path));
        CriticalRun run = run_critical(cfg, cfg.d_grid);
        j["critical"] = run.out;
        points = run.points;
        exhausted = run.exhausted;
    } else {
        throw ConfigError("scaling: pass --config or --points");
    }
    j["points"] = points;
    const SlopeFit f = scaling_exponent(points);
    j["slope"] = f.slope;
    j["std_error"] = f.std_error;
    j["intercept"] = f.intercept;
    write_json(j, out);
    return exhausted ? kExitPartial : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spherical single-index model simulation and estimator toolkit"};
    app.require_subcommand(1);

    int d = 10, lmax = 6, ell = 0;
    bool check = false, null_model = false;
    std::uint64_t seed = 1;
    std::size_t nmc = 200000, m = 1000;
    std::string algo, data, config, out, link, out_dir, points;
    std::vector<int> dims;

    auto* basis = app.add_subcommand("basis", "Gegenbauer basis table or orthonormality check");
    basis->add_option("--d", d, "dimension")->required();
    basis->add_option("--lmax", lmax, "largest degree");
    basis->add_flag("--check", check, "print <Q_l, Q_k> under tau_{d,1} quadrature");

    auto* tensor = app.add_subcommand("tensor", "harmonic tensor diagnostics");
    tensor->add_option("--d", d, "dimension");
    tensor->add_option("--lmax", lmax, "largest degree");
    tensor->add_option("--seed", seed, "seed");
    tensor->add_flag("--check", check, "run the diagnostics");

    auto* simulate = app.add_subcommand("simulate", "draw a dataset from a link");
    simulate->add_option("--link", link, "link JSON")->required();
    simulate->add_option("--d", d, "dimension")->required();
    simulate->add_option("--m", m, "sample count")->required();
    simulate->add_option("--seed", seed, "seed");
    simulate->add_flag("--null", null_model, "null model, z independent of (y, r)");
    simulate->add_option("--out", out, "dataset file")->required();

    auto* estimate = app.add_subcommand("estimate", "run one estimator on a dataset");
    estimate->add_option("--algo", algo, "spectral1|spectral2|sgd|unfold|unfold-balanced|hesgd|prtr|boost")
        ->required();
    estimate->add_option("--ell", ell, "degree");
    estimate->add_option("--data", data, "dataset file")->required();
    estimate->add_option("--config", config, "config JSON")->required();
    estimate->add_option("--out", out, "result JSON");

    auto* complexity = app.add_subcommand("complexity", "xi profile and complexity measures of a link");
    complexity->add_option("--link", link, "link JSON")->required();
    complexity->add_option("--d", d, "dimension")->required();
    complexity->add_option("--lmax", lmax, "largest degree (default k*+2)");
    complexity->add_option("--nmc", nmc, "Monte Carlo samples");
    complexity->add_option("--seed", seed, "seed");
    complexity->add_option("--out", out, "profile JSON");

    auto* sw = app.add_subcommand("sweep", "run a (d, m) grid");
    sw->add_option("--config", config, "experiment JSON")->required();
    sw->add_option("--out-dir", out_dir, "output directory")->required();

    auto* crit = app.add_subcommand("critical-m", "critical sample size per dimension");
    crit->add_option("--config", config, "experiment JSON")->required();
    crit->add_option("--d", dims, "dimensions (default: d_grid)");
    crit->add_option("--out", out, "result JSON");

    auto* scal = app.add_subcommand("scaling", "log-log slope of critical m against d");
    scal->add_option("--config", config, "experiment JSON");
    scal->add_option("--points", points, "JSON with points: [[d, m_c], ...]");
    scal->add_option("--out", out, "result JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }
    if (basis->parsed() || tensor->parsed())
        if (lmax < 0) lmax = 0;

    try {
        if (basis->parsed()) return cmd_basis(d, lmax, check);
        if (tensor->parsed()) {
            if (!tensor->count("--lmax")) lmax = 5;
            if (!tensor->count("--d")) d = 8;
            return cmd_tensor(d, lmax, seed);
        }
        if (simulate->parsed()) return cmd_simulate(link, d, m, seed, null_model, out);
        if (estimate->parsed()) return cmd_estimate(algo, ell, data, config, out);
        if (complexity->parsed())
            return cmd_complexity(link, d, complexity->count("--lmax") ? lmax : 0, nmc, seed, out);
        if (sw->parsed()) return cmd_sweep(config, out_dir);
        if (crit->parsed()) return cmd_critical(config, dims, out);
        if (scal->parsed()) return cmd_scaling(config, points, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
