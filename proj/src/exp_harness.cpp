#include "simlab/exp_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include "simlab/harmonic_core.hpp"

namespace simlab {

namespace {

std::uint64_t string_key(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool uses_label_transform(Algorithm a) { return a == Algorithm::hesgd || a == Algorithm::prtr; }

int transform_degree(const EstimatorConfig& e) {
    switch (e.algorithm) {
        case Algorithm::spectral1: return 1;
        case Algorithm::spectral2: return 2;
        case Algorithm::hesgd:
        case Algorithm::prtr: return e.k_star > 0 ? e.k_star : e.l;
        default: return e.l;
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
    ExperimentConfig c;
    try {
        if (j.contains("link")) {
            c.link = LinkSpec::from_json(j.at("link"));
        } else if (j.contains("link_file")) {
            std::ifstream in(j.at("link_file").get<std::string>());
            if (!in) throw ConfigError("experiment config: cannot open link_file");
            c.link = LinkSpec::from_json(json::parse(in));
        } else {
            throw ConfigError("experiment config: missing 'link' or 'link_file'");
        }
        c.estimator = EstimatorConfig::from_json(j.value("estimator", json::object()));
        if (j.contains("transformation")) {
            const json& t = j.at("transformation");
            c.transform.kind = t.value("kind", c.transform.kind);
            c.transform.kappa = t.value("kappa", c.transform.kappa);
            c.transform.n_cal = t.value("n_cal", c.transform.n_cal);
        }
        c.d_grid = j.at("d_grid").get<std::vector<int>>();
        c.m_grid = j.value("m_grid", std::vector<double>{});
        c.m_exponent = j.value("m_exponent", 0.0);
        if (j.contains("m_range")) {
            const json& r = j.at("m_range");
            MRange mr;
            mr.lo = r.at("lo").get<double>();
            mr.hi = r.at("hi").get<double>();
            mr.exponent = r.value("exponent", 0.0);
            mr.ratio = r.value("ratio", 1.25);
            c.m_range = mr;
        }
        c.seeds = j.value("seeds", c.seeds);
        c.coarse_seeds = j.value("coarse_seeds", std::min(c.seeds, c.coarse_seeds));
        c.success_threshold = j.value("success_threshold", c.success_threshold);
        c.master_seed = j.value("master_seed", c.master_seed);
        c.timing = j.value("timing", c.timing);
        c.interpolate = j.value("interpolate", c.interpolate);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    if (c.d_grid.empty()) throw ConfigError("experiment config: d_grid must be nonempty");
    for (int d : c.d_grid)
        if (d < 2) throw ConfigError("experiment config: dimensions must be >= 2");
    if (c.seeds < 1 || c.coarse_seeds < 1) throw ConfigError("experiment config: seeds must be >= 1");
    if (!(c.success_threshold > 0.0 && c.success_threshold <= 1.0))
        throw ConfigError("experiment config: success_threshold must lie in (0, 1]");
    if (c.transform.kind != "xi" && c.transform.kind != "csq" && c.transform.kind != "label")
        throw ConfigError("experiment config: transformation kind must be xi, csq or label");
    if (c.m_range && !(c.m_range->lo > 0.0 && c.m_range->hi >= c.m_range->lo && c.m_range->ratio > 1.0))
        throw ConfigError("experiment config: invalid m_range");
    for (double g : c.m_grid)
        if (g < 0.0) throw ConfigError("experiment config: m_grid entries must be >= 0");
    return c;
}

json ExperimentConfig::to_json() const {
    json j;
    j["link"] = link.to_json();
    j["estimator"] = estimator.to_json();
    j["transformation"] = {{"kind", transform.kind}, {"kappa", transform.kappa}, {"n_cal", transform.n_cal}};
    j["d_grid"] = d_grid;
    j["m_grid"] = m_grid;
    j["m_exponent"] = m_exponent;
    if (m_range)
        j["m_range"] = {{"lo", m_range->lo}, {"hi", m_range->hi}, {"exponent", m_range->exponent}, {"ratio", m_range->ratio}};
    j["seeds"] = seeds;
    j["coarse_seeds"] = coarse_seeds;
    j["success_threshold"] = success_threshold;
    j["master_seed"] = master_seed;
    j["timing"] = timing;
    j["interpolate"] = interpolate;
    return j;
}

std::vector<std::size_t> ExperimentConfig::m_values(int d) const {
    std::vector<std::size_t> out;
    const double s = std::pow(static_cast<double>(d), m_exponent);
    for (double g : m_grid) out.push_back(static_cast<std::size_t>(std::llround(g * s)));
    return out;
}

std::vector<std::size_t> ExperimentConfig::search_grid(int d) const {
    if (!m_range) throw ConfigError("experiment config: critical-m search needs 'm_range'");
    const double s = std::pow(static_cast<double>(d), m_range->exponent);
    std::vector<std::size_t> out;
    const double top = m_range->hi * s * (1.0 + 1e-12);
    for (double m = m_range->lo * s; m <= top; m *= m_range->ratio) {
        const std::size_t v = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(m)));
        if (out.empty() || v > out.back()) out.push_back(v);
    }
    return out;
}

std::uint64_t trial_seed(std::uint64_t master, int d, std::size_t m, int trial) {
    return hash_keys({master, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(m),
                      static_cast<std::uint64_t>(trial)});
}

const Transformation& TransformCache::get(const ExperimentConfig& cfg, int d, const std::string& kind, int degree) {
    auto key = std::make_tuple(d, kind, degree);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return *it->second;
    }
    const std::uint64_t seed = hash_keys({cfg.master_seed, static_cast<std::uint64_t>(d),
                                          static_cast<std::uint64_t>(degree), string_key(kind)});
    Transformation t;
    const std::size_t n = cfg.transform.n_cal;
    if (kind == "xi")
        t = build_transformation(cfg.link, d, degree, cfg.transform.kappa, n, seed);
    else if (kind == "csq")
        t = csq_transformation(cfg.link, d, degree, n, seed);
    else if (kind == "label")
        t = label_transformation(cfg.link, d, degree, n, seed);
    else if (kind == "partial-trace")
        t = hermite_partial_trace_transformation(cfg.link, d, degree, degree, n, seed);
    else
        throw ConfigError("unknown transformation kind '" + kind + "'");
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = cache_[key];
    if (!slot) slot = std::make_shared<Transformation>(std::move(t));
    return *slot;
}

TrialRow run_trial(const ExperimentConfig& cfg, int d, std::size_t m, int trial, TransformCache& cache) {
    TrialRow row;
    row.d = d;
    row.m = m;
    row.algo = algorithm_name(cfg.estimator.algorithm);
    row.trial = trial;
    row.seed = trial_seed(cfg.master_seed, d, m, trial);
    if (m == 0) {
        row.error = "empty sample budget";
        return row;
    }
    try {
        const EstimatorConfig& e = cfg.estimator;
        const int degree = transform_degree(e);
        const Transformation& T =
            cache.get(cfg, d, uses_label_transform(e.algorithm) ? "label" : cfg.transform.kind, degree);
        const Transformation* boost_T = nullptr;
        if (e.algorithm == Algorithm::prtr && degree % 2 == 1 && degree >= 3)
            boost_T = &cache.get(cfg, d, "partial-trace", degree);
        if (e.algorithm == Algorithm::spectral1 && e.boost_after_spectral)
            boost_T = &cache.get(cfg, d, cfg.transform.kind, e.boost_degree);
        Rng rng = make_rng(row.seed, 0x77);
        const Vec w_star = random_unit(d, rng);
        const Dataset data = sample_planted(cfg.link, w_star, m, row.seed);
        EstimatorConfig ec = e;
        ec.seed = row.seed;
        EstimatorResult res = run_estimator(data, T, ec, boost_T);
        row.overlap = overlap_of(res.w_hat, w_star);
        row.success = row.overlap >= cfg.success_threshold;
        row.wallclock_s = cfg.timing ? res.wallclock_s : 0.0;
        row.samples = res.samples_consumed;
        if (row.samples > m) row.error = "estimator exceeded its sample budget";
    } catch (const std::exception& ex) {
        row.error = ex.what();
        row.success = false;
    }
    return row;
}

std::vector<double> isotonic_fit(const std::vector<double>& y, const std::vector<double>& w) {
    struct Block {
        double sum, weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < y.size(); ++i) {
        blocks.push_back({y[i] * w[i], w[i], 1});
        while (blocks.size() > 1) {
            Block& b = blocks.back();
            Block& a = blocks[blocks.size() - 2];
            if (a.sum / a.weight <= b.sum / b.weight) break;
            a.sum += b.sum;
            a.weight += b.weight;
            a.count += b.count;
            blocks.pop_back();
        }
    }
    std::vector<double> out;
    for (const auto& b : blocks) out.insert(out.end(), b.count, b.sum / b.weight);
    return out;
}

namespace {

class PointEvaluator {
public:
    PointEvaluator(const ExperimentConfig& cfg, int d, TransformCache& cache) : cfg_(cfg), d_(d), cache_(cache) {}

    double rate(std::size_t m, int trials) {
        std::vector<int> todo;
        for (int t = 0; t < trials; ++t)
            if (!rows_.count({m, t})) todo.push_back(t);
        std::vector<TrialRow> fresh(todo.size());
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < static_cast<long>(todo.size()); ++i) fresh[i] = run_trial(cfg_, d_, m, todo[i], cache_);
        for (std::size_t i = 0; i < todo.size(); ++i) rows_[{m, todo[i]}] = fresh[i];
        int ok = 0;
        for (int t = 0; t < trials; ++t) ok += rows_.at({m, t}).success ? 1 : 0;
        trials_[m] = std::max(trials_[m], trials);
        return static_cast<double>(ok) / trials;
    }

    std::vector<TrialRow> rows() const {
        std::vector<TrialRow> out;
        for (const auto& [k, r] : rows_) out.push_back(r);
        return out;
    }
    int trials(std::size_t m) const { return trials_.count(m) ? trials_.at(m) : 0; }

private:
    const ExperimentConfig& cfg_;
    int d_;
    TransformCache& cache_;
    std::map<std::pair<std::size_t, int>, TrialRow> rows_;
    std::map<std::size_t, int> trials_;
};

}  // namespace

json CriticalResult::to_json() const {
    json j;
    j["d"] = d;
    j["m_c"] = m_c;
    j["m_c_interp"] = m_c_interp;
    json c = json::array();
    for (const auto& p : curve)
        c.push_back({{"m", p.m}, {"trials", p.trials}, {"rate", p.rate}, {"smoothed", p.smoothed}});
    j["curve"] = c;
    return j;
}

CriticalResult critical_m(const ExperimentConfig& cfg, int d, TransformCache& cache) {
    const auto grid = cfg.search_grid(d);
    if (grid.empty()) throw ConfigError("critical_m: empty search grid");
    const int n = static_cast<int>(grid.size());
    PointEvaluator ev(cfg, d, cache);
    auto curve_of = [&](int lo, int hi, const std::vector<double>& smoothed) {
        std::vector<CurvePoint> c;
        for (int i = lo; i <= hi; ++i) {
            CurvePoint p;
            p.m = grid[i];
            p.trials = ev.trials(grid[i]);
            p.rate = ev.rate(grid[i], p.trials);
            p.smoothed = smoothed.empty() ? p.rate : smoothed[i - lo];
            c.push_back(p);
        }
        return c;
    };

    // coarse pass over every third grid point
    int jc = -1;
    for (int i = 0; i < n; i = (i + 3 < n || i == n - 1) ? i + 3 : n - 1) {
        if (ev.rate(grid[i], cfg.coarse_seeds) >= 0.5) {
            jc = i;
            break;
        }
        if (i == n - 1) break;
    }
    if (jc < 0) {
        if (ev.rate(grid[n - 1], cfg.seeds) < 0.5) {
            std::vector<CurvePoint> c;
            for (int i = 0; i < n; ++i)
                if (ev.trials(grid[i]) > 0) {
                    CurvePoint p{grid[i], ev.trials(grid[i]), ev.rate(grid[i], ev.trials(grid[i])), 0.0};
                    p.smoothed = p.rate;
                    c.push_back(p);
                }
            throw RangeExhausted("critical_m: success rate never reaches 1/2 in the search range", c);
        }
        jc = n - 1;
    }

    int lo = std::max(0, jc - 4), hi = std::min(n - 1, jc + 2);
    std::vector<double> smoothed;
    int cross = -1;
    for (;;) {
        std::vector<double> rates, weights;
        for (int i = lo; i <= hi; ++i) {
            rates.push_back(ev.rate(grid[i], cfg.seeds));
            weights.push_back(cfg.seeds);
        }
        smoothed = isotonic_fit(rates, weights);
        cross = -1;
        for (int i = lo; i <= hi; ++i)
            if (smoothed[i - lo] >= 0.5) {
                cross = i;
                break;
            }
        if (cross == lo && lo > 0) {
            lo = std::max(0, lo - 2);
            continue;
        }
        if (cross < 0 && hi < n - 1) {
            hi = std::min(n - 1, hi + 2);
            continue;
        }
        break;
    }
    CriticalResult out;
    out.d = d;
    out.curve = curve_of(lo, hi, smoothed);
    if (cross < 0) throw RangeExhausted("critical_m: smoothed success rate stays below 1/2", out.curve);
    out.m_c = grid[cross];
    out.m_c_interp = static_cast<double>(grid[cross]);
    if (cross > lo) {
        const double s0 = smoothed[cross - 1 - lo], s1 = smoothed[cross - lo];
        const double l0 = std::log(static_cast<double>(grid[cross - 1])), l1 = std::log(static_cast<double>(grid[cross]));
        const double f = s1 > s0 ? (0.5 - s0) / (s1 - s0) : 1.0;
        out.m_c_interp = std::exp(l0 + f * (l1 - l0));
    }
    out.rows = ev.rows();
    return out;
}

SlopeFit scaling_exponent(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw DomainError("scaling_exponent: need at least three points");
    const double n = static_cast<double>(points.size());
    double sx = 0, sy = 0;
    for (auto [d, m] : points) {
        if (!(d > 0.0) || !(m > 0.0)) throw DomainError("scaling_exponent: values must be positive");
        sx += std::log(d);
        sy += std::log(m);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (auto [d, m] : points) {
        sxx += (std::log(d) - mx) * (std::log(d) - mx);
        sxy += (std::log(d) - mx) * (std::log(m) - my);
    }
    if (!(sxx > 1e-14)) throw DomainError("scaling_exponent: degenerate dimension values");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0;
    for (auto [d, m] : points) {
        const double r = std::log(m) - (f.intercept + f.slope * std::log(d));
        ssr += r * r;
    }
    f.std_error = points.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
    return f;
}

json SweepResult::summary() const {
    json j;
    json agg = json::array();
    for (const auto& [k, v] : success_rate) agg.push_back({{"d", k.first}, {"m", k.second}, {"success_rate", v}});
    j["aggregates"] = agg;
    j["rows"] = rows.size();
    j["failures"] = failures;
    json errs = json::array();
    for (const auto& r : rows)
        if (!r.error.empty()) errs.push_back({{"d", r.d}, {"m", r.m}, {"seed", r.seed}, {"reason", r.error}});
    j["failed_rows"] = errs;
    return j;
}

SweepResult sweep(const ExperimentConfig& cfg, TransformCache& cache) {
    if (cfg.m_grid.empty()) throw ConfigError("sweep: m_grid must be nonempty");
    struct Cell {
        int d;
        std::size_t m;
        int trial;
    };
    std::vector<Cell> cells;
    for (int d : cfg.d_grid)
        for (std::size_t m : cfg.m_values(d))
            for (int t = 0; t < cfg.seeds; ++t) cells.push_back({d, m, t});
    std::vector<TrialRow> rows(cells.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < static_cast<long>(cells.size()); ++i)
        rows[i] = run_trial(cfg, cells[i].d, cells[i].m, cells[i].trial, cache);
    std::stable_sort(rows.begin(), rows.end(), [](const TrialRow& a, const TrialRow& b) {
        return std::tie(a.d, a.m, a.trial) < std::tie(b.d, b.m, b.trial);
    });
    SweepResult out;
    out.rows = rows;
    std::map<std::pair<int, std::size_t>, std::pair<int, int>> counts;
    for (const auto& r : rows) {
        auto& c = counts[{r.d, r.m}];
        c.first += r.success ? 1 : 0;
        c.second += 1;
        if (!r.error.empty()) ++out.failures;
    }
    for (const auto& [k, c] : counts) out.success_rate[k] = static_cast<double>(c.first) / c.second;
    return out;
}

void write_results_csv(const std::vector<TrialRow>& rows, bool timing, std::ostream& os) {
    os << "d,m,algo,seed,overlap,success,wallclock_s,samples\n";
    char buf[64];
    for (const auto& r : rows) {
        os << r.d << ',' << r.m << ',' << r.algo << ',' << r.seed << ',';
        if (std::isnan(r.overlap)) {
            os << "nan";
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", r.overlap);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%.6f", timing ? r.wallclock_s : 0.0);
        os << ',' << (r.success ? 1 : 0) << ',' << buf << ',' << r.samples << '\n';
    }
}

}  // namespace simlab
