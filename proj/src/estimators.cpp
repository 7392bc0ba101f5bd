#include "simlab/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "simlab/harmonic_core.hpp"

namespace simlab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void finalize(EstimatorResult& res, const Dataset& data, Clock::time_point t0) {
    const double n = res.w_hat.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateError("estimator produced a zero or non-finite direction");
    res.w_hat /= n;
    if (data.planted) res.overlap = overlap_of(res.w_hat, *data.planted);
    res.wallclock_s = seconds_since(t0);
}

std::vector<double> scaled_values(const Transformation& T, const Dataset& data, double scale) {
    std::vector<double> v = T.apply(data);
    for (double& x : v) x *= scale;
    return v;
}

int stride_for(const EstimatorConfig& cfg, std::size_t steps) {
    if (cfg.trace_stride > 0) return cfg.trace_stride;
    return static_cast<int>(std::max<std::size_t>(1, steps / 200));
}

// Largest-magnitude eigenpair of a symmetric matrix.
Vec top_eigenvector(const Eigen::MatrixXd& M, bool by_magnitude, double* value = nullptr) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver failed");
    const auto& ev = es.eigenvalues();
    Eigen::Index best = ev.size() - 1;
    if (by_magnitude && std::abs(ev(0)) > std::abs(ev(best))) best = 0;
    if (value) *value = ev(best);
    return es.eigenvectors().col(best);
}

struct PowerResult {
    Vec v;
    int iterations = 0;
    bool converged = false;
};

template <class Op>
PowerResult power_iterate(Op op, Vec v, int iterations, double tol) {
    PowerResult pr;
    v.normalize();
    for (int it = 1; it <= iterations; ++it) {
        Vec nv = op(v);
        const double n = nv.norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateError("power iteration hit a zero vector");
        nv /= n;
        if (nv.dot(v) < 0) nv = -nv;
        const double change = (nv - v).norm();
        v = nv;
        pr.iterations = it;
        if (change < tol) {
            pr.converged = true;
            break;
        }
    }
    pr.v = v;
    return pr;
}

// Equivariant start for unfolding power iterations: sum_i w_i z_i^{(a)}.
Vec moment_start(const SampleView& s, const double* w, int a, Exec exec) {
    const int d = s.d;
    const std::size_t n = ipow(d, a);
    auto parts = chunked_reduce(s.m, n, exec, [&](std::size_t b, std::size_t e, double* part) {
        std::vector<double> cur, nxt;
        for (std::size_t i = b; i < e; ++i) {
            const double* z = s.row(i);
            cur.assign(1, w[i]);
            for (int k = 0; k < a; ++k) {
                nxt.resize(cur.size() * d);
                for (std::size_t c = 0; c < cur.size(); ++c)
                    for (int j = 0; j < d; ++j) nxt[c * d + j] = cur[c] * z[j];
                cur.swap(nxt);
            }
            for (std::size_t k = 0; k < n; ++k) part[k] += cur[k];
        }
    });
    Vec v = Eigen::Map<Vec>(parts.data(), n);
    if (!(v.norm() > 0.0)) v = Vec::Ones(n);
    return v;
}

double holdout_proxy(const SampleView& s, const double* tv, const Vec& w, int l, Exec exec) {
    if (s.m == 0) return 0.0;
    GegenbauerBasis basis(s.d, l);
    auto parts = chunked_reduce(s.m, 1, exec, [&](std::size_t b, std::size_t e, double* part) {
        std::vector<double> q(l + 1);
        for (std::size_t i = b; i < e; ++i) {
            const double t = std::clamp(Eigen::Map<const Vec>(s.row(i), s.d).dot(w), -1.0, 1.0);
            basis.eval_all(t, q.data());
            part[0] += tv[i] * q[l];
        }
    });
    return parts[0] / static_cast<double>(s.m);
}

}  // namespace

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::spectral1: return "spectral1";
        case Algorithm::spectral2: return "spectral2";
        case Algorithm::sgd: return "sgd";
        case Algorithm::unfold: return "unfold";
        case Algorithm::unfold_balanced: return "unfold-balanced";
        case Algorithm::hesgd: return "hesgd";
        case Algorithm::prtr: return "prtr";
        case Algorithm::boost: return "boost";
    }
    return "";
}

Algorithm parse_algorithm(const std::string& s) {
    for (Algorithm a : {Algorithm::spectral1, Algorithm::spectral2, Algorithm::sgd, Algorithm::unfold,
                        Algorithm::unfold_balanced, Algorithm::hesgd, Algorithm::prtr, Algorithm::boost})
        if (algorithm_name(a) == s) return a;
    throw ConfigError("unknown algorithm '" + s + "'");
}

json EstimatorConfig::to_json() const {
    json j;
    j["algorithm"] = algorithm_name(algorithm);
    j["ell"] = l;
    j["seed"] = seed;
    j["step_constant"] = step_constant;
    if (eta) j["eta"] = *eta;
    j["restart_pairs"] = restart_pairs;
    j["holdout_fraction"] = holdout_fraction;
    if (init) j["init"] = std::vector<double>(init->data(), init->data() + init->size());
    j["randomize_radius"] = randomize_radius;
    j["polish_fraction"] = polish_fraction;
    j["polish_constant"] = polish_constant;
    j["loss"] = loss == EstimatorConfig::Loss::square ? "square" : "correlation";
    j["power_iterations"] = power_iterations;
    j["power_tolerance"] = power_tolerance;
    j["a"] = a;
    j["b"] = b;
    j["unfold_mode"] = unfold_mode == UnfoldMode::dense ? "dense"
                       : unfold_mode == UnfoldMode::implicit ? "implicit"
                                                             : "auto";
    j["boost_stages"] = boost_stages;
    j["boost_after_spectral"] = boost_after_spectral;
    j["boost_degree"] = boost_degree;
    j["k_star"] = k_star;
    j["spectral_fraction"] = spectral_fraction;
    j["record_trace"] = record_trace;
    j["trace_stride"] = trace_stride;
    j["exec"] = exec == Exec::serial ? "serial" : "parallel";
    return j;
}

EstimatorConfig EstimatorConfig::from_json(const json& j) {
    EstimatorConfig c;
    if (!j.is_object()) throw ConfigError("estimator config: expected a JSON object");
    try {
        if (j.contains("algorithm")) c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        c.l = j.value("ell", c.l);
        c.seed = j.value("seed", c.seed);
        c.step_constant = j.value("step_constant", c.step_constant);
        if (j.contains("eta") && !j.at("eta").is_null()) c.eta = j.at("eta").get<double>();
        c.restart_pairs = j.value("restart_pairs", c.restart_pairs);
        c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
        if (j.contains("init") && !j.at("init").is_null()) {
            auto v = j.at("init").get<std::vector<double>>();
            c.init = Eigen::Map<Vec>(v.data(), v.size());
        }
        c.randomize_radius = j.value("randomize_radius", c.randomize_radius);
        c.polish_fraction = j.value("polish_fraction", c.polish_fraction);
        c.polish_constant = j.value("polish_constant", c.polish_constant);
        const std::string loss = j.value("loss", std::string("correlation"));
        if (loss != "square" && loss != "correlation")
            throw ConfigError("estimator config: loss must be correlation or square");
        c.loss = loss == "square" ? EstimatorConfig::Loss::square : EstimatorConfig::Loss::correlation;
        c.power_iterations = j.value("power_iterations", c.power_iterations);
        c.power_tolerance = j.value("power_tolerance", c.power_tolerance);
        c.a = j.value("a", c.a);
        c.b = j.value("b", c.b);
        const std::string mode = j.value("unfold_mode", std::string("auto"));
        if (mode == "dense")
            c.unfold_mode = UnfoldMode::dense;
        else if (mode == "implicit")
            c.unfold_mode = UnfoldMode::implicit;
        else if (mode == "auto")
            c.unfold_mode = UnfoldMode::automatic;
        else
            throw ConfigError("estimator config: unknown unfold_mode '" + mode + "'");
        c.boost_stages = j.value("boost_stages", c.boost_stages);
        c.boost_after_spectral = j.value("boost_after_spectral", c.boost_after_spectral);
        c.boost_degree = j.value("boost_degree", c.boost_degree);
        c.k_star = j.value("k_star", c.k_star);
        c.spectral_fraction = j.value("spectral_fraction", c.spectral_fraction);
        c.record_trace = j.value("record_trace", c.record_trace);
        c.trace_stride = j.value("trace_stride", c.trace_stride);
        const std::string ex = j.value("exec", std::string("parallel"));
        if (ex != "serial" && ex != "parallel") throw ConfigError("estimator config: exec must be serial or parallel");
        c.exec = ex == "serial" ? Exec::serial : Exec::parallel;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("estimator config: ") + e.what());
    }
    if (c.l < 0) throw ConfigError("estimator config: ell must be >= 0");
    if (c.restart_pairs < 1) throw ConfigError("estimator config: restart_pairs must be >= 1");
    if (!(c.holdout_fraction >= 0.0 && c.holdout_fraction < 1.0))
        throw ConfigError("estimator config: holdout_fraction must lie in [0,1)");
    if (c.eta && !(*c.eta >= 0.0)) throw ConfigError("estimator config: eta must be >= 0");
    if (c.power_iterations < 1) throw ConfigError("estimator config: power_iterations must be >= 1");
    if (c.a < 0 || c.b < 0) throw ConfigError("estimator config: negative unfolding split");
    if (!(c.spectral_fraction > 0.0 && c.spectral_fraction < 1.0))
        throw ConfigError("estimator config: spectral_fraction must lie in (0,1)");
    return c;
}

json EstimatorResult::to_json() const {
    json j;
    j["w_hat"] = std::vector<double>(w_hat.data(), w_hat.data() + w_hat.size());
    j["overlap"] = overlap ? json(*overlap) : json(nullptr);
    j["samples_consumed"] = samples_consumed;
    j["wallclock_s"] = wallclock_s;
    j["trace"] = trace;
    j["converged"] = converged;
    j["iterations"] = iterations;
    j["note"] = note;
    return j;
}

// ---------------------------------------------------------------------------
// Spectral estimators.

EstimatorResult spectral_l1(const Dataset& data, const Transformation& T) {
    if (T.l != 1) throw DomainError("spectral_l1: transformation must have degree 1");
    const auto t0 = Clock::now();
    const std::size_t m = data.m();
    if (m == 0) throw DegenerateError("spectral_l1: empty dataset");
    auto tv = scaled_values(T, data, std::sqrt(static_cast<double>(data.d)) / static_cast<double>(m));
    EstimatorResult res;
    res.w_hat = weighted_sum(data.view(), tv.data(), Exec::parallel);
    if (!(res.w_hat.norm() > 0.0)) throw DegenerateError("spectral_l1: v_hat = 0");
    res.samples_consumed = m;
    finalize(res, data, t0);
    return res;
}

EstimatorResult spectral_l2(const Dataset& data, const Transformation& T, const EstimatorConfig& cfg) {
    if (T.l != 2) throw DomainError("spectral_l2: transformation must have degree 2");
    const auto t0 = Clock::now();
    const std::size_t m = data.m();
    if (m == 0) throw DegenerateError("spectral_l2: empty dataset");
    const int d = data.d;
    auto tv = scaled_values(T, data, 1.0 / static_cast<double>(m));
    const SampleView s = data.view();
    EstimatorResult res;
    res.samples_consumed = m;
    if (d <= 2 * cfg.power_iterations) {
        // Assembling M costs m d^2, below m d per iteration times the budget.
        double tsum = 0.0;
        for (double x : tv) tsum += x;
        auto parts = chunked_reduce(m, static_cast<std::size_t>(d) * d, cfg.exec,
                                    [&](std::size_t b, std::size_t e, double* part) {
                                        Eigen::Map<const RowMatrix> Z(s.row(b), e - b, d);
                                        Eigen::Map<const Vec> w(tv.data() + b, e - b);
                                        Eigen::Map<Eigen::MatrixXd>(part, d, d).noalias() =
                                            Z.transpose() * (w.asDiagonal() * Z);
                                    });
        Eigen::MatrixXd M = Eigen::Map<Eigen::MatrixXd>(parts.data(), d, d) * static_cast<double>(d);
        M.diagonal().array() -= tsum;
        res.w_hat = top_eigenvector(0.5 * (M + M.transpose()), true);
    } else {
        Vec start = weighted_sum(s, tv.data(), cfg.exec);
        auto pr = power_iterate([&](const Vec& v) { return spectral2_apply(s, tv.data(), v, cfg.exec); }, start,
                                cfg.power_iterations, cfg.power_tolerance);
        res.w_hat = pr.v;
        res.iterations = pr.iterations;
        res.converged = pr.converged;
        if (!pr.converged) res.note = "power iteration did not converge within budget";
    }
    finalize(res, data, t0);
    return res;
}

// ---------------------------------------------------------------------------
// Boosting.

Vec boost_step(const Vec& v, const Dataset& chunk, const Transformation& T, int l, Exec exec) {
    if (l < 3) throw DomainError("boost_step: degree must be >= 3");
    if (chunk.m() == 0) throw DegenerateError("boost_step: empty chunk");
    auto tv = scaled_values(T, chunk, 1.0 / static_cast<double>(chunk.m()));
    Vec out = boost_sum(chunk.view(), tv.data(), v, l, exec);
    const double n = out.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateError("boost_step: v_hat = 0");
    return out / n;
}

std::vector<std::size_t> boost_schedule(std::size_t total, int stages) {
    if (stages < 1) throw DomainError("boost_schedule: stages must be >= 1");
    std::vector<std::size_t> out;
    const double norm = 1.0 - std::ldexp(1.0, -stages);
    std::size_t used = 0;
    for (int t = 1; t <= stages; ++t) {
        out.push_back(static_cast<std::size_t>(std::floor(total * std::ldexp(1.0, -t) / norm)));
        used += out.back();
    }
    out.front() += total - used;
    return out;
}

EstimatorResult boost(const Vec& w0, const Dataset& data, const Transformation& T, int l, const EstimatorConfig& cfg) {
    const auto t0 = Clock::now();
    const int d = data.d;
    const int stages = cfg.boost_stages > 0 ? cfg.boost_stages : static_cast<int>(std::ceil(std::log(d)));
    const std::size_t holdout = static_cast<std::size_t>(cfg.holdout_fraction * data.m());
    const std::size_t used = data.m() - holdout;
    const auto sched = boost_schedule(used, stages);
    for (std::size_t c : sched)
        if (c == 0) throw DomainError("boost: dataset too small for the chunk schedule");
    const Dataset held = data.slice(used, data.m());
    const auto held_t = T.apply(held);
    const double threshold = T.beta > 0.0 ? T.beta * gegenbauer_p(d, l, calibration::kBoostExitOverlap)
                                          : std::numeric_limits<double>::infinity();
    EstimatorResult res;
    Vec w = w0.normalized();
    // Later chunks are small and can lose overlap, so the iterate with the
    // largest held-out proxy is returned.
    Vec best = w;
    double best_score = -1.0;
    std::size_t offset = 0;
    for (int t = 0;; ++t) {
        const double score = std::abs(holdout_proxy(held.view(), held_t.data(), w, l, cfg.exec));
        if (held.m() == 0 || score > best_score) {
            best_score = score;
            best = w;
        }
        if (t == stages) break;
        if (score > threshold) {
            res.note = "early exit after " + std::to_string(t) + " steps";
            break;
        }
        const Dataset chunk = data.slice(offset, offset + sched[t]);
        offset += sched[t];
        w = boost_step(w, chunk, T, l, cfg.exec);
        ++res.iterations;
        if (data.planted) res.trace.push_back(overlap_of(w, *data.planted));
    }
    w = best;
    res.w_hat = w;
    res.samples_consumed = data.m();
    finalize(res, data, t0);
    return res;
}

// ---------------------------------------------------------------------------
// Online SGD.

namespace {

struct SgdRun {
    Vec w;
    std::vector<double> trace;
    bool finite = true;
};

// Generic spherical SGD over samples [begin, end). grad(i, w, g) writes the
// Euclidean gradient of the per-sample loss into g.
template <class Grad>
SgdRun sgd_pass(const Dataset& data, std::size_t begin, std::size_t end, Vec w, double eta, Grad grad,
                const EstimatorConfig& cfg) {
    SgdRun run;
    const int stride = stride_for(cfg, end - begin);
    Vec g(data.d);
    for (std::size_t i = begin; i < end; ++i) {
        grad(i, w, g);
        g -= g.dot(w) * w;
        Vec nw = w - eta * g;
        const double n = nw.norm();
        if (!std::isfinite(n) || !(n > 0.0)) {
            run.finite = false;
            break;
        }
        w = nw / n;
        if (cfg.record_trace && data.planted && (i - begin) % stride == 0)
            run.trace.push_back(overlap_of(w, *data.planted));
    }
    run.w = w;
    return run;
}

// Runs the restart policy: pairs of opposite starts on disjoint slices, best
// held-out proxy wins, optional polish pass at the end.
template <class Grad, class Proxy>
EstimatorResult restarted_sgd(const Dataset& data, double eta, Grad grad, Proxy proxy, const EstimatorConfig& cfg,
                              std::size_t holdout) {
    const std::size_t m = data.m();
    const std::size_t polish = static_cast<std::size_t>(cfg.polish_fraction * m);
    EstimatorResult res;
    res.samples_consumed = m;
    std::vector<Vec> starts;
    if (cfg.init) {
        if (cfg.init->size() != data.d) throw DomainError("sgd: init has the wrong dimension");
        starts.push_back(cfg.init->normalized());
        holdout = 0;
    } else {
        for (int p = 0; p < cfg.restart_pairs; ++p) {
            Rng rng = make_rng(cfg.seed, 0x1000 + p);
            Vec u = random_unit(data.d, rng);
            starts.push_back(u);
            starts.push_back(-u);
        }
    }
    if (m < holdout + polish + starts.size()) throw DegenerateError("sgd: budget too small for the restart policy");
    const std::size_t per_run = (m - holdout - polish) / starts.size();
    const std::size_t held_begin = per_run * starts.size();
    double best = -std::numeric_limits<double>::infinity();
    SgdRun chosen;
    bool any_finite = false;
    for (std::size_t r = 0; r < starts.size(); ++r) {
        SgdRun run = sgd_pass(data, r * per_run, (r + 1) * per_run, starts[r], eta, grad, cfg);
        if (!run.finite) {
            if (!any_finite && chosen.w.size() == 0) chosen = run;
            continue;
        }
        const double score = starts.size() == 1 ? 0.0 : proxy(held_begin, held_begin + holdout, run.w);
        if (!any_finite || score > best) {
            best = score;
            chosen = run;
            any_finite = true;
        }
    }
    if (!any_finite) {
        res.converged = false;
        res.note = "non-finite iterate; trace returned";
        res.w_hat = chosen.w;
        res.trace = chosen.trace;
        return res;
    }
    if (polish > 0) {
        const double eta_p = cfg.polish_constant / data.d;
        SgdRun pol = sgd_pass(data, m - polish, m, chosen.w, eta_p, grad, cfg);
        if (pol.finite) {
            chosen.w = pol.w;
            chosen.trace.insert(chosen.trace.end(), pol.trace.begin(), pol.trace.end());
        }
    }
    res.w_hat = chosen.w;
    res.trace = chosen.trace;
    res.iterations = static_cast<int>(per_run);
    return res;
}

}  // namespace

EstimatorResult online_sgd(const Dataset& stream, const Transformation& T, int l, const EstimatorConfig& cfg) {
    if (l < 3) throw DomainError("online_sgd: degree must be >= 3");
    const auto t0 = Clock::now();
    const int d = stream.d;
    double eta;
    if (cfg.eta) {
        eta = *cfg.eta;
    } else {
        if (!(T.beta > 0.0)) throw DomainError("online_sgd: default step size needs a positive correlation");
        eta = cfg.step_constant * T.beta * std::pow(static_cast<double>(d), -l / 2.0);
    }
    const auto tv = T.apply(stream);
    GegenbauerBasis basis(d, l);
    const bool square = cfg.loss == EstimatorConfig::Loss::square;
    auto grad = [&](std::size_t i, const Vec& w, Vec& g) {
        Eigen::Map<const Vec> z(stream.z.data() + i * d, d);
        const double t = std::clamp(z.dot(w), -1.0, 1.0);
        const double q = square ? basis.eval(l, t) : 0.0;
        const double qp = basis.derivative(l, t);
        g = (-2.0 * (tv[i] - q) * qp) * z;
    };
    auto proxy = [&](std::size_t b, std::size_t e, const Vec& w) {
        return holdout_proxy(stream.view(b, e), tv.data() + b, w, l, cfg.exec);
    };
    const std::size_t holdout = static_cast<std::size_t>(cfg.holdout_fraction * stream.m());
    EstimatorResult res = restarted_sgd(stream, eta, grad, proxy, cfg, holdout);
    if (res.w_hat.size() == 0) throw DegenerateError("online_sgd: no finite iterate");
    finalize(res, stream, t0);
    return res;
}

Estimate sgd_drift(const LinkSpec& link, const Transformation& T, int d, int l, double m, double eta, std::size_t n,
                   std::uint64_t seed, EstimatorConfig::Loss loss) {
    if (l < 1 || d < 3) throw DomainError("sgd_drift: need l >= 1 and d >= 3");
    if (!(std::abs(m) <= 1.0)) throw DomainError("sgd_drift: overlap must lie in [-1,1]");
    if (n == 0) throw DomainError("sgd_drift: n must be positive");
    if (!(eta > 0.0)) eta = calibration::kSgdStepConstant * T.beta * std::pow(static_cast<double>(d), -l / 2.0);
    Vec w_star = Vec::Zero(d), w = Vec::Zero(d);
    w_star(0) = 1.0;
    w(0) = m;
    w(1) = std::sqrt(1.0 - m * m);
    GegenbauerBasis basis(d, l);
    const bool square = loss == EstimatorConfig::Loss::square;
    constexpr std::size_t kBlock = 1 << 16;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t b = 0; b * kBlock < n; ++b) {
        const std::size_t cnt = std::min(kBlock, n - b * kBlock);
        const Dataset ds = sample_planted(link, w_star, cnt, hash_keys({seed, b}));
        const auto tv = T.apply(ds);
        for (std::size_t i = 0; i < cnt; ++i) {
            Eigen::Map<const Vec> z(ds.z.data() + i * d, d);
            const double t = std::clamp(z.dot(w), -1.0, 1.0);
            const double q = square ? basis.eval(l, t) : 0.0;
            Vec g = (-2.0 * (tv[i] - q) * basis.derivative(l, t)) * z;
            g -= g.dot(w) * w;
            const Vec nw = (w - eta * g).normalized();
            const double delta = nw(0) - m;
            sum += delta;
            sum2 += delta * delta;
        }
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

DriftThreshold sgd_drift_threshold(int d, int l) {
    if (l < 3 || d < 3) throw DomainError("sgd_drift_threshold: need l >= 3 and d >= 3");
    const double num = (l - 2.0) * (l + d - 3.0);
    const double den = (l - d / 2.0 - 3.0) * (l + d / 2.0 - 2.0);
    if (den == 0.0) throw DomainError("sgd_drift_threshold: singular constant");
    DriftThreshold t;
    t.sign_flipped = num / den < 0.0;
    t.s_star = std::sqrt(std::abs(num / den)) * std::cos(M_PI / l);
    t.value = 2.0 * std::sqrt(t.s_star / d);
    return t;
}

EstimatorResult hermite_sgd(const Dataset& data, const Transformation& Tstar, int k_star, const EstimatorConfig& cfg) {
    if (k_star < 1) throw DomainError("hermite_sgd: k_star must be >= 1");
    const auto t0 = Clock::now();
    const int d = data.d;
    const std::size_t m = data.m();
    double eta;
    if (cfg.eta) {
        eta = *cfg.eta;
    } else {
        const double beta = Tstar.beta > 0.0 ? Tstar.beta : 1.0;
        eta = cfg.step_constant * beta * std::pow(static_cast<double>(d), -k_star / 2.0);
    }
    const auto tv = Tstar.apply(data);
    std::vector<double> radius = data.r;
    if (cfg.randomize_radius) {
        Rng rng = make_rng(cfg.seed, 0x5252);
        for (auto& r : radius) r = sample_chi(d, rng);
    }
    const double sk = std::sqrt(static_cast<double>(k_star));
    const bool square = cfg.loss == EstimatorConfig::Loss::square;
    auto grad = [&](std::size_t i, const Vec& w, Vec& g) {
        Eigen::Map<const Vec> z(data.z.data() + i * d, d);
        const double u = radius[i] * z.dot(w);
        const double he = square ? hermite_eval(k_star, u) : 0.0;
        const double hep = sk * hermite_eval(k_star - 1, u);
        g = (-2.0 * (tv[i] - he) * hep * radius[i]) * z;
    };
    auto proxy = [&](std::size_t b, std::size_t e, const Vec& w) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            Eigen::Map<const Vec> z(data.z.data() + i * d, d);
            s += tv[i] * hermite_eval(k_star, radius[i] * z.dot(w));
        }
        return e > b ? s / static_cast<double>(e - b) : 0.0;
    };
    const std::size_t holdout = static_cast<std::size_t>(cfg.holdout_fraction * m);
    EstimatorResult res = restarted_sgd(data, eta, grad, proxy, cfg, holdout);
    if (res.w_hat.size() == 0) throw DegenerateError("hermite_sgd: no finite iterate");
    finalize(res, data, t0);
    return res;
}

// ---------------------------------------------------------------------------
// Tensor unfolding.

DenseSymTensor assemble_harmonic_sum(const SampleView& s, const double* w, int l, Exec exec) {
    const int d = s.d;
    if (ipow(d, l) > kDenseTensorBudget) throw std::length_error("assemble_harmonic_sum: tensor exceeds the dense budget");
    // moment tensors M_p = sum_i w_i z_i^{(p)}, p = l, l-2, ...
    std::vector<std::vector<double>> mom(l + 1);
    for (int p = l; p >= 0; p -= 2) {
        const std::size_t n = ipow(d, p);
        auto parts = chunked_reduce(s.m, n, exec, [&](std::size_t b, std::size_t e, double* part) {
            const std::size_t mc = e - b;
            Eigen::Map<const RowMatrix> Z(s.row(b), mc, d);
            Eigen::Map<const Vec> wv(w + b, mc);
            if (p == 0) {
                part[0] += wv.sum();
                return;
            }
            Eigen::MatrixXd K = Eigen::MatrixXd::Ones(mc, 1);
            for (int e2 = 1; e2 < p; ++e2) {
                Eigen::MatrixXd N(mc, K.cols() * d);
                for (Eigen::Index c = 0; c < K.cols(); ++c)
                    for (int i = 0; i < d; ++i) N.col(c * d + i) = Z.col(i).cwiseProduct(K.col(c));
                K.swap(N);
            }
            Eigen::Map<Eigen::MatrixXd>(part, d, K.cols()).noalias() = Z.transpose() * (wv.asDiagonal() * K);
        });
        mom[p] = std::move(parts);
    }
    DenseSymTensor out(l, d);
    const auto c = c_coeff_table(l, d);
    std::vector<int> idx(l);
    for (int j = 0; 2 * j <= l; ++j) {
        const auto pl = enumerate_placements(l, j);
        const double wgt = c[j] / static_cast<double>(pl.size());
        const std::vector<double>& M = mom[l - 2 * j];
        for (const auto& P : pl) {
            std::fill(idx.begin(), idx.end(), 0);
            for (std::size_t f = 0; f < out.size(); ++f) {
                bool ok = true;
                for (auto [x, y] : P.pairs)
                    if (idx[x] != idx[y]) {
                        ok = false;
                        break;
                    }
                if (ok) {
                    std::size_t g = 0, st = 1;
                    for (int zp : P.z_pos) {
                        g += st * idx[zp];
                        st *= d;
                    }
                    out.entries[f] += wgt * M[g];
                }
                for (int k = 0; k < l; ++k) {
                    if (++idx[k] < d) break;
                    idx[k] = 0;
                }
            }
        }
    }
    return out;
}

Vec unfolded_top_vector(const DenseSymTensor& t, int a, int iterations, double tolerance, const Vec* start) {
    const int d = t.dim;
    const std::size_t rows = ipow(d, a), cols = ipow(d, t.order - a);
    Eigen::Map<const Eigen::MatrixXd> A(t.entries.data(), rows, cols);
    if (rows <= 2048) {
        Eigen::MatrixXd G = A * A.transpose();
        return top_eigenvector(G, false);
    }
    Vec v = start ? *start : Vec::Ones(rows);
    auto pr = power_iterate([&](const Vec& u) -> Vec { return A * (A.transpose() * u); }, v, iterations, tolerance);
    return pr.v;
}

namespace {

bool use_dense(const EstimatorConfig& cfg, int d, int l) {
    if (cfg.unfold_mode == UnfoldMode::dense) return true;
    if (cfg.unfold_mode == UnfoldMode::implicit) return false;
    return ipow(d, l) <= (std::size_t(1) << 22);
}

}  // namespace

EstimatorResult tensor_unfold_balanced(const Dataset& data, const Transformation& T, int l, const EstimatorConfig& cfg) {
    if (l < 3 || l > kMatvecMaxDegree) throw DomainError("tensor_unfold_balanced: unsupported degree");
    const auto t0 = Clock::now();
    const std::size_t m = data.m();
    if (m == 0) throw DegenerateError("tensor_unfold_balanced: empty dataset");
    const int d = data.d;
    const int I = l / 2, J = l - I;
    auto tv = scaled_values(T, data, 1.0 / static_cast<double>(m));
    const SampleView s = data.view();
    EstimatorResult res;
    res.samples_consumed = m;
    const Vec start = moment_start(s, tv.data(), I, cfg.exec);
    Vec u;
    if (use_dense(cfg, d, l)) {
        DenseSymTensor A = assemble_harmonic_sum(s, tv.data(), l, cfg.exec);
        u = unfolded_top_vector(A, I, cfg.power_iterations, cfg.power_tolerance, &start);
    } else {
        UnfoldingPlan pij(d, l, I, J), pji(d, l, J, I);
        auto pr = power_iterate(
            [&](const Vec& x) {
                Vec y = unfolded_apply(pji, s, tv.data(), x, cfg.exec);
                return unfolded_apply(pij, s, tv.data(), y, cfg.exec);
            },
            start, cfg.power_iterations, cfg.power_tolerance);
        u = pr.v;
        res.iterations = pr.iterations;
        res.converged = pr.converged;
        if (!pr.converged) res.note = "power iteration did not converge within budget";
    }
    res.w_hat = vec_extract(u, d);
    finalize(res, data, t0);
    return res;
}

EstimatorResult tensor_unfold(const Dataset& data, const Transformation& T, int l, int a, int b,
                              const EstimatorConfig& cfg) {
    if (!(a >= 1 && a < b && a + b == l)) throw DomainError("tensor_unfold: need 1 <= a < b with a + b = l");
    if (l > kMatvecMaxDegree) throw DomainError("tensor_unfold: unsupported degree");
    const auto t0 = Clock::now();
    const std::size_t m = data.m();
    if (m == 0) throw DegenerateError("tensor_unfold: empty dataset");
    const int d = data.d;
    auto tv = scaled_values(T, data, 1.0 / static_cast<double>(m));
    const SampleView s = data.view();
    const std::size_t rows = ipow(d, a);
    UnfoldingPlan pab(d, l, a, b), pba(d, l, b, a);
    EstimatorResult res;
    res.samples_consumed = m;
    const Vec start = moment_start(s, tv.data(), a, cfg.exec);
    Vec u;
    if (use_dense(cfg, d, l) && rows <= 2048) {
        DenseSymTensor A = assemble_harmonic_sum(s, tv.data(), l, cfg.exec);
        Eigen::Map<const Eigen::MatrixXd> M1(A.entries.data(), rows, ipow(d, b));
        Eigen::MatrixXd M = M1 * M1.transpose();
        for (std::size_t c = 0; c < rows; ++c) {
            Vec e = Vec::Zero(rows);
            e(c) = 1.0;
            M.col(c) -= unfolded_diagonal_apply(pab, pba, s, tv.data(), e, cfg.exec);
        }
        u = top_eigenvector(0.5 * (M + M.transpose()), false);
    } else {
        auto pr = power_iterate(
            [&](const Vec& x) {
                Vec y = unfolded_apply(pba, s, tv.data(), x, cfg.exec);
                Vec o = unfolded_apply(pab, s, tv.data(), y, cfg.exec);
                return Vec(o - unfolded_diagonal_apply(pab, pba, s, tv.data(), x, cfg.exec));
            },
            start, cfg.power_iterations, cfg.power_tolerance);
        u = pr.v;
        res.iterations = pr.iterations;
        res.converged = pr.converged;
        if (!pr.converged) res.note = "power iteration did not converge within budget";
    }
    res.w_hat = vec_extract(u, d);
    finalize(res, data, t0);
    return res;
}

// ---------------------------------------------------------------------------
// Gaussian partial trace.

EstimatorResult partial_trace(const Dataset& data, const Transformation& Tstar, int k_star, const EstimatorConfig& cfg,
                              const Transformation* boost_T) {
    if (k_star < 1) throw DomainError("partial_trace: k_star must be >= 1");
    const auto t0 = Clock::now();
    const std::size_t m = data.m();
    if (m == 0) throw DegenerateError("partial_trace: empty dataset");
    const int d = data.d;
    const int l = k_star % 2 == 1 ? 1 : 2;
    const bool boosted = l == 1 && k_star >= 3;
    const std::size_t m1 = boosted ? static_cast<std::size_t>(cfg.spectral_fraction * m) : m;
    const Dataset first = boosted ? data.slice(0, m1) : data;

    auto weighted = [&](int degree, const Dataset& ds) {
        BetaCoefficient beta(k_star, degree, d);
        if (beta.is_zero()) throw DegenerateError("partial_trace: beta_{k,l} vanishes");
        auto fn = Tstar.fn;
        auto raw = [fn, beta](double y, double r) { return fn(y, r) * beta(r); };
        double s2 = 0.0;
        for (std::size_t i = 0; i < ds.m(); ++i) {
            const double v = raw(ds.y[i], ds.r[i]);
            s2 += v * v;
        }
        const double scale = s2 > 0.0 ? 1.0 / std::sqrt(s2 / ds.m()) : 1.0;
        Transformation tr;
        tr.l = degree;
        tr.kind = "partial-trace";
        tr.fn = [raw, scale](double y, double r) { return scale * raw(y, r); };
        return tr;
    };

    EstimatorResult res;
    const Transformation Tl = weighted(l, first);
    res = l == 1 ? spectral_l1(first, Tl) : spectral_l2(first, Tl, cfg);
    if (boosted) {
        const Dataset rest = data.slice(m1, m);
        const Transformation Tk = boost_T ? *boost_T : weighted(k_star, rest);
        EstimatorResult b = boost(res.w_hat, rest, Tk, k_star, cfg);
        b.note = "spectral l=1 then boost; " + b.note;
        res = b;
    }
    res.samples_consumed = m;
    finalize(res, data, t0);
    return res;
}

// ---------------------------------------------------------------------------

EstimatorResult run_estimator(const Dataset& data, const Transformation& T, const EstimatorConfig& cfg,
                              const Transformation* boost_T) {
    switch (cfg.algorithm) {
        case Algorithm::spectral1: {
            if (!cfg.boost_after_spectral) return spectral_l1(data, T);
            if (!boost_T) throw ConfigError("spectral1 with boosting needs a boosting transformation");
            const auto t0 = Clock::now();
            const std::size_t m1 = static_cast<std::size_t>(cfg.spectral_fraction * data.m());
            EstimatorResult r = spectral_l1(data.slice(0, m1), T);
            EstimatorResult b = boost(r.w_hat, data.slice(m1, data.m()), *boost_T, cfg.boost_degree, cfg);
            b.samples_consumed = data.m();
            finalize(b, data, t0);
            return b;
        }
        case Algorithm::spectral2:
            return spectral_l2(data, T, cfg);
        case Algorithm::sgd:
            return online_sgd(data, T, cfg.l, cfg);
        case Algorithm::unfold: {
            const int a = cfg.a > 0 ? cfg.a : 1;
            const int b = cfg.b > 0 ? cfg.b : cfg.l - a;
            return tensor_unfold(data, T, cfg.l, a, b, cfg);
        }
        case Algorithm::unfold_balanced:
            return tensor_unfold_balanced(data, T, cfg.l, cfg);
        case Algorithm::hesgd:
            return hermite_sgd(data, T, cfg.k_star > 0 ? cfg.k_star : cfg.l, cfg);
        case Algorithm::prtr:
            return partial_trace(data, T, cfg.k_star > 0 ? cfg.k_star : cfg.l, cfg, boost_T);
        case Algorithm::boost: {
            Vec w0;
            if (cfg.init) {
                w0 = *cfg.init;
            } else {
                Rng rng = make_rng(cfg.seed, 0xb0057);
                w0 = random_unit(data.d, rng);
            }
            return boost(w0, data, T, cfg.l, cfg);
        }
    }
    throw ConfigError("unknown algorithm");
}

}  // namespace simlab
