// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "simlab/complexity_calc.hpp"
#include "simlab/estimators.hpp"
#include "simlab/exp_harness.hpp"
#include "simlab/harmonic_core.hpp"
#include "simlab/harmonic_tensor.hpp"

using namespace simlab;

namespace {

// Tolerances and budgets.
constexpr double kOrthoTol = 1e-10;
constexpr double kPeakTol = 1e-12;
constexpr double kIdentityTol = 1e-8;
constexpr double kMomentRelTol = 0.33;
constexpr double kTensorTol = 1e-9;
constexpr double kMatvecTol = 1e-10;
constexpr double kReproducingTol = 0.05;
constexpr double kSpectralSuccess = 0.9;
constexpr double kSpectralPilotC = 4.0;  // m = C d
constexpr double kSpectralKappa = 2.0;
constexpr double kLinearLo = 0.7, kLinearHi = 1.3;
constexpr double kSgdLo = 1.6, kSgdHi = 2.4;
constexpr double kUnfoldLo = 1.2, kUnfoldHi = 1.8;
constexpr double kIndistinguishableZ = 1.96;
constexpr double kPrtrGap = 0.5;
constexpr std::size_t kDriftSamples = 1000000;
constexpr int kSlopeSeeds = 1000;
// Step sizes scale with the calibrated beta; a large calibration sample keeps
// its error (about 5% at 60000) out of the per-d critical sizes.
constexpr std::size_t kSlopeCalibration = 1000000;

constexpr int kMixtureDim = 1000;
constexpr double kBoostAlpha = 0.1;
constexpr std::size_t kBoostChunk = 80000;  // pilot-calibrated
constexpr int kBoostSeeds = 20, kBoostRequired = 18;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome criterion1() {
    double worst = 0.0, worst_peak = 0.0;
    for (int d : {3, 10, 100, 1000}) {
        const int lmax = 10;
        const Quadrature& q = tau_d1_quadrature(d, default_quadrature_points(lmax));
        GegenbauerBasis basis(d, lmax);
        std::vector<std::vector<double>> vals;
        for (double t : q.nodes) vals.push_back(basis.eval_all(t));
        for (int l = 0; l <= lmax; ++l) {
            for (int k = 0; k <= lmax; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * vals[i][l] * vals[i][k];
                worst = std::max(worst, std::abs(s - (l == k ? 1.0 : 0.0)));
            }
            const double peak = std::sqrt(harmonic_dim_f(d, l));
            worst_peak = std::max(worst_peak, std::abs(gegenbauer_eval(d, l, 1.0) - peak) / peak);
        }
    }
    return {worst <= kOrthoTol && worst_peak <= kPeakTol,
            "max |<Q_l,Q_k> - delta| = " + fmt("%.2e", worst) + ", max Q_l(1) rel err = " + fmt("%.2e", worst_peak)};
}

// He_k(r t) = sum_l beta_{k,l}(r) Q_l(t); error relative to max(|He_k|, 1).
Outcome criterion2() {
    double worst = 0.0;
    for (int d : {5, 20, 100}) {
        GegenbauerBasis basis(d, 8);
        for (int k = 0; k <= 8; ++k) {
            std::vector<BetaCoefficient> betas;
            for (int l = 0; l <= k; ++l) betas.emplace_back(k, l, d);
            for (int ir = 1; ir <= 40; ++ir) {
                const double r = 2.0 * std::sqrt(static_cast<double>(d)) * ir / 40.0;
                for (int it = 0; it <= 40; ++it) {
                    const double t = -1.0 + 2.0 * it / 40.0;
                    double rhs = 0.0;
                    for (int l = 0; l <= k; ++l)
                        if (!betas[l].is_zero()) rhs += betas[l](r) * basis.eval(l, t);
                    const double lhs = hermite_eval(k, r * t);
                    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1.0));
                }
            }
        }
    }
    return {worst <= kIdentityTol, "max rel err = " + fmt("%.2e", worst) + " over 40x41 (r,t) grid, r <= 2 sqrt(d)"};
}

Outcome criterion3() {
    bool ok = true;
    std::ostringstream os;
    for (auto [k, l] : std::vector<std::pair<int, int>>{{3, 1}, {4, 2}, {5, 3}}) {
        for (int d : {200, 400}) {
            const double sq = beta_moment(k, l, 4 * d, MomentOrder::mean_square).value /
                              beta_moment(k, l, d, MomentOrder::mean_square).value;
            const double m0 = beta_moment(k, l, d, MomentOrder::mean).value;
            const double m1 = beta_moment(k, l, 4 * d, MomentOrder::mean).value;
            const double mean_ratio = (m1 * m1) / (m0 * m0);
            const double sq_target = std::pow(4.0, -(k - l) / 2.0), mean_target = std::pow(4.0, -(k - l));
            const double e1 = std::abs(sq / sq_target - 1.0), e2 = std::abs(mean_ratio / mean_target - 1.0);
            ok = ok && e1 <= kMomentRelTol && e2 <= kMomentRelTol;
            os << "(" << k << "," << l << ",d=" << d << "): " << fmt("%.3f", sq / sq_target) << "/"
               << fmt("%.3f", mean_ratio / mean_target) << " ";
        }
    }
    return {ok, "ratio/target (mean square/mean^2) " + os.str()};
}

Outcome criterion4() {
    Rng rng = make_rng(4, 0);
    double def = 0.0, tr = 0.0, mv = 0.0, rep = 0.0;
    for (int l = 1; l <= 5; ++l) {
        const int d = 8;
        const Vec z = random_unit(d, rng);
        const DenseSymTensor h = harmonic_tensor_dense(z, l);
        for (int s = 0; s < 5; ++s) {
            const Vec w = random_unit(d, rng);
            def = std::max(def, std::abs(contract_power(h, w) - gegenbauer_eval(d, l, w.dot(z))));
        }
        if (l >= 2)
            for (int a = 0; a < l; ++a)
                for (int b = a + 1; b < l; ++b)
                    for (double e : trace_pair(h, a, b).entries) tr = std::max(tr, std::abs(e));
    }
    for (int d : {4, 8, 12})
        for (int l = 2; l <= 5; ++l) {
            const Vec z = random_unit(d, rng);
            const DenseSymTensor h = harmonic_tensor_dense(z, l);
            for (int a = 1; a < l; ++a) {
                const Vec v = random_unit(static_cast<int>(ipow(d, l - a)), rng);
                const Vec dense = dense_unfolded_matvec(h, a, v);
                const Vec implicit = HarmonicMatvec(z, l, a, l - a).apply(v);
                mv = std::max(mv, (dense - implicit).cwiseAbs().maxCoeff() / std::max(1.0, dense.cwiseAbs().maxCoeff()));
            }
        }
    // The MC error floor is about sqrt(n_{d,l} / n), 0.046 at l = 3, so only
    // l <= 2 is gated; l = 3 is reported.
    for (int l = 1; l <= 2; ++l) rep = std::max(rep, reproducing_check(10, l, l, 100000, 40 + l).relative);
    const ReproducingResult r3 = reproducing_check(10, 3, 3, 100000, 43);
    const bool ok = def <= kTensorTol && tr <= kTensorTol && mv <= kMatvecTol && rep <= kReproducingTol;
    return {ok, "defining " + fmt("%.1e", def) + ", trace " + fmt("%.1e", tr) + ", matvec " + fmt("%.1e", mv) +
                    ", reproducing rel " + fmt("%.3f", rep) + " (d=10, l<=2, n=1e5; l=3: " + fmt("%.3f", r3.relative) +
                    ", floor " + fmt("%.3f", r3.standard_error / r3.predicted_norm) + ")"};
}

ExperimentConfig base_config(const json& link, const std::string& algo, int ell, const std::string& transform,
                             double threshold, int seeds) {
    json j;
    j["link"] = link;
    j["estimator"] = {{"algorithm", algo}, {"ell", ell}, {"k_star", ell}};
    j["transformation"] = {{"kind", transform}, {"n_cal", kSlopeCalibration}};
    j["d_grid"] = {10};
    j["success_threshold"] = threshold;
    j["seeds"] = seeds;
    j["coarse_seeds"] = std::min(40, std::max(6, seeds / 5));
    j["timing"] = false;
    j["master_seed"] = 2024;
    return ExperimentConfig::from_json(j);
}

struct Scaling {
    SlopeFit fit;
    std::string points;
    bool ok = true;
};

Scaling scaling_over(const ExperimentConfig& cfg, const std::vector<int>& dims) {
    Scaling s;
    TransformCache cache;
    std::vector<std::pair<double, double>> pts;
    std::ostringstream os;
    for (int d : dims) {
        try {
            const CriticalResult r = critical_m(cfg, d, cache);
            pts.emplace_back(d, r.m_c_interp);
            os << d << ":" << fmt("%.0f", r.m_c_interp) << " ";
        } catch (const RangeExhausted&) {
            s.ok = false;
            os << d << ":exhausted ";
        }
    }
    s.points = os.str();
    if (pts.size() >= 3) {
        s.fit = scaling_exponent(pts);
    } else {
        s.ok = false;
    }
    return s;
}

const json kHe2 = {{"variant", "GaussianHermite"}, {"k", 2}, {"sigma", 0.5}};
const json kHe3 = {{"variant", "GaussianHermite"}, {"k", 3}, {"sigma", 0.5}};
const json kHe3Stripped = {{"variant", "NormalizedWrapper"}, {"inner", kHe3}};
const std::vector<int> kSgdDims = {24, 28, 32, 36, 40, 44, 48};

Outcome criterion5() {
    ExperimentConfig cfg = base_config(kHe2, "spectral2", 2, "xi", 0.25, 20);
    cfg.transform.kappa = kSpectralKappa;
    cfg.transform.n_cal = calibration::kCalibrationSamples;
    TransformCache cache;
    bool ok = true;
    std::ostringstream os;
    os << "success at m=" << kSpectralPilotC << "d: ";
    for (int d : {50, 100, 200}) {
        const std::size_t m = static_cast<std::size_t>(kSpectralPilotC * d);
        int good = 0;
        for (int t = 0; t < cfg.seeds; ++t) good += run_trial(cfg, d, m, t, cache).success ? 1 : 0;
        const double rate = static_cast<double>(good) / cfg.seeds;
        ok = ok && rate >= kSpectralSuccess;
        os << d << ":" << fmt("%.2f", rate) << " ";
    }
    ExperimentConfig sc = cfg;
    sc.seeds = 30;
    sc.coarse_seeds = 6;
    sc.m_range = MRange{0.2, 3.0, 1.0, 1.25};
    const Scaling s = scaling_over(sc, {300, 600, 1200});
    ok = ok && s.ok && s.fit.slope >= kLinearLo && s.fit.slope <= kLinearHi;
    os << "; m_c " << s.points << "slope " << fmt("%.3f", s.fit.slope) << " +- " << fmt("%.3f", s.fit.std_error);
    return {ok, os.str()};
}

std::optional<Scaling> hesgd_cache;

const Scaling& hesgd_scaling() {
    if (!hesgd_cache) {
        ExperimentConfig cfg = base_config(kHe3, "hesgd", 3, "label", 0.25, kSlopeSeeds);
        cfg.m_range = MRange{0.25, 128.0, 2.0, 1.25};
        hesgd_cache = scaling_over(cfg, kSgdDims);
    }
    return *hesgd_cache;
}

Outcome criterion6() {
    ExperimentConfig sgd = base_config(kHe3Stripped, "sgd", 3, "csq", 0.25, kSlopeSeeds);
    sgd.m_range = MRange{0.25, 128.0, 2.0, 1.25};
    const Scaling s = scaling_over(sgd, kSgdDims);
    // Unfolding crosses 1/4 below m = d, where chance overlaps dominate; it is
    // scored at overlap 1/2.
    ExperimentConfig tu = base_config(kHe3Stripped, "unfold", 3, "csq", 0.5, kSlopeSeeds);
    tu.m_range = MRange{0.1, 64.0, 1.5, 1.25};
    const Scaling u = scaling_over(tu, {16, 24, 32, 40, 48});
    const Scaling& h = hesgd_scaling();
    const double z = std::abs(h.fit.slope - s.fit.slope) / std::hypot(h.fit.std_error, s.fit.std_error);
    const bool ok = s.ok && u.ok && h.ok && s.fit.slope >= kSgdLo && s.fit.slope <= kSgdHi &&
                    u.fit.slope >= kUnfoldLo && u.fit.slope <= kUnfoldHi && z <= kIndistinguishableZ;
    std::ostringstream os;
    os << "sgd slope " << fmt("%.3f", s.fit.slope) << " +- " << fmt("%.3f", s.fit.std_error) << " [" << s.points
       << "]; unfold slope " << fmt("%.3f", u.fit.slope) << " +- " << fmt("%.3f", u.fit.std_error) << " ["
       << u.points << "]; hesgd slope " << fmt("%.3f", h.fit.slope) << " +- " << fmt("%.3f", h.fit.std_error)
       << ", z = " << fmt("%.2f", z);
    return {ok, os.str()};
}

Outcome criterion7() {
    ExperimentConfig cfg = base_config(kHe3, "prtr", 3, "label", 0.25, kSlopeSeeds);
    cfg.m_range = MRange{0.01, 64.0, 1.5, 1.25};
    const Scaling p = scaling_over(cfg, kSgdDims);
    const Scaling& h = hesgd_scaling();
    const bool ok = p.ok && h.ok && p.fit.slope <= h.fit.slope - kPrtrGap;
    return {ok, "prtr slope " + fmt("%.3f", p.fit.slope) + " +- " + fmt("%.3f", p.fit.std_error) + " [" + p.points +
                    "] vs hesgd " + fmt("%.3f", h.fit.slope) + " [" + h.points + "]"};
}

Outcome criterion8() {
    bool ok = true;
    std::ostringstream os;
    const int d = 100;
    for (int k = 3; k <= 6; ++k) {
        const LinkSpec full = LinkSpec::hermite_binary(k);
        const ComplexityProfile pf = xi_profile(full, d, k + 2, 20000, 80 + k);
        const ComplexityProfile ps = xi_profile(LinkSpec::normalized(full), d, k + 2, 20000, 90 + k);
        const int lt = q_star(pf).degree, lm = m_star(ps).degree;
        const int want = k % 2 == 1 ? 1 : 2;
        ok = ok && lt == want && lm == k;
        os << "k=" << k << ": l_T*=" << lt << " l_m*(no norm)=" << lm << "; ";
    }
    // n_{d,10} ~ d^10 / 10! only loses to d^8 / 24 once d > 390.
    const ComplexityProfile mix = mixture_synthetic_profile(10, kMixtureDim);
    const int mm = m_star(mix).degree, mt = q_star(mix).degree;
    ok = ok && mm == 10 && mt == 4;
    os << "mixture k=10, d=" << kMixtureDim << ": l_m*=" << mm << " l_T*=" << mt;
    return {ok, os.str()};
}

Outcome criterion9() {
    const int d = 30, l = 3;
    const LinkSpec link = LinkSpec::from_json(kHe3Stripped);
    const Transformation T = csq_transformation(link, d, l, calibration::kCalibrationSamples, 909);
    const DriftThreshold th = sgd_drift_threshold(d, l);
    bool ok = true;
    std::ostringstream os;
    os << "threshold " << fmt("%.4f", th.value) << (th.sign_flipped ? " (s* radicand negative, |.| used)" : "")
       << "; drift(m): ";
    for (double m : {th.value, 0.16, 1.0 / std::sqrt(d + 2.0), 0.2, 0.3, 0.4, 0.5}) {
        const Estimate e = sgd_drift(link, T, d, l, m, 0.0, kDriftSamples, 1000 + static_cast<std::uint64_t>(m * 1e4));
        ok = ok && e.value > 0.0;
        os << fmt("%.4f", m) << ":" << fmt("%+.2e", e.value) << "(" << fmt("%.1e", e.std_error) << ") ";
    }
    return {ok, os.str()};
}

Outcome criterion10() {
    const int d = 50, l = 3;
    const LinkSpec link = LinkSpec::from_json(kHe3);
    const Transformation T = build_transformation(link, d, l, kDefaultKappa, calibration::kCalibrationSamples, 1010);
    int good = 0, signed_good = 0;
    double mean = 0.0;
    for (int s = 0; s < kBoostSeeds; ++s) {
        Rng rng = make_rng(500 + s, 0);
        const Vec w = random_unit(d, rng);
        Vec u = random_unit(d, rng);
        u -= u.dot(w) * w;
        u.normalize();
        const Vec v = kBoostAlpha * w + std::sqrt(1.0 - kBoostAlpha * kBoostAlpha) * u;
        const Dataset chunk = sample_planted(link, w, kBoostChunk, 600 + s);
        const double a = boost_step(v, chunk, T, l).dot(w);
        mean += a / kBoostSeeds;
        good += std::abs(a) >= 2.0 * kBoostAlpha ? 1 : 0;
        signed_good += a >= 2.0 * kBoostAlpha ? 1 : 0;
    }
    return {good >= kBoostRequired, "|alpha_next| >= 2 alpha in " + std::to_string(good) + "/20 (signed " +
                                        std::to_string(signed_good) + "/20, mean alpha_next " + fmt("%+.3f", mean) +
                                        ", chunk " + std::to_string(kBoostChunk) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<double, std::function<Outcome()>>> criteria = {
        {1, {10, criterion1}},    {2, {10, criterion2}},   {3, {5, criterion3}},  {4, {120, criterion4}},
        {5, {600, criterion5}},   {6, {3600, criterion6}}, {7, {3600, criterion7}}, {8, {300, criterion8}},
        {9, {120, criterion9}},   {10, {300, criterion10}}};
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
    int failures = 0;
    double budget67 = 0.0;
    for (const auto& [id, entry] : criteria) {
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = entry.second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        // Criteria 6 and 7 share one 60 minute budget.
        bool in_time = secs <= entry.first;
        if (id == 6 || id == 7) {
            budget67 += secs;
            in_time = budget67 <= 3600;
        }
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("criterion %2d: %s  %s  [%.1f s%s]\n", id, pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                    in_time ? "" : ", over time budget");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
