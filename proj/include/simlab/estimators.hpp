#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "simlab/calibration.hpp"
#include "simlab/harmonic_tensor.hpp"
#include "simlab/kernels.hpp"
#include "simlab/sim_model.hpp"

namespace simlab {

enum class Algorithm { spectral1, spectral2, sgd, unfold, unfold_balanced, hesgd, prtr, boost };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

// How the unfolding operator is applied: implicit per-sample products, or a
// dense assembly of the averaged tensor followed by dense products.
enum class UnfoldMode { automatic, implicit, dense };

struct EstimatorConfig {
    Algorithm algorithm = Algorithm::spectral1;
    int l = 1;
    std::uint64_t seed = 0;

    // online SGD and Hermite SGD
    double step_constant = calibration::kSgdStepConstant;
    std::optional<double> eta;  // overrides the default step size
    int restart_pairs = calibration::kSgdRestartPairs;
    double holdout_fraction = calibration::kSgdHoldoutFraction;
    std::optional<Vec> init;  // fixed start, disables restarts
    bool randomize_radius = false;  // Hermite SGD: x = r~ z with fresh r~ ~ chi_d
    double polish_fraction = 0.0;   // final SGD pass at eta = polish_constant / d
    double polish_constant = 0.5;
    // square: gradient of (T - Q_l)^2. correlation: drops the Q_l^2 term, whose
    // spherical gradient vanishes in expectation but dominates the noise at
    // large overlap.
    enum class Loss { correlation, square } loss = Loss::correlation;

    // power iteration
    int power_iterations = calibration::kPowerIterations;
    double power_tolerance = calibration::kPowerTolerance;

    // tensor unfolding
    int a = 0, b = 0;  // 0: balanced or a = 1 defaults
    UnfoldMode unfold_mode = UnfoldMode::automatic;

    // boosting
    int boost_stages = 0;  // 0: ceil(log d)
    bool boost_after_spectral = false;
    int boost_degree = 3;

    // Hermite baselines
    int k_star = 0;
    double spectral_fraction = calibration::kPartialTraceSpectralFraction;

    bool record_trace = false;
    int trace_stride = 0;  // 0: about 200 points per run
    Exec exec = Exec::parallel;

    json to_json() const;
    static EstimatorConfig from_json(const json& j);
};

struct EstimatorResult {
    Vec w_hat;
    std::optional<double> overlap;
    std::size_t samples_consumed = 0;
    double wallclock_s = 0.0;
    std::vector<double> trace;
    bool converged = true;
    int iterations = 0;
    std::string note;

    json to_json() const;
};

inline double overlap_of(const Vec& w, const Vec& w_star) { return std::min(1.0, std::abs(w.dot(w_star))); }

EstimatorResult spectral_l1(const Dataset& data, const Transformation& T);
EstimatorResult spectral_l2(const Dataset& data, const Transformation& T, const EstimatorConfig& cfg);

Vec boost_step(const Vec& v, const Dataset& chunk, const Transformation& T, int l, Exec exec = Exec::parallel);
// Chunk sizes proportional to 2^{-t}, t = 1..stages, summing to total.
std::vector<std::size_t> boost_schedule(std::size_t total, int stages);
EstimatorResult boost(const Vec& w0, const Dataset& data, const Transformation& T, int l, const EstimatorConfig& cfg);

EstimatorResult online_sgd(const Dataset& stream, const Transformation& T, int l, const EstimatorConfig& cfg);
EstimatorResult hermite_sgd(const Dataset& data, const Transformation& Tstar, int k_star, const EstimatorConfig& cfg);

EstimatorResult tensor_unfold_balanced(const Dataset& data, const Transformation& T, int l, const EstimatorConfig& cfg);
EstimatorResult tensor_unfold(const Dataset& data, const Transformation& T, int l, int a, int b,
                              const EstimatorConfig& cfg);

// boost_T: calibrated degree-k transformation used for the boosting stage
// (odd k >= 3); without it boosting runs without early exit.
EstimatorResult partial_trace(const Dataset& data, const Transformation& Tstar, int k_star,
                              const EstimatorConfig& cfg, const Transformation* boost_T = nullptr);

// sum_i w_i H_l(z_i) as a dense tensor, through moment tensors.
DenseSymTensor assemble_harmonic_sum(const SampleView& s, const double* w, int l, Exec exec = Exec::parallel);

// Top left singular vector of Mat_{a,b}(t) by power iteration on Mat Mat^T.
Vec unfolded_top_vector(const DenseSymTensor& t, int a, int iterations, double tolerance, const Vec* start = nullptr);

// One-step SGD drift E[<w_next, w*> - m] at <w, w*> = m, averaged over n fresh
// samples. eta <= 0 selects the default step size.
Estimate sgd_drift(const LinkSpec& link, const Transformation& T, int d, int l, double m, double eta, std::size_t n,
                   std::uint64_t seed, EstimatorConfig::Loss loss = EstimatorConfig::Loss::correlation);

// Drift threshold 2 sqrt(s*/d) with s* = sqrt(|(l-2)(l+d-3) / ((l-d/2-3)(l+d/2-2))|) cos(pi/l).
// sign_flipped reports a negative radicand before |.| is applied.
struct DriftThreshold {
    double value = 0.0;
    double s_star = 0.0;
    bool sign_flipped = false;
};
DriftThreshold sgd_drift_threshold(int d, int l);

// Dispatch on cfg.algorithm. For hesgd and prtr, T is the label transformation.
EstimatorResult run_estimator(const Dataset& data, const Transformation& T, const EstimatorConfig& cfg,
                              const Transformation* boost_T = nullptr);

}  // namespace simlab
