#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "simlab/estimators.hpp"
#include "simlab/sim_model.hpp"

namespace simlab {

struct TransformSpec {
    std::string kind = "xi";  // xi | csq | label
    double kappa = kDefaultKappa;
    std::size_t n_cal = calibration::kCalibrationSamples;
};

// m = round(coeff * d^exponent) for coeff in [lo, hi], geometric with ratio.
struct MRange {
    double lo = 0.0, hi = 0.0;
    double exponent = 0.0;
    double ratio = 1.25;
};

struct ExperimentConfig {
    LinkSpec link;
    EstimatorConfig estimator;
    TransformSpec transform;
    std::vector<int> d_grid;
    std::vector<double> m_grid;  // multiplied by d^m_exponent
    double m_exponent = 0.0;
    std::optional<MRange> m_range;
    int seeds = 10;
    int coarse_seeds = 6;
    double success_threshold = 0.25;
    std::uint64_t master_seed = 1;
    bool timing = true;  // false writes wallclock_s = 0 for byte-stable output
    bool interpolate = true;  // scaling fits use the log-interpolated crossing

    static ExperimentConfig from_json(const json& j);
    json to_json() const;
    std::vector<std::size_t> m_values(int d) const;
    std::vector<std::size_t> search_grid(int d) const;
};

struct TrialRow {
    int d = 0;
    std::size_t m = 0;
    std::string algo;
    int trial = 0;
    std::uint64_t seed = 0;
    double overlap = std::numeric_limits<double>::quiet_NaN();
    bool success = false;
    double wallclock_s = 0.0;
    std::size_t samples = 0;
    std::string error;
};

std::uint64_t trial_seed(std::uint64_t master, int d, std::size_t m, int trial);

// Transformations calibrated once per (d, kind, degree) and shared by trials.
class TransformCache {
public:
    const Transformation& get(const ExperimentConfig& cfg, int d, const std::string& kind, int degree);

private:
    std::mutex mu_;
    std::map<std::tuple<int, std::string, int>, std::shared_ptr<Transformation>> cache_;
};

TrialRow run_trial(const ExperimentConfig& cfg, int d, std::size_t m, int trial, TransformCache& cache);

struct CurvePoint {
    std::size_t m = 0;
    int trials = 0;
    double rate = 0.0;
    double smoothed = 0.0;
};

struct CriticalResult {
    int d = 0;
    std::size_t m_c = 0;      // smallest grid point with smoothed rate >= 1/2
    double m_c_interp = 0.0;  // log-linear crossing between neighbouring grid points
    std::vector<CurvePoint> curve;
    std::vector<TrialRow> rows;
    json to_json() const;
};

struct RangeExhausted : std::runtime_error {
    std::vector<CurvePoint> curve;
    RangeExhausted(const std::string& what, std::vector<CurvePoint> c)
        : std::runtime_error(what), curve(std::move(c)) {}
};

// Pool-adjacent-violators fit, nondecreasing.
std::vector<double> isotonic_fit(const std::vector<double>& y, const std::vector<double>& w);

CriticalResult critical_m(const ExperimentConfig& cfg, int d, TransformCache& cache);

struct SlopeFit {
    double slope = 0.0;
    double std_error = 0.0;
    double intercept = 0.0;
};
SlopeFit scaling_exponent(const std::vector<std::pair<double, double>>& points);

struct SweepResult {
    std::vector<TrialRow> rows;
    std::map<std::pair<int, std::size_t>, double> success_rate;
    int failures = 0;
    json summary() const;
};

SweepResult sweep(const ExperimentConfig& cfg, TransformCache& cache);
void write_results_csv(const std::vector<TrialRow>& rows, bool timing, std::ostream& os);

}  // namespace simlab
