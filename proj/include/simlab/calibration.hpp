#pragma once

#include <cstddef>

// Default constants fixed by pilot runs. Every value can be overridden in the
// estimator or experiment configuration.

namespace simlab::calibration {

// online SGD: eta = c * beta * d^{-l/2}
inline constexpr double kSgdStepConstant = 0.3;
// online SGD: number of (+u, -u) initialization pairs
inline constexpr int kSgdRestartPairs = 4;
// fraction of an SGD budget kept aside to rank restarts
inline constexpr double kSgdHoldoutFraction = 0.1;
// Hermite SGD: eta = c * d^{-k/2}
inline constexpr double kHeSgdStepConstant = 0.3;

// power iteration
inline constexpr int kPowerIterations = 300;
inline constexpr double kPowerTolerance = 1e-9;

// partial trace, odd k: share of the budget used by the degree-1 spectral step
inline constexpr double kPartialTraceSpectralFraction = 0.5;

// transformation calibration sample size
inline constexpr std::size_t kCalibrationSamples = 60000;

// boost early exit: stop once the held-out proxy exceeds beta * P_l(kBoostExitOverlap)
inline constexpr double kBoostExitOverlap = 0.5;

}  // namespace simlab::calibration
