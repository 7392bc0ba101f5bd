#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "simlab/sim_model.hpp"

namespace simlab {

// Squared norms ||xi_{d,l}||^2 for l = 1..lmax; xi[l-1] holds degree l.
struct ComplexityProfile {
    int d = 0;
    std::vector<Estimate> xi;

    int lmax() const { return static_cast<int>(xi.size()); }
    const Estimate& at(int l) const { return xi.at(l - 1); }
    void validate() const;
    ComplexityProfile scaled(double c) const;
    json to_json() const;
    static ComplexityProfile from_json(const json& j);
};

ComplexityProfile xi_profile(const LinkSpec& link, int d, int lmax, std::size_t n_mc, std::uint64_t seed);

struct OptimalDegree {
    double value = 0.0;
    int degree = 0;
    bool infinite = false;
    // false when the runner-up objective is within two combined standard errors
    bool stable = true;
    int runner_up = 0;
    json to_json() const;
};

// inf_l sqrt(n_{d,l}) / ||xi_l||^2, ties to the smallest l
OptimalDegree m_star(const ComplexityProfile& p);
// inf_l n_{d,l} / ||xi_l||^2
OptimalDegree q_star(const ComplexityProfile& p);

struct RateEntry {
    int l = 0;
    double exponent = 0.0;
    bool upper_bound_only = false;
};

struct GaussianRatePrediction {
    int k_star = 0;
    bool with_norm = true;
    std::vector<RateEntry> entries;  // l = 1..lmax
    const RateEntry& at(int l) const { return entries.at(l - 1); }
    json to_json() const;
};

// Predicted exponent e with ||xi_l||^2 ~ d^e. lmax = 0 selects k* + 2.
GaussianRatePrediction gaussian_rates(int k_star, bool with_norm, int lmax = 0);

struct BoundValue {
    double value = 0.0;
    bool infinite = false;
};

// sum_{s=1}^D (m D^{p/2-1} e (p+1) / M*)^s
BoundValue ldp_bound(double m, int D, int p, double m_star_value);
// sum_{s=1}^{floor(D/l)} (m e D^{l/2-1} ||xi_l||^2 / sqrt(n_{d,l}))^s
BoundValue ldp_bound_restricted(double m, int D, int l, double xi_sq, int d);

// m_l(lambda) = n_{d,l}^{-1/2} E[Q_l((1 + lambda Z) / sqrt(1 + 2 lambda Z + lambda^2))], Z ~ tau_{d,1}.
// n_mc = 0 uses quadrature, otherwise Monte Carlo with n_mc draws.
double smoothing_weight(int l, double lambda, int d, std::size_t n_mc = 0, std::uint64_t seed = 0);

// Rate-level profile of mixture_link(k, d): unit constants on the
// norm-stripped rates of both components, weight d^{-k/5} on the degree-2k/5 part.
ComplexityProfile mixture_synthetic_profile(int k, int d, int lmax = 0);
// Same mixture with the exact radial means E[beta_{k_j,l}] in place of the rates.
ComplexityProfile mixture_moment_profile(int k, int d, int lmax = 0);

}  // namespace simlab
