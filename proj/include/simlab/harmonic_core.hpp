#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace simlab {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// n_{d,l}: dimension of degree-l spherical harmonics on S^{d-1}.
BigInt harmonic_dim_exact(int d, int l);
// Checked 64-bit value; throws std::overflow_error when it does not fit.
std::uint64_t harmonic_dim(int d, int l);
double harmonic_dim_f(int d, int l);

// P_l^{(d)}(t) with P_l(1) = 1.
double gegenbauer_p(int d, int l, double t);
// Q_l^{(d)}(t) = sqrt(n_{d,l}) P_l^{(d)}(t), orthonormal under tau_{d,1}.
double gegenbauer_eval(int d, int l, double t);
// Q_l'(t) = C(d,l) Q_{l-1}^{(d+2)}(t).
double gegenbauer_derivative(int d, int l, double t);
double gegenbauer_derivative_const(int d, int l);

// Clamps t to [-1,1] when within 1e-12 of the boundary, throws otherwise.
double clamp_unit(double t);

class GegenbauerBasis {
public:
    GegenbauerBasis(int d, int lmax);
    int d() const { return d_; }
    int lmax() const { return lmax_; }
    // Fills out[0..lmax] with Q_l(t).
    void eval_all(double t, double* out) const;
    std::vector<double> eval_all(double t) const;
    double eval(int l, double t) const;
    double derivative(int l, double t) const;
    double sqrt_dim(int l) const { return sqrt_n_[l]; }

private:
    int d_;
    int lmax_;
    std::vector<double> sqrt_n_;
    std::vector<double> deriv_c_;
};

// Orthonormal probabilists' Hermite polynomial He_k(x).
double hermite_eval(int k, double x);
void hermite_eval_all(int kmax, double x, double* out);

// Quadrature for tau_{d,1}, the law of one coordinate of a uniform point on
// S^{d-1}: density proportional to (1-t^2)^{(d-3)/2}.
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};
int default_quadrature_points(int lmax);
const Quadrature& tau_d1_quadrature(int d, int npoints);
// Generalized Gauss-Laguerre rule for r ~ chi_d, returned as radii.
const Quadrature& chi_quadrature(int d, int npoints);

// beta_{k,l}(r) = sum_i coeff_i r^{l+2i}, the coefficient of Q_l(z) in He_k(r z).
class BetaCoefficient {
public:
    BetaCoefficient(int k, int l, int d);
    int k() const { return k_; }
    int l() const { return l_; }
    int d() const { return d_; }
    bool is_zero() const { return zero_; }
    int count() const { return zero_ ? 0 : static_cast<int>(rational_.size()); }
    // Full coefficient of r^{l+2i}: sqrt(k! n_{d,l}) * rational_[i].
    const std::vector<double>& monomial_coeffs() const { return coeffs_; }
    const std::vector<Rational>& rational_part() const { return rational_; }
    double prefactor() const { return prefactor_; }
    double operator()(double r) const;
    // Evaluation in 50-digit arithmetic.
    double eval_hp(double r) const;

private:
    int k_, l_, d_;
    bool zero_ = false;
    std::vector<Rational> rational_;
    std::vector<double> coeffs_;
    std::vector<long double> coeffs_ld_;
    double prefactor_ = 0.0;
};

BetaCoefficient hermite_to_gegenbauer(int k, int l, int d);

// Moments of r ~ chi_d.
class ChiMoments {
public:
    ChiMoments(int d, int max_order);
    int d() const { return d_; }
    // E[r^m] = rational(m) * (m odd ? gamma_ratio() : 1).
    const Rational& rational(int m) const;
    double gamma_ratio() const { return gamma_ratio_; }
    double operator()(int m) const;

private:
    int d_;
    std::vector<Rational> exact_;
    double gamma_ratio_;
};

double chi_moment(int d, int m);

enum class MomentOrder { mean, mean_square };

struct BetaMoment {
    double value = 0.0;
    bool parity_mismatch = false;
};

BetaMoment beta_moment(int k, int l, int d, MomentOrder order);

}  // namespace simlab
