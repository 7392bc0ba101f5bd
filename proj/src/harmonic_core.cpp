#include "simlab/harmonic_core.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace simlab {

namespace {

void check_d(int d) {
    if (d < 3) throw DomainError("dimension d must be >= 3");
}

BigInt binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    BigInt r = 1;
    for (int i = 1; i <= k; ++i) {
        r *= (n - k + i);
        r /= i;
    }
    return r;
}

BigInt factorial(int n) {
    BigInt r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

double to_double(const Rational& q) { return static_cast<double>(q); }

}  // namespace

BigInt harmonic_dim_exact(int d, int l) {
    check_d(d);
    if (l < 0) throw DomainError("degree must be >= 0");
    if (l == 0) return 1;
    // (2l+d-2)/(d-2) * C(d+l-3, l) is always an integer.
    BigInt num = BigInt(2 * l + d - 2) * binomial(d + l - 3, l);
    return num / (d - 2);
}

std::uint64_t harmonic_dim(int d, int l) {
    BigInt n = harmonic_dim_exact(d, l);
    if (n > BigInt(std::numeric_limits<std::uint64_t>::max()))
        throw std::overflow_error("harmonic_dim: n_{d,l} exceeds 64-bit range");
    return static_cast<std::uint64_t>(n);
}

double harmonic_dim_f(int d, int l) { return static_cast<double>(harmonic_dim_exact(d, l)); }

double clamp_unit(double t) {
    if (t > 1.0) {
        if (t > 1.0 + 1e-12) throw DomainError("argument outside [-1,1]");
        return 1.0;
    }
    if (t < -1.0) {
        if (t < -1.0 - 1e-12) throw DomainError("argument outside [-1,1]");
        return -1.0;
    }
    return t;
}

double gegenbauer_p(int d, int l, double t) {
    check_d(d);
    t = clamp_unit(t);
    if (l == 0) return 1.0;
    double p0 = 1.0, p1 = t;
    for (int n = 1; n < l; ++n) {
        double p2 = ((2.0 * n + d - 2.0) * t * p1 - n * p0) / (n + d - 2.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

double gegenbauer_eval(int d, int l, double t) {
    return std::sqrt(harmonic_dim_f(d, l)) * gegenbauer_p(d, l, t);
}

double gegenbauer_derivative_const(int d, int l) {
    check_d(d);
    if (l == 0) return 0.0;
    double nl = harmonic_dim_f(d, l);
    double nm = harmonic_dim_f(d + 2, l - 1);
    return l * (l + d - 2.0) * std::sqrt(nl) / ((d - 1.0) * std::sqrt(nm));
}

double gegenbauer_derivative(int d, int l, double t) {
    if (l == 0) return 0.0;
    return gegenbauer_derivative_const(d, l) * gegenbauer_eval(d + 2, l - 1, t);
}

GegenbauerBasis::GegenbauerBasis(int d, int lmax) : d_(d), lmax_(lmax) {
    check_d(d);
    if (lmax < 0) throw DomainError("lmax must be >= 0");
    sqrt_n_.resize(lmax + 1);
    deriv_c_.resize(lmax + 1);
    for (int l = 0; l <= lmax; ++l) {
        sqrt_n_[l] = std::sqrt(harmonic_dim_f(d, l));
        deriv_c_[l] = gegenbauer_derivative_const(d, l);
    }
}

void GegenbauerBasis::eval_all(double t, double* out) const {
    t = clamp_unit(t);
    double p0 = 1.0, p1 = t;
    out[0] = 1.0;
    if (lmax_ >= 1) out[1] = sqrt_n_[1] * t;
    for (int n = 1; n < lmax_; ++n) {
        double p2 = ((2.0 * n + d_ - 2.0) * t * p1 - n * p0) / (n + d_ - 2.0);
        p0 = p1;
        p1 = p2;
        out[n + 1] = sqrt_n_[n + 1] * p2;
    }
}

std::vector<double> GegenbauerBasis::eval_all(double t) const {
    std::vector<double> out(lmax_ + 1);
    eval_all(t, out.data());
    return out;
}

double GegenbauerBasis::eval(int l, double t) const {
    return sqrt_n_.at(l) * gegenbauer_p(d_, l, t);
}

double GegenbauerBasis::derivative(int l, double t) const {
    if (l == 0) return 0.0;
    return deriv_c_.at(l) * gegenbauer_eval(d_ + 2, l - 1, t);
}

double hermite_eval(int k, double x) {
    if (k < 0) throw DomainError("Hermite degree must be >= 0");
    if (k == 0) return 1.0;
    double h0 = 1.0, h1 = x;
    for (int n = 1; n < k; ++n) {
        double h2 = (x * h1 - std::sqrt(double(n)) * h0) / std::sqrt(double(n + 1));
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

void hermite_eval_all(int kmax, double x, double* out) {
    out[0] = 1.0;
    if (kmax >= 1) out[1] = x;
    for (int n = 1; n < kmax; ++n)
        out[n + 1] = (x * out[n] - std::sqrt(double(n)) * out[n - 1]) / std::sqrt(double(n + 1));
}

int default_quadrature_points(int lmax) { return std::max(64, 2 * lmax + 8); }

namespace {

// Golub-Welsch for a probability measure given its Jacobi matrix.
Quadrature golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& off) {
    const int n = static_cast<int>(diag.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        q.nodes[i] = es.eigenvalues()(i);
        double v = es.eigenvectors()(0, i);
        q.weights[i] = v * v;
        s += q.weights[i];
    }
    for (double& w : q.weights) w /= s;
    return q;
}

template <class Builder>
const Quadrature& cached(std::map<std::pair<int, int>, std::unique_ptr<Quadrature>>& cache,
                         std::mutex& mu, int d, int n, Builder build) {
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(d, n);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;
    auto q = std::make_unique<Quadrature>(build());
    const Quadrature& ref = *q;
    cache.emplace(key, std::move(q));
    return ref;
}

}  // namespace

const Quadrature& tau_d1_quadrature(int d, int npoints) {
    if (d < 3) throw DomainError("tau_{d,1} quadrature requires d >= 3");
    if (npoints < 1) throw DomainError("npoints must be >= 1");
    static std::map<std::pair<int, int>, std::unique_ptr<Quadrature>> cache;
    static std::mutex mu;
    return cached(cache, mu, d, npoints, [&] {
        // Symmetric Gegenbauer weight with lambda = (d-2)/2.
        const double lam = (d - 2) / 2.0;
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(npoints);
        Eigen::VectorXd off(std::max(npoints - 1, 0));
        for (int n = 1; n < npoints; ++n) {
            double b = n * (n + 2.0 * lam - 1.0) / (4.0 * (n + lam) * (n + lam - 1.0));
            off(n - 1) = std::sqrt(b);
        }
        return golub_welsch(diag, off);
    });
}

const Quadrature& chi_quadrature(int d, int npoints) {
    if (d < 1) throw DomainError("chi quadrature requires d >= 1");
    static std::map<std::pair<int, int>, std::unique_ptr<Quadrature>> cache;
    static std::mutex mu;
    return cached(cache, mu, d, npoints, [&] {
        // r^2/2 ~ Gamma(d/2): generalized Laguerre weight u^a e^{-u}, a = d/2 - 1.
        const double a = d / 2.0 - 1.0;
        Eigen::VectorXd diag(npoints);
        Eigen::VectorXd off(std::max(npoints - 1, 0));
        for (int n = 0; n < npoints; ++n) diag(n) = 2.0 * n + a + 1.0;
        for (int n = 1; n < npoints; ++n) off(n - 1) = std::sqrt(n * (n + a));
        Quadrature q = golub_welsch(diag, off);
        for (double& u : q.nodes) u = std::sqrt(2.0 * u);
        return q;
    });
}

BetaCoefficient::BetaCoefficient(int k, int l, int d) : k_(k), l_(l), d_(d) {
    check_d(d);
    if (k < 0 || l < 0) throw DomainError("degrees must be >= 0");
    if (l > k || (k - l) % 2 != 0) {
        zero_ = true;
        return;
    }
    const int N = (k - l) / 2;
    // prefactor sqrt(k! n_{d,l}) / (N! 2^N) is kept outside the rational part
    // except for the 1/(N! 2^N) which is exact.
    Rational outer(1, factorial(N) * (BigInt(1) << N));
    BigInt denom = 1;
    for (int j = 0; j < l; ++j) denom *= (d + 2 * j);
    rational_.resize(N + 1);
    for (int i = 0; i <= N; ++i) {
        if (i > 0) denom *= (d + 2 * (l + i - 1));
        Rational term(binomial(N, i), denom);
        if ((N - i) % 2 != 0) term = -term;
        rational_[i] = outer * term;
    }
    using boost::multiprecision::cpp_bin_float_50;
    cpp_bin_float_50 pre = sqrt(cpp_bin_float_50(factorial(k) * harmonic_dim_exact(d, l)));
    prefactor_ = static_cast<double>(pre);
    coeffs_.resize(N + 1);
    coeffs_ld_.resize(N + 1);
    for (int i = 0; i <= N; ++i) {
        cpp_bin_float_50 c = pre * cpp_bin_float_50(rational_[i]);
        coeffs_[i] = static_cast<double>(c);
        coeffs_ld_[i] = static_cast<long double>(c);
    }
}

double BetaCoefficient::operator()(double r) const {
    if (zero_) return 0.0;
    long double rr = static_cast<long double>(r) * r;
    long double acc = 0.0L;
    for (int i = static_cast<int>(coeffs_ld_.size()) - 1; i >= 0; --i) acc = acc * rr + coeffs_ld_[i];
    long double rl = 1.0L;
    for (int j = 0; j < l_; ++j) rl *= r;
    return static_cast<double>(acc * rl);
}

double BetaCoefficient::eval_hp(double r) const {
    if (zero_) return 0.0;
    using boost::multiprecision::cpp_bin_float_50;
    cpp_bin_float_50 R(r), rr = R * R, acc = 0;
    for (int i = static_cast<int>(rational_.size()) - 1; i >= 0; --i)
        acc = acc * rr + cpp_bin_float_50(rational_[i]);
    acc *= pow(R, l_);
    acc *= sqrt(cpp_bin_float_50(factorial(k_) * harmonic_dim_exact(d_, l_)));
    return static_cast<double>(acc);
}

BetaCoefficient hermite_to_gegenbauer(int k, int l, int d) { return BetaCoefficient(k, l, d); }

ChiMoments::ChiMoments(int d, int max_order) : d_(d) {
    if (d < 1) throw DomainError("chi moments require d >= 1");
    if (max_order < 0) throw DomainError("moment order must be >= 0");
    exact_.resize(max_order + 1);
    // even: prod_{j<p} (d+2j); odd 2p+1: gamma_ratio * prod_{j<p} (d+2j+1)
    for (int m = 0; m <= max_order; ++m) {
        int p = m / 2;
        BigInt prod = 1;
        for (int j = 0; j < p; ++j) prod *= (m % 2 == 0) ? (d + 2 * j) : (d + 2 * j + 1);
        exact_[m] = Rational(prod);
    }
    gamma_ratio_ = std::sqrt(2.0) * std::exp(std::lgamma((d + 1) / 2.0) - std::lgamma(d / 2.0));
}

const Rational& ChiMoments::rational(int m) const { return exact_.at(m); }

double ChiMoments::operator()(int m) const {
    double v = to_double(exact_.at(m));
    return (m % 2 == 0) ? v : v * gamma_ratio_;
}

double chi_moment(int d, int m) { return ChiMoments(d, m)(m); }

BetaMoment beta_moment(int k, int l, int d, MomentOrder order) {
    BetaCoefficient b(k, l, d);
    BetaMoment out;
    if (b.is_zero()) {
        out.parity_mismatch = true;
        return out;
    }
    const auto& q = b.rational_part();
    const int N = static_cast<int>(q.size()) - 1;
    const double pre2 = static_cast<double>(factorial(k) * harmonic_dim_exact(d, l));
    if (order == MomentOrder::mean_square) {
        ChiMoments mom(d, 2 * (l + 2 * N));
        Rational s = 0;
        for (int i = 0; i <= N; ++i)
            for (int j = 0; j <= N; ++j) s += q[i] * q[j] * mom.rational(2 * l + 2 * i + 2 * j);
        out.value = pre2 * to_double(s);
    } else {
        ChiMoments mom(d, l + 2 * N);
        Rational s = 0;
        for (int i = 0; i <= N; ++i) s += q[i] * mom.rational(l + 2 * i);
        double v = std::sqrt(pre2) * to_double(s);
        if (l % 2 == 1) v *= mom.gamma_ratio();
        out.value = v;
    }
    return out;
}

}  // namespace simlab
