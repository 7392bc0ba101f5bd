#include <doctest.h>

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "simlab/harmonic_core.hpp"
#include "simlab/rng.hpp"

using namespace simlab;

namespace {

// Integral of f against tau_{d,1} by adaptive Gauss-Kronrod.
template <class F>
double tau_integral(int d, F f) {
    const double norm = boost::math::beta(0.5, (d - 1) / 2.0);
    auto g = [&](double t) { return f(t) * std::pow(1.0 - t * t, (d - 3) / 2.0) / norm; };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, -1.0, 1.0, 15, 1e-13);
}

}  // namespace

TEST_CASE("harmonic dimensions match closed forms") {
    for (int l = 0; l <= 12; ++l) CHECK(harmonic_dim(3, l) == static_cast<std::uint64_t>(2 * l + 1));
    for (int d : {3, 7, 50, 1000}) {
        CHECK(harmonic_dim(d, 0) == 1u);
        CHECK(harmonic_dim(d, 1) == static_cast<std::uint64_t>(d));
        CHECK(harmonic_dim(d, 2) == static_cast<std::uint64_t>(d * (d + 1) / 2 - 1));
    }
    CHECK_THROWS_AS(harmonic_dim(100000, 40), std::overflow_error);
    CHECK(harmonic_dim_exact(100000, 40) > BigInt(1) << 64);
}

TEST_CASE("d = 3 Gegenbauer polynomials are Legendre polynomials") {
    for (double t : {-1.0, -0.7, -0.1, 0.0, 0.3, 0.9, 1.0}) {
        CHECK(gegenbauer_p(3, 2, t) == doctest::Approx((3 * t * t - 1) / 2).epsilon(1e-13));
        CHECK(gegenbauer_p(3, 3, t) == doctest::Approx((5 * t * t * t - 3 * t) / 2).epsilon(1e-13));
        CHECK(gegenbauer_eval(3, 3, t) == doctest::Approx(std::sqrt(7.0) * (5 * t * t * t - 3 * t) / 2).epsilon(1e-13));
    }
}

TEST_CASE("explicit degree-3 Gegenbauer polynomial") {
    for (int d : {5, 30, 400})
        for (double t : {-0.8, 0.1, 0.55}) {
            const double p3 = ((d + 2) * t * t * t - 3 * t) / (d - 1);
            CHECK(gegenbauer_p(d, 3, t) == doctest::Approx(p3).epsilon(1e-12));
        }
}

TEST_CASE("orthonormality against adaptive quadrature") {
    for (int d : {4, 9, 40}) {
        for (int l = 0; l <= 6; ++l)
            for (int k = 0; k <= 6; ++k) {
                const double v = tau_integral(d, [&](double t) { return gegenbauer_eval(d, l, t) * gegenbauer_eval(d, k, t); });
                CHECK(v == doctest::Approx(l == k ? 1.0 : 0.0).epsilon(1e-9).scale(1.0));
            }
    }
}

TEST_CASE("built-in quadrature integrates polynomials exactly") {
    for (int d : {3, 10, 100}) {
        const Quadrature& q = tau_d1_quadrature(d, default_quadrature_points(10));
        double s2 = 0.0, s4 = 0.0;
        for (std::size_t i = 0; i < q.nodes.size(); ++i) {
            s2 += q.weights[i] * std::pow(q.nodes[i], 2);
            s4 += q.weights[i] * std::pow(q.nodes[i], 4);
        }
        CHECK(s2 == doctest::Approx(1.0 / d).epsilon(1e-12));
        CHECK(s4 == doctest::Approx(3.0 / (d * (d + 2.0))).epsilon(1e-12));
    }
}

TEST_CASE("derivative matches central differences") {
    for (int d : {3, 12, 80})
        for (int l = 1; l <= 7; ++l)
            for (double t : {-0.6, 0.2, 0.75}) {
                const double h = 1e-6;
                const double fd = (gegenbauer_eval(d, l, t + h) - gegenbauer_eval(d, l, t - h)) / (2 * h);
                CHECK(gegenbauer_derivative(d, l, t) == doctest::Approx(fd).epsilon(1e-6));
            }
}

TEST_CASE("basis object agrees with scalar evaluation") {
    GegenbauerBasis b(17, 9);
    const auto all = b.eval_all(0.37);
    for (int l = 0; l <= 9; ++l) {
        CHECK(all[l] == doctest::Approx(gegenbauer_eval(17, l, 0.37)).epsilon(1e-14));
        CHECK(b.derivative(l, 0.37) == doctest::Approx(gegenbauer_derivative(17, l, 0.37)).epsilon(1e-12));
    }
}

TEST_CASE("clamp_unit") {
    CHECK(clamp_unit(1.0 + 1e-13) == 1.0);
    CHECK(clamp_unit(-1.0 - 1e-13) == -1.0);
    CHECK_THROWS(clamp_unit(1.1));
}

TEST_CASE("orthonormal Hermite polynomials") {
    for (double x : {-2.5, 0.0, 0.4, 3.0}) {
        CHECK(hermite_eval(2, x) == doctest::Approx((x * x - 1) / std::sqrt(2.0)));
        CHECK(hermite_eval(3, x) == doctest::Approx((x * x * x - 3 * x) / std::sqrt(6.0)));
    }
    auto gauss = [](auto f) {
        auto g = [&](double x) { return f(x) * std::exp(-x * x / 2) / std::sqrt(2 * M_PI); };
        return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, -14.0, 14.0, 15, 1e-13);
    };
    for (int j = 0; j <= 8; ++j)
        for (int k = 0; k <= 8; ++k)
            CHECK(gauss([&](double x) { return hermite_eval(j, x) * hermite_eval(k, x); }) ==
                  doctest::Approx(j == k ? 1.0 : 0.0).epsilon(1e-9).scale(1.0));
}

TEST_CASE("chi moments") {
    for (int d : {1, 4, 33}) {
        CHECK(chi_moment(d, 2) == doctest::Approx(d));
        CHECK(chi_moment(d, 4) == doctest::Approx(d * (d + 2.0)));
        const double mean = std::sqrt(2.0) * std::exp(boost::math::lgamma((d + 1) / 2.0) - boost::math::lgamma(d / 2.0));
        CHECK(chi_moment(d, 1) == doctest::Approx(mean).epsilon(1e-13));
        CHECK(chi_moment(d, 3) == doctest::Approx(mean * (d + 1)).epsilon(1e-13));
    }
    const Quadrature& q = chi_quadrature(20, 40);
    double s = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i], 6);
    CHECK(s == doctest::Approx(20.0 * 22.0 * 24.0).epsilon(1e-10));
}

TEST_CASE("Hermite to Gegenbauer coefficients reproduce He_k") {
    Rng rng = make_rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0), ur(0.0, 8.0);
    for (int d : {3, 6, 50})
        for (int k = 0; k <= 7; ++k)
            for (int s = 0; s < 20; ++s) {
                const double r = ur(rng), t = u(rng);
                double sum = 0.0;
                for (int l = 0; l <= k; ++l) sum += hermite_to_gegenbauer(k, l, d)(r) * gegenbauer_eval(d, l, t);
                CHECK(sum == doctest::Approx(hermite_eval(k, r * t)).epsilon(1e-9).scale(1.0));
            }
}

TEST_CASE("beta coefficients vanish on parity mismatch and above k") {
    CHECK(BetaCoefficient(5, 2, 10).is_zero());
    CHECK(BetaCoefficient(3, 4, 10).is_zero());
    CHECK_FALSE(BetaCoefficient(5, 3, 10).is_zero());
    CHECK(beta_moment(5, 2, 10, MomentOrder::mean).parity_mismatch);
    // top coefficient: He_k(rz) has r^k Q_k / sqrt(k! n_{d,k}) * (leading ratio) only through r^k
    const BetaCoefficient top(4, 4, 9);
    CHECK(top.count() == 1);
}

TEST_CASE("beta coefficient double and high precision paths agree") {
    for (int k : {6, 9})
        for (int l = k % 2; l <= k; l += 2) {
            const BetaCoefficient b(k, l, 30);
            for (double r : {0.5, 5.0, 9.0}) CHECK(b(r) == doctest::Approx(b.eval_hp(r)).epsilon(1e-10).scale(1e-12));
        }
}

TEST_CASE("Parseval: mean-square beta moments sum to one") {
    for (int d : {3, 10, 200})
        for (int k = 1; k <= 8; ++k) {
            double s = 0.0;
            for (int l = 0; l <= k; ++l) s += beta_moment(k, l, d, MomentOrder::mean_square).value;
            CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
        }
}

TEST_CASE("mean beta moment matches Monte Carlo over chi_d") {
    Rng rng = make_rng(7);
    const int d = 12;
    const BetaCoefficient b(4, 2, d);
    double acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) acc += b(sample_chi(d, rng));
    CHECK(acc / n == doctest::Approx(beta_moment(4, 2, d, MomentOrder::mean).value).epsilon(0.02));
}

TEST_CASE("invalid arguments are rejected") {
    CHECK_THROWS(gegenbauer_eval(1, 2, 0.3));
    CHECK_THROWS(gegenbauer_eval(5, -1, 0.3));
    CHECK_THROWS(BetaCoefficient(-1, 0, 5));
}
