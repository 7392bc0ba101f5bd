#include <doctest.h>

#include <cmath>

#include <Eigen/QR>

#include "simlab/harmonic_core.hpp"
#include "simlab/harmonic_tensor.hpp"
#include "simlab/rng.hpp"

using namespace simlab;

namespace {

Eigen::MatrixXd random_rotation(int d, Rng& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    return qr.householderQ();
}

double max_abs_diff(const DenseSymTensor& a, const DenseSymTensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.entries[i] - b.entries[i]));
    return m;
}

}  // namespace

TEST_CASE("degree 1 and 2 tensors match closed forms") {
    Rng rng = make_rng(11);
    const int d = 6;
    const Vec z = random_unit(d, rng);
    const DenseSymTensor h1 = harmonic_tensor_dense(z, 1);
    for (int i = 0; i < d; ++i) CHECK(h1.entries[i] == doctest::Approx(std::sqrt(d) * z(i)));
    const DenseSymTensor h2 = harmonic_tensor_dense(z, 2);
    const double c = std::sqrt(harmonic_dim_f(d, 2)) / (d - 1);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            CHECK(h2.at({i, j}) == doctest::Approx(c * (d * z(i) * z(j) - (i == j ? 1.0 : 0.0))).epsilon(1e-12));
}

TEST_CASE("expansion coefficients reproduce Q_l as a polynomial") {
    for (int d : {3, 9, 40})
        for (int l = 0; l <= 7; ++l) {
            const auto c = c_coeff_table(l, d);
            for (double t : {-0.9, 0.2, 0.7}) {
                double s = 0.0;
                for (int j = 0; 2 * j <= l; ++j) s += c[j] * std::pow(t, l - 2 * j);
                CHECK(s == doctest::Approx(gegenbauer_eval(d, l, t)).epsilon(1e-10));
            }
        }
}

TEST_CASE("placement counts") {
    auto fact = [](int n) { double f = 1; for (int i = 2; i <= n; ++i) f *= i; return f; };
    for (int l = 0; l <= 6; ++l)
        for (int j = 0; 2 * j <= l; ++j) {
            const double want = fact(l) / (fact(l - 2 * j) * std::pow(2.0, j) * fact(j));
            CHECK(enumerate_placements(l, j).size() == static_cast<std::size_t>(want));
        }
}

TEST_CASE("harmonic tensors are symmetric, traceless and satisfy the defining relation") {
    Rng rng = make_rng(12);
    for (int d : {3, 5, 7})
        for (int l = 0; l <= 5; ++l) {
            const Vec z = random_unit(d, rng);
            const DenseSymTensor h = harmonic_tensor_dense(z, l);
            CHECK(max_symmetry_defect(h) < 1e-12);
            if (l >= 2) {
                double tr = 0.0;
                for (double e : trace_pair(h, 0, l - 1).entries) tr = std::max(tr, std::abs(e));
                CHECK(tr < 1e-10);
            }
            const Vec w = random_unit(d, rng);
            CHECK(contract_power(h, w) == doctest::Approx(gegenbauer_eval(d, l, w.dot(z))).epsilon(1e-10).scale(1.0));
        }
}

TEST_CASE("rotation equivariance: R . H(z) = H(R z)") {
    Rng rng = make_rng(13);
    for (int l = 1; l <= 4; ++l) {
        const int d = 5;
        const Vec z = random_unit(d, rng);
        const Eigen::MatrixXd R = random_rotation(d, rng);
        CHECK(max_abs_diff(rotate(harmonic_tensor_dense(z, l), R), harmonic_tensor_dense(R * z, l)) < 1e-11);
    }
}

TEST_CASE("inner products of harmonic tensors are proportional to Q_l") {
    Rng rng = make_rng(14);
    const int d = 6, l = 3;
    const Vec z = random_unit(d, rng);
    const DenseSymTensor hz = harmonic_tensor_dense(z, l);
    Eigen::Map<const Vec> a(hz.entries.data(), hz.size());
    double ratio = 0.0;
    for (int s = 0; s < 6; ++s) {
        const Vec w = random_unit(d, rng);
        const DenseSymTensor hw = harmonic_tensor_dense(w, l);
        const double r = a.dot(Eigen::Map<const Vec>(hw.entries.data(), hw.size())) / gegenbauer_eval(d, l, w.dot(z));
        if (s == 0) ratio = r;
        CHECK(r == doctest::Approx(ratio).epsilon(1e-9));
    }
}

TEST_CASE("zero-diagonal tensor keeps only distinct-index entries") {
    Rng rng = make_rng(15);
    const int d = 4, l = 3;
    const Vec z = random_unit(d, rng);
    const DenseSymTensor h = harmonic_tensor_dense(z, l), k = k_tensor_dense(z, l);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int q = 0; q < d; ++q) {
                const bool distinct = i != j && j != q && i != q;
                CHECK(k.at({i, j, q}) == doctest::Approx(distinct ? h.at({i, j, q}) : 0.0));
            }
}

TEST_CASE("unfolded index round trip") {
    const UnfoldedSpec s(5, 2, 3);
    CHECK(s.rows() == 25u);
    CHECK(s.cols() == 125u);
    for (std::size_t f : {0ul, 7ul, 1234ul, 3124ul}) CHECK(s.flat(s.multi(f)) == f);
}

TEST_CASE("implicit unfolded products match dense products for every split") {
    Rng rng = make_rng(16);
    for (int d : {3, 6})
        for (int l = 1; l <= 5; ++l)
            for (int a = 0; a <= l; ++a) {
                const Vec z = random_unit(d, rng);
                const DenseSymTensor h = harmonic_tensor_dense(z, l);
                Vec v = Vec::Random(static_cast<int>(ipow(d, l - a)));
                const Vec dense = dense_unfolded_matvec(h, a, v);
                const Vec implicit = HarmonicMatvec(z, l, a, l - a).apply(v);
                CHECK((dense - implicit).norm() <= 1e-10 * std::max(1.0, dense.norm()));
                Vec acc = Vec::Zero(dense.size());
                matvec_unfolded_accumulate(UnfoldingPlan(d, l, a, l - a), z.data(), v.data(), 2.0, acc.data());
                CHECK((acc - 2.0 * dense).norm() <= 1e-10 * std::max(1.0, dense.norm()));
            }
}

TEST_CASE("dense budget is enforced") {
    Rng rng = make_rng(17);
    const Vec z = random_unit(50, rng);
    CHECK_THROWS(harmonic_tensor_dense(z, 4, 1000));
}

TEST_CASE("reproducing property: mismatched degrees average to zero") {
    const ReproducingResult same = reproducing_check(6, 2, 2, 40000, 1);
    CHECK(same.relative < 0.05);
    const ReproducingResult cross = reproducing_check(6, 2, 3, 40000, 2);
    CHECK(cross.predicted_norm == 0.0);
    CHECK(cross.error < 4.0 * cross.standard_error);
}

TEST_CASE("vec_extract recovers the left factor of a rank-one tensor") {
    Rng rng = make_rng(18);
    const int d = 7;
    const Vec x = random_unit(d, rng), y = random_unit(d * d, rng);
    Vec u(d * d * d);
    for (int j = 0; j < d * d; ++j)
        for (int i = 0; i < d; ++i) u(i + d * j) = x(i) * y(j);
    CHECK(std::abs(vec_extract(u, d).dot(x)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(vec_extract(x, d).dot(x) == doctest::Approx(1.0));
}

TEST_CASE("Wick moments on the sphere") {
    const int d = 9;
    CHECK(wick_moment(d, {0, 0}) == doctest::Approx(1.0 / d));
    CHECK(wick_moment(d, {0, 1}) == 0.0);
    CHECK(wick_moment(d, {0, 0, 0}) == 0.0);
    CHECK(wick_moment(d, {0, 0, 0, 0}) == doctest::Approx(3.0 / (d * (d + 2.0))));
    CHECK(wick_moment(d, {0, 0, 1, 1}) == doctest::Approx(1.0 / (d * (d + 2.0))));
    // Monte Carlo check of a sixth moment
    Rng rng = make_rng(19);
    double acc = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        const Vec z = random_unit(d, rng);
        acc += std::pow(z(0), 4) * z(1) * z(1);
    }
    CHECK(acc / n == doctest::Approx(wick_moment(d, {0, 0, 0, 0, 1, 1})).epsilon(0.03));
}
