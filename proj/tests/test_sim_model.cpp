#include <doctest.h>

#include <cmath>
#include <sstream>

#include "simlab/harmonic_core.hpp"
#include "simlab/sim_model.hpp"

using namespace simlab;

namespace {

Vec planted_direction(int d) {
    Rng rng = make_rng(99);
    return random_unit(d, rng);
}

}  // namespace

TEST_CASE("LinkSpec JSON round trip and validation") {
    const json j = {{"variant", "NormalizedWrapper"},
                    {"inner", {{"variant", "GaussianHermite"}, {"k", 3}, {"sigma", 0.5}}}};
    const LinkSpec a = LinkSpec::from_json(j);
    const LinkSpec b = LinkSpec::from_json(a.to_json());
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.generative_exponent() == b.generative_exponent());
    CHECK_THROWS_AS(LinkSpec::from_json({{"variant", "GaussianHermite"}, {"k", 3}, {"sigma", -1.0}}), ConfigError);
    CHECK_THROWS_AS(LinkSpec::from_json({{"variant", "Nope"}}), ConfigError);
    CHECK_THROWS(LinkSpec::mixture(1.5, LinkSpec::gaussian_hermite(2, 0.1), LinkSpec::gaussian_hermite(3, 0.1)));
}

TEST_CASE("declared exponents") {
    CHECK(LinkSpec::gaussian_hermite(4, 0.5).information_exponent() == 4);
    CHECK(LinkSpec::gaussian_hermite(4, 0.5).generative_exponent() == 2);
    CHECK(LinkSpec::gaussian_hermite(3, 0.5).generative_exponent() == 1);
    CHECK(LinkSpec::hermite_binary(5).generative_exponent() == 5);
    CHECK(LinkSpec::hermite_binary(5).discrete());
}

TEST_CASE("sampling is deterministic in the seed") {
    const LinkSpec link = LinkSpec::gaussian_hermite(2, 0.5);
    const Vec w = planted_direction(7);
    const Dataset a = sample_planted(link, w, 5000, 3), b = sample_planted(link, w, 5000, 3);
    const Dataset c = sample_planted(link, w, 5000, 4);
    CHECK(a.y == b.y);
    CHECK(a.z == b.z);
    CHECK(a.r == b.r);
    CHECK(a.y != c.y);
    // prefixes of longer streams coincide
    const Dataset longer = sample_planted(link, w, 9000, 3);
    CHECK(std::equal(a.y.begin(), a.y.end(), longer.y.begin()));
}

TEST_CASE("planted Gaussian samples have the right marginals and correlation") {
    const int d = 8;
    const LinkSpec link = LinkSpec::gaussian_hermite(2, 0.5);
    const Vec w = planted_direction(d);
    const Dataset ds = sample_planted(link, w, 200000, 5);
    double r2 = 0.0, corr = 0.0, norm_err = 0.0;
    for (std::size_t i = 0; i < ds.m(); ++i) {
        const Sample s = ds.sample(i);
        norm_err = std::max(norm_err, std::abs(s.z.norm() - 1.0));
        r2 += s.r * s.r;
        corr += s.y * hermite_eval(2, s.r * s.z.dot(w));
    }
    CHECK(norm_err < 1e-12);
    CHECK(r2 / ds.m() == doctest::Approx(d).epsilon(0.01));
    CHECK(corr / ds.m() == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("null samples carry no directional signal") {
    const int d = 6;
    const LinkSpec link = LinkSpec::gaussian_hermite(2, 0.5);
    const Dataset ds = sample_null(link, d, 100000, 6);
    CHECK_FALSE(ds.planted.has_value());
    const Vec w = planted_direction(d);
    double corr = 0.0;
    for (std::size_t i = 0; i < ds.m(); ++i) {
        const Sample s = ds.sample(i);
        corr += s.y * gegenbauer_eval(d, 2, s.z.dot(w));
    }
    CHECK(std::abs(corr / ds.m()) < 0.03);
}

TEST_CASE("normalized wrapper fixes the radius") {
    const LinkSpec link = LinkSpec::normalized(LinkSpec::gaussian_hermite(3, 0.5));
    const Dataset ds = sample_planted(link, planted_direction(5), 100, 7);
    for (double r : ds.r) CHECK(r == 1.0);
    CHECK_FALSE(link.gaussian_radius());
}

TEST_CASE("binary links emit signs") {
    const Dataset ds = sample_planted(LinkSpec::hermite_binary(3), planted_direction(5), 2000, 8);
    for (double y : ds.y) CHECK(std::abs(y) == 1.0);
}

TEST_CASE("dataset text round trip is exact") {
    const Dataset ds = sample_planted(LinkSpec::gaussian_hermite(3, 0.5), planted_direction(4), 50, 9);
    std::stringstream ss;
    write_dataset(ds, ss);
    const Dataset back = read_dataset(ss);
    CHECK(back.d == ds.d);
    CHECK(back.y == ds.y);
    CHECK(back.r == ds.r);
    CHECK(back.z == ds.z);
    REQUIRE(back.planted.has_value());
    CHECK((*back.planted - *ds.planted).norm() == 0.0);
    std::stringstream bad("# simlab-v1 d=3 m=2\n1,2\n");
    CHECK_THROWS(read_dataset(bad));
}

TEST_CASE("slices and views") {
    const Dataset ds = sample_planted(LinkSpec::gaussian_hermite(2, 0.5), planted_direction(3), 20, 10);
    const Dataset s = ds.slice(5, 12);
    CHECK(s.m() == 7u);
    CHECK(s.y.front() == ds.y[5]);
    CHECK(ds.view(5, 12).row(0)[0] == ds.z[15]);
}

TEST_CASE("scalar draws: t follows tau_{d,1}") {
    const int d = 10;
    const ScalarDraws s = sample_scalar(LinkSpec::gaussian_hermite(2, 0.5), d, 200000, 11);
    double t2 = 0.0;
    for (double t : s.t) t2 += t * t;
    CHECK(t2 / s.t.size() == doctest::Approx(1.0 / d).epsilon(0.02));
}

TEST_CASE("xi: tower property E[xi_l(Y,R) Q_l(T)] = ||xi_l||^2") {
    const int d = 10;
    const LinkSpec link = LinkSpec::gaussian_hermite(2, 0.5);
    const ScalarDraws s = sample_scalar(link, d, 100000, 12);
    for (int l : {2, 4}) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s.t.size(); ++i)
            acc += xi_eval(link, d, l, s.y[i], s.r[i]) * gegenbauer_eval(d, l, s.t[i]);
        const Estimate e = xi_norm(link, d, l, 100000, 13);
        CHECK(acc / s.t.size() == doctest::Approx(e.value).epsilon(0.1));
    }
    // an even link has no odd components
    CHECK(xi_norm(link, d, 1, 20000, 14).value < 1e-12);
    CHECK(xi_norm(link, d, 3, 20000, 14).value < 1e-12);
}

TEST_CASE("xi of the norm-stripped link is smaller than with the norm") {
    const int d = 20;
    const LinkSpec full = LinkSpec::gaussian_hermite(3, 0.5);
    const LinkSpec stripped = LinkSpec::normalized(full);
    CHECK(xi_norm(stripped, d, 1, 20000, 15).value < xi_norm(full, d, 1, 20000, 15).value);
}

TEST_CASE("transformations: unit null norm, positive beta, kappa bound") {
    const int d = 30;
    const LinkSpec link = LinkSpec::gaussian_hermite(2, 0.5);
    const Transformation T = build_transformation(link, d, 2, 3.0, 40000, 16);
    CHECK(T.beta > 0.0);
    const Dataset null = sample_null(link, d, 40000, 17);
    double sq = 0.0, sup = 0.0;
    for (double v : T.apply(null)) {
        sq += v * v;
        sup = std::max(sup, std::abs(v));
    }
    CHECK(sq / null.m() == doctest::Approx(1.0).epsilon(0.05));
    CHECK(sup <= 3.0 + 1e-12);
    // beta against a direct planted estimate
    const Vec w = planted_direction(d);
    const Dataset ds = sample_planted(link, w, 200000, 18);
    const auto tv = T.apply(ds);
    double b = 0.0;
    for (std::size_t i = 0; i < ds.m(); ++i) b += tv[i] * gegenbauer_eval(d, 2, ds.sample(i).z.dot(w));
    CHECK(b / ds.m() == doctest::Approx(T.beta).epsilon(0.15));
}

TEST_CASE("label transformation is the normalized label") {
    const LinkSpec link = LinkSpec::gaussian_hermite(3, 0.5);
    const Transformation T = label_transformation(link, 10, 3, 20000, 19);
    CHECK(T(2.0, 1.0) == doctest::Approx(2.0 * T(1.0, 1.0)));
    CHECK(T(0.0, 3.0) == 0.0);
}

TEST_CASE("mixture link uses weight d^{-k/5}") {
    const LinkSpec mix = mixture_link(10, 100);
    CHECK(mix.variant == LinkVariant::Mixture);
    CHECK(mix.epsilon == doctest::Approx(1e-4));
    CHECK_THROWS(mixture_link(7, 100));
}
