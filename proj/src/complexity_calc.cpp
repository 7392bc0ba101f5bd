#include "simlab/complexity_calc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "simlab/harmonic_core.hpp"

namespace simlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

OptimalDegree minimize(const ComplexityProfile& p, bool square_root) {
    p.validate();
    OptimalDegree out;
    double best = kInf, best_se = 0.0, second = kInf, second_se = 0.0;
    for (int l = 1; l <= p.lmax(); ++l) {
        const Estimate& e = p.at(l);
        if (!(e.value > 0.0)) continue;
        const double n = harmonic_dim_f(p.d, l);
        const double f = (square_root ? std::sqrt(n) : n) / e.value;
        const double se = f * e.std_error / e.value;
        if (f < best) {
            second = best;
            second_se = best_se;
            out.runner_up = out.degree;
            best = f;
            best_se = se;
            out.degree = l;
        } else if (f < second) {
            second = f;
            second_se = se;
            out.runner_up = l;
        }
    }
    if (out.degree == 0) {
        out.infinite = true;
        out.value = kInf;
        out.stable = false;
        return out;
    }
    out.value = best;
    if (std::isfinite(second)) out.stable = (second - best) > 2.0 * std::hypot(best_se, second_se);
    return out;
}

BoundValue geometric_sum(double base, long terms) {
    BoundValue b;
    if (terms <= 0 || base == 0.0) return b;
    if (base == 1.0) {
        b.value = static_cast<double>(terms);
        return b;
    }
    if (base > 1.0 && terms * std::log(base) > 700.0) {
        b.value = kInf;
        b.infinite = true;
        return b;
    }
    b.value = base * (std::pow(base, static_cast<double>(terms)) - 1.0) / (base - 1.0);
    return b;
}

}  // namespace

void ComplexityProfile::validate() const {
    if (d < 2) throw DomainError("complexity profile: d must be >= 2");
    for (const auto& e : xi) {
        if (!std::isfinite(e.value) || !std::isfinite(e.std_error)) throw DomainError("complexity profile: non-finite entry");
        if (e.value < 0.0 || e.value > 1.0 + 1e-9) throw DomainError("complexity profile: entry outside [0,1]");
    }
}

ComplexityProfile ComplexityProfile::scaled(double c) const {
    ComplexityProfile p = *this;
    for (auto& e : p.xi) {
        e.value *= c;
        e.std_error *= c;
    }
    return p;
}

json ComplexityProfile::to_json() const {
    json j;
    j["d"] = d;
    json rows = json::array();
    for (int l = 1; l <= lmax(); ++l) rows.push_back({{"ell", l}, {"xi_sq", at(l).value}, {"std_error", at(l).std_error}});
    j["xi"] = rows;
    return j;
}

ComplexityProfile ComplexityProfile::from_json(const json& j) {
    ComplexityProfile p;
    try {
        p.d = j.at("d").get<int>();
        for (const auto& r : j.at("xi")) {
            const int l = r.at("ell").get<int>();
            if (l != p.lmax() + 1) throw ConfigError("complexity profile: degrees must be 1..lmax in order");
            p.xi.push_back({r.at("xi_sq").get<double>(), r.value("std_error", 0.0)});
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("complexity profile: ") + e.what());
    }
    p.validate();
    return p;
}

ComplexityProfile xi_profile(const LinkSpec& link, int d, int lmax, std::size_t n_mc, std::uint64_t seed) {
    if (lmax < 1) throw DomainError("xi_profile: lmax must be >= 1");
    auto all = xi_norms(link, d, lmax, n_mc, seed);
    ComplexityProfile p;
    p.d = d;
    p.xi.assign(all.begin() + 1, all.end());
    return p;
}

json OptimalDegree::to_json() const {
    json j;
    j["value"] = infinite ? json(nullptr) : json(value);
    j["degree"] = degree;
    j["infinite"] = infinite;
    j["stable"] = stable;
    j["runner_up"] = runner_up;
    return j;
}

OptimalDegree m_star(const ComplexityProfile& p) { return minimize(p, true); }
OptimalDegree q_star(const ComplexityProfile& p) { return minimize(p, false); }

json GaussianRatePrediction::to_json() const {
    json j;
    j["k_star"] = k_star;
    j["with_norm"] = with_norm;
    json rows = json::array();
    for (const auto& e : entries)
        rows.push_back({{"ell", e.l}, {"exponent", e.exponent}, {"upper_bound_only", e.upper_bound_only}});
    j["entries"] = rows;
    return j;
}

GaussianRatePrediction gaussian_rates(int k_star, bool with_norm, int lmax) {
    if (k_star < 1) throw DomainError("gaussian_rates: k_star must be >= 1");
    if (lmax == 0) lmax = k_star + 2;
    GaussianRatePrediction g;
    g.k_star = k_star;
    g.with_norm = with_norm;
    const double f = with_norm ? 0.5 : 1.0;
    for (int l = 1; l <= lmax; ++l) {
        RateEntry e;
        e.l = l;
        if (l > k_star) {
            e.exponent = 0.0;
            e.upper_bound_only = true;
        } else if ((k_star - l) % 2 == 0) {
            e.exponent = -f * (k_star - l) + 0.0;
        } else {
            e.exponent = -f * (k_star - l + 1);
            e.upper_bound_only = true;
        }
        g.entries.push_back(e);
    }
    return g;
}

BoundValue ldp_bound(double m, int D, int p, double m_star_value) {
    if (m < 0.0 || D < 0 || p < 0 || !(m_star_value > 0.0)) throw DomainError("ldp_bound: arguments must be positive");
    const double base = m * std::pow(static_cast<double>(D), p / 2.0 - 1.0) * M_E * (p + 1) / m_star_value;
    return geometric_sum(base, D);
}

BoundValue ldp_bound_restricted(double m, int D, int l, double xi_sq, int d) {
    if (m < 0.0 || D < 0 || l < 1 || xi_sq < 0.0) throw DomainError("ldp_bound_restricted: invalid arguments");
    const double base =
        m * M_E * std::pow(static_cast<double>(D), l / 2.0 - 1.0) * xi_sq / std::sqrt(harmonic_dim_f(d, l));
    return geometric_sum(base, D / l);
}

double smoothing_weight(int l, double lambda, int d, std::size_t n_mc, std::uint64_t seed) {
    if (!(lambda >= 0.0)) throw DomainError("smoothing_weight: lambda must be >= 0");
    if (lambda == 0.0) return 1.0;
    const double sn = std::sqrt(harmonic_dim_f(d, l));
    auto arg = [lambda](double z) {
        const double den = std::sqrt(std::max(0.0, 1.0 + 2.0 * lambda * z + lambda * lambda));
        return den > 0.0 ? std::clamp((1.0 + lambda * z) / den, -1.0, 1.0) : 1.0;
    };
    double s = 0.0;
    if (n_mc == 0) {
        const Quadrature& q = tau_d1_quadrature(d, 256);
        for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * gegenbauer_eval(d, l, arg(q.nodes[i]));
    } else {
        Rng rng = make_rng(seed, 0x5300);
        std::normal_distribution<double> g;
        std::gamma_distribution<double> ga((d - 1) / 2.0, 1.0);
        for (std::size_t i = 0; i < n_mc; ++i) {
            const double g1 = g(rng);
            const double z = g1 / std::sqrt(g1 * g1 + 2.0 * ga(rng));
            s += gegenbauer_eval(d, l, arg(z));
        }
        s /= static_cast<double>(n_mc);
    }
    return s / sn;
}

namespace {

void check_mixture(int k, int d) {
    if (k < 10 || k % 10 != 0) throw DomainError("mixture profile: k must be a positive multiple of 10");
    if (d < 3) throw DomainError("mixture profile: d must be >= 3");
}

}  // namespace

ComplexityProfile mixture_synthetic_profile(int k, int d, int lmax) {
    check_mixture(k, d);
    if (lmax == 0) lmax = k;
    const int k1 = 2 * k / 5;
    const double eps = std::pow(static_cast<double>(d), -k / 5.0);
    const auto r1 = gaussian_rates(k1, false, lmax), r2 = gaussian_rates(k, false, lmax);
    ComplexityProfile p;
    p.d = d;
    for (int l = 1; l <= lmax; ++l) {
        auto part = [&](const GaussianRatePrediction& r, int kk) {
            if (l > kk || (kk - l) % 2 != 0) return 0.0;
            return std::pow(static_cast<double>(d), r.at(l).exponent);
        };
        p.xi.push_back({eps * eps * part(r1, k1) + part(r2, k), 0.0});
    }
    return p;
}

ComplexityProfile mixture_moment_profile(int k, int d, int lmax) {
    check_mixture(k, d);
    if (lmax == 0) lmax = k;
    const int k1 = 2 * k / 5;
    const double eps = std::pow(static_cast<double>(d), -k / 5.0);
    ComplexityProfile p;
    p.d = d;
    for (int l = 1; l <= lmax; ++l) {
        auto part = [&](int kk) {
            if (l > kk || (kk - l) % 2 != 0) return 0.0;
            const double b = beta_moment(kk, l, d, MomentOrder::mean).value;
            return b * b;
        };
        p.xi.push_back({eps * eps * part(k1) + part(k), 0.0});
    }
    return p;
}

}  // namespace simlab
