#include "simlab/sim_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <tuple>

#include "simlab/harmonic_core.hpp"

namespace simlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Householder reflection mapping e_1 to w, applied to u in place.
void reflect_to(const Vec& w, Vec& u) {
    Vec v = -w;
    v(0) += 1.0;
    const double n2 = v.squaredNorm();
    if (n2 < 1e-30) return;
    u -= (2.0 * v.dot(u) / n2) * v;
}

// One coordinate of a uniform unit vector and the label inputs.
struct Draw {
    double y, r, t;
};

Draw draw_scalar(const LinkSpec& link, int d, Rng& rng) {
    std::normal_distribution<double> g;
    std::gamma_distribution<double> ga((d - 1) / 2.0, 1.0);
    const double g1 = g(rng);
    const double rest = 2.0 * ga(rng);
    const double t = g1 / std::sqrt(g1 * g1 + rest);
    const double r = link.sample_radius(d, rng);
    const double y = link.sample_label(r, t, d, rng);
    return {y, r, t};
}

template <class Fn>
void for_blocks(std::size_t m, Fn fn) {
    const std::size_t nblocks = (m + kStreamBlock - 1) / kStreamBlock;
#pragma omp parallel for schedule(dynamic, 1)
    for (long b = 0; b < static_cast<long>(nblocks); ++b) {
        const std::size_t begin = b * kStreamBlock, end = std::min(m, begin + kStreamBlock);
        fn(static_cast<std::size_t>(b), begin, end);
    }
}

Dataset make_dataset(const LinkSpec& link, int d, std::size_t m, std::uint64_t seed) {
    Dataset ds;
    ds.d = d;
    ds.y.resize(m);
    ds.r.resize(m);
    ds.z.resize(m * static_cast<std::size_t>(d));
    ds.link_fingerprint = link.fingerprint();
    ds.seed = seed;
    return ds;
}

Dataset generate(const LinkSpec& link, const Vec* w_star, int d, std::size_t m, std::uint64_t seed) {
    link.validate();
    if (d < 2) throw DomainError("sample: d must be >= 2");
    Dataset ds = make_dataset(link, d, m, seed);
    if (w_star) ds.planted = *w_star;
    for_blocks(m, [&](std::size_t b, std::size_t begin, std::size_t end) {
        Rng rng = make_rng(seed, b);
        Rng zrng = make_rng(seed ^ 0x6e756c6cULL, b);
        for (std::size_t i = begin; i < end; ++i) {
            Vec u = random_unit(d, rng);
            const double t = u(0);
            const double r = link.sample_radius(d, rng);
            const double y = link.sample_label(r, t, d, rng);
            if (w_star)
                reflect_to(*w_star, u);
            else
                u = random_unit(d, zrng);
            ds.y[i] = y;
            ds.r[i] = r;
            std::copy(u.data(), u.data() + d, ds.z.data() + i * d);
        }
    });
    return ds;
}

}  // namespace

Sample Dataset::sample(std::size_t i) const {
    Sample s;
    s.y = y.at(i);
    s.r = r.at(i);
    s.z = Eigen::Map<const Vec>(z.data() + i * d, d);
    return s;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > m()) throw std::out_of_range("Dataset::slice");
    Dataset out;
    out.d = d;
    out.y.assign(y.begin() + begin, y.begin() + end);
    out.r.assign(r.begin() + begin, r.begin() + end);
    out.z.assign(z.begin() + begin * d, z.begin() + end * d);
    out.planted = planted;
    out.link_fingerprint = link_fingerprint;
    out.seed = seed;
    return out;
}

Dataset sample_planted(const LinkSpec& link, const Vec& w_star, std::size_t m, std::uint64_t seed, int d) {
    if (d == 0) d = static_cast<int>(w_star.size());
    if (w_star.size() != d) throw DomainError("sample_planted: w_star has the wrong dimension");
    if (std::abs(w_star.norm() - 1.0) > 1e-10) throw DomainError("sample_planted: w_star must be a unit vector");
    return generate(link, &w_star, d, m, seed);
}

Dataset sample_null(const LinkSpec& link, int d, std::size_t m, std::uint64_t seed) {
    return generate(link, nullptr, d, m, seed);
}

ScalarDraws sample_scalar(const LinkSpec& link, int d, std::size_t n, std::uint64_t seed) {
    link.validate();
    ScalarDraws out;
    out.y.resize(n);
    out.r.resize(n);
    out.t.resize(n);
    for_blocks(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
        Rng rng = make_rng(seed ^ 0x7363616cULL, b);
        for (std::size_t i = begin; i < end; ++i) {
            Draw dr = draw_scalar(link, d, rng);
            out.y[i] = dr.y;
            out.r[i] = dr.r;
            out.t[i] = dr.t;
        }
    });
    return out;
}

void write_dataset(const Dataset& ds, std::ostream& os) {
    os << "# simlab-v1 d=" << ds.d << " m=" << ds.m() << " link=" << ds.link_fingerprint << " seed=" << ds.seed
       << "\n";
    char buf[32];
    auto put = [&](double x) {
        auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
        os.write(buf, res.ptr - buf);
    };
    if (ds.planted) {
        os << "# planted=";
        for (int j = 0; j < ds.d; ++j) {
            if (j) os << ',';
            put((*ds.planted)(j));
        }
        os << "\n";
    }
    for (std::size_t i = 0; i < ds.m(); ++i) {
        put(ds.y[i]);
        os << ',';
        put(ds.r[i]);
        for (int j = 0; j < ds.d; ++j) {
            os << ',';
            put(ds.z[i * ds.d + j]);
        }
        os << '\n';
    }
}

namespace {

std::vector<double> parse_csv_doubles(const std::string& line) {
    std::vector<double> v;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
        double x;
        auto res = std::from_chars(p, end, x);
        if (res.ec != std::errc()) throw ConfigError("dataset: malformed number in '" + line.substr(0, 60) + "'");
        v.push_back(x);
        p = res.ptr;
        if (p < end && *p == ',') ++p;
        while (p < end && (*p == '\r' || *p == ' ')) ++p;
    }
    return v;
}

}  // namespace

Dataset read_dataset(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# simlab-v1", 0) != 0) throw ConfigError("dataset: missing header");
    Dataset ds;
    std::size_t m = 0;
    std::istringstream hs(line.substr(11));
    std::string tok;
    while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "d")
            ds.d = std::stoi(val);
        else if (key == "m")
            m = std::stoull(val);
        else if (key == "link")
            ds.link_fingerprint = val;
        else if (key == "seed")
            ds.seed = std::stoull(val);
    }
    if (ds.d < 1) throw ConfigError("dataset: bad dimension in header");
    ds.y.reserve(m);
    ds.r.reserve(m);
    ds.z.reserve(m * ds.d);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# planted=", 0) == 0) {
                auto v = parse_csv_doubles(line.substr(10));
                if (static_cast<int>(v.size()) != ds.d) throw ConfigError("dataset: planted direction size");
                ds.planted = Eigen::Map<Vec>(v.data(), ds.d);
            }
            continue;
        }
        auto v = parse_csv_doubles(line);
        if (static_cast<int>(v.size()) != ds.d + 2) throw ConfigError("dataset: row has the wrong number of fields");
        ds.y.push_back(v[0]);
        ds.r.push_back(v[1]);
        ds.z.insert(ds.z.end(), v.begin() + 2, v.end());
    }
    if (ds.m() != m) throw ConfigError("dataset: row count does not match header");
    return ds;
}

// ---------------------------------------------------------------------------
// Gegenbauer coefficients of the likelihood ratio.

namespace {

struct NodeTable {
    const Quadrature* q;
    std::vector<double> basis;  // npoints x (lmax+1)
    std::vector<double> logw;
};

const NodeTable& node_table(int d, int lmax, int npoints) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, int>, NodeTable> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(d, lmax, npoints);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    NodeTable nt;
    nt.q = &tau_d1_quadrature(d, npoints);
    GegenbauerBasis basis(d, lmax);
    nt.basis.resize(static_cast<std::size_t>(npoints) * (lmax + 1));
    nt.logw.resize(npoints);
    for (int i = 0; i < npoints; ++i) {
        basis.eval_all(nt.q->nodes[i], nt.basis.data() + static_cast<std::size_t>(i) * (lmax + 1));
        nt.logw[i] = std::log(nt.q->weights[i]);
    }
    return cache.emplace(key, std::move(nt)).first->second;
}

}  // namespace

std::vector<double> xi_eval_all(const LinkSpec& link, int d, int lmax, double y, double r, int npoints) {
    if (!link.has_density()) throw DomainError("xi_eval: link exposes no conditional density");
    if (lmax < 0) throw DomainError("xi_eval: negative degree");
    const NodeTable& nt = node_table(d, lmax, npoints);
    std::vector<double> lp(npoints);
    double top = kNegInf;
    for (int i = 0; i < npoints; ++i) {
        lp[i] = nt.logw[i] + link.log_density(y, r, nt.q->nodes[i], d);
        top = std::max(top, lp[i]);
    }
    std::vector<double> out(lmax + 1, 0.0);
    if (top == kNegInf) throw DomainError("xi_eval: posterior undefined (zero likelihood)");
    double den = 0.0;
    for (int i = 0; i < npoints; ++i) {
        const double p = std::exp(lp[i] - top);
        den += p;
        const double* q = nt.basis.data() + static_cast<std::size_t>(i) * (lmax + 1);
        for (int l = 0; l <= lmax; ++l) out[l] += p * q[l];
    }
    if (top + std::log(den) < std::log(1e-300)) throw DomainError("xi_eval: posterior undefined (denominator below 1e-300)");
    for (int l = 0; l <= lmax; ++l) out[l] /= den;
    out[0] = 1.0;
    return out;
}

double xi_eval(const LinkSpec& link, int d, int l, double y, double r, int npoints) {
    if (l == 0) return 1.0;
    return xi_eval_all(link, d, l, y, r, npoints)[l];
}

std::vector<Estimate> xi_norms(const LinkSpec& link, int d, int lmax, std::size_t n_mc, std::uint64_t seed) {
    if (n_mc < 2) throw DomainError("xi_norm: need at least two Monte Carlo draws");
    ScalarDraws dr = sample_scalar(link, d, n_mc, seed);
    const std::size_t L = lmax + 1;
    // Discrete labels at a single radius take few distinct (y, r) values.
    const bool memo = link.discrete() && !link.gaussian_radius();
    std::map<std::pair<double, double>, std::vector<double>> cache;
    if (memo)
        for (std::size_t i = 0; i < n_mc; ++i) {
            auto key = std::make_pair(dr.y[i], dr.r[i]);
            if (!cache.count(key)) cache[key] = xi_eval_all(link, d, lmax, dr.y[i], dr.r[i]);
        }
    auto sums = chunked_reduce(n_mc, 2 * L, Exec::parallel, [&](std::size_t b, std::size_t e, double* part) {
        for (std::size_t i = b; i < e; ++i) {
            std::vector<double> xi =
                memo ? cache.at({dr.y[i], dr.r[i]}) : xi_eval_all(link, d, lmax, dr.y[i], dr.r[i]);
            for (std::size_t l = 0; l < L; ++l) {
                const double s = xi[l] * xi[l];
                part[l] += s;
                part[L + l] += s * s;
            }
        }
    });
    std::vector<Estimate> out(L);
    const double n = static_cast<double>(n_mc);
    for (std::size_t l = 0; l < L; ++l) {
        const double mean = sums[l] / n;
        const double var = std::max(0.0, sums[L + l] / n - mean * mean) * n / (n - 1.0);
        out[l] = {mean, std::sqrt(var / n)};
    }
    return out;
}

Estimate xi_norm(const LinkSpec& link, int d, int l, std::size_t n_mc, std::uint64_t seed) {
    return xi_norms(link, d, l, n_mc, seed)[l];
}

// ---------------------------------------------------------------------------
// Transformations.

std::vector<double> Transformation::apply(const Dataset& ds) const {
    std::vector<double> out(ds.m());
    for (std::size_t i = 0; i < ds.m(); ++i) out[i] = fn(ds.y[i], ds.r[i]);
    return out;
}

namespace {

Estimate mean_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double s = 0.0, s2 = 0.0;
    for (double x : v) {
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = std::max(0.0, s2 / n - mean * mean) * n / std::max(1.0, n - 1.0);
    return {mean, std::sqrt(var / n)};
}

// Normalizes raw on split A and estimates beta on split B.
void finish(Transformation& tr, std::function<double(double, double)> raw, const ScalarDraws& a,
            const ScalarDraws& b, int d, bool check_signal) {
    std::vector<double> sq(a.y.size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const double v = raw(a.y[i], a.r[i]);
        sq[i] = v * v;
    }
    const double n2 = mean_se(sq).value;
    if (!(n2 > 1e-300) || !std::isfinite(n2)) throw DegenerateError("transformation: zero statistic");
    const double scale = 1.0 / std::sqrt(n2);
    tr.fn = [raw, scale](double y, double r) { return scale * raw(y, r); };
    if (tr.kappa > 0.0) tr.kappa *= scale;
    GegenbauerBasis basis(d, tr.l);
    std::vector<double> prod(b.y.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = tr.fn(b.y[i], b.r[i]) * basis.eval(tr.l, b.t[i]);
    Estimate be = mean_se(prod);
    tr.beta = be.value;
    tr.beta_se = be.std_error;
    if (check_signal && !(tr.beta > 3.0 * tr.beta_se))
        throw DegenerateError("transformation: correlation with Q_l not detectable at this calibration size");
}

ScalarDraws take(const ScalarDraws& s, std::size_t begin, std::size_t end) {
    ScalarDraws o;
    o.y.assign(s.y.begin() + begin, s.y.begin() + end);
    o.r.assign(s.r.begin() + begin, s.r.begin() + end);
    o.t.assign(s.t.begin() + begin, s.t.begin() + end);
    return o;
}

void check_cal(std::size_t n_cal, std::size_t parts) {
    if (n_cal < 100 * parts) throw DomainError("transformation: calibration sample too small");
}

}  // namespace

Transformation build_transformation(const LinkSpec& link, int d, int l, double kappa, std::size_t n_cal,
                                    std::uint64_t seed) {
    if (!(kappa > 1.0)) throw DomainError("build_transformation: kappa must exceed 1");
    if (l < 1) throw DomainError("build_transformation: degree must be >= 1");
    check_cal(n_cal, 3);
    ScalarDraws all = sample_scalar(link, d, n_cal, hash_keys({seed, 0x78u}));
    const std::size_t third = n_cal / 3;
    ScalarDraws a = take(all, 0, third), b = take(all, third, 2 * third), c = take(all, 2 * third, n_cal);
    std::vector<double> sq(a.y.size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const double x = xi_eval(link, d, l, a.y[i], a.r[i]);
        sq[i] = x * x;
    }
    Estimate nrm = mean_se(sq);
    if (!(nrm.value > 1e-20) || !(nrm.value > 3.0 * nrm.std_error))
        throw DegenerateError("build_transformation: ||xi_l|| not detectable at this calibration size");
    const double xnorm = std::sqrt(nrm.value);
    Transformation tr;
    tr.l = l;
    tr.kind = "xi";
    tr.norm = xnorm;
    tr.kappa = kappa;
    auto raw = [link, d, l, xnorm, kappa](double y, double r) {
        return std::clamp(xi_eval(link, d, l, y, r) / xnorm, -kappa, kappa);
    };
    finish(tr, raw, b, c, d, false);
    // Renormalization may lift the bound slightly above kappa; clip again.
    const double k = kappa;
    auto fn = tr.fn;
    tr.fn = [fn, k](double y, double r) { return std::clamp(fn(y, r), -k, k); };
    tr.kappa = kappa;
    const double se_norm = 0.5 * nrm.std_error / xnorm;
    if (tr.beta < xnorm / kappa - 3.0 * (tr.beta_se + se_norm))
        throw std::logic_error("build_transformation: correlation below the clipping guarantee");
    if (!(tr.beta > 0.0)) throw DegenerateError("build_transformation: non-positive correlation");
    return tr;
}

Transformation csq_transformation(const LinkSpec& link, int d, int l, std::size_t n_cal, std::uint64_t seed) {
    if (l < 1) throw DomainError("csq_transformation: degree must be >= 1");
    check_cal(n_cal, 3);
    ScalarDraws all = sample_scalar(link, d, n_cal, hash_keys({seed, 0x63u}));
    const std::size_t third = n_cal / 3;
    ScalarDraws a = take(all, 0, third), b = take(all, third, 2 * third), c = take(all, 2 * third, n_cal);
    // Binned regression of y Q_l(t) on r, quantile bins holding >= 500 points.
    std::vector<std::size_t> order(a.r.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a.r[i] < a.r[j]; });
    const std::size_t nb = std::clamp<std::size_t>(order.size() / 500, 1, 16);
    std::vector<double> edges, values;
    GegenbauerBasis basis(d, l);
    std::size_t start = 0;
    for (std::size_t k = 0; k < nb; ++k) {
        std::size_t stop = (k + 1) * order.size() / nb;
        // keep equal radii in one bin
        while (stop < order.size() && stop > 0 && a.r[order[stop]] == a.r[order[stop - 1]]) ++stop;
        if (stop <= start) continue;
        double s = 0.0;
        for (std::size_t i = start; i < stop; ++i) s += a.y[order[i]] * basis.eval(l, a.t[order[i]]);
        values.push_back(s / static_cast<double>(stop - start));
        if (stop < order.size()) edges.push_back(0.5 * (a.r[order[stop - 1]] + a.r[order[stop]]));
        start = stop;
        if (start >= order.size()) break;
    }
    Transformation tr;
    tr.l = l;
    tr.kind = "csq";
    auto raw = [edges, values](double y, double r) {
        const std::size_t k = std::upper_bound(edges.begin(), edges.end(), r) - edges.begin();
        return y * values[std::min(k, values.size() - 1)];
    };
    std::vector<double> ysq(b.y.size());
    for (std::size_t i = 0; i < ysq.size(); ++i) ysq[i] = b.y[i] * b.y[i];
    finish(tr, raw, b, c, d, true);
    tr.norm = std::sqrt(mean_se(ysq).value);
    return tr;
}

Transformation label_transformation(const LinkSpec& link, int d, int l, std::size_t n_cal, std::uint64_t seed) {
    check_cal(n_cal, 2);
    ScalarDraws all = sample_scalar(link, d, n_cal, hash_keys({seed, 0x79u}));
    const std::size_t half = n_cal / 2;
    Transformation tr;
    tr.l = l;
    tr.kind = "label";
    finish(tr, [](double y, double) { return y; }, take(all, 0, half), take(all, half, n_cal), d, false);
    if (tr.beta < 0.0) {
        auto fn = tr.fn;
        tr.fn = [fn](double y, double r) { return -fn(y, r); };
        tr.beta = -tr.beta;
    }
    std::vector<double> ysq(half);
    for (std::size_t i = 0; i < half; ++i) ysq[i] = all.y[i] * all.y[i];
    tr.norm = std::sqrt(mean_se(ysq).value);
    return tr;
}

Transformation hermite_partial_trace_transformation(const LinkSpec& link, int d, int k_star, int l,
                                                     std::size_t n_cal, std::uint64_t seed) {
    BetaCoefficient beta(k_star, l, d);
    if (beta.is_zero()) throw DegenerateError("partial trace: beta_{k,l} vanishes (parity or degree)");
    check_cal(n_cal, 2);
    ScalarDraws all = sample_scalar(link, d, n_cal, hash_keys({seed, 0x70u}));
    const std::size_t half = n_cal / 2;
    Transformation tr;
    tr.l = l;
    tr.kind = "partial-trace";
    finish(tr, [beta](double y, double r) { return y * beta(r); }, take(all, 0, half), take(all, half, n_cal), d,
           false);
    if (tr.beta < 0.0) {
        auto fn = tr.fn;
        tr.fn = [fn](double y, double r) { return -fn(y, r); };
        tr.beta = -tr.beta;
    }
    return tr;
}

}  // namespace simlab
