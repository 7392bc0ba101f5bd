#include "simlab/harmonic_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "simlab/harmonic_core.hpp"
#include "simlab/rng.hpp"

namespace simlab {

std::size_t ipow(std::size_t base, int e) {
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

DenseSymTensor::DenseSymTensor(int order_, int dim_)
    : order(order_), dim(dim_), entries(ipow(dim_, order_), 0.0) {}

double DenseSymTensor::at(const std::vector<int>& idx) const {
    std::size_t f = 0, s = 1;
    for (int k = 0; k < order; ++k) {
        f += s * idx[k];
        s *= dim;
    }
    return entries[f];
}

double c_coeff(int l, int j, int d) {
    if (j < 0 || 2 * j > l) throw DomainError("c_coeff: need 0 <= j <= l/2");
    if (d < 3) throw DomainError("c_coeff: d >= 3");
    // (-1)^j 2^{l-2j} l!/(j!(l-2j)!) (d/2-1)_{l-j} / (d-2)_l sqrt(n_{d,l})
    long double v = std::ldexp(1.0L, l - 2 * j);
    for (int i = 2; i <= l; ++i) v *= i;
    for (int i = 2; i <= j; ++i) v /= i;
    for (int i = 2; i <= l - 2 * j; ++i) v /= i;
    for (int i = 0; i < l - j; ++i) v *= (d / 2.0L - 1.0L + i);
    for (int i = 0; i < l; ++i) v /= (d - 2.0L + i);
    if (j % 2) v = -v;
    return static_cast<double>(v * std::sqrt(static_cast<long double>(harmonic_dim_f(d, l))));
}

std::vector<double> c_coeff_table(int l, int d) {
    std::vector<double> c(l / 2 + 1);
    for (int j = 0; j <= l / 2; ++j) c[j] = c_coeff(l, j, d);
    return c;
}

namespace {

void matchings(std::vector<int>& rest, std::vector<std::pair<int, int>>& cur,
               std::vector<std::vector<std::pair<int, int>>>& out) {
    if (rest.empty()) {
        out.push_back(cur);
        return;
    }
    int first = rest[0];
    for (std::size_t k = 1; k < rest.size(); ++k) {
        int second = rest[k];
        std::vector<int> nxt;
        for (std::size_t q = 1; q < rest.size(); ++q)
            if (q != k) nxt.push_back(rest[q]);
        cur.emplace_back(first, second);
        matchings(nxt, cur, out);
        cur.pop_back();
    }
}

void check_unit(const Vec& z) {
    if (std::abs(z.norm() - 1.0) > 1e-10) throw DomainError("z must be a unit vector");
}

}  // namespace

std::vector<Placement> enumerate_placements(int l, int j) {
    std::vector<Placement> out;
    const int p = l - 2 * j;
    std::vector<int> sel(l, 0);
    std::fill(sel.begin(), sel.begin() + p, 1);
    // iterate over all subsets of size p (lexicographic via prev_permutation)
    do {
        Placement base;
        base.j = j;
        std::vector<int> rest;
        for (int i = 0; i < l; ++i) (sel[i] ? base.z_pos : rest).push_back(i);
        std::vector<std::vector<std::pair<int, int>>> ms;
        std::vector<std::pair<int, int>> cur;
        matchings(rest, cur, ms);
        for (auto& m : ms) {
            Placement pl = base;
            pl.pairs = m;
            out.push_back(std::move(pl));
        }
    } while (std::prev_permutation(sel.begin(), sel.end()));
    return out;
}

namespace {

DenseSymTensor build_dense(int d, int l, std::size_t max_entries,
                           const std::function<double(const std::vector<int>&)>& f) {
    if (ipow(d, l) > max_entries)
        throw std::length_error("dense tensor exceeds memory budget; use the implicit HarmonicMatvec operator");
    DenseSymTensor t(l, d);
    std::vector<int> idx(l, 0);
    for (std::size_t f0 = 0; f0 < t.size(); ++f0) {
        t.entries[f0] = f(idx);
        for (int k = 0; k < l; ++k) {
            if (++idx[k] < d) break;
            idx[k] = 0;
        }
    }
    return t;
}

}  // namespace

DenseSymTensor harmonic_tensor_dense(const Vec& z, int l, std::size_t max_entries) {
    check_unit(z);
    const int d = static_cast<int>(z.size());
    std::vector<std::vector<Placement>> pl(l / 2 + 1);
    std::vector<double> w(l / 2 + 1);
    for (int j = 0; j <= l / 2; ++j) {
        pl[j] = enumerate_placements(l, j);
        w[j] = c_coeff(l, j, d) / pl[j].size();
    }
    return build_dense(d, l, max_entries, [&](const std::vector<int>& idx) {
        double s = 0.0;
        for (int j = 0; j <= l / 2; ++j) {
            double sj = 0.0;
            for (const auto& p : pl[j]) {
                bool ok = true;
                for (auto [x, y] : p.pairs)
                    if (idx[x] != idx[y]) {
                        ok = false;
                        break;
                    }
                if (!ok) continue;
                double prod = 1.0;
                for (int q : p.z_pos) prod *= z(idx[q]);
                sj += prod;
            }
            s += w[j] * sj;
        }
        return s;
    });
}

DenseSymTensor k_tensor_dense(const Vec& z, int l, std::size_t max_entries) {
    check_unit(z);
    const int d = static_cast<int>(z.size());
    const double c0 = c_coeff(l, 0, d);
    return build_dense(d, l, max_entries, [&](const std::vector<int>& idx) {
        for (int a = 0; a < l; ++a)
            for (int b = a + 1; b < l; ++b)
                if (idx[a] == idx[b]) return 0.0;
        double prod = c0;
        for (int q = 0; q < l; ++q) prod *= z(idx[q]);
        return prod;
    });
}

double contract_power(const DenseSymTensor& t, const Vec& w) {
    // contract the fastest axis repeatedly
    std::vector<double> cur = t.entries;
    const int d = t.dim;
    for (int k = 0; k < t.order; ++k) {
        std::vector<double> nxt(cur.size() / d, 0.0);
        for (std::size_t o = 0; o < nxt.size(); ++o) {
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += cur[o * d + i] * w(i);
            nxt[o] = s;
        }
        cur.swap(nxt);
    }
    return cur[0];
}

DenseSymTensor trace_pair(const DenseSymTensor& t, int axis1, int axis2) {
    if (axis1 == axis2 || axis1 < 0 || axis2 < 0 || axis1 >= t.order || axis2 >= t.order)
        throw DomainError("trace_pair: invalid axes");
    const int d = t.dim;
    DenseSymTensor out(t.order - 2, d);
    std::vector<int> idx(t.order, 0);
    for (std::size_t f = 0; f < t.size(); ++f) {
        if (idx[axis1] == idx[axis2]) {
            std::size_t g = 0, s = 1;
            for (int k = 0; k < t.order; ++k) {
                if (k == axis1 || k == axis2) continue;
                g += s * idx[k];
                s *= d;
            }
            out.entries[g] += t.entries[f];
        }
        for (int k = 0; k < t.order; ++k) {
            if (++idx[k] < d) break;
            idx[k] = 0;
        }
    }
    return out;
}

DenseSymTensor rotate(const DenseSymTensor& t, const Eigen::MatrixXd& R) {
    // apply R along each axis in turn
    const int d = t.dim;
    std::vector<double> cur = t.entries;
    for (int ax = 0; ax < t.order; ++ax) {
        std::vector<double> nxt(cur.size(), 0.0);
        const std::size_t inner = ipow(d, ax), outer = cur.size() / (inner * d);
        for (std::size_t o = 0; o < outer; ++o)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    const double r = R(i, j);
                    if (r == 0.0) continue;
                    const double* src = &cur[(o * d + j) * inner];
                    double* dst = &nxt[(o * d + i) * inner];
                    for (std::size_t s = 0; s < inner; ++s) dst[s] += r * src[s];
                }
        cur.swap(nxt);
    }
    DenseSymTensor out(t.order, d);
    out.entries = std::move(cur);
    return out;
}

double max_symmetry_defect(const DenseSymTensor& t) {
    const int d = t.dim, l = t.order;
    double worst = 0.0;
    std::vector<int> idx(l, 0);
    for (std::size_t f = 0; f < t.size(); ++f) {
        for (int a = 0; a + 1 < l; ++a) {
            std::vector<int> sw = idx;
            std::swap(sw[a], sw[a + 1]);
            worst = std::max(worst, std::abs(t.entries[f] - t.at(sw)));
        }
        for (int k = 0; k < l; ++k) {
            if (++idx[k] < d) break;
            idx[k] = 0;
        }
    }
    return worst;
}

Vec dense_unfolded_matvec(const DenseSymTensor& t, int a, const Vec& v) {
    const std::size_t rows = ipow(t.dim, a), cols = ipow(t.dim, t.order - a);
    if (static_cast<std::size_t>(v.size()) != cols) throw DomainError("dense_unfolded_matvec: size mismatch");
    Eigen::Map<const Eigen::MatrixXd> M(t.entries.data(), rows, cols);
    return M * v;
}

UnfoldedSpec::UnfoldedSpec(int d_, int a_, int b_) : d(d_), a(a_), b(b_) {
    if (a < 0 || b < 0) throw DomainError("UnfoldedSpec: negative order");
}

std::size_t UnfoldedSpec::flat(const std::vector<int>& idx) const {
    std::size_t f = 0, s = 1;
    for (int k = 0; k < a + b; ++k) {
        f += s * idx[k];
        s *= d;
    }
    return f;
}

std::vector<int> UnfoldedSpec::multi(std::size_t f) const {
    std::vector<int> idx(a + b);
    for (int k = 0; k < a + b; ++k) {
        idx[k] = static_cast<int>(f % d);
        f /= d;
    }
    return idx;
}

UnfoldingPlan::UnfoldingPlan(int d_, int l_, int a_, int b_) : d(d_), l(l_), a(a_), b(b_) {
    if (a + b != l || a < 0 || b < 0) throw DomainError("UnfoldingPlan: need a + b = l");
    if (l > kMatvecMaxDegree)
        throw DomainError("UnfoldingPlan: degree above the implicit matvec ceiling; use harmonic_tensor_dense");
    c = c_coeff_table(l, d);
    for (int j = 0; j <= l / 2; ++j) {
        auto pls = enumerate_placements(l, j);
        const double w = c[j] / pls.size();
        for (const auto& p : pls) {
            PlacementPlan pp;
            pp.weight = w;
            for (int q : p.z_pos) (q < a ? pp.row_z : pp.col_z).push_back(q < a ? q : q - a);
            std::vector<std::pair<int, int>> cross;
            for (auto [x, y] : p.pairs) {
                if (x > y) std::swap(x, y);
                if (y < a)
                    pp.row_pairs.emplace_back(x, y);
                else if (x >= a)
                    pp.col_pairs.emplace_back(x - a, y - a);
                else
                    cross.emplace_back(y - a, x);
            }
            std::sort(cross.begin(), cross.end());
            for (auto [cc, rr] : cross) {
                pp.cross_col.push_back(cc);
                pp.cross_row.push_back(rr);
            }
            std::sort(pp.row_z.begin(), pp.row_z.end());
            std::sort(pp.col_z.begin(), pp.col_z.end());
            terms.push_back(std::move(pp));
        }
    }
}

namespace detail {

// Contract axis `ax` of a d^order tensor with vector x.
std::vector<double> contract_axis(const std::vector<double>& t, int d, int order, int ax, const double* x) {
    const std::size_t inner = ipow(d, ax);
    const std::size_t outer = t.size() / (inner * d);
    std::vector<double> out(inner * outer, 0.0);
    for (std::size_t o = 0; o < outer; ++o)
        for (int i = 0; i < d; ++i) {
            const double xi = x[i];
            const double* src = &t[(o * d + i) * inner];
            double* dst = &out[o * inner];
            for (std::size_t s = 0; s < inner; ++s) dst[s] += xi * src[s];
        }
    (void)order;
    return out;
}

// Trace axes ax1 < ax2 of a d^order tensor.
std::vector<double> trace_axes(const std::vector<double>& t, int d, int order, int ax1, int ax2) {
    const std::size_t s1 = ipow(d, ax1), s2 = ipow(d, ax2);
    std::vector<double> out(t.size() / (std::size_t(d) * d), 0.0);
    std::vector<int> idx(order - 2, 0);
    for (std::size_t f = 0; f < out.size(); ++f) {
        // base offset of remaining indices in the original layout
        std::size_t base = 0, s = 1;
        int k = 0;
        for (int ax = 0; ax < order; ++ax, s *= d) {
            if (ax == ax1 || ax == ax2) continue;
            base += s * idx[k++];
        }
        double acc = 0.0;
        for (int i = 0; i < d; ++i) acc += t[base + i * (s1 + s2)];
        out[f] = acc;
        for (int q = 0; q < order - 2; ++q) {
            if (++idx[q] < d) break;
            idx[q] = 0;
        }
    }
    return out;
}

}  // namespace detail

using detail::contract_axis;
using detail::trace_axes;

// Column-side reduction of one term: traces, z-contractions. Returns the
// carried tensor indexed by cross_col (ascending), first fastest.
static std::vector<double> reduce_columns(const PlacementPlan& pp, int d, int b, const double* z,
                                          const double* v) {
    std::vector<double> cur(v, v + ipow(d, b));
    std::vector<int> axes(b);
    std::iota(axes.begin(), axes.end(), 0);
    auto pos = [&](int orig) {
        return static_cast<int>(std::find(axes.begin(), axes.end(), orig) - axes.begin());
    };
    for (auto [x, y] : pp.col_pairs) {
        int px = pos(x), py = pos(y);
        if (px > py) std::swap(px, py);
        cur = trace_axes(cur, d, static_cast<int>(axes.size()), px, py);
        axes.erase(axes.begin() + py);
        axes.erase(axes.begin() + px);
    }
    for (int q : pp.col_z) {
        int p = pos(q);
        cur = contract_axis(cur, d, static_cast<int>(axes.size()), p, z);
        axes.erase(axes.begin() + p);
    }
    return cur;  // remaining axes are exactly cross_col in ascending order
}

// out[I] += scale * prod_{row_z} z * prod_{row_pairs} delta * C[I at cross_row]
static void expand_rows(const PlacementPlan& pp, int d, int a, const double* z, const double* C, double scale,
                        double* out) {
    const std::size_t rows = ipow(d, a);
    const int q = static_cast<int>(pp.cross_row.size());
    std::vector<int> idx(a, 0);
    for (std::size_t f = 0; f < rows; ++f) {
        bool ok = true;
        for (auto [x, y] : pp.row_pairs)
            if (idx[x] != idx[y]) {
                ok = false;
                break;
            }
        if (ok) {
            double v = scale;
            for (int r : pp.row_z) v *= z[idx[r]];
            std::size_t g = 0, s = 1;
            for (int k = 0; k < q; ++k, s *= d) g += s * idx[pp.cross_row[k]];
            out[f] += v * C[g];
        }
        for (int k = 0; k < a; ++k) {
            if (++idx[k] < d) break;
            idx[k] = 0;
        }
    }
}

void matvec_unfolded_accumulate(const UnfoldingPlan& plan, const double* z, const double* v, double scale,
                                double* out) {
    for (const auto& pp : plan.terms) {
        std::vector<double> C = reduce_columns(pp, plan.d, plan.b, z, v);
        expand_rows(pp, plan.d, plan.a, z, C.data(), scale * pp.weight, out);
    }
}

HarmonicMatvec::HarmonicMatvec(const Vec& z, int l, int a, int b)
    : z_(z), plan_(static_cast<int>(z.size()), l, a, b) {
    check_unit(z);
}

HarmonicMatvec::HarmonicMatvec(const Vec& z, const UnfoldingPlan& plan) : z_(z), plan_(plan) {
    check_unit(z);
    if (z.size() != plan.d) throw DomainError("HarmonicMatvec: dimension mismatch");
}

Vec HarmonicMatvec::apply(const Vec& v) const {
    if (static_cast<std::size_t>(v.size()) != plan_.cols()) throw DomainError("matvec_unfolded: size mismatch");
    Vec out = Vec::Zero(plan_.rows());
    matvec_unfolded_accumulate(plan_, z_.data(), v.data(), 1.0, out.data());
    return out;
}

Vec matvec_unfolded(const HarmonicMatvec& op, const Vec& v) { return op.apply(v); }

ReproducingResult reproducing_check(int d, int l, int k, int n_mc, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x7e9d);
    Vec w = random_unit(d, rng);
    const std::size_t n = ipow(d, l);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sumsq = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n_mc; ++i) {
        Vec z = random_unit(d, rng);
        const double q = gegenbauer_eval(d, k, w.dot(z));
        DenseSymTensor h = harmonic_tensor_dense(z, l);
        Eigen::Map<const Eigen::VectorXd> hv(h.entries.data(), n);
        sum += q * hv;
        sumsq += (q * hv).cwiseAbs2();
    }
    Eigen::VectorXd mean = sum / n_mc;
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(n);
    if (l == k) {
        DenseSymTensor hw = harmonic_tensor_dense(w, l);
        pred = Eigen::Map<const Eigen::VectorXd>(hw.entries.data(), n) / std::sqrt(harmonic_dim_f(d, l));
    }
    ReproducingResult r;
    r.error = (mean - pred).norm();
    r.predicted_norm = pred.norm();
    r.relative = r.predicted_norm > 0 ? r.error / r.predicted_norm : 0.0;
    Eigen::VectorXd var = (sumsq / n_mc - mean.cwiseAbs2()).cwiseMax(0.0);
    r.standard_error = std::sqrt(var.sum() / n_mc);
    return r;
}

Vec vec_extract(const Vec& u, int d) {
    const std::size_t n = u.size();
    if (n % d != 0) throw DomainError("vec_extract: length is not a multiple of d");
    if (u.norm() == 0.0) throw DomainError("vec_extract: zero input");
    if (static_cast<std::size_t>(d) == n) return u / u.norm();
    Eigen::Map<const Eigen::MatrixXd> U(u.data(), d, n / d);
    Eigen::MatrixXd G = U * U.transpose();
    // deterministic start, fixed iteration budget
    Rng rng = make_rng(0x5eed, static_cast<std::uint64_t>(d));
    Vec x = random_unit(d, rng);
    const int iters = static_cast<int>(std::ceil(10.0 * std::log(static_cast<double>(n))));
    for (int it = 0; it < iters; ++it) {
        Vec y = G * x;
        double nrm = y.norm();
        if (nrm == 0.0) break;
        y /= nrm;
        double change = (y - x).norm();
        x = y;
        if (change < 1e-10) break;
    }
    for (int i = 0; i < d; ++i)
        if (x(i) != 0.0) {
            if (x(i) < 0) x = -x;
            break;
        }
    return x;
}

double wick_moment(int d, const std::vector<int>& multi_index) {
    const int deg = static_cast<int>(multi_index.size());
    if (deg % 2) return 0.0;
    if (deg > 12) throw DomainError("wick_moment: degree ceiling 12 exceeded");
    // count pairings whose pairs have equal coordinates
    std::function<long long(std::vector<int>)> count = [&](std::vector<int> rest) -> long long {
        if (rest.empty()) return 1;
        long long c = 0;
        for (std::size_t k = 1; k < rest.size(); ++k) {
            if (rest[k] != rest[0]) continue;
            std::vector<int> nxt;
            for (std::size_t q = 1; q < rest.size(); ++q)
                if (q != k) nxt.push_back(rest[q]);
            c += count(nxt);
        }
        return c;
    };
    double denom = 1.0;
    for (int j = 0; j < deg / 2; ++j) denom *= (d + 2.0 * j);
    return count(multi_index) / denom;
}

}  // namespace simlab
