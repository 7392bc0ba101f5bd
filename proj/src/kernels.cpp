#include "simlab/kernels.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "simlab/harmonic_core.hpp"

namespace simlab {

namespace {

using ColMatrix = Eigen::MatrixXd;
using ConstRowMap = Eigen::Map<const RowMatrix>;

// Column-side reduction that does not depend on the sample: traces on
// col_pairs, then a permutation putting col_z axes first and cross_col axes
// after (both ascending). Result is d^{pc} x d^{q}, column-major.
std::vector<double> prepare_columns(const PlacementPlan& pp, int d, int b, const double* v) {
    std::vector<double> cur(v, v + ipow(d, b));
    std::vector<int> axes(b);
    std::iota(axes.begin(), axes.end(), 0);
    auto pos = [&](int orig) { return static_cast<int>(std::find(axes.begin(), axes.end(), orig) - axes.begin()); };
    for (auto [x, y] : pp.col_pairs) {
        int px = pos(x), py = pos(y);
        if (px > py) std::swap(px, py);
        cur = detail::trace_axes(cur, d, static_cast<int>(axes.size()), px, py);
        axes.erase(axes.begin() + py);
        axes.erase(axes.begin() + px);
    }
    // target order: col_z then cross_col
    std::vector<int> target = pp.col_z;
    target.insert(target.end(), pp.cross_col.begin(), pp.cross_col.end());
    const int r = static_cast<int>(axes.size());
    std::vector<int> src_pos(r);  // target axis k comes from current axis src_pos[k]
    for (int k = 0; k < r; ++k) src_pos[k] = pos(target[k]);
    bool identity = true;
    for (int k = 0; k < r; ++k) identity &= (src_pos[k] == k);
    if (identity) return cur;
    std::vector<std::size_t> stride(r);
    for (int k = 0; k < r; ++k) stride[k] = ipow(d, src_pos[k]);
    std::vector<double> out(cur.size());
    std::vector<int> idx(r, 0);
    for (std::size_t f = 0; f < out.size(); ++f) {
        std::size_t g = 0;
        for (int k = 0; k < r; ++k) g += stride[k] * idx[k];
        out[f] = cur[g];
        for (int k = 0; k < r; ++k) {
            if (++idx[k] < d) break;
            idx[k] = 0;
        }
    }
    return out;
}

// out[I] += scale * prod_{row_pairs} delta * G[I at row_z, I at cross_row]
void expand_moment(const PlacementPlan& pp, int d, int a, const double* G, double scale, double* out) {
    const std::size_t rows = ipow(d, a);
    std::vector<int> gaxes = pp.row_z;
    gaxes.insert(gaxes.end(), pp.cross_row.begin(), pp.cross_row.end());
    const int r = static_cast<int>(gaxes.size());
    std::vector<int> idx(a, 0);
    for (std::size_t f = 0; f < rows; ++f) {
        bool ok = true;
        for (auto [x, y] : pp.row_pairs)
            if (idx[x] != idx[y]) {
                ok = false;
                break;
            }
        if (ok) {
            std::size_t g = 0, s = 1;
            for (int k = 0; k < r; ++k, s *= d) g += s * idx[gaxes[k]];
            out[f] += scale * G[g];
        }
        for (int k = 0; k < a; ++k) {
            if (++idx[k] < d) break;
            idx[k] = 0;
        }
    }
}

// rows of K: z_i^{(p)} (x) C_i, first factor fastest.
ColMatrix kron_rows(const double* Z, int d, std::size_t nrows, int p, const ColMatrix& C) {
    std::size_t width = C.cols();
    ColMatrix K = C;
    for (int e = 0; e < p; ++e) {
        ColMatrix N(nrows, width * d);
        for (std::size_t c = 0; c < width; ++c)
            for (int i = 0; i < d; ++i)
                for (std::size_t r = 0; r < nrows; ++r) N(r, c * d + i) = Z[r * d + i] * K(r, c);
        // new fastest axis is z: column index i + d*c
        K.swap(N);
        width *= d;
    }
    return K;
}

void apply_chunk(const UnfoldingPlan& plan, const std::vector<std::vector<double>>& prepared, const double* Zc,
                 std::size_t mc, const double* w, double* out) {
    const int d = plan.d;
    ConstRowMap Z(Zc, mc, d);
    Eigen::Map<const Eigen::VectorXd> wv(w, mc);
    for (std::size_t t = 0; t < plan.terms.size(); ++t) {
        const PlacementPlan& pp = plan.terms[t];
        const int pc = static_cast<int>(pp.col_z.size());
        const int pr = static_cast<int>(pp.row_z.size());
        const int q = static_cast<int>(pp.cross_col.size());
        const std::size_t dq = ipow(d, q);
        const std::vector<double>& W = prepared[t];
        std::vector<double> G;
        if (pc == 0) {
            // C_i = W for every sample: G = (sum_i w_i z_i^{(pr)}) (x) W
            std::vector<double> mom;
            if (pr == 0) {
                mom.assign(1, wv.sum());
            } else {
                ColMatrix ones = ColMatrix::Ones(mc, 1);
                ColMatrix K = kron_rows(Zc, d, mc, pr - 1, ones);
                ColMatrix M = Z.transpose() * (wv.asDiagonal() * K);
                mom.assign(M.data(), M.data() + M.size());
            }
            G.resize(mom.size() * dq);
            for (std::size_t c = 0; c < dq; ++c)
                for (std::size_t r = 0; r < mom.size(); ++r) G[c * mom.size() + r] = mom[r] * W[c];
        } else {
            const std::size_t rest = W.size() / d;
            Eigen::Map<const ColMatrix> Wm(W.data(), d, rest);
            ColMatrix X = Z * Wm;  // mc x d^{pc-1+q}, first z axis contracted
            std::size_t width = rest;
            for (int e = 1; e < pc; ++e) {
                const std::size_t nw = width / d;
                ColMatrix Y(mc, nw);
                for (std::size_t r = 0; r < mc; ++r)
                    for (std::size_t c = 0; c < nw; ++c) {
                        double s = 0.0;
                        for (int i = 0; i < d; ++i) s += Zc[r * d + i] * X(r, c * d + i);
                        Y(r, c) = s;
                    }
                X.swap(Y);
                width = nw;
            }
            // X is mc x d^q: rows are C_i
            if (pr == 0) {
                Eigen::VectorXd g = X.transpose() * wv;
                G.assign(g.data(), g.data() + g.size());
            } else {
                ColMatrix K = kron_rows(Zc, d, mc, pr - 1, X);
                ColMatrix M = Z.transpose() * (wv.asDiagonal() * K);
                G.assign(M.data(), M.data() + M.size());
            }
        }
        expand_moment(pp, d, plan.a, G.data(), pp.weight, out);
    }
}

}  // namespace

Vec unfolded_apply(const UnfoldingPlan& plan, const SampleView& s, const double* w, const Vec& v, Exec exec) {
    if (static_cast<std::size_t>(v.size()) != plan.cols()) throw std::invalid_argument("unfolded_apply: size");
    if (s.d != plan.d) throw std::invalid_argument("unfolded_apply: dimension");
    const std::size_t rows = plan.rows();
    if (exec == Exec::serial) {
        Vec out = Vec::Zero(rows);
        for (std::size_t i = 0; i < s.m; ++i)
            if (w[i] != 0.0) matvec_unfolded_accumulate(plan, s.row(i), v.data(), w[i], out.data());
        return out;
    }
    std::vector<std::vector<double>> prepared(plan.terms.size());
    for (std::size_t t = 0; t < plan.terms.size(); ++t)
        prepared[t] = prepare_columns(plan.terms[t], plan.d, plan.b, v.data());
    auto parts = chunked_reduce(s.m, rows, exec, [&](std::size_t b, std::size_t e, double* part) {
        apply_chunk(plan, prepared, s.row(b), e - b, w + b, part);
    });
    return Eigen::Map<Vec>(parts.data(), rows);
}

Vec unfolded_diagonal_apply(const UnfoldingPlan& plan, const UnfoldingPlan& plan_t, const SampleView& s,
                            const double* w, const Vec& u, Exec exec) {
    const int d = plan.d;
    const std::size_t rows = plan.rows();
    if (exec == Exec::parallel && plan.a == 1) {
        // H(z) H(z)^T = alpha z z^T + gamma I by rotation invariance; read
        // alpha, gamma off z = e_1.
        Vec e1 = Vec::Zero(d), e2 = Vec::Zero(d);
        e1(0) = 1.0;
        e2(1) = 1.0;
        auto hht = [&](const Vec& x) {
            Vec mid = Vec::Zero(plan_t.rows());
            matvec_unfolded_accumulate(plan_t, e1.data(), x.data(), 1.0, mid.data());
            Vec o = Vec::Zero(rows);
            matvec_unfolded_accumulate(plan, e1.data(), mid.data(), 1.0, o.data());
            return o;
        };
        const double gamma = hht(e2)(1);
        const double alpha = hht(e1)(0) - gamma;
        auto parts = chunked_reduce(s.m, rows, exec, [&](std::size_t b, std::size_t e, double* part) {
            Eigen::Map<Vec> o(part, rows);
            for (std::size_t i = b; i < e; ++i) {
                Eigen::Map<const Vec> z(s.row(i), d);
                const double wi2 = w[i] * w[i];
                o.noalias() += (wi2 * alpha * z.dot(u)) * z;
                o += (wi2 * gamma) * u;
            }
        });
        return Eigen::Map<Vec>(parts.data(), rows);
    }
    auto parts = chunked_reduce(s.m, rows, exec, [&](std::size_t b, std::size_t e, double* part) {
        Vec mid(plan_t.rows());
        for (std::size_t i = b; i < e; ++i) {
            mid.setZero();
            matvec_unfolded_accumulate(plan_t, s.row(i), u.data(), w[i], mid.data());
            matvec_unfolded_accumulate(plan, s.row(i), mid.data(), w[i], part);
        }
    });
    return Eigen::Map<Vec>(parts.data(), rows);
}

Vec weighted_sum(const SampleView& s, const double* w, Exec exec) {
    const int d = s.d;
    auto parts = chunked_reduce(s.m, d, exec, [&](std::size_t b, std::size_t e, double* part) {
        ConstRowMap Z(s.row(b), e - b, d);
        Eigen::Map<const Vec> wv(w + b, e - b);
        Eigen::Map<Vec>(part, d).noalias() = Z.transpose() * wv;
    });
    return Eigen::Map<Vec>(parts.data(), d);
}

Vec spectral2_apply(const SampleView& s, const double* w, const Vec& v, Exec exec) {
    const int d = s.d;
    double wsum = 0.0;
    for (std::size_t i = 0; i < s.m; ++i) wsum += w[i];
    auto parts = chunked_reduce(s.m, d, exec, [&](std::size_t b, std::size_t e, double* part) {
        ConstRowMap Z(s.row(b), e - b, d);
        Eigen::Map<const Vec> wv(w + b, e - b);
        Vec proj = Z * v;
        Eigen::Map<Vec>(part, d).noalias() = Z.transpose() * (d * wv.cwiseProduct(proj));
    });
    return Eigen::Map<Vec>(parts.data(), d) - wsum * v;
}

Vec boost_sum(const SampleView& s, const double* w, const Vec& v, int l, Exec exec) {
    const int d = s.d;
    GegenbauerBasis basis(d + 2, std::max(l - 1, 0));
    const double cdl = gegenbauer_derivative_const(d, l);
    auto parts = chunked_reduce(s.m, d, exec, [&](std::size_t b, std::size_t e, double* part) {
        ConstRowMap Z(s.row(b), e - b, d);
        Vec proj = Z * v;
        Vec coef(e - b);
        std::vector<double> q(l + 1);
        for (std::size_t i = 0; i < e - b; ++i) {
            double t = std::clamp(proj(i), -1.0, 1.0);
            basis.eval_all(t, q.data());
            coef(i) = w[b + i] * cdl * q[l - 1];
        }
        Eigen::Map<Vec>(part, d).noalias() = Z.transpose() * coef;
    });
    return Eigen::Map<Vec>(parts.data(), d);
}

}  // namespace simlab
