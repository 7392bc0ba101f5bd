#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "simlab/harmonic_tensor.hpp"

namespace simlab {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Sample reductions are split into fixed-size chunks. Partial results are
// summed in chunk order, so the value does not depend on the thread count.
inline constexpr std::size_t kChunk = 512;

enum class Exec { serial, parallel };

struct SampleView {
    const double* z = nullptr;  // m x d, row-major
    std::size_t m = 0;
    int d = 0;
    const double* row(std::size_t i) const { return z + i * static_cast<std::size_t>(d); }
};

// Sum over chunks of fn(begin, end, partial) where partial has length n.
template <class Fn>
std::vector<double> chunked_reduce(std::size_t m, std::size_t n, Exec exec, Fn fn) {
    const std::size_t nchunks = (m + kChunk - 1) / kChunk;
    std::vector<double> out(n, 0.0);
    if (nchunks == 0) return out;
    std::vector<std::vector<double>> parts(nchunks, std::vector<double>(n, 0.0));
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long c = 0; c < static_cast<long>(nchunks); ++c) {
            std::size_t b = c * kChunk, e = std::min(m, b + kChunk);
            fn(b, e, parts[c].data());
        }
    } else {
        for (std::size_t c = 0; c < nchunks; ++c) {
            std::size_t b = c * kChunk, e = std::min(m, b + kChunk);
            fn(b, e, parts[c].data());
        }
    }
    for (const auto& p : parts)
        for (std::size_t k = 0; k < n; ++k) out[k] += p[k];
    return out;
}

// out = sum_i w_i Mat_{a,b}(H_l(z_i)) v.
// serial: per-sample reference loop over expansion terms.
// parallel: chunked GEMM formulation, same value up to rounding.
Vec unfolded_apply(const UnfoldingPlan& plan, const SampleView& s, const double* w, const Vec& v, Exec exec);

// sum_i w_i^2 Mat(H(z_i)) Mat(H(z_i))^T u, the i = j diagonal of M1 M1^T.
Vec unfolded_diagonal_apply(const UnfoldingPlan& plan, const UnfoldingPlan& plan_t, const SampleView& s,
                            const double* w, const Vec& u, Exec exec);

// sum_i w_i z_i
Vec weighted_sum(const SampleView& s, const double* w, Exec exec);
// sum_i w_i (d <z_i,v> z_i - v)
Vec spectral2_apply(const SampleView& s, const double* w, const Vec& v, Exec exec);
// sum_i w_i Q_l'(<v,z_i>) z_i
Vec boost_sum(const SampleView& s, const double* w, const Vec& v, int l, Exec exec);

}  // namespace simlab
