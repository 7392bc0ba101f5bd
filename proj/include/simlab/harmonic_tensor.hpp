#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace simlab {

using Vec = Eigen::VectorXd;

// Flat index of (i_1..i_l) is sum_k i_k d^k (first index fastest), so
// Mat_{a,b}(T) is the column-major d^a x d^b view of the flat array.
struct DenseSymTensor {
    int order = 0;
    int dim = 0;
    std::vector<double> entries;

    DenseSymTensor() = default;
    DenseSymTensor(int order_, int dim_);
    std::size_t size() const { return entries.size(); }
    double at(const std::vector<int>& idx) const;
};

inline constexpr std::size_t kDenseTensorBudget = std::size_t(1) << 24;
inline constexpr int kMatvecMaxDegree = 6;

std::size_t ipow(std::size_t base, int e);

double c_coeff(int l, int j, int d);
std::vector<double> c_coeff_table(int l, int d);

// A term of Sym(z^{(l-2j)} (x) I^{(j)}): positions carrying z and pairs of
// positions carrying a Kronecker delta. Every placement has equal weight.
struct Placement {
    int j = 0;
    std::vector<int> z_pos;
    std::vector<std::pair<int, int>> pairs;
};
std::vector<Placement> enumerate_placements(int l, int j);

DenseSymTensor harmonic_tensor_dense(const Vec& z, int l, std::size_t max_entries = kDenseTensorBudget);
// Zero-diagonal variant: H_l entries with pairwise distinct indices, 0 elsewhere.
DenseSymTensor k_tensor_dense(const Vec& z, int l, std::size_t max_entries = kDenseTensorBudget);

double contract_power(const DenseSymTensor& t, const Vec& w);
DenseSymTensor trace_pair(const DenseSymTensor& t, int axis1, int axis2);
DenseSymTensor rotate(const DenseSymTensor& t, const Eigen::MatrixXd& R);
double max_symmetry_defect(const DenseSymTensor& t);
Vec dense_unfolded_matvec(const DenseSymTensor& t, int a, const Vec& v);

struct UnfoldedSpec {
    int d = 0, a = 0, b = 0;
    UnfoldedSpec(int d_, int a_, int b_);
    std::size_t rows() const { return ipow(d, a); }
    std::size_t cols() const { return ipow(d, b); }
    std::size_t flat(const std::vector<int>& idx) const;
    std::vector<int> multi(std::size_t flat) const;
};

// Placement of one expansion term relative to a row/column split.
struct PlacementPlan {
    double weight = 0.0;              // c_{l,j} / (#placements of order j)
    std::vector<int> col_z;           // column axes (0..b-1) contracted with z
    std::vector<std::pair<int, int>> col_pairs;
    std::vector<int> cross_col;       // column axes carried to rows, ascending
    std::vector<int> cross_row;       // matching row axes (0..a-1)
    std::vector<int> row_z;           // row axes carrying z, ascending
    std::vector<std::pair<int, int>> row_pairs;
};

// z-independent part of Mat_{a,b}(H_l(z)).
struct UnfoldingPlan {
    int d = 0, l = 0, a = 0, b = 0;
    std::vector<double> c;
    std::vector<PlacementPlan> terms;
    UnfoldingPlan(int d, int l, int a, int b);
    std::size_t rows() const { return ipow(d, a); }
    std::size_t cols() const { return ipow(d, b); }
};

class HarmonicMatvec {
public:
    HarmonicMatvec(const Vec& z, int l, int a, int b);
    HarmonicMatvec(const Vec& z, const UnfoldingPlan& plan);
    const UnfoldingPlan& plan() const { return plan_; }
    const Vec& z() const { return z_; }
    Vec apply(const Vec& v) const;

private:
    Vec z_;
    UnfoldingPlan plan_;
};

Vec matvec_unfolded(const HarmonicMatvec& op, const Vec& v);
// out += scale * Mat_{a,b}(H_l(z)) v, generic per-sample path.
void matvec_unfolded_accumulate(const UnfoldingPlan& plan, const double* z, const double* v,
                                double scale, double* out);

struct ReproducingResult {
    double error = 0.0;           // Frobenius norm of (MC average - prediction)
    double relative = 0.0;        // error / ||prediction|| (l == k)
    double predicted_norm = 0.0;
    double standard_error = 0.0;  // MC standard error of the average, Frobenius scale
};
ReproducingResult reproducing_check(int d, int l, int k, int n_mc, std::uint64_t seed);

// Folds u into d x d^{a-1} and returns its top left singular vector.
Vec vec_extract(const Vec& u, int d);

double wick_moment(int d, const std::vector<int>& multi_index);

namespace detail {
std::vector<double> contract_axis(const std::vector<double>& t, int d, int order, int ax, const double* x);
std::vector<double> trace_axes(const std::vector<double>& t, int d, int order, int ax1, int ax2);
}  // namespace detail

}  // namespace simlab
