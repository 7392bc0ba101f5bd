#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simlab/kernels.hpp"
#include "simlab/rng.hpp"

namespace simlab {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LinkVariant { GaussianHermite, GaussianGeneric, SphericalGeneric, NormalizedWrapper, Mixture };

struct RadialLaw {
    enum class Kind { chi, fixed } kind = Kind::chi;
    double value = 1.0;
};

// y mean term coeff * r^r_power * Q_degree^{(d)}(t)
struct GegenbauerTerm {
    int degree = 0;
    double coeff = 0.0;
    int r_power = 0;
};

// Declarative spherical single-index model. The dimension is supplied at use.
// L^2-integrability of the likelihood ratio is assumed, not verified.
struct LinkSpec {
    LinkVariant variant = LinkVariant::GaussianHermite;
    // GaussianHermite
    int k = 1;
    double sigma = 0.0;
    // GaussianGeneric: function of x = r t in {hermite, abs, relu, tanh, sign, binary}.
    // hermite: sum_j coeffs[j] He_j(x). binary: y in {-1,+1} with
    // P(y = 1 | x) = (1 + clamp(sum_j coeffs[j] He_j(x), -1, 1)) / 2.
    std::string function = "hermite";
    std::vector<double> coeffs;
    double clip = 0.0;  // 0 = no clipping
    double flip = 0.0;  // sign labels: flip probability
    // SphericalGeneric
    RadialLaw radial;
    std::vector<GegenbauerTerm> terms;
    // NormalizedWrapper / Mixture. A mixture has law (1 - epsilon) first + epsilon second.
    std::shared_ptr<const LinkSpec> inner, first, second;
    double epsilon = 0.0;

    static LinkSpec gaussian_hermite(int k, double sigma);
    // Binary labels with generative exponent k: coefficient of He_k chosen so
    // that clipping only acts for |x| > 6.
    static LinkSpec hermite_binary(int k);
    static LinkSpec normalized(const LinkSpec& inner);
    static LinkSpec mixture(double epsilon, const LinkSpec& a, const LinkSpec& b);
    static LinkSpec from_json(const json& j);
    json to_json() const;
    std::string fingerprint() const;

    void validate() const;
    bool discrete() const;
    bool has_density() const;
    // Full Gaussian input x = r z with r ~ chi_d.
    bool gaussian_radius() const;
    // Exponents declared by the variant, if any.
    std::optional<int> generative_exponent() const;
    std::optional<int> information_exponent() const;

    double sample_radius(int d, Rng& rng) const;
    double sample_label(double r, double t, int d, Rng& rng) const;
    // p(y | r, t): density for continuous labels, mass for sign labels.
    double density(double y, double r, double t, int d) const;
    double log_density(double y, double r, double t, int d) const;
    double mean_label(double r, double t, int d) const;
};

struct Sample {
    double y = 0.0;
    double r = 0.0;
    Vec z;
};

struct Dataset {
    int d = 0;
    std::vector<double> y, r;
    std::vector<double> z;  // m x d, row-major
    std::optional<Vec> planted;
    std::string link_fingerprint;
    std::uint64_t seed = 0;

    std::size_t m() const { return y.size(); }
    SampleView view() const { return SampleView{z.data(), m(), d}; }
    SampleView view(std::size_t begin, std::size_t end) const {
        return SampleView{z.data() + begin * d, end - begin, d};
    }
    Sample sample(std::size_t i) const;
    Dataset slice(std::size_t begin, std::size_t end) const;
};

inline constexpr std::size_t kStreamBlock = 4096;

Dataset sample_planted(const LinkSpec& link, const Vec& w_star, std::size_t m, std::uint64_t seed, int d = 0);
Dataset sample_null(const LinkSpec& link, int d, std::size_t m, std::uint64_t seed);

void write_dataset(const Dataset& ds, std::ostream& os);
Dataset read_dataset(std::istream& is);

// Draws of (y, r, t) from the planted law with t = <w_star, z>.
struct ScalarDraws {
    std::vector<double> y, r, t;
};
ScalarDraws sample_scalar(const LinkSpec& link, int d, std::size_t n, std::uint64_t seed);

inline constexpr int kXiQuadraturePoints = 256;

double xi_eval(const LinkSpec& link, int d, int l, double y, double r, int npoints = kXiQuadraturePoints);
std::vector<double> xi_eval_all(const LinkSpec& link, int d, int lmax, double y, double r,
                                int npoints = kXiQuadraturePoints);

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};
Estimate xi_norm(const LinkSpec& link, int d, int l, std::size_t n_mc, std::uint64_t seed);
std::vector<Estimate> xi_norms(const LinkSpec& link, int d, int lmax, std::size_t n_mc, std::uint64_t seed);

struct Transformation {
    int l = 0;
    std::string kind;
    std::function<double(double, double)> fn;
    double norm = 1.0;    // L^2 norm of the raw statistic before normalization
    double kappa = 0.0;   // sup bound; 0 when unbounded
    double beta = 0.0;    // E[T(Y,R) Q_l(Z)]
    double beta_se = 0.0;
    double operator()(double y, double r) const { return fn(y, r); }
    std::vector<double> apply(const Dataset& ds) const;
};

inline constexpr double kDefaultKappa = 10.0;

Transformation build_transformation(const LinkSpec& link, int d, int l, double kappa, std::size_t n_cal,
                                    std::uint64_t seed);
Transformation csq_transformation(const LinkSpec& link, int d, int l, std::size_t n_cal, std::uint64_t seed);
// T(y,r) proportional to (y/||y||) beta_{k*,l}(r), unit L^2 norm.
Transformation hermite_partial_trace_transformation(const LinkSpec& link, int d, int k_star, int l,
                                                     std::size_t n_cal, std::uint64_t seed);
// T(y,r) = y/||y||.
Transformation label_transformation(const LinkSpec& link, int d, int l, std::size_t n_cal, std::uint64_t seed);

LinkSpec mixture_link(int k, int d);

}  // namespace simlab
