#ifndef DLGEN_CORE_HPP
#define DLGEN_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace dlgen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ----------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: wrong shapes, out-of-range orders, non-finite data.
class InvalidInput : public Error {
public:
  using Error::Error;
};

/// A combinatorial enumeration would exceed its tractability guard.
class SizeLimit : public Error {
public:
  using Error::Error;
};

/// The hypotheses of a bound or lemma do not hold for the given inputs.
class Inapplicable : public Error {
public:
  using Error::Error;
};

class NumericalError : public Error {
public:
  using Error::Error;
};

class SearchFailure : public Error {
public:
  using Error::Error;
};

class DegeneratePair : public Error {
public:
  using Error::Error;
};

inline constexpr double kColumnNormTolerance = 1e-9;

// ----------------------------------------------------------------------
// Domain types
// ----------------------------------------------------------------------

/// Column-atom dictionary. Column norms are expected in [1, gamma]; use
/// validate_dictionary() to check, the constructor only checks shape.
class Dictionary {
public:
  Dictionary() = default;

  explicit Dictionary(Matrix atoms, double gamma = 1.0)
      : atoms_(std::move(atoms)), gamma_(gamma) {
    if (atoms_.rows() < 1 || atoms_.cols() < 1)
      throw InvalidInput("dictionary must have n >= 1 rows and p >= 1 atoms");
    if (!(gamma_ >= 1.0))
      throw InvalidInput("dictionary gamma must be >= 1");
  }

  const Matrix& atoms() const noexcept { return atoms_; }
  double gamma() const noexcept { return gamma_; }
  Index dim() const noexcept { return atoms_.rows(); }
  Index size() const noexcept { return atoms_.cols(); }
  auto atom(Index i) const { return atoms_.col(i); }

private:
  Matrix atoms_;
  double gamma_ = 1.0;
};

/// Signals are plain vectors; unit-sphere membership is checked where a
/// result depends on it.
using Signal = Vector;

inline bool is_unit(const Signal& x, double tol = 1e-9) {
  return std::abs(x.norm() - 1.0) <= tol;
}

struct CoeffVector {
  Vector values;

  CoeffVector() = default;
  explicit CoeffVector(Vector v) : values(std::move(v)) {}
  static CoeffVector zeros(Index p) { return CoeffVector(Vector::Zero(p)); }

  std::vector<Index> support() const {
    std::vector<Index> s;
    for (Index i = 0; i < values.size(); ++i)
      if (values[i] != 0.0) s.push_back(i);
    return s;
  }
  Index l0() const { return static_cast<Index>(support().size()); }
  double l1() const { return values.lpNorm<1>(); }
};

struct HardK {
  int k;
};

struct L1Ball {
  double lambda;
};

/// Feasible coefficient set: at most k nonzeros, or l1 norm at most lambda.
using SparsityConstraint = std::variant<HardK, L1Ball>;

inline std::string describe(const SparsityConstraint& c) {
  if (auto h = std::get_if<HardK>(&c)) return "HardK(" + std::to_string(h->k) + ")";
  return "L1Ball(" + std::to_string(std::get<L1Ball>(c).lambda) + ")";
}

// ----------------------------------------------------------------------
// Norms
// ----------------------------------------------------------------------

/// Largest Euclidean column norm. Dominates the l1 -> l2 induced norm:
/// ||M a||_2 <= me_norm(M) * ||a||_1.
template <typename Derived>
double me_norm(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() == 0 || m.cols() == 0) throw InvalidInput("me_norm of an empty matrix");
  return m.colwise().norm().maxCoeff();
}

inline double me_norm(const Dictionary& d) { return me_norm(d.atoms()); }

// ----------------------------------------------------------------------
// Validation
// ----------------------------------------------------------------------

using ValidationReport = std::vector<std::string>;

inline ValidationReport validate_dictionary(const Dictionary& d, bool normalized) {
  ValidationReport report;
  const Matrix& a = d.atoms();
  if (!a.allFinite()) report.emplace_back("non-finite entry");
  const double hi = normalized ? 1.0 : d.gamma();
  if (normalized && d.gamma() != 1.0) report.emplace_back("normalized dictionary must have gamma = 1");
  for (Index j = 0; j < a.cols(); ++j) {
    const double nrm = a.col(j).norm();
    if (!std::isfinite(nrm)) continue;
    if (nrm < 1.0 - kColumnNormTolerance)
      report.push_back("column " + std::to_string(j) + ": column norm below 1 (" + std::to_string(nrm) + ")");
    else if (nrm > hi + kColumnNormTolerance)
      report.push_back("column " + std::to_string(j) + ": column norm above " +
                       (normalized ? std::string("1") : std::string("gamma")) + " (" + std::to_string(nrm) + ")");
  }
  return report;
}

inline void require_normalized(const Dictionary& d, const char* what) {
  auto report = validate_dictionary(d, true);
  if (!report.empty()) throw InvalidInput(std::string(what) + ": dictionary not normalized: " + report.front());
}

/// Rescale every column to unit norm. Columns with norm below 1e-12 are
/// left untouched; callers decide how to replace them.
inline Matrix normalize_columns(Matrix m) {
  for (Index j = 0; j < m.cols(); ++j) {
    const double nrm = m.col(j).norm();
    if (nrm >= 1e-12) m.col(j) /= nrm;
  }
  return m;
}

// ----------------------------------------------------------------------
// Randomness
// ----------------------------------------------------------------------

using Rng = std::mt19937_64;

/// Generator for substream `stream` of `master`. Streams derived from the
/// same master seed are independent of evaluation order.
inline Rng substream(std::uint64_t master, std::uint64_t stream, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

/// Deterministic 64-bit seed for substream `stream`, recorded in outputs.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t salt = 0) {
  Rng r = substream(master, stream, salt);
  return r();
}

inline Vector gaussian_vector(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

/// Uniform point on S^{n-1} as a normalized standard Gaussian vector.
inline Signal sample_uniform_sphere(Index n, Rng& rng) {
  if (n < 1) throw InvalidInput("sphere dimension must be >= 1");
  for (;;) {
    Vector v = gaussian_vector(n, rng);
    const double nrm = v.norm();
    if (nrm >= 1e-12) return v / nrm;
  }
}

/// p independent uniform unit atoms.
inline Dictionary random_sphere_dictionary(Index n, Index p, Rng& rng) {
  Matrix m(n, p);
  for (Index j = 0; j < p; ++j) m.col(j) = sample_uniform_sphere(n, rng);
  return Dictionary(std::move(m));
}

// ----------------------------------------------------------------------
// Combinatorics
// ----------------------------------------------------------------------

/// Binomial coefficient saturating at `cap + 1` so callers can compare
/// against a guard without overflow.
inline double binomial_capped(Index n, Index k, double cap) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (Index i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (r > cap) return cap + 1.0;
  }
  return std::round(r);
}

/// Advance `idx` (strictly increasing, values < n) to the next k-subset in
/// lexicographic order. Returns false after the last subset.
inline bool next_combination(std::vector<Index>& idx, Index n) {
  const Index k = static_cast<Index>(idx.size());
  Index i = k - 1;
  while (i >= 0 && idx[i] == n - k + i) --i;
  if (i < 0) return false;
  ++idx[i];
  for (Index j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  return true;
}

}  // namespace dlgen

#endif  // DLGEN_CORE_HPP
