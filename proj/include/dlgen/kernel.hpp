#ifndef DLGEN_KERNEL_HPP
#define DLGEN_KERNEL_HPP

#include "dlgen/bounds.hpp"
#include "dlgen/coders.hpp"
#include "dlgen/coherence.hpp"
#include "dlgen/core.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Dictionary learning quantities computed only through kernel evaluations
// kappa(x, y) = <phi(x), phi(y)>. Representation-space points are vectors.

namespace dlgen {

/// Hoelder metadata: |kappa(x, y) - kappa(x + h, y)| <= L ||h||^alpha.
struct KernelSmoothness {
  double L = 0.0;
  double alpha = 0.0;
};

struct KernelFn {
  std::string name;
  std::function<double(const Vector&, const Vector&)> eval;
  std::optional<KernelSmoothness> smoothness;
  std::optional<double> feature_norm_cap;  // sup sqrt(kappa(x, x)) on the domain

  double operator()(const Vector& x, const Vector& y) const { return eval(x, y); }
};

inline KernelFn linear_kernel() {
  // Smoothness and norm cap hold on the unit ball.
  return {"linear", [](const Vector& x, const Vector& y) { return x.dot(y); }, KernelSmoothness{1.0, 1.0}, 1.0};
}

/// exp(-||x - y||^2 / (2 sigma^2)). Unit feature norms; Lipschitz in each
/// argument with constant e^{-1/2} / sigma.
inline KernelFn gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("Gaussian bandwidth must be > 0");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  return {"gaussian:" + std::to_string(sigma),
          [inv](const Vector& x, const Vector& y) { return std::exp(-(x - y).squaredNorm() * inv); },
          KernelSmoothness{std::exp(-0.5) / sigma, 1.0}, 1.0};
}

/// (<x, y> + offset)^degree; smoothness and norm cap stated on the unit ball.
inline KernelFn polynomial_kernel(int degree, double offset = 1.0) {
  if (degree < 1) throw InvalidInput("polynomial degree must be >= 1");
  if (!(offset >= 0.0)) throw InvalidInput("polynomial offset must be >= 0");
  const double L = degree * std::pow(1.0 + offset, degree - 1);
  return {"poly:" + std::to_string(degree),
          [degree, offset](const Vector& x, const Vector& y) { return std::pow(x.dot(y) + offset, degree); },
          KernelSmoothness{L, 1.0}, std::pow(1.0 + offset, 0.5 * degree)};
}

/// Parse "linear", "gaussian:SIGMA" or "poly:DEG".
inline KernelFn parse_kernel(const std::string& spec) {
  if (spec == "linear") return linear_kernel();
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string kind = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    try {
      if (kind == "gaussian") return gaussian_kernel(std::stod(arg));
      if (kind == "poly") return polynomial_kernel(std::stoi(arg));
    } catch (const std::logic_error&) {
      throw InvalidInput("bad kernel parameter in '" + spec + "'");
    }
  }
  throw InvalidInput("unknown kernel '" + spec + "' (expected linear, gaussian:SIGMA or poly:DEG)");
}

/// Gram matrix of the columns of `points`; only the upper triangle is evaluated.
inline Matrix kernel_gram(const Matrix& points, const KernelFn& kf) {
  const Index p = points.cols();
  Matrix g(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = i; j < p; ++j) {
      const double v = kf(points.col(i), points.col(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  return g;
}

/// Pre-image atoms (columns of `points`) with their cached Gram matrix.
class KernelDictionary {
public:
  KernelDictionary(Matrix points, const KernelFn& kf) : points_(std::move(points)) {
    if (points_.rows() < 1 || points_.cols() < 1) throw InvalidInput("kernel dictionary needs at least one point");
    gram_ = kernel_gram(points_, kf);
  }

  const Matrix& points() const noexcept { return points_; }
  const Matrix& gram() const noexcept { return gram_; }
  Index size() const noexcept { return points_.cols(); }
  Index dim() const noexcept { return points_.rows(); }

  /// Feature norms must lie in [1, gamma] before Babel-based bounds apply.
  ValidationReport validate_for_bounds(double gamma) const {
    ValidationReport report;
    for (Index i = 0; i < size(); ++i) {
      const double g = gram_(i, i);
      if (g < 1.0 - kColumnNormTolerance || g > gamma * gamma + kColumnNormTolerance)
        report.push_back("atom " + std::to_string(i) + ": squared feature norm " + std::to_string(g) +
                         " outside [1, gamma^2]");
    }
    return report;
  }

private:
  Matrix points_;
  Matrix gram_;
};

inline constexpr double kPsdFloor = -1e-8;

namespace detail {

inline void check_point(const KernelDictionary& d, const Vector& x) {
  if (x.size() != d.dim()) throw InvalidInput("point dimension does not match the kernel dictionary");
}

inline Vector kernel_column(const KernelDictionary& d, const Vector& x, const KernelFn& kf) {
  Vector kx(d.size());
  for (Index i = 0; i < d.size(); ++i) kx[i] = kf(x, d.points().col(i));
  return kx;
}

// sqrt of a^T G a + kxx - 2 a^T kx over the support of a.
inline double feature_residual(const KernelDictionary& d, const std::vector<Index>& support, const Vector& coeffs,
                               double kxx, const Vector& kx_support) {
  double q = kxx;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double ai = coeffs[static_cast<Index>(i)];
    q -= 2.0 * ai * kx_support[static_cast<Index>(i)];
    for (std::size_t j = 0; j < support.size(); ++j)
      q += ai * coeffs[static_cast<Index>(j)] * d.gram()(support[i], support[j]);
  }
  if (q < kPsdFloor) throw NumericalError("kernel quadratic form is negative (" + std::to_string(q) + ")");
  return std::sqrt(std::max(0.0, q));
}

}  // namespace detail

/// ||(Phi D) a - phi(x)||_H from kernel values only. Uses the cached Gram,
/// so a k-sparse `a` costs O(k) fresh kernel evaluations.
inline double kernel_repr_error(const Vector& x, const CoeffVector& a, const KernelDictionary& d, const KernelFn& kf) {
  detail::check_point(d, x);
  if (a.values.size() != d.size()) throw InvalidInput("coefficient length does not match the kernel dictionary");
  const auto support = a.support();
  Vector coeffs(static_cast<Index>(support.size()));
  Vector kx(static_cast<Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) {
    coeffs[static_cast<Index>(i)] = a.values[support[i]];
    kx[static_cast<Index>(i)] = kf(x, d.points().col(support[i]));
  }
  return detail::feature_residual(d, support, coeffs, kf(x, x), kx);
}

/// Orthogonal matching pursuit in feature space: correlations are
/// kappa(x, d_i) - sum_j a_j G(j, i), refits solve G_SS a = kappa(x, d_S).
inline CodingResult kernel_greedy_ksparse(const Vector& x, const KernelDictionary& d, int k, const KernelFn& kf) {
  detail::check_point(d, x);
  const Index p = d.size();
  if (k < 1 || k > p) throw InvalidInput("kernel greedy k outside [1, p]");
  const Vector kx = detail::kernel_column(d, x, kf);
  const double kxx = kf(x, x);
  const Matrix& g = d.gram();
  CodingResult res;
  res.method = CodingMethod::greedy;
  std::vector<Index> support;
  std::vector<bool> used(static_cast<std::size_t>(p), false);
  Vector coeffs;
  for (int round = 0; round < k; ++round) {
    Index pick = -1;
    double best = -1.0;
    for (Index j = 0; j < p; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      double c = kx[j];
      for (std::size_t s = 0; s < support.size(); ++s) c -= coeffs[static_cast<Index>(s)] * g(support[s], j);
      if (std::abs(c) > best) {
        best = std::abs(c);
        pick = j;
      }
    }
    used[static_cast<std::size_t>(pick)] = true;
    support.push_back(pick);
    const Index s = static_cast<Index>(support.size());
    Matrix gs(s, s);
    Vector ks(s);
    for (Index i = 0; i < s; ++i) {
      ks[i] = kx[support[static_cast<std::size_t>(i)]];
      for (Index j = 0; j < s; ++j) gs(i, j) = g(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(j)]);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(gs);
    if (qr.rank() == s) {
      coeffs = qr.solve(ks);
    } else {
      gs.diagonal().array() += kRidge;
      coeffs = gs.ldlt().solve(ks);
      res.regularized = true;
    }
    res.trace.push_back(detail::feature_residual(d, support, coeffs, kxx, ks));
  }
  res.coeffs = detail::scatter(p, support, coeffs);
  res.error = res.trace.back();
  res.iterations = k;
  return res;
}

/// Babel function of the feature-space atoms, from raw Gram entries.
inline BabelValue feature_babel(const KernelDictionary& d, int k) { return babel_from_gram(d.gram(), k); }

/// max over pairs of ||phi(x) - phi(y)||_H - sqrt(2L) ||x - y||^{alpha/2}.
/// Nonpositive when the kernel satisfies its declared smoothness.
inline double holder_feature_check(const KernelFn& kf, const std::vector<std::pair<Vector, Vector>>& pairs) {
  if (!kf.smoothness) throw InvalidInput("kernel '" + kf.name + "' carries no smoothness metadata");
  if (pairs.empty()) throw InvalidInput("holder_feature_check needs at least one pair");
  const double L = kf.smoothness->L;
  const double alpha = kf.smoothness->alpha;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& [x, y] : pairs) {
    const double sq = kf(x, x) - 2.0 * kf(x, y) + kf(y, y);
    const double feature_dist = std::sqrt(std::max(0.0, sq));
    const double bound = std::sqrt(2.0 * L) * std::pow((x - y).norm(), 0.5 * alpha);
    worst = std::max(worst, feature_dist - bound);
  }
  return worst;
}

struct KernelCoverInputs {
  double C = 0.0;  // representation space has eps covers of size (C / eps)^n
  Index n = 0;
  Index p = 0;
  double lambda_or_k = 0.0;
  double gamma = 1.0;
  double L = 0.0;
  double alpha = 0.0;
  double eps = 0.0;
  BoundFamily family = BoundFamily::l1;
  double delta = 0.0;
};

/// Log cardinality of the feature-space error-class cover:
/// l1: (C (lambda gamma L / eps)^{1/alpha})^{np};
/// ksparse: (C (k gamma^2 L / (eps (1 - delta)))^{1/alpha})^{np}. Clamped at 0.
inline double kernel_cover_log(const KernelCoverInputs& in) {
  if (!(in.eps > 0.0)) throw InvalidInput("kernel cover needs eps > 0");
  if (!(in.C > 0.0) || !(in.L > 0.0) || !(in.alpha > 0.0) || !(in.gamma > 0.0) || !(in.lambda_or_k > 0.0))
    throw InvalidInput("kernel cover needs C, L, alpha, gamma, lambda/k > 0");
  double ratio = 0.0;
  if (in.family == BoundFamily::l1) {
    ratio = in.lambda_or_k * in.gamma * in.L / in.eps;
  } else {
    if (!(in.delta < 1.0)) throw Inapplicable("kernel k-sparse cover needs delta < 1");
    ratio = in.lambda_or_k * in.gamma * in.gamma * in.L / (in.eps * (1.0 - in.delta));
  }
  const double per_coord = std::log(in.C) + std::log(ratio) / in.alpha;
  return std::max(0.0, static_cast<double>(in.n * in.p) * per_coord);
}

enum class KernelBoundVariant { maurer_k, slow };

/// Feature-space k-sparse generalization bounds. `maurer_k` is the
/// dimension-free squared-error bound (needs feature norms <= 1); `slow` uses
/// the representation-space cover (C, n), Hoelder (L, alpha) and norm cap gamma.
inline BoundReport kernel_gen_bound(const BoundInputs& in, KernelBoundVariant variant) {
  detail::check_common(in);
  const int k = detail::require(in.k, "k");
  const double delta = detail::require(in.delta, "delta");
  if (k < 1) throw InvalidInput("k must be >= 1");
  if (variant == KernelBoundVariant::maurer_k) {
    BoundInputs sub = in;
    sub.lambda = static_cast<double>(k) / (1.0 - delta);
    BoundReport r = l1_generalization_bound(sub, BoundVariant::maurer);
    r.name = "kernel-maurer-k";
    return r;
  }
  detail::check_dims(in);
  const double C = detail::require(in.C, "C");
  const double L = detail::require(in.L, "L");
  const double alpha = detail::require(in.alpha, "alpha");
  const double gamma = detail::require(in.gamma, "gamma");
  if (!(C > 0.0) || !(L > 0.0) || !(alpha > 0.0) || !(gamma > 0.0))
    throw InvalidInput("kernel slow bound needs C, L, alpha, gamma > 0");
  const double np = static_cast<double>(in.n * in.p);
  const double log_arg = std::sqrt(in.m) * std::pow(C, alpha) * k * gamma * gamma * L / (1.0 - delta);
  const double log_term = std::log(log_arg);
  if (!(log_term > 0.0)) throw Inapplicable("kernel slow bound needs its log argument > 1");
  BoundReport r;
  r.name = "kernel-slow";
  r.parts = {{"cover-term", gamma * std::sqrt(np * log_term / (2.0 * alpha * in.m))},
             {"confidence-term", gamma * std::sqrt(in.x / (2.0 * in.m))},
             {"discretization-term", std::sqrt(4.0 / in.m)}};
  return detail::finish(std::move(r));
}

}  // namespace dlgen

#endif  // DLGEN_KERNEL_HPP
