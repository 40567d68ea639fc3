#ifndef DLGEN_BOUNDS_HPP
#define DLGEN_BOUNDS_HPP

#include "dlgen/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <nlohmann/json.hpp>

// Closed-form covering-number and generalization-bound calculators.
// All logarithms are natural.

namespace dlgen {

/// Loss on which a bound is stated: plain errors h, or squared errors h^2.
enum class LossScale { plain, squared };

inline const char* to_string(LossScale s) { return s == LossScale::plain ? "plain" : "squared"; }

enum class BoundFamily { l1, ksparse };
enum class BoundVariant { maurer, slow, fast };

inline const char* to_string(BoundFamily f) { return f == BoundFamily::l1 ? "l1" : "ksparse"; }

inline const char* to_string(BoundVariant v) {
  switch (v) {
    case BoundVariant::maurer: return "maurer";
    case BoundVariant::slow: return "slow";
    case BoundVariant::fast: return "fast";
  }
  return "?";
}

struct BoundInputs {
  Index n = 0;
  Index p = 0;
  double m = 0.0;  // sample count
  double x = 0.0;  // bound holds with probability >= 1 - e^{-x}
  std::optional<int> k;
  std::optional<double> lambda;
  std::optional<double> delta;  // Babel bound on mu_{k-1}
  std::optional<double> gamma;  // column / feature norm cap
  std::optional<double> K;
  std::optional<double> alpha;
  std::optional<double> B;  // function range [0, B]
  std::optional<double> C;  // cover law (C / eps)^d
  std::optional<double> d;
  std::optional<double> L;  // Hoelder constant
};

struct BoundPart {
  std::string label;
  double value = 0.0;
};

/// E <= multiplier * E_m + additive, on the loss scale `scale`.
struct BoundReport {
  std::string name;
  double multiplier = 1.0;
  double additive = 0.0;
  std::vector<BoundPart> parts;
  bool vacuous = false;
  LossScale scale = LossScale::plain;
  std::string active_branch;  // fast-rate bounds only

  double evaluate(double empirical) const { return multiplier * empirical + additive; }
};

namespace detail {

template <typename T>
T require(const std::optional<T>& v, const char* name) {
  if (!v) throw InvalidInput(std::string("bound input '") + name + "' is required");
  return *v;
}

inline void check_common(const BoundInputs& in) {
  if (!(in.m >= 1.0)) throw InvalidInput("bound input m must be >= 1");
  if (!(in.x > 0.0)) throw InvalidInput("bound input x must be > 0");
  if (in.delta && !(*in.delta < 1.0)) throw Inapplicable("delta must be < 1");
  if (in.K && !(*in.K > 1.0)) throw InvalidInput("K must be > 1");
}

inline void check_dims(const BoundInputs& in) {
  if (in.n < 1 || in.p < 1) throw InvalidInput("bound inputs n and p must be >= 1");
}

inline BoundReport finish(BoundReport r) {
  double total = 0.0;
  for (const auto& part : r.parts) total += part.value;
  r.additive = total;
  r.vacuous = r.additive >= 1.0;
  return r;
}

}  // namespace detail

// ----------------------------------------------------------------------
// Covering numbers (log cardinality, clamped at a single-element cover)
// ----------------------------------------------------------------------

/// log of the (4 lambda / eps)^{np} cover of the l1-constrained error class.
inline double log_cover_l1(Index n, Index p, double lambda, double eps) {
  if (!(eps > 0.0) || !(lambda > 0.0)) throw InvalidInput("log_cover_l1 needs eps > 0 and lambda > 0");
  return std::max(0.0, static_cast<double>(n * p) * std::log(4.0 * lambda / eps));
}

/// log of the (4k / (eps (1 - delta)))^{np} cover of the k-sparse error class.
inline double log_cover_ksparse(Index n, Index p, int k, double delta, double eps) {
  if (!(eps > 0.0) || k < 1 || !(delta >= 0.0)) throw InvalidInput("log_cover_ksparse needs eps > 0, k >= 1, delta >= 0");
  if (!(delta < 1.0)) throw Inapplicable("log_cover_ksparse needs delta < 1");
  return std::max(0.0, static_cast<double>(n * p) * std::log(4.0 * k / (eps * (1.0 - delta))));
}

// ----------------------------------------------------------------------
// Generic slow / fast rate lemmas
// ----------------------------------------------------------------------

/// Uniform deviation for a class of [0, B] functions with sup-norm covers of
/// size (C / eps)^d, discretized at eps = 1/sqrt(m).
inline BoundReport slow_rate_generic(double B, double C, double d, double m, double x) {
  if (!(B > 0.0) || !(C > 0.0) || !(d > 0.0)) throw InvalidInput("slow rate needs B, C, d > 0");
  if (!(m >= 1.0) || !(x > 0.0)) throw InvalidInput("slow rate needs m >= 1 and x > 0");
  const double log_cover = d * std::log(C * std::sqrt(m));
  // (C sqrt(m))^d > e / B^2
  if (!(log_cover > 1.0 - 2.0 * std::log(B)))
    throw Inapplicable("slow rate needs (C sqrt(m))^d > e / B^2");
  BoundReport r;
  r.name = "slow-rate";
  r.parts = {{"cover-term", B * std::sqrt(log_cover / (2.0 * m))},
             {"confidence-term", B * std::sqrt(x / (2.0 * m))},
             {"discretization-term", std::sqrt(4.0 / m)}};
  return detail::finish(std::move(r));
}

/// Localized-complexity fast rate for [0,1] classes with L2 covers (C/eps)^d:
/// E f <= K/(K-1) E_m f + 6K max{...} + (11x + 5K)/m.
inline BoundReport fast_rate_generic(double C, double d, double m, double x, double K, double alpha) {
  if (!(C > 2.0)) throw Inapplicable("fast rate needs C > 2, got C = " + std::to_string(C));
  if (!(K > 1.0)) throw InvalidInput("fast rate needs K > 1");
  if (!(alpha > 0.0)) throw InvalidInput("fast rate needs alpha > 0");
  if (!(d > 0.0) || !(m >= 1.0) || !(x > 0.0)) throw InvalidInput("fast rate needs d > 0, m >= 1, x > 0");
  const double branches[3] = {alpha * C * C / (2.0 * m),
                              480.0 * 480.0 * (d + 1.0) * std::log(m / alpha) / m,
                              (20.0 + 22.0 * std::log(m)) / m};
  static const char* names[3] = {"cover-radius", "entropy", "log-m"};
  const auto* top = std::max_element(std::begin(branches), std::end(branches));
  const auto which = static_cast<std::size_t>(top - std::begin(branches));
  BoundReport r;
  r.name = "fast-rate";
  r.multiplier = K / (K - 1.0);
  r.active_branch = names[which];
  r.parts = {{std::string("localization-term[") + names[which] + "]", 6.0 * K * *top},
             {"confidence-term", 11.0 * x / m},
             {"multiplier-term", 5.0 * K / m}};
  return detail::finish(std::move(r));
}

// ----------------------------------------------------------------------
// Dictionary-learning bounds
// ----------------------------------------------------------------------

namespace detail {

// Dimension-free bound on squared errors for l1-bounded coefficients.
inline BoundReport maurer_l1(Index p, double lambda, double m, double x) {
  const double inner = 16.0 * m * lambda * lambda;
  if (!(inner >= 1.0)) throw Inapplicable("Maurer bound needs 16 m lambda^2 >= 1");
  const double pp = static_cast<double>(p);
  const double term = 14.0 * lambda + 0.5 * std::sqrt(std::log(inner));
  BoundReport r;
  r.name = "maurer";
  r.scale = LossScale::squared;
  r.parts = {{"complexity-term", std::sqrt(pp * pp * term * term / m)}, {"confidence-term", std::sqrt(x / (2.0 * m))}};
  return finish(std::move(r));
}

}  // namespace detail

/// Generalization bounds over dictionaries with unit columns and
/// ||a||_1 <= lambda. `maurer` is on squared errors, `slow`/`fast` on plain errors.
inline BoundReport l1_generalization_bound(const BoundInputs& in, BoundVariant variant) {
  detail::check_common(in);
  const double lambda = detail::require(in.lambda, "lambda");
  if (!(lambda > 0.0)) throw InvalidInput("lambda must be > 0");
  if (in.p < 1) throw InvalidInput("p must be >= 1");
  BoundReport r;
  switch (variant) {
    case BoundVariant::maurer:
      r = detail::maurer_l1(in.p, lambda, in.m, in.x);
      break;
    case BoundVariant::slow:
      detail::check_dims(in);
      r = slow_rate_generic(1.0, 4.0 * lambda, static_cast<double>(in.n * in.p), in.m, in.x);
      break;
    case BoundVariant::fast:
      detail::check_dims(in);
      // alpha (4 lambda)^2 / 2m = 8 alpha lambda^2 / m
      r = fast_rate_generic(4.0 * lambda, static_cast<double>(in.n * in.p), in.m, in.x,
                            detail::require(in.K, "K"), detail::require(in.alpha, "alpha"));
      break;
  }
  r.name = std::string("l1-") + to_string(variant);
  return r;
}

/// k-sparse bounds for dictionaries with mu_{k-1}(D) <= delta < 1, obtained
/// from the l1 bounds with lambda = k / (1 - delta).
inline BoundReport ksparse_generalization_bound(const BoundInputs& in, BoundVariant variant) {
  detail::check_common(in);
  const int k = detail::require(in.k, "k");
  const double delta = detail::require(in.delta, "delta");
  if (k < 1) throw InvalidInput("k must be >= 1");
  if (!(delta >= 0.0)) throw InvalidInput("delta must be >= 0");
  BoundInputs sub = in;
  sub.lambda = static_cast<double>(k) / (1.0 - delta);
  BoundReport r = l1_generalization_bound(sub, variant);
  r.name = std::string("ksparse-") + to_string(variant);
  return r;
}

inline BoundReport generalization_bound(const BoundInputs& in, BoundFamily family, BoundVariant variant) {
  return family == BoundFamily::l1 ? l1_generalization_bound(in, variant) : ksparse_generalization_bound(in, variant);
}

struct FastChoice {
  double K = 0.0;
  double alpha = 0.0;
  BoundReport report;
  double objective = 0.0;
};

/// Grid search for (K, alpha) minimizing multiplier * empirical + additive of
/// the fast-rate bound. Ties go to smaller K, then smaller alpha.
inline FastChoice optimize_fast_params(const BoundInputs& in, BoundFamily family, std::vector<double> K_grid,
                                       std::vector<double> alpha_grid, double empirical) {
  if (K_grid.empty() || alpha_grid.empty()) throw InvalidInput("optimize_fast_params needs nonempty grids");
  std::sort(K_grid.begin(), K_grid.end());
  std::sort(alpha_grid.begin(), alpha_grid.end());
  std::optional<FastChoice> best;
  std::string last_error;
  for (double K : K_grid) {
    for (double alpha : alpha_grid) {
      BoundInputs trial = in;
      trial.K = K;
      trial.alpha = alpha;
      try {
        BoundReport r = generalization_bound(trial, family, BoundVariant::fast);
        const double obj = r.evaluate(empirical);
        if (!best || obj < best->objective) best = FastChoice{K, alpha, std::move(r), obj};
      } catch (const Error& e) {
        last_error = e.what();
      }
    }
  }
  if (!best) throw Inapplicable("no fast-rate grid point is applicable: " + last_error);
  return *best;
}

// ----------------------------------------------------------------------
// Random-dictionary Babel tail
// ----------------------------------------------------------------------

/// Upper bound on P(mu_k(D) > 1/2) for p uniform random unit atoms in R^n:
/// 1 / (exp((n - 2) / (10 k ln p)^2) - 1), clamped to [0, 1].
inline double random_babel_tail_bound(Index n, Index p, int k) {
  if (n < 1 || p < 2 || k < 1) throw InvalidInput("random Babel bound needs n >= 1, p >= 2, k >= 1");
  const double scale = 10.0 * k * std::log(static_cast<double>(p));
  const double expo = static_cast<double>(n - 2) / (scale * scale);
  if (!(expo > 0.0)) return 1.0;
  return std::clamp(1.0 / std::expm1(expo), 0.0, 1.0);
}

// ----------------------------------------------------------------------
// Log-integral inequality used by the entropy-integral bound
// ----------------------------------------------------------------------

/// int_0^x sqrt(ln(gamma / eps)) d eps, by adaptive Gauss-Kronrod after the
/// substitution eps = x e^{-u}, which removes the endpoint singularity.
inline double log_integral(double gamma, double x) {
  if (!(x > 0.0)) return 0.0;
  const double base = std::log(gamma / x);
  if (base < 0.0) throw InvalidInput("log_integral needs gamma >= x");
  auto f = [base](double u) { return std::sqrt(base + u) * std::exp(-u); };
  double err = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, 0.0, std::numeric_limits<double>::infinity(), 20, 1e-14, &err);
  if (!(x * err <= 1e-10)) throw NumericalError("log_integral quadrature did not reach 1e-10");
  return x * val;
}

/// max over the grid of int_0^x sqrt(ln(gamma/eps)) d eps - 2 x sqrt(ln(gamma/x)).
/// Nonpositive whenever gamma >= e^{1/2} and x in (0, 1].
inline double log_integral_check(double gamma, const std::vector<double>& x_grid) {
  if (!(gamma >= std::exp(0.5))) throw InvalidInput("log_integral_check needs gamma >= e^{1/2}");
  if (x_grid.empty()) throw InvalidInput("log_integral_check needs a nonempty grid");
  double worst = -std::numeric_limits<double>::infinity();
  for (double x : x_grid) {
    if (!(x > 0.0 && x <= 1.0)) throw InvalidInput("log_integral_check grid values must lie in (0, 1]");
    const double lhs = log_integral(gamma, x);
    const double rhs = 2.0 * x * std::sqrt(std::log(gamma / x));
    worst = std::max(worst, lhs - rhs);
  }
  return worst;
}

// ----------------------------------------------------------------------
// JSON
// ----------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const BoundReport& r) {
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& part : r.parts) parts.push_back({{"label", part.label}, {"value", part.value}});
  j = {{"name", r.name},
       {"multiplier", r.multiplier},
       {"additive", r.additive},
       {"parts", parts},
       {"vacuous", r.vacuous},
       {"loss_scale", to_string(r.scale)},
       {"log_base", "natural"}};
  if (!r.active_branch.empty()) j["active_branch"] = r.active_branch;
}

}  // namespace dlgen

#endif  // DLGEN_BOUNDS_HPP
