#ifndef DLGEN_CODERS_HPP
#define DLGEN_CODERS_HPP

#include "dlgen/coherence.hpp"
#include "dlgen/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace dlgen {

enum class CodingMethod { greedy, exact, l1_projection };

inline const char* to_string(CodingMethod m) {
  switch (m) {
    case CodingMethod::greedy: return "greedy";
    case CodingMethod::exact: return "exact";
    case CodingMethod::l1_projection: return "l1-projection";
  }
  return "?";
}

/// Outcome of one sparse coding call. `error` is ||D coeffs - x||_2.
struct CodingResult {
  CoeffVector coeffs;
  double error = 0.0;
  CodingMethod method = CodingMethod::greedy;
  bool regularized = false;          // a rank-deficient support was solved with ridge
  int iterations = 0;                // greedy rounds or l1 solver iterations
  double residual = 0.0;             // l1 solver fixed-point residual
  std::vector<double> trace;         // greedy: error after each round
};

inline constexpr double kRidge = 1e-12;
inline constexpr double kExactSupportGuard = 1e6;

// ----------------------------------------------------------------------
// Least squares on a support
// ----------------------------------------------------------------------

struct SupportFit {
  Vector coeffs;  // length |support|
  double error = 0.0;
  bool regularized = false;
};

/// min ||D_S c - x|| by column-pivoting QR; falls back to ridge 1e-12 on the
/// normal equations when D_S is rank deficient.
inline SupportFit fit_support(const Matrix& atoms, const Signal& x, const std::vector<Index>& support) {
  const Index s = static_cast<Index>(support.size());
  Matrix sub(atoms.rows(), s);
  for (Index j = 0; j < s; ++j) sub.col(j) = atoms.col(support[static_cast<std::size_t>(j)]);
  SupportFit fit;
  Eigen::ColPivHouseholderQR<Matrix> qr(sub);
  if (qr.rank() == s) {
    fit.coeffs = qr.solve(x);
  } else {
    Matrix normal = sub.transpose() * sub;
    normal.diagonal().array() += kRidge;
    fit.coeffs = normal.ldlt().solve(sub.transpose() * x);
    fit.regularized = true;
  }
  fit.error = (sub * fit.coeffs - x).norm();
  return fit;
}

namespace detail {

inline void check_signal(const Dictionary& d, const Signal& x) {
  if (x.size() != d.dim())
    throw InvalidInput("signal length " + std::to_string(x.size()) + " does not match dictionary dimension " +
                       std::to_string(d.dim()));
}

inline CoeffVector scatter(Index p, const std::vector<Index>& support, const Vector& c) {
  CoeffVector out = CoeffVector::zeros(p);
  for (std::size_t j = 0; j < support.size(); ++j) out.values[support[j]] = c[static_cast<Index>(j)];
  return out;
}

}  // namespace detail

// ----------------------------------------------------------------------
// k-sparse coders
// ----------------------------------------------------------------------

/// Orthogonal matching pursuit. Each round adds the atom with the largest
/// |<residual, d_i>| (lowest index on ties) and refits on the support.
inline CodingResult greedy_ksparse(const Dictionary& d, const Signal& x, int k) {
  detail::check_signal(d, x);
  const Index p = d.size();
  if (k < 1 || k > std::min(d.dim(), p))
    throw InvalidInput("greedy k=" + std::to_string(k) + " outside [1, min(n, p)]");
  const Matrix& a = d.atoms();
  CodingResult res;
  res.method = CodingMethod::greedy;
  std::vector<Index> support;
  std::vector<bool> used(static_cast<std::size_t>(p), false);
  Vector residual = x;
  SupportFit fit;
  for (int round = 0; round < k; ++round) {
    const Vector corr = a.transpose() * residual;
    Index pick = -1;
    double best = -1.0;
    for (Index j = 0; j < p; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double c = std::abs(corr[j]);
      if (c > best) {
        best = c;
        pick = j;
      }
    }
    used[static_cast<std::size_t>(pick)] = true;
    support.push_back(pick);
    fit = fit_support(a, x, support);
    res.regularized = res.regularized || fit.regularized;
    Vector approx = Vector::Zero(x.size());
    for (std::size_t j = 0; j < support.size(); ++j) approx += fit.coeffs[static_cast<Index>(j)] * a.col(support[j]);
    residual = x - approx;
    res.trace.push_back(residual.norm());
  }
  res.coeffs = detail::scatter(p, support, fit.coeffs);
  res.error = (a * res.coeffs.values - x).norm();
  res.iterations = k;
  return res;
}

/// Exhaustive search over all size-k supports. Supports are screened with
/// the Gram identity err^2 = ||x||^2 - b^T G^{-1} b, then the near-best ones
/// are refit by QR; ties go to the lexicographically smallest support.
inline CodingResult exact_ksparse(const Dictionary& d, const Signal& x, int k) {
  detail::check_signal(d, x);
  const Index p = d.size();
  if (k < 1 || k > p) throw InvalidInput("exact k=" + std::to_string(k) + " outside [1, p]");
  if (binomial_capped(p, k, kExactSupportGuard) > kExactSupportGuard)
    throw SizeLimit("exact k-sparse coding needs C(p,k) > 1e6 supports (the problem is NP-hard in general)");

  const Matrix& a = d.atoms();
  const Matrix gram = a.transpose() * a;
  const Vector b = a.transpose() * x;
  const double xx = x.squaredNorm();

  // Screen every support through err^2 = ||x||^2 - b_S^T G_S^{-1} b_S, then
  // refit the near-best and numerically unreliable ones with QR. The screen
  // loses about eps * ||x||^2 * cond(G_S) to cancellation, carried in `unc`.
  std::vector<double> err2s, uncs;
  std::vector<char> reliable;
  std::vector<Index> support(static_cast<std::size_t>(k));
  std::iota(support.begin(), support.end(), Index{0});
  Matrix gs(k, k);
  Vector bs(k), c(k);
  Eigen::LLT<Matrix> llt(k);
  double min_err2 = std::numeric_limits<double>::infinity();
  do {
    for (Index i = 0; i < k; ++i) {
      const Index si = support[static_cast<std::size_t>(i)];
      bs[i] = b[si];
      for (Index j = 0; j < k; ++j) gs(i, j) = gram(si, support[static_cast<std::size_t>(j)]);
    }
    llt.compute(gs);
    bool ok = llt.info() == Eigen::Success;
    double err2 = 0.0, unc = 0.0;
    if (ok) {
      c = bs;
      llt.solveInPlace(c);
      err2 = std::max(0.0, xx - bs.dot(c));
      const double diag_min = llt.matrixLLT().diagonal().cwiseAbs().minCoeff();
      const double scale = gs.diagonal().maxCoeff();
      ok = std::isfinite(err2) && diag_min > 1e-6 * std::sqrt(scale);
      unc = 1e-14 * std::max(xx, 1.0) * scale / (diag_min * diag_min);
    }
    err2s.push_back(err2);
    uncs.push_back(unc);
    reliable.push_back(ok ? 1 : 0);
    if (ok) min_err2 = std::min(min_err2, err2 + unc);
  } while (next_combination(support, p));

  const double slack = 1e-8 * std::max(xx, 1.0);
  CodingResult res;
  res.method = CodingMethod::exact;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Index> best_support;
  SupportFit best_fit;
  std::iota(support.begin(), support.end(), Index{0});
  std::size_t idx = 0;
  do {
    const std::size_t cur = idx++;
    if (reliable[cur] && err2s[cur] - uncs[cur] > min_err2 + slack) continue;
    SupportFit fit = fit_support(a, x, support);
    if (fit.error < best) {
      best = fit.error;
      best_fit = std::move(fit);
      best_support = support;
    }
  } while (next_combination(support, p));
  res.coeffs = detail::scatter(p, best_support, best_fit.coeffs);
  res.regularized = best_fit.regularized;
  res.error = (a * res.coeffs.values - x).norm();
  res.iterations = 1;
  return res;
}

// ----------------------------------------------------------------------
// l1-constrained coder
// ----------------------------------------------------------------------

/// Euclidean projection onto {a : ||a||_1 <= radius} by sort-and-threshold.
inline Vector project_l1_ball(const Vector& v, double radius) {
  if (radius < 0.0) throw InvalidInput("l1 ball radius must be >= 0");
  if (radius == 0.0) return Vector::Zero(v.size());
  if (v.lpNorm<1>() <= radius) return v;
  std::vector<double> u(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) u[static_cast<std::size_t>(i)] = std::abs(v[i]);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - radius) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  Vector w(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double mag = std::max(std::abs(v[i]) - theta, 0.0);
    w[i] = v[i] < 0.0 ? -mag : mag;
  }
  return w;
}

struct L1SolverOptions {
  double tolerance = 1e-8;
  int max_iterations = 10000;
  bool polish = true;
};

namespace detail {

// Refit on the active set identified by the first-order solver: plain least
// squares when the l1 constraint is slack, the equality-constrained KKT
// system when it is tight. Returns the candidate only if it stays sign
// consistent and feasible. An active set larger than n is cut to its n
// largest entries and only the least-squares refit is tried, without the
// sign requirement.
inline bool polish_l1(const Matrix& a, const Signal& x, double lambda, const Vector& coarse, Vector& out) {
  const double amax = coarse.cwiseAbs().maxCoeff();
  if (amax == 0.0) return false;
  std::vector<Index> support;
  for (Index i = 0; i < coarse.size(); ++i)
    if (std::abs(coarse[i]) > 1e-9 * amax) support.push_back(i);
  const bool truncated = static_cast<Index>(support.size()) > a.rows();
  if (truncated) {
    std::partial_sort(support.begin(), support.begin() + a.rows(), support.end(),
                      [&](Index i, Index j) { return std::abs(coarse[i]) > std::abs(coarse[j]); });
    support.resize(static_cast<std::size_t>(a.rows()));
  }
  const Index s = static_cast<Index>(support.size());
  if (s == 0) return false;
  Matrix sub(a.rows(), s);
  Vector sign(s);
  for (Index j = 0; j < s; ++j) {
    sub.col(j) = a.col(support[static_cast<std::size_t>(j)]);
    sign[j] = coarse[support[static_cast<std::size_t>(j)]] > 0.0 ? 1.0 : -1.0;
  }
  const auto objective = [&](const Vector& full) { return (a * full - x).squaredNorm(); };
  const double base = objective(coarse);
  bool found = false;
  double best = base;

  auto consider = [&](const Vector& cs) {
    if (!cs.allFinite()) return;
    if (!truncated)
      for (Index j = 0; j < s; ++j)
        if (cs[j] * sign[j] < 0.0) return;
    Vector full = Vector::Zero(coarse.size());
    for (Index j = 0; j < s; ++j) full[support[static_cast<std::size_t>(j)]] = cs[j];
    if (full.lpNorm<1>() > lambda * (1.0 + 1e-12)) full = project_l1_ball(full, lambda);
    const double obj = objective(full);
    if (obj <= best) {
      best = obj;
      out = full;
      found = true;
    }
  };

  Eigen::ColPivHouseholderQR<Matrix> qr(sub);
  if (qr.rank() < s) return false;
  consider(qr.solve(x));
  if (truncated) return found;

  Matrix kkt = Matrix::Zero(s + 1, s + 1);
  kkt.topLeftCorner(s, s) = sub.transpose() * sub;
  kkt.topRightCorner(s, 1) = sign;
  kkt.bottomLeftCorner(1, s) = sign.transpose();
  Vector rhs(s + 1);
  rhs.head(s) = sub.transpose() * x;
  rhs[s] = lambda;
  Eigen::FullPivLU<Matrix> lu(kkt);
  if (lu.isInvertible()) {
    const Vector sol = lu.solve(rhs);
    if (sol[s] >= -1e-12) consider(sol.head(s));
  }
  return found;
}

}  // namespace detail

/// min ||D a - x||_2 subject to ||a||_1 <= lambda, by accelerated projected
/// gradient (FISTA with adaptive restart) followed by an active-set refit.
inline CodingResult l1_solve(const Dictionary& d, const Signal& x, double lambda, const L1SolverOptions& opt = {}) {
  detail::check_signal(d, x);
  if (!(lambda >= 0.0)) throw InvalidInput("lambda must be >= 0");
  const Matrix& a = d.atoms();
  const Index p = d.size();
  CodingResult res;
  res.method = CodingMethod::l1_projection;
  if (lambda == 0.0) {
    res.coeffs = CoeffVector::zeros(p);
    res.error = x.norm();
    return res;
  }
  const Matrix gram = a.transpose() * a;
  const Vector atx = a.transpose() * x;
  const double lip = Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  if (!(lip > 0.0)) {
    res.coeffs = CoeffVector::zeros(p);
    res.error = x.norm();
    return res;
  }
  const double step = 1.0 / lip;
  auto grad = [&](const Vector& v) -> Vector { return gram * v - atx; };

  Vector cur = Vector::Zero(p);
  Vector y = cur;
  double t = 1.0;
  double fp_residual = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const Vector next = project_l1_ball(y - step * grad(y), lambda);
    fp_residual = (next - y).norm();
    if (fp_residual < opt.tolerance) {
      cur = next;
      ++it;
      break;
    }
    if ((y - next).dot(next - cur) > 0.0) {
      t = 1.0;
      y = next;
    } else {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = next + ((t - 1.0) / tn) * (next - cur);
      t = tn;
    }
    cur = next;
  }
  if (opt.polish) {
    Vector refined;
    if (detail::polish_l1(a, x, lambda, cur, refined)) cur = refined;
  }
  res.coeffs = CoeffVector(cur);
  res.error = (a * cur - x).norm();
  res.iterations = it;
  res.residual = (cur - project_l1_ball(cur - step * grad(cur), lambda)).norm();
  return res;
}

// ----------------------------------------------------------------------
// Dispatch and coefficient bound
// ----------------------------------------------------------------------

/// h_{A,D}(x) = min_{a in A} ||D a - x||. Heuristic coders return an upper
/// bound on the minimum; `exact` selects exhaustive search for HardK.
inline CodingResult repr_error(const Dictionary& d, const Signal& x, const SparsityConstraint& c, bool exact) {
  if (const auto* h = std::get_if<HardK>(&c)) {
    if (exact) return exact_ksparse(d, x, h->k);
    return greedy_ksparse(d, x, h->k);
  }
  return l1_solve(d, x, std::get<L1Ball>(c).lambda);
}

/// gamma * k / (1 - mu_{k-1}(D)): an l1 bound on some minimizer of the
/// k-sparse error, valid when mu_{k-1}(D) < 1 and column norms lie in [1, gamma].
inline double coeff_l1_bound(const Dictionary& d, int k) {
  if (k < 1 || k > d.size()) throw InvalidInput("coefficient bound needs 1 <= k <= p");
  const auto report = validate_dictionary(d, false);
  if (!report.empty()) throw InvalidInput("coeff_l1_bound: " + report.front());
  const double mu = babel_or_zero(d, k - 1);
  if (mu >= 1.0) throw Inapplicable("coefficient bound needs mu_{k-1}(D) < 1, got " + std::to_string(mu));
  return d.gamma() * static_cast<double>(k) / (1.0 - mu);
}

}  // namespace dlgen

#endif  // DLGEN_CODERS_HPP
