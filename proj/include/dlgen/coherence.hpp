#ifndef DLGEN_COHERENCE_HPP
#define DLGEN_COHERENCE_HPP

#include "dlgen/core.hpp"

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

namespace dlgen {

struct BabelValue {
  double value = 0.0;
  int k = 0;
};

inline constexpr double kBabelBruteforceGuard = 1e7;

namespace detail {

inline void check_babel_order(Index p, int k) {
  if (k < 1 || k >= p)
    throw InvalidInput("Babel order k=" + std::to_string(k) + " outside [1, p-1] for p=" + std::to_string(p));
}

}  // namespace detail

/// Babel function from a Gram matrix: max over atoms i of the sum of the
/// k largest |G(i, j)|, j != i. The max over subsets factorizes per atom.
template <typename Derived>
BabelValue babel_from_gram(const Eigen::MatrixBase<Derived>& gram, int k) {
  const Index p = gram.rows();
  if (gram.cols() != p) throw InvalidInput("Gram matrix must be square");
  detail::check_babel_order(p, k);
  std::vector<double> row(static_cast<std::size_t>(p - 1));
  double best = 0.0;
  for (Index i = 0; i < p; ++i) {
    std::size_t t = 0;
    for (Index j = 0; j < p; ++j)
      if (j != i) row[t++] = std::abs(gram(i, j));
    std::partial_sort(row.begin(), row.begin() + k, row.end(), std::greater<>());
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += row[static_cast<std::size_t>(j)];
    best = std::max(best, s);
  }
  return {best, k};
}

/// mu_k(D) = max_{|L| = k} max_{i not in L} sum_{l in L} |<d_l, d_i>|.
inline BabelValue babel(const Dictionary& d, int k) {
  detail::check_babel_order(d.size(), k);
  const Matrix gram = d.atoms().transpose() * d.atoms();
  return babel_from_gram(gram, k);
}

/// Literal enumeration of the Babel definition over all (L, i) pairs using a
/// caller-supplied inner product. Exists as a test oracle.
inline BabelValue babel_bruteforce(Index p, int k, const std::function<double(Index, Index)>& inner) {
  detail::check_babel_order(p, k);
  const double work = binomial_capped(p, k, kBabelBruteforceGuard) * static_cast<double>(p);
  if (work > kBabelBruteforceGuard)
    throw SizeLimit("Babel brute force needs C(p,k)*p > 1e7 evaluations");
  std::vector<Index> subset(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) subset[static_cast<std::size_t>(j)] = j;
  double best = 0.0;
  do {
    for (Index i = 0; i < p; ++i) {
      if (std::find(subset.begin(), subset.end(), i) != subset.end()) continue;
      double s = 0.0;
      for (Index l : subset) s += std::abs(inner(l, i));
      best = std::max(best, s);
    }
  } while (next_combination(subset, p));
  return {best, k};
}

inline BabelValue babel_bruteforce(const Dictionary& d, int k) {
  const Matrix& a = d.atoms();
  return babel_bruteforce(d.size(), k, [&a](Index i, Index j) { return a.col(i).dot(a.col(j)); });
}

/// mu_{k} with the convention mu_0 = 0 (empty sum), used by the coefficient bound.
inline double babel_or_zero(const Dictionary& d, int k) { return k == 0 ? 0.0 : babel(d, k).value; }

/// Mutual coherence, the largest absolute inner product between distinct atoms.
inline double coherence(const Dictionary& d) {
  if (d.size() < 2) throw InvalidInput("coherence needs at least two atoms");
  return babel(d, 1).value;
}

/// Sufficient frame condition for mu_{k-1}(D) < 1: B < 1 + 1/(p-1), where
/// B bounds sum_i |<v, d_i>| over unit v. B is supplied by the caller.
inline bool frame_check(const Dictionary& d, double frame_upper) {
  require_normalized(d, "frame_check");
  if (d.size() < 2) return true;
  return frame_upper < 1.0 + 1.0 / static_cast<double>(d.size() - 1);
}

}  // namespace dlgen

#endif  // DLGEN_COHERENCE_HPP
