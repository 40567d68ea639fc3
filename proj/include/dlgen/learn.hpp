#ifndef DLGEN_LEARN_HPP
#define DLGEN_LEARN_HPP

#include "dlgen/coders.hpp"
#include "dlgen/core.hpp"
#include "dlgen/parallel.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace dlgen {

// ----------------------------------------------------------------------
// Synthetic signal sources
// ----------------------------------------------------------------------

enum class SourceKind { ground_truth, uniform_sphere };

struct SignalSource {
  SourceKind kind = SourceKind::uniform_sphere;
  Index n = 0;
  std::optional<Dictionary> ground;  // ground_truth only
  int k_true = 1;
  double sigma = 0.0;
  bool unit_coefficients = false;  // every active coefficient is 1 before normalization
  std::uint64_t seed = 0;

  static SignalSource sphere(Index n, std::uint64_t seed) {
    SignalSource s;
    s.kind = SourceKind::uniform_sphere;
    s.n = n;
    s.seed = seed;
    return s;
  }

  static SignalSource from_dictionary(Dictionary d, int k_true, double sigma, std::uint64_t seed) {
    SignalSource s;
    s.kind = SourceKind::ground_truth;
    s.n = d.dim();
    s.ground = std::move(d);
    s.k_true = k_true;
    s.sigma = sigma;
    s.seed = seed;
    return s;
  }
};

/// Draw m unit-norm signals (columns of an n x m matrix) from `rng`.
/// Ground truth: x = normalize(D a + sigma g) with a supported on k_true
/// uniformly chosen atoms, entries uniform on [-1, 1], a scaled to unit l2.
inline Matrix synth_sample(const SignalSource& src, Index m, Rng& rng) {
  if (m < 1) throw InvalidInput("synth_sample needs m >= 1");
  if (!(src.sigma >= 0.0)) throw InvalidInput("noise level sigma must be >= 0");
  if (src.kind == SourceKind::uniform_sphere) {
    Matrix out(src.n, m);
    for (Index i = 0; i < m; ++i) out.col(i) = sample_uniform_sphere(src.n, rng);
    return out;
  }
  if (!src.ground) throw InvalidInput("ground-truth source without a dictionary");
  const Dictionary& d = *src.ground;
  const Index p = d.size();
  if (src.k_true < 1 || src.k_true > p) throw InvalidInput("k_true outside [1, p]");
  Matrix out(d.dim(), m);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<Index> perm(static_cast<std::size_t>(p));
  for (Index i = 0; i < m; ++i) {
    for (;;) {
      std::iota(perm.begin(), perm.end(), Index{0});
      for (int j = 0; j < src.k_true; ++j) {
        std::uniform_int_distribution<Index> pick(j, p - 1);
        std::swap(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(pick(rng))]);
      }
      Vector a = Vector::Zero(p);
      for (int j = 0; j < src.k_true; ++j)
        a[perm[static_cast<std::size_t>(j)]] = src.unit_coefficients ? 1.0 : coef(rng);
      const double an = a.norm();
      if (an < 1e-12) continue;
      a /= an;
      Vector x = d.atoms() * a;
      if (src.sigma > 0.0) x += src.sigma * gaussian_vector(d.dim(), rng);
      const double xn = x.norm();
      if (xn < 1e-12) continue;
      out.col(i) = x / xn;
      break;
    }
  }
  return out;
}

/// Draw from the stream seeded by `src.seed`.
inline Matrix synth_sample(const SignalSource& src, Index m) {
  Rng rng(src.seed);
  return synth_sample(src, m, rng);
}

// ----------------------------------------------------------------------
// Alternating-minimization learner
// ----------------------------------------------------------------------

enum class InitKind { random_sphere, sample_atoms };

struct LearnerConfig {
  Index p = 0;
  SparsityConstraint constraint = HardK{1};
  int iterations = 1;
  std::uint64_t seed = 0;
  InitKind init = InitKind::sample_atoms;
  bool exact = false;  // exhaustive k-sparse coding instead of greedy
  unsigned threads = 1;
  int restarts = 1;  // independent initializations; the lowest final error wins
};

struct LearnResult {
  Dictionary dictionary;
  std::vector<double> trace;  // mean training error after each iteration
  int rejected_updates = 0;
};

struct CodedSet {
  Matrix coeffs;  // p x m
  Vector errors;  // length m
  double mean() const { return errors.size() ? errors.mean() : 0.0; }
};

/// Code every column of `signals` with the configured coder.
inline CodedSet code_all(const Dictionary& d, const Matrix& signals, const SparsityConstraint& c, bool exact,
                         unsigned threads = 1) {
  CodedSet out{Matrix::Zero(d.size(), signals.cols()), Vector::Zero(signals.cols())};
  parallel_for(static_cast<std::size_t>(signals.cols()), threads, [&](std::size_t i) {
    const auto col = static_cast<Index>(i);
    CodingResult r = repr_error(d, signals.col(col), c, exact);
    out.coeffs.col(col) = r.coeffs.values;
    out.errors[col] = r.error;
  });
  return out;
}

namespace detail {

inline Matrix replace_dead_columns(Matrix m, Rng& rng) {
  for (Index j = 0; j < m.cols(); ++j) {
    const double nrm = m.col(j).norm();
    if (nrm < 1e-12) m.col(j) = sample_uniform_sphere(m.rows(), rng);
    else m.col(j) /= nrm;
  }
  return m;
}

}  // namespace detail

/// MOD-style alternating minimization: code all samples, update
/// D <- X A^T (A A^T + 1e-9 I)^{-1}, renormalize columns. An update that
/// raises the mean training error is backtracked toward the current
/// dictionary and rejected if it still does not help, so the trace is
/// nonincreasing for a deterministic coder.
namespace detail {

inline LearnResult learn_once(const Matrix& samples, const LearnerConfig& cfg, Rng& rng) {
  const Index n = samples.rows();
  const Index m = samples.cols();

  Matrix init(n, cfg.p);
  if (cfg.init == InitKind::sample_atoms) {
    if (cfg.p > m) throw InvalidInput("sample-atoms init needs p <= sample count");
    std::vector<Index> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index j = 0; j < cfg.p; ++j) {
      std::uniform_int_distribution<Index> pick(j, m - 1);
      std::swap(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(pick(rng))]);
      init.col(j) = samples.col(perm[static_cast<std::size_t>(j)]);
    }
  } else {
    for (Index j = 0; j < cfg.p; ++j) init.col(j) = sample_uniform_sphere(n, rng);
  }
  Dictionary dict(detail::replace_dead_columns(std::move(init), rng));
  CodedSet coded = code_all(dict, samples, cfg.constraint, cfg.exact, cfg.threads);

  LearnResult out;
  for (int it = 0; it < cfg.iterations; ++it) {
    const double before = coded.mean();
    const Matrix& a = coded.coeffs;
    Matrix aat = a * a.transpose();
    aat.diagonal().array() += 1e-9;
    const Matrix xat = samples * a.transpose();
    // D A A^T = X A^T, solved through the symmetric system on the right.
    Matrix candidate = aat.ldlt().solve(xat.transpose()).transpose();
    candidate = detail::replace_dead_columns(std::move(candidate), rng);

    bool accepted = false;
    for (int halving = 0; halving < 4 && !accepted; ++halving) {
      Dictionary trial(candidate);
      CodedSet recoded = code_all(trial, samples, cfg.constraint, cfg.exact, cfg.threads);
      if (recoded.mean() <= coded.mean()) {
        dict = std::move(trial);
        coded = std::move(recoded);
        accepted = true;
      } else {
        candidate = detail::replace_dead_columns(0.5 * (candidate + dict.atoms()), rng);
      }
    }
    if (!accepted) ++out.rejected_updates;

    // Atom repair: swap an atom for the residual of a badly represented
    // sample, kept only if it lowers the training error. Idle and duplicated
    // atoms are tried every iteration, all atoms once progress stalls.
    if (cfg.p > 1) {
      const bool stalled = before - coded.mean() < 1e-4 * before;
      std::vector<Index> victims;
      if (stalled) {
        victims.resize(static_cast<std::size_t>(cfg.p));
        std::iota(victims.begin(), victims.end(), Index{0});
      } else {
        const Vector usage = (coded.coeffs.array().abs() > 0.0).cast<double>().rowwise().sum();
        Matrix gram = (dict.atoms().transpose() * dict.atoms()).cwiseAbs();
        gram.diagonal().setZero();
        Index idle = 0, row = 0, col = 0;
        usage.minCoeff(&idle);
        gram.maxCoeff(&row, &col);
        victims = {idle, usage[row] < usage[col] ? row : col};
      }
      std::vector<Index> order(static_cast<std::size_t>(m));
      std::iota(order.begin(), order.end(), Index{0});
      const auto tries = std::min<std::size_t>(stalled ? 2 : 3, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(tries), order.end(),
                        [&](Index a, Index b) { return coded.errors[a] > coded.errors[b]; });
      for (std::size_t t = 0; t < tries; ++t) {
        const Index w = order[t];
        const Vector resid = samples.col(w) - dict.atoms() * coded.coeffs.col(w);
        if (resid.norm() < 1e-9) break;
        for (Index victim : victims) {
          Matrix repaired = dict.atoms();
          repaired.col(victim) = resid.normalized();
          Dictionary trial(std::move(repaired));
          CodedSet recoded = code_all(trial, samples, cfg.constraint, cfg.exact, cfg.threads);
          if (recoded.mean() < coded.mean()) {
            dict = std::move(trial);
            coded = std::move(recoded);
          }
        }
      }
    }
    out.trace.push_back(coded.mean());
  }
  out.dictionary = std::move(dict);
  return out;
}

}  // namespace detail

inline LearnResult learn_dictionary(const Matrix& samples, const LearnerConfig& cfg) {
  if (samples.cols() < 1 || samples.rows() < 1) throw InvalidInput("learn_dictionary needs a nonempty sample");
  if (!samples.allFinite()) throw InvalidInput("samples contain non-finite values");
  if (cfg.p < 1) throw InvalidInput("learner needs p >= 1");
  if (cfg.iterations < 1) throw InvalidInput("learner needs iterations >= 1");
  if (cfg.restarts < 1) throw InvalidInput("learner needs restarts >= 1");
  if (cfg.init == InitKind::sample_atoms && cfg.p > samples.cols())
    throw InvalidInput("sample-atoms init needs p <= sample count");
  std::optional<LearnResult> best;
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(r), 20);
    LearnResult res = detail::learn_once(samples, cfg, rng);
    if (!best || res.trace.back() < best->trace.back()) best = std::move(res);
  }
  return std::move(*best);
}

}  // namespace dlgen

#endif  // DLGEN_LEARN_HPP
