#ifndef DLGEN_EXPERIMENTS_HPP
#define DLGEN_EXPERIMENTS_HPP

#include "dlgen/bounds.hpp"
#include "dlgen/coders.hpp"
#include "dlgen/coherence.hpp"
#include "dlgen/core.hpp"
#include "dlgen/io.hpp"
#include "dlgen/learn.hpp"
#include "dlgen/parallel.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

namespace dlgen {

// ----------------------------------------------------------------------
// Trial records
// ----------------------------------------------------------------------

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  Index n = 0;
  Index p = 0;
  std::optional<int> k;
  std::optional<double> lambda;
  std::optional<double> delta;
  std::optional<Index> m;
  double stat = 0.0;   // measured statistic
  double bound = 0.0;  // theoretical value it is compared against
  bool applicable = true;
  std::string label;
  std::string timestamp;  // stamped by the caller; not part of the CSV

  // Generalization-gap details.
  double train_error = 0.0;
  double test_error = 0.0;
  double stat_stderr = 0.0;
  double multiplier = 1.0;
  double additive = 0.0;
  bool vacuous = false;
  LossScale scale = LossScale::plain;
};

inline constexpr const char* kTrialCsvHeader = "trial,seed,n,p,k,m,stat,bound,applicable";

inline void write_trial_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << kTrialCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.trial << ',' << r.seed << ',' << r.n << ',' << r.p << ',';
    if (r.k) out << *r.k;
    out << ',';
    if (r.m) out << *r.m;
    out << ',' << io::format_double(r.stat) << ',' << io::format_double(r.bound) << ',' << (r.applicable ? 1 : 0)
        << '\n';
  }
}

// ----------------------------------------------------------------------
// Monte Carlo check of the random-dictionary Babel tail bound
// ----------------------------------------------------------------------

struct BabelMonteCarlo {
  double empirical = 0.0;        // fraction of trials with mu_k > threshold
  std::size_t exceed_count = 0;
  std::size_t trials = 0;
  double bound = 0.0;            // tail bound for threshold 1/2
  double lower_confidence = 0.0; // one-sided 99% Clopper-Pearson lower limit of `empirical`
  bool consistent = true;        // lower_confidence <= bound
  std::vector<TrialRecord> records;
};

/// Trial i draws p uniform atoms from substream i of `seed`, so the same
/// dictionaries are seen for every k and any thread count.
inline BabelMonteCarlo mc_babel(Index n, Index p, int k, std::size_t trials, double threshold, std::uint64_t seed,
                                unsigned threads = 1) {
  if (trials < 1) throw InvalidInput("mc_babel needs at least one trial");
  if (n < 1) throw InvalidInput("mc_babel needs n >= 1");
  if (k < 1 || k >= p) throw InvalidInput("mc_babel needs 1 <= k <= p - 1");
  BabelMonteCarlo out;
  out.trials = trials;
  out.bound = random_babel_tail_bound(n, p, k);
  out.records.resize(trials);
  parallel_for(trials, threads, [&](std::size_t i) {
    const std::uint64_t trial_seed = substream_seed(seed, i);
    Rng rng(trial_seed);
    const Dictionary d = random_sphere_dictionary(n, p, rng);
    TrialRecord& r = out.records[i];
    r.trial = i;
    r.seed = trial_seed;
    r.n = n;
    r.p = p;
    r.k = k;
    r.stat = babel(d, k).value;
    r.bound = out.bound;
    r.label = "babel";
  });
  for (const auto& r : out.records)
    if (r.stat > threshold) ++out.exceed_count;
  out.empirical = static_cast<double>(out.exceed_count) / static_cast<double>(trials);
  out.lower_confidence = out.exceed_count == 0
                             ? 0.0
                             : boost::math::binomial_distribution<>::find_lower_bound_on_p(
                                   static_cast<double>(trials), static_cast<double>(out.exceed_count), 0.01);
  out.consistent = out.lower_confidence <= out.bound;
  return out;
}

// ----------------------------------------------------------------------
// Lipschitz probes
// ----------------------------------------------------------------------

struct LipschitzProbe {
  double max_ratio = 0.0;
  double constant = 0.0;  // lambda, or k / (1 - delta)
  double delta = 0.0;     // Babel value used for the k-sparse constant
  double distance = 0.0;  // me_norm(D - D')
};

/// max over signals of |h_D(x) - h_D'(x)| / me_norm(D - D') with exact coders.
/// For HardK the constant uses `delta` when given (both mu_{k-1} must be
/// below it), otherwise the larger measured mu_{k-1}.
inline LipschitzProbe lipschitz_probe(const Dictionary& d1, const Dictionary& d2, const Matrix& signals,
                                      const SparsityConstraint& c, std::optional<double> delta = std::nullopt) {
  require_normalized(d1, "lipschitz_probe");
  require_normalized(d2, "lipschitz_probe");
  if (d1.dim() != d2.dim() || d1.size() != d2.size()) throw InvalidInput("lipschitz_probe: dictionary shapes differ");
  LipschitzProbe out;
  out.distance = me_norm(d1.atoms() - d2.atoms());
  if (out.distance < 1e-12) throw DegeneratePair("lipschitz_probe: dictionaries coincide (me_norm < 1e-12)");
  if (const auto* h = std::get_if<HardK>(&c)) {
    const double mu = std::max(babel_or_zero(d1, h->k - 1), babel_or_zero(d2, h->k - 1));
    if (delta) {
      if (!(mu < *delta)) throw Inapplicable("lipschitz_probe: mu_{k-1} = " + std::to_string(mu) + " not below delta");
      out.delta = *delta;
    } else {
      out.delta = mu;
    }
    if (!(out.delta < 1.0)) throw Inapplicable("lipschitz_probe: mu_{k-1} >= 1");
    out.constant = static_cast<double>(h->k) / (1.0 - out.delta);
  } else {
    out.constant = std::get<L1Ball>(c).lambda;
  }
  for (Index i = 0; i < signals.cols(); ++i) {
    const Signal x = signals.col(i);
    const double a = repr_error(d1, x, c, true).error;
    const double b = repr_error(d2, x, c, true).error;
    out.max_ratio = std::max(out.max_ratio, std::abs(a - b) / out.distance);
  }
  return out;
}

struct NonLipschitzDemo {
  Dictionary d;
  Dictionary d_prime;
  Signal q;
  double h_d = 0.0;
  double h_d_prime = 0.0;
  double distance = 0.0;
  double ratio = 0.0;
  std::size_t samples_used = 0;
};

struct NonLipschitzOptions {
  double target = 0.05;              // required h_D(q)
  std::size_t min_samples = 256;     // candidates examined before accepting
  std::size_t max_samples = 100000;
  std::optional<Signal> fixed_q;     // skip the search
};

/// Two dictionaries at me_norm distance <= eps whose k-sparse errors on a
/// signal q differ by at least h_D(q). D holds e_1..e_{k-1}, a k-th atom
/// sqrt(1 - eps^2/4) e_1 + (eps/2) e_k, and random remaining atoms; D'
/// swaps the k-th atom for sqrt(1 - eps^2/4) e_1 + l q with unit norm, which
/// makes q exactly representable. |l| <= eps/2, so me_norm(D - D') <= eps.
/// Searched signals have q_1 = 0, which gives l = eps/2; with q_1 away from
/// zero l is O(eps^2) and rounding in D' alone leaves h_D'(q) near 1e-8.
inline NonLipschitzDemo nonlipschitz_demo(Index n, Index p, int k, double eps, std::uint64_t seed,
                                          const NonLipschitzOptions& opt = {}) {
  if (k < 2) throw InvalidInput("nonlipschitz_demo needs k >= 2 (e_1 must be an atom)");
  if (k > n || k > p) throw InvalidInput("nonlipschitz_demo needs k <= n and k <= p");
  if (!(eps > 0.0) || !(eps < std::sqrt(2.0))) throw InvalidInput("nonlipschitz_demo needs 0 < eps < sqrt(2)");
  Rng rng = substream(seed, 0);
  const double c = std::sqrt(1.0 - 0.25 * eps * eps);

  Matrix atoms = Matrix::Zero(n, p);
  for (int j = 0; j + 1 < k; ++j) atoms(j, j) = 1.0;
  atoms(0, k - 1) = c;
  atoms(k - 1, k - 1) += 0.5 * eps;
  for (Index j = k; j < p; ++j) atoms.col(j) = sample_uniform_sphere(n, rng);
  NonLipschitzDemo out;
  out.d = Dictionary(atoms);

  const HardK hk{k};
  if (opt.fixed_q) {
    if (opt.fixed_q->size() != n) throw InvalidInput("fixed q has the wrong dimension");
    out.q = opt.fixed_q->normalized();
    out.h_d = exact_ksparse(out.d, out.q, k).error;
    out.samples_used = 0;
  } else {
    Rng search = substream(seed, 1);
    double best = -1.0;
    std::size_t used = 0;
    while (used < opt.max_samples && (used < opt.min_samples || best < opt.target)) {
      Signal cand = sample_uniform_sphere(n, search);
      cand[0] = 0.0;
      const double cn = cand.norm();
      if (cn < 1e-12) continue;
      cand /= cn;
      const double h = exact_ksparse(out.d, cand, k).error;
      ++used;
      if (h > best) {
        best = h;
        out.q = std::move(cand);
      }
    }
    out.h_d = best;
    out.samples_used = used;
    if (best < opt.target)
      throw SearchFailure("no signal with k-sparse error >= " + std::to_string(opt.target) + " found; best " +
                          std::to_string(best));
  }

  // ||c e_1 + l q|| = 1  <=>  l^2 + 2 c q_1 l - eps^2 / 4 = 0; take the smaller root.
  const double q1 = out.q[0];
  const double s2 = 0.25 * eps * eps;
  const double disc = std::sqrt(c * c * q1 * q1 + s2);
  const double l = q1 >= 0.0 ? s2 / (c * q1 + disc) : -s2 / (-c * q1 + disc);
  Matrix atoms2 = atoms;
  atoms2.col(k - 1) = l * out.q;
  atoms2(0, k - 1) += c;
  out.d_prime = Dictionary(atoms2);
  out.h_d_prime = exact_ksparse(out.d_prime, out.q, k).error;
  out.distance = me_norm(atoms - atoms2);
  out.ratio = std::abs(out.h_d - out.h_d_prime) / out.distance;
  return out;
}

// ----------------------------------------------------------------------
// Generalization-gap harness
// ----------------------------------------------------------------------

struct BoundSelection {
  BoundFamily family;
  BoundVariant variant;
};

struct GenGapConfig {
  SignalSource source;
  LearnerConfig learner;
  std::vector<Index> m_grid;
  Index test_size = 20000;
  std::vector<BoundSelection> bounds;
  double confidence_x = 3.0;  // bounds hold with probability >= 1 - e^{-x}
  std::vector<double> K_grid = {1.25, 1.5, 2.0, 3.0, 5.0};
  std::vector<double> alpha_grid = {0.01, 0.1, 1.0, 10.0};
  bool exact_measure = true;  // measure h with the exhaustive coder when tractable
  int replicates = 1;         // independent train-and-learn repetitions per m
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// One train-and-learn repetition at a given m.
struct GenGapReplicate {
  Index m = 0;
  int replicate = 0;
  double train_mean = 0.0;
  double test_mean = 0.0;
  double train_sq_mean = 0.0;
  double test_sq_mean = 0.0;
  double gap = 0.0;         // test_mean - train_mean
  double gap_stderr = 0.0;  // sampling error of this replicate
  double delta = 0.0;       // measured mu_{k-1} of the learned dictionary (k-sparse)
  std::uint64_t seed = 0;
};

/// Replicates at one m, averaged. With two or more replicates the standard
/// error is the between-replicate one, which includes learner variability.
struct GenGapPoint {
  Index m = 0;
  int replicates = 0;
  double train_mean = 0.0;
  double test_mean = 0.0;
  double gap = 0.0;
  double gap_stderr = 0.0;
  double delta = 0.0;
};

struct GenGapResult {
  std::vector<GenGapPoint> points;
  std::vector<GenGapReplicate> replicates;
  std::vector<TrialRecord> records;
};

namespace detail {

inline constexpr std::uint64_t kSaltTrain = 1;
inline constexpr std::uint64_t kSaltLearn = 2;
inline constexpr std::uint64_t kSaltTest = 3;

inline double sample_variance(const Vector& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace detail

inline GenGapResult gengap_run(const GenGapConfig& cfg) {
  if (cfg.m_grid.empty()) throw InvalidInput("gengap needs a nonempty m grid");
  if (cfg.test_size < 1) throw InvalidInput("gengap needs a positive test size");
  if (cfg.replicates < 1) throw InvalidInput("gengap needs replicates >= 1");
  for (Index m : cfg.m_grid)
    if (m < 1) throw InvalidInput("gengap m values must be >= 1");
  const bool hard = std::holds_alternative<HardK>(cfg.learner.constraint);
  for (const auto& b : cfg.bounds)
    if ((b.family == BoundFamily::ksparse) != hard)
      throw InvalidInput("bound family does not match the learner's sparsity constraint");
  const Index n = cfg.source.n;
  const Index p = cfg.learner.p;

  bool exact = false;
  if (hard && cfg.exact_measure)
    exact = binomial_capped(p, std::get<HardK>(cfg.learner.constraint).k, kExactSupportGuard) <= 5000;

  Rng test_rng = substream(cfg.seed, 0, detail::kSaltTest);
  const Matrix test = synth_sample(cfg.source, cfg.test_size, test_rng);

  const std::size_t grid = cfg.m_grid.size();
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  std::vector<GenGapReplicate> runs(grid * reps);
  std::vector<std::vector<TrialRecord>> per_run(grid * reps);
  parallel_for(grid * reps, cfg.threads, [&](std::size_t task) {
    const std::size_t gi = task / reps;
    const std::size_t rep = task % reps;
    const Index m = cfg.m_grid[gi];
    GenGapReplicate& pt = runs[task];
    pt.m = m;
    pt.replicate = static_cast<int>(rep);
    pt.seed = substream_seed(cfg.seed, gi, detail::kSaltTrain + 16 * rep);
    Rng train_rng(pt.seed);
    const Matrix train = synth_sample(cfg.source, m, train_rng);

    LearnerConfig lc = cfg.learner;
    lc.seed = substream_seed(cfg.seed, gi, detail::kSaltLearn + 16 * rep);
    lc.threads = 1;
    const Dictionary d = learn_dictionary(train, lc).dictionary;

    const CodedSet tr = code_all(d, train, lc.constraint, exact);
    const CodedSet te = code_all(d, test, lc.constraint, exact);
    pt.train_mean = tr.mean();
    pt.test_mean = te.mean();
    pt.train_sq_mean = tr.errors.squaredNorm() / static_cast<double>(m);
    pt.test_sq_mean = te.errors.squaredNorm() / static_cast<double>(cfg.test_size);
    pt.gap = pt.test_mean - pt.train_mean;
    pt.gap_stderr = std::sqrt(detail::sample_variance(te.errors) / static_cast<double>(cfg.test_size) +
                              detail::sample_variance(tr.errors) / static_cast<double>(m));

    std::optional<int> k;
    std::optional<double> lambda;
    if (hard) {
      k = std::get<HardK>(lc.constraint).k;
      pt.delta = babel_or_zero(d, *k - 1);
    } else {
      lambda = std::get<L1Ball>(lc.constraint).lambda;
    }
    const Vector te_sq = te.errors.array().square();
    const Vector tr_sq = tr.errors.array().square();
    const double sq_stderr = std::sqrt(detail::sample_variance(te_sq) / static_cast<double>(cfg.test_size) +
                                       detail::sample_variance(tr_sq) / static_cast<double>(m));

    for (const auto& sel : cfg.bounds) {
      TrialRecord r;
      r.seed = pt.seed;
      r.n = n;
      r.p = p;
      r.k = k;
      r.lambda = lambda;
      r.m = m;
      if (hard) r.delta = pt.delta;
      r.label = std::string(to_string(sel.family)) + "-" + to_string(sel.variant);
      r.scale = sel.variant == BoundVariant::maurer ? LossScale::squared : LossScale::plain;
      const bool squared = r.scale == LossScale::squared;
      r.train_error = squared ? pt.train_sq_mean : pt.train_mean;
      r.test_error = squared ? pt.test_sq_mean : pt.test_mean;
      r.stat = r.test_error - r.train_error;
      r.stat_stderr = squared ? sq_stderr : pt.gap_stderr;

      BoundInputs in;
      in.n = n;
      in.p = p;
      in.m = static_cast<double>(m);
      in.x = cfg.confidence_x;
      in.k = k;
      in.lambda = lambda;
      if (hard) in.delta = pt.delta;
      try {
        BoundReport rep_;
        if (sel.variant == BoundVariant::fast)
          rep_ = optimize_fast_params(in, sel.family, cfg.K_grid, cfg.alpha_grid, r.train_error).report;
        else
          rep_ = generalization_bound(in, sel.family, sel.variant);
        r.multiplier = rep_.multiplier;
        r.additive = rep_.additive;
        r.vacuous = rep_.vacuous;
        // E <= mult E_m + add  <=>  E - E_m <= (mult - 1) E_m + add
        r.bound = (rep_.multiplier - 1.0) * r.train_error + rep_.additive;
        r.applicable = true;
      } catch (const Inapplicable&) {
        r.applicable = false;
        r.bound = 0.0;
      }
      per_run[task].push_back(std::move(r));
    }
  });

  GenGapResult out;
  out.replicates = runs;
  for (std::size_t gi = 0; gi < grid; ++gi) {
    GenGapPoint pt;
    pt.m = cfg.m_grid[gi];
    pt.replicates = cfg.replicates;
    Vector gaps(cfg.replicates);
    for (std::size_t r = 0; r < reps; ++r) {
      const GenGapReplicate& run = runs[gi * reps + r];
      pt.train_mean += run.train_mean / static_cast<double>(reps);
      pt.test_mean += run.test_mean / static_cast<double>(reps);
      pt.delta += run.delta / static_cast<double>(reps);
      gaps[static_cast<Index>(r)] = run.gap;
    }
    pt.gap = gaps.mean();
    pt.gap_stderr = reps > 1 ? std::sqrt(detail::sample_variance(gaps) / static_cast<double>(reps))
                             : runs[gi * reps].gap_stderr;
    out.points.push_back(pt);
  }
  for (auto& group : per_run)
    for (auto& r : group) {
      r.trial = out.records.size();
      out.records.push_back(std::move(r));
    }
  return out;
}

}  // namespace dlgen

#endif  // DLGEN_EXPERIMENTS_HPP
