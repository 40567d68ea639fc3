#include "dlgen/bounds.hpp"
#include "dlgen/coders.hpp"
#include "dlgen/coherence.hpp"
#include "dlgen/experiments.hpp"
#include "dlgen/kernel.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace dlgen;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// 1. Babel against enumeration, plus the extreme values.
Outcome babel_oracle() {
  Outcome o;
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 6;
    const int p = 2 + t % 7;
    const int k = 1 + t % std::min(4, p - 1);
    const Matrix d = oracle::random_unit_columns(n, p, rng);
    worst = std::max(worst, std::abs(babel(Dictionary(d), k).value - oracle::babel(d, k)));
  }
  o.require(worst <= 1e-12, "max deviation " + num(worst));
  const Eigen::HouseholderQR<Matrix> qr(oracle::random_unit_columns(6, 6, rng));
  const Matrix q = qr.householderQ();
  for (int k = 1; k < 6; ++k) o.require(babel(Dictionary(q), k).value <= 1e-12, "orthonormal mu nonzero");
  Matrix rep = Matrix::Zero(3, 3);
  rep.row(1).setOnes();
  o.require(babel(Dictionary(rep), 2).value == 2.0, "repeated atoms mu_2 != 2");
  if (o.pass) o.detail = "200 dictionaries, max deviation " + num(worst);
  return o;
}

// 2. Coefficient l1 bound of exact k-sparse minimizers.
Outcome coefficient_bound() {
  Outcome o;
  std::mt19937_64 rng(2);
  int violations = 0;
  int drawn = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (int k : {2, 3}) {
    int accepted = 0;
    while (accepted < 1000) {
      ++drawn;
      const Dictionary d(oracle::spread_dictionary(8, 10, 0.03, rng));
      const double mu = babel(d, k - 1).value;
      if (mu > 0.6) continue;
      ++accepted;
      const double cap = k / (1.0 - mu);
      for (int s = 0; s < 5; ++s) {
        const Vector x = oracle::random_unit(8, rng);
        const double l1 = exact_ksparse(d, x, k).coeffs.l1();
        worst_slack = std::min(worst_slack, cap - l1);
        if (l1 > cap + 1e-9) ++violations;
      }
    }
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("2000 dictionaries (") + std::to_string(drawn) +
              " drawn), min slack " + num(worst_slack);
  return o;
}

// 3. Lipschitz probes and the non-Lipschitz construction.
Outcome lipschitz() {
  Outcome o;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(-3.0, -0.5);
  double worst_l1 = -std::numeric_limits<double>::infinity();
  double worst_k = worst_l1;
  for (int t = 0; t < 500; ++t) {
    const Matrix a = oracle::random_unit_columns(6, 8, rng);
    const Matrix b = (a + std::pow(10.0, scale(rng)) * oracle::random_unit_columns(6, 8, rng)).colwise().normalized();
    const Matrix x = oracle::random_unit_columns(6, 50, rng);
    const Dictionary d1(a), d2(b);
    const LipschitzProbe l1 = lipschitz_probe(d1, d2, x, L1Ball{2.0});
    const LipschitzProbe ks = lipschitz_probe(d1, d2, x, HardK{2});
    worst_l1 = std::max(worst_l1, l1.max_ratio - l1.constant);
    worst_k = std::max(worst_k, ks.max_ratio - ks.constant);
  }
  o.require(worst_l1 <= 1e-6, "l1 ratio exceeds lambda by " + num(worst_l1));
  o.require(worst_k <= 1e-6, "k-sparse ratio exceeds k/(1-delta) by " + num(worst_k));
  const NonLipschitzDemo demo = nonlipschitz_demo(8, 8, 2, 1e-4, 3);
  o.require(demo.h_d >= 0.05, "h_D(q) below 0.05");
  o.require(demo.ratio >= 100.0, "demo ratio " + num(demo.ratio));
  if (o.pass)
    o.detail = "500 pairs x 50 signals; max ratio minus constant: l1 " + num(worst_l1) + ", k-sparse " +
               num(worst_k) + "; demo ratio " + num(demo.ratio) + " with h = " + num(demo.h_d);
  return o;
}

// 4. Closed-form bound values.
Outcome bound_values() {
  Outcome o;
  BoundInputs in;
  in.n = 2;
  in.p = 2;
  in.m = 1e4;
  in.x = 2.0;
  in.lambda = 1.0;
  const double slow = l1_generalization_bound(in, BoundVariant::slow).additive;
  const double maurer = l1_generalization_bound(in, BoundVariant::maurer).additive;
  BoundInputs k = in;
  k.lambda.reset();
  k.k = 2;
  k.delta = 0.5;
  const double ks = ksparse_generalization_bound(k, BoundVariant::slow).additive;
  const double tail = random_babel_tail_bound(5000, 10, 1);
  o.require(std::abs(slow - 0.064617) <= 1e-6, "l1 slow " + num(slow) + " vs 0.064617");
  o.require(std::abs(maurer - 0.32462) <= 1e-6, "l1 Maurer " + num(maurer) + " vs 0.32462");
  o.require(std::abs(ks - 0.068413) <= 1e-6, "k-sparse slow " + num(ks) + " vs 0.068413");
  o.require(std::abs(tail - 8.055e-5) <= 1e-9,
            "random Babel bound " + num(tail) + " vs quoted 8.055e-05 (off by " + num(std::abs(tail - 8.055e-5)) + ")");

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.95);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    BoundInputs a;
    a.n = 2 + t % 7;
    a.p = 3 + t % 9;
    a.m = 1e3 * (1 + t);
    a.x = 0.5 + t % 4;
    a.k = 1 + t % 4;
    a.delta = u(rng);
    a.K = 2.0;
    a.alpha = 0.5;
    BoundInputs b = a;
    b.k.reset();
    b.delta.reset();
    b.lambda = *a.k / (1.0 - *a.delta);
    for (auto v : {BoundVariant::maurer, BoundVariant::slow, BoundVariant::fast})
      if (ksparse_generalization_bound(a, v).additive != l1_generalization_bound(b, v).additive) ++mismatches;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " substitution mismatches");
  if (o.pass)
    o.detail = "slow " + num(slow) + ", Maurer " + num(maurer) + ", k-sparse " + num(ks) + ", random Babel " + num(tail);
  return o;
}

// 5. Monotonicity and logarithmic lambda growth.
Outcome monotonicity() {
  Outcome o;
  int bad = 0, checks = 0;
  auto eval = [](BoundFamily fam, BoundVariant v, double m, double x, double lk, double delta) {
    BoundInputs in;
    in.n = 4;
    in.p = 6;
    in.m = m;
    in.x = x;
    if (fam == BoundFamily::l1) {
      in.lambda = lk;
    } else {
      in.k = static_cast<int>(lk);
      in.delta = delta;
    }
    in.K = 2.0;
    in.alpha = 1.0;
    return generalization_bound(in, fam, v).additive;
  };
  auto sweep = [&](const std::vector<double>& vals, auto f, bool increasing) {
    for (std::size_t i = 1; i < vals.size(); ++i) {
      ++checks;
      const double a = f(vals[i - 1]), b = f(vals[i]);
      if (increasing ? b < a : b > a) ++bad;
    }
  };
  for (auto fam : {BoundFamily::l1, BoundFamily::ksparse})
    for (auto v : {BoundVariant::maurer, BoundVariant::slow, BoundVariant::fast}) {
      sweep({1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8}, [&](double m) { return eval(fam, v, m, 2.0, 2.0, 0.3); }, false);
      sweep({0.1, 0.5, 1.0, 2.0, 5.0, 20.0}, [&](double x) { return eval(fam, v, 1e5, x, 2.0, 0.3); }, true);
      sweep({1.0, 2.0, 3.0, 4.0, 6.0}, [&](double lk) { return eval(fam, v, 1e5, 2.0, lk, 0.3); }, true);
      if (fam == BoundFamily::ksparse)
        sweep({0.0, 0.1, 0.3, 0.6, 0.9, 0.99}, [&](double d) { return eval(fam, v, 1e5, 2.0, 2.0, d); }, true);
    }
  o.require(bad == 0, std::to_string(bad) + " of " + std::to_string(checks) + " monotonicity checks failed");

  double worst_rel = 0.0;
  for (double m : {1e3, 1e5, 1e7}) {
    std::vector<double> sq;
    for (double lambda : {1.0, 10.0, 100.0, 1e3, 1e4}) {
      BoundInputs in;
      in.n = 3;
      in.p = 5;
      in.m = m;
      in.x = 2.0;
      in.lambda = lambda;
      const BoundReport r = l1_generalization_bound(in, BoundVariant::slow);
      sq.push_back(r.parts.front().value * r.parts.front().value);
    }
    const double step = 15.0 * std::log(10.0) / (2.0 * m);
    for (std::size_t i = 1; i < sq.size(); ++i)
      worst_rel = std::max(worst_rel, std::abs((sq[i] - sq[i - 1]) / step - 1.0));
  }
  o.require(worst_rel <= 1e-9, "cover term not linear in ln lambda (rel " + num(worst_rel) + ")");
  if (o.pass)
    o.detail = std::to_string(checks) + " pairwise checks; squared cover term linear in ln lambda to " + num(worst_rel);
  return o;
}

// 6. Random-dictionary Babel tail by Monte Carlo.
Outcome babel_monte_carlo() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  for (int k : {1, 2}) {
    const BabelMonteCarlo r = mc_babel(5000, 10, k, 1000, 0.5, 6);
    o.require(r.consistent, "k=" + std::to_string(k) + ": 99% lower limit " + num(r.lower_confidence) +
                                " exceeds bound " + num(r.bound));
    if (k == 1) o.require(r.exceed_count == 0, "k=1 had exceedances");
    detail += "k=" + std::to_string(k) + " empirical " + num(r.empirical) + " bound " + num(r.bound) + "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(secs <= 120.0, "runtime " + num(secs) + " s");
  if (o.pass) o.detail = detail + num(secs) + " s";
  return o;
}

// 7. Log-integral inequality by quadrature.
Outcome log_integral_grid() {
  Outcome o;
  std::vector<double> xs;
  for (int i = 1; i <= 100; ++i) xs.push_back(i / 100.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < 20; ++j) {
    const double g = std::exp(0.5) + (10.0 - std::exp(0.5)) * j / 19.0;
    worst = std::max(worst, log_integral_check(g, xs));
  }
  o.require(worst <= 1e-8, "max violation " + num(worst));
  if (o.pass) o.detail = "2000 grid points, max (lhs - rhs) " + num(worst);
  return o;
}

// 8. Kernel reductions.
Outcome kernel_reduction() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss;
  const KernelFn lin = linear_kernel();
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Matrix pts = oracle::random_unit_columns(5, 7, rng);
    const KernelDictionary kd(pts, lin);
    const Dictionary d(pts);
    const Vector x = oracle::random_unit(5, rng);
    Vector a(7);
    for (auto& c : a) c = gauss(rng);
    worst = std::max(worst, std::abs(kernel_repr_error(x, CoeffVector(a), kd, lin) - (pts * a - x).norm()));
    const int k = 1 + t % 3;
    const CodingResult kr = kernel_greedy_ksparse(x, kd, k, lin);
    const CodingResult er = greedy_ksparse(d, x, k);
    worst = std::max(worst, std::abs(kr.error - er.error));
    o.require(kr.coeffs.support() == er.coeffs.support(), "greedy supports differ");
    worst = std::max(worst, std::abs(feature_babel(kd, k).value - babel(d, k).value));
  }
  o.require(worst <= 1e-10, "linear-kernel deviation " + num(worst));

  double diag = 0.0;
  for (double sigma : {0.1, 1.0, 10.0}) {
    const KernelDictionary g(oracle::random_unit_columns(4, 30, rng), gaussian_kernel(sigma));
    diag = std::max(diag, (g.gram().diagonal().array() - 1.0).abs().maxCoeff());
  }
  o.require(diag <= 1e-12, "Gaussian Gram diagonal off by " + num(diag));

  std::vector<std::pair<Vector, Vector>> pairs;
  for (int i = 0; i < 5000; ++i) {
    const Vector x = oracle::random_unit(3, rng) * std::pow(std::uniform_real_distribution<double>(0, 1)(rng), 1 / 3.0);
    pairs.emplace_back(x, x + std::pow(10.0, -4.0 + 4.0 * (i % 100) / 100.0) * oracle::random_unit(3, rng));
  }
  double holder = -std::numeric_limits<double>::infinity();
  for (double sigma : {0.3, 1.0, 2.5}) {
    KernelFn g = gaussian_kernel(sigma);
    g.smoothness->L = oracle::gaussian_lipschitz_numeric(sigma);
    holder = std::max(holder, holder_feature_check(g, pairs));
  }
  o.require(holder <= 1e-8, "Hoelder violation " + num(holder));
  if (o.pass)
    o.detail = "linear deviation " + num(worst) + ", diagonal " + num(diag) + ", Hoelder max " + num(holder);
  return o;
}

// 9. Generalization gap on realizable data.
Outcome gengap() {
  Outcome o;
  Rng grng = substream(9, 0, 10);
  GenGapConfig cfg;
  cfg.source = SignalSource::from_dictionary(random_sphere_dictionary(8, 12, grng), 2, 0.0, substream_seed(9, 0, 11));
  cfg.learner.p = 12;
  cfg.learner.constraint = HardK{2};
  cfg.learner.iterations = 20;
  cfg.m_grid = {128, 256, 512, 1024, 2048, 4096, 8192};
  cfg.test_size = 20000;
  cfg.replicates = 5;
  cfg.bounds = {{BoundFamily::ksparse, BoundVariant::maurer},
                {BoundFamily::ksparse, BoundVariant::slow},
                {BoundFamily::ksparse, BoundVariant::fast}};
  cfg.seed = 9;
  const GenGapResult r = gengap_run(cfg);

  int trend = 0;
  for (std::size_t i = 0; i < r.points.size(); ++i)
    for (std::size_t j = i + 1; j < r.points.size(); ++j) {
      const auto& a = r.points[i];
      const auto& b = r.points[j];
      if (b.gap > a.gap + 2.0 * std::hypot(a.gap_stderr, b.gap_stderr) + 1e-12) ++trend;
    }
  o.require(trend == 0, std::to_string(trend) + " gap increases beyond 2 standard errors");

  int applicable = 0, violated = 0, flag = 0, vacuous = 0;
  for (const auto& rec : r.records) {
    if (!rec.applicable) continue;
    ++applicable;
    if (rec.test_error > rec.multiplier * rec.train_error + rec.additive) ++violated;
    if (rec.vacuous != (rec.additive >= 1.0)) ++flag;
    if (rec.vacuous) ++vacuous;
  }
  o.require(applicable > 0, "no applicable bound records");
  o.require(violated == 0, std::to_string(violated) + " bound records violated");
  o.require(flag == 0, std::to_string(flag) + " records with a wrong vacuous flag");
  std::ostringstream gaps;
  for (const auto& p : r.points) gaps << ' ' << num(p.gap);
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("gaps") + gaps.str() + "; " + std::to_string(applicable) +
              " applicable records, " + std::to_string(vacuous) + " vacuous";
  return o;
}

// 10. Byte-identical reruns from manifests under other thread counts.
Outcome reproducibility() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path tmp = fs::temp_directory_path() / ("dlgen_accept_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  const std::string exe = DLGEN_CLI_PATH;
  auto sh = [&](const std::string& args) {
    return std::system((exe + " " + args + " > " + (tmp / "stdout.txt").string() + " 2>&1").c_str());
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  struct Case {
    std::string name, args, csv;
  };
  const std::vector<Case> cases = {
      {"mc-babel", "mc-babel --n 50 --p 10 --k 2 --trials 200 --seed 3 --threads 1", "mc_babel.csv"},
      {"gengap",
       "gengap --n 6 --p 8 --k 2 --p-true 8 --k-true 2 --sigma 0 --m-grid 64,256 --test-size 2000 --iters 5 "
       "--replicates 2 --bounds slow,fast --seed 5 --threads 1",
       "gengap.csv"}};
  int compared = 0;
  for (const auto& c : cases) {
    const fs::path a = tmp / (c.name + "_a");
    const fs::path b = tmp / (c.name + "_b");
    if (sh(c.args + " --out " + a.string()) != 0) {
      o.require(false, c.name + " run failed");
      continue;
    }
    const fs::path manifest = a / (c.name + ".manifest.json");
    if (sh("rerun --manifest " + manifest.string() + " --out " + b.string() + " --threads 4") != 0) {
      o.require(false, c.name + " rerun failed");
      continue;
    }
    const std::string first = slurp(a / c.csv);
    o.require(!first.empty() && first == slurp(b / c.csv), c.name + " CSV differs after rerun");
    ++compared;
  }
  fs::remove_all(tmp);
  if (o.pass) o.detail = std::to_string(compared) + " runs reproduced byte for byte with --threads 4";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Babel oracle equivalence", babel_oracle},
      {"coefficient l1 bound", coefficient_bound},
      {"Lipschitz suites", lipschitz},
      {"bound closed forms", bound_values},
      {"bound monotonicity", monotonicity},
      {"random-dictionary Babel tail", babel_monte_carlo},
      {"log-integral quadrature", log_integral_grid},
      {"kernel reduction", kernel_reduction},
      {"generalization-gap harness", gengap},
      {"manifest reproducibility", reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!r.pass) ++failures;
    std::cout << "criterion " << (i + 1) << " " << (r.pass ? "PASS" : "FAIL") << " [" << criteria[i].first << "] "
              << r.detail << " (" << num(secs) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
