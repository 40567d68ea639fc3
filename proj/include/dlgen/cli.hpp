#ifndef DLGEN_CLI_HPP
#define DLGEN_CLI_HPP

#include "dlgen/bounds.hpp"
#include "dlgen/coders.hpp"
#include "dlgen/coherence.hpp"
#include "dlgen/core.hpp"
#include "dlgen/experiments.hpp"
#include "dlgen/io.hpp"
#include "dlgen/kernel.hpp"
#include "dlgen/learn.hpp"
#include "dlgen/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace dlgen::cli {

namespace detail {

inline std::string fmt15(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline std::string join_csv(const Vector& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += io::format_double(v[i]);
  }
  return s;
}

inline std::vector<Index> parse_index_list(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(static_cast<Index>(std::stoll(item)));
    } catch (const std::logic_error&) {
      throw InvalidInput("bad integer '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw InvalidInput("empty list");
  return out;
}

/// "sphere:n=8,m=500" or "ground:n=8,p=12,k=2,sigma=0,m=500[,unit=1]".
struct SynthSpec {
  SignalSource source;
  Index m = 0;
};

inline SynthSpec parse_synth(const std::string& spec, std::uint64_t seed) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw InvalidInput("synth spec needs KIND:key=value,...");
  const std::string kind = spec.substr(0, colon);
  std::map<std::string, double> kv;
  std::stringstream ss(spec.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidInput("synth spec entry '" + item + "' is not key=value");
    try {
      kv[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw InvalidInput("synth spec entry '" + item + "' has a bad value");
    }
  }
  auto get = [&](const char* key) -> double {
    auto it = kv.find(key);
    if (it == kv.end()) throw InvalidInput(std::string("synth spec is missing '") + key + "'");
    return it->second;
  };
  SynthSpec out;
  out.m = static_cast<Index>(get("m"));
  const auto n = static_cast<Index>(get("n"));
  if (kind == "sphere") {
    out.source = SignalSource::sphere(n, substream_seed(seed, 0, 11));
  } else if (kind == "ground") {
    Rng grng = substream(seed, 0, 10);
    Dictionary truth = random_sphere_dictionary(n, static_cast<Index>(get("p")), grng);
    out.source = SignalSource::from_dictionary(std::move(truth), static_cast<int>(get("k")),
                                               kv.count("sigma") ? kv["sigma"] : 0.0, substream_seed(seed, 0, 11));
    out.source.unit_coefficients = kv.count("unit") && kv["unit"] != 0.0;
  } else {
    throw InvalidInput("unknown synth kind '" + kind + "' (expected sphere or ground)");
  }
  return out;
}

inline void replace_or_append(std::vector<std::string>& argv, const std::string& flag, const std::string& value) {
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == flag && i + 1 < argv.size()) {
      argv[i + 1] = value;
      return;
    }
    if (argv[i].rfind(flag + "=", 0) == 0) {
      argv[i] = flag + "=" + value;
      return;
    }
  }
  argv.push_back(flag);
  argv.push_back(value);
}

inline std::map<std::string, std::string> collect_parameters(const CLI::App& sub) {
  std::map<std::string, std::string> params;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->count() == 0 || opt->get_name() == "--help") continue;
    std::string joined;
    for (const auto& r : opt->results()) {
      if (!joined.empty()) joined += ' ';
      joined += r;
    }
    params[opt->get_name()] = joined.empty() ? "true" : joined;
  }
  return params;
}

}  // namespace detail

/// Entry point for every subcommand. Returns 0 on success, 2 on invalid
/// arguments or inputs, 1 on computation errors. Diagnostics go to `err` as
/// one line.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dlgen: dictionary geometry, sparse coders, generalization bounds and experiments"};
  app.require_subcommand(1);

  // Shared by every subcommand.
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  unsigned threads = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "master seed")->capture_default_str();
    sub->add_option("--out", out_dir, "output directory for CSV and manifest")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };

  std::string dict_path, signal_path, kernel_spec, data_path, synth_spec, manifest_path;
  int k = 0;
  double lambda = 0.0;
  bool brute = false, exact = false;

  auto* babel_cmd = app.add_subcommand("babel", "Babel function mu_k of a dictionary");
  babel_cmd->add_option("--dict", dict_path, "dictionary CSV (n lines x p values)")->required();
  babel_cmd->add_option("--k", k, "order")->required();
  babel_cmd->add_flag("--brute", brute, "use subset enumeration");
  add_common(babel_cmd);

  auto* code_cmd = app.add_subcommand("code", "sparse code a signal");
  code_cmd->add_option("--dict", dict_path)->required();
  code_cmd->add_option("--signal", signal_path)->required();
  auto* code_k = code_cmd->add_option("--k", k, "at most k nonzeros");
  auto* code_l = code_cmd->add_option("--lambda", lambda, "l1 radius");
  code_k->excludes(code_l);
  code_cmd->add_flag("--exact", exact, "exhaustive k-sparse search");
  add_common(code_cmd);

  auto* kcode_cmd = app.add_subcommand("kcode", "kernel greedy k-sparse coding");
  kcode_cmd->add_option("--kernel", kernel_spec, "linear | gaussian:SIGMA | poly:DEG")->required();
  kcode_cmd->add_option("--dict", dict_path, "dictionary points, one per CSV row")->required();
  kcode_cmd->add_option("--signal", signal_path)->required();
  kcode_cmd->add_option("--k", k)->required();
  add_common(kcode_cmd);

  std::string variant_s, family_s;
  Index bn = 0, bp = 0;
  double bm = 0.0, bx = 0.0;
  std::optional<double> bdelta, bK, balpha;
  auto* bounds_cmd = app.add_subcommand("bounds", "evaluate a generalization bound");
  bounds_cmd->add_option("--variant", variant_s)->required()->check(CLI::IsMember({"maurer", "slow", "fast"}));
  bounds_cmd->add_option("--family", family_s)->required()->check(CLI::IsMember({"l1", "ksparse"}));
  bounds_cmd->add_option("--n", bn)->required();
  bounds_cmd->add_option("--p", bp)->required();
  bounds_cmd->add_option("--m", bm)->required();
  bounds_cmd->add_option("--x", bx)->required();
  auto* bounds_k = bounds_cmd->add_option("--k", k);
  auto* bounds_l = bounds_cmd->add_option("--lambda", lambda);
  bounds_cmd->add_option("--delta", bdelta);
  bounds_cmd->add_option("--K", bK);
  bounds_cmd->add_option("--alpha", balpha);
  add_common(bounds_cmd);

  Index lp = 0;
  int iters = 0;
  int restarts = 1;
  int replicates = 1;
  std::string init_s = "sample-atoms";
  auto* learn_cmd = app.add_subcommand("learn", "learn a dictionary by alternating minimization");
  auto* learn_data = learn_cmd->add_option("--data", data_path, "signals CSV, one per line");
  auto* learn_synth = learn_cmd->add_option("--synth", synth_spec, "sphere:n=N,m=M | ground:n=N,p=P,k=K,sigma=S,m=M");
  learn_data->excludes(learn_synth);
  learn_cmd->add_option("--p", lp)->required();
  auto* learn_k = learn_cmd->add_option("--k", k);
  auto* learn_l = learn_cmd->add_option("--lambda", lambda);
  learn_k->excludes(learn_l);
  learn_cmd->add_option("--iters", iters)->required();
  learn_cmd->add_option("--init", init_s)->check(CLI::IsMember({"sample-atoms", "random-sphere"}));
  learn_cmd->add_flag("--exact", exact);
  learn_cmd->add_option("--restarts", restarts, "independent initializations")->capture_default_str();
  learn_cmd->add_option("--seed", seed)->capture_default_str();
  learn_cmd->add_option("--out", out_dir, "output dictionary CSV")->required();
  learn_cmd->add_option("--threads", threads)->check(CLI::PositiveNumber);

  Index mn = 0, mp = 0;
  std::size_t trials = 1000;
  double threshold = 0.5;
  auto* mc_cmd = app.add_subcommand("mc-babel", "Monte Carlo tail of mu_k for random dictionaries");
  mc_cmd->add_option("--n", mn)->required();
  mc_cmd->add_option("--p", mp)->required();
  mc_cmd->add_option("--k", k)->required();
  mc_cmd->add_option("--trials", trials)->capture_default_str();
  mc_cmd->add_option("--threshold", threshold)->capture_default_str();
  add_common(mc_cmd);

  Index gn = 0, gp = 0, gp_true = 0, test_size = 20000;
  int gk_true = 0;
  double sigma = 0.0, gx = 3.0;
  std::string m_grid_s = "128,256,512,1024,2048,4096,8192", bounds_list;
  int giters = 20;
  auto* gg_cmd = app.add_subcommand("gengap", "measured generalization gap against bounds");
  gg_cmd->add_option("--n", gn)->required();
  gg_cmd->add_option("--p", gp)->required();
  auto* gg_k = gg_cmd->add_option("--k", k);
  auto* gg_l = gg_cmd->add_option("--lambda", lambda);
  gg_k->excludes(gg_l);
  gg_cmd->add_option("--p-true", gp_true, "ground-truth atoms (default p)");
  gg_cmd->add_option("--k-true", gk_true, "ground-truth sparsity (default k, or 2)");
  gg_cmd->add_option("--sigma", sigma)->capture_default_str();
  gg_cmd->add_option("--m-grid", m_grid_s)->capture_default_str();
  gg_cmd->add_option("--test-size", test_size)->capture_default_str();
  gg_cmd->add_option("--iters", giters)->capture_default_str();
  gg_cmd->add_option("--restarts", restarts, "independent learner initializations")->capture_default_str();
  gg_cmd->add_option("--replicates", replicates, "train-and-learn repetitions per m")->capture_default_str();
  gg_cmd->add_flag("--exact-learn", exact, "learn with the exhaustive k-sparse coder");
  gg_cmd->add_option("--x", gx, "confidence exponent")->capture_default_str();
  gg_cmd->add_option("--bounds", bounds_list, "comma list of variants: maurer,slow,fast (default all)");
  add_common(gg_cmd);

  Index dn = 0, dp = 0;
  double eps = 0.0;
  auto* demo_cmd = app.add_subcommand("demo-nonlipschitz", "construct a pair showing k-sparse error is not Lipschitz");
  demo_cmd->add_option("--n", dn)->required();
  demo_cmd->add_option("--p", dp)->required();
  demo_cmd->add_option("--k", k)->required();
  demo_cmd->add_option("--eps", eps)->required();
  add_common(demo_cmd);

  auto* rerun_cmd = app.add_subcommand("rerun", "re-execute a run from its manifest");
  rerun_cmd->add_option("--manifest", manifest_path)->required();
  auto* rerun_out = rerun_cmd->add_option("--out", out_dir);
  auto* rerun_threads = rerun_cmd->add_option("--threads", threads)->check(CLI::PositiveNumber);

  std::vector<std::string> full{"dlgen"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<char*> cargv;
  for (auto& s : full) cargv.push_back(s.data());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "dlgen: " << e.what() << '\n' << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  auto usage_error = [&](const std::string& msg) {
    err << "dlgen " << name << ": " << msg << '\n' << sub->help();
    return 2;
  };

  try {
    if (name == "rerun") {
      RunManifest m = read_manifest(manifest_path);
      for (const auto& [path, digest] : m.input_digests)
        if (sha256_file(path) != digest) throw Error("input " + path + " changed since the manifest was written");
      std::vector<std::string> again = m.argv;
      if (rerun_out->count()) detail::replace_or_append(again, "--out", out_dir);
      if (rerun_threads->count()) detail::replace_or_append(again, "--threads", std::to_string(threads));
      return dispatch(again, out, err);
    }

    RunManifest manifest;
    manifest.subcommand = name;
    manifest.argv = args;
    manifest.created = utc_timestamp();
    auto digest = [&](const std::string& path) { manifest.input_digests[path] = sha256_file(path); };
    std::string manifest_file;

    if (name == "babel") {
      digest(dict_path);
      const Dictionary d = io::read_dictionary(dict_path);
      const BabelValue v = brute ? babel_bruteforce(d, k) : babel(d, k);
      out << detail::fmt15(v.value) << '\n';
    } else if (name == "code") {
      if (!code_k->count() && !code_l->count()) return usage_error("one of --k or --lambda is required");
      digest(dict_path);
      digest(signal_path);
      const Dictionary d = io::read_dictionary(dict_path);
      const Signal x = io::read_signal(signal_path);
      SparsityConstraint c = code_k->count() ? SparsityConstraint{HardK{k}} : SparsityConstraint{L1Ball{lambda}};
      const CodingResult r = repr_error(d, x, c, exact);
      out << detail::join_csv(r.coeffs.values) << '\n' << detail::fmt15(r.error) << '\n';
    } else if (name == "kcode") {
      digest(dict_path);
      digest(signal_path);
      const KernelFn kf = parse_kernel(kernel_spec);
      const KernelDictionary d(io::read_csv_matrix(dict_path).transpose(), kf);
      const Signal x = io::read_signal(signal_path);
      const CodingResult r = kernel_greedy_ksparse(x, d, k, kf);
      out << detail::join_csv(r.coeffs.values) << '\n' << detail::fmt15(r.error) << '\n';
    } else if (name == "bounds") {
      BoundInputs in;
      in.n = bn;
      in.p = bp;
      in.m = bm;
      in.x = bx;
      if (bounds_k->count()) in.k = k;
      if (bounds_l->count()) in.lambda = lambda;
      in.delta = bdelta;
      in.K = bK;
      in.alpha = balpha;
      const BoundFamily fam = family_s == "l1" ? BoundFamily::l1 : BoundFamily::ksparse;
      const BoundVariant var = variant_s == "maurer" ? BoundVariant::maurer
                               : variant_s == "slow" ? BoundVariant::slow
                                                     : BoundVariant::fast;
      if (fam == BoundFamily::ksparse && !in.delta) in.delta = 0.0;
      const BoundReport r = generalization_bound(in, fam, var);
      out << nlohmann::json(r).dump(2) << '\n';
    } else if (name == "learn") {
      if (!learn_k->count() && !learn_l->count()) return usage_error("one of --k or --lambda is required");
      if (!learn_data->count() && !learn_synth->count()) return usage_error("one of --data or --synth is required");
      Matrix samples;
      if (learn_data->count()) {
        digest(data_path);
        samples = io::read_signals(data_path);
      } else {
        const auto spec = detail::parse_synth(synth_spec, seed);
        samples = synth_sample(spec.source, spec.m);
      }
      LearnerConfig cfg;
      cfg.p = lp;
      cfg.constraint = learn_k->count() ? SparsityConstraint{HardK{k}} : SparsityConstraint{L1Ball{lambda}};
      cfg.iterations = iters;
      cfg.seed = seed;
      cfg.init = init_s == "sample-atoms" ? InitKind::sample_atoms : InitKind::random_sphere;
      cfg.exact = exact;
      cfg.threads = threads;
      cfg.restarts = restarts;
      const LearnResult r = learn_dictionary(samples, cfg);
      const auto parent = std::filesystem::path(out_dir).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      io::write_dictionary(out_dir, r.dictionary, true);
      out << nlohmann::json{{"trace", r.trace},
                            {"final_train_error", r.trace.back()},
                            {"rejected_updates", r.rejected_updates}}
                 .dump(2)
          << '\n';
      manifest_file = out_dir + ".manifest.json";
    } else if (name == "mc-babel") {
      const BabelMonteCarlo r = mc_babel(mn, mp, k, trials, threshold, seed, threads);
      std::filesystem::create_directories(out_dir);
      std::ofstream csv(std::filesystem::path(out_dir) / "mc_babel.csv");
      write_trial_csv(csv, r.records);
      out << nlohmann::json{{"empirical", r.empirical},
                            {"exceed_count", r.exceed_count},
                            {"trials", r.trials},
                            {"threshold", threshold},
                            {"bound", r.bound},
                            {"bound_threshold", 0.5},
                            {"lower_confidence_99", r.lower_confidence},
                            {"consistent", r.consistent},
                            {"log_base", "natural"}}
                 .dump(2)
          << '\n';
    } else if (name == "gengap") {
      const bool hard = gg_k->count() > 0;
      if (!hard && !gg_l->count()) return usage_error("one of --k or --lambda is required");
      GenGapConfig cfg;
      Rng grng = substream(seed, 0, 10);
      const Index p_true = gp_true > 0 ? gp_true : gp;
      const int k_true = gk_true > 0 ? gk_true : (hard ? k : 2);
      cfg.source = SignalSource::from_dictionary(random_sphere_dictionary(gn, p_true, grng), k_true, sigma,
                                                 substream_seed(seed, 0, 11));
      cfg.learner.p = gp;
      cfg.learner.constraint = hard ? SparsityConstraint{HardK{k}} : SparsityConstraint{L1Ball{lambda}};
      cfg.learner.iterations = giters;
      cfg.learner.init = InitKind::sample_atoms;
      cfg.learner.restarts = restarts;
      cfg.learner.exact = exact;
      cfg.replicates = replicates;
      cfg.m_grid = detail::parse_index_list(m_grid_s);
      cfg.test_size = test_size;
      cfg.confidence_x = gx;
      cfg.seed = seed;
      cfg.threads = threads;
      const BoundFamily fam = hard ? BoundFamily::ksparse : BoundFamily::l1;
      std::vector<std::string> variants{"maurer", "slow", "fast"};
      if (!bounds_list.empty()) {
        variants.clear();
        std::stringstream ss(bounds_list);
        std::string v;
        while (std::getline(ss, v, ',')) variants.push_back(v);
      }
      for (const auto& v : variants) {
        if (v == "maurer") cfg.bounds.push_back({fam, BoundVariant::maurer});
        else if (v == "slow") cfg.bounds.push_back({fam, BoundVariant::slow});
        else if (v == "fast") cfg.bounds.push_back({fam, BoundVariant::fast});
        else return usage_error("unknown bound variant '" + v + "'");
      }
      const GenGapResult r = gengap_run(cfg);
      std::filesystem::create_directories(out_dir);
      std::ofstream csv(std::filesystem::path(out_dir) / "gengap.csv");
      write_trial_csv(csv, r.records);
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& pt : r.points)
        pts.push_back({{"m", pt.m},
                       {"train_error", pt.train_mean},
                       {"test_error", pt.test_mean},
                       {"gap", pt.gap},
                       {"gap_stderr", pt.gap_stderr},
                       {"replicates", pt.replicates},
                       {"delta", pt.delta}});
      out << nlohmann::json{{"points", pts}}.dump(2) << '\n';
    } else if (name == "demo-nonlipschitz") {
      const NonLipschitzDemo r = nonlipschitz_demo(dn, dp, k, eps, seed);
      out << nlohmann::json{{"ratio", r.ratio},
                            {"h_d", r.h_d},
                            {"h_d_prime", r.h_d_prime},
                            {"distance", r.distance},
                            {"eps", eps},
                            {"samples_used", r.samples_used},
                            {"q", std::vector<double>(r.q.data(), r.q.data() + r.q.size())}}
                 .dump(2)
          << '\n';
    }

    manifest.parameters = detail::collect_parameters(*sub);
    manifest.seed = seed;
    if (manifest_file.empty()) {
      std::filesystem::create_directories(out_dir);
      manifest_file = (std::filesystem::path(out_dir) / (name + ".manifest.json")).string();
    }
    write_manifest(manifest_file, manifest);
    return 0;
  } catch (const InvalidInput& e) {
    err << "dlgen " << name << ": invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "dlgen " << name << ": error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace dlgen::cli

#endif  // DLGEN_CLI_HPP
