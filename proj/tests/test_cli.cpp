#include "catch_amalgamated.hpp"

#include "dlgen/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <unistd.h>

using namespace dlgen;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("dlgen_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_CASE("exit codes", "[cli]") {
  CHECK(run({}).code == 2);
  const Run unknown = run({"frobnicate"});
  CHECK(unknown.code == 2);
  CHECK_FALSE(unknown.err.empty());
  const Run flag = run({"babel", "--bogus"});
  CHECK(flag.code == 2);
  CHECK(flag.err.find("Usage") != std::string::npos);
  CHECK(run({"--help"}).code == 0);

  TempDir tmp;
  spit(tmp / "bad.csv", "1,0\n0,abc\n");
  const Run bad = run({"babel", "--dict", tmp / "bad.csv", "--k", "1", "--out", tmp.path.string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("invalid input") != std::string::npos);
  CHECK(bad.err.find('\n') == bad.err.size() - 1);

  CHECK(run({"code", "--dict", tmp / "bad.csv", "--signal", tmp / "bad.csv", "--out", tmp.path.string()}).code == 2);
  CHECK(run({"learn", "--p", "2", "--k", "1", "--iters", "1", "--out", tmp / "d.csv"}).code == 2);
}

TEST_CASE("babel and code subcommands", "[cli]") {
  TempDir tmp;
  spit(tmp / "id3.csv", "1,0,0\n0,1,0\n0,0,1\n");
  const Run b = run({"babel", "--dict", tmp / "id3.csv", "--k", "2", "--out", tmp.path.string()});
  REQUIRE(b.code == 0);
  CHECK(std::stod(b.out) == 0.0);
  CHECK(fs::exists(tmp / "babel.manifest.json"));

  spit(tmp / "x.csv", "0.6,0.8,0\n");
  const Run c = run({"code", "--dict", tmp / "id3.csv", "--signal", tmp / "x.csv", "--k", "1", "--exact", "--out",
                     tmp.path.string()});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("0.6") != std::string::npos);
  CHECK(run({"code", "--dict", tmp / "id3.csv", "--signal", tmp / "x.csv", "--k", "1", "--lambda", "1", "--out",
             tmp.path.string()})
            .code == 2);
}

TEST_CASE("bounds subcommand", "[cli]") {
  TempDir tmp;
  const Run r = run({"bounds", "--variant", "slow", "--family", "l1", "--n", "2", "--p", "2", "--lambda", "1", "--m",
                     "10000", "--x", "2", "--out", tmp.path.string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(std::abs(j.at("additive").get<double>() - 0.064617) <= 1e-6);
  CHECK(run({"bounds", "--variant", "slower", "--family", "l1", "--n", "2", "--p", "2", "--m", "1", "--x", "1",
             "--out", tmp.path.string()})
            .code == 2);
}

TEST_CASE("manifests round-trip and reruns reproduce bytes", "[cli]") {
  TempDir tmp;
  const std::string a = tmp / "a";
  const std::string b = tmp / "b";
  REQUIRE(run({"mc-babel", "--n", "20", "--p", "6", "--k", "1", "--trials", "50", "--seed", "4", "--threads", "1",
               "--out", a})
              .code == 0);
  const std::string manifest = (fs::path(a) / "mc-babel.manifest.json").string();
  const RunManifest m = read_manifest(manifest);
  CHECK(m.subcommand == "mc-babel");
  CHECK(m.seed == 4);
  CHECK(m.parameters.at("--trials") == "50");
  CHECK_FALSE(m.created.empty());
  write_manifest(tmp / "copy.json", m);
  CHECK(read_manifest(tmp / "copy.json") == m);

  REQUIRE(run({"rerun", "--manifest", manifest, "--out", b, "--threads", "3"}).code == 0);
  CHECK(slurp(a + "/mc_babel.csv") == slurp(b + "/mc_babel.csv"));
  const auto argv = read_manifest(b + "/mc-babel.manifest.json").argv;
  const auto it = std::find(argv.begin(), argv.end(), "--threads");
  REQUIRE(it + 1 < argv.end());
  CHECK(*(it + 1) == "3");

  spit(tmp / "bad.json", "{\"subcommand\": 3}");
  CHECK(run({"rerun", "--manifest", tmp / "bad.json"}).code == 2);
}

TEST_CASE("rerun refuses changed inputs", "[cli]") {
  TempDir tmp;
  spit(tmp / "d.csv", "1,0\n0,1\n");
  REQUIRE(run({"babel", "--dict", tmp / "d.csv", "--k", "1", "--out", tmp.path.string()}).code == 0);
  CHECK(run({"rerun", "--manifest", tmp / "babel.manifest.json"}).code == 0);
  spit(tmp / "d.csv", "1,0.6\n0,0.8\n");
  CHECK(run({"rerun", "--manifest", tmp / "babel.manifest.json"}).code == 1);
}

TEST_CASE("learn writes a dictionary and its manifest", "[cli]") {
  TempDir tmp;
  const std::string dict = tmp / "learned.csv";
  const Run r = run({"learn", "--synth", "ground:n=4,p=5,k=1,sigma=0,m=60", "--p", "5", "--k", "1", "--iters", "3",
                     "--seed", "2", "--out", dict});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("trace").size() == 3);
  CHECK(fs::exists(dict));
  CHECK(fs::exists(dict + ".manifest.json"));
  const std::string first = slurp(dict);
  REQUIRE(run({"rerun", "--manifest", dict + ".manifest.json"}).code == 0);
  CHECK(slurp(dict) == first);
}

TEST_CASE("installed binary", "[cli]") {
  TempDir tmp;
  const std::string exe = DLGEN_CLI_PATH;
  spit(tmp / "id3.csv", "1,0,0\n0,1,0\n0,0,1\n");
  const auto status = [&](const std::string& args) {
    const int s = std::system((exe + " " + args + " > " + (tmp / "o.txt") + " 2> " + (tmp / "e.txt")).c_str());
    return WEXITSTATUS(s);
  };
  CHECK(status("babel --dict " + (tmp / "id3.csv") + " --k 2 --out " + tmp.path.string()) == 0);
  CHECK(std::stod(slurp(tmp / "o.txt")) == 0.0);
  CHECK(status("nope") == 2);
  CHECK(status("babel --unknown-flag") == 2);
  CHECK(status("demo-nonlipschitz --n 4 --p 6 --k 1 --eps 0.001 --out " + tmp.path.string()) == 2);
}
