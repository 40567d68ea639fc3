#ifndef DLGEN_MANIFEST_HPP
#define DLGEN_MANIFEST_HPP

#include "dlgen/core.hpp"

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace dlgen {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kLogBaseNote = "natural logarithms throughout, including ln p in the random Babel bound";

/// Everything needed to re-execute a CLI run.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;  // arguments after the program name
  std::map<std::string, std::string> parameters;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::map<std::string, std::string> input_digests;  // path -> sha256 hex
  std::string log_base = kLogBaseNote;
  std::string created;

  bool operator==(const RunManifest&) const = default;
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  j = {{"subcommand", m.subcommand}, {"argv", m.argv},        {"parameters", m.parameters},
       {"seed", m.seed},             {"version", m.version},  {"input_digests", m.input_digests},
       {"log_base", m.log_base},     {"created", m.created}};
}

inline void from_json(const nlohmann::json& j, RunManifest& m) {
  j.at("subcommand").get_to(m.subcommand);
  j.at("argv").get_to(m.argv);
  j.at("parameters").get_to(m.parameters);
  j.at("seed").get_to(m.seed);
  j.at("version").get_to(m.version);
  j.at("input_digests").get_to(m.input_digests);
  j.at("log_base").get_to(m.log_base);
  j.at("created").get_to(m.created);
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open manifest " + path);
  try {
    return nlohmann::json::parse(in).get<RunManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed manifest " + path + ": " + e.what());
  }
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write manifest " + path);
  out << nlohmann::json(m).dump(2) << '\n';
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace dlgen

#endif  // DLGEN_MANIFEST_HPP
