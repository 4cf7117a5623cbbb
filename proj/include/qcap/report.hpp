// Run reports: command, input digest, seed, results, optional timings.
// Requires linking libcrypto for SHA-256.
#pragma once

#include "qcap/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>
#include <optional>

namespace qcap {

inline constexpr const char* kToolVersion = "0.1.0";

/// Lower-case hex SHA-256 of `data`.
inline std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx) throw std::runtime_error("sha256: EVP_MD_CTX_new failed");
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
    throw std::runtime_error("sha256: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

/// Digest over the input file contents in the given order; each file is
/// prefixed by its byte length so concatenation boundaries are unambiguous.
inline std::string inputs_digest(const std::vector<std::string>& contents) {
  std::string framed;
  for (const auto& c : contents) {
    framed += std::to_string(c.size());
    framed += ':';
    framed += c;
  }
  return sha256_hex(framed);
}

struct RunReport {
  std::string command;
  std::string inputs_digest;
  std::uint64_t seed = 0;
  Json parameters = Json::object();
  Json results = Json::object();
  std::optional<double> timing_ms;  // only with --timings, so default output is reproducible
  std::string tool_version = kToolVersion;
  bool assertions_ok = true;

  Json to_json() const {
    Json j;
    j["command"] = command;
    j["inputs_digest"] = inputs_digest;
    j["seed"] = seed;
    j["parameters"] = parameters;
    j["results"] = results;
    j["tool_version"] = tool_version;
    j["assertions_ok"] = assertions_ok;
    if (timing_ms) j["timings"] = {{"total_ms", *timing_ms}};
    return j;
  }
};

}  // namespace qcap
