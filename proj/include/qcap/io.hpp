// Channel-set files, canonical JSON and CSV emission, atomic output.
//
// Canonical JSON: object keys sorted, doubles printed with 17 significant
// digits through std::to_chars (locale independent), non-finite doubles as
// null.  Emitting a channel set and parsing it back reproduces every Kraus
// entry bit for bit.
#pragma once

#include "qcap/channels.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace qcap {

using Json = nlohmann::json;

/// Malformed input file; the message starts with the offending field path.
class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kChannelSetSchema = 1;
/// Largest ‖Σ K†K − I‖_∞ accepted at the file boundary.
inline constexpr double kFileTpTol = 1e-8;

// ---------------------------------------------------------------------------
// Canonical JSON

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  std::string s(buf, r.ptr);
  // Integral values keep a marker so they re-parse as doubles.
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

inline bool is_scalar(const Json& j) { return !j.is_array() && !j.is_object(); }

inline void dump_canonical(const Json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays that contain no containers at depth two stay on one line.
      bool flat = true;
      for (const auto& e : j)
        if (!is_scalar(e) && !(e.is_array() && std::all_of(e.begin(), e.end(), is_scalar))) flat = false;
      if (flat || indent == 0) {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += indent == 0 ? "," : ", ";
          dump_canonical(j[i], out, 0, 0);
        }
        out += ']';
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out += pad;
        dump_canonical(j[i], out, indent, depth + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += close_pad + "]";
      return;
    }
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      // nlohmann's default object_t is an ordered std::map, so iteration is sorted.
      out += indent == 0 ? "{" : "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        if (indent) out += pad;
        out += Json(it.key()).dump();
        out += indent == 0 ? ":" : ": ";
        dump_canonical(it.value(), out, indent, depth + 1);
        if (i + 1 < j.size()) out += indent == 0 ? "," : ",\n";
      }
      out += indent == 0 ? "}" : "\n" + close_pad + "}";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string canonical_json(const Json& j, int indent = 2) {
  std::string out;
  detail::dump_canonical(j, out, indent, 0);
  out += '\n';
  return out;
}

inline Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

/// Row-major nested array of [re, im] pairs.
inline Json matrix_to_json(const CMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json real_vector_to_json(const RVector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// ---------------------------------------------------------------------------
// Channel-set schema v1

namespace detail {

inline const Json& require(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "." + key + ": missing field");
  return *it;
}

inline long long require_int(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = require(obj, key, path);
  if (!v.is_number_integer()) throw SchemaError(path + "." + key + ": expected an integer");
  return v.get<long long>();
}

inline std::string require_string(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = require(obj, key, path);
  if (!v.is_string()) throw SchemaError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline double number_at(const Json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path + ": expected a number");
  return v.get<double>();
}

inline CMatrix parse_matrix(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw SchemaError(path + ": expected an array of " + std::to_string(rows) + " rows");
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw SchemaError(rp + ": expected an array of " + std::to_string(cols) + " entries");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& z = row[static_cast<std::size_t>(c)];
      const std::string zp = rp + "[" + std::to_string(c) + "]";
      if (!z.is_array() || z.size() != 2) throw SchemaError(zp + ": expected a [re, im] pair");
      m(r, c) = Complex(number_at(z[0], zp + "[0]"), number_at(z[1], zp + "[1]"));
    }
  }
  return m;
}

}  // namespace detail

inline CompoundSet channel_set_from_json(const Json& doc) {
  const std::string root = "$";
  const long long version = detail::require_int(doc, "schema_version", root);
  if (version != kChannelSetSchema)
    throw SchemaError("$.schema_version: unsupported version " + std::to_string(version) + ", expected 1");
  const std::string name = detail::require_string(doc, "name", root);
  const long long din = detail::require_int(doc, "dim_in", root);
  const long long dout = detail::require_int(doc, "dim_out", root);
  if (din < 1) throw SchemaError("$.dim_in: must be positive");
  if (dout < 1) throw SchemaError("$.dim_out: must be positive");
  const Json& chans = detail::require(doc, "channels", root);
  if (!chans.is_array() || chans.empty()) throw SchemaError("$.channels: expected a non-empty array");

  std::vector<KrausMap> maps;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < chans.size(); ++j) {
    const std::string cp = "$.channels[" + std::to_string(j) + "]";
    names.push_back(detail::require_string(chans[j], "name", cp));
    const Json& kraus = detail::require(chans[j], "kraus", cp);
    if (!kraus.is_array() || kraus.empty()) throw SchemaError(cp + ".kraus: expected a non-empty array");
    std::vector<CMatrix> ops;
    for (std::size_t i = 0; i < kraus.size(); ++i)
      ops.push_back(detail::parse_matrix(kraus[i], dout, din, cp + ".kraus[" + std::to_string(i) + "]"));
    const KindReport rep = verify_kind(ops, din, kFileTpTol);
    if (rep.kind != MapKind::trace_preserving) {
      std::ostringstream msg;
      msg << cp << ": not trace preserving, CPTP residual " << rep.tp_residual << " exceeds " << kFileTpTol;
      throw SchemaError(msg.str());
    }
    maps.emplace_back(std::move(ops), din, dout, kFileTpTol);
  }
  return CompoundSet(name, std::move(maps), std::move(names));
}

inline Json channel_set_to_json(const CompoundSet& set) {
  Json doc;
  doc["schema_version"] = kChannelSetSchema;
  doc["name"] = set.name();
  doc["dim_in"] = set.dim_in();
  doc["dim_out"] = set.dim_out();
  Json chans = Json::array();
  for (std::size_t j = 0; j < set.size(); ++j) {
    Json kraus = Json::array();
    for (const auto& k : set[j].kraus_ops()) kraus.push_back(matrix_to_json(k));
    chans.push_back({{"name", set.member_names()[j]}, {"kraus", std::move(kraus)}});
  }
  doc["channels"] = std::move(chans);
  return doc;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline CompoundSet parse_channel_set_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("$: invalid JSON: ") + e.what());
  }
  return channel_set_from_json(doc);
}

inline CompoundSet parse_channel_set(const std::filesystem::path& path) {
  return parse_channel_set_text(read_file(path));
}

inline std::string emit_channel_set(const CompoundSet& set) { return canonical_json(channel_set_to_json(set)); }

// ---------------------------------------------------------------------------
// CSV

struct CsvRow {
  int l = 0;
  std::string channel;
  std::string quantity;
  double value = 0.0;
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string to_csv(const std::vector<CsvRow>& rows) {
  std::string out = "l,channel,quantity,value\n";
  for (const auto& r : rows)
    out += std::to_string(r.l) + "," + csv_field(r.channel) + "," + csv_field(r.quantity) + "," +
           format_double(r.value) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Output

/// Writes to a sibling temporary and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace qcap
