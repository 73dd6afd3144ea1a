#pragma once

// Mixture JSON and dataset CSV formats.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mmdt/error.hpp"
#include "mmdt/mixture.hpp"

namespace mmdt {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << content;
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

/// Parses JSON text; syntax errors carry 1-based line and column.
inline Json parse_json(const std::string& text, const std::string& source = "<input>") {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(ErrorKind::parse, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
}

inline Json load_json(const std::string& path) { return parse_json(read_file(path), path); }

/// Stable textual form: two-space indent, trailing newline.
inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

namespace detail {

template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorKind::parse, std::string("missing field \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::parse, std::string("field \"") + key + "\" has the wrong type");
  }
}

}  // namespace detail

inline const char* kind_name(ComponentKind k) {
  return k == ComponentKind::gaussian_diagonal ? "gaussian-diagonal" : "finite-discrete";
}

inline Json to_json(const MixtureModel& m) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["dim"] = m.dim();
  j["alpha"] = m.alpha;
  j["weights"] = m.weights;
  j["stddev"] = m.sigma;
  Json comps = Json::array();
  for (const auto& c : m.components) {
    Json cj;
    cj["kind"] = kind_name(c.kind);
    cj["mean"] = c.mean;
    if (c.is_gaussian()) {
      cj["stddev"] = c.stddev;
    } else {
      cj["support"] = c.support;
      cj["mass"] = c.mass;
    }
    comps.push_back(std::move(cj));
  }
  j["components"] = std::move(comps);
  return j;
}

/// Reads a mixture. `stddev` and `alpha` are optional; missing values are derived
/// (pooled within-component deviation and K * max weight).
inline MixtureModel mixture_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::parse, "mixture JSON must be an object");
  if (j.contains("format_version") && j.at("format_version") != kFormatVersion)
    fail(ErrorKind::parse, "unsupported format_version");
  const auto dim = detail::get_field<std::size_t>(j, "dim");
  auto weights = detail::get_field<Vector>(j, "weights");
  if (!j.contains("components") || !j.at("components").is_array()) fail(ErrorKind::parse, "missing field \"components\"");
  std::vector<Component> comps;
  for (const auto& cj : j.at("components")) {
    const auto kind = detail::get_field<std::string>(cj, "kind");
    auto mean = detail::get_field<Vector>(cj, "mean");
    if (kind == "gaussian-diagonal") {
      comps.push_back(Component::gaussian(std::move(mean), detail::get_field<Vector>(cj, "stddev")));
    } else if (kind == "finite-discrete") {
      comps.push_back(Component::discrete(detail::get_field<std::vector<Vector>>(cj, "support"),
                                          detail::get_field<Vector>(cj, "mass"), std::move(mean)));
    } else {
      fail(ErrorKind::parse, "unknown component kind \"" + kind + "\"");
    }
  }
  require(!comps.empty(), "mixture has no components");
  for (const auto& c : comps) require(c.dim() == dim, "component dimension differs from dim");
  require(weights.size() == comps.size(), "one weight per component required");
  std::optional<double> alpha;
  std::optional<Vector> sigma;
  if (j.contains("alpha")) alpha = detail::get_field<double>(j, "alpha");
  if (j.contains("stddev")) sigma = detail::get_field<Vector>(j, "stddev");
  if (sigma) require(sigma->size() == dim, "stddev dimension differs from dim");
  return make_mixture(std::move(comps), std::move(weights), alpha, sigma);
}

inline MixtureModel load_mixture(const std::string& path) { return mixture_from_json(load_json(path)); }

/// FNV-1a 64 over the canonical mixture JSON, as 16 hex digits.
inline std::string fingerprint(const MixtureModel& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(m).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- CSV -------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

}  // namespace detail

/// Parses `x1..xd[,label]` CSV. File labels are 1-based; stored labels are 0-based.
inline LabeledDataset parse_csv(const std::string& text, const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::parse, source + ": empty CSV");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_commas(line);
  const bool labeled = !header.empty() && header.back() == "label";
  const std::size_t d = header.size() - (labeled ? 1 : 0);
  require(d >= 1, source + ": no coordinate columns", ErrorKind::parse);
  for (std::size_t j = 0; j < d; ++j)
    require(header[j] == "x" + std::to_string(j + 1), source + ": header must be x1..xd[,label]", ErrorKind::parse);

  LabeledDataset out;
  out.points.cols = d;
  std::size_t lineno = 1;
  Vector row(d);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_commas(line);
    const std::string where = source + ":" + std::to_string(lineno);
    require(fields.size() == header.size(), where + ": wrong number of fields", ErrorKind::parse);
    for (std::size_t j = 0; j < d; ++j) {
      const auto f = fields[j];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), row[j]);
      require(res.ec == std::errc() && res.ptr == f.data() + f.size(), where + ": bad number", ErrorKind::parse);
      require(std::isfinite(row[j]), where + ": non-finite value", ErrorKind::parse);
    }
    out.points.push_back(row);
    if (labeled) {
      int lab = 0;
      const auto f = fields[d];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), lab);
      require(res.ec == std::errc() && res.ptr == f.data() + f.size() && lab >= 1, where + ": bad label",
              ErrorKind::parse);
      out.labels.push_back(lab - 1);
    }
  }
  require(out.size() >= 1, source + ": no data rows", ErrorKind::parse);
  return out;
}

inline LabeledDataset load_csv(const std::string& path) { return parse_csv(read_file(path), path); }

inline std::string to_csv(const LabeledDataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.dim(); ++j) out += (j ? ",x" : "x") + std::to_string(j + 1);
  if (data.has_labels()) out += ",label";
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
      if (j) out += ',';
      out += format_double(data.points(i, j));
    }
    if (data.has_labels()) out += "," + std::to_string(data.labels[i] + 1);
    out += '\n';
  }
  return out;
}

}  // namespace mmdt
