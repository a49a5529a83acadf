#pragma once

// Sample store: one JSON header line followed by a CSV body with one row per
// scenario (k, eta_a, p_inj..., p_branch...). Values are written in shortest
// round-trip form, so a reloaded set is bit-identical to the one written.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lsdf/error.hpp"
#include "lsdf/sampling.hpp"
#include "lsdf/text.hpp"

namespace lsdf {

inline constexpr std::string_view kSampleFormatTag = "lsdf-samples";
inline constexpr int kSampleFormatVersion = 1;

inline std::string format_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t parse_hash(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error("invalid case hash '" + std::string(s) + "'");
  }
  return v;
}

inline std::string serialize_samples(const SampleSet& set) {
  nlohmann::ordered_json h;
  h["format"] = kSampleFormatTag;
  h["version"] = kSampleFormatVersion;
  h["case_name"] = set.case_name;
  h["case_hash"] = format_hash(set.case_hash);
  h["kind"] = to_string(set.kind);
  h["R"] = set.R;
  h["K"] = set.size();
  h["seed"] = set.seed;
  h["rejected_count"] = set.rejected_count;
  h["bus_count"] = set.bus_count;
  h["branch_count"] = set.branch_count;

  std::string out = h.dump() + "\n";
  out += "k,eta_a";
  for (std::size_t i = 0; i < set.bus_count; ++i) out += ",p_inj_" + std::to_string(i + 1);
  for (std::size_t l = 0; l < set.branch_count; ++l) out += ",p_from_" + std::to_string(l + 1);
  for (std::size_t l = 0; l < set.branch_count; ++l) out += ",p_to_" + std::to_string(l + 1);
  out += '\n';
  for (const auto& s : set.scenarios) {
    out += std::to_string(s.index);
    out += ',';
    out += text::format_double(s.eta_a);
    for (Eigen::Index i = 0; i < s.p_inj.size(); ++i) {
      out += ',';
      out += text::format_double(s.p_inj[i]);
    }
    for (Eigen::Index i = 0; i < s.p_branch.size(); ++i) {
      out += ',';
      out += text::format_double(s.p_branch[i]);
    }
    out += '\n';
  }
  return out;
}

inline SampleSet parse_samples(std::string_view body) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= body.size()) return false;
    auto end = body.find('\n', pos);
    if (end == std::string_view::npos) end = body.size();
    line = body.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw ParseError(1, "empty sample file");
  SampleSet set;
  std::size_t expected_k = 0;
  try {
    const auto h = nlohmann::json::parse(line);
    if (h.value("format", "") != kSampleFormatTag) throw ParseError(1, "not an lsdf sample file");
    if (h.at("version").get<int>() != kSampleFormatVersion) {
      throw ParseError(1, "unsupported sample file version");
    }
    set.case_name = h.value("case_name", "");
    set.case_hash = parse_hash(h.at("case_hash").get<std::string>());
    set.kind = h.value("kind", "random") == "grid" ? SampleKind::grid : SampleKind::random;
    set.R = h.at("R").get<double>();
    expected_k = h.at("K").get<std::size_t>();
    set.seed = h.at("seed").get<std::uint64_t>();
    set.rejected_count = h.value("rejected_count", std::size_t{0});
    set.bus_count = h.at("bus_count").get<std::size_t>();
    set.branch_count = h.at("branch_count").get<std::size_t>();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(1, std::string("bad sample header: ") + e.what());
  }

  const std::size_t n = set.bus_count;
  const std::size_t cols = 2 + n + 2 * set.branch_count;
  if (!next_line(line)) throw ParseError(2, "missing column header");
  if (text::split(line, ',').size() != cols) {
    throw ParseError(line_no, "column header has wrong width, expected " + std::to_string(cols));
  }
  set.scenarios.reserve(expected_k);
  while (next_line(line)) {
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != cols) {
      throw ParseError(line_no, "expected " + std::to_string(cols) + " columns, found " +
                                    std::to_string(cells.size()));
    }
    Scenario s;
    const auto k = text::parse_int(cells[0]);
    if (!k || *k < 0) throw ParseError(line_no, "bad scenario index");
    s.index = static_cast<std::size_t>(*k);
    auto num = [&](std::size_t c) {
      const auto v = text::parse_double(cells[c]);
      if (!v) throw ParseError(line_no, "bad number in column " + std::to_string(c + 1));
      return *v;
    };
    s.eta_a = num(1);
    s.p_inj.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) s.p_inj[static_cast<Eigen::Index>(i)] = num(2 + i);
    s.p_branch.resize(static_cast<Eigen::Index>(2 * set.branch_count));
    for (std::size_t i = 0; i < 2 * set.branch_count; ++i) {
      s.p_branch[static_cast<Eigen::Index>(i)] = num(2 + n + i);
    }
    set.scenarios.push_back(std::move(s));
  }
  if (set.size() != expected_k) {
    throw ParseError(line_no, "header says K = " + std::to_string(expected_k) + " but file has " +
                                  std::to_string(set.size()) + " rows");
  }
  set.K = set.size();
  return set;
}

}  // namespace lsdf
