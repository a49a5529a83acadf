#pragma once

// Canonical JSON case schema (see docs/case_schema.md) and format-agnostic
// case loading.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lsdf/case_model.hpp"
#include "lsdf/error.hpp"
#include "lsdf/matpower.hpp"

namespace lsdf {

inline constexpr std::string_view kCaseFormatTag = "lsdf-case";
inline constexpr int kCaseFormatVersion = 1;

inline nlohmann::ordered_json to_json(const NetworkCase& nc) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["format"] = kCaseFormatTag;
  j["version"] = kCaseFormatVersion;
  j["name"] = nc.name();
  j["base_mva"] = nc.base_mva();

  auto& buses = j["buses"] = ordered_json::array();
  for (const auto& b : nc.buses()) {
    buses.push_back({{"id", b.external_id},
                     {"kind", to_string(b.kind)},
                     {"p_load_max", b.p_load_max},
                     {"q_load_max", b.q_load_max},
                     {"shunt_g", b.shunt_g},
                     {"shunt_b", b.shunt_b},
                     {"v_init", b.v_init},
                     {"theta_init", b.theta_init},
                     {"base_kv", b.base_kv}});
  }
  auto& branches = j["branches"] = ordered_json::array();
  for (const auto& br : nc.branches()) {
    branches.push_back({{"from", nc.external_id(br.from_bus)},
                        {"to", nc.external_id(br.to_bus)},
                        {"r", br.r},
                        {"x", br.x},
                        {"b", br.b_charging},
                        {"tap", br.tap},
                        {"shift", br.shift},
                        {"transformer", br.is_transformer},
                        {"in_service", br.in_service}});
  }
  auto& gens = j["generators"] = ordered_json::array();
  for (const auto& g : nc.generators()) {
    gens.push_back({{"bus", nc.external_id(g.bus)},
                    {"p_set", g.p_set},
                    {"q_set", g.q_set},
                    {"v_set", g.v_set},
                    {"in_service", g.in_service}});
  }
  return j;
}

inline std::string serialize_case_json(const NetworkCase& nc) { return to_json(nc).dump(2) + "\n"; }

namespace detail {

inline BusKind parse_bus_kind(const std::string& s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "slack" || lower == "ref") return BusKind::slack;
  if (lower == "pv") return BusKind::pv;
  if (lower == "pq") return BusKind::pq;
  throw ParseError(0, "unknown bus kind '" + s + "'");
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

}  // namespace detail

/// Builds a NetworkCase from the canonical JSON schema. Optional fields take
/// their defaults (tap 1, in service, flat voltage, no shunt).
inline NetworkCase from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ParseError(0, "case JSON must be an object");
    for (const char* key : {"base_mva", "buses", "branches", "generators"}) {
      if (!j.contains(key)) throw ParseError(0, std::string("missing required table '") + key + "'");
    }
    std::vector<Bus> buses;
    std::map<int, std::size_t> index;
    for (const auto& jb : j.at("buses")) {
      Bus b;
      b.external_id = jb.at("id").get<int>();
      b.kind = detail::parse_bus_kind(jb.value("kind", std::string("PQ")));
      b.p_load_max = jb.value("p_load_max", 0.0);
      b.q_load_max = jb.value("q_load_max", 0.0);
      b.shunt_g = jb.value("shunt_g", 0.0);
      b.shunt_b = jb.value("shunt_b", 0.0);
      b.v_init = jb.value("v_init", 1.0);
      b.theta_init = jb.value("theta_init", 0.0);
      b.base_kv = jb.value("base_kv", 0.0);
      if (!index.emplace(b.external_id, buses.size()).second) {
        throw ParseError(0, "duplicate bus id " + std::to_string(b.external_id));
      }
      buses.push_back(b);
    }
    auto lookup = [&](int id) {
      auto it = index.find(id);
      if (it == index.end()) throw ParseError(0, "reference to unknown bus " + std::to_string(id));
      return it->second;
    };
    std::vector<Branch> branches;
    for (const auto& jl : j.at("branches")) {
      Branch br;
      br.from_bus = lookup(jl.at("from").get<int>());
      br.to_bus = lookup(jl.at("to").get<int>());
      br.r = jl.value("r", 0.0);
      br.x = jl.at("x").get<double>();
      br.b_charging = jl.value("b", 0.0);
      br.tap = jl.value("tap", 1.0);
      br.shift = jl.value("shift", 0.0);
      br.in_service = jl.value("in_service", true);
      br.is_transformer = jl.value("transformer", false) || br.tap != 1.0;
      branches.push_back(br);
    }
    std::vector<Generator> gens;
    for (const auto& jg : j.at("generators")) {
      Generator g;
      g.bus = lookup(jg.at("bus").get<int>());
      g.p_set = jg.value("p_set", 0.0);
      g.q_set = jg.value("q_set", 0.0);
      g.v_set = jg.value("v_set", 1.0);
      g.in_service = jg.value("in_service", true);
      gens.push_back(g);
    }
    return NetworkCase(j.value("name", std::string("case")), j.at("base_mva").get<double>(),
                       std::move(buses), std::move(branches), std::move(gens));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("invalid case JSON: ") + e.what());
  } catch (const CaseError& e) {
    throw ParseError(0, e.what());
  }
}

inline NetworkCase parse_case_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(detail::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1),
                     "JSON syntax error");
  }
  return from_json(j);
}

/// Parses case text in either supported format: canonical JSON (first
/// non-blank character '{') or MATPOWER.
inline NetworkCase parse_case(std::string_view text, std::string fallback_name = "case") {
  auto body = text::trim(text);
  if (body.empty()) throw ParseError(1, "empty case text");
  if (body.front() == '{') return parse_case_json(text);
  return parse_matpower(text, std::move(fallback_name));
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
  if (!out) throw IoError("write failed for " + path.string());
}

inline NetworkCase load_case(const std::filesystem::path& path) {
  return parse_case(read_text_file(path), path.stem().string());
}

}  // namespace lsdf
