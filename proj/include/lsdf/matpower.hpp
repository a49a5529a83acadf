#pragma once

// Reader for the MATPOWER version-2 case format subset used by the toolkit:
// mpc.baseMVA plus the bus, gen and branch matrices. Other assignments
// (gencost, bus_name, areas, ...) are skipped.

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "lsdf/case_model.hpp"
#include "lsdf/error.hpp"
#include "lsdf/text.hpp"

namespace lsdf {

namespace detail {

struct MatrixRow {
  std::size_t line = 0;
  std::vector<double> values;
};

struct MatpowerTables {
  std::string function_name;
  std::optional<double> base_mva;
  std::size_t base_mva_line = 0;
  std::map<std::string, std::vector<MatrixRow>, std::less<>> matrices;
};

inline std::string_view strip_comment(std::string_view line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') in_quote = !in_quote;
    if (line[i] == '%' && !in_quote) return line.substr(0, i);
  }
  return line;
}

inline MatpowerTables scan_matpower(std::string_view text) {
  MatpowerTables out;
  enum class Mode { top, matrix, cell } mode = Mode::top;
  std::string current;  // matrix being filled
  MatrixRow row;
  std::size_t line_no = 0;

  auto flush_row = [&](std::size_t ln) {
    if (!row.values.empty()) {
      row.line = ln;
      out.matrices[current].push_back(std::move(row));
    }
    row = {};
  };

  auto consume_matrix_text = [&](std::string_view s, std::size_t ln) {
    std::size_t i = 0;
    while (i < s.size()) {
      char c = s[i];
      if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
        ++i;
      } else if (c == ';') {
        flush_row(ln);
        ++i;
      } else if (c == ']') {
        flush_row(ln);
        mode = Mode::top;
        auto rest = text::trim(s.substr(i + 1));
        if (!rest.empty() && rest != ";") {
          throw ParseError(ln, "unexpected text after ']'");
        }
        return;
      } else {
        auto end = s.find_first_of(" \t,;]\r", i);
        if (end == std::string_view::npos) end = s.size();
        auto token = s.substr(i, end - i);
        auto v = text::parse_double(token);
        if (!v) {
          throw ParseError(ln, "invalid number '" + std::string(token) + "' in mpc." + current);
        }
        row.values.push_back(*v);
        i = end;
      }
    }
    flush_row(ln);  // a newline also terminates a row
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    auto line = text::trim(strip_comment(raw));

    if (mode == Mode::matrix) {
      consume_matrix_text(line, line_no);
      continue;
    }
    if (mode == Mode::cell) {
      if (line.find('}') != std::string_view::npos) mode = Mode::top;
      continue;
    }
    if (line.empty()) continue;

    if (line.starts_with("function")) {
      auto eq = line.find('=');
      if (eq != std::string_view::npos) {
        out.function_name = std::string(text::trim(line.substr(eq + 1)));
      }
      continue;
    }
    if (!line.starts_with("mpc.")) {
      throw ParseError(line_no, "expected an 'mpc.<field> = ...' assignment");
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(line_no, "missing '=' in assignment");
    }
    auto field = std::string(text::trim(line.substr(4, eq - 4)));
    auto value = text::trim(line.substr(eq + 1));
    if (value.starts_with("[")) {
      if (out.matrices.contains(field)) {
        throw ParseError(line_no, "mpc." + field + " assigned twice");
      }
      current = field;
      out.matrices[current];
      mode = Mode::matrix;
      consume_matrix_text(value.substr(1), line_no);
    } else if (value.starts_with("{")) {
      if (value.find('}') == std::string_view::npos) mode = Mode::cell;
    } else if (field == "baseMVA") {
      if (value.ends_with(";")) value.remove_suffix(1);
      auto v = text::parse_double(value);
      if (!v) throw ParseError(line_no, "invalid baseMVA value");
      out.base_mva = *v;
      out.base_mva_line = line_no;
    }
    // Any other scalar assignment (version, ...) is ignored.
  }
  if (mode == Mode::matrix) {
    throw ParseError(line_no, "unterminated matrix mpc." + current);
  }
  return out;
}

}  // namespace detail

/// Parses MATPOWER case text. Bus loads are taken as the max-load profile.
/// A branch counts as a transformer when its ratio column is nonzero.
inline NetworkCase parse_matpower(std::string_view text, std::string fallback_name = "case") {
  if (text::trim(text).empty()) throw ParseError(1, "empty case text");
  auto tables = detail::scan_matpower(text);

  if (!tables.base_mva) throw ParseError(0, "missing required field mpc.baseMVA");
  for (const char* name : {"bus", "gen", "branch"}) {
    if (!tables.matrices.contains(name)) {
      throw ParseError(0, std::string("missing required table mpc.") + name);
    }
  }
  const double base = *tables.base_mva;
  if (!(base > 0.0)) throw ParseError(tables.base_mva_line, "baseMVA must be positive");
  constexpr double deg = std::numbers::pi / 180.0;

  auto require_cols = [](const detail::MatrixRow& r, std::size_t n, const char* table) {
    if (r.values.size() < n) {
      throw ParseError(r.line, std::string("mpc.") + table + " row needs at least " +
                                   std::to_string(n) + " columns, got " +
                                   std::to_string(r.values.size()));
    }
  };
  auto as_int = [](const detail::MatrixRow& r, double v, const char* what) {
    if (v != std::floor(v) || std::abs(v) > 2e9) {
      throw ParseError(r.line, std::string(what) + " must be an integer");
    }
    return static_cast<int>(v);
  };

  std::vector<Bus> buses;
  std::map<int, std::size_t> index;
  for (const auto& r : tables.matrices.at("bus")) {
    require_cols(r, 10, "bus");
    Bus b;
    b.external_id = as_int(r, r.values[0], "bus id");
    switch (as_int(r, r.values[1], "bus type")) {
      case 1: b.kind = BusKind::pq; break;
      case 2: b.kind = BusKind::pv; break;
      case 3: b.kind = BusKind::slack; break;
      default: throw ParseError(r.line, "unsupported bus type");
    }
    b.p_load_max = r.values[2];
    b.q_load_max = r.values[3];
    b.shunt_g = r.values[4] / base;
    b.shunt_b = r.values[5] / base;
    b.v_init = r.values[7];
    b.theta_init = r.values[8] * deg;
    b.base_kv = r.values[9];
    if (!index.emplace(b.external_id, buses.size()).second) {
      throw ParseError(r.line, "duplicate bus id " + std::to_string(b.external_id));
    }
    buses.push_back(b);
  }

  auto lookup = [&](const detail::MatrixRow& r, double v) {
    int id = as_int(r, v, "bus reference");
    auto it = index.find(id);
    if (it == index.end()) {
      throw ParseError(r.line, "reference to unknown bus " + std::to_string(id));
    }
    return it->second;
  };

  std::vector<Generator> gens;
  for (const auto& r : tables.matrices.at("gen")) {
    require_cols(r, 8, "gen");
    Generator g;
    g.bus = lookup(r, r.values[0]);
    g.p_set = r.values[1];
    g.q_set = r.values[2];
    g.v_set = r.values[5];
    g.in_service = r.values[7] > 0.0;
    gens.push_back(g);
  }

  std::vector<Branch> branches;
  for (const auto& r : tables.matrices.at("branch")) {
    require_cols(r, 11, "branch");
    Branch br;
    br.from_bus = lookup(r, r.values[0]);
    br.to_bus = lookup(r, r.values[1]);
    br.r = r.values[2];
    br.x = r.values[3];
    br.b_charging = r.values[4];
    const double ratio = r.values[8];
    br.tap = ratio == 0.0 ? 1.0 : ratio;
    br.shift = r.values[9] * deg;
    br.in_service = r.values[10] > 0.0;
    br.is_transformer = ratio != 0.0;
    if (br.in_service && br.shift != 0.0) {
      throw ParseError(r.line, "phase-shifting branches are not supported");
    }
    branches.push_back(br);
  }

  std::string name = tables.function_name.empty() ? std::move(fallback_name)
                                                  : tables.function_name;
  try {
    return NetworkCase(std::move(name), base, std::move(buses), std::move(branches),
                       std::move(gens));
  } catch (const CaseError& e) {
    throw ParseError(0, e.what());
  }
}

}  // namespace lsdf
