#pragma once

// CSV export/import of LSDF and PTDF matrices with a JSON sidecar.
//
// LSDF: 2L rows, labelled from_<branch> then to_<branch>.
// PTDF: L rows, labelled by branch number.
// Header row: label column, then external bus ids. Branch numbers are
// 1-based positions in the case branch table.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lsdf/case_model.hpp"
#include "lsdf/error.hpp"
#include "lsdf/lsdf.hpp"
#include "lsdf/ptdf.hpp"
#include "lsdf/sample_store.hpp"
#include "lsdf/text.hpp"

namespace lsdf {

inline constexpr std::string_view kFactorFormatTag = "lsdf-factors";

struct FactorTable {
  std::vector<int> bus_ids;
  std::vector<std::string> row_labels;
  Eigen::MatrixXd values;
};

inline std::string serialize_factor_table(const FactorTable& t, std::string_view corner) {
  std::string out(corner);
  for (int id : t.bus_ids) out += "," + std::to_string(id);
  out += '\n';
  for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
    out += t.row_labels.at(static_cast<std::size_t>(r));
    for (Eigen::Index c = 0; c < t.values.cols(); ++c) {
      out += ',';
      out += text::format_double(t.values(r, c));
    }
    out += '\n';
  }
  return out;
}

inline FactorTable parse_factor_table(std::string_view body) {
  FactorTable t;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto end = body.find('\n', pos);
    if (end == std::string_view::npos) end = body.size();
    const auto line = text::trim(body.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto cells = text::split(line, ',');
    if (line_no == 1) {
      for (std::size_t c = 1; c < cells.size(); ++c) {
        const auto id = text::parse_int(cells[c]);
        if (!id) throw ParseError(line_no, "bad bus id in header column " + std::to_string(c + 1));
        t.bus_ids.push_back(static_cast<int>(*id));
      }
      continue;
    }
    if (cells.size() != t.bus_ids.size() + 1) {
      throw ParseError(line_no, "expected " + std::to_string(t.bus_ids.size() + 1) + " columns");
    }
    t.row_labels.emplace_back(text::trim(cells[0]));
    auto& row = rows.emplace_back();
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto v = text::parse_double(cells[c]);
      if (!v) throw ParseError(line_no, "bad number in column " + std::to_string(c + 1));
      row.push_back(*v);
    }
  }
  if (line_no == 0) throw ParseError(1, "empty factor file");
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.bus_ids.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return t;
}

namespace detail {

inline void check_shape(const NetworkCase& nc, const Eigen::MatrixXd& m, std::size_t rows) {
  if (m.cols() != static_cast<Eigen::Index>(nc.bus_count()) ||
      m.rows() != static_cast<Eigen::Index>(rows)) {
    throw DimensionError("factor matrix does not fit case " + nc.name());
  }
}

inline nlohmann::json parse_sidecar(std::string_view text, std::string_view model) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, std::string("bad sidecar: ") + e.what());
  }
  if (j.value("format", "") != kFactorFormatTag) throw ParseError(1, "not an lsdf factor sidecar");
  if (j.value("model", "") != model) {
    throw ParseError(1, "sidecar describes a " + j.value("model", std::string("?")) +
                            " matrix, expected " + std::string(model));
  }
  return j;
}

}  // namespace detail

inline std::string lsdf_csv(const LsdfMatrix& x, const NetworkCase& nc) {
  detail::check_shape(nc, x.values, 2 * nc.branch_count());
  FactorTable t{nc.external_ids(), {}, x.values};
  for (std::size_t l = 0; l < nc.branch_count(); ++l) t.row_labels.push_back("from_" + std::to_string(l + 1));
  for (std::size_t l = 0; l < nc.branch_count(); ++l) t.row_labels.push_back("to_" + std::to_string(l + 1));
  return serialize_factor_table(t, "branch_end");
}

inline std::string lsdf_sidecar(const LsdfMatrix& x, const NetworkCase& nc) {
  nlohmann::ordered_json j;
  j["format"] = kFactorFormatTag;
  j["model"] = "LSDF";
  j["case_name"] = nc.name();
  j["case_hash"] = format_hash(x.training_meta.case_hash);
  j["bus_count"] = x.values.cols();
  j["branch_count"] = x.values.rows() / 2;
  j["rank_of_A"] = x.rank_of_A;
  j["regularization_used"] = x.regularization_used;
  j["ridge"] = x.ridge;
  j["training_meta"] = {{"R", x.training_meta.R},
                        {"K", x.training_meta.K},
                        {"seed", x.training_meta.seed},
                        {"case_name", x.training_meta.case_name}};
  return j.dump(2) + "\n";
}

inline LsdfMatrix read_lsdf(std::string_view csv, std::string_view sidecar) {
  const auto j = detail::parse_sidecar(sidecar, "LSDF");
  auto t = parse_factor_table(csv);
  LsdfMatrix x;
  x.values = std::move(t.values);
  if (x.values.cols() != j.at("bus_count").get<Eigen::Index>() ||
      x.values.rows() != 2 * j.at("branch_count").get<Eigen::Index>()) {
    throw DimensionError("factor CSV shape disagrees with its sidecar");
  }
  x.rank_of_A = j.at("rank_of_A").get<std::size_t>();
  x.regularization_used = j.at("regularization_used").get<bool>();
  x.ridge = j.value("ridge", 0.0);
  const auto& m = j.at("training_meta");
  x.training_meta.R = m.at("R").get<double>();
  x.training_meta.K = m.at("K").get<std::size_t>();
  x.training_meta.seed = m.at("seed").get<std::uint64_t>();
  x.training_meta.case_name = m.value("case_name", "");
  x.training_meta.case_hash = parse_hash(j.at("case_hash").get<std::string>());
  return x;
}

inline std::string ptdf_csv(const PtdfMatrix& p, const NetworkCase& nc) {
  detail::check_shape(nc, p.values, nc.branch_count());
  FactorTable t{nc.external_ids(), {}, p.values};
  for (std::size_t l = 0; l < nc.branch_count(); ++l) t.row_labels.push_back(std::to_string(l + 1));
  return serialize_factor_table(t, "branch");
}

inline std::string ptdf_sidecar(const PtdfMatrix& p, const NetworkCase& nc) {
  nlohmann::ordered_json j;
  j["format"] = kFactorFormatTag;
  j["model"] = "PTDF";
  j["case_name"] = nc.name();
  j["case_hash"] = format_hash(p.case_hash);
  j["bus_count"] = p.values.cols();
  j["branch_count"] = p.values.rows();
  j["slack_bus"] = nc.external_id(p.slack_bus);
  j["slack_index"] = p.slack_bus;
  j["sign_convention"] = "injection";
  return j.dump(2) + "\n";
}

inline PtdfMatrix read_ptdf(std::string_view csv, std::string_view sidecar) {
  const auto j = detail::parse_sidecar(sidecar, "PTDF");
  auto t = parse_factor_table(csv);
  PtdfMatrix p;
  p.values = std::move(t.values);
  if (p.values.cols() != j.at("bus_count").get<Eigen::Index>() ||
      p.values.rows() != j.at("branch_count").get<Eigen::Index>()) {
    throw DimensionError("factor CSV shape disagrees with its sidecar");
  }
  p.slack_bus = j.at("slack_index").get<std::size_t>();
  p.case_hash = parse_hash(j.at("case_hash").get<std::string>());
  return p;
}

}  // namespace lsdf
