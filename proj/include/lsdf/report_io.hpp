#pragma once

// Text, CSV and JSON renderings of solver results and experiment reports.

#include <cmath>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lsdf/acpf.hpp"
#include "lsdf/case_model.hpp"
#include "lsdf/evaluation.hpp"
#include "lsdf/sample_store.hpp"
#include "lsdf/text.hpp"

namespace lsdf {

namespace detail {

// JSON has no NaN/Inf.
inline nlohmann::ordered_json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

inline nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
  auto a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v[i]));
  return a;
}

}  // namespace detail

inline std::string power_flow_json(const PowerFlowSolution& s, const NetworkCase& nc) {
  nlohmann::ordered_json j;
  j["case_name"] = nc.name();
  j["case_hash"] = format_hash(nc.hash());
  j["converged"] = s.converged;
  j["status"] = to_string(s.status);
  j["iterations"] = s.iterations;
  j["max_mismatch_pu"] = detail::finite_or_null(s.max_mismatch);
  j["flat_start"] = s.flat_start;
  j["total_loss_mw"] = detail::finite_or_null(s.total_branch_loss());
  auto buses = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < nc.bus_count(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    buses.push_back({{"id", nc.external_id(i)},
                     {"v_mag", detail::finite_or_null(s.v_mag[e])},
                     {"theta", detail::finite_or_null(s.theta[e])},
                     {"p_inj_mw", detail::finite_or_null(s.p_inj[e])},
                     {"q_inj_mvar", detail::finite_or_null(s.q_inj[e])},
                     {"p_shunt_mw", detail::finite_or_null(s.p_shunt[e])}});
  }
  j["buses"] = std::move(buses);
  auto branches = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < nc.branch_count(); ++l) {
    const auto e = static_cast<Eigen::Index>(l);
    const auto& br = nc.branches()[l];
    branches.push_back({{"branch", l + 1},
                        {"from", nc.external_id(br.from_bus)},
                        {"to", nc.external_id(br.to_bus)},
                        {"p_from_mw", detail::finite_or_null(s.p_from[e])},
                        {"p_to_mw", detail::finite_or_null(s.p_to[e])},
                        {"q_from_mvar", detail::finite_or_null(s.q_from[e])},
                        {"q_to_mvar", detail::finite_or_null(s.q_to[e])}});
  }
  j["branches"] = std::move(branches);
  j["mismatch_history"] = s.mismatch_history;
  return j.dump(2) + "\n";
}

/// One row per branch end.
inline std::string error_report_csv(const ErrorReport& r, const NetworkCase& nc) {
  std::string out =
      "model,branch,end,from_bus,to_bus,transformer,avg_abs_err_mw,max_abs_err_mw,"
      "argmax_scenario,true_flow_at_max_mw,predicted_at_max_mw,err_percent_at_max\n";
  for (const auto& be : r.per_branch_end) {
    const auto& br = nc.branches().at(be.branch);
    out += r.model_tag + ',' + std::to_string(be.branch + 1) + ',' + std::string(to_string(be.direction)) +
           ',' + std::to_string(nc.external_id(br.from_bus)) + ',' +
           std::to_string(nc.external_id(br.to_bus)) + ',' + (br.is_transformer ? "1" : "0") + ',' +
           text::format_double(be.avg_abs_err) + ',' + text::format_double(be.max_abs_err) + ',' +
           std::to_string(be.argmax_scenario) + ',' + text::format_double(be.true_flow_at_max) + ',' +
           text::format_double(be.predicted_at_max) + ',' + text::format_double(be.err_percent_at_max) +
           '\n';
  }
  return out;
}

inline nlohmann::ordered_json to_json(const ErrorReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model_tag;
  j["avg_err_mw"] = detail::finite_or_null(r.avg_err);
  j["max_err_mw"] = detail::finite_or_null(r.max_err);
  j["worst_branch_end"] = r.worst_branch_end;
  j["sse_mw2"] = detail::finite_or_null(r.sse);
  j["samples"] = {{"case_name", r.sample_meta.case_name},
                  {"case_hash", format_hash(r.sample_meta.case_hash)},
                  {"kind", to_string(r.sample_meta.kind)},
                  {"R", r.sample_meta.R},
                  {"K", r.sample_meta.K},
                  {"seed", r.sample_meta.seed}};
  return j;
}

inline nlohmann::ordered_json to_json(const WorstBranch& w) {
  return {{"model", w.model_tag},
          {"branch", w.branch + 1},
          {"end", to_string(w.direction)},
          {"from_bus", w.from_bus_id},
          {"to_bus", w.to_bus_id},
          {"transformer", w.is_transformer},
          {"slack_adjacent", w.slack_adjacent},
          {"scenario", w.scenario},
          {"true_flow_mw", detail::finite_or_null(w.true_flow)},
          {"predicted_mw", detail::finite_or_null(w.predicted)},
          {"abs_err_mw", detail::finite_or_null(w.abs_err)},
          {"err_percent", detail::finite_or_null(w.err_percent)}};
}

inline std::string comparison_json(const Comparison& c, const NetworkCase& nc) {
  nlohmann::ordered_json j;
  j["case_name"] = nc.name();
  j["bus_count"] = nc.bus_count();
  j["branch_count"] = nc.branch_count();
  j["R"] = c.train.R;
  j["train"] = {{"K", c.train.size()}, {"seed", c.train.seed}, {"rejected", c.train.rejected_count}};
  j["test"] = {{"K", c.test.size()}, {"seed", c.test.seed}, {"rejected", c.test.rejected_count}};
  j["rank_of_A"] = c.lsdf.rank_of_A;
  j["regularization_used"] = c.lsdf.regularization_used;
  j["lsdf"] = to_json(c.lsdf_report);
  j["ptdf"] = to_json(c.ptdf_report);
  j["lsdf_train_sse_mw2"] = c.lsdf_train_sse;
  j["ptdf_train_sse_mw2"] = c.ptdf_train_sse;
  j["avg_err_ratio_ptdf_over_lsdf"] = detail::finite_or_null(1.0 / c.avg_ratio());
  j["max_err_ratio_ptdf_over_lsdf"] = detail::finite_or_null(1.0 / c.max_ratio());
  j["worst_lsdf"] = to_json(worst_branch_drilldown(c.lsdf_report, nc));
  j["worst_ptdf"] = to_json(worst_branch_drilldown(c.ptdf_report, nc));
  return j.dump(2) + "\n";
}

inline std::string comparison_table(const Comparison& c, const NetworkCase& nc) {
  std::ostringstream os;
  os << "case " << nc.name() << "  N=" << nc.bus_count() << "  L=" << nc.branch_count()
     << "  R=" << text::format_fixed(c.train.R * 100.0, 0) << "%"
     << "  K_train=" << c.train.size() << "  K_test=" << c.test.size() << "\n";
  os << "  model " << detail::pad("avg err MW", 12) << detail::pad("max err MW", 12)
     << detail::pad("train SSE", 14) << "\n";
  auto row = [&](const ErrorReport& r, double sse) {
    os << "  " << r.model_tag << "  " << detail::pad(text::format_fixed(r.avg_err, 4), 12)
       << detail::pad(text::format_fixed(r.max_err, 4), 12)
       << detail::pad(text::format_fixed(sse, 2), 14) << "\n";
  };
  row(c.lsdf_report, c.lsdf_train_sse);
  row(c.ptdf_report, c.ptdf_train_sse);
  os << "  PTDF/LSDF avg err ratio " << text::format_fixed(1.0 / c.avg_ratio(), 1) << "\n";
  os << "  rank(A) " << c.lsdf.rank_of_A << "/" << nc.bus_count()
     << (c.lsdf.regularization_used ? " (minimum-norm solve)" : "") << "\n";
  for (const auto* r : {&c.lsdf_report, &c.ptdf_report}) {
    const auto w = worst_branch_drilldown(*r, nc);
    os << "  worst " << w.model_tag << ": branch " << w.branch + 1 << " (" << w.from_bus_id << "-"
       << w.to_bus_id << ") " << to_string(w.direction) << " end, err "
       << text::format_fixed(w.abs_err, 4) << " MW on flow " << text::format_fixed(w.true_flow, 2)
       << " MW" << (w.is_transformer ? ", transformer" : "")
       << (w.slack_adjacent ? ", slack-adjacent" : "") << "\n";
  }
  return os.str();
}

inline std::string error_report_table(const ErrorReport& r, const NetworkCase& nc) {
  std::ostringstream os;
  os << r.model_tag << " on " << r.sample_meta.case_name << " samples (K=" << r.sample_meta.K
     << ", seed " << r.sample_meta.seed << ")\n";
  os << "  avg err " << text::format_fixed(r.avg_err, 4) << " MW, max err "
     << text::format_fixed(r.max_err, 4) << " MW, SSE " << text::format_fixed(r.sse, 2) << " MW^2\n";
  const auto w = worst_branch_drilldown(r, nc);
  os << "  worst: branch " << w.branch + 1 << " (" << w.from_bus_id << "-" << w.to_bus_id << ") "
     << to_string(w.direction) << " end, scenario " << w.scenario << "\n";
  return os.str();
}

inline std::string convergence_csv(const ConvergenceCurve& c) {
  std::string out = "K,ci,avg_err_mw,factor_distance,reference_ci\n";
  for (const auto& p : c.points) {
    out += std::to_string(p.K) + ',' + text::format_double(p.ci) + ',' +
           text::format_double(p.avg_err) + ',' + text::format_double(p.factor_distance) + ',' +
           text::format_double(c.reference_ci) + '\n';
  }
  return out;
}

/// Bin rows, then the outlier counters as "underflow"/"overflow" rows.
inline std::string histogram_csv(const Histogram& h) {
  std::string out = "bin,low,high,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double c = h.center(i);
    out += std::to_string(i) + ',' + text::format_double(c - h.width / 2) + ',' +
           text::format_double(c + h.width / 2) + ',' + std::to_string(h.counts[i]) + '\n';
  }
  const double edge = h.center(h.counts.size() - 1) + h.width / 2;
  out += "underflow,-inf," + text::format_double(-edge) + ',' + std::to_string(h.underflow) + '\n';
  out += "overflow," + text::format_double(edge) + ",inf," + std::to_string(h.overflow) + '\n';
  return out;
}

}  // namespace lsdf
