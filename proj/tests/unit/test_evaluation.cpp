#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "support.hpp"

using namespace lsdf;
using namespace lsdf::test;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Two buses, one branch, three scenarios with hand-picked numbers.
SampleSet tiny_set() {
  SampleSet s;
  s.bus_count = 2;
  s.branch_count = 1;
  s.case_hash = 0xabc;
  s.case_name = "tiny";
  const double inj[3][2] = {{10, -8}, {20, -18}, {5, -5}};
  const double flows[3][2] = {{10, -8}, {20, -18}, {5, -5}};
  for (std::size_t k = 0; k < 3; ++k) {
    Scenario sc;
    sc.index = k;
    sc.p_inj = Eigen::Vector2d(inj[k][0], inj[k][1]);
    sc.p_branch = Eigen::Vector2d(flows[k][0], flows[k][1]);
    s.scenarios.push_back(sc);
  }
  s.K = 3;
  return s;
}

}  // namespace

TEST_CASE("error statistics on a hand-computed example", "[evaluation]") {
  // Model predicts from-end = -p2, to-end = p2: from-end errors 2, 2, 0;
  // to-end errors 0, 0, 0.
  FactorMatrix fm;
  fm.values.resize(2, 2);
  fm.values << 0, -1,
               0, 1;
  fm.case_hash = 0xabc;
  fm.kind = ModelKind::ptdf;
  const auto r = evaluate(fm, tiny_set());
  REQUIRE(r.per_branch_end.size() == 2);
  const auto& from = r.per_branch_end[0];
  CHECK(from.direction == Direction::from_end);
  CHECK_THAT(from.avg_abs_err, WithinAbs(4.0 / 3.0, 1e-12));
  CHECK(from.max_abs_err == 2.0);
  CHECK(from.argmax_scenario == 0);  // first of the tied scenarios
  CHECK(from.true_flow_at_max == 10.0);
  CHECK(from.predicted_at_max == 8.0);
  CHECK_THAT(from.err_percent_at_max, WithinAbs(20.0, 1e-12));
  const auto& to = r.per_branch_end[1];
  CHECK(to.direction == Direction::to_end);
  CHECK(to.max_abs_err == 0.0);
  CHECK_THAT(r.avg_err, WithinAbs(2.0 / 3.0, 1e-12));
  CHECK(r.max_err == 2.0);
  CHECK(r.worst_branch_end == 0);
  CHECK_THAT(r.sse, WithinAbs(8.0, 1e-12));
  CHECK(r.model_tag == "PTDF");
  CHECK(r.sample_meta.K == 3);
}

TEST_CASE("zero true flow gives an undefined percentage", "[evaluation]") {
  auto set = tiny_set();
  set.scenarios[2].p_branch[0] = 0.0;
  FactorMatrix fm;
  fm.values = Eigen::MatrixXd::Zero(2, 2);
  fm.values(0, 0) = 1.0;
  fm.case_hash = 0xabc;
  const auto r = evaluate(fm, set);
  CHECK(r.per_branch_end[0].argmax_scenario == 2);
  CHECK(std::isnan(r.per_branch_end[0].err_percent_at_max));
}

TEST_CASE("mismatched inputs are rejected", "[evaluation]") {
  FactorMatrix fm;
  fm.values = Eigen::MatrixXd::Zero(2, 2);
  fm.case_hash = 0xdef;
  CHECK_THROWS_AS(evaluate(fm, tiny_set()), DimensionError);
  fm.case_hash = 0xabc;
  fm.values = Eigen::MatrixXd::Zero(4, 2);
  CHECK_THROWS_AS(evaluate(fm, tiny_set()), DimensionError);
  SampleSet empty;
  CHECK_THROWS_AS(evaluate(fm, empty), NumericalError);
}

TEST_CASE("evaluation ignores scenario order and worker count", "[evaluation]") {
  const auto nc = bundled("case14");
  const auto set = generate_samples(nc, 0.4, 200, 6);
  const auto fm = expand_ptdf(compute_ptdf(nc));
  const auto base = evaluate(fm, set);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::reverse(order.begin(), order.end());
  const auto rev = evaluate(fm, select_scenarios(set, order));
  CHECK_THAT(rev.avg_err, WithinRel(base.avg_err, 1e-9));
  CHECK(rev.max_err == base.max_err);
  const auto par = evaluate(fm, set, 4);
  CHECK(par.avg_err == base.avg_err);
  CHECK(par.sse == base.sse);
}

TEST_CASE("two-bus comparison shows the loss error of PTDF", "[evaluation]") {
  const auto nc = fixture("two_bus.json");
  const auto c = compare(nc, 0.4, 40, 40, 1, 2);
  CHECK(c.lsdf_report.avg_err < 0.01);
  CHECK(c.ptdf_report.avg_err > 1.0);
  // PTDF puts the whole loss on the from end; the to end is exact up to the
  // power flow tolerance (1e-8 pu).
  const auto& from = c.ptdf_report.per_branch_end[0];
  const auto& to = c.ptdf_report.per_branch_end[1];
  CHECK_THAT(to.max_abs_err, WithinAbs(0.0, 1e-6));
  CHECK(from.max_abs_err > 5.0);
  CHECK(c.lsdf_train_sse <= c.ptdf_train_sse);
  CHECK(c.avg_ratio() < 0.01);

  const auto w = worst_branch_drilldown(c.ptdf_report, nc);
  CHECK(w.branch == 0);
  CHECK(w.direction == Direction::from_end);
  CHECK(w.slack_adjacent);
  CHECK_FALSE(w.is_transformer);
  CHECK(w.from_bus_id == 1);
  CHECK(w.to_bus_id == 2);
}

TEST_CASE("worst branch drilldown flags transformers", "[evaluation]") {
  const auto nc = fixture("radial.json");
  ErrorReport r;
  r.model_tag = "LSDF";
  r.per_branch_end.resize(8);
  r.per_branch_end[6].branch = 2;
  r.per_branch_end[6].direction = Direction::to_end;
  r.per_branch_end[6].max_abs_err = 3.0;
  r.worst_branch_end = 6;
  const auto w = worst_branch_drilldown(r, nc);
  CHECK(w.is_transformer);
  CHECK_FALSE(w.slack_adjacent);
  CHECK(w.from_bus_id == 20);
  CHECK(w.to_bus_id == 40);
  CHECK(w.abs_err == 3.0);
}

TEST_CASE("factor histogram bins", "[evaluation]") {
  Eigen::MatrixXd m(2, 4);
  m << 0.0, 1.0, -1.0, 0.02,
       0.03, -1.3, 2.0, 1.2;
  const auto h = factor_histogram(m);
  REQUIRE(h.counts.size() == 49);
  CHECK(h.total == 8);
  CHECK(h.underflow == 1);
  CHECK(h.overflow == 1);
  const std::size_t zero_bin = 24;
  CHECK(h.center(zero_bin) == 0.0);
  CHECK(h.counts[zero_bin] == 2);      // 0.0, 0.02
  CHECK(h.counts[zero_bin + 1] == 1);  // 0.03
  CHECK(h.counts[zero_bin + 20] == 1);
  CHECK(h.counts[zero_bin - 20] == 1);
  CHECK(h.counts.back() == 1);
  CHECK(h.min_value == -1.3);
  CHECK(h.max_value == 2.0);
  std::size_t sum = h.underflow + h.overflow;
  for (auto c : h.counts) sum += c;
  CHECK(sum == h.total);

  const auto csv = histogram_csv(h);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 49 + 2);
}

TEST_CASE("PTDF histogram of the two-bus case", "[evaluation]") {
  const auto h = factor_histogram(compute_ptdf(fixture("two_bus.json")).load_convention());
  CHECK(h.counts[24] == 1);
  CHECK(h.counts[44] == 1);
}

TEST_CASE("convergence study reaches the reference exactly", "[evaluation]") {
  const auto nc = bundled("case5");
  const auto ref = generate_samples(nc, 0.5, 250, 3);
  const auto curve = convergence_study(ref, {5, 10, 25, 50, 250}, 8);
  REQUIRE(curve.points.size() == 5);
  CHECK(curve.reference_size == 250);
  const auto& last = curve.points.back();
  CHECK(last.factor_distance == 0.0);
  CHECK(last.ci == curve.reference_ci);
  CHECK(last.avg_err == curve.reference_avg_err);
  CHECK(curve.points[3].factor_distance < curve.points[0].factor_distance);

  CHECK(convergence_study(ref, {10, 50}, 8).points[0].ci == curve.points[1].ci);
  CHECK_THROWS_AS(convergence_study(ref, {50, 10}, 8), SamplingError);
  CHECK_THROWS_AS(convergence_study(ref, {251}, 8), SamplingError);
  const auto csv = convergence_csv(curve);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("comparison renders as table, CSV and JSON", "[evaluation]") {
  const auto nc = bundled("case5");
  const auto c = compare(nc, 0.4, 100, 100, 7, 8);
  const auto table = comparison_table(c, nc);
  CHECK(table.find("LSDF") != std::string::npos);
  CHECK(table.find("PTDF") != std::string::npos);
  const auto csv = error_report_csv(c.lsdf_report, nc);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 12);
  const auto j = nlohmann::json::parse(comparison_json(c, nc));
  CHECK(j["lsdf"]["avg_err_mw"].get<double>() == c.lsdf_report.avg_err);
  CHECK(j["test"]["seed"].get<int>() == 8);
}
