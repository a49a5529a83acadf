#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace lsdf;
using namespace lsdf::test;
using Catch::Matchers::WithinAbs;

TEST_CASE("LSDF beats PTDF across load ranges", "[pipeline]") {
  for (const auto* name : {"case14", "case24_ieee_rts"}) {
    const auto nc = bundled(name);
    for (double R : {0.2, 0.4, 0.6}) {
      INFO(name << " R=" << R);
      const auto n = nc.bus_count();
      const auto c = compare(nc, R, 20 * n, 20 * n, 100, 101);
      CHECK(c.lsdf_report.avg_err * 10.0 <= c.ptdf_report.avg_err);
      CHECK(c.lsdf_report.max_err < c.ptdf_report.max_err);
      CHECK(c.lsdf_train_sse <= c.ptdf_train_sse * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("fitting from a stored sample file is bit-identical", "[pipeline]") {
  const auto nc = bundled("case30");
  const auto set = generate_samples(nc, 0.4, 600, 21);
  const auto reloaded = parse_samples(serialize_samples(set));
  const auto direct = fit(set);
  const auto via_file = fit(reloaded);
  CHECK(direct.values == via_file.values);

  const auto x = read_lsdf(lsdf_csv(direct, nc), lsdf_sidecar(direct, nc));
  const auto test = generate_samples(nc, 0.4, 100, 22);
  CHECK(evaluate(x.factors(), test).avg_err == evaluate(direct.factors(), test).avg_err);
}

TEST_CASE("held-out losses follow from injections on every case", "[pipeline]") {
  for (const auto* name : {"case5", "case24_ieee_rts", "case57"}) {
    INFO(name);
    const auto nc = bundled(name);
    const auto [train, test] = split_train_test(nc, 0.4, 20 * nc.bus_count(), 50, 31, 32);
    const auto x = fit(train);
    CHECK(identifiable_column_sum_check(x).cwiseAbs().maxCoeff() <= 1e-6);
    for (const auto& s : test.scenarios) {
      REQUIRE_THAT(total_loss_prediction(x, s.p_inj), WithinAbs(s.p_inj.sum(), 1e-4));
    }
  }
}

TEST_CASE("grid reference convergence on the 5-bus case", "[pipeline]") {
  const auto nc = bundled("case5");
  const auto grid = enumerate_grid_samples(nc, 0.5, 9);
  REQUIRE(grid.size() == 729);
  const auto curve = convergence_study(grid, {5, 10, 25, 50, 100}, 1);
  for (const auto& p : curve.points) CHECK(p.avg_err < 0.1);
  CHECK(std::abs(curve.points[3].ci / curve.reference_ci - 1.0) <= 0.02);
}
