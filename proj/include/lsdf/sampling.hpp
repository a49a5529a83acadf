#pragma once

// Scenario generation: randomized load scaling around the max-load profile
// followed by an AC power flow per scenario.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lsdf/acpf.hpp"
#include "lsdf/case_model.hpp"
#include "lsdf/error.hpp"
#include "lsdf/parallel.hpp"
#include "lsdf/rng.hpp"

namespace lsdf {

/// One converged operating point. p_inj is the net injection into the
/// branch network (generation - load - shunt consumption), so its sum equals
/// the total branch loss. p_branch holds 2L values: all from-end flows, then
/// all to-end flows.
struct Scenario {
  std::size_t index = 0;
  double eta_a = 1.0;
  Eigen::VectorXd p_inj;
  Eigen::VectorXd p_branch;
  // Diagnostics; not persisted by the sample store.
  Eigen::VectorXd v_mag, theta;
  Eigen::VectorXd load_p, load_q;

  double total_loss() const { return p_branch.sum(); }
};

enum class SampleKind { random, grid };

inline std::string_view to_string(SampleKind k) { return k == SampleKind::random ? "random" : "grid"; }

struct SampleSet {
  std::vector<Scenario> scenarios;
  double R = 0.0;
  std::size_t K = 0;
  std::uint64_t seed = 0;
  std::string case_name;
  std::uint64_t case_hash = 0;
  std::size_t rejected_count = 0;
  std::size_t bus_count = 0;
  std::size_t branch_count = 0;
  SampleKind kind = SampleKind::random;

  std::size_t size() const noexcept { return scenarios.size(); }
  bool empty() const noexcept { return scenarios.empty(); }
};

struct SamplingOptions {
  double bus_eta_low = 0.95;   // per-bus jitter range for P and Q
  double bus_eta_high = 1.05;
  unsigned jobs = 1;
  std::size_t window = 32;          // scenarios per rejection-rate window
  int max_attempts = 16;            // redraws allowed for a single scenario
  double max_rejection_rate = 0.5;  // per window
  SolverOptions solver;
};

/// Generator active set-points for a given demand: every non-slack unit is
/// scaled by total demand / total max demand; the slack absorbs the rest.
inline std::vector<double> dispatch_generators(const NetworkCase& nc,
                                               const Eigen::VectorXd& load_p) {
  const auto pmax = nc.p_load_max();
  double total_max = 0.0;
  for (double v : pmax) total_max += v;
  const double ratio = total_max != 0.0 ? load_p.sum() / total_max : 1.0;
  const auto slack = nc.slack_bus();
  std::vector<double> out = nc.generator_setpoints();
  for (std::size_t g = 0; g < out.size(); ++g) {
    if (slack && nc.generators()[g].bus == *slack) continue;
    out[g] *= ratio;
  }
  return out;
}

/// Runs the power flow for one demand vector. Returns nothing when the
/// solve does not converge.
inline std::optional<Scenario> solve_scenario(const PowerFlowSolver& solver, std::size_t index,
                                              double eta_a, LoadProfile loads) {
  const auto& nc = solver.network();
  const auto gen_p = dispatch_generators(nc, loads.p);
  auto pf = solver.solve(loads, gen_p);
  if (!pf.converged) return std::nullopt;
  const auto nl = static_cast<Eigen::Index>(nc.branch_count());
  Scenario sc;
  sc.index = index;
  sc.eta_a = eta_a;
  sc.p_inj = pf.network_injection();
  sc.p_branch.resize(2 * nl);
  sc.p_branch.head(nl) = pf.p_from;
  sc.p_branch.tail(nl) = pf.p_to;
  sc.v_mag = std::move(pf.v_mag);
  sc.theta = std::move(pf.theta);
  sc.load_p = std::move(loads.p);
  sc.load_q = std::move(loads.q);
  return sc;
}

namespace detail {

inline constexpr std::uint64_t kLoadStreamTag = 0x4c4f4144;  // "LOAD"

inline SampleSet empty_set(const NetworkCase& nc, double R, std::uint64_t seed, SampleKind kind) {
  SampleSet s;
  s.R = R;
  s.seed = seed;
  s.case_name = nc.name();
  s.case_hash = nc.hash();
  s.bus_count = nc.bus_count();
  s.branch_count = nc.branch_count();
  s.kind = kind;
  return s;
}

}  // namespace detail

/// Draws the demand for scenario k, attempt a. eta_A ~ U[1-R, 1] is shared
/// by all buses; per-bus P and Q jitters are independent.
inline LoadProfile draw_loads(const NetworkCase& nc, double R, std::uint64_t seed, std::size_t k,
                              std::size_t attempt, const SamplingOptions& opts, double& eta_a) {
  RandomStream rs(seed, k, attempt, detail::kLoadStreamTag);
  eta_a = rs.uniform(1.0 - R, 1.0);
  const auto n = static_cast<Eigen::Index>(nc.bus_count());
  LoadProfile loads{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = nc.buses()[static_cast<std::size_t>(i)];
    const double eta_p = rs.uniform(opts.bus_eta_low, opts.bus_eta_high);
    const double eta_q = rs.uniform(opts.bus_eta_low, opts.bus_eta_high);
    loads.p[i] = b.p_load_max * eta_a * eta_p;
    loads.q[i] = b.q_load_max * eta_a * eta_q;
  }
  return loads;
}

/// Builds RS(R, K). Non-converged draws are redrawn and counted; the result
/// is independent of opts.jobs.
inline SampleSet generate_samples(const NetworkCase& nc, double R, std::size_t K,
                                  std::uint64_t seed, const SamplingOptions& opts = {}) {
  if (!(R >= 0.0 && R < 1.0)) throw SamplingError("R must lie in [0, 1)");
  if (K == 0) throw SamplingError("K must be at least 1");
  if (!(opts.bus_eta_low <= opts.bus_eta_high)) throw SamplingError("invalid per-bus eta range");

  const PowerFlowSolver solver(nc, opts.solver);
  auto set = detail::empty_set(nc, R, seed, SampleKind::random);
  set.K = K;
  std::vector<std::optional<Scenario>> slots(K);
  std::vector<std::size_t> rejected(K, 0);

  const std::size_t window = std::max<std::size_t>(1, opts.window);
  for (std::size_t begin = 0; begin < K; begin += window) {
    const std::size_t end = std::min(K, begin + window);
    parallel_for(end - begin, opts.jobs, [&](std::size_t j) {
      const std::size_t k = begin + j;
      for (int a = 0; a < opts.max_attempts; ++a) {
        double eta_a = 1.0;
        auto loads = draw_loads(nc, R, seed, k, static_cast<std::size_t>(a), opts, eta_a);
        auto sc = solve_scenario(solver, k, eta_a, std::move(loads));
        if (sc) {
          slots[k] = std::move(sc);
          return;
        }
        ++rejected[k];
      }
    });
    std::size_t window_rejected = 0;
    std::size_t window_failed = 0;
    for (std::size_t k = begin; k < end; ++k) {
      window_rejected += rejected[k];
      if (!slots[k]) ++window_failed;
    }
    const auto attempts = static_cast<double>(window_rejected + (end - begin) - window_failed);
    if (window_failed > 0 ||
        static_cast<double>(window_rejected) > opts.max_rejection_rate * attempts) {
      throw SamplingError("power flow rejected " + std::to_string(window_rejected) + " of " +
                          std::to_string(static_cast<std::size_t>(attempts)) +
                          " draws for scenarios " + std::to_string(begin) + ".." +
                          std::to_string(end - 1) + " of " + nc.name() + " at R = " +
                          std::to_string(R) + "; the load range is likely too wide for this case");
    }
    set.rejected_count += window_rejected;
  }
  set.scenarios.reserve(K);
  for (auto& s : slots) set.scenarios.push_back(std::move(*s));
  return set;
}

/// Two independent sample sets (training, testing) from distinct seeds.
inline std::pair<SampleSet, SampleSet> split_train_test(const NetworkCase& nc, double R,
                                                        std::size_t k_train, std::size_t k_test,
                                                        std::uint64_t seed_train,
                                                        std::uint64_t seed_test,
                                                        const SamplingOptions& opts = {}) {
  if (seed_train == seed_test) {
    throw SamplingError("training and test sets need distinct seeds");
  }
  auto train = generate_samples(nc, R, k_train, seed_train, opts);
  auto test = generate_samples(nc, R, k_test, seed_test, opts);
  return {std::move(train), std::move(test)};
}

inline constexpr std::size_t kMaxGridLoadBuses = 6;
inline constexpr std::size_t kMaxGridScenarios = 1'000'000;

/// Cartesian grid of evenly spaced load levels in [1-R, 1] x max-load for
/// every bus with nonzero active load, enumerated lexicographically (first
/// load bus varies slowest). Reactive load follows at constant power factor.
/// Non-converged grid points are dropped and counted in rejected_count;
/// eta_a records total demand / total max demand.
inline SampleSet enumerate_grid_samples(const NetworkCase& nc, double R,
                                        std::size_t points_per_load,
                                        const SamplingOptions& opts = {}) {
  if (!(R >= 0.0 && R < 1.0)) throw SamplingError("R must lie in [0, 1)");
  if (points_per_load < 2) throw SamplingError("need at least 2 points per load");
  std::vector<std::size_t> load_buses;
  for (std::size_t i = 0; i < nc.bus_count(); ++i) {
    if (nc.buses()[i].p_load_max != 0.0) load_buses.push_back(i);
  }
  if (load_buses.size() > kMaxGridLoadBuses) {
    throw SamplingError("grid enumeration supports at most " + std::to_string(kMaxGridLoadBuses) +
                        " load buses, case has " + std::to_string(load_buses.size()));
  }
  std::size_t total = 1;
  for (std::size_t j = 0; j < load_buses.size(); ++j) {
    total *= points_per_load;
    if (total > kMaxGridScenarios) throw SamplingError("grid would exceed 10^6 scenarios");
  }

  const PowerFlowSolver solver(nc, opts.solver);
  const auto pmax = nc.p_load_max();
  const auto qmax = nc.q_load_max();
  double total_max = 0.0;
  for (double v : pmax) total_max += v;
  const auto n = static_cast<Eigen::Index>(nc.bus_count());

  std::vector<std::optional<Scenario>> slots(total);
  parallel_for(total, opts.jobs, [&](std::size_t g) {
    LoadProfile loads{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      loads.p[i] = pmax[static_cast<std::size_t>(i)];
      loads.q[i] = qmax[static_cast<std::size_t>(i)];
    }
    std::size_t rest = g;
    for (std::size_t j = load_buses.size(); j-- > 0;) {
      const std::size_t level = rest % points_per_load;
      rest /= points_per_load;
      const double scale =
          (1.0 - R) + R * static_cast<double>(level) / static_cast<double>(points_per_load - 1);
      const auto bus = static_cast<Eigen::Index>(load_buses[j]);
      loads.p[bus] *= scale;
      loads.q[bus] *= scale;
    }
    const double eta = total_max != 0.0 ? loads.p.sum() / total_max : 1.0;
    slots[g] = solve_scenario(solver, g, eta, std::move(loads));
  });

  auto set = detail::empty_set(nc, R, 0, SampleKind::grid);
  set.scenarios.reserve(total);
  for (auto& s : slots) {
    if (!s) {
      ++set.rejected_count;
      continue;
    }
    s->index = set.scenarios.size();
    set.scenarios.push_back(std::move(*s));
  }
  set.K = set.scenarios.size();
  return set;
}

/// Subset of a sample set, keeping provenance. Indices are renumbered.
inline SampleSet select_scenarios(const SampleSet& from, const std::vector<std::size_t>& which) {
  SampleSet out = from;
  out.scenarios.clear();
  out.scenarios.reserve(which.size());
  for (auto i : which) {
    out.scenarios.push_back(from.scenarios.at(i));
    out.scenarios.back().index = out.scenarios.size() - 1;
  }
  out.K = out.scenarios.size();
  return out;
}

}  // namespace lsdf
