#pragma once

// Error statistics of linear flow models against AC sample sets, the
// LSDF-vs-PTDF comparison pipeline, the sample-count convergence study and
// factor histograms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "lsdf/case_model.hpp"
#include "lsdf/error.hpp"
#include "lsdf/factor_matrix.hpp"
#include "lsdf/lsdf.hpp"
#include "lsdf/parallel.hpp"
#include "lsdf/ptdf.hpp"
#include "lsdf/rng.hpp"
#include "lsdf/sampling.hpp"

namespace lsdf {

enum class Direction { from_end, to_end };

inline std::string_view to_string(Direction d) { return d == Direction::from_end ? "from" : "to"; }

struct BranchEndError {
  std::size_t branch = 0;  // internal index
  Direction direction = Direction::from_end;
  double avg_abs_err = 0.0;  // MW
  double max_abs_err = 0.0;  // MW
  std::size_t argmax_scenario = 0;
  double true_flow_at_max = 0.0;       // MW
  double predicted_at_max = 0.0;       // MW
  double err_percent_at_max = 0.0;     // NaN when the true flow is zero
};

struct SampleMeta {
  std::string case_name;
  std::uint64_t case_hash = 0;
  double R = 0.0;
  std::size_t K = 0;
  std::uint64_t seed = 0;
  SampleKind kind = SampleKind::random;
};

inline SampleMeta meta_of(const SampleSet& s) {
  return {s.case_name, s.case_hash, s.R, s.size(), s.seed, s.kind};
}

/// Avg. Err is the mean absolute error over every branch end and every
/// scenario (each branch end weighted equally); Max. Err the largest
/// absolute error.
struct ErrorReport {
  std::vector<BranchEndError> per_branch_end;  // 2L entries, from block first
  double avg_err = 0.0;
  double max_err = 0.0;
  std::size_t worst_branch_end = 0;
  double sse = 0.0;  // sum of squared errors, MW^2
  std::string model_tag;
  SampleMeta sample_meta;
};

/// Scores a factor matrix on every scenario of a sample set.
inline ErrorReport evaluate(const FactorMatrix& model, const SampleSet& test, unsigned jobs = 1) {
  if (test.empty()) throw NumericalError("cannot evaluate on an empty sample set");
  if (model.case_hash != test.case_hash) {
    throw DimensionError("model and sample set come from different cases");
  }
  const auto n = model.values.cols();
  const auto rows = model.values.rows();
  if (static_cast<std::size_t>(n) != test.bus_count ||
      static_cast<std::size_t>(rows) != 2 * test.branch_count) {
    throw DimensionError("model shape does not match the sample set");
  }
  const auto k = static_cast<Eigen::Index>(test.size());
  Eigen::MatrixXd inj(n, k);
  Eigen::MatrixXd truth(rows, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& sc = test.scenarios[static_cast<std::size_t>(j)];
    inj.col(j) = sc.p_inj;
    truth.col(j) = sc.p_branch;
  }
  const Eigen::MatrixXd err = (model.values * inj - truth).cwiseAbs();

  ErrorReport rep;
  rep.model_tag = model.tag();
  rep.sample_meta = meta_of(test);
  rep.per_branch_end.resize(static_cast<std::size_t>(rows));
  std::vector<double> row_sse(static_cast<std::size_t>(rows));
  const auto nl = rows / 2;
  parallel_for(static_cast<std::size_t>(rows), jobs, [&](std::size_t r) {
    const auto ri = static_cast<Eigen::Index>(r);
    Eigen::Index arg = 0;
    const double mx = err.row(ri).maxCoeff(&arg);
    auto& be = rep.per_branch_end[r];
    be.branch = static_cast<std::size_t>(ri % nl);
    be.direction = ri < nl ? Direction::from_end : Direction::to_end;
    be.avg_abs_err = err.row(ri).mean();
    be.max_abs_err = mx;
    be.argmax_scenario = static_cast<std::size_t>(arg);
    be.true_flow_at_max = truth(ri, arg);
    be.predicted_at_max = model.values.row(ri).dot(inj.col(arg));
    be.err_percent_at_max = be.true_flow_at_max != 0.0
                                ? 100.0 * mx / std::abs(be.true_flow_at_max)
                                : std::numeric_limits<double>::quiet_NaN();
    row_sse[r] = err.row(ri).squaredNorm();
  });

  double sum_avg = 0.0;
  for (std::size_t r = 0; r < rep.per_branch_end.size(); ++r) {
    const auto& be = rep.per_branch_end[r];
    sum_avg += be.avg_abs_err;
    rep.sse += row_sse[r];
    if (be.max_abs_err > rep.max_err || r == 0) {
      rep.max_err = be.max_abs_err;
      rep.worst_branch_end = r;
    }
  }
  rep.avg_err = rows > 0 ? sum_avg / static_cast<double>(rows) : 0.0;
  return rep;
}

struct CompareOptions {
  SamplingOptions sampling;
  LsdfSolveOptions solve;
  std::optional<std::size_t> slack;  // PTDF slack; defaults to the case slack
};

struct Comparison {
  SampleSet train;
  SampleSet test;
  LsdfMatrix lsdf;
  PtdfMatrix ptdf;
  ErrorReport lsdf_report;  // on the test set
  ErrorReport ptdf_report;  // on the test set
  double lsdf_train_sse = 0.0;
  double ptdf_train_sse = 0.0;

  double avg_ratio() const { return lsdf_report.avg_err / ptdf_report.avg_err; }
  double max_ratio() const { return lsdf_report.max_err / ptdf_report.max_err; }
};

/// Sample -> fit -> PTDF -> evaluate both models on an independent test set.
inline Comparison compare(const NetworkCase& nc, double R, std::size_t k_train,
                          std::size_t k_test, std::uint64_t seed_train, std::uint64_t seed_test,
                          const CompareOptions& opts = {}) {
  Comparison out;
  std::tie(out.train, out.test) =
      split_train_test(nc, R, k_train, k_test, seed_train, seed_test, opts.sampling);
  out.lsdf = fit(out.train, opts.solve);
  out.ptdf = compute_ptdf(nc, opts.slack);
  const auto jobs = opts.sampling.jobs;
  const auto lsdf_fm = out.lsdf.factors();
  const auto ptdf_fm = expand_ptdf(out.ptdf);
  out.lsdf_report = evaluate(lsdf_fm, out.test, jobs);
  out.ptdf_report = evaluate(ptdf_fm, out.test, jobs);
  out.lsdf_train_sse = evaluate(lsdf_fm, out.train, jobs).sse;
  out.ptdf_train_sse = evaluate(ptdf_fm, out.train, jobs).sse;
  return out;
}

struct WorstBranch {
  std::string model_tag;
  std::size_t branch = 0;  // internal index; reported 1-based
  Direction direction = Direction::from_end;
  int from_bus_id = 0;
  int to_bus_id = 0;
  bool is_transformer = false;
  bool slack_adjacent = false;
  std::size_t scenario = 0;
  double true_flow = 0.0;
  double predicted = 0.0;
  double abs_err = 0.0;
  double err_percent = 0.0;
};

/// Annotates the branch end with the largest error.
inline WorstBranch worst_branch_drilldown(const ErrorReport& report, const NetworkCase& nc) {
  if (report.per_branch_end.empty()) throw NumericalError("empty error report");
  const auto& be = report.per_branch_end.at(report.worst_branch_end);
  const auto& br = nc.branches().at(be.branch);
  const auto slack = nc.slack_bus();
  WorstBranch w;
  w.model_tag = report.model_tag;
  w.branch = be.branch;
  w.direction = be.direction;
  w.from_bus_id = nc.external_id(br.from_bus);
  w.to_bus_id = nc.external_id(br.to_bus);
  w.is_transformer = br.is_transformer;
  w.slack_adjacent = slack && (br.from_bus == *slack || br.to_bus == *slack);
  w.scenario = be.argmax_scenario;
  w.true_flow = be.true_flow_at_max;
  w.predicted = be.predicted_at_max;
  w.abs_err = be.max_abs_err;
  w.err_percent = be.err_percent_at_max;
  return w;
}

struct ConvergencePoint {
  std::size_t K = 0;
  double ci = 0.0;
  double avg_err = 0.0;          // MW, on the whole reference set
  double factor_distance = 0.0;  // Frobenius distance to the reference factors
};

struct ConvergenceCurve {
  std::vector<ConvergencePoint> points;  // sorted by K
  double reference_ci = 0.0;
  double reference_avg_err = 0.0;
  std::size_t reference_size = 0;
};

/// Fits LSDF on random subsets of growing size K drawn (without
/// replacement) from a reference set and compares each fit with the fit on
/// the whole reference set.
inline ConvergenceCurve convergence_study(const SampleSet& reference,
                                          const std::vector<std::size_t>& k_schedule,
                                          std::uint64_t seed, const LsdfSolveOptions& opts = {}) {
  if (reference.empty()) throw NumericalError("empty reference set");
  if (!std::is_sorted(k_schedule.begin(), k_schedule.end())) {
    throw SamplingError("K schedule must be ascending");
  }
  const std::size_t m = reference.size();
  for (auto k : k_schedule) {
    if (k == 0 || k > m) {
      throw SamplingError("K = " + std::to_string(k) + " is outside 1.." + std::to_string(m));
    }
  }
  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto ref = solve_lsdf(accumulate_samples(reference, opts.jobs), opts);
  FactorMatrix ref_fm{ref.values, ModelKind::lsdf, reference.case_hash};

  ConvergenceCurve curve;
  curve.reference_ci = ci_indicator(ref);
  curve.reference_avg_err = evaluate(ref_fm, reference, opts.jobs).avg_err;
  curve.reference_size = m;
  for (auto k : k_schedule) {
    RandomStream rs(seed, k, 0, 0x434f4e56);  // "CONV"
    std::vector<std::size_t> idx = all;
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(rs.below(m - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    const auto x = solve_lsdf(accumulate_samples(reference, idx, opts.jobs), opts);
    FactorMatrix fm{x.values, ModelKind::lsdf, reference.case_hash};
    curve.points.push_back({k, ci_indicator(x), evaluate(fm, reference, opts.jobs).avg_err,
                            (x.values - ref.values).norm()});
  }
  return curve;
}

/// Histogram of matrix entries with bins of `width` centred on multiples of
/// `width`, covering centres -limit..limit. Entries beyond the outer bin
/// edges land in the underflow/overflow counters.
struct Histogram {
  double width = 0.05;
  double limit = 1.2;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;
  std::size_t total = 0;
  double min_value = 0.0;
  double max_value = 0.0;

  long long half_bins() const { return std::llround(limit / width); }
  double center(std::size_t i) const {
    return width * static_cast<double>(static_cast<long long>(i) - half_bins());
  }
};

inline Histogram factor_histogram(const Eigen::MatrixXd& values, double width = 0.05,
                                  double limit = 1.2) {
  if (!(width > 0.0) || !(limit >= 0.0)) throw NumericalError("invalid histogram bins");
  Histogram h;
  h.width = width;
  h.limit = limit;
  const auto half = h.half_bins();
  h.counts.assign(static_cast<std::size_t>(2 * half + 1), 0);
  h.total = static_cast<std::size_t>(values.size());
  if (values.size() > 0) {
    h.min_value = values.minCoeff();
    h.max_value = values.maxCoeff();
  }
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      const long long bin = std::llround(values(r, c) / width);
      if (bin < -half) {
        ++h.underflow;
      } else if (bin > half) {
        ++h.overflow;
      } else {
        ++h.counts[static_cast<std::size_t>(bin + half)];
      }
    }
  }
  return h;
}

}  // namespace lsdf
