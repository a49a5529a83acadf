#pragma once

// Classical DC power transfer distribution factors.

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "lsdf/case_model.hpp"
#include "lsdf/error.hpp"
#include "lsdf/factor_matrix.hpp"

namespace lsdf {

/// L x N matrix of MW-per-MW sensitivities of the from-to branch flow to an
/// injection at each bus withdrawn at the slack bus. The slack column is
/// zero. Entries follow the injection sign convention: a load at bus i
/// (negative injection) moves flow by -values(l, i).
struct PtdfMatrix {
  Eigen::MatrixXd values;
  std::size_t slack_bus = 0;
  std::uint64_t case_hash = 0;

  /// Sensitivities to a withdrawal (load) instead of an injection.
  Eigen::MatrixXd load_convention() const { return -values; }
};

/// DC construction: series resistance ignored, branch susceptance 1/(x tap),
/// nodal susceptance matrix reduced by the slack row and column.
inline PtdfMatrix compute_ptdf(const NetworkCase& nc, std::optional<std::size_t> slack = {}) {
  const auto n = static_cast<Eigen::Index>(nc.bus_count());
  const auto nl = static_cast<Eigen::Index>(nc.branch_count());
  if (!slack) slack = nc.slack_bus();
  if (!slack) throw CaseError("PTDF needs a slack bus");
  if (*slack >= nc.bus_count()) throw CaseError("slack bus index out of range");
  const auto s = static_cast<Eigen::Index>(*slack);

  Eigen::MatrixXd bbus = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(nl);
  for (Eigen::Index l = 0; l < nl; ++l) {
    const auto& br = nc.branches()[static_cast<std::size_t>(l)];
    if (!br.in_service) {
      b[l] = 0.0;
      continue;
    }
    if (br.shift != 0.0) throw CaseError("PTDF does not model phase shifters");
    if (br.x == 0.0) throw CaseError("branch " + std::to_string(l + 1) + " has zero reactance");
    b[l] = 1.0 / (br.x * br.tap);
    const auto f = static_cast<Eigen::Index>(br.from_bus);
    const auto t = static_cast<Eigen::Index>(br.to_bus);
    bbus(f, f) += b[l];
    bbus(t, t) += b[l];
    bbus(f, t) -= b[l];
    bbus(t, f) -= b[l];
  }

  // Reduced system without the slack row/column.
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != s) keep.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd reduced(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) reduced(r, c) = bbus(keep[r], keep[c]);
  }
  Eigen::MatrixXd angles_reduced;  // m x m: angle response to unit injections
  if (m > 0) {
    // Series capacitors (negative x) make the matrix indefinite, so LLT is
    // not an option.
    if (!is_connected(nc)) {
      throw NumericalError("reduced susceptance matrix is singular; the network is not connected");
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(reduced);
    if (!(lu.rcond() > 1e-14)) throw NumericalError("reduced susceptance matrix is singular");
    angles_reduced = lu.solve(Eigen::MatrixXd::Identity(m, m));
  }
  // Full angle sensitivity: slack row and column stay zero.
  Eigen::MatrixXd angles = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) angles(keep[r], keep[c]) = angles_reduced(r, c);
  }

  PtdfMatrix out;
  out.slack_bus = *slack;
  out.case_hash = nc.hash();
  out.values = Eigen::MatrixXd::Zero(nl, n);
  for (Eigen::Index l = 0; l < nl; ++l) {
    if (b[l] == 0.0) continue;
    const auto& br = nc.branches()[static_cast<std::size_t>(l)];
    const auto f = static_cast<Eigen::Index>(br.from_bus);
    const auto t = static_cast<Eigen::Index>(br.to_bus);
    out.values.row(l) = b[l] * (angles.row(f) - angles.row(t));
  }
  return out;
}

/// Single-direction (from-to) flows in MW for injections in MW.
inline Eigen::VectorXd predict_ptdf(const PtdfMatrix& ptdf, const Eigen::VectorXd& p_inj) {
  if (p_inj.size() != ptdf.values.cols()) {
    throw DimensionError("injection vector has " + std::to_string(p_inj.size()) +
                         " entries, PTDF expects " + std::to_string(ptdf.values.cols()));
  }
  return ptdf.values * p_inj;
}

/// Double-end form [+PTDF; -PTDF]: the lossless model predicts equal and
/// opposite end flows.
inline FactorMatrix expand_ptdf(const PtdfMatrix& ptdf) {
  const auto nl = ptdf.values.rows();
  FactorMatrix fm;
  fm.kind = ModelKind::ptdf;
  fm.case_hash = ptdf.case_hash;
  fm.values.resize(2 * nl, ptdf.values.cols());
  fm.values.topRows(nl) = ptdf.values;
  fm.values.bottomRows(nl) = -ptdf.values;
  return fm;
}

}  // namespace lsdf
