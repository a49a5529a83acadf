#pragma once

// Least-squares distribution factors.
//
// For every branch end l the factors x_l minimise
//     sum_k (P_l^(k) - x_l P^(k))^2
// over the training scenarios. All 2L problems share the Gram matrix
// A = sum_k P^(k) P^(k)^T, so they reduce to one system A X^T = B with
// B = [b_1 ... b_2L], b_l = sum_k P_l^(k) P^(k). A is factorised once and the
// factorisation is reused for every column of B.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lsdf/error.hpp"
#include "lsdf/factor_matrix.hpp"
#include "lsdf/parallel.hpp"
#include "lsdf/sampling.hpp"

namespace lsdf {

/// Running sums of the normal equations. Powers in MW, so A, B and c are
/// in MW^2.
class NormalEquations {
 public:
  NormalEquations() = default;
  NormalEquations(Eigen::Index bus_count, Eigen::Index branch_end_count)
      : a_(Eigen::MatrixXd::Zero(bus_count, bus_count)),
        b_(Eigen::MatrixXd::Zero(bus_count, branch_end_count)),
        c_(Eigen::VectorXd::Zero(branch_end_count)) {}

  void accumulate(const Eigen::VectorXd& p_inj, const Eigen::VectorXd& p_branch) {
    if (p_inj.size() != a_.rows() || p_branch.size() != b_.cols()) {
      throw DimensionError("scenario dimensions (" + std::to_string(p_inj.size()) + ", " +
                           std::to_string(p_branch.size()) + ") do not match normal equations (" +
                           std::to_string(a_.rows()) + ", " + std::to_string(b_.cols()) + ")");
    }
    a_.noalias() += p_inj * p_inj.transpose();
    b_.noalias() += p_inj * p_branch.transpose();
    c_ += p_branch.cwiseAbs2();
    ++count_;
  }

  void accumulate(const Scenario& s) { accumulate(s.p_inj, s.p_branch); }

  /// Adds another partial sum (e.g. from a separate shard).
  void merge(const NormalEquations& other) {
    if (other.a_.rows() != a_.rows() || other.b_.cols() != b_.cols()) {
      throw DimensionError("cannot merge normal equations of different sizes");
    }
    a_ += other.a_;
    b_ += other.b_;
    c_ += other.c_;
    count_ += other.count_;
  }

  const Eigen::MatrixXd& A() const noexcept { return a_; }
  const Eigen::MatrixXd& B() const noexcept { return b_; }
  const Eigen::VectorXd& c() const noexcept { return c_; }
  std::size_t count() const noexcept { return count_; }
  Eigen::Index bus_count() const noexcept { return a_.rows(); }
  Eigen::Index branch_end_count() const noexcept { return b_.cols(); }

  /// Training sum of squared errors of row x for branch end l:
  /// x A x^T - 2 b_l^T x^T + c_l.
  double sse(Eigen::Index l, const Eigen::RowVectorXd& x) const {
    return (x * a_ * x.transpose())(0, 0) - 2.0 * x.dot(b_.col(l)) + c_[l];
  }

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd b_;
  Eigen::VectorXd c_;
  std::size_t count_ = 0;
};

struct TrainingMeta {
  double R = 0.0;
  std::size_t K = 0;
  std::uint64_t seed = 0;
  std::uint64_t case_hash = 0;
  std::string case_name;
};

struct LsdfMatrix {
  Eigen::MatrixXd values;  // 2L x N, rows [from-end | to-end]
  std::size_t rank_of_A = 0;
  bool regularization_used = false;
  double ridge = 0.0;
  TrainingMeta training_meta;
  /// Orthonormal basis of null(A), N x (N - rank). Empty when A has full
  /// rank or the matrix was imported from disk.
  Eigen::MatrixXd null_basis;

  Eigen::Index branch_count() const { return values.rows() / 2; }
  Eigen::Index bus_count() const { return values.cols(); }
  auto from_block() const { return values.topRows(branch_count()); }
  auto to_block() const { return values.bottomRows(branch_count()); }

  FactorMatrix factors() const { return {values, ModelKind::lsdf, training_meta.case_hash}; }
};

struct LsdfSolveOptions {
  double ridge = 0.0;  // Tikhonov term added to A; 0 disables
  unsigned jobs = 1;
  /// Eigenvalues of A at or below rank_tolerance * max eigenvalue count as
  /// zero.
  double rank_tolerance = 1e-12;
};

namespace detail {

/// Solves columns of rhs with `solve` in fixed-size column blocks.
template <typename Solve>
Eigen::MatrixXd solve_columns(const Eigen::MatrixXd& rhs, unsigned jobs, Solve&& solve) {
  constexpr Eigen::Index block = 64;
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  const auto blocks = static_cast<std::size_t>((rhs.cols() + block - 1) / block);
  parallel_for(blocks, jobs, [&](std::size_t bi) {
    const auto start = static_cast<Eigen::Index>(bi) * block;
    const auto width = std::min(block, rhs.cols() - start);
    out.middleCols(start, width) = solve(rhs.middleCols(start, width));
  });
  return out;
}

}  // namespace detail

/// Solves A X^T = B. Full-rank A uses one Cholesky factorisation shared by
/// all columns. Rank-deficient A falls back to the minimum-norm solution
/// through the eigendecomposition and sets regularization_used.
inline LsdfMatrix solve_lsdf(const NormalEquations& ne, const LsdfSolveOptions& opts = {}) {
  if (ne.count() == 0) throw NumericalError("cannot solve normal equations without samples");
  const Eigen::MatrixXd& a = ne.A();
  const Eigen::MatrixXd& b = ne.B();
  const auto n = a.rows();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of A failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double lambda_max = n > 0 ? std::max(0.0, lambda[n - 1]) : 0.0;
  const double cutoff = opts.rank_tolerance * lambda_max;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda[i] > cutoff) ++rank;
  }

  LsdfMatrix out;
  out.rank_of_A = static_cast<std::size_t>(rank);
  out.ridge = opts.ridge;
  if (rank < n) out.null_basis = eig.eigenvectors().leftCols(n - rank);

  Eigen::MatrixXd xt;  // N x 2L
  bool solved = false;
  if (opts.ridge > 0.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(a + opts.ridge * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success) throw NumericalError("ridge-regularised A is not positive definite");
    xt = detail::solve_columns(b, opts.jobs, [&](const auto& cols) { return Eigen::MatrixXd(llt.solve(cols)); });
    out.regularization_used = true;
    solved = true;
  } else if (rank == n && n > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      xt = detail::solve_columns(b, opts.jobs, [&](const auto& cols) { return Eigen::MatrixXd(llt.solve(cols)); });
      solved = true;
    }
  }
  if (!solved) {
    // Minimum-norm: X^T = V_r diag(1/lambda_r) V_r^T B over the range of A.
    const Eigen::MatrixXd vr = eig.eigenvectors().rightCols(rank);
    const Eigen::VectorXd inv = lambda.tail(rank).cwiseInverse();
    xt = detail::solve_columns(b, opts.jobs, [&](const auto& cols) {
      return Eigen::MatrixXd(vr * (inv.asDiagonal() * (vr.transpose() * cols)));
    });
    out.regularization_used = true;
  }
  out.values = xt.transpose();
  return out;
}

/// Scenarios per accumulation shard. Fixed so results do not depend on the
/// number of worker threads.
inline constexpr std::size_t kAccumulationShard = 512;

/// Normal equations over the listed scenarios, summed shard by shard in the
/// order given.
inline NormalEquations accumulate_samples(const SampleSet& samples,
                                          const std::vector<std::size_t>& indices,
                                          unsigned jobs = 1) {
  const auto n = static_cast<Eigen::Index>(samples.bus_count);
  const auto rows = static_cast<Eigen::Index>(2 * samples.branch_count);
  const std::size_t shards = (indices.size() + kAccumulationShard - 1) / kAccumulationShard;
  std::vector<NormalEquations> parts(shards, NormalEquations(n, rows));
  parallel_for(shards, jobs, [&](std::size_t s) {
    const std::size_t end = std::min(indices.size(), (s + 1) * kAccumulationShard);
    for (std::size_t j = s * kAccumulationShard; j < end; ++j) {
      parts[s].accumulate(samples.scenarios.at(indices[j]));
    }
  });
  NormalEquations total(n, rows);
  for (const auto& p : parts) total.merge(p);
  return total;
}

inline NormalEquations accumulate_samples(const SampleSet& samples, unsigned jobs = 1) {
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return accumulate_samples(samples, all, jobs);
}

/// Fits LSDF to a sample set.
inline LsdfMatrix fit(const SampleSet& samples, const LsdfSolveOptions& opts = {}) {
  if (samples.empty()) throw NumericalError("cannot fit LSDF to an empty sample set");
  auto out = solve_lsdf(accumulate_samples(samples, opts.jobs), opts);
  out.training_meta = {samples.R, samples.size(), samples.seed, samples.case_hash, samples.case_name};
  return out;
}

/// Approximate branch-end flows (2L, MW) for injections in MW.
inline Eigen::VectorXd predict_lsdf(const LsdfMatrix& x, const Eigen::VectorXd& p_inj) {
  if (p_inj.size() != x.values.cols()) {
    throw DimensionError("injection vector has " + std::to_string(p_inj.size()) +
                         " entries, LSDF expects " + std::to_string(x.values.cols()));
  }
  return x.values * p_inj;
}

/// Per-bus deviation of sum_l (x_{l+} + x_{l-}) from 1. Zero when the
/// factors conserve total loss exactly.
inline Eigen::VectorXd column_sum_check(const Eigen::MatrixXd& values) {
  return values.colwise().sum().transpose() - Eigen::VectorXd::Ones(values.cols());
}

inline Eigen::VectorXd column_sum_check(const LsdfMatrix& x) { return column_sum_check(x.values); }

/// Column-sum deviation restricted to the directions the training data
/// spans (range of A). For a rank-deficient A the minimum-norm factors only
/// satisfy A (sum_l x_l^T) = A e, so components in null(A) are projected out.
inline Eigen::VectorXd identifiable_column_sum_check(const LsdfMatrix& x) {
  Eigen::VectorXd d = column_sum_check(x.values);
  if (x.null_basis.cols() > 0) d -= x.null_basis * (x.null_basis.transpose() * d);
  return d;
}

/// Predicted total loss sum_l (P_l+ + P_l-), MW.
inline double total_loss_prediction(const LsdfMatrix& x, const Eigen::VectorXd& p_inj) {
  return predict_lsdf(x, p_inj).sum();
}

/// Half the Frobenius norm of the factor matrix.
inline double ci_indicator(const Eigen::MatrixXd& values) { return 0.5 * values.norm(); }
inline double ci_indicator(const LsdfMatrix& x) { return ci_indicator(x.values); }

}  // namespace lsdf
