#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace lsdf {

enum class ModelKind { lsdf, ptdf };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::lsdf ? "LSDF" : "PTDF"; }

/// A 2L x N linear map from bus injections to branch-end flows, rows ordered
/// [from-end block | to-end block]. Both models are compared in this form.
struct FactorMatrix {
  Eigen::MatrixXd values;
  ModelKind kind = ModelKind::lsdf;
  std::uint64_t case_hash = 0;

  Eigen::Index branch_count() const { return values.rows() / 2; }
  Eigen::Index bus_count() const { return values.cols(); }
  std::string tag() const { return std::string(to_string(kind)); }
};

}  // namespace lsdf
