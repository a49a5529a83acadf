#pragma once

#include <filesystem>
#include <string>

#include "lsdf/all.hpp"

namespace lsdf::test {

inline std::filesystem::path fixture_path(const std::string& file) {
  return std::filesystem::path(LSDF_TEST_DATA) / file;
}

inline NetworkCase fixture(const std::string& file) { return load_case(fixture_path(file)); }

inline NetworkCase bundled(const std::string& name) {
  return load_case(std::filesystem::path(LSDF_CASE_DIR) / (name + ".m"));
}

inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace lsdf::test
