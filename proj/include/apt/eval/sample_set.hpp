#pragma once

#include <string>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"

namespace apt {

/// Posterior draws, one per row, with a free-form tag saying where they came
/// from ("apt-atomic round 3", "two_moons grid", ...).
struct SampleSet {
  Mat draws;
  std::string provenance;

  SampleSet() = default;
  SampleSet(Mat d, std::string tag = {}) : draws(std::move(d)), provenance(std::move(tag)) {}

  Eigen::Index size() const { return draws.rows(); }
  Eigen::Index dim() const { return draws.cols(); }

  void check(Eigen::Index min_rows = 1) const {
    if (draws.rows() < min_rows)
      throw ConfigError("sample set '" + provenance + "' needs at least " + std::to_string(min_rows) + " rows");
    if (!draws.allFinite()) throw NumericError("sample set '" + provenance + "' has non-finite entries");
  }
};

}  // namespace apt
