#pragma once

#include <vector>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"

namespace apt {

/// Append-only table of simulations accumulated over rounds. Each row keeps
/// the id of the proposal its parameters were drawn from (-1: the prior).
class SimTable {
 public:
  SimTable() = default;
  SimTable(int theta_dim, int x_dim) : theta_(0, theta_dim), x_(0, x_dim) {}

  void append(int round, const Mat& thetas, const Mat& xs, int proposal_id, const std::vector<bool>& valid) {
    if (thetas.rows() != xs.rows() || static_cast<Eigen::Index>(valid.size()) != thetas.rows())
      throw ConfigError("sim table: row counts differ");
    if (thetas.cols() != theta_.cols() || xs.cols() != x_.cols()) throw ConfigError("sim table: column counts differ");
    const int last = rounds_.empty() ? 0 : rounds_.back();
    if (round != last && round != last + 1) throw ConfigError("sim table: rounds must be contiguous from 1");
    if (rounds_.empty() && round != 1) throw ConfigError("sim table: first round must be 1");
    const auto n0 = theta_.rows();
    theta_.conservativeResize(n0 + thetas.rows(), Eigen::NoChange);
    x_.conservativeResize(n0 + xs.rows(), Eigen::NoChange);
    theta_.bottomRows(thetas.rows()) = thetas;
    x_.bottomRows(xs.rows()) = xs;
    for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
      rounds_.push_back(round);
      proposal_.push_back(proposal_id);
      valid_.push_back(valid[static_cast<std::size_t>(i)]);
    }
  }

  int size() const { return static_cast<int>(theta_.rows()); }
  int rounds() const { return rounds_.empty() ? 0 : rounds_.back(); }
  const Mat& theta() const { return theta_; }
  const Mat& x() const { return x_; }
  int round_of(int row) const { return rounds_[static_cast<std::size_t>(row)]; }
  int proposal_of(int row) const { return proposal_[static_cast<std::size_t>(row)]; }
  bool valid(int row) const { return valid_[static_cast<std::size_t>(row)]; }

  /// Valid rows with round in [first, last].
  std::vector<int> rows(int first, int last) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (valid_[static_cast<std::size_t>(i)] && rounds_[static_cast<std::size_t>(i)] >= first &&
          rounds_[static_cast<std::size_t>(i)] <= last)
        out.push_back(i);
    return out;
  }

  Mat theta_rows(const std::vector<int>& idx) const { return theta_(idx, Eigen::all); }
  Mat x_rows(const std::vector<int>& idx) const { return x_(idx, Eigen::all); }

 private:
  Mat theta_;
  Mat x_;
  std::vector<int> rounds_;
  std::vector<int> proposal_;
  std::vector<bool> valid_;
};

}  // namespace apt
