#pragma once

#include <string>
#include <utility>
#include <vector>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"

namespace apt {

/// A named (rows x cols) block of a flat parameter vector. Blocks are stored
/// row-major.
struct Segment {
  std::string name;
  Eigen::Index offset = 0;
  int rows = 0;
  int cols = 0;
  Eigen::Index size() const { return static_cast<Eigen::Index>(rows) * cols; }
};

/// Flat vector of network weights with a layout of named segments.
class ParamVector {
 public:
  ParamVector() = default;

  /// Appends a zero-initialized segment; returns its index.
  int add_segment(std::string name, int rows, int cols) {
    if (rows < 1 || cols < 1) throw ConfigError("segment '" + name + "' must have positive shape");
    Segment s{std::move(name), values_.size(), rows, cols};
    const auto old = values_.size();
    values_.conservativeResize(old + s.size());
    values_.segment(old, s.size()).setZero();
    layout_.push_back(std::move(s));
    return static_cast<int>(layout_.size()) - 1;
  }

  Eigen::Index size() const { return values_.size(); }
  const Vec& values() const { return values_; }
  Vec& values() { return values_; }
  const std::vector<Segment>& layout() const { return layout_; }
  const Segment& segment(int idx) const { return layout_.at(static_cast<std::size_t>(idx)); }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < layout_.size(); ++i)
      if (layout_[i].name == name) return static_cast<int>(i);
    throw ConfigError("no parameter segment named '" + name + "'");
  }

  Eigen::Map<RowMat> block(int idx) {
    const auto& s = segment(idx);
    return {values_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const RowMat> block(int idx) const {
    const auto& s = segment(idx);
    return {values_.data() + s.offset, s.rows, s.cols};
  }

  /// Replaces the values, keeping the layout.
  void assign(const Vec& v) {
    if (v.size() != values_.size()) throw ConfigError("parameter vector size mismatch");
    values_ = v;
  }

  /// True when segments are disjoint, contiguous and cover the vector.
  bool layout_consistent() const {
    Eigen::Index next = 0;
    for (const auto& s : layout_) {
      if (s.offset != next) return false;
      next += s.size();
    }
    return next == values_.size();
  }

  bool same_layout(const ParamVector& other) const {
    if (layout_.size() != other.layout_.size()) return false;
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      const auto& a = layout_[i];
      const auto& b = other.layout_[i];
      if (a.name != b.name || a.offset != b.offset || a.rows != b.rows || a.cols != b.cols) return false;
    }
    return true;
  }

 private:
  Vec values_;
  std::vector<Segment> layout_;
};

}  // namespace apt
