#pragma once

// Reverse-mode differentiation over matrix-valued nodes.
//
// A Tape records one scalar-valued evaluation. Every node holds a dense
// matrix value; rows index samples in a batch. Only a fixed set of operators
// is provided (see ops.hpp): affine maps, elementwise tanh/exp/log/square,
// log-sum-exp, row/column selection, and fused density kernels registered
// through Tape::record by higher-level modules.

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "apt/core/errors.hpp"
#include "apt/core/linalg.hpp"
#include "apt/diffcore/params.hpp"

namespace apt::ad {

class Tape;

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Backward callback: receives the adjoint of the node's value and
  /// accumulates into its inputs via Tape::accumulate.
  using Backward = std::function<void(Tape&, const Mat&)>;

  Tape() = default;
  explicit Tape(const ParamVector* params) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const ParamVector* params() const { return params_; }

  Var constant(Mat value) {
    check_finite(value, "constant");
    nodes_.push_back(Node{std::move(value), Mat(), nullptr, "constant", false, -1});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Leaf bound to a parameter segment; repeated calls return the same node.
  Var param(int segment) {
    if (params_ == nullptr) throw ConfigError("tape has no parameter vector");
    if (auto it = param_nodes_.find(segment); it != param_nodes_.end()) return {this, it->second};
    Mat v = params_->block(segment);
    nodes_.push_back(Node{std::move(v), Mat(), nullptr, "param", true, segment});
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_.emplace(segment, id);
    return {this, id};
  }

  /// Records an operator result. `needs_grad` should be true when any input
  /// depends on parameters; otherwise the backward callback is dropped.
  Var record(Mat value, const char* op, bool needs_grad, Backward back) {
    check_finite(value, op);
    nodes_.push_back(Node{std::move(value), Mat(), needs_grad ? std::move(back) : nullptr, op, needs_grad, -1});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool needs_grad(const Var& v) const { return needs_grad(v.id()); }

  // By value so that expression arguments are evaluated once and moved in.
  void accumulate(int id, Mat delta) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = std::move(delta);
    } else {
      n.grad += delta;
    }
  }

  /// Runs reverse accumulation from a 1x1 node.
  void backward(const Var& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) throw ConfigError("backward requires a scalar node");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    auto& root = nodes_[static_cast<std::size_t>(loss.id())];
    if (!root.needs_grad) return;
    root.grad = Mat::Ones(1, 1);
    for (int id = loss.id(); id >= 0; --id) {
      auto& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.needs_grad || n.grad.size() == 0 || !n.back) continue;
      if (!all_finite(n.grad))
        throw NumericError("non-finite adjoint at node " + std::to_string(id) + " (" + n.op + ")");
      n.back(*this, n.grad);
    }
  }

  /// Adjoint of a node after backward(); zeros if it received none.
  Mat grad(const Var& v) const {
    const auto& n = nodes_[static_cast<std::size_t>(v.id())];
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Gradient with respect to the whole parameter vector; segments that did
  /// not take part in the evaluation receive exact zeros.
  Vec param_gradient() const {
    if (params_ == nullptr) throw ConfigError("tape has no parameter vector");
    Vec g = Vec::Zero(params_->size());
    for (const auto& [segment, id] : param_nodes_) {
      const auto& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.size() == 0) continue;
      const auto& s = params_->segment(segment);
      Eigen::Map<RowMat>(g.data() + s.offset, s.rows, s.cols) = n.grad;
    }
    if (!g.allFinite()) throw NumericError("non-finite parameter gradient");
    return g;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward back;
    const char* op;
    bool needs_grad;
    int segment;
  };

  // A finite sum implies finite entries; the full scan only runs otherwise.
  static bool all_finite(const Mat& v) { return std::isfinite(v.sum()) || v.allFinite(); }

  void check_finite(const Mat& v, const char* op) const {
    if (!all_finite(v))
      throw NumericError("non-finite value at node " + std::to_string(nodes_.size()) + " (" + op + ")");
  }

  const ParamVector* params_ = nullptr;
  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;
};

inline const Mat& Var::value() const { return tape_->value(id_); }

}  // namespace apt::ad
