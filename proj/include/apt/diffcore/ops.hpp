#pragma once

// Operator set shared by the value backend (plain Eigen matrices) and the
// taped backend (ad::Var). Network code is written once against these free
// functions and a context object (ValueContext / TapeContext).

#include <map>
#include <utility>
#include <vector>

#include "apt/diffcore/tape.hpp"

namespace apt::ad {

// ---------------------------------------------------------------- values

/// X W^T + 1 b, with W stored (out x in) and b a row vector.
inline Mat linear(const Mat& x, const Mat& w, const Mat& b) {
  Mat y = x * w.transpose();
  y.rowwise() += b.row(0);
  return y;
}
inline Mat linear_nobias(const Mat& x, const Mat& w) { return x * w.transpose(); }
inline Mat add(const Mat& a, const Mat& b) { return a + b; }
inline Mat sub(const Mat& a, const Mat& b) { return a - b; }
inline Mat mul(const Mat& a, const Mat& b) { return a.cwiseProduct(b); }
inline Mat scale(const Mat& a, double c) { return c * a; }
// Through the vectorized exp; std::tanh is scalar and dominated MAF training.
// Absolute error is below 1e-15 and the limits saturate to +-1 exactly.
inline Mat tanh(const Mat& a) { return (1.0 - 2.0 / ((2.0 * a.array()).exp() + 1.0)).matrix(); }
inline Mat exp(const Mat& a) { return a.array().exp().matrix(); }
inline Mat log(const Mat& a) { return a.array().log().matrix(); }
inline Mat square(const Mat& a) { return a.array().square().matrix(); }
inline Mat masked(const Mat& w, const Mat& mask) { return w.cwiseProduct(mask); }
inline Mat cols(const Mat& a, Eigen::Index start, Eigen::Index n) { return a.middleCols(start, n); }
inline Mat sum_all(const Mat& a) { return Mat::Constant(1, 1, a.sum()); }
inline Mat row_sum(const Mat& a) { return a.rowwise().sum(); }
inline Mat weighted_sum(const Mat& a, const Mat& w) { return Mat::Constant(1, 1, a.cwiseProduct(w).sum()); }

inline Mat gather_rows(const Mat& a, const std::vector<int>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  Mat out(n, a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double* src = a.col(c).data();
    double* dst = out.col(c).data();
    for (Eigen::Index i = 0; i < n; ++i) dst[i] = src[idx[static_cast<std::size_t>(i)]];
  }
  return out;
}

/// out[:, j] = a[:, perm[j]]
inline Mat permute_cols(const Mat& a, const std::vector<int>& perm) {
  Mat out(a.rows(), a.cols());
  for (std::size_t j = 0; j < perm.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = a.col(perm[j]);
  return out;
}

inline Mat logsumexp_rows(const Mat& a) {
  Mat out(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, 0) = log_sum_exp(a.row(i));
  return out;
}

/// Reinterprets a as (rows x cols) in row-major element order.
inline Mat reshape(const Mat& a, Eigen::Index rows, Eigen::Index cols) {
  RowMat r = a;
  return Eigen::Map<const RowMat>(r.data(), rows, cols);
}

inline Mat diagonal(const Mat& a) { return a.diagonal(); }

// ---------------------------------------------------------------- taped

namespace detail {
inline bool any_grad(std::initializer_list<Var> vs) {
  for (const auto& v : vs)
    if (v.tape()->needs_grad(v)) return true;
  return false;
}
}  // namespace detail

inline Var linear(const Var& x, const Var& w, const Var& b) {
  Tape& t = *x.tape();
  const int xi = x.id(), wi = w.id(), bi = b.id();
  return t.record(linear(x.value(), w.value(), b.value()), "linear", detail::any_grad({x, w, b}),
                  [xi, wi, bi](Tape& tp, const Mat& g) {
                    if (tp.needs_grad(xi)) tp.accumulate(xi, g * tp.value(wi));
                    if (tp.needs_grad(wi)) tp.accumulate(wi, g.transpose() * tp.value(xi));
                    if (tp.needs_grad(bi)) tp.accumulate(bi, g.colwise().sum());
                  });
}

inline Var linear_nobias(const Var& x, const Var& w) {
  Tape& t = *x.tape();
  const int xi = x.id(), wi = w.id();
  return t.record(linear_nobias(x.value(), w.value()), "linear", detail::any_grad({x, w}),
                  [xi, wi](Tape& tp, const Mat& g) {
                    if (tp.needs_grad(xi)) tp.accumulate(xi, g * tp.value(wi));
                    if (tp.needs_grad(wi)) tp.accumulate(wi, g.transpose() * tp.value(xi));
                  });
}

inline Var add(const Var& a, const Var& b) {
  const int ai = a.id(), bi = b.id();
  return a.tape()->record(a.value() + b.value(), "add", detail::any_grad({a, b}), [ai, bi](Tape& tp, const Mat& g) {
    tp.accumulate(ai, g);
    tp.accumulate(bi, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  const int ai = a.id(), bi = b.id();
  return a.tape()->record(a.value() - b.value(), "sub", detail::any_grad({a, b}), [ai, bi](Tape& tp, const Mat& g) {
    tp.accumulate(ai, g);
    tp.accumulate(bi, -g);
  });
}

inline Var mul(const Var& a, const Var& b) {
  const int ai = a.id(), bi = b.id();
  return a.tape()->record(a.value().cwiseProduct(b.value()), "mul", detail::any_grad({a, b}),
                          [ai, bi](Tape& tp, const Mat& g) {
                            if (tp.needs_grad(ai)) tp.accumulate(ai, g.cwiseProduct(tp.value(bi)));
                            if (tp.needs_grad(bi)) tp.accumulate(bi, g.cwiseProduct(tp.value(ai)));
                          });
}

inline Var scale(const Var& a, double c) {
  const int ai = a.id();
  return a.tape()->record(c * a.value(), "scale", detail::any_grad({a}),
                          [ai, c](Tape& tp, const Mat& g) { tp.accumulate(ai, c * g); });
}

inline Var tanh(const Var& a) {
  const int ai = a.id();
  Mat v = tanh(a.value());
  Mat keep = v;
  return a.tape()->record(std::move(v), "tanh", detail::any_grad({a}),
                          [ai, keep = std::move(keep)](Tape& tp, const Mat& g) {
                            tp.accumulate(ai, g.cwiseProduct((1.0 - keep.array().square()).matrix()));
                          });
}

inline Var exp(const Var& a) {
  const int ai = a.id();
  Mat v = exp(a.value());
  Mat keep = v;
  return a.tape()->record(std::move(v), "exp", detail::any_grad({a}),
                          [ai, keep = std::move(keep)](Tape& tp, const Mat& g) { tp.accumulate(ai, g.cwiseProduct(keep)); });
}

inline Var log(const Var& a) {
  const int ai = a.id();
  return a.tape()->record(log(a.value()), "log", detail::any_grad({a}), [ai](Tape& tp, const Mat& g) {
    tp.accumulate(ai, g.cwiseQuotient(tp.value(ai)));
  });
}

inline Var square(const Var& a) {
  const int ai = a.id();
  return a.tape()->record(square(a.value()), "square", detail::any_grad({a}), [ai](Tape& tp, const Mat& g) {
    tp.accumulate(ai, 2.0 * g.cwiseProduct(tp.value(ai)));
  });
}

inline Var masked(const Var& w, const Mat& mask) {
  const int wi = w.id();
  return w.tape()->record(masked(w.value(), mask), "masked", detail::any_grad({w}),
                          [wi, mask](Tape& tp, const Mat& g) { tp.accumulate(wi, g.cwiseProduct(mask)); });
}

inline Var cols(const Var& a, Eigen::Index start, Eigen::Index n) {
  const int ai = a.id();
  const auto r = a.rows(), c = a.cols();
  return a.tape()->record(cols(a.value(), start, n), "cols", detail::any_grad({a}),
                          [ai, r, c, start, n](Tape& tp, const Mat& g) {
                            Mat full = Mat::Zero(r, c);
                            full.middleCols(start, n) = g;
                            tp.accumulate(ai, full);
                          });
}

inline Var sum_all(const Var& a) {
  const int ai = a.id();
  const auto r = a.rows(), c = a.cols();
  return a.tape()->record(sum_all(a.value()), "sum", detail::any_grad({a}), [ai, r, c](Tape& tp, const Mat& g) {
    tp.accumulate(ai, Mat::Constant(r, c, g(0, 0)));
  });
}

inline Var row_sum(const Var& a) {
  const int ai = a.id();
  const auto c = a.cols();
  return a.tape()->record(row_sum(a.value()), "row_sum", detail::any_grad({a}),
                          [ai, c](Tape& tp, const Mat& g) { tp.accumulate(ai, g.replicate(1, c)); });
}

/// sum(w .* a) with constant weights w.
inline Var weighted_sum(const Var& a, const Mat& w) {
  const int ai = a.id();
  return a.tape()->record(weighted_sum(a.value(), w), "weighted_sum", detail::any_grad({a}),
                          [ai, w](Tape& tp, const Mat& g) { tp.accumulate(ai, g(0, 0) * w); });
}

inline Var gather_rows(const Var& a, const std::vector<int>& idx) {
  const int ai = a.id();
  const auto r = a.rows();
  return a.tape()->record(gather_rows(a.value(), idx), "gather_rows", detail::any_grad({a}),
                          [ai, r, idx](Tape& tp, const Mat& g) {
                            Mat acc = Mat::Zero(r, g.cols());
                            for (Eigen::Index c = 0; c < g.cols(); ++c) {
                              const double* src = g.col(c).data();
                              double* dst = acc.col(c).data();
                              for (std::size_t i = 0; i < idx.size(); ++i) dst[idx[i]] += src[i];
                            }
                            tp.accumulate(ai, std::move(acc));
                          });
}

inline Var permute_cols(const Var& a, const std::vector<int>& perm) {
  const int ai = a.id();
  return a.tape()->record(permute_cols(a.value(), perm), "permute_cols", detail::any_grad({a}),
                          [ai, perm](Tape& tp, const Mat& g) {
                            Mat back(g.rows(), g.cols());
                            for (std::size_t j = 0; j < perm.size(); ++j) back.col(perm[j]) = g.col(static_cast<Eigen::Index>(j));
                            tp.accumulate(ai, back);
                          });
}

inline Var logsumexp_rows(const Var& a) {
  const int ai = a.id();
  Mat out = logsumexp_rows(a.value());
  Mat keep = out;
  return a.tape()->record(std::move(out), "logsumexp", detail::any_grad({a}),
                          [ai, keep = std::move(keep)](Tape& tp, const Mat& g) {
                            const Mat& x = tp.value(ai);
                            Mat soft = (x.colwise() - keep.col(0)).array().exp().matrix();
                            tp.accumulate(ai, soft.array().colwise() * g.col(0).array());
                          });
}

inline Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  const int ai = a.id();
  const auto r0 = a.rows(), c0 = a.cols();
  return a.tape()->record(reshape(a.value(), rows, cols), "reshape", detail::any_grad({a}),
                          [ai, r0, c0](Tape& tp, const Mat& g) { tp.accumulate(ai, reshape(g, r0, c0)); });
}

inline Var diagonal(const Var& a) {
  const int ai = a.id();
  const auto r = a.rows(), c = a.cols();
  return a.tape()->record(diagonal(a.value()), "diagonal", detail::any_grad({a}), [ai, r, c](Tape& tp, const Mat& g) {
    Mat full = Mat::Zero(r, c);
    full.diagonal() = g.col(0);
    tp.accumulate(ai, full);
  });
}

// ---------------------------------------------------------------- contexts

/// Evaluation without recording. Parameter blocks and masked weights are
/// cached, so a context can be reused for many evaluations.
class ValueContext {
 public:
  using Value = Mat;

  explicit ValueContext(const ParamVector& params) : params_(&params) {}

  const Mat& param(int segment) {
    auto it = cache_.find(segment);
    if (it == cache_.end()) it = cache_.emplace(segment, Mat(params_->block(segment))).first;
    return it->second;
  }
  const Mat& masked_param(int segment, const Mat& mask) {
    auto it = masked_cache_.find(segment);
    if (it == masked_cache_.end()) it = masked_cache_.emplace(segment, param(segment).cwiseProduct(mask)).first;
    return it->second;
  }
  Mat constant(Mat m) const { return m; }

 private:
  const ParamVector* params_;
  std::map<int, Mat> cache_;
  std::map<int, Mat> masked_cache_;
};

/// Evaluation recorded on a Tape.
class TapeContext {
 public:
  using Value = Var;

  explicit TapeContext(Tape& tape) : tape_(&tape) {}

  Var param(int segment) { return tape_->param(segment); }
  Var masked_param(int segment, const Mat& mask) {
    auto it = masked_.find(segment);
    if (it == masked_.end()) it = masked_.emplace(segment, masked(tape_->param(segment), mask)).first;
    return it->second;
  }
  Var constant(Mat m) const { return tape_->constant(std::move(m)); }
  Tape& tape() { return *tape_; }

 private:
  Tape* tape_;
  std::map<int, Var> masked_;
};

}  // namespace apt::ad
