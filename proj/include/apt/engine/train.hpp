#pragma once

// Minibatch Adam with a held-out split and early stopping. The loss is a
// callable templated on the evaluation context,
//   loss(ctx, rows) -> 1 x 1 value (Mat) or node (ad::Var),
// returning the summed loss over `rows` (indices into the caller's data).

#include <algorithm>
#include <numeric>
#include <set>

#include "apt/core/log.hpp"
#include "apt/diffcore/adam.hpp"
#include "apt/core/rng.hpp"
#include "apt/diffcore/ops.hpp"

namespace apt {

struct TrainingConfig {
  double learning_rate = 5e-4;
  int batch_size = 100;
  int max_epochs = 500;
  int patience = 20;
  double validation_fraction = 0.1;
  int max_rejections = 50;
  bool reinitialize_each_round = false;
};

struct TrainResult {
  int epochs = 0;
  double best_validation_loss = kInf;
  std::vector<double> validation_history;  // mean loss per row, per epoch
  int rejected_steps = 0;
  int rows_touched = 0;
  long steps = 0;
};

namespace detail {

inline std::vector<std::vector<int>> make_batches(const std::vector<int>& rows, int batch, int min_batch) {
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < rows.size(); i += static_cast<std::size_t>(batch)) {
    const auto end = std::min(rows.size(), i + static_cast<std::size_t>(batch));
    std::vector<int> b(rows.begin() + static_cast<std::ptrdiff_t>(i), rows.begin() + static_cast<std::ptrdiff_t>(end));
    if (static_cast<int>(b.size()) < min_batch) {
      if (!out.empty()) out.back().insert(out.back().end(), b.begin(), b.end());
      continue;
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace detail

/// Trains `params` in place and leaves the best held-out parameters in it.
/// `min_batch` is the smallest admissible batch (2 for atomic losses).
template <class Loss>
TrainResult train_estimator(ParamVector& params, const std::vector<int>& rows, Loss&& loss,
                            const TrainingConfig& cfg, Rng& rng, int min_batch = 1) {
  if (rows.empty()) throw TrainingError("training needs at least one row");
  if (static_cast<int>(rows.size()) < min_batch)
    throw TrainingError("training needs at least " + std::to_string(min_batch) + " rows");
  if (cfg.batch_size < min_batch) throw ConfigError("batch_size is below the smallest admissible batch");
  std::vector<int> order = rows;
  std::shuffle(order.begin(), order.end(), rng);
  int n_val = static_cast<int>(std::floor(cfg.validation_fraction * static_cast<double>(order.size())));
  if (n_val > 0) n_val = std::max(n_val, min_batch);
  if (static_cast<int>(order.size()) - n_val < min_batch) n_val = 0;
  const std::vector<int> val(order.end() - n_val, order.end());
  std::vector<int> train(order.begin(), order.end() - n_val);

  TrainResult res;
  res.rows_touched = static_cast<int>(std::set<int>(order.begin(), order.end()).size());
  AdamState state(params.size(), AdamHyper{cfg.learning_rate});
  Vec best = params.values();
  int since_best = 0, consecutive_rejects = 0;

  auto validation_loss = [&]() {
    const auto& set = val.empty() ? train : val;
    ad::ValueContext ctx(params);
    double total = 0.0;
    for (const auto& b : detail::make_batches(set, cfg.batch_size, min_batch)) total += loss(ctx, b)(0, 0);
    return total / static_cast<double>(set.size());
  };

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    for (const auto& b : detail::make_batches(train, cfg.batch_size, min_batch)) {
      Vec grad;
      bool ok = true;
      try {
        ad::Tape tape(&params);
        ad::TapeContext ctx(tape);
        auto l = ad::scale(loss(ctx, b), 1.0 / static_cast<double>(b.size()));
        ok = std::isfinite(l.value()(0, 0));
        if (ok) {
          tape.backward(l);
          grad = tape.param_gradient();
          adam_step(params.values(), grad, state);
        }
      } catch (const NumericError&) {
        ok = false;
      } catch (const PrecisionNotPD&) {
        ok = false;
      }
      ++res.steps;
      if (ok) {
        consecutive_rejects = 0;
      } else {
        ++res.rejected_steps;
        if (++consecutive_rejects >= cfg.max_rejections)
          throw TrainingError("training rejected " + std::to_string(consecutive_rejects) +
                              " consecutive steps with non-finite loss or gradient");
      }
    }
    double v = kInf;
    try {
      v = validation_loss();
    } catch (const NumericError&) {
    } catch (const PrecisionNotPD&) {
    }
    res.validation_history.push_back(v);
    res.epochs = epoch + 1;
    if (std::isfinite(v) && v < res.best_validation_loss) {
      res.best_validation_loss = v;
      best = params.values();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  params.values() = best;
  return res;
}

}  // namespace apt
