#pragma once

#include "brs/common.hpp"

namespace brs {

/// REINFORCE training of the small IPD policy network against the
/// tree-search detective.
struct IpdTrainConfig {
  int iterations = 5000;
  int batch_size = 32;  // episodes per update
  int hidden = 16;
  double lr = 3e-4;            // SGD on the detective-shaped term
  double self_play_lr = 3e-4;  // SGD on the self-play term
  double baseline_decay = 0.99;
  bool self_play = true;

  void validate() const {
    if (iterations < 0) throw ConfigError("ipd_train.iterations must be >= 0");
    if (batch_size < 1) throw ConfigError("ipd_train.batch_size must be >= 1");
    if (hidden < 1) throw ConfigError("ipd_train.hidden must be >= 1");
    if (!(lr >= 0.0) || !(self_play_lr >= 0.0)) throw ConfigError("ipd_train learning rates must be >= 0");
    if (baseline_decay < 0.0 || baseline_decay >= 1.0) throw ConfigError("ipd_train.baseline_decay must lie in [0, 1)");
  }
};

/// Memory-one training on exact discounted values.
struct AnalyticConfig {
  int iterations = 500;
  double discount = 0.96;
  double lr = 0.05;        // Adam on the agent's logits
  double inner_lr = 1.0;   // gradient ascent for the best response
  double inner_tolerance = 1e-6;
  int inner_max_iterations = 20000;

  void validate() const {
    if (iterations < 0) throw ConfigError("analytic.iterations must be >= 0");
    if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("analytic.discount must lie in [0, 1)");
    if (!(lr > 0.0) || !(inner_lr > 0.0)) throw ConfigError("analytic learning rates must be > 0");
    if (!(inner_tolerance > 0.0)) throw ConfigError("analytic.inner_tolerance must be > 0");
    if (inner_max_iterations < 1) throw ConfigError("analytic.inner_max_iterations must be >= 1");
  }
};

}  // namespace brs
