#pragma once

// Optimizers written as gradient ascent: every caller hands in the gradient
// of an objective to maximize.

#include <cmath>
#include <optional>
#include <string>

#include "brs/common.hpp"
#include "brs/nn/params.hpp"

namespace brs::nn {

enum class Algorithm { Sgd, Adam };

inline std::string to_string(Algorithm a) { return a == Algorithm::Sgd ? "sgd" : "adam"; }

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "sgd") return Algorithm::Sgd;
  if (s == "adam") return Algorithm::Adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::Adam;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  Optimizer() = default;
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
    if (!(cfg.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  }

  const OptimizerConfig& config() const { return cfg_; }
  long steps() const { return t_; }

  /// params <- params + update(grad).
  void step(ParameterVector& params, const ParameterVector& grad) {
    params.require_layout(grad);
    if (!grad.all_finite()) throw NumericError("optimizer received a non-finite gradient");
    ++t_;
    if (cfg_.algorithm == Algorithm::Sgd) {
      params.axpy(cfg_.lr, grad);
      return;
    }
    if (!m_) {
      m_ = params.zeros_like();
      v_ = params.zeros_like();
    }
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto& pe = params.entries();
    auto& me = m_->entries();
    auto& ve = v_->entries();
    const auto& ge = grad.entries();
    for (std::size_t i = 0; i < pe.size(); ++i) {
      me[i].value = cfg_.beta1 * me[i].value + (1.0 - cfg_.beta1) * ge[i].value;
      ve[i].value = cfg_.beta2 * ve[i].value + (1.0 - cfg_.beta2) * ge[i].value.cwiseAbs2();
      pe[i].value.array() += cfg_.lr * (me[i].value.array() / c1) / ((ve[i].value.array() / c2).sqrt() + cfg_.eps);
    }
  }

 private:
  OptimizerConfig cfg_;
  long t_ = 0;
  std::optional<ParameterVector> m_;
  std::optional<ParameterVector> v_;
};

}  // namespace brs::nn
