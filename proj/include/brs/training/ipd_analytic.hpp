#pragma once

// Memory-one IPD training on exact discounted values, without self-play.
// The opponent is the converged best response found by gradient ascent on
// its exact value, started from the uniform policy. The agent ascends its own
// value against that opponent, differentiating through the whole inner
// ascent: every inner iterate carries forward-mode tangents with respect to
// the agent's logits, so the update sees how the best response moves.

#include <array>
#include <cmath>

#include <json.hpp>

#include "brs/ipd/exact.hpp"
#include "brs/nn/dual.hpp"
#include "brs/nn/optim.hpp"
#include "brs/training/ipd_config.hpp"

namespace brs {

using Logits5 = std::array<double, ipd::kNumStates>;

inline ipd::MemoryOnePolicy policy_from_logits(const Logits5& x) {
  ipd::MemoryOnePolicy p;
  for (std::size_t i = 0; i < x.size(); ++i) p.p[i] = nn::logistic(x[i]);
  return p;
}

struct BestResponseResult {
  Logits5 logits{};
  ipd::MemoryOnePolicy policy{};
  ipd::ExactValues<double> values{0.0, 0.0};  // (agent, best response)
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// One inner ascent step on the opponent's value. T carries whatever outer
/// tangents the caller needs; the inner gradient uses one more dual level.
template <class T>
T inner_step(const std::array<T, 5>& p, std::array<T, 5>& phi, double gamma, double lr) {
  using D = nn::Dual<T, 5>;
  std::array<D, 5> pd, qd;
  for (int i = 0; i < 5; ++i) {
    pd[static_cast<std::size_t>(i)] = D(p[static_cast<std::size_t>(i)], {});
    qd[static_cast<std::size_t>(i)] = nn::logistic(D::variable(phi[static_cast<std::size_t>(i)], i));
  }
  const auto v = ipd::exact_memory_one_value<D>(pd, qd, gamma);
  for (int i = 0; i < 5; ++i) {
    phi[static_cast<std::size_t>(i)] = phi[static_cast<std::size_t>(i)] + T(lr) * v.v2.d[static_cast<std::size_t>(i)];
  }
  return v.v2.v;
}

}  // namespace detail

/// Best response to a fixed memory-one policy by gradient ascent on the
/// opponent's logits from zero; stops when the value changes by less than
/// `tolerance` in one step.
inline BestResponseResult exact_best_response(const ipd::MemoryOnePolicy& p, const AnalyticConfig& cfg) {
  cfg.validate();
  p.validate();
  BestResponseResult out;
  std::array<double, 5> phi{};
  double prev = 0.0;
  for (int k = 0; k < cfg.inner_max_iterations; ++k) {
    const double v = detail::inner_step<double>(p.p, phi, cfg.discount, cfg.inner_lr);
    out.iterations = k + 1;
    if (k > 0 && std::abs(v - prev) < cfg.inner_tolerance) {
      out.converged = true;
      break;
    }
    prev = v;
  }
  out.logits = phi;
  out.policy = policy_from_logits(phi);
  out.values = ipd::exact_memory_one_value(p, out.policy, cfg.discount);
  return out;
}

struct AnalyticIterationLog {
  long iteration = 0;
  double agent_value = 0.0;
  double opponent_value = 0.0;
  int inner_iterations = 0;
  bool inner_converged = false;
  double grad_norm = 0.0;
  ipd::MemoryOnePolicy policy{};
  ipd::MemoryOnePolicy best_response{};

  nlohmann::json to_json() const {
    return {{"iteration", iteration},           {"agent_value", agent_value},
            {"opponent_value", opponent_value}, {"inner_iterations", inner_iterations},
            {"inner_converged", inner_converged}, {"grad_norm", grad_norm},
            {"p_cooperate", policy.p},          {"best_response", best_response.p}};
  }
};

class AnalyticTrainer {
 public:
  explicit AnalyticTrainer(AnalyticConfig cfg) : cfg_(cfg), opt_({nn::Algorithm::Adam, cfg.lr}) {
    cfg_.validate();
    params_.add("logits", ad::Matrix::Zero(5, 1));
  }

  Logits5 logits() const {
    Logits5 x;
    for (int i = 0; i < 5; ++i) x[static_cast<std::size_t>(i)] = params_["logits"](i, 0);
    return x;
  }
  ipd::MemoryOnePolicy policy() const { return policy_from_logits(logits()); }
  const nn::ParameterVector& params() const { return params_; }
  long iteration() const { return iteration_; }

  AnalyticIterationLog iterate() {
    using T = nn::Dual<double, 5>;  // tangents with respect to the agent's logits
    AnalyticIterationLog log;
    log.iteration = iteration_;
    const Logits5 x = logits();
    std::array<T, 5> p;
    for (int i = 0; i < 5; ++i) p[static_cast<std::size_t>(i)] = nn::logistic(T::variable(x[static_cast<std::size_t>(i)], i));
    std::array<T, 5> phi{};
    double prev = 0.0;
    for (int k = 0; k < cfg_.inner_max_iterations; ++k) {
      const double v = nn::primal(detail::inner_step<T>(p, phi, cfg_.discount, cfg_.inner_lr));
      log.inner_iterations = k + 1;
      if (k > 0 && std::abs(v - prev) < cfg_.inner_tolerance) {
        log.inner_converged = true;
        break;
      }
      prev = v;
    }
    std::array<T, 5> q;
    for (std::size_t i = 0; i < 5; ++i) q[i] = nn::logistic(phi[i]);
    const auto v = ipd::exact_memory_one_value<T>(p, q, cfg_.discount);
    nn::ParameterVector g;
    ad::Matrix gm(5, 1);
    for (int i = 0; i < 5; ++i) gm(i, 0) = v.v1.d[static_cast<std::size_t>(i)];
    g.add("logits", gm);
    opt_.step(params_, g);
    if (!params_.all_finite()) throw NumericError("analytic policy logits became non-finite");
    log.agent_value = v.v1.v;
    log.opponent_value = v.v2.v;
    log.grad_norm = gm.norm();
    log.policy = policy();
    for (std::size_t i = 0; i < 5; ++i) log.best_response.p[i] = q[i].v;
    ++iteration_;
    return log;
  }

 private:
  AnalyticConfig cfg_;
  nn::Optimizer opt_;
  nn::ParameterVector params_;
  long iteration_ = 0;
};

}  // namespace brs
