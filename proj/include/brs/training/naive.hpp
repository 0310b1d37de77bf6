#pragma once

// Two independent REINFORCE learners trained against each other on the IPD,
// each maximizing only its own return.

#include <array>
#include <vector>

#include "brs/training/ipd_tsd.hpp"

namespace brs {

struct NaiveDuelLog {
  long iteration = 0;
  std::array<double, 2> returns{};
  std::array<ipd::MemoryOnePolicy, 2> tables{};

  nlohmann::json to_json() const {
    return {{"iteration", iteration},
            {"return0", returns[0]},
            {"return1", returns[1]},
            {"p_cooperate0", tables[0].p},
            {"p_cooperate1", tables[1].p}};
  }
};

class NaiveDuelTrainer {
 public:
  NaiveDuelTrainer(ipd::IpdConfig env, IpdTrainConfig cfg, std::uint64_t seed)
      : env_(env),
        cfg_(cfg),
        seed_(seed),
        net_{cfg.hidden},
        opts_{nn::Optimizer({nn::Algorithm::Sgd, cfg.lr}), nn::Optimizer({nn::Algorithm::Sgd, cfg.lr})},
        baselines_{EmaBaseline(cfg.baseline_decay), EmaBaseline(cfg.baseline_decay)} {
    cfg_.validate();
    for (int i = 0; i < 2; ++i) {
      Rng rng = make_rng(seed, "naive-init", static_cast<std::uint64_t>(i));
      params_[static_cast<std::size_t>(i)] = net_.init(rng);
    }
  }

  const nn::ParameterVector& params(int player) const { return params_.at(static_cast<std::size_t>(player)); }
  ipd::MemoryOnePolicy table(int player) const { return net_.table(params(player)); }

  NaiveDuelLog iterate() {
    NaiveDuelLog log;
    log.iteration = iteration_;
    Rng rng = make_rng(seed_, "naive-games", static_cast<std::uint64_t>(iteration_));
    const std::array<ipd::MemoryOnePolicy, 2> pol{table(0), table(1)};
    std::array<StateActionCoefficients, 2> coef{};
    std::array<std::vector<double>, 2> rets;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      std::array<StateActionCoefficients, 2> counts{};
      std::array<double, 2> ret{};
      std::array<int, 2> state{ipd::kStart, ipd::kStart};
      double g = 1.0;
      for (int t = 0; t < env_.length; ++t) {
        std::array<int, 2> a{};
        for (std::size_t i = 0; i < 2; ++i) {
          const double pc = pol[i].p[static_cast<std::size_t>(state[i])];
          a[i] = uniform01(rng) < pc ? ipd::kCooperate : ipd::kDefect;
          counts[i][static_cast<std::size_t>(state[i])][static_cast<std::size_t>(a[i])] += 1.0;
        }
        const auto& r = env_.payoff.reward[a[0]][a[1]];
        ret[0] += g * r[0];
        ret[1] += g * r[1];
        g *= env_.discount;
        state = {ipd::observation_index(a[0], a[1]), ipd::observation_index(a[1], a[0])};
      }
      for (std::size_t i = 0; i < 2; ++i) {
        if (!baselines_[i].initialized()) baselines_[i].update(ret[i]);
        const double adv = ret[i] - baselines_[i].value();
        for (int s = 0; s < ipd::kNumStates; ++s) {
          for (int a = 0; a < 2; ++a) {
            coef[i][static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] +=
                adv * counts[i][static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
          }
        }
        rets[i].push_back(ret[i]);
      }
    }
    for (std::size_t i = 0; i < 2; ++i) {
      for (double x : rets[i]) baselines_[i].update(x);
      opts_[i].step(params_[i], net_.gradient(params_[i], coef[i]));
      if (!params_[i].all_finite()) throw NumericError("naive learner parameters became non-finite");
      log.returns[i] = mean_of(rets[i]);
    }
    ++iteration_;
    log.tables = {table(0), table(1)};
    return log;
  }

 private:
  ipd::IpdConfig env_;
  IpdTrainConfig cfg_;
  std::uint64_t seed_;
  IpdPolicyNet net_;
  std::array<nn::Optimizer, 2> opts_;
  std::array<EmaBaseline, 2> baselines_;
  std::array<nn::ParameterVector, 2> params_;
  long iteration_ = 0;
};

}  // namespace brs
