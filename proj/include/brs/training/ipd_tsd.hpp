#pragma once

// IPD agent trained by REINFORCE through the tree-search detective, with an
// optional self-play term. The policy is a small tanh MLP on the one-hot
// state; because there are only five states, every gradient reduces to
// per-(state, action) coefficients on log pi(a | s).

#include <array>
#include <vector>

#include <json.hpp>

#include "brs/common.hpp"
#include "brs/detectives/tsd.hpp"
#include "brs/ipd/ipd.hpp"
#include "brs/nn/layers.hpp"
#include "brs/nn/optim.hpp"
#include "brs/training/ipd_config.hpp"

namespace brs {

using StateActionCoefficients = std::array<std::array<double, 2>, ipd::kNumStates>;

/// Cooperation probability network: 5 -> hidden -> hidden -> 1, tanh, with a
/// Bernoulli head whose action 0 is cooperate.
struct IpdPolicyNet {
  int hidden = 16;

  nn::MlpSpec spec() const { return {{ipd::kNumStates, hidden, hidden, 1}, nn::Activation::Tanh, nn::Head::Bernoulli}; }

  nn::ParameterVector init(Rng& rng) const {
    nn::ParameterVector p;
    nn::init_mlp(p, "policy", spec(), rng);
    return p;
  }

  ipd::MemoryOnePolicy table(const nn::ParameterVector& params) const {
    const ad::Matrix probs = nn::forward_policy(params, "policy", spec(), ad::Matrix::Identity(5, 5));
    ipd::MemoryOnePolicy out;
    for (int s = 0; s < ipd::kNumStates; ++s) out.p[static_cast<std::size_t>(s)] = probs(s, 0);
    return out;
  }

  /// Gradient of sum_{s,a} coef[s][a] * log pi(a | s).
  nn::ParameterVector gradient(const nn::ParameterVector& params, const StateActionCoefficients& coef) const {
    const nn::BoundParams bp(params, true);
    ad::Matrix c(ipd::kNumStates, 2);
    for (int s = 0; s < ipd::kNumStates; ++s) {
      for (int a = 0; a < 2; ++a) c(s, a) = coef[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
    }
    const ad::Var logp = nn::mlp_log_policy(bp, "policy", spec(), ad::constant(ad::Matrix::Identity(5, 5)));
    return bp.gradient(ad::sum(ad::mul(logp, ad::constant(c))));
  }
};

/// Exponential moving average that starts from its first observation.
class EmaBaseline {
 public:
  explicit EmaBaseline(double decay) : decay_(decay) {}
  double value() const { return value_; }
  bool initialized() const { return init_; }
  void update(double x) {
    value_ = init_ ? decay_ * value_ + (1.0 - decay_) * x : x;
    init_ = true;
  }

 private:
  double decay_;
  double value_ = 0.0;
  bool init_ = false;
};

struct SelfPlayEpisode {
  double return0 = 0.0;
  double return1 = 0.0;
  /// counts[s][a] over both players, each from its own perspective.
  StateActionCoefficients counts{};
};

/// One self-play game of the tabular policy against itself.
inline SelfPlayEpisode play_self(const ipd::MemoryOnePolicy& pol, const ipd::IpdConfig& env, Rng& rng) {
  SelfPlayEpisode ep;
  std::array<int, 2> state{ipd::kStart, ipd::kStart};
  double g = 1.0;
  for (int t = 0; t < env.length; ++t) {
    std::array<int, 2> a{};
    for (int i = 0; i < 2; ++i) {
      const double pc = pol.p[static_cast<std::size_t>(state[static_cast<std::size_t>(i)])];
      a[static_cast<std::size_t>(i)] = uniform01(rng) < pc ? ipd::kCooperate : ipd::kDefect;
      ep.counts[static_cast<std::size_t>(state[static_cast<std::size_t>(i)])]
               [static_cast<std::size_t>(a[static_cast<std::size_t>(i)])] += 1.0;
    }
    const auto& r = env.payoff.reward[a[0]][a[1]];
    ep.return0 += g * r[0];
    ep.return1 += g * r[1];
    g *= env.discount;
    state = {ipd::observation_index(a[0], a[1]), ipd::observation_index(a[1], a[0])};
  }
  return ep;
}

struct IpdIterationLog {
  long iteration = 0;
  double agent_return = 0.0;      // vs the detective, on its chosen path
  double detective_return = 0.0;
  double self_play_return = std::numeric_limits<double>::quiet_NaN();
  double baseline = 0.0;
  double grad_norm = 0.0;
  ipd::MemoryOnePolicy table{};

  nlohmann::json to_json() const {
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    return {{"iteration", iteration},
            {"agent_return", agent_return},
            {"detective_return", detective_return},
            {"self_play_return", num(self_play_return)},
            {"baseline", baseline},
            {"grad_norm", grad_norm},
            {"p_cooperate", table.p}};
  }
};

class IpdTsdTrainer {
 public:
  IpdTsdTrainer(ipd::IpdConfig env, IpdTrainConfig cfg, std::uint64_t seed)
      : env_(env),
        cfg_(cfg),
        seed_(seed),
        net_{cfg.hidden},
        opt_({nn::Algorithm::Sgd, cfg.lr}),
        opt_self_({nn::Algorithm::Sgd, cfg.self_play_lr}),
        baseline_(cfg.baseline_decay),
        baseline_self_(cfg.baseline_decay) {
    cfg_.validate();
    if (env_.length > kMaxTsdDepth) throw ConfigError("ipd.length exceeds the tree-search depth limit");
    if (cfg_.self_play && !env_.payoff.symmetric()) throw ConfigError("self-play needs a symmetric payoff matrix");
    Rng rng = make_rng(seed, "ipd-init");
    params_ = net_.init(rng);
  }

  const nn::ParameterVector& params() const { return params_; }
  const IpdPolicyNet& net() const { return net_; }
  ipd::MemoryOnePolicy table() const { return net_.table(params_); }
  long iteration() const { return iteration_; }

  IpdIterationLog iterate() {
    IpdIterationLog log;
    log.iteration = iteration_;
    Rng rng = make_rng(seed_, "ipd-tsd", static_cast<std::uint64_t>(iteration_));
    const ipd::MemoryOnePolicy pol = table();

    // Detective-shaped term: the agent's chosen-path return weights the
    // log-probabilities of every agent sample in the search tree.
    StateActionCoefficients coef{};
    std::vector<double> returns;
    double det_total = 0.0;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const TsdResult r = tsd_best_response(pol.p, env_.length, rng, env_.payoff);
      if (!baseline_.initialized()) baseline_.update(r.agent_return);
      const double adv = r.agent_return - baseline_.value();
      for (int s = 0; s < ipd::kNumStates; ++s) {
        for (int a = 0; a < 2; ++a) {
          coef[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] +=
              adv * r.counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
        }
      }
      returns.push_back(r.agent_return);
      det_total += r.detective_return;
    }
    for (double x : returns) baseline_.update(x);
    const nn::ParameterVector g = net_.gradient(params_, coef);
    opt_.step(params_, g);
    log.agent_return = mean_of(returns);
    log.detective_return = det_total / cfg_.batch_size;
    log.baseline = baseline_.value();
    log.grad_norm = g.norm();

    if (cfg_.self_play) {
      // Self-play term: player 0's return weights both players' log-probs.
      Rng srng = make_rng(seed_, "ipd-self-play", static_cast<std::uint64_t>(iteration_));
      const ipd::MemoryOnePolicy now = table();
      StateActionCoefficients sc{};
      std::vector<double> sp;
      for (int b = 0; b < cfg_.batch_size; ++b) {
        const SelfPlayEpisode ep = play_self(now, env_, srng);
        if (!baseline_self_.initialized()) baseline_self_.update(ep.return0);
        const double adv = ep.return0 - baseline_self_.value();
        for (int s = 0; s < ipd::kNumStates; ++s) {
          for (int a = 0; a < 2; ++a) {
            sc[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] +=
                adv * ep.counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
          }
        }
        sp.push_back(ep.return0);
      }
      for (double x : sp) baseline_self_.update(x);
      opt_self_.step(params_, net_.gradient(params_, sc));
      log.self_play_return = mean_of(sp);
    }
    if (!params_.all_finite()) throw NumericError("IPD policy parameters became non-finite");
    ++iteration_;
    log.table = table();
    return log;
  }

 private:
  ipd::IpdConfig env_;
  IpdTrainConfig cfg_;
  std::uint64_t seed_;
  IpdPolicyNet net_;
  nn::Optimizer opt_, opt_self_;
  EmaBaseline baseline_, baseline_self_;
  nn::ParameterVector params_;
  long iteration_ = 0;
};

/// Threshold classification of a policy table (0.9 / 0.1 cut-offs).
inline bool is_tit_for_tat(const ipd::MemoryOnePolicy& p) {
  using namespace ipd;
  return p.p[kStart] > 0.9 && p.p[kCC] > 0.9 && p.p[kDC] > 0.9 && p.p[kCD] < 0.1 && p.p[kDD] < 0.1;
}

inline bool is_cynic_tit_for_tat(const ipd::MemoryOnePolicy& p) {
  using namespace ipd;
  return p.p[kStart] < 0.1 && p.p[kCC] > 0.9 && p.p[kDC] > 0.9 && p.p[kCD] < 0.1 && p.p[kDD] < 0.1;
}

}  // namespace brs
