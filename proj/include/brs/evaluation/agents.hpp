#pragma once

// Trained parameters wrapped as Policy objects for matchups.

#include <cmath>
#include <memory>
#include <string>

#include "brs/core/game.hpp"
#include "brs/detectives/agent_model.hpp"
#include "brs/ipd/ipd.hpp"
#include "brs/nn/checkpoint.hpp"
#include "brs/training/ipd_tsd.hpp"

namespace brs::eval {

/// Recurrent agent acting one observation at a time. The hidden state is
/// episode state: `reset` clears it and `clone` copies it.
class GruPolicy final : public Policy {
 public:
  GruPolicy(nn::GruAgentSpec spec, std::shared_ptr<const nn::ParameterVector> params, std::string label = "agent")
      : model_{spec}, params_(std::move(params)), label_(std::move(label)) {
    spec.validate();
    reset();
  }

  std::string name() const override { return label_; }
  int observation_dim() const override { return model_.observation_dim(); }
  int action_count() const override { return model_.action_count(); }
  void reset() override { h_ = nn::initial_hidden(1, model_.hidden_dim()); }

  /// Action distribution after consuming `obs`; advances the hidden state.
  ad::Matrix observe(std::span<const double> obs) {
    const ad::Matrix x = Eigen::Map<const ad::Matrix>(obs.data(), 1, static_cast<Eigen::Index>(obs.size()));
    auto out = model_.step(nn::PlainParams(*params_), x, h_);
    h_ = std::move(out.hidden);
    return ad::exp(out.log_probs);
  }

  ActionChoice act(std::span<const double> obs, Rng& rng) override {
    const ad::Matrix p = observe(obs);
    const int a = sample_index(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), rng);
    return {a, std::log(p(0, a))};
  }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<GruPolicy>(*this); }

 private:
  GruAgentModel model_;
  std::shared_ptr<const nn::ParameterVector> params_;
  std::string label_;
  ad::Matrix h_;
};

inline nn::GruAgentSpec gru_spec_from_metadata(const nlohmann::json& meta) {
  try {
    return {meta.at("obs_dim").get<int>(), meta.at("encoder_width").get<int>(), meta.at("hidden").get<int>(),
            meta.at("action_count").get<int>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("coin agent checkpoint metadata is incomplete: ") + e.what());
  }
}

/// IPD policy table from either IPD checkpoint kind.
inline ipd::MemoryOnePolicy ipd_table_from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.kind == "ipd-memory-one") {
    const ad::Matrix& p = ck.params.at("p_cooperate");
    if (p.size() != ipd::kNumStates) throw ConfigError("memory-one checkpoint needs 5 probabilities");
    ipd::MemoryOnePolicy out;
    for (int i = 0; i < ipd::kNumStates; ++i) out.p[static_cast<std::size_t>(i)] = p(i);
    out.validate();
    return out;
  }
  if (ck.kind == "ipd-mlp") {
    const int hidden = ck.metadata.value("hidden", 16);
    return IpdPolicyNet{hidden}.table(ck.params);
  }
  throw ConfigError("checkpoint kind '" + ck.kind + "' is not an IPD policy");
}

}  // namespace brs::eval
