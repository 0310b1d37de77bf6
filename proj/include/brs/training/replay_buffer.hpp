#pragma once

// Bounded FIFO of past agent parameters. Sampling is uniform with
// replacement and returns perturbed copies; stored entries are never touched.

#include <deque>
#include <vector>

#include "brs/common.hpp"
#include "brs/nn/params.hpp"

namespace brs {

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const nn::ParameterVector& at(std::size_t i) const { return items_.at(i); }

  void push(nn::ParameterVector p) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(p));
  }

  /// `batch` uniform draws, each with N(0, sigma) noise added.
  std::vector<nn::ParameterVector> sample(std::size_t batch, double sigma, Rng& rng) const {
    if (empty()) throw ConfigError("cannot sample from an empty replay buffer");
    std::vector<nn::ParameterVector> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const auto k = static_cast<std::size_t>(uniform_int(rng, static_cast<int>(items_.size())));
      out.push_back(nn::add_gaussian_noise(items_[k], sigma, rng));
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<nn::ParameterVector> items_;
};

}  // namespace brs
