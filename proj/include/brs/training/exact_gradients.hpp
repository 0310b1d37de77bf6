#pragma once

// Exact expectations and policy gradients for short repeated matrix games by
// enumerating every joint action sequence. Policies are tabular softmax over
// the memory-one state (START, then own previous action x other's previous
// action), indexed from each player's own perspective.
//
// Used to check the self-play update against reward sharing and against the
// zero-sum case without sampling noise.

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "brs/common.hpp"

namespace brs::exact {

using Logits = Eigen::MatrixXd;  // [state][action]

struct RepeatedMatrixGame {
  int actions = 2;
  int length = 2;
  double discount = 1.0;
  /// reward[a * actions + b] = (r1, r2) for player 1 playing a, player 2 playing b.
  std::vector<std::array<double, 2>> reward;

  int state_count() const { return 1 + actions * actions; }
  int state_of(int own_prev, int other_prev) const { return 1 + own_prev * actions + other_prev; }
  const std::array<double, 2>& r(int a, int b) const { return reward[static_cast<std::size_t>(a * actions + b)]; }

  bool symmetric() const {
    for (int a = 0; a < actions; ++a) {
      for (int b = 0; b < actions; ++b) {
        if (r(a, b)[0] != r(b, a)[1]) return false;
      }
    }
    return true;
  }
  bool zero_sum() const {
    for (const auto& x : reward) {
      if (x[0] + x[1] != 0.0) return false;
    }
    return true;
  }

  void validate() const {
    if (actions < 1 || length < 1) throw ConfigError("matrix game needs at least one action and one step");
    if (reward.size() != static_cast<std::size_t>(actions * actions)) throw ConfigError("reward table has wrong size");
    if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("discount must lie in [0, 1]");
  }
  void validate(const Logits& theta) const {
    if (theta.rows() != state_count() || theta.cols() != actions) throw ConfigError("logit table has wrong shape");
  }

  /// Prisoner's dilemma with cooperate = 0 and defect = 1.
  static RepeatedMatrixGame prisoners_dilemma(int length, double discount = 1.0) {
    return {2, length, discount, {{-1, -1}, {-3, 0}, {0, -3}, {-2, -2}}};
  }
  /// Rock, paper, scissors: win +1, loss -1.
  static RepeatedMatrixGame rock_paper_scissors(int length, double discount = 1.0) {
    RepeatedMatrixGame g{3, length, discount, {}};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const int d = (a - b + 3) % 3;  // 1: a beats b
        const double x = d == 0 ? 0.0 : (d == 1 ? 1.0 : -1.0);
        g.reward.push_back({x, -x});
      }
    }
    return g;
  }
};

inline Logits softmax_rows(const Logits& theta) {
  Logits p(theta.rows(), theta.cols());
  for (Eigen::Index s = 0; s < theta.rows(); ++s) {
    const double m = theta.row(s).maxCoeff();
    p.row(s) = (theta.row(s).array() - m).exp().matrix();
    p.row(s) /= p.row(s).sum();
  }
  return p;
}

/// One fully specified episode: probability, both returns and each player's
/// visit counts n[state][action].
struct EnumeratedPath {
  double probability = 0.0;
  std::array<double, 2> returns{};
  std::array<Eigen::MatrixXd, 2> counts;
};

/// Calls `visit` once for every joint action sequence.
inline void enumerate_paths(const RepeatedMatrixGame& g, const Logits& theta1, const Logits& theta2,
                            const std::function<void(const EnumeratedPath&)>& visit) {
  g.validate();
  g.validate(theta1);
  g.validate(theta2);
  const Logits p1 = softmax_rows(theta1), p2 = softmax_rows(theta2);
  EnumeratedPath path;
  path.counts = {Eigen::MatrixXd::Zero(g.state_count(), g.actions), Eigen::MatrixXd::Zero(g.state_count(), g.actions)};
  std::function<void(int, int, int, double, double, double, double)> rec =
      [&](int t, int s1, int s2, double prob, double ret1, double ret2, double disc) {
        if (t == g.length) {
          path.probability = prob;
          path.returns = {ret1, ret2};
          visit(path);
          return;
        }
        for (int a = 0; a < g.actions; ++a) {
          for (int b = 0; b < g.actions; ++b) {
            const double q = p1(s1, a) * p2(s2, b);
            path.counts[0](s1, a) += 1.0;
            path.counts[1](s2, b) += 1.0;
            rec(t + 1, g.state_of(a, b), g.state_of(b, a), prob * q, ret1 + disc * g.r(a, b)[0],
                ret2 + disc * g.r(a, b)[1], disc * g.discount);
            path.counts[0](s1, a) -= 1.0;
            path.counts[1](s2, b) -= 1.0;
          }
        }
      };
  rec(0, 0, 0, 1.0, 0.0, 0.0, 1.0);
}

/// Score of a tabular softmax: sum over visits of d log pi(a|s) / d theta,
/// which is n(s, a) - n(s) * pi(a|s).
inline Eigen::MatrixXd score(const Eigen::MatrixXd& counts, const Logits& probs) {
  const Eigen::VectorXd visits = counts.rowwise().sum();
  return counts - (probs.array().colwise() * visits.array()).matrix();
}

inline std::array<double, 2> exact_values(const RepeatedMatrixGame& g, const Logits& theta1, const Logits& theta2) {
  std::array<double, 2> v{};
  enumerate_paths(g, theta1, theta2, [&](const EnumeratedPath& p) {
    v[0] += p.probability * p.returns[0];
    v[1] += p.probability * p.returns[1];
  });
  return v;
}

/// Expected self-play update: R1 weighted by the scores of both seats, both
/// played by `theta`.
inline Eigen::MatrixXd self_play_gradient(const RepeatedMatrixGame& g, const Logits& theta) {
  const Logits p = softmax_rows(theta);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
  enumerate_paths(g, theta, theta, [&](const EnumeratedPath& e) {
    grad += e.probability * e.returns[0] * (score(e.counts[0], p) + score(e.counts[1], p));
  });
  return grad;
}

/// Gradients of E[R1 + R2] with respect to each seat's own logits, with the
/// seats parameterized separately.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> reward_sharing_gradients(const RepeatedMatrixGame& g,
                                                                             const Logits& theta1,
                                                                             const Logits& theta2) {
  const Logits p1 = softmax_rows(theta1), p2 = softmax_rows(theta2);
  Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(theta1.rows(), theta1.cols());
  Eigen::MatrixXd g2 = g1;
  enumerate_paths(g, theta1, theta2, [&](const EnumeratedPath& e) {
    const double shared = e.probability * (e.returns[0] + e.returns[1]);
    g1 += shared * score(e.counts[0], p1);
    g2 += shared * score(e.counts[1], p2);
  });
  return {g1, g2};
}

inline double cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine similarity of a zero vector");
  return (a.array() * b.array()).sum() / (na * nb);
}

}  // namespace brs::exact
