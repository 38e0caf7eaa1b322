#pragma once

#include <Eigen/Dense>

#include <random>

namespace hegex {

// Cumulative retention abar_t for t = 0..T with abar_0 = 1, plus the
// per-step ratio alpha_t = abar_t / abar_{t-1}.
struct NoiseSchedule {
  int T = 0;
  Eigen::VectorXd alpha_bar;  // size T+1
  Eigen::VectorXd alpha;      // size T+1, alpha[0] = 1 by convention

  void validate() const;
};

// Squared-cosine decay: abar_t = cos^2((t/T + s)/(1 + s) * pi/2),
// normalized so abar_0 = 1, with s = 0.008.
NoiseSchedule cosine_schedule(int T);

// Q_t = alpha * I + (1 - alpha) * 1 m^T, rows = current state.
Eigen::MatrixXd marginal_transition(double alpha, const Eigen::VectorXd& m);

// The t-step product of marginal transitions collapses to the same form
// with the cumulative retention in place of alpha.
Eigen::MatrixXd marginal_transition_bar(double alpha_bar,
                                        const Eigen::VectorXd& m);

// One reverse-step distribution over the previous state j, given the
// current state z_t = i, the predicted clean-state distribution p_hat,
// and row-stochastic Q_t / cumulative Q-bars:
//   out_j propto Q_t(j,i) * sum_x0 p_hat(x0) Qbar_{t-1}(x0,j) / Qbar_t(x0,i)
Eigen::VectorXd posterior_row(const Eigen::VectorXd& p_hat, int zt,
                              const Eigen::MatrixXd& q_t,
                              const Eigen::MatrixXd& q_bar_prev,
                              const Eigen::MatrixXd& q_bar_t);

int sample_categorical(const Eigen::VectorXd& probs, std::mt19937_64& rng);

}  // namespace hegex
