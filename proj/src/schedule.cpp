#include "hegex/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hegex {

void NoiseSchedule::validate() const {
  if (T < 1) throw std::invalid_argument("NoiseSchedule: T < 1");
  if (alpha_bar.size() != T + 1 || alpha.size() != T + 1) {
    throw std::invalid_argument("NoiseSchedule: wrong vector sizes");
  }
  if (std::abs(alpha_bar[0] - 1.0) > 1e-9) {
    throw std::invalid_argument("NoiseSchedule: alpha_bar[0] != 1");
  }
  for (int t = 1; t <= T; ++t) {
    if (alpha_bar[t] > alpha_bar[t - 1] + 1e-12) {
      throw std::invalid_argument("NoiseSchedule: alpha_bar not non-increasing");
    }
  }
}

NoiseSchedule cosine_schedule(int T) {
  if (T < 1) throw std::invalid_argument("cosine_schedule: T < 1");
  const double s = 0.008;
  auto f = [&](double t) {
    const double arg = (t / T + s) / (1.0 + s) * std::numbers::pi / 2.0;
    const double c = std::cos(arg);
    return c * c;
  };
  NoiseSchedule sched;
  sched.T = T;
  sched.alpha_bar.resize(T + 1);
  sched.alpha.resize(T + 1);
  const double f0 = f(0.0);
  sched.alpha_bar[0] = 1.0;
  sched.alpha[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    sched.alpha_bar[t] = f(static_cast<double>(t)) / f0;
    sched.alpha[t] = sched.alpha_bar[t] / sched.alpha_bar[t - 1];
  }
  return sched;
}

Eigen::MatrixXd marginal_transition(double alpha, const Eigen::VectorXd& m) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("marginal_transition: alpha outside [0,1]");
  }
  if (std::abs(m.sum() - 1.0) > 1e-9 || (m.array() < 0.0).any()) {
    throw std::invalid_argument("marginal_transition: m is not a distribution");
  }
  const Eigen::Index k = m.size();
  return alpha * Eigen::MatrixXd::Identity(k, k) +
         (1.0 - alpha) * Eigen::VectorXd::Ones(k) * m.transpose();
}

Eigen::MatrixXd marginal_transition_bar(double alpha_bar,
                                        const Eigen::VectorXd& m) {
  return marginal_transition(alpha_bar, m);
}

Eigen::VectorXd posterior_row(const Eigen::VectorXd& p_hat, int zt,
                              const Eigen::MatrixXd& q_t,
                              const Eigen::MatrixXd& q_bar_prev,
                              const Eigen::MatrixXd& q_bar_t) {
  const Eigen::Index k = p_hat.size();
  if (zt < 0 || zt >= k) throw std::invalid_argument("posterior_row: bad state");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double acc = 0.0;
    for (Eigen::Index x0 = 0; x0 < k; ++x0) {
      const double denom = q_bar_t(x0, zt);
      if (denom < 1e-30) continue;  // state zt unreachable from this x0
      acc += p_hat[x0] * q_bar_prev(x0, j) / denom;
    }
    out[j] = q_t(j, zt) * acc;
  }
  const double z = out.sum();
  if (z <= 0.0) {
    // degenerate prediction; fall back to the single-step reverse of zt
    return q_t.row(zt).transpose() / q_t.row(zt).sum();
  }
  return out / z;
}

int sample_categorical(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
  if (probs.size() == 0) throw std::invalid_argument("sample_categorical: empty");
  const double total = probs.sum();
  if (total <= 0.0) {
    throw std::invalid_argument("sample_categorical: nonpositive mass");
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double target = u(rng) * total;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (target < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace hegex
