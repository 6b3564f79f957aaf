#include "fusemil/losses.hpp"

#include <cmath>
#include <limits>

namespace fusemil {

namespace {

Vecd log_softmax(const Vecd& h) {
  const double hi = h.maxCoeff();
  const double lse = hi + std::log((h.array() - hi).exp().sum());
  return h.array() - lse;
}

double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace

Vecd soften(const Vecd& logits, double tau) {
  if (tau <= 0.0) throw config_error("soften: temperature must be positive");
  return log_softmax(logits / tau).array().exp();
}

double kd_loss(const Vecd& h_student, const Vecd& h_teacher, double tau, Vecd* grad_student,
               Vecd* grad_teacher) {
  if (h_student.size() != h_teacher.size())
    throw data_error("kd_loss: logit lengths differ");
  if (tau <= 0.0) throw config_error("kd_loss: temperature must be positive");
  const double t2 = tau * tau;

  if (h_student.size() == 1) {
    // One logit: match softened sigmoid pairs.
    const double a = h_student(0) / tau;
    const double b = h_teacher(0) / tau;
    const double lp1 = log_sigmoid(a), lp2 = log_sigmoid(-a);
    const double lq1 = log_sigmoid(b), lq2 = log_sigmoid(-b);
    const double p1 = std::exp(lp1), p2 = std::exp(lp2);
    const double q1 = std::exp(lq1), q2 = std::exp(lq2);
    const double kl = p1 * (lp1 - lq1) + p2 * (lp2 - lq2);
    if (grad_student) {
      grad_student->resize(1);
      (*grad_student)(0) = tau * p1 * p2 * ((lp1 - lq1) - (lp2 - lq2));
    }
    if (grad_teacher) {
      grad_teacher->resize(1);
      (*grad_teacher)(0) = tau * (p2 * q1 - p1 * q2);
    }
    return t2 * kl;
  }

  const Vecd logp = log_softmax(h_student / tau);
  const Vecd logq = log_softmax(h_teacher / tau);
  const Vecd p = logp.array().exp();
  const Vecd q = logq.array().exp();
  const Vecd diff = logp - logq;
  const double kl = p.dot(diff);
  if (grad_student) *grad_student = tau * (p.array() * (diff.array() - kl)).matrix();
  if (grad_teacher) *grad_teacher = tau * (q - p);
  return t2 * kl;
}

double task_loss_bce(const Vecd& logits, int label, Vecd* grad) {
  if (logits.size() != 2) throw data_error("task_loss_bce: expects two logits");
  if (label != 0 && label != 1) throw data_error("task_loss_bce: label must be 0 or 1");
  const int target = label == 1 ? 0 : 1;  // positive class sits at slot 0
  const Vecd logp = log_softmax(logits);
  if (grad) {
    *grad = logp.array().exp();
    (*grad)(target) -= 1.0;
  }
  return -logp(target);
}

double task_loss_mse(const Vecd& pred, const Vecd& target, Vecd* grad) {
  if (pred.size() != target.size()) throw data_error("task_loss_mse: length mismatch");
  if (pred.size() == 0) throw data_error("task_loss_mse: empty vectors");
  const Vecd err = pred - target;
  const double n = static_cast<double>(pred.size());
  if (grad) *grad = (2.0 / n) * err;
  return err.squaredNorm() / n;
}

double task_loss_cox(const Vecd& risks, const Vecd& times, const std::vector<int>& events,
                     Vecd* grad) {
  const int n = static_cast<int>(risks.size());
  if (n < 2) throw data_error("task_loss_cox: batch must have at least 2 samples");
  if (times.size() != n || static_cast<int>(events.size()) != n)
    throw data_error("task_loss_cox: inputs must share one length");
  int n_events = 0;
  for (int e : events) n_events += e ? 1 : 0;
  if (n_events == 0) throw data_error("task_loss_cox: undefined without any observed event");

  if (grad) *grad = Vecd::Zero(n);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!events[static_cast<std::size_t>(i)]) continue;
    // Risk set {j : t_j >= t_i}; log-sum-exp stabilized.
    double hi = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (times(j) >= times(i)) hi = std::max(hi, risks(j));
    double z = 0.0;
    for (int j = 0; j < n; ++j)
      if (times(j) >= times(i)) z += std::exp(risks(j) - hi);
    const double lse = hi + std::log(z);
    loss -= risks(i) - lse;
    if (grad) {
      (*grad)(i) -= 1.0;
      for (int j = 0; j < n; ++j)
        if (times(j) >= times(i)) (*grad)(j) += std::exp(risks(j) - hi) / z;
    }
  }
  return loss;
}

double combined_loss(double task, const std::vector<double>& dist_losses, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw config_error("combined_loss: lambda must be in [0, 1]");
  if (dist_losses.empty() || lambda == 1.0) return task;
  double mean = 0.0;
  for (double d : dist_losses) mean += d;
  mean /= static_cast<double>(dist_losses.size());
  return lambda * task + (1.0 - lambda) * mean;
}

int bag_label(const std::vector<int>& instance_labels) {
  if (instance_labels.empty()) throw data_error("bag_label: empty instance list");
  for (int y : instance_labels) {
    if (y != 0 && y != 1) throw data_error("bag_label: instance labels must be 0 or 1");
    if (y == 1) return 1;
  }
  return 0;
}

}  // namespace fusemil
