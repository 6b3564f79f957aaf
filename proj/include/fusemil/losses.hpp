#pragma once

#include <vector>

#include "fusemil/common.hpp"

namespace fusemil {

/// Temperature-softened distribution softmax(h / tau); log-sum-exp stable.
Vecd soften(const Vecd& logits, double tau);

/// tau^2 * KL(soften(h_student) || soften(h_teacher)). For one-dimensional
/// logits the softened pair [sigmoid(h/tau), 1 - sigmoid(h/tau)] is matched
/// instead, since a one-logit softmax is degenerate. Optional gradients
/// w.r.t. both logit vectors.
double kd_loss(const Vecd& h_student, const Vecd& h_teacher, double tau,
               Vecd* grad_student = nullptr, Vecd* grad_teacher = nullptr);

/// Two-class cross-entropy on softmax(logits). The positive class (label 1)
/// occupies logit slot 0.
double task_loss_bce(const Vecd& logits, int label, Vecd* grad = nullptr);

/// Mean over components of squared differences.
double task_loss_mse(const Vecd& pred, const Vecd& target, Vecd* grad = nullptr);

/// Negative Cox log partial likelihood over a batch, ties handled by sharing
/// the full risk set {j : t_j >= t_i}:
///   -(sum over events i) [f_i - log sum_{t_j >= t_i} exp(f_j)]
/// Requires batch >= 2 and at least one event.
double task_loss_cox(const Vecd& risks, const Vecd& times, const std::vector<int>& events,
                     Vecd* grad = nullptr);

/// lambda * task + (1 - lambda) * mean(dist_losses); with no teachers the
/// task loss is returned unchanged. lambda must lie in [0, 1].
double combined_loss(double task, const std::vector<double>& dist_losses, double lambda);

/// True iff any instance label is 1 (bag semantics).
int bag_label(const std::vector<int>& instance_labels);

}  // namespace fusemil
