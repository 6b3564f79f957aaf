#pragma once

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fusemil/keyval.hpp"
#include "fusemil/model.hpp"
#include "fusemil/types.hpp"

namespace fusemil {

enum class TaskKind { biomarker, expression, survival };

TaskKind task_from_string(const std::string& s);
std::string to_string(TaskKind t);

struct TrainConfig {
  TaskKind task = TaskKind::biomarker;
  std::string label_name = "marker";

  int batch_size = 64;
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  int epochs = 30;
  int patience = 5;
  std::uint64_t seed = 1;
  double lambda = 0.5;
  double tau = 0.0;  // <= 0 resolves to 3 for classification, 1 otherwise

  int n_replicates = 50;  // selections per training slide
  int per_cluster = 10;   // patches sampled per cluster
  int n_clusters = 50;
  int n_folds = 5;
  int cluster_restarts = 50;

  int topk = 8;
  int n_heads = 8;
  int n_cmsa_layers = 2;
  int n_ccmsa_layers = 1;
  int peg_width = 3;
  int n_reps = 4;
  int mil_hidden = 256;
  double dropout = 0.10;
  PoolKind pool = PoolKind::attention;

  /// Teacher names to distill from; unset means every registered teacher,
  /// an empty list means teacher-free training.
  std::optional<std::vector<std::string>> teachers;

  /// Train-time embedding jitter, as a fraction of the cohort feature sd.
  double jitter = 0.01;

  double resolved_tau() const;
  void validate() const;
  static TrainConfig from_keyval(const KeyVal& kv);
  void to_stream(std::ostream& out) const;
};

struct BatchSample {
  TokenBatch tokens;
  std::vector<Vecd> teacher_vecs;
  int label = -1;       // biomarker task
  Vecd expression;      // expression task
  double time = 0.0;    // survival task
  int event = 0;
};
using MiniBatch = std::vector<BatchSample>;

struct StepLosses {
  double task = 0.0;
  std::vector<double> kd;  // per teacher, batch mean
  double combined = 0.0;
};

/// Stochastic gradient descent with momentum; weight decay enters as an L2
/// term on the gradient: v = m*v + (g + wd*theta); theta -= lr*v.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}
  void step(StudentModel& model);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, momentum_, weight_decay_;
  std::vector<Matd> velocity_;
};

/// One optimizer update on one minibatch. Classification/regression losses
/// are batch means; the survival loss couples the whole batch through its
/// risk sets. A non-finite loss aborts with diagnostics.
StepLosses train_step(StudentModel& model, SgdMomentum& opt, const MiniBatch& batch,
                      const TrainConfig& cfg, Rng& drop_rng);

struct FoldResult {
  int fold = -1;
  int best_epoch = -1;
  double val_metric = 0.0;
  std::map<std::string, Vecd> predictions;  // validation slide -> logits
};

struct RunArtifacts {
  std::string out_dir;
  std::string metric_name;
  std::vector<FoldResult> folds;
  double metric_mean = 0.0;
  double metric_std = 0.0;
};

/// Full cross-validated training run: per-slide clustering, repeated
/// selection on training folds (validation always scores replicate 0),
/// early stopping on the fold's validation metric, and one best checkpoint
/// per fold. Writes config snapshot, per-step and per-epoch loss CSVs,
/// predictions and summary CSVs under out_dir. Deterministic given the
/// config; n_threads only parallelizes per-slide preparation.
RunArtifacts cross_validate(const Cohort& cohort, const ModelRegistry& registry, TrainConfig cfg,
                            const std::string& out_dir, int n_threads = 1);

/// The teacher roster a config resolves to against a registry: explicit list
/// (validated) or every registered teacher; always sorted by name.
std::vector<std::string> resolve_teachers(const TrainConfig& cfg, const ModelRegistry& registry);

/// Model shape implied by a train config and cohort dimensions.
ModelConfig make_model_config(const TrainConfig& cfg, int token_dim,
                              const std::vector<int>& teacher_dims, int n_genes);

/// Evaluation-side preparation of one slide with the same seeding as
/// cross_validate: clustering plus the replicate-0 selection and tokens.
struct EvalPrep {
  ClusterAssignment assignment;
  Selection selection;
  TokenBatch tokens;
};
EvalPrep prepare_eval_prep(const MultiViewSet& views, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Gradient audit

struct AuditCase {
  std::string name;
  std::function<double(const StudentModel&)> loss;        // eval-mode scalar loss
  std::function<void(StudentModel&)> compute_grads;       // zero + forward + backward
};

struct AuditReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  long n_entries = 0;
};

/// Central finite differences over every parameter entry against the
/// analytic gradients of `compute_grads`.
AuditReport gradient_audit(StudentModel& model, const AuditCase& c, double fd_step = 1e-6);

/// Audits a tiny model (12 tokens, 3 clusters, 2 teachers) across all three
/// task heads with distillation active. `grad_hook`, when set, runs after the
/// analytic gradients are computed (test fixture for corrupted backward).
AuditReport full_gradient_audit(std::uint64_t seed,
                                const std::function<void(StudentModel&)>& grad_hook = {});

}  // namespace fusemil
