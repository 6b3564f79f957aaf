#include "fusemil/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "fusemil/checkpoint.hpp"
#include "fusemil/folds.hpp"
#include "fusemil/losses.hpp"
#include "fusemil/metrics.hpp"
#include "fusemil/report.hpp"

namespace fusemil {

namespace fs = std::filesystem;

TaskKind task_from_string(const std::string& s) {
  if (s == "biomarker") return TaskKind::biomarker;
  if (s == "expression") return TaskKind::expression;
  if (s == "survival") return TaskKind::survival;
  throw config_error("unknown task '" + s + "' (biomarker/expression/survival)");
}

std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::biomarker: return "biomarker";
    case TaskKind::expression: return "expression";
    case TaskKind::survival: return "survival";
  }
  return "biomarker";
}

double TrainConfig::resolved_tau() const {
  if (tau > 0.0) return tau;
  return task == TaskKind::biomarker ? 3.0 : 1.0;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
  if (lr < 0.0) throw config_error("train: lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw config_error("train: momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw config_error("train: weight_decay must be >= 0");
  if (epochs < 1) throw config_error("train: epochs must be >= 1");
  if (patience < 0) throw config_error("train: patience must be >= 0");
  if (lambda < 0.0 || lambda > 1.0) throw config_error("train: lambda must be in [0, 1]");
  if (n_replicates < 1) throw config_error("train: n_replicates must be >= 1");
  if (per_cluster < 1) throw config_error("train: per_cluster must be >= 1");
  if (n_clusters < 1) throw config_error("train: n_clusters must be >= 1");
  if (n_folds < 2) throw config_error("train: n_folds must be >= 2");
  if (cluster_restarts < 1) throw config_error("train: cluster_restarts must be >= 1");
  if (jitter < 0.0) throw config_error("train: jitter must be >= 0");
}

TrainConfig TrainConfig::from_keyval(const KeyVal& kv) {
  kv.require_known_keys({"task", "label", "batch_size", "lr", "momentum", "weight_decay",
                         "epochs", "patience", "seed", "lambda", "tau", "n_replicates",
                         "per_cluster", "n_clusters", "n_folds", "cluster_restarts", "topk",
                         "n_heads", "n_cmsa_layers", "n_ccmsa_layers", "peg_width", "n_reps",
                         "mil_hidden", "dropout", "pool", "teachers", "jitter"});
  TrainConfig cfg;
  cfg.task = task_from_string(kv.get_string("task", "biomarker"));
  cfg.label_name = kv.get_string("label", cfg.label_name);
  cfg.batch_size = kv.get_int("batch_size", cfg.batch_size);
  cfg.lr = kv.get_double("lr", cfg.lr);
  cfg.momentum = kv.get_double("momentum", cfg.momentum);
  cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
  cfg.epochs = kv.get_int("epochs", cfg.epochs);
  cfg.patience = kv.get_int("patience", cfg.patience);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.lambda = kv.get_double("lambda", cfg.lambda);
  cfg.tau = kv.get_double("tau", cfg.tau);
  cfg.n_replicates = kv.get_int("n_replicates", cfg.n_replicates);
  cfg.per_cluster = kv.get_int("per_cluster", cfg.per_cluster);
  cfg.n_clusters = kv.get_int("n_clusters", cfg.n_clusters);
  cfg.n_folds = kv.get_int("n_folds", cfg.n_folds);
  cfg.cluster_restarts = kv.get_int("cluster_restarts", cfg.cluster_restarts);
  cfg.topk = kv.get_int("topk", cfg.topk);
  cfg.n_heads = kv.get_int("n_heads", cfg.n_heads);
  cfg.n_cmsa_layers = kv.get_int("n_cmsa_layers", cfg.n_cmsa_layers);
  cfg.n_ccmsa_layers = kv.get_int("n_ccmsa_layers", cfg.n_ccmsa_layers);
  cfg.peg_width = kv.get_int("peg_width", cfg.peg_width);
  cfg.n_reps = kv.get_int("n_reps", cfg.n_reps);
  cfg.mil_hidden = kv.get_int("mil_hidden", cfg.mil_hidden);
  cfg.dropout = kv.get_double("dropout", cfg.dropout);
  cfg.pool = pool_kind_from_string(kv.get_string("pool", "attention"));
  cfg.jitter = kv.get_double("jitter", cfg.jitter);
  if (kv.has("teachers")) {
    const std::string raw = kv.get_string("teachers", "");
    if (raw == "none")
      cfg.teachers = std::vector<std::string>{};
    else
      cfg.teachers = kv.get_string_list("teachers", {});
  }
  cfg.validate();
  return cfg;
}

void TrainConfig::to_stream(std::ostream& out) const {
  out << "task = " << to_string(task) << "\n";
  out << "label = " << label_name << "\n";
  out << "batch_size = " << batch_size << "\n";
  out << "lr = " << lr << "\n";
  out << "momentum = " << momentum << "\n";
  out << "weight_decay = " << weight_decay << "\n";
  out << "epochs = " << epochs << "\n";
  out << "patience = " << patience << "\n";
  out << "seed = " << seed << "\n";
  out << "lambda = " << lambda << "\n";
  out << "tau = " << resolved_tau() << "\n";
  out << "n_replicates = " << n_replicates << "\n";
  out << "per_cluster = " << per_cluster << "\n";
  out << "n_clusters = " << n_clusters << "\n";
  out << "n_folds = " << n_folds << "\n";
  out << "cluster_restarts = " << cluster_restarts << "\n";
  out << "topk = " << topk << "\n";
  out << "n_heads = " << n_heads << "\n";
  out << "n_cmsa_layers = " << n_cmsa_layers << "\n";
  out << "n_ccmsa_layers = " << n_ccmsa_layers << "\n";
  out << "peg_width = " << peg_width << "\n";
  out << "n_reps = " << n_reps << "\n";
  out << "mil_hidden = " << mil_hidden << "\n";
  out << "dropout = " << dropout << "\n";
  out << "pool = " << to_string(pool) << "\n";
  if (teachers) {
    out << "teachers = ";
    if (teachers->empty()) {
      out << "none";
    } else {
      for (std::size_t i = 0; i < teachers->size(); ++i) out << (i ? "," : "") << (*teachers)[i];
    }
    out << "\n";
  }
  out << "jitter = " << jitter << "\n";
}

// ---------------------------------------------------------------------------
// Optimizer

void SgdMomentum::step(StudentModel& model) {
  std::vector<Param*> params;
  model.visit_params([&](Param& p) { params.push_back(&p); });
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const Param* p : params) velocity_.push_back(Matd::Zero(p->value.rows(), p->value.cols()));
  } else if (velocity_.size() != params.size()) {
    throw config_error("optimizer: parameter set changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    velocity_[i] = momentum_ * velocity_[i] + (p.grad + weight_decay_ * p.value);
    p.value -= lr_ * velocity_[i];
  }
}

// ---------------------------------------------------------------------------
// train_step

namespace {

struct LossWeights {
  double task_w;
  double kd_w;  // per-teacher weight
};

LossWeights loss_weights(double lambda, int n_teachers) {
  if (n_teachers == 0) return {1.0, 0.0};
  return {lambda, (1.0 - lambda) / static_cast<double>(n_teachers)};
}

double sample_task_loss(TaskKind task, const StudentModel::Forward& f, const BatchSample& s,
                        Vecd* grad) {
  switch (task) {
    case TaskKind::biomarker:
      return task_loss_bce(f.student_logits, s.label, grad);
    case TaskKind::expression:
      return task_loss_mse(f.student_logits, s.expression, grad);
    case TaskKind::survival:
      throw config_error("survival task loss is batch-level");
  }
  return 0.0;
}

}  // namespace

StepLosses train_step(StudentModel& model, SgdMomentum& opt, const MiniBatch& batch,
                      const TrainConfig& cfg, Rng& drop_rng) {
  if (batch.empty()) throw config_error("train_step: empty minibatch");
  const int n_teachers = model.n_teachers();
  for (const auto& s : batch)
    if (static_cast<int>(s.teacher_vecs.size()) != n_teachers)
      throw data_error("train_step: sample teacher vectors do not match the model");

  const double tau = cfg.resolved_tau();
  const auto [task_w, kd_w] = loss_weights(cfg.lambda, n_teachers);
  const double b = static_cast<double>(batch.size());

  StepLosses out;
  out.kd.assign(static_cast<std::size_t>(n_teachers), 0.0);
  model.zero_grads();

  if (cfg.task == TaskKind::survival) {
    // Risk sets couple the batch: forward everything, then one Cox loss.
    std::vector<StudentModel::Forward> fwds;
    fwds.reserve(batch.size());
    Vecd risks(static_cast<int>(batch.size())), times(static_cast<int>(batch.size()));
    std::vector<int> events(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      fwds.push_back(model.forward(batch[i].tokens, batch[i].teacher_vecs, true, &drop_rng));
      risks(static_cast<int>(i)) = fwds[i].student_logits(0);
      times(static_cast<int>(i)) = batch[i].time;
      events[i] = batch[i].event;
    }
    Vecd dcox;
    out.task = task_loss_cox(risks, times, events, &dcox);

    double kd_grand = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Vecd dstudent = Vecd::Zero(model.cfg.logit_dim);
      dstudent(0) = task_w * dcox(static_cast<int>(i));
      std::vector<Vecd> dteach(static_cast<std::size_t>(n_teachers));
      for (int t = 0; t < n_teachers; ++t) {
        Vecd g_pe, g_se;
        const double kd = kd_loss(fwds[i].student_logits,
                                  fwds[i].teacher_logits[static_cast<std::size_t>(t)], tau, &g_pe,
                                  &g_se);
        out.kd[static_cast<std::size_t>(t)] += kd / b;
        kd_grand += kd / (b * static_cast<double>(std::max(1, n_teachers)));
        dstudent += (kd_w / b) * g_pe;
        dteach[static_cast<std::size_t>(t)] = (kd_w / b) * g_se;
      }
      model.backward(fwds[i], dstudent, dteach);
    }
    out.combined = n_teachers > 0 ? cfg.lambda * out.task + (1.0 - cfg.lambda) * kd_grand
                                  : out.task;
  } else {
    double task_sum = 0.0, kd_grand = 0.0;
    for (const auto& s : batch) {
      const auto f = model.forward(s.tokens, s.teacher_vecs, true, &drop_rng);
      Vecd dtask;
      const double task = sample_task_loss(cfg.task, f, s, &dtask);
      task_sum += task;

      Vecd dstudent = (task_w / b) * dtask;
      std::vector<Vecd> dteach(static_cast<std::size_t>(n_teachers));
      for (int t = 0; t < n_teachers; ++t) {
        Vecd g_pe, g_se;
        const double kd =
            kd_loss(f.student_logits, f.teacher_logits[static_cast<std::size_t>(t)], tau, &g_pe,
                    &g_se);
        out.kd[static_cast<std::size_t>(t)] += kd / b;
        kd_grand += kd / (b * static_cast<double>(std::max(1, n_teachers)));
        dstudent += (kd_w / b) * g_pe;
        dteach[static_cast<std::size_t>(t)] = (kd_w / b) * g_se;
      }
      model.backward(f, dstudent, dteach);
    }
    out.task = task_sum / b;
    out.combined =
        n_teachers > 0 ? cfg.lambda * out.task + (1.0 - cfg.lambda) * kd_grand : out.task;
  }

  if (!std::isfinite(out.combined)) {
    std::ostringstream diag;
    diag << "train_step: non-finite loss (task=" << out.task << ", kd=";
    for (double k : out.kd) diag << k << " ";
    diag << ") on batch of " << batch.size() << " samples, slide '"
         << batch.front().tokens.slide_id << "'";
    throw numeric_error(diag.str());
  }
  opt.step(model);
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation driver

namespace {

struct SlidePrep {
  const MultiViewSet* views = nullptr;
  const CohortRecord* record = nullptr;
  std::vector<Vecd> teacher_vecs;
  ClusterAssignment assignment;
  std::vector<Selection> selections;
};

Vecd positive_probability(const Vecd& logits) { return soften(logits, 1.0); }

double fold_validation_metric(TaskKind task, const std::vector<const CohortRecord*>& records,
                              const std::vector<Vecd>& logits, const std::string& label_name) {
  if (task == TaskKind::biomarker) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < records.size(); ++i) {
      scores.push_back(positive_probability(logits[i])(0));
      labels.push_back(records[i]->binary_labels.at(label_name));
    }
    return auroc(scores, labels);
  }
  if (task == TaskKind::expression) {
    std::vector<Vecd> preds, truths;
    for (std::size_t i = 0; i < records.size(); ++i) {
      preds.push_back(logits[i]);
      truths.push_back(*records[i]->expression);
    }
    return mse_standard(preds, truths);
  }
  std::vector<SurvivalSample> samples;
  for (std::size_t i = 0; i < records.size(); ++i)
    samples.push_back({*records[i]->survival_time, *records[i]->event_indicator, logits[i](0)});
  return c_index(samples);
}

void check_task_labels(TaskKind task, const CohortRecord& rec, const std::string& label_name) {
  switch (task) {
    case TaskKind::biomarker:
      if (!rec.binary_labels.count(label_name))
        throw data_error("slide '" + rec.slide_id + "' has no label '" + label_name + "'");
      break;
    case TaskKind::expression:
      if (!rec.expression)
        throw data_error("slide '" + rec.slide_id + "' has no expression vector");
      break;
    case TaskKind::survival:
      if (!rec.survival_time || !rec.event_indicator)
        throw data_error("slide '" + rec.slide_id + "' has no survival annotation");
      break;
  }
}

void apply_jitter(Matd& tokens, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (int i = 0; i < tokens.rows(); ++i)
    for (int j = 0; j < tokens.cols(); ++j) tokens(i, j) += sigma * rng.gaussian();
}

BatchSample make_sample(const SlidePrep& prep, int replicate, TaskKind task,
                        const std::string& label_name, double jitter_sigma, Rng jitter_rng) {
  BatchSample s;
  s.tokens = concat_views(prep.selections[static_cast<std::size_t>(replicate)], *prep.views);
  apply_jitter(s.tokens.tokens, jitter_sigma, jitter_rng);
  s.teacher_vecs = prep.teacher_vecs;
  switch (task) {
    case TaskKind::biomarker:
      s.label = prep.record->binary_labels.at(label_name);
      break;
    case TaskKind::expression:
      s.expression = *prep.record->expression;
      break;
    case TaskKind::survival:
      s.time = *prep.record->survival_time;
      s.event = *prep.record->event_indicator;
      break;
  }
  return s;
}

}  // namespace

EvalPrep prepare_eval_prep(const MultiViewSet& views, const TrainConfig& cfg) {
  EvalPrep prep;
  SpectralOptions sopts;
  sopts.restarts = cfg.cluster_restarts;
  prep.assignment = multiview_spectral_cluster(views, cfg.n_clusters, cfg.seed, sopts);
  prep.selection = select_patches(prep.assignment, cfg.per_cluster, cfg.seed, 0);
  prep.tokens = concat_views(prep.selection, views);
  return prep;
}

std::vector<std::string> resolve_teachers(const TrainConfig& cfg, const ModelRegistry& registry) {
  std::vector<std::string> teacher_names;
  if (cfg.teachers) {
    teacher_names = *cfg.teachers;
    std::sort(teacher_names.begin(), teacher_names.end());
  } else {
    for (const auto& [name, dim] : registry.teacher_dims) {
      (void)dim;
      teacher_names.push_back(name);
    }
  }
  for (const auto& name : teacher_names)
    if (!registry.teacher_dims.count(name))
      throw config_error("unknown teacher name '" + name + "'");
  return teacher_names;
}

ModelConfig make_model_config(const TrainConfig& cfg, int token_dim,
                              const std::vector<int>& teacher_dims, int n_genes) {
  ModelConfig mc;
  mc.token_dim = token_dim;
  mc.n_heads = cfg.n_heads;
  mc.n_cmsa_layers = cfg.n_cmsa_layers;
  mc.n_ccmsa_layers = cfg.n_ccmsa_layers;
  mc.peg_width = cfg.peg_width;
  mc.topk = cfg.topk;
  mc.n_reps = cfg.n_reps;
  mc.mil_hidden = cfg.mil_hidden;
  mc.dropout = cfg.dropout;
  mc.pool = cfg.pool;
  mc.teacher_dims = teacher_dims;
  switch (cfg.task) {
    case TaskKind::biomarker: mc.logit_dim = 2; break;
    case TaskKind::expression: mc.logit_dim = n_genes; break;
    case TaskKind::survival: mc.logit_dim = 1; break;
  }
  return mc;
}

RunArtifacts cross_validate(const Cohort& cohort, const ModelRegistry& registry, TrainConfig cfg,
                            const std::string& out_dir, int n_threads) {
  cfg.validate();
  if (cohort.slides.empty()) throw data_error("cross_validate: empty cohort");

  const std::vector<std::string> teacher_names = resolve_teachers(cfg, registry);
  std::vector<int> teacher_dims;
  for (const auto& name : teacher_names) teacher_dims.push_back(registry.teacher_dims.at(name));
  const int n_teachers = static_cast<int>(teacher_names.size());

  // Fold assignment (stratified) unless the records already carry folds.
  std::vector<CohortRecord> records = cohort.records;
  bool have_folds = true;
  for (const auto& r : records)
    if (r.fold_id < 0 || r.fold_id >= cfg.n_folds) have_folds = false;
  if (!have_folds)
    records = split_folds(std::move(records), cfg.n_folds,
                          1.0 - 1.0 / static_cast<double>(cfg.n_folds), cfg.seed);
  for (const auto& r : records) check_task_labels(cfg.task, r, cfg.label_name);

  // Per-slide preparation: clustering and repeated selection.
  std::vector<SlidePrep> preps(records.size());
  parallel_for(static_cast<int>(records.size()), n_threads, [&](int i) {
    auto& prep = preps[static_cast<std::size_t>(i)];
    const auto& rec = records[static_cast<std::size_t>(i)];
    prep.record = &rec;
    prep.views = &cohort.slide(rec.slide_id);
    if (n_teachers > 0) {
      const auto& ts = cohort.teacher_set(rec.slide_id);
      for (const auto& name : teacher_names) {
        const Vecd* v = ts.find(name);
        if (!v) throw data_error("slide '" + rec.slide_id + "' lacks teacher '" + name + "'");
        prep.teacher_vecs.push_back(*v);
      }
    }
    SpectralOptions sopts;
    sopts.restarts = cfg.cluster_restarts;
    prep.assignment = multiview_spectral_cluster(*prep.views, cfg.n_clusters, cfg.seed, sopts);
    prep.selections =
        repeated_summarize(prep.assignment, cfg.per_cluster, cfg.n_replicates, cfg.seed);
  });

  const int token_dim = preps.front().views->total_dim();
  for (const auto& p : preps)
    if (p.views->total_dim() != token_dim)
      throw data_error("cross_validate: slides disagree on concatenated dim");

  // Cohort feature sd drives the jitter scale.
  double sum = 0.0, sq = 0.0;
  long count = 0;
  for (const auto& p : preps)
    for (const auto& v : p.views->views) {
      sum += v.matrix.sum();
      sq += v.matrix.array().square().sum();
      count += v.matrix.size();
    }
  const double feat_mean = sum / static_cast<double>(count);
  const double feat_sd =
      std::sqrt(std::max(0.0, sq / static_cast<double>(count) - feat_mean * feat_mean));
  const double jitter_sigma = cfg.jitter * feat_sd;

  const int n_genes = cfg.task == TaskKind::expression
                          ? static_cast<int>(records.front().expression->size())
                          : 0;
  const ModelConfig mc = make_model_config(cfg, token_dim, teacher_dims, n_genes);

  fs::create_directories(fs::path(out_dir) / "folds");
  {
    std::ofstream snap(fs::path(out_dir) / "config.snapshot.txt");
    cfg.to_stream(snap);
  }

  RunArtifacts art;
  art.out_dir = out_dir;
  art.metric_name = cfg.task == TaskKind::biomarker
                        ? "auroc"
                        : (cfg.task == TaskKind::expression ? "mse" : "c_index");
  const bool higher_better = cfg.task != TaskKind::expression;

  std::vector<std::vector<std::string>> step_rows, epoch_rows, pred_rows;

  for (int fold = 0; fold < cfg.n_folds; ++fold) {
    std::vector<int> train_idx, val_idx;
    for (int i = 0; i < static_cast<int>(records.size()); ++i)
      (records[static_cast<std::size_t>(i)].fold_id == fold ? val_idx : train_idx).push_back(i);
    if (train_idx.empty() || val_idx.empty())
      throw config_error("cross_validate: fold " + std::to_string(fold) + " is degenerate");

    StudentModel model = StudentModel::create(mc, mix64(cfg.seed ^ mix64(fold + 1)));
    SgdMomentum opt(cfg.lr, cfg.momentum, cfg.weight_decay);
    Rng fold_rng = Rng(cfg.seed).derive("fold").derive(static_cast<std::uint64_t>(fold));

    std::vector<std::pair<int, int>> pool;  // (prep index, replicate)
    for (int i : train_idx)
      for (int r = 0; r < cfg.n_replicates; ++r) pool.emplace_back(i, r);

    double best_signed = -std::numeric_limits<double>::infinity();
    FoldResult fres;
    fres.fold = fold;
    std::vector<Matd> best_values;
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      Rng epoch_rng = fold_rng.derive("epoch").derive(static_cast<std::uint64_t>(epoch));
      auto order = pool;
      epoch_rng.shuffle(order);

      double ep_task = 0.0, ep_comb = 0.0;
      Vecd ep_kd = Vecd::Zero(std::max(1, n_teachers));
      int n_steps = 0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        MiniBatch mb;
        mb.reserve(stop - start);
        auto add_sample = [&](int prep_i, int rep) {
          Rng jr = Rng(cfg.seed)
                       .derive("jitter")
                       .derive(static_cast<std::uint64_t>(fold))
                       .derive(static_cast<std::uint64_t>(epoch))
                       .derive(static_cast<std::uint64_t>(prep_i))
                       .derive(static_cast<std::uint64_t>(rep));
          mb.push_back(make_sample(preps[static_cast<std::size_t>(prep_i)], rep, cfg.task,
                                   cfg.label_name, jitter_sigma, jr));
        };
        for (std::size_t s = start; s < stop; ++s) add_sample(order[s].first, order[s].second);

        if (cfg.task == TaskKind::survival) {
          int n_events = 0;
          for (const auto& s : mb) n_events += s.event;
          if (n_events < 2) {
            // Degenerate risk set: fall back to a whole-fold batch.
            mb.clear();
            for (int i : train_idx)
              add_sample(i, static_cast<int>(epoch_rng.uniform_index(
                                static_cast<std::uint64_t>(cfg.n_replicates))));
          }
        }

        Rng drop_rng = fold_rng.derive("drop")
                           .derive(static_cast<std::uint64_t>(epoch))
                           .derive(static_cast<std::uint64_t>(n_steps));
        const StepLosses sl = train_step(model, opt, mb, cfg, drop_rng);
        ep_task += sl.task;
        ep_comb += sl.combined;
        for (int t = 0; t < n_teachers; ++t) ep_kd(t) += sl.kd[static_cast<std::size_t>(t)];
        std::vector<std::string> row = {std::to_string(fold), std::to_string(epoch),
                                        std::to_string(n_steps), csv_num(sl.task)};
        for (int t = 0; t < n_teachers; ++t) row.push_back(csv_num(sl.kd[static_cast<std::size_t>(t)]));
        row.push_back(csv_num(sl.combined));
        step_rows.push_back(std::move(row));
        ++n_steps;
      }

      // Validation on replicate 0, eval mode.
      std::vector<const CohortRecord*> val_records;
      std::vector<Vecd> val_logits;
      for (int i : val_idx) {
        const auto& prep = preps[static_cast<std::size_t>(i)];
        BatchSample s;
        s.tokens = concat_views(prep.selections[0], *prep.views);
        const auto f = model.forward(s.tokens, prep.teacher_vecs, false, nullptr);
        val_records.push_back(prep.record);
        val_logits.push_back(f.student_logits);
      }
      const double metric =
          fold_validation_metric(cfg.task, val_records, val_logits, cfg.label_name);
      const double signed_metric = higher_better ? metric : -metric;

      epoch_rows.push_back({std::to_string(fold), std::to_string(epoch),
                            csv_num(ep_task / std::max(1, n_steps)),
                            csv_num(n_teachers ? ep_kd.sum() / (n_teachers * std::max(1, n_steps)) : 0.0),
                            csv_num(ep_comb / std::max(1, n_steps)), csv_num(metric)});

      if (signed_metric > best_signed) {
        best_signed = signed_metric;
        fres.best_epoch = epoch;
        fres.val_metric = metric;
        best_values.clear();
        model.visit_params([&](Param& p) { best_values.push_back(p.value); });
        fres.predictions.clear();
        for (std::size_t i = 0; i < val_records.size(); ++i)
          fres.predictions[val_records[i]->slide_id] = val_logits[i];
        epochs_since_best = 0;
      } else if (++epochs_since_best > cfg.patience) {
        break;
      }
    }

    {  // Restore and persist the best checkpoint.
      std::size_t i = 0;
      model.visit_params([&](Param& p) { p.value = best_values[i++]; });
      save_checkpoint((fs::path(out_dir) / "folds" / ("fold" + std::to_string(fold) + ".fcpr")).string(),
                      model);
    }
    art.folds.push_back(std::move(fres));
  }

  // Summaries.
  double mean = 0.0;
  for (const auto& f : art.folds) mean += f.val_metric;
  mean /= static_cast<double>(art.folds.size());
  double var = 0.0;
  for (const auto& f : art.folds) var += (f.val_metric - mean) * (f.val_metric - mean);
  var /= static_cast<double>(art.folds.size());
  art.metric_mean = mean;
  art.metric_std = std::sqrt(var);

  std::vector<std::string> step_header = {"fold", "epoch", "step", "task_loss"};
  for (const auto& t : teacher_names) step_header.push_back("kd_" + t);
  step_header.push_back("combined");
  write_csv((fs::path(out_dir) / "steps.csv").string(), step_header, step_rows);
  write_csv((fs::path(out_dir) / "epochs.csv").string(),
            {"fold", "epoch", "train_task", "train_kd_mean", "train_combined", "val_metric"},
            epoch_rows);

  // Predictions, one row per validation slide.
  std::vector<std::string> pred_header = {"slide_id", "fold"};
  if (cfg.task == TaskKind::biomarker) {
    pred_header.push_back("score");
  } else if (cfg.task == TaskKind::expression) {
    for (const auto& g : records.front().gene_names) pred_header.push_back("pred:" + g);
  } else {
    pred_header.push_back("risk");
  }
  for (const auto& f : art.folds)
    for (const auto& [slide_id, logits] : f.predictions) {
      std::vector<std::string> row = {slide_id, std::to_string(f.fold)};
      if (cfg.task == TaskKind::biomarker) {
        row.push_back(csv_num(positive_probability(logits)(0)));
      } else if (cfg.task == TaskKind::expression) {
        for (int j = 0; j < logits.size(); ++j) row.push_back(csv_num(logits(j)));
      } else {
        row.push_back(csv_num(logits(0)));
      }
      pred_rows.push_back(std::move(row));
    }
  write_csv((fs::path(out_dir) / "predictions.csv").string(), pred_header, pred_rows);

  std::vector<std::string> sum_header = {"task", "label", "metric", "mean", "std"};
  std::vector<std::string> sum_row = {to_string(cfg.task), cfg.label_name, art.metric_name,
                                      csv_num(art.metric_mean), csv_num(art.metric_std)};
  for (const auto& f : art.folds) {
    sum_header.push_back("fold" + std::to_string(f.fold));
    sum_row.push_back(csv_num(f.val_metric));
  }
  write_csv((fs::path(out_dir) / "summary.csv").string(), sum_header, {sum_row});
  return art;
}

// ---------------------------------------------------------------------------
// Gradient audit

AuditReport gradient_audit(StudentModel& model, const AuditCase& c, double fd_step) {
  c.compute_grads(model);
  std::vector<Param*> params;
  model.visit_params([&](Param& p) { params.push_back(&p); });
  std::vector<Matd> analytic;
  analytic.reserve(params.size());
  for (const Param* p : params) analytic.push_back(p->grad);

  AuditReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    for (int i = 0; i < p.value.rows(); ++i)
      for (int j = 0; j < p.value.cols(); ++j) {
        const double orig = p.value(i, j);
        const double h = fd_step * std::max(1.0, std::abs(orig));
        p.value(i, j) = orig + h;
        const double up = c.loss(model);
        p.value(i, j) = orig - h;
        const double down = c.loss(model);
        p.value(i, j) = orig;
        const double fd = (up - down) / (2.0 * h);
        const double a = analytic[pi](i, j);
        const double rel = std::abs(a - fd) / std::max(1e-5, std::abs(a) + std::abs(fd));
        ++report.n_entries;
        if (rel > report.max_rel_err) {
          report.max_rel_err = rel;
          report.worst_param = p.name + "(" + std::to_string(i) + "," + std::to_string(j) + ")";
        }
      }
  }
  return report;
}

namespace {

TokenBatch audit_tokens(int n_tokens, int dim, const std::vector<int>& cluster_of, Rng& rng) {
  TokenBatch b;
  b.slide_id = "audit";
  b.cluster_of = cluster_of;
  b.tokens.resize(n_tokens, dim);
  for (int i = 0; i < n_tokens; ++i)
    for (int j = 0; j < dim; ++j) b.tokens(i, j) = rng.gaussian();
  return b;
}

}  // namespace

AuditReport full_gradient_audit(std::uint64_t seed,
                                const std::function<void(StudentModel&)>& grad_hook) {
  Rng rng(seed);
  const std::vector<int> clusters = {0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
  const int dim = 16;
  const double lambda = 0.5;

  ModelConfig mc;
  mc.token_dim = dim;
  mc.n_heads = 4;
  mc.topk = 3;
  mc.n_reps = 2;
  mc.mil_hidden = 6;
  mc.dropout = 0.0;
  mc.teacher_dims = {5, 7};

  AuditReport worst;
  auto consider = [&](const AuditReport& r) {
    if (r.max_rel_err >= worst.max_rel_err) {
      worst.max_rel_err = r.max_rel_err;
      worst.worst_param = r.worst_param;
    }
    worst.n_entries += r.n_entries;
  };

  const auto make_teachers = [&](Rng& r) {
    std::vector<Vecd> t;
    for (int d : mc.teacher_dims) {
      Vecd v(d);
      for (int i = 0; i < d; ++i) v(i) = r.gaussian();
      t.push_back(std::move(v));
    }
    return t;
  };

  {  // Binary head, temperature 3.
    ModelConfig cfg = mc;
    cfg.logit_dim = 2;
    StudentModel model = StudentModel::create(cfg, seed);
    Rng r = rng.derive("bce");
    const TokenBatch tokens = audit_tokens(12, dim, clusters, r);
    const auto teachers = make_teachers(r);
    const int label = 1;
    const double tau = 3.0;
    AuditCase c;
    c.name = "bce";
    c.loss = [=](const StudentModel& m) {
      const auto f = m.forward(tokens, teachers, false, nullptr);
      std::vector<double> kds;
      for (const auto& tl : f.teacher_logits) kds.push_back(kd_loss(f.student_logits, tl, tau));
      return combined_loss(task_loss_bce(f.student_logits, label), kds, lambda);
    };
    c.compute_grads = [=](StudentModel& m) {
      m.zero_grads();
      const auto f = m.forward(tokens, teachers, false, nullptr);
      Vecd dtask;
      task_loss_bce(f.student_logits, label, &dtask);
      Vecd dstudent = lambda * dtask;
      std::vector<Vecd> dteach(f.teacher_logits.size());
      const double w = (1.0 - lambda) / static_cast<double>(f.teacher_logits.size());
      for (std::size_t t = 0; t < f.teacher_logits.size(); ++t) {
        Vecd g_pe, g_se;
        kd_loss(f.student_logits, f.teacher_logits[t], tau, &g_pe, &g_se);
        dstudent += w * g_pe;
        dteach[t] = w * g_se;
      }
      m.backward(f, dstudent, dteach);
      if (grad_hook) grad_hook(m);
    };
    consider(gradient_audit(model, c));
  }

  {  // Regression head, temperature 1.
    ModelConfig cfg = mc;
    cfg.logit_dim = 4;
    StudentModel model = StudentModel::create(cfg, seed + 1);
    Rng r = rng.derive("mse");
    const TokenBatch tokens = audit_tokens(12, dim, clusters, r);
    const auto teachers = make_teachers(r);
    Vecd target(4);
    for (int i = 0; i < 4; ++i) target(i) = r.gaussian();
    const double tau = 1.0;
    AuditCase c;
    c.name = "mse";
    c.loss = [=](const StudentModel& m) {
      const auto f = m.forward(tokens, teachers, false, nullptr);
      std::vector<double> kds;
      for (const auto& tl : f.teacher_logits) kds.push_back(kd_loss(f.student_logits, tl, tau));
      return combined_loss(task_loss_mse(f.student_logits, target), kds, lambda);
    };
    c.compute_grads = [=](StudentModel& m) {
      m.zero_grads();
      const auto f = m.forward(tokens, teachers, false, nullptr);
      Vecd dtask;
      task_loss_mse(f.student_logits, target, &dtask);
      Vecd dstudent = lambda * dtask;
      std::vector<Vecd> dteach(f.teacher_logits.size());
      const double w = (1.0 - lambda) / static_cast<double>(f.teacher_logits.size());
      for (std::size_t t = 0; t < f.teacher_logits.size(); ++t) {
        Vecd g_pe, g_se;
        kd_loss(f.student_logits, f.teacher_logits[t], tau, &g_pe, &g_se);
        dstudent += w * g_pe;
        dteach[t] = w * g_se;
      }
      m.backward(f, dstudent, dteach);
      if (grad_hook) grad_hook(m);
    };
    consider(gradient_audit(model, c));
  }

  {  // Survival head: batch-level Cox plus per-sample distillation.
    ModelConfig cfg = mc;
    cfg.logit_dim = 1;
    StudentModel model = StudentModel::create(cfg, seed + 2);
    Rng r = rng.derive("cox");
    const int batch = 4;
    std::vector<TokenBatch> tokens;
    std::vector<std::vector<Vecd>> teachers;
    for (int bi = 0; bi < batch; ++bi) {
      tokens.push_back(audit_tokens(12, dim, clusters, r));
      teachers.push_back(make_teachers(r));
    }
    Vecd times(batch);
    times << 3.0, 1.0, 4.0, 2.0;
    const std::vector<int> events = {1, 1, 0, 1};
    const double tau = 1.0;

    AuditCase c;
    c.name = "cox";
    c.loss = [=](const StudentModel& m) {
      Vecd risks(batch);
      double kd_grand = 0.0;
      for (int bi = 0; bi < batch; ++bi) {
        const auto f = m.forward(tokens[static_cast<std::size_t>(bi)],
                                 teachers[static_cast<std::size_t>(bi)], false, nullptr);
        risks(bi) = f.student_logits(0);
        for (const auto& tl : f.teacher_logits)
          kd_grand += kd_loss(f.student_logits, tl, tau) /
                      static_cast<double>(batch * static_cast<int>(f.teacher_logits.size()));
      }
      return lambda * task_loss_cox(risks, times, events) + (1.0 - lambda) * kd_grand;
    };
    c.compute_grads = [=](StudentModel& m) {
      m.zero_grads();
      std::vector<StudentModel::Forward> fwds;
      Vecd risks(batch);
      for (int bi = 0; bi < batch; ++bi) {
        fwds.push_back(m.forward(tokens[static_cast<std::size_t>(bi)],
                                 teachers[static_cast<std::size_t>(bi)], false, nullptr));
        risks(bi) = fwds.back().student_logits(0);
      }
      Vecd dcox;
      task_loss_cox(risks, times, events, &dcox);
      for (int bi = 0; bi < batch; ++bi) {
        const auto& f = fwds[static_cast<std::size_t>(bi)];
        Vecd dstudent = Vecd::Zero(1);
        dstudent(0) = lambda * dcox(bi);
        std::vector<Vecd> dteach(f.teacher_logits.size());
        const double w = (1.0 - lambda) /
                         static_cast<double>(batch * static_cast<int>(f.teacher_logits.size()));
        for (std::size_t t = 0; t < f.teacher_logits.size(); ++t) {
          Vecd g_pe, g_se;
          kd_loss(f.student_logits, f.teacher_logits[t], tau, &g_pe, &g_se);
          dstudent += w * g_pe;
          dteach[t] = w * g_se;
        }
        m.backward(f, dstudent, dteach);
      }
      if (grad_hook) grad_hook(m);
    };
    consider(gradient_audit(model, c));
  }

  return worst;
}

}  // namespace fusemil
