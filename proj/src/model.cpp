#include "fusemil/model.hpp"

namespace fusemil {

PoolKind pool_kind_from_string(const std::string& s) {
  if (s == "attention") return PoolKind::attention;
  if (s == "mean") return PoolKind::mean;
  if (s == "max") return PoolKind::max;
  throw config_error("unknown pooling mode '" + s + "' (attention/mean/max)");
}

std::string to_string(PoolKind k) {
  switch (k) {
    case PoolKind::attention: return "attention";
    case PoolKind::mean: return "mean";
    case PoolKind::max: return "max";
  }
  return "attention";
}

void ModelConfig::validate() const {
  if (token_dim < 1) throw config_error("model: token_dim must be set");
  if (n_heads < 1 || token_dim % n_heads != 0)
    throw config_error("model: token_dim must be divisible by n_heads");
  if (n_cmsa_layers < 1) throw config_error("model: need at least one clustered attention layer");
  if (n_ccmsa_layers < 0) throw config_error("model: n_ccmsa_layers must be >= 0");
  if (peg_width < 1 || peg_width % 2 == 0) throw config_error("model: peg_width must be odd");
  if (topk < 1) throw config_error("model: topk must be >= 1");
  if (n_reps < 1) throw config_error("model: n_reps must be >= 1");
  if (mil_hidden < 1) throw config_error("model: mil_hidden must be >= 1");
  if (logit_dim < 1) throw config_error("model: logit_dim must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw config_error("model: dropout must be in [0, 1)");
  for (int d : teacher_dims)
    if (d < 1) throw config_error("model: teacher dims must be >= 1");
}

StudentModel StudentModel::create(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  StudentModel m;
  m.cfg = cfg;
  Rng rng = Rng(seed).derive("init");
  m.cmsa.resize(static_cast<std::size_t>(cfg.n_cmsa_layers));
  for (int i = 0; i < cfg.n_cmsa_layers; ++i)
    m.cmsa[static_cast<std::size_t>(i)].init("cmsa" + std::to_string(i), cfg.token_dim,
                                             cfg.n_heads, cfg.topk, cfg.dropout, rng);
  m.peg.init("peg", cfg.token_dim, cfg.peg_width);
  m.ccmsa.resize(static_cast<std::size_t>(cfg.n_ccmsa_layers));
  for (int i = 0; i < cfg.n_ccmsa_layers; ++i)
    m.ccmsa[static_cast<std::size_t>(i)].init("ccmsa" + std::to_string(i), cfg.token_dim,
                                              cfg.n_heads, cfg.n_reps, cfg.dropout, rng);
  m.mil.init("mil", cfg.token_dim, cfg.mil_hidden, rng);
  m.student_head.init("student_head", cfg.token_dim, cfg.logit_dim, rng);
  m.teacher_heads.resize(cfg.teacher_dims.size());
  for (std::size_t i = 0; i < cfg.teacher_dims.size(); ++i)
    m.teacher_heads[i].init("teacher_head" + std::to_string(i), cfg.teacher_dims[i],
                            cfg.logit_dim, rng);
  return m;
}

void StudentModel::visit_params(const ParamVisitor& f) {
  for (auto& layer : cmsa) layer.visit(f);
  peg.visit(f);
  for (auto& layer : ccmsa) layer.visit(f);
  if (cfg.pool == PoolKind::attention) mil.visit(f);
  student_head.visit(f);
  for (auto& head : teacher_heads) head.visit(f);
}

void StudentModel::zero_grads() {
  visit_params([](Param& p) { p.zero_grad(); });
}

StudentModel::Forward StudentModel::forward(const TokenBatch& batch,
                                            const std::vector<Vecd>& teacher_vecs, bool training,
                                            Rng* drop_rng) const {
  if (batch.dim() != cfg.token_dim)
    throw data_error("model: token dim " + std::to_string(batch.dim()) + " != configured " +
                     std::to_string(cfg.token_dim));
  if (!teacher_vecs.empty() && teacher_vecs.size() != teacher_heads.size())
    throw data_error("model: teacher vector count does not match teacher heads");
  if (training && cfg.dropout > 0.0 && drop_rng == nullptr)
    throw config_error("model: training forward with dropout needs an rng");

  Forward f;
  f.spans = batch.cluster_spans();
  f.stages.reserve(static_cast<std::size_t>(cfg.n_cmsa_layers + cfg.n_ccmsa_layers + 2));
  f.stages.push_back(batch.tokens);
  f.cmsa_caches.resize(cmsa.size());
  f.ccmsa_caches.resize(ccmsa.size());

  // Clustered attention with the position encoder after the first layer.
  for (std::size_t i = 0; i < cmsa.size(); ++i) {
    f.stages.push_back(
        cmsa[i].forward(f.stages.back(), f.spans, training, drop_rng, &f.cmsa_caches[i]));
    if (i == 0 && cmsa.size() > 1) {
      f.peg_input_stage = static_cast<int>(f.stages.size()) - 1;
      f.stages.push_back(peg.forward(f.stages.back()));
    }
  }
  for (std::size_t i = 0; i < ccmsa.size(); ++i)
    f.stages.push_back(
        ccmsa[i].forward(f.stages.back(), f.spans, training, drop_rng, &f.ccmsa_caches[i]));

  switch (cfg.pool) {
    case PoolKind::attention:
      f.pooled = mil.forward(f.stages.back(), &f.mil_cache);
      break;
    case PoolKind::mean:
      f.pooled = mean_pool(f.stages.back());
      break;
    case PoolKind::max:
      f.pooled = max_pool(f.stages.back(), &f.max_argmax);
      break;
  }
  f.student_logits = student_head.forward(f.pooled);
  f.teacher_inputs = teacher_vecs;
  f.teacher_logits.reserve(teacher_vecs.size());
  for (std::size_t i = 0; i < teacher_vecs.size(); ++i)
    f.teacher_logits.push_back(teacher_heads[i].forward(teacher_vecs[i]));
  return f;
}

void StudentModel::backward(const Forward& f, const Vecd& dstudent,
                            const std::vector<Vecd>& dteacher) {
  for (std::size_t i = 0; i < dteacher.size(); ++i)
    if (dteacher[i].size() > 0)
      teacher_heads[i].backward(dteacher[i], f.teacher_inputs[i]);

  const Vecd dz = student_head.backward(dstudent, f.pooled);

  Matd dx;
  const int n_tokens = static_cast<int>(f.stages.back().rows());
  switch (cfg.pool) {
    case PoolKind::attention:
      dx = mil.backward(dz, f.stages.back(), f.mil_cache);
      break;
    case PoolKind::mean:
      dx = mean_pool_backward(dz, n_tokens);
      break;
    case PoolKind::max:
      dx = max_pool_backward(dz, n_tokens, f.max_argmax);
      break;
  }

  // Walk the stage list backwards, mirroring forward's layer order.
  int stage = static_cast<int>(f.stages.size()) - 1;
  for (int i = static_cast<int>(ccmsa.size()) - 1; i >= 0; --i) {
    --stage;
    dx = ccmsa[static_cast<std::size_t>(i)].backward(
        dx, f.stages[static_cast<std::size_t>(stage)], f.ccmsa_caches[static_cast<std::size_t>(i)]);
  }
  for (int i = static_cast<int>(cmsa.size()) - 1; i >= 0; --i) {
    if (i == 0 && f.peg_input_stage >= 0) {
      --stage;
      dx = peg.backward(dx, f.stages[static_cast<std::size_t>(f.peg_input_stage)]);
    }
    --stage;
    dx = cmsa[static_cast<std::size_t>(i)].backward(dx, f.cmsa_caches[static_cast<std::size_t>(i)]);
  }
}

TokenBatch StudentModel::reembed(const TokenBatch& batch, bool training, Rng* drop_rng) const {
  const Forward f = forward(batch, {}, training, drop_rng);
  TokenBatch out = batch;
  out.tokens = f.reembedded();
  return out;
}

}  // namespace fusemil
