#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fusemil/layers.hpp"
#include "fusemil/tokens.hpp"

namespace fusemil {

enum class PoolKind { attention, mean, max };

PoolKind pool_kind_from_string(const std::string& s);
std::string to_string(PoolKind k);

struct ModelConfig {
  int token_dim = 0;  // D, sum of view dims
  int n_heads = 8;
  int n_cmsa_layers = 2;
  int n_ccmsa_layers = 1;
  int peg_width = 3;
  int topk = 8;
  int n_reps = 4;        // representatives per cluster in cross-cluster attention
  int mil_hidden = 256;
  int logit_dim = 2;     // 2 for binary, n_genes for regression, 1 for survival
  double dropout = 0.10;
  std::vector<int> teacher_dims;
  PoolKind pool = PoolKind::attention;

  void validate() const;
};

/// The trainable student: token re-embedding (clustered attention, position
/// encoding, cross-cluster attention), pooling to one slide vector, a logit
/// head, plus one projection head per teacher mapping the teacher's vector
/// into the shared logit space.
struct StudentModel {
  ModelConfig cfg;
  std::vector<CmsaLayer> cmsa;
  PegLayer peg;
  std::vector<CcmsaLayer> ccmsa;
  AbmilPool mil;
  Affine student_head;
  std::vector<Affine> teacher_heads;

  static StudentModel create(const ModelConfig& cfg, std::uint64_t seed);

  void visit_params(const ParamVisitor& f);
  void zero_grads();
  int n_teachers() const { return static_cast<int>(teacher_heads.size()); }

  struct Forward {
    Spans spans;
    std::vector<Matd> stages;  // stages[0] = input tokens; one entry per layer output
    std::vector<CmsaLayer::Cache> cmsa_caches;
    std::vector<CcmsaLayer::Cache> ccmsa_caches;
    int peg_input_stage = -1;
    AbmilPool::Cache mil_cache;
    std::vector<int> max_argmax;
    Vecd pooled;          // slide vector z
    Vecd student_logits;  // h
    std::vector<Vecd> teacher_inputs;
    std::vector<Vecd> teacher_logits;

    const Matd& reembedded() const { return stages.back(); }
  };

  /// Full forward. `teacher_vecs` must follow cfg.teacher_dims order and may
  /// be empty for teacher-free training. Dropout fires only when training.
  Forward forward(const TokenBatch& batch, const std::vector<Vecd>& teacher_vecs, bool training,
                  Rng* drop_rng) const;

  /// Accumulates gradients for d(loss)/d(student_logits) and, per teacher,
  /// d(loss)/d(teacher_logits).
  void backward(const Forward& f, const Vecd& dstudent, const std::vector<Vecd>& dteacher);

  /// Re-embedding alone: same token shape in and out.
  TokenBatch reembed(const TokenBatch& batch, bool training, Rng* drop_rng) const;
};

}  // namespace fusemil
