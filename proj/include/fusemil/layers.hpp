#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fusemil/common.hpp"
#include "fusemil/rng.hpp"

namespace fusemil {

/// One trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Matd value;
  Matd grad;

  void init_zero(const std::string& n, int rows, int cols);
  /// Symmetric uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  void init_uniform(const std::string& n, int rows, int cols, int fan_in, Rng& rng);
  void zero_grad() { grad.setZero(); }
};

using ParamVisitor = std::function<void(Param&)>;

using Spans = std::vector<std::pair<int, int>>;

/// Inverted-dropout mask: entries are 0 or 1/(1-p).
Matd dropout_mask(int rows, int cols, double p, Rng& rng);

struct LayerNorm {
  Param gamma, beta;  // 1 x dim
  double eps = 1e-5;

  void init(const std::string& prefix, int dim);
  void visit(const ParamVisitor& f);

  struct Cache {
    Matd xhat;
    Vecd inv_std;
  };
  Matd forward(const Matd& x, Cache* cache) const;
  Matd backward(const Matd& dy, const Cache& cache);
};

/// Multi-head scaled dot-product self-attention restricted to row spans.
/// Each span attends within itself; with topk > 0 every query keeps only its
/// topk largest logits (ties resolved toward lower indices) before softmax.
struct Mha {
  Param wq, wk, wv, wo;  // dim x dim
  Param bq, bk, bv, bo;  // 1 x dim
  int n_heads = 8;

  void init(const std::string& prefix, int dim, int n_heads, Rng& rng);
  void visit(const ParamVisitor& f);

  struct Cache {
    Matd q, k, v;             // T x dim
    Matd concat;              // T x dim, pre-output-projection
    std::vector<Matd> probs;  // per (span, head), row-stochastic
    Spans spans;
    int topk = 0;
  };
  Matd forward(const Matd& x, const Spans& spans, int topk, Cache* cache) const;
  Matd backward(const Matd& dy, const Matd& x, const Cache& cache);
};

/// Pre-norm clustered self-attention block with residual connection:
/// x + Dropout(Attn(LN(x))) where attention is masked to within-cluster
/// pairs and sparsified per query to the topk largest logits.
struct CmsaLayer {
  LayerNorm ln;
  Mha attn;
  int topk = 8;
  double dropout = 0.10;

  void init(const std::string& prefix, int dim, int n_heads, int topk, double dropout, Rng& rng);
  void visit(const ParamVisitor& f);

  struct Cache {
    LayerNorm::Cache ln;
    Matd normed;
    Mha::Cache attn;
    Matd dropmask;  // empty in eval mode
  };
  Matd forward(const Matd& x, const Spans& spans, bool training, Rng* drop_rng,
               Cache* cache) const;
  Matd backward(const Matd& dy, const Cache& cache);
};

/// Position encoding: residual depthwise 1-D convolution over the token
/// sequence axis, zero padding, zero-initialized kernel.
struct PegLayer {
  Param kernel;  // dim x width

  void init(const std::string& prefix, int dim, int width);
  void visit(const ParamVisitor& f);

  Matd forward(const Matd& x) const;
  Matd backward(const Matd& dy, const Matd& x);
};

/// Cross-cluster attention. Per cluster k with tokens Z_k and logits
/// S_k = Z_k Phi: (a) pool G representatives per cluster with a per-column
/// softmax of S_k over the cluster's tokens; (b) mix all K*G representatives
/// with dense self-attention; (c) scatter back, token t receiving
/// sum_g minmax(S_k)[t,g] * what[g] * mixed_k[g,:] where what is the softmax
/// over G of the cluster-mean logits; the result adds residually. MinMax of
/// a constant column is defined as all-ones.
struct CcmsaLayer {
  Param phi;  // dim x n_reps
  Mha attn;
  int n_reps = 4;  // G
  double dropout = 0.10;

  void init(const std::string& prefix, int dim, int n_heads, int n_reps, double dropout, Rng& rng);
  void visit(const ParamVisitor& f);

  struct Cache {
    Spans spans;
    Matd logits;             // T x G
    std::vector<Matd> pool;  // per cluster: n_k x G column softmax
    Matd reps;               // (K*G) x dim
    Mha::Cache attn;
    Matd mixed;              // (K*G) x dim
    Matd mm;                 // T x G minmax dispatch weights
    Eigen::MatrixXi argmin, argmax;  // per (cluster, g); -1 marks a constant column
    Matd combine;            // K x G softmax combine weights
    Matd dropmask;
  };
  Matd forward(const Matd& x, const Spans& spans, bool training, Rng* drop_rng,
               Cache* cache) const;
  Matd backward(const Matd& dy, const Matd& x, const Cache& cache);
};

/// Gated-free attention pooling: attn = softmax_t(w' tanh(V x_t')),
/// z = sum_t attn_t x_t.
struct AbmilPool {
  Param v;  // hidden x dim
  Param w;  // hidden x 1

  void init(const std::string& prefix, int dim, int hidden, Rng& rng);
  void visit(const ParamVisitor& f);

  struct Cache {
    Matd u;     // T x hidden, tanh activations
    Vecd attn;  // T
  };
  Vecd forward(const Matd& x, Cache* cache) const;
  Matd backward(const Vecd& dz, const Matd& x, const Cache& cache);
};

/// Baseline pooling modes for ablation runs.
Vecd mean_pool(const Matd& x);
Matd mean_pool_backward(const Vecd& dz, int n_tokens);
Vecd max_pool(const Matd& x, std::vector<int>* argmax);
Matd max_pool_backward(const Vecd& dz, int n_tokens, const std::vector<int>& argmax);

struct Affine {
  Param w;  // out x in
  Param b;  // out x 1

  void init(const std::string& prefix, int in_dim, int out_dim, Rng& rng);
  void visit(const ParamVisitor& f);

  Vecd forward(const Vecd& x) const;
  Vecd backward(const Vecd& dy, const Vecd& x);
};

}  // namespace fusemil
