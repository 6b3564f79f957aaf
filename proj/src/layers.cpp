#include "fusemil/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fusemil {

void Param::init_zero(const std::string& n, int rows, int cols) {
  name = n;
  value = Matd::Zero(rows, cols);
  grad = Matd::Zero(rows, cols);
}

void Param::init_uniform(const std::string& n, int rows, int cols, int fan_in, Rng& rng) {
  name = n;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  value.resize(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) value(i, j) = rng.uniform(-bound, bound);
  grad = Matd::Zero(rows, cols);
}

Matd dropout_mask(int rows, int cols, double p, Rng& rng) {
  Matd mask(rows, cols);
  const double scale = 1.0 / (1.0 - p);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) mask(i, j) = rng.uniform() < p ? 0.0 : scale;
  return mask;
}

// ---------------------------------------------------------------------------
// LayerNorm

void LayerNorm::init(const std::string& prefix, int dim) {
  gamma.init_zero(prefix + ".gamma", 1, dim);
  gamma.value.setOnes();
  beta.init_zero(prefix + ".beta", 1, dim);
}

void LayerNorm::visit(const ParamVisitor& f) {
  f(gamma);
  f(beta);
}

Matd LayerNorm::forward(const Matd& x, Cache* cache) const {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  Matd xhat(n, d);
  Vecd inv_std(n);
  for (int i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mu) * is;
    inv_std(i) = is;
  }
  Matd y = xhat.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matd LayerNorm::backward(const Matd& dy, const Cache& cache) {
  const int n = static_cast<int>(dy.rows());
  gamma.grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  Matd dx(n, dy.cols());
  for (int i = 0; i < n; ++i) {
    const auto dyg = (dy.row(i).array() * gamma.value.row(0).array()).eval();
    const double m1 = dyg.mean();
    const double m2 = (dyg * cache.xhat.row(i).array()).mean();
    dx.row(i) = (cache.inv_std(i) * (dyg - m1 - cache.xhat.row(i).array() * m2)).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Multi-head attention over spans

void Mha::init(const std::string& prefix, int dim, int heads, Rng& rng) {
  if (dim % heads != 0)
    throw config_error("attention: dim " + std::to_string(dim) + " not divisible by " +
                       std::to_string(heads) + " heads");
  n_heads = heads;
  wq.init_uniform(prefix + ".wq", dim, dim, dim, rng);
  wk.init_uniform(prefix + ".wk", dim, dim, dim, rng);
  wv.init_uniform(prefix + ".wv", dim, dim, dim, rng);
  wo.init_uniform(prefix + ".wo", dim, dim, dim, rng);
  bq.init_zero(prefix + ".bq", 1, dim);
  bk.init_zero(prefix + ".bk", 1, dim);
  bv.init_zero(prefix + ".bv", 1, dim);
  bo.init_zero(prefix + ".bo", 1, dim);
}

void Mha::visit(const ParamVisitor& f) {
  f(wq);
  f(wk);
  f(wv);
  f(wo);
  f(bq);
  f(bk);
  f(bv);
  f(bo);
}

namespace {

// Row softmax with per-query top-k sparsification. Entries outside the top-k
// set get probability exactly zero; ties at the threshold keep lower indices.
Matd topk_softmax_rows(const Matd& logits, int topk) {
  const int n = static_cast<int>(logits.rows());
  const int m = static_cast<int>(logits.cols());
  Matd probs = Matd::Zero(n, m);
  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(m));
  std::vector<double> sorted(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) {
    keep.clear();
    if (topk > 0 && m > topk) {
      for (int j = 0; j < m; ++j) sorted[static_cast<std::size_t>(j)] = logits(i, j);
      std::nth_element(sorted.begin(), sorted.begin() + (topk - 1), sorted.end(),
                       std::greater<double>());
      const double threshold = sorted[static_cast<std::size_t>(topk - 1)];
      int room = topk;
      for (int j = 0; j < m && room > 0; ++j)
        if (logits(i, j) > threshold) {
          keep.push_back(j);
          --room;
        }
      for (int j = 0; j < m && room > 0; ++j)
        if (logits(i, j) == threshold) {
          keep.push_back(j);
          --room;
        }
      std::sort(keep.begin(), keep.end());
    } else {
      for (int j = 0; j < m; ++j) keep.push_back(j);
    }
    double hi = -std::numeric_limits<double>::infinity();
    for (int j : keep) hi = std::max(hi, logits(i, j));
    double z = 0.0;
    for (int j : keep) z += std::exp(logits(i, j) - hi);
    for (int j : keep) probs(i, j) = std::exp(logits(i, j) - hi) / z;
  }
  return probs;
}

}  // namespace

Matd Mha::forward(const Matd& x, const Spans& spans, int topk, Cache* cache) const {
  const int dim = static_cast<int>(x.cols());
  const int dh = dim / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matd q = x * wq.value;
  q.rowwise() += bq.value.row(0);
  Matd k = x * wk.value;
  k.rowwise() += bk.value.row(0);
  Matd v = x * wv.value;
  v.rowwise() += bv.value.row(0);

  Matd concat(x.rows(), dim);
  std::vector<Matd> probs;
  probs.reserve(spans.size() * static_cast<std::size_t>(n_heads));
  for (const auto& [begin, end] : spans) {
    const int n_s = end - begin;
    for (int h = 0; h < n_heads; ++h) {
      const auto qh = q.block(begin, h * dh, n_s, dh);
      const auto kh = k.block(begin, h * dh, n_s, dh);
      const auto vh = v.block(begin, h * dh, n_s, dh);
      const Matd logits = scale * (qh * kh.transpose());
      Matd p = topk_softmax_rows(logits, topk);
      concat.block(begin, h * dh, n_s, dh) = p * vh;
      probs.push_back(std::move(p));
    }
  }
  Matd y = concat * wo.value;
  y.rowwise() += bo.value.row(0);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->probs = std::move(probs);
    cache->spans = spans;
    cache->topk = topk;
  }
  return y;
}

Matd Mha::backward(const Matd& dy, const Matd& x, const Cache& cache) {
  const int dim = static_cast<int>(x.cols());
  const int dh = dim / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  wo.grad += cache.concat.transpose() * dy;
  bo.grad.row(0) += dy.colwise().sum();
  const Matd dconcat = dy * wo.value.transpose();

  Matd dq = Matd::Zero(x.rows(), dim);
  Matd dk = Matd::Zero(x.rows(), dim);
  Matd dv = Matd::Zero(x.rows(), dim);
  std::size_t pi = 0;
  for (const auto& [begin, end] : cache.spans) {
    const int n_s = end - begin;
    for (int h = 0; h < n_heads; ++h) {
      const Matd& p = cache.probs[pi++];
      const auto qh = cache.q.block(begin, h * dh, n_s, dh);
      const auto kh = cache.k.block(begin, h * dh, n_s, dh);
      const auto vh = cache.v.block(begin, h * dh, n_s, dh);
      const auto doh = dconcat.block(begin, h * dh, n_s, dh);

      const Matd dp = doh * vh.transpose();
      dv.block(begin, h * dh, n_s, dh) += p.transpose() * doh;

      // Softmax backward; zero-probability entries stay zero.
      const Vecd row_dot = (dp.array() * p.array()).rowwise().sum();
      const Matd dlogits = p.array() * (dp.array().colwise() - row_dot.array());

      dq.block(begin, h * dh, n_s, dh) += scale * (dlogits * kh);
      dk.block(begin, h * dh, n_s, dh) += scale * (dlogits.transpose() * qh);
    }
  }

  wq.grad += x.transpose() * dq;
  bq.grad.row(0) += dq.colwise().sum();
  wk.grad += x.transpose() * dk;
  bk.grad.row(0) += dk.colwise().sum();
  wv.grad += x.transpose() * dv;
  bv.grad.row(0) += dv.colwise().sum();

  return dq * wq.value.transpose() + dk * wk.value.transpose() + dv * wv.value.transpose();
}

// ---------------------------------------------------------------------------
// C-MSA block

void CmsaLayer::init(const std::string& prefix, int dim, int n_heads, int topk_, double dropout_,
                     Rng& rng) {
  ln.init(prefix + ".ln", dim);
  attn.init(prefix + ".attn", dim, n_heads, rng);
  topk = topk_;
  dropout = dropout_;
}

void CmsaLayer::visit(const ParamVisitor& f) {
  ln.visit(f);
  attn.visit(f);
}

Matd CmsaLayer::forward(const Matd& x, const Spans& spans, bool training, Rng* drop_rng,
                        Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.normed = ln.forward(x, &c.ln);
  Matd out = attn.forward(c.normed, spans, topk, &c.attn);
  if (training && dropout > 0.0) {
    c.dropmask = dropout_mask(static_cast<int>(out.rows()), static_cast<int>(out.cols()), dropout,
                              *drop_rng);
    out.array() *= c.dropmask.array();
  }
  return x + out;
}

Matd CmsaLayer::backward(const Matd& dy, const Cache& cache) {
  Matd dout = dy;
  if (cache.dropmask.size() > 0) dout.array() *= cache.dropmask.array();
  const Matd dnormed = attn.backward(dout, cache.normed, cache.attn);
  return dy + ln.backward(dnormed, cache.ln);
}

// ---------------------------------------------------------------------------
// PEG

void PegLayer::init(const std::string& prefix, int dim, int width) {
  if (width < 1 || width % 2 == 0) throw config_error("peg: kernel width must be odd and >= 1");
  kernel.init_zero(prefix + ".kernel", dim, width);
}

void PegLayer::visit(const ParamVisitor& f) { f(kernel); }

Matd PegLayer::forward(const Matd& x) const {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const int width = static_cast<int>(kernel.value.cols());
  const int center = width / 2;
  Matd y = x;
  for (int j = 0; j < width; ++j) {
    const int off = j - center;
    const int lo = std::max(0, -off);
    const int hi = std::min(n, n - off);
    if (lo >= hi) continue;
    y.middleRows(lo, hi - lo).array() +=
        x.middleRows(lo + off, hi - lo).array().rowwise() *
        kernel.value.col(j).transpose().array();
  }
  (void)d;
  return y;
}

Matd PegLayer::backward(const Matd& dy, const Matd& x) {
  const int n = static_cast<int>(x.rows());
  const int width = static_cast<int>(kernel.value.cols());
  const int center = width / 2;
  Matd dx = dy;
  for (int j = 0; j < width; ++j) {
    const int off = j - center;
    const int lo = std::max(0, -off);
    const int hi = std::min(n, n - off);
    if (lo >= hi) continue;
    kernel.grad.col(j) += (dy.middleRows(lo, hi - lo).array() *
                           x.middleRows(lo + off, hi - lo).array())
                              .colwise()
                              .sum()
                              .transpose()
                              .matrix();
    dx.middleRows(lo + off, hi - lo).array() +=
        dy.middleRows(lo, hi - lo).array().rowwise() * kernel.value.col(j).transpose().array();
  }
  return dx;
}

// ---------------------------------------------------------------------------
// CC-MSA

void CcmsaLayer::init(const std::string& prefix, int dim, int n_heads, int n_reps_, double dropout_,
                      Rng& rng) {
  if (n_reps_ < 1) throw config_error("cross-cluster attention: n_reps must be >= 1");
  phi.init_uniform(prefix + ".phi", dim, n_reps_, dim, rng);
  attn.init(prefix + ".attn", dim, n_heads, rng);
  n_reps = n_reps_;
  dropout = dropout_;
}

void CcmsaLayer::visit(const ParamVisitor& f) {
  f(phi);
  attn.visit(f);
}

namespace {

Vecd softmax_vec(const Vecd& v) {
  const double hi = v.maxCoeff();
  Vecd e = (v.array() - hi).exp();
  return e / e.sum();
}

}  // namespace

Matd CcmsaLayer::forward(const Matd& x, const Spans& spans, bool training, Rng* drop_rng,
                         Cache* cache) const {
  const int n_clusters = static_cast<int>(spans.size());
  const int dim = static_cast<int>(x.cols());
  if (n_clusters < 2)
    warn("cross-cluster attention over a single cluster: no cross-cluster mixing possible");

  Cache local;
  Cache& c = cache ? *cache : local;
  c.spans = spans;
  c.logits = x * phi.value;  // T x G
  c.pool.assign(static_cast<std::size_t>(n_clusters), {});
  c.reps.resize(n_clusters * n_reps, dim);
  c.mm.resize(x.rows(), n_reps);
  c.argmin = Eigen::MatrixXi::Constant(n_clusters, n_reps, -1);
  c.argmax = Eigen::MatrixXi::Constant(n_clusters, n_reps, -1);
  c.combine.resize(n_clusters, n_reps);

  for (int ci = 0; ci < n_clusters; ++ci) {
    const auto [begin, end] = spans[static_cast<std::size_t>(ci)];
    const int n_k = end - begin;
    const auto s_k = c.logits.middleRows(begin, n_k);
    const auto x_k = x.middleRows(begin, n_k);

    // (a) pool: per-column softmax over the cluster's tokens.
    Matd a(n_k, n_reps);
    for (int g = 0; g < n_reps; ++g) a.col(g) = softmax_vec(s_k.col(g));
    c.reps.middleRows(ci * n_reps, n_reps) = a.transpose() * x_k;
    c.pool[static_cast<std::size_t>(ci)] = std::move(a);

    // (c, weights) dispatch: per-column minmax; constant columns become ones.
    for (int g = 0; g < n_reps; ++g) {
      int imin = 0, imax = 0;
      double lo = s_k(0, g), hi = s_k(0, g);
      for (int t = 1; t < n_k; ++t) {
        if (s_k(t, g) < lo) {
          lo = s_k(t, g);
          imin = t;
        }
        if (s_k(t, g) > hi) {
          hi = s_k(t, g);
          imax = t;
        }
      }
      if (hi == lo) {
        c.mm.col(g).segment(begin, n_k).setOnes();
      } else {
        c.mm.col(g).segment(begin, n_k) = (s_k.col(g).array() - lo) / (hi - lo);
        c.argmin(ci, g) = imin;
        c.argmax(ci, g) = imax;
      }
    }
    // combine weights: softmax over G of the cluster-mean logits.
    c.combine.row(ci) = softmax_vec(s_k.colwise().mean().transpose()).transpose();
  }

  // (b) mix: dense attention across all representatives.
  const Spans full = {{0, n_clusters * n_reps}};
  c.mixed = attn.forward(c.reps, full, 0, &c.attn);

  // (c) scatter.
  Matd scatter(x.rows(), dim);
  for (int ci = 0; ci < n_clusters; ++ci) {
    const auto [begin, end] = spans[static_cast<std::size_t>(ci)];
    const int n_k = end - begin;
    const Matd weights = c.mm.middleRows(begin, n_k).array().rowwise() *
                         c.combine.row(ci).array();  // n_k x G
    scatter.middleRows(begin, n_k) = weights * c.mixed.middleRows(ci * n_reps, n_reps);
  }
  if (training && dropout > 0.0) {
    c.dropmask = dropout_mask(static_cast<int>(scatter.rows()), static_cast<int>(scatter.cols()),
                              dropout, *drop_rng);
    scatter.array() *= c.dropmask.array();
  } else {
    c.dropmask.resize(0, 0);
  }
  return x + scatter;
}

Matd CcmsaLayer::backward(const Matd& dy, const Matd& x, const Cache& cache) {
  const int n_clusters = static_cast<int>(cache.spans.size());
  const int dim = static_cast<int>(x.cols());

  Matd dscatter = dy;
  if (cache.dropmask.size() > 0) dscatter.array() *= cache.dropmask.array();

  Matd dmixed = Matd::Zero(n_clusters * n_reps, dim);
  Matd dlogits = Matd::Zero(x.rows(), n_reps);
  Matd dx = dy;  // residual path

  // Scatter backward: weights and mixed representatives.
  for (int ci = 0; ci < n_clusters; ++ci) {
    const auto [begin, end] = cache.spans[static_cast<std::size_t>(ci)];
    const int n_k = end - begin;
    const auto ds = dscatter.middleRows(begin, n_k);
    const auto mm_k = cache.mm.middleRows(begin, n_k);
    const auto mixed_k = cache.mixed.middleRows(ci * n_reps, n_reps);
    const auto combine = cache.combine.row(ci);

    const Matd weights = mm_k.array().rowwise() * combine.array();
    dmixed.middleRows(ci * n_reps, n_reps) += weights.transpose() * ds;
    const Matd dweights = ds * mixed_k.transpose();  // n_k x G

    const Matd dmm = dweights.array().rowwise() * combine.array();
    Vecd dcombine = (dweights.array() * mm_k.array()).colwise().sum().transpose();

    // combine = softmax(mean logits): backprop through softmax then the mean.
    const Vecd cw = combine.transpose();
    const double dot = dcombine.dot(cw);
    const Vecd dmean = cw.array() * (dcombine.array() - dot);
    for (int t = 0; t < n_k; ++t)
      dlogits.row(begin + t) += dmean.transpose() / static_cast<double>(n_k);

    // minmax backward; constant columns (all-ones) carry no gradient.
    for (int g = 0; g < n_reps; ++g) {
      const int imin = cache.argmin(ci, g);
      const int imax = cache.argmax(ci, g);
      if (imin < 0) continue;
      const auto s_col = cache.logits.col(g).segment(begin, n_k);
      const double range = s_col(imax) - s_col(imin);
      const double sum_d = dmm.col(g).sum();
      const double sum_dm = (dmm.col(g).array() * mm_k.col(g).array()).sum();
      dlogits.col(g).segment(begin, n_k) += dmm.col(g) / range;
      dlogits(begin + imin, g) += (sum_dm - sum_d) / range;
      dlogits(begin + imax, g) -= sum_dm / range;
    }
  }

  // Mix backward.
  Matd dreps = attn.backward(dmixed, cache.reps, cache.attn);

  // Pool backward.
  for (int ci = 0; ci < n_clusters; ++ci) {
    const auto [begin, end] = cache.spans[static_cast<std::size_t>(ci)];
    const int n_k = end - begin;
    const auto x_k = x.middleRows(begin, n_k);
    const Matd& a = cache.pool[static_cast<std::size_t>(ci)];
    const auto dr = dreps.middleRows(ci * n_reps, n_reps);

    dx.middleRows(begin, n_k) += a * dr;
    const Matd da = x_k * dr.transpose();  // n_k x G
    for (int g = 0; g < n_reps; ++g) {
      const double dot = da.col(g).dot(a.col(g));
      dlogits.col(g).segment(begin, n_k) +=
          (a.col(g).array() * (da.col(g).array() - dot)).matrix();
    }
  }

  phi.grad += x.transpose() * dlogits;
  dx += dlogits * phi.value.transpose();
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling

void AbmilPool::init(const std::string& prefix, int dim, int hidden, Rng& rng) {
  v.init_uniform(prefix + ".v", hidden, dim, dim, rng);
  w.init_uniform(prefix + ".w", hidden, 1, hidden, rng);
}

void AbmilPool::visit(const ParamVisitor& f) {
  f(v);
  f(w);
}

Vecd AbmilPool::forward(const Matd& x, Cache* cache) const {
  Matd u = (x * v.value.transpose()).array().tanh();  // T x hidden
  Vecd scores = u * w.value.col(0);
  Vecd attn = softmax_vec(scores);
  Vecd z = x.transpose() * attn;
  if (cache) {
    cache->u = std::move(u);
    cache->attn = std::move(attn);
  }
  return z;
}

Matd AbmilPool::backward(const Vecd& dz, const Matd& x, const Cache& cache) {
  const Vecd da = x * dz;  // T
  const double dot = da.dot(cache.attn);
  const Vecd ds = cache.attn.array() * (da.array() - dot);
  const Matd du = ds * w.value.col(0).transpose();             // T x hidden
  w.grad.col(0) += cache.u.transpose() * ds;
  const Matd dpre = du.array() * (1.0 - cache.u.array().square());
  v.grad += dpre.transpose() * x;
  return cache.attn * dz.transpose() + dpre * v.value;
}

Vecd mean_pool(const Matd& x) { return x.colwise().mean().transpose(); }

Matd mean_pool_backward(const Vecd& dz, int n_tokens) {
  Matd dx(n_tokens, dz.size());
  dx.rowwise() = dz.transpose() / static_cast<double>(n_tokens);
  return dx;
}

Vecd max_pool(const Matd& x, std::vector<int>* argmax) {
  const int d = static_cast<int>(x.cols());
  Vecd z(d);
  argmax->assign(static_cast<std::size_t>(d), 0);
  for (int j = 0; j < d; ++j) {
    int arg = 0;
    double hi = x(0, j);
    for (int t = 1; t < x.rows(); ++t)
      if (x(t, j) > hi) {
        hi = x(t, j);
        arg = t;
      }
    z(j) = hi;
    (*argmax)[static_cast<std::size_t>(j)] = arg;
  }
  return z;
}

Matd max_pool_backward(const Vecd& dz, int n_tokens, const std::vector<int>& argmax) {
  Matd dx = Matd::Zero(n_tokens, dz.size());
  for (int j = 0; j < dz.size(); ++j) dx(argmax[static_cast<std::size_t>(j)], j) = dz(j);
  return dx;
}

// ---------------------------------------------------------------------------
// Affine head

void Affine::init(const std::string& prefix, int in_dim, int out_dim, Rng& rng) {
  w.init_uniform(prefix + ".w", out_dim, in_dim, in_dim, rng);
  b.init_zero(prefix + ".b", out_dim, 1);
}

void Affine::visit(const ParamVisitor& f) {
  f(w);
  f(b);
}

Vecd Affine::forward(const Vecd& x) const { return w.value * x + b.value.col(0); }

Vecd Affine::backward(const Vecd& dy, const Vecd& x) {
  w.grad += dy * x.transpose();
  b.grad.col(0) += dy;
  return w.value.transpose() * dy;
}

}  // namespace fusemil
