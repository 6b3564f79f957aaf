#include "fusemil/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fusemil/keyval.hpp"
#include "fusemil/rng.hpp"

namespace fusemil {

namespace {

constexpr int kLatentDim = 8;
constexpr double kCenterScale = 2.0;
constexpr double kSurvivalBaseRate = 1.0 / 500.0;  // events on a "days" scale

Matd gaussian_matrix(Rng& rng, int rows, int cols, double scale) {
  Matd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.gaussian();
  return m;
}

std::string slide_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "slide%04d", i);
  return buf;
}

std::vector<std::string> default_gene_names(int n) {
  static const std::vector<std::string> panel = {"TP53", "EGFR",  "KRAS", "BRAF", "PIK3CA",
                                                 "IDH1", "FGFR3", "RB1",  "ATM",  "ERBB2"};
  if (n == static_cast<int>(panel.size())) return panel;
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "gene%02d", i);
    names.emplace_back(buf);
  }
  return names;
}

}  // namespace

SynthConfig synth_config_from_keyval(const KeyVal& kv) {
  kv.require_known_keys({"n_slides", "n_patches_per_slide", "n_latent_clusters", "view_dims",
                         "view_names", "teacher_dims", "teacher_names", "n_genes", "noise_sigma",
                         "teacher_noise_sigma", "label_signal_strength", "hazard_ratio",
                         "censor_fraction", "seed"});
  SynthConfig cfg;
  cfg.n_slides = kv.get_int("n_slides", cfg.n_slides);
  cfg.n_patches_per_slide = kv.get_int("n_patches_per_slide", cfg.n_patches_per_slide);
  cfg.n_latent_clusters = kv.get_int("n_latent_clusters", cfg.n_latent_clusters);
  cfg.view_dims = kv.get_int_list("view_dims", cfg.view_dims);
  cfg.view_names = kv.get_string_list("view_names", cfg.view_names);
  cfg.teacher_dims = kv.get_int_list("teacher_dims", cfg.teacher_dims);
  cfg.teacher_names = kv.get_string_list("teacher_names", cfg.teacher_names);
  cfg.n_genes = kv.get_int("n_genes", cfg.n_genes);
  cfg.noise_sigma = kv.get_double("noise_sigma", cfg.noise_sigma);
  cfg.teacher_noise_sigma = kv.get_double("teacher_noise_sigma", cfg.teacher_noise_sigma);
  cfg.label_signal_strength = kv.get_double("label_signal_strength", cfg.label_signal_strength);
  cfg.hazard_ratio = kv.get_double("hazard_ratio", cfg.hazard_ratio);
  cfg.censor_fraction = kv.get_double("censor_fraction", cfg.censor_fraction);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

SynthResult synth_cohort(const SynthConfig& cfg) {
  cfg.validate();
  const int n_views = static_cast<int>(cfg.view_dims.size());
  const int n_teachers = static_cast<int>(cfg.teacher_dims.size());
  const auto view_names = cfg.resolved_view_names();
  const auto teacher_names = cfg.resolved_teacher_names();

  Rng root(cfg.seed);

  // Cohort-level structure.
  Rng rng_struct = root.derive("structure");
  Matd centers = gaussian_matrix(rng_struct, cfg.n_latent_clusters, kLatentDim, kCenterScale);
  std::vector<Matd> view_maps;
  view_maps.reserve(static_cast<std::size_t>(n_views));
  for (int v = 0; v < n_views; ++v)
    view_maps.push_back(
        gaussian_matrix(rng_struct, cfg.view_dims[static_cast<std::size_t>(v)], kLatentDim,
                        1.0 / std::sqrt(double(kLatentDim))));
  std::vector<Matd> teacher_maps;
  std::vector<Vecd> teacher_offsets;
  for (int t = 0; t < n_teachers; ++t) {
    teacher_maps.push_back(
        gaussian_matrix(rng_struct, cfg.teacher_dims[static_cast<std::size_t>(t)], kLatentDim,
                        1.0 / std::sqrt(double(kLatentDim))));
    teacher_offsets.push_back(
        gaussian_matrix(rng_struct, cfg.teacher_dims[static_cast<std::size_t>(t)], 1, 0.1).col(0));
  }
  Matd expr_map = gaussian_matrix(rng_struct, cfg.n_genes, kLatentDim, 1.0 / std::sqrt(double(kLatentDim)));
  Vecd expr_offset = gaussian_matrix(rng_struct, cfg.n_genes, 1, 0.25).col(0).array() + 1.5;
  Vecd w = gaussian_matrix(rng_struct, kLatentDim, 1, 1.0).col(0);
  w.normalize();

  SynthResult out;
  out.latent.cluster_centers = centers;
  out.latent.label_functional = w;
  out.latent.patch_cluster.resize(static_cast<std::size_t>(cfg.n_slides));
  out.latent.slide_mean_latent.resize(static_cast<std::size_t>(cfg.n_slides));
  out.latent.slide_score.resize(static_cast<std::size_t>(cfg.n_slides));

  // Per-slide patch composition and view matrices.
  out.cohort.slides.resize(static_cast<std::size_t>(cfg.n_slides));
  out.cohort.teachers.resize(static_cast<std::size_t>(cfg.n_slides));
  out.cohort.records.resize(static_cast<std::size_t>(cfg.n_slides));
  for (int s = 0; s < cfg.n_slides; ++s) {
    Rng rng_slide = root.derive("slide").derive(static_cast<std::uint64_t>(s));
    const std::string id = slide_name(s);

    // Cluster mixture from normalized unit exponentials.
    Vecd mix(cfg.n_latent_clusters);
    for (int c = 0; c < cfg.n_latent_clusters; ++c)
      mix(c) = -std::log(1.0 - rng_slide.uniform());
    mix /= mix.sum();
    Vecd cum(cfg.n_latent_clusters);
    double acc = 0;
    for (int c = 0; c < cfg.n_latent_clusters; ++c) {
      acc += mix(c);
      cum(c) = acc;
    }

    auto& planted = out.latent.patch_cluster[static_cast<std::size_t>(s)];
    planted.resize(static_cast<std::size_t>(cfg.n_patches_per_slide));
    Vecd mean_latent = Vecd::Zero(kLatentDim);
    for (int p = 0; p < cfg.n_patches_per_slide; ++p) {
      const double u = rng_slide.uniform();
      int c = 0;
      while (c + 1 < cfg.n_latent_clusters && u > cum(c)) ++c;
      planted[static_cast<std::size_t>(p)] = c;
      mean_latent += centers.row(c).transpose();
    }
    mean_latent /= double(cfg.n_patches_per_slide);
    out.latent.slide_mean_latent[static_cast<std::size_t>(s)] = mean_latent;
    out.latent.slide_score[static_cast<std::size_t>(s)] = w.dot(mean_latent);

    MultiViewSet set;
    set.slide_id = id;
    for (int v = 0; v < n_views; ++v) {
      PatchView pv;
      pv.slide_id = id;
      pv.model_name = view_names[static_cast<std::size_t>(v)];
      pv.matrix.resize(cfg.n_patches_per_slide, cfg.view_dims[static_cast<std::size_t>(v)]);
      for (int p = 0; p < cfg.n_patches_per_slide; ++p) {
        const int c = planted[static_cast<std::size_t>(p)];
        Vecd row = view_maps[static_cast<std::size_t>(v)] * centers.row(c).transpose();
        for (int j = 0; j < pv.matrix.cols(); ++j)
          pv.matrix(p, j) = row(j) + cfg.noise_sigma * rng_slide.gaussian();
      }
      set.views.push_back(std::move(pv));
    }
    // Lexicographic view order is the concatenation contract.
    std::sort(set.views.begin(), set.views.end(),
              [](const PatchView& a, const PatchView& b) { return a.model_name < b.model_name; });
    out.cohort.slides[static_cast<std::size_t>(s)] = std::move(set);

    SlideTeacherSet ts;
    ts.slide_id = id;
    for (int t = 0; t < n_teachers; ++t) {
      Vecd vec = teacher_maps[static_cast<std::size_t>(t)] * mean_latent +
                 teacher_offsets[static_cast<std::size_t>(t)];
      for (int j = 0; j < vec.size(); ++j) vec(j) += cfg.teacher_noise_sigma * rng_slide.gaussian();
      ts.teachers.emplace_back(teacher_names[static_cast<std::size_t>(t)], std::move(vec));
    }
    std::sort(ts.teachers.begin(), ts.teachers.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    out.cohort.teachers[static_cast<std::size_t>(s)] = std::move(ts);
  }

  // The classification cut sits at the cohort median of the noiseless score.
  std::vector<double> sorted_scores = out.latent.slide_score;
  std::sort(sorted_scores.begin(), sorted_scores.end());
  const std::size_t half = sorted_scores.size() / 2;
  const double threshold = sorted_scores.size() % 2 == 1
                               ? sorted_scores[half]
                               : 0.5 * (sorted_scores[half - 1] + sorted_scores[half]);
  out.latent.label_threshold = threshold;

  double score_mean = 0, score_sq = 0;
  for (double v : out.latent.slide_score) {
    score_mean += v;
    score_sq += v * v;
  }
  score_mean /= double(cfg.n_slides);
  const double score_var = std::max(1e-12, score_sq / double(cfg.n_slides) - score_mean * score_mean);
  const double score_sd = std::sqrt(score_var);

  const auto gene_names = default_gene_names(cfg.n_genes);
  for (int s = 0; s < cfg.n_slides; ++s) {
    Rng rng_label = root.derive("labels").derive(static_cast<std::uint64_t>(s));
    CohortRecord rec;
    rec.slide_id = slide_name(s);
    const double score = out.latent.slide_score[static_cast<std::size_t>(s)];

    double noisy = score;
    if (cfg.label_signal_strength == 0.0) {
      noisy = rng_label.bernoulli(0.5) ? threshold + 1.0 : threshold - 1.0;
    } else if (std::isfinite(cfg.label_signal_strength)) {
      noisy += rng_label.gaussian() / cfg.label_signal_strength;
    }
    rec.binary_labels[synth_biomarker_name()] = noisy > threshold ? 1 : 0;

    Vecd expr = expr_map * out.latent.slide_mean_latent[static_cast<std::size_t>(s)] + expr_offset;
    rec.gene_names = gene_names;
    rec.expression = expr.cwiseMax(0.0);

    const double z = (score - score_mean) / score_sd;
    const double rate = kSurvivalBaseRate * std::exp(std::log(cfg.hazard_ratio) * z);
    const double t_event = -std::log(1.0 - rng_label.uniform()) / rate;
    if (rng_label.bernoulli(cfg.censor_fraction)) {
      rec.event_indicator = 0;
      rec.survival_time = t_event * rng_label.uniform();
    } else {
      rec.event_indicator = 1;
      rec.survival_time = t_event;
    }
    rec.validate();
    out.cohort.records[static_cast<std::size_t>(s)] = std::move(rec);
  }

  return out;
}

}  // namespace fusemil
