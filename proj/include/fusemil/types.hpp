#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fusemil/common.hpp"

namespace fusemil {

/// One embedding model's patch matrix for one slide: row i is patch i.
struct PatchView {
  std::string slide_id;
  std::string model_name;
  Matd matrix;  // n_patches x dim

  int n_patches() const { return static_cast<int>(matrix.rows()); }
  int dim() const { return static_cast<int>(matrix.cols()); }
};

/// All views of one slide. Views share the patch axis: row i of every view
/// describes the same patch. View order is fixed for a run (lexicographic by
/// model name unless a config overrides it) and defines concatenation order.
struct MultiViewSet {
  std::string slide_id;
  std::vector<PatchView> views;

  int n_patches() const { return views.empty() ? 0 : views.front().n_patches(); }
  int n_views() const { return static_cast<int>(views.size()); }
  int total_dim() const {
    int d = 0;
    for (const auto& v : views) d += v.dim();
    return d;
  }
  void validate() const;
};

/// Per-slide vectors from each slide-level embedding model.
struct SlideTeacherSet {
  std::string slide_id;
  std::vector<std::pair<std::string, Vecd>> teachers;  // (name, vector)

  const Vecd* find(const std::string& name) const {
    for (const auto& [n, v] : teachers)
      if (n == name) return &v;
    return nullptr;
  }
};

/// Task labels + fold id for one slide.
struct CohortRecord {
  std::string slide_id;
  std::map<std::string, int> binary_labels;  // biomarker name -> {0,1}
  std::vector<std::string> gene_names;       // parallel to expression
  std::optional<Vecd> expression;            // log2(TPM+1) units, >= 0
  std::optional<double> survival_time;       // days, >= 0
  std::optional<int> event_indicator;        // 1 = event observed, 0 = censored
  int fold_id = -1;

  void validate() const;
};

/// Registry mapping model name -> expected embedding dimension, used to
/// validate loaded containers. Separate maps for patch views and teachers.
struct ModelRegistry {
  std::map<std::string, int> view_dims;
  std::map<std::string, int> teacher_dims;

  static ModelRegistry defaults();
};

/// Synthetic cohort generator settings. Parsed from a key=value config file
/// (see keyval.hpp); every field has a default so a minimal file works.
struct SynthConfig {
  int n_slides = 40;
  int n_patches_per_slide = 200;
  int n_latent_clusters = 4;
  std::vector<int> view_dims = {768, 2560, 1536};
  std::vector<std::string> view_names;  // defaults derived from dims, see synth.cpp
  std::vector<int> teacher_dims = {768, 768, 1280};
  std::vector<std::string> teacher_names;
  int n_genes = 10;
  double noise_sigma = 0.5;
  double teacher_noise_sigma = 0.1;
  double label_signal_strength = 4.0;  // label noise scales as 1/strength; +inf = exact labels
  double hazard_ratio = 5.0;           // hazard multiplier per 1 sd of the latent risk score
  double censor_fraction = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<std::string> resolved_view_names() const;
  std::vector<std::string> resolved_teacher_names() const;
};

/// Full in-memory cohort.
struct Cohort {
  std::vector<MultiViewSet> slides;
  std::vector<SlideTeacherSet> teachers;
  std::vector<CohortRecord> records;

  int n_slides() const { return static_cast<int>(slides.size()); }
  const MultiViewSet& slide(const std::string& id) const;
  const SlideTeacherSet& teacher_set(const std::string& id) const;
  const CohortRecord& record(const std::string& id) const;
};

}  // namespace fusemil
