#include "fusemil/types.hpp"

#include <algorithm>
#include <cmath>

namespace fusemil {

void MultiViewSet::validate() const {
  if (views.empty()) throw data_error("multi-view set '" + slide_id + "' has no views");
  const int n = views.front().n_patches();
  for (const auto& v : views) {
    if (v.slide_id != slide_id)
      throw data_error("view '" + v.model_name + "' belongs to slide '" + v.slide_id +
                       "', expected '" + slide_id + "'");
    if (v.n_patches() != n)
      throw data_error("views of slide '" + slide_id + "' disagree on patch count");
    if (!all_finite(v.matrix))
      throw data_error("view '" + v.model_name + "' of slide '" + slide_id +
                       "' contains non-finite values");
  }
}

void CohortRecord::validate() const {
  if (survival_time.has_value() != event_indicator.has_value())
    throw data_error("record '" + slide_id + "': survival time and event indicator must be given together");
  if (survival_time && (*survival_time < 0 || !std::isfinite(*survival_time)))
    throw data_error("record '" + slide_id + "': survival time must be a finite nonnegative value");
  if (event_indicator && *event_indicator != 0 && *event_indicator != 1)
    throw data_error("record '" + slide_id + "': event indicator must be 0 or 1");
  for (const auto& [name, v] : binary_labels)
    if (v != 0 && v != 1)
      throw data_error("record '" + slide_id + "': label '" + name + "' must be 0 or 1");
  if (expression) {
    if (!expression->allFinite() || (expression->array() < 0.0).any())
      throw data_error("record '" + slide_id + "': expression values must be finite and >= 0");
    if (static_cast<int>(gene_names.size()) != expression->size())
      throw data_error("record '" + slide_id + "': gene name count does not match expression length");
  }
}

ModelRegistry ModelRegistry::defaults() {
  ModelRegistry r;
  r.view_dims = {{"conch", 768}, {"virchow2", 2560}, {"gigapath", 1536}};
  r.teacher_dims = {{"gigapath_se", 768}, {"titan", 768}, {"prism", 1280}};
  return r;
}

void SynthConfig::validate() const {
  if (n_slides < 1 || n_patches_per_slide < 1 || n_latent_clusters < 1 || n_genes < 1)
    throw config_error("synth config: all counts must be >= 1");
  if (view_dims.empty()) throw config_error("synth config: view_dims must be nonempty");
  for (int d : view_dims)
    if (d < 1) throw config_error("synth config: view dims must be >= 1");
  for (int d : teacher_dims)
    if (d < 1) throw config_error("synth config: teacher dims must be >= 1");
  if (noise_sigma < 0 || teacher_noise_sigma < 0)
    throw config_error("synth config: noise sigma must be >= 0");
  if (label_signal_strength < 0) throw config_error("synth config: label_signal_strength must be >= 0");
  if (hazard_ratio <= 0) throw config_error("synth config: hazard_ratio must be > 0");
  if (censor_fraction < 0 || censor_fraction >= 1)
    throw config_error("synth config: censor_fraction must be in [0, 1)");
  if (!view_names.empty() && view_names.size() != view_dims.size())
    throw config_error("synth config: view_names must match view_dims in length");
  if (!teacher_names.empty() && teacher_names.size() != teacher_dims.size())
    throw config_error("synth config: teacher_names must match teacher_dims in length");
}

namespace {

std::vector<std::string> default_names(const std::vector<int>& dims,
                                       const std::vector<std::string>& canonical,
                                       const std::vector<int>& canonical_dims,
                                       const char* prefix) {
  if (dims == canonical_dims) return canonical;
  std::vector<std::string> names;
  names.reserve(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i)
    names.push_back(std::string(prefix) + (i < 10 ? "0" : "") + std::to_string(i));
  return names;
}

}  // namespace

std::vector<std::string> SynthConfig::resolved_view_names() const {
  if (!view_names.empty()) return view_names;
  return default_names(view_dims, {"conch", "virchow2", "gigapath"}, {768, 2560, 1536}, "view");
}

std::vector<std::string> SynthConfig::resolved_teacher_names() const {
  if (!teacher_names.empty()) return teacher_names;
  return default_names(teacher_dims, {"gigapath_se", "titan", "prism"}, {768, 768, 1280}, "teacher");
}

namespace {
template <class T>
const T& find_by_id(const std::vector<T>& v, const std::string& id, const char* what) {
  for (const auto& x : v)
    if (x.slide_id == id) return x;
  throw data_error(std::string("no ") + what + " for slide '" + id + "'");
}
}  // namespace

const MultiViewSet& Cohort::slide(const std::string& id) const {
  return find_by_id(slides, id, "views");
}
const SlideTeacherSet& Cohort::teacher_set(const std::string& id) const {
  return find_by_id(teachers, id, "teacher vectors");
}
const CohortRecord& Cohort::record(const std::string& id) const {
  return find_by_id(records, id, "labels");
}

}  // namespace fusemil
