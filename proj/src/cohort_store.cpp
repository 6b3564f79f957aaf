#include "fusemil/cohort_store.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "fusemil/cohort_csv.hpp"
#include "fusemil/container.hpp"

namespace fusemil {

namespace fs = std::filesystem;

void write_registry_csv(const std::string& path, const ModelRegistry& registry) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << "kind,name,dim\n";
  for (const auto& [name, dim] : registry.view_dims) out << "view," << name << "," << dim << "\n";
  for (const auto& [name, dim] : registry.teacher_dims)
    out << "teacher," << name << "," << dim << "\n";
}

ModelRegistry read_registry_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open registry: " + path);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"kind", "name", "dim"})
    throw schema_error("registry must have header kind,name,dim: " + path);
  ModelRegistry reg;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) throw schema_error("registry rows need 3 fields: " + path);
    const int dim = std::stoi(cells[2]);
    if (cells[0] == "view")
      reg.view_dims[cells[1]] = dim;
    else if (cells[0] == "teacher")
      reg.teacher_dims[cells[1]] = dim;
    else
      throw schema_error("registry kind must be view or teacher: " + path);
  }
  if (reg.view_dims.empty()) throw schema_error("registry lists no views: " + path);
  return reg;
}

ModelRegistry registry_from_synth(const SynthConfig& cfg) {
  ModelRegistry reg;
  const auto vnames = cfg.resolved_view_names();
  for (std::size_t i = 0; i < vnames.size(); ++i) reg.view_dims[vnames[i]] = cfg.view_dims[i];
  const auto tnames = cfg.resolved_teacher_names();
  for (std::size_t i = 0; i < tnames.size(); ++i) reg.teacher_dims[tnames[i]] = cfg.teacher_dims[i];
  return reg;
}

void save_cohort(const std::string& dir, const Cohort& cohort, const ModelRegistry& registry) {
  fs::create_directories(fs::path(dir) / "views");
  fs::create_directories(fs::path(dir) / "teachers");
  write_registry_csv((fs::path(dir) / "registry.csv").string(), registry);
  write_labels_csv((fs::path(dir) / "labels.csv").string(), cohort.records);
  for (const auto& set : cohort.slides)
    for (const auto& view : set.views)
      write_view((fs::path(dir) / "views" / (set.slide_id + "__" + view.model_name + ".fcpe")).string(),
                 view);
  for (const auto& ts : cohort.teachers)
    for (const auto& [name, vec] : ts.teachers)
      write_teacher_vector(
          (fs::path(dir) / "teachers" / (ts.slide_id + "__" + name + ".fcpe")).string(), name, vec);
}

namespace {

// "<slide>__<model>.fcpe" -> (slide, model)
std::pair<std::string, std::string> parse_store_name(const fs::path& p) {
  const std::string stem = p.stem().string();
  const auto pos = stem.rfind("__");
  if (pos == std::string::npos)
    throw schema_error("embedding file name must be <slide>__<model>.fcpe: " + p.string());
  return {stem.substr(0, pos), stem.substr(pos + 2)};
}

}  // namespace

LoadedCohort load_cohort(const std::string& dir, int n_threads) {
  LoadedCohort out;
  out.registry = read_registry_csv((fs::path(dir) / "registry.csv").string());
  out.cohort.records = read_labels_csv((fs::path(dir) / "labels.csv").string());

  std::vector<fs::path> view_files;
  for (const auto& entry : fs::directory_iterator(fs::path(dir) / "views"))
    if (entry.path().extension() == ".fcpe") view_files.push_back(entry.path());
  std::sort(view_files.begin(), view_files.end());

  // Group files per slide; lexicographic file order fixes the view order.
  std::map<std::string, std::vector<fs::path>> by_slide;
  for (const auto& p : view_files) by_slide[parse_store_name(p).first].push_back(p);

  std::vector<std::string> slide_ids;
  slide_ids.reserve(by_slide.size());
  for (const auto& [id, files] : by_slide) {
    (void)files;
    slide_ids.push_back(id);
  }
  out.cohort.slides.resize(slide_ids.size());
  parallel_for(static_cast<int>(slide_ids.size()), n_threads, [&](int i) {
    const auto& id = slide_ids[static_cast<std::size_t>(i)];
    MultiViewSet set;
    set.slide_id = id;
    for (const auto& p : by_slide.at(id))
      set.views.push_back(load_view(p.string(), out.registry, id));
    set.validate();
    out.cohort.slides[static_cast<std::size_t>(i)] = std::move(set);
  });

  const fs::path tdir = fs::path(dir) / "teachers";
  if (fs::exists(tdir)) {
    std::vector<fs::path> teacher_files;
    for (const auto& entry : fs::directory_iterator(tdir))
      if (entry.path().extension() == ".fcpe") teacher_files.push_back(entry.path());
    std::sort(teacher_files.begin(), teacher_files.end());
    std::map<std::string, SlideTeacherSet> tmap;
    for (const auto& p : teacher_files) {
      const auto [slide, model] = parse_store_name(p);
      std::string name;
      Vecd vec = load_teacher_vector(p.string(), out.registry, &name);
      if (name != model)
        throw schema_error("teacher file name does not match container model name: " + p.string());
      auto& ts = tmap[slide];
      ts.slide_id = slide;
      ts.teachers.emplace_back(name, std::move(vec));
    }
    out.cohort.teachers.reserve(tmap.size());
    for (auto& [id, ts] : tmap) {
      (void)id;
      out.cohort.teachers.push_back(std::move(ts));
    }
  }

  // Every labeled slide needs views; extra view files without labels are data errors.
  for (const auto& rec : out.cohort.records) out.cohort.slide(rec.slide_id);
  if (out.cohort.slides.size() != out.cohort.records.size())
    throw data_error("cohort store: view files and labels list different slide sets");
  return out;
}

}  // namespace fusemil
