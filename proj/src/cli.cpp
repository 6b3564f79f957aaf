#include "fusemil/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "fusemil/cohort_csv.hpp"
#include "fusemil/cohort_store.hpp"
#include "fusemil/checkpoint.hpp"
#include "fusemil/cluster_quality.hpp"
#include "fusemil/hash.hpp"
#include "fusemil/losses.hpp"
#include "fusemil/manifest.hpp"
#include "fusemil/metrics.hpp"
#include "fusemil/report.hpp"
#include "fusemil/synth.hpp"
#include "fusemil/train.hpp"

namespace fusemil::cli {

namespace fs = std::filesystem;

namespace {

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("FCP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

std::string join_args(int argc, const char* const* argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += " ";
    s += argv[i];
  }
  return s;
}

void hash_cohort_inputs(const std::string& cohort_dir, std::map<std::string, std::string>& out) {
  for (const char* name : {"labels.csv", "registry.csv"}) {
    const fs::path p = fs::path(cohort_dir) / name;
    if (fs::exists(p)) out[p.string()] = sha1_file(p.string());
  }
  for (const char* sub : {"views", "teachers"}) {
    const fs::path dir = fs::path(cohort_dir) / sub;
    if (!fs::exists(dir)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out[f.string()] = sha1_file(f.string());
  }
}

struct CommonFlags {
  std::string out_dir;
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_out = true) {
  auto* out = cmd->add_option("--out", flags.out_dir, "output directory");
  if (needs_out) out->required();
  cmd->add_option("--config", flags.config_path, "key = value config file");
  cmd->add_option("--seed", flags.seed, "seed override")->each([&flags](const std::string&) {
    flags.seed_set = true;
  });
  cmd->add_flag("--force", flags.force, "allow writing into a non-empty output directory");
  cmd->add_option("--threads", flags.threads,
                  "worker threads for per-slide stages (env FCP_THREADS)");
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const CommonFlags& flags) {
  RunManifest manifest;
  manifest.started_at = iso_timestamp_now();

  SynthConfig cfg;
  if (!flags.config_path.empty()) {
    cfg = synth_config_from_keyval(KeyVal::parse_file(flags.config_path));
    manifest.input_hashes[flags.config_path] = sha1_file(flags.config_path);
  }
  if (flags.seed_set) cfg.seed = flags.seed;
  cfg.validate();

  prepare_output_dir(flags.out_dir, flags.force);
  DirLock lock(flags.out_dir);

  const SynthResult result = synth_cohort(cfg);
  save_cohort(flags.out_dir, result.cohort, registry_from_synth(cfg));

  manifest.command = "synth";
  manifest.config_path = flags.config_path;
  manifest.seed = cfg.seed;
  manifest.output_dir = flags.out_dir;
  manifest.finished_at = iso_timestamp_now();
  manifest.write(flags.out_dir);
  std::cout << "wrote cohort with " << result.cohort.n_slides() << " slides to " << flags.out_dir
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// cluster

int cmd_cluster(const CommonFlags& flags, const std::string& cohort_dir, int k, bool sweep,
                bool compare_single) {
  RunManifest manifest;
  manifest.started_at = iso_timestamp_now();
  const int threads = resolve_threads(flags.threads);
  const std::uint64_t seed = flags.seed_set ? flags.seed : 1;

  const LoadedCohort loaded = load_cohort(cohort_dir, threads);
  const auto& slides = loaded.cohort.slides;

  prepare_output_dir(flags.out_dir, flags.force);
  DirLock lock(flags.out_dir);
  fs::create_directories(fs::path(flags.out_dir) / "assignments");
  fs::create_directories(fs::path(flags.out_dir) / "scatter");

  auto cluster_all = [&](int k_value) {
    std::vector<ClusterAssignment> assignments(slides.size());
    std::vector<Matd> embeddings(slides.size());
    parallel_for(static_cast<int>(slides.size()), threads, [&](int i) {
      assignments[static_cast<std::size_t>(i)] = multiview_spectral_cluster(
          slides[static_cast<std::size_t>(i)], k_value, seed, {}, &embeddings[static_cast<std::size_t>(i)]);
    });
    return std::make_pair(std::move(assignments), std::move(embeddings));
  };

  // Default-k pass with full exports.
  auto [assignments, embeddings] = cluster_all(k);
  for (std::size_t i = 0; i < slides.size(); ++i) {
    write_assignment_csv(
        (fs::path(flags.out_dir) / "assignments" / (slides[i].slide_id + ".csv")).string(),
        assignments[i]);
    if (embeddings[i].cols() >= 2)
      write_scatter_svg(
          (fs::path(flags.out_dir) / "scatter" / (slides[i].slide_id + ".svg")).string(),
          embeddings[i].rightCols(2), assignments[i].labels);
  }
  write_quality_csv((fs::path(flags.out_dir) / "quality.csv").string(), assignments);

  auto mean_quality = [](const std::vector<ClusterAssignment>& list) {
    double sc = 0.0, ch = 0.0;
    for (const auto& a : list) {
      sc += a.quality.sc;
      ch += a.quality.ch;
    }
    return std::make_pair(sc / static_cast<double>(list.size()),
                          ch / static_cast<double>(list.size()));
  };

  if (sweep) {
    std::vector<std::vector<std::string>> rows;
    for (int kv : {30, 40, 50, 60, 70}) {
      const auto [swept, emb] = cluster_all(kv);
      (void)emb;
      const auto [sc, ch] = mean_quality(swept);
      rows.push_back({std::to_string(kv), csv_num(sc), csv_num(ch)});
    }
    write_csv((fs::path(flags.out_dir) / "cluster_count_sweep.csv").string(), {"k", "sc", "ch"},
              rows);
  }

  if (compare_single) {
    std::vector<std::vector<std::string>> rows;
    const auto [multi_sc, multi_ch] = mean_quality(assignments);
    rows.push_back({"multiview", csv_num(multi_sc), csv_num(multi_ch)});
    for (std::size_t v = 0; v < slides.front().views.size(); ++v) {
      std::vector<ClusterAssignment> single(slides.size());
      parallel_for(static_cast<int>(slides.size()), threads, [&](int i) {
        const auto& set = slides[static_cast<std::size_t>(i)];
        auto labels = spectral_cluster_view(set.views[v].matrix, k, seed, {});
        auto a = ClusterAssignment::from_labels(set.slide_id, std::move(labels), k);
        const Matd features = concat_view_features(set);
        a.quality.sc = silhouette(features, a.labels);
        a.quality.ch = calinski_harabasz(features, a.labels);
        single[static_cast<std::size_t>(i)] = std::move(a);
      });
      const auto [sc, ch] = mean_quality(single);
      rows.push_back({"view:" + slides.front().views[v].model_name, csv_num(sc), csv_num(ch)});
    }
    write_csv((fs::path(flags.out_dir) / "method_comparison.csv").string(),
              {"method", "sc", "ch"}, rows);
  }

  manifest.command = "cluster";
  manifest.seed = seed;
  manifest.output_dir = flags.out_dir;
  hash_cohort_inputs(cohort_dir, manifest.input_hashes);
  manifest.finished_at = iso_timestamp_now();
  manifest.write(flags.out_dir);
  std::cout << "clustered " << slides.size() << " slides (k=" << k << ") into " << flags.out_dir
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const CommonFlags& flags, const std::string& cohort_dir, const std::string& task,
              const std::string& label, const std::string& teachers, int npatches,
              bool sweep_teachers, bool sweep_npatches, const std::string& pool) {
  RunManifest manifest;
  manifest.started_at = iso_timestamp_now();
  const int threads = resolve_threads(flags.threads);

  TrainConfig cfg;
  if (!flags.config_path.empty()) {
    cfg = TrainConfig::from_keyval(KeyVal::parse_file(flags.config_path));
    manifest.input_hashes[flags.config_path] = sha1_file(flags.config_path);
  }
  if (!task.empty()) cfg.task = task_from_string(task);
  if (!label.empty()) cfg.label_name = label;
  if (!pool.empty()) cfg.pool = pool_kind_from_string(pool);
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!teachers.empty()) {
    if (teachers == "none")
      cfg.teachers = std::vector<std::string>{};
    else {
      std::vector<std::string> list;
      std::string cur;
      for (char c : teachers + ",") {
        if (c == ',') {
          if (!cur.empty()) list.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      cfg.teachers = list;
    }
  }
  if (npatches > 0) {
    if (npatches % cfg.n_clusters != 0)
      throw config_error("--npatches must be a multiple of n_clusters");
    cfg.per_cluster = npatches / cfg.n_clusters;
  }
  cfg.validate();

  const LoadedCohort loaded = load_cohort(cohort_dir, threads);

  prepare_output_dir(flags.out_dir, flags.force);
  DirLock lock(flags.out_dir);

  if (sweep_teachers) {
    const auto all = resolve_teachers({}, loaded.registry);
    std::vector<std::vector<std::string>> rows;
    for (int n = 0; n <= static_cast<int>(all.size()); ++n) {
      TrainConfig sub = cfg;
      sub.teachers = std::vector<std::string>(all.begin(), all.begin() + n);
      const auto art = cross_validate(loaded.cohort, loaded.registry, sub,
                                      (fs::path(flags.out_dir) / ("teachers" + std::to_string(n))).string(),
                                      threads);
      rows.push_back({std::to_string(n), art.metric_name, csv_num(art.metric_mean),
                      csv_num(art.metric_std)});
      std::cout << "teachers=" << n << " " << art.metric_name << " = " << art.metric_mean
                << " +- " << art.metric_std << "\n";
    }
    write_csv((fs::path(flags.out_dir) / "teacher_count_sweep.csv").string(),
              {"n_teachers", "metric", "mean", "std"}, rows);
  } else if (sweep_npatches) {
    std::vector<std::vector<std::string>> rows;
    for (int n : {300, 400, 500, 600, 700}) {
      if (n % cfg.n_clusters != 0)
        throw config_error("patch-count sweep requires n_clusters to divide " + std::to_string(n));
      TrainConfig sub = cfg;
      sub.per_cluster = n / cfg.n_clusters;
      const auto art = cross_validate(loaded.cohort, loaded.registry, sub,
                                      (fs::path(flags.out_dir) / ("npatches" + std::to_string(n))).string(),
                                      threads);
      rows.push_back({std::to_string(n), art.metric_name, csv_num(art.metric_mean),
                      csv_num(art.metric_std)});
      std::cout << "npatches=" << n << " " << art.metric_name << " = " << art.metric_mean
                << " +- " << art.metric_std << "\n";
    }
    write_csv((fs::path(flags.out_dir) / "patch_count_sweep.csv").string(),
              {"n_patches", "metric", "mean", "std"}, rows);
  } else {
    const auto art = cross_validate(loaded.cohort, loaded.registry, cfg, flags.out_dir, threads);
    std::cout << art.metric_name << " = " << art.metric_mean << " +- " << art.metric_std << "\n";
  }

  manifest.command = "train";
  manifest.config_path = flags.config_path;
  manifest.seed = cfg.seed;
  manifest.output_dir = flags.out_dir;
  hash_cohort_inputs(cohort_dir, manifest.input_hashes);
  manifest.finished_at = iso_timestamp_now();
  manifest.write(flags.out_dir);
  return 0;
}

// ---------------------------------------------------------------------------
// eval / report helpers

struct Predictions {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw data_error("predictions file lacks column '" + name + "'");
  }
};

Predictions read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("missing predictions file: " + path);
  Predictions p;
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty predictions file: " + path);
  p.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    p.rows.push_back(split_csv_line(line));
  }
  return p;
}

int cmd_eval(const CommonFlags& flags, const std::string& run_dir, const std::string& cohort_dir) {
  RunManifest manifest;
  manifest.started_at = iso_timestamp_now();
  const int threads = resolve_threads(flags.threads);

  const std::string out_dir =
      flags.out_dir.empty() ? (fs::path(run_dir) / "eval").string() : flags.out_dir;
  const TrainConfig cfg =
      TrainConfig::from_keyval(KeyVal::parse_file((fs::path(run_dir) / "config.snapshot.txt").string()));
  const LoadedCohort loaded = load_cohort(cohort_dir, threads);
  const Predictions preds = read_predictions((fs::path(run_dir) / "predictions.csv").string());

  prepare_output_dir(out_dir, flags.force);
  DirLock lock(out_dir);

  std::vector<std::vector<std::string>> metric_rows;
  const int col_fold = preds.column("fold");
  std::set<int> folds;
  for (const auto& row : preds.rows) folds.insert(std::stoi(row[static_cast<std::size_t>(col_fold)]));

  if (cfg.task == TaskKind::biomarker) {
    const int col_score = preds.column("score");
    std::vector<double> fold_auroc;
    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;
    for (int f : folds) {
      std::vector<double> scores;
      std::vector<int> labels;
      for (const auto& row : preds.rows) {
        if (std::stoi(row[static_cast<std::size_t>(col_fold)]) != f) continue;
        scores.push_back(std::stod(row[static_cast<std::size_t>(col_score)]));
        labels.push_back(loaded.cohort.record(row[0]).binary_labels.at(cfg.label_name));
      }
      fold_auroc.push_back(auroc(scores, labels));
      pooled_scores.insert(pooled_scores.end(), scores.begin(), scores.end());
      pooled_labels.insert(pooled_labels.end(), labels.begin(), labels.end());
      metric_rows.push_back({"auroc", "fold" + std::to_string(f), csv_num(fold_auroc.back())});
    }
    double mean = 0.0;
    for (double v : fold_auroc) mean += v;
    mean /= static_cast<double>(fold_auroc.size());
    double var = 0.0;
    for (double v : fold_auroc) var += (v - mean) * (v - mean);
    metric_rows.push_back({"auroc", "mean", csv_num(mean)});
    metric_rows.push_back(
        {"auroc", "std", csv_num(std::sqrt(var / static_cast<double>(fold_auroc.size())))});
    metric_rows.push_back({"auroc", "pooled", csv_num(auroc(pooled_scores, pooled_labels))});
  } else if (cfg.task == TaskKind::expression) {
    std::vector<std::string> genes;
    for (const auto& h : preds.header)
      if (h.rfind("pred:", 0) == 0) genes.push_back(h.substr(5));
    std::vector<Vecd> predictions, truths;
    for (const auto& row : preds.rows) {
      const auto& rec = loaded.cohort.record(row[0]);
      Vecd p(static_cast<int>(genes.size()));
      for (std::size_t g = 0; g < genes.size(); ++g)
        p(static_cast<int>(g)) =
            std::stod(row[static_cast<std::size_t>(preds.column("pred:" + genes[g]))]);
      predictions.push_back(p);
      truths.push_back(*rec.expression);
    }
    metric_rows.push_back({"mse_standard", "pooled", csv_num(mse_standard(predictions, truths))});
    metric_rows.push_back({"mse_sqrt_form", "pooled", csv_num(mse_paper(predictions, truths))});

    // Per-gene means: the radar-chart data table.
    std::vector<std::vector<std::string>> radar_rows;
    for (std::size_t g = 0; g < genes.size(); ++g) {
      double gt = 0.0, pr = 0.0;
      for (std::size_t i = 0; i < predictions.size(); ++i) {
        gt += truths[i](static_cast<int>(g));
        pr += predictions[i](static_cast<int>(g));
      }
      radar_rows.push_back({genes[g], csv_num(gt / static_cast<double>(truths.size())),
                            csv_num(pr / static_cast<double>(predictions.size()))});
    }
    write_csv((fs::path(out_dir) / "radar.csv").string(), {"gene", "ground_truth", "prediction"},
              radar_rows);
  } else {
    const int col_risk = preds.column("risk");
    std::vector<SurvivalSample> pooled;
    std::vector<double> risks;
    for (const auto& row : preds.rows) {
      const auto& rec = loaded.cohort.record(row[0]);
      const double risk = std::stod(row[static_cast<std::size_t>(col_risk)]);
      pooled.push_back({*rec.survival_time, *rec.event_indicator, risk});
      risks.push_back(risk);
    }
    for (int f : folds) {
      std::vector<SurvivalSample> fold_samples;
      for (std::size_t i = 0; i < preds.rows.size(); ++i)
        if (std::stoi(preds.rows[i][static_cast<std::size_t>(col_fold)]) == f)
          fold_samples.push_back(pooled[i]);
      metric_rows.push_back({"c_index", "fold" + std::to_string(f), csv_num(c_index(fold_samples))});
    }
    metric_rows.push_back({"c_index", "pooled", csv_num(c_index(pooled))});

    const auto groups = median_risk_split(risks);
    std::vector<SurvivalSample> low, high;
    std::vector<double> low_t, high_t;
    std::vector<int> low_e, high_e;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      if (groups[i] == 1) {
        high.push_back(pooled[i]);
        high_t.push_back(pooled[i].time);
        high_e.push_back(pooled[i].event);
      } else {
        low.push_back(pooled[i]);
        low_t.push_back(pooled[i].time);
        low_e.push_back(pooled[i].event);
      }
    }
    const auto [chi2, p] = logrank_test(low, high);
    metric_rows.push_back({"logrank_chi2", "pooled", csv_num(chi2)});
    metric_rows.push_back({"logrank_p", "pooled", csv_num(p)});
    write_km_csv((fs::path(out_dir) / "km.csv").string(), km_curve(low_t, low_e),
                 km_curve(high_t, high_e));
  }
  write_csv((fs::path(out_dir) / "metrics.csv").string(), {"metric", "scope", "value"},
            metric_rows);

  // Attention exports from the per-fold best checkpoints.
  if (cfg.pool == PoolKind::attention) {
    fs::create_directories(fs::path(out_dir) / "attention");
    const auto teacher_names = resolve_teachers(cfg, loaded.registry);
    std::vector<int> teacher_dims;
    for (const auto& n : teacher_names) teacher_dims.push_back(loaded.registry.teacher_dims.at(n));
    const int n_genes = loaded.cohort.records.front().expression
                            ? static_cast<int>(loaded.cohort.records.front().expression->size())
                            : 0;
    const ModelConfig mc = make_model_config(cfg, loaded.cohort.slides.front().total_dim(),
                                             teacher_dims, n_genes);
    for (int f : folds) {
      StudentModel model = StudentModel::create(mc, cfg.seed);
      load_checkpoint((fs::path(run_dir) / "folds" / ("fold" + std::to_string(f) + ".fcpr")).string(),
                      model);
      for (const auto& row : preds.rows) {
        if (std::stoi(row[static_cast<std::size_t>(col_fold)]) != f) continue;
        const auto& views = loaded.cohort.slide(row[0]);
        const EvalPrep prep = prepare_eval_prep(views, cfg);
        const auto fwd = model.forward(prep.tokens, {}, false, nullptr);
        write_attention_csv((fs::path(out_dir) / "attention" / (row[0] + ".csv")).string(),
                            prep.selection.indices, fwd.mil_cache.attn);
      }
    }
  }

  manifest.command = "eval";
  manifest.output_dir = out_dir;
  manifest.seed = cfg.seed;
  hash_cohort_inputs(cohort_dir, manifest.input_hashes);
  manifest.finished_at = iso_timestamp_now();
  manifest.write(out_dir);
  std::cout << "metrics written to " << out_dir << "\n";
  return 0;
}

int cmd_report(const CommonFlags& flags, const std::string& run_dir) {
  RunManifest manifest;
  manifest.started_at = iso_timestamp_now();
  const std::string eval_dir = (fs::path(run_dir) / "eval").string();
  const std::string out_dir =
      flags.out_dir.empty() ? (fs::path(run_dir) / "report").string() : flags.out_dir;
  if (!fs::exists(fs::path(eval_dir) / "metrics.csv"))
    throw data_error("run has no eval outputs; run `fusemil eval` first: " + eval_dir);

  prepare_output_dir(out_dir, flags.force);
  DirLock lock(out_dir);

  // Echo metrics and render any survival curves found.
  std::ifstream metrics(fs::path(eval_dir) / "metrics.csv");
  std::string line;
  double logrank_p = std::numeric_limits<double>::quiet_NaN();
  std::getline(metrics, line);
  std::cout << "metric,scope,value\n";
  while (std::getline(metrics, line)) {
    if (line.empty()) continue;
    std::cout << line << "\n";
    const auto cells = split_csv_line(line);
    if (cells.size() == 3 && cells[0] == "logrank_p") logrank_p = std::stod(cells[2]);
  }

  const fs::path km_path = fs::path(eval_dir) / "km.csv";
  if (fs::exists(km_path)) {
    std::ifstream km(km_path);
    std::getline(km, line);  // header
    KMCurve low, high;
    while (std::getline(km, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != 4) throw data_error("malformed km.csv row: " + line);
      KMCurve& c = cells[3] == "high" ? high : low;
      const double t = std::stod(cells[0]);
      if (t == 0.0 && std::stod(cells[1]) == 1.0) continue;  // leading anchor row
      c.times.push_back(t);
      c.survival.push_back(std::stod(cells[1]));
      c.at_risk.push_back(std::stoi(cells[2]));
    }
    write_km_svg((fs::path(out_dir) / "km.svg").string(), low, high, logrank_p);
  }

  manifest.command = "report";
  manifest.output_dir = out_dir;
  manifest.finished_at = iso_timestamp_now();
  manifest.write(out_dir);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"multi-view embedding fusion pipeline: clustering, re-embedding, "
               "attention pooling, multi-teacher distillation"};
  app.require_subcommand(1);

  CommonFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort on disk");
  add_common(synth, synth_flags);

  CommonFlags cluster_flags;
  std::string cluster_cohort;
  int cluster_k = 50;
  bool cluster_sweep = false, cluster_compare = false;
  auto* cluster = app.add_subcommand("cluster", "cluster each slide's patches across views");
  add_common(cluster, cluster_flags);
  cluster->add_option("--cohort", cluster_cohort, "cohort directory")->required();
  cluster->add_option("--k", cluster_k, "cluster count (default 50)");
  cluster->add_flag("--sweep", cluster_sweep, "evaluate k in {30,40,50,60,70}");
  cluster->add_flag("--compare-single", cluster_compare,
                    "compare against single-view spectral clustering");

  CommonFlags train_flags;
  std::string train_cohort, train_task, train_label, train_teachers, train_pool;
  int train_npatches = 0;
  bool train_sweep_teachers = false, train_sweep_npatches = false;
  auto* train = app.add_subcommand("train", "cross-validated training with distillation");
  add_common(train, train_flags);
  train->add_option("--cohort", train_cohort, "cohort directory")->required();
  train->add_option("--task", train_task, "biomarker | expression | survival");
  train->add_option("--label", train_label, "biomarker column to predict");
  train->add_option("--teachers", train_teachers,
                    "comma-separated teacher names, or 'none'");
  train->add_option("--npatches", train_npatches, "total selected patches (per_cluster * k)");
  train->add_option("--pool", train_pool, "attention | mean | max");
  train->add_flag("--sweep-teachers", train_sweep_teachers,
                  "train with 0..N teachers and tabulate the trend");
  train->add_flag("--sweep-npatches", train_sweep_npatches,
                  "train at {300,400,500,600,700} selected patches");

  CommonFlags eval_flags;
  std::string eval_run, eval_cohort;
  auto* eval = app.add_subcommand("eval", "compute metrics and exports from a training run");
  add_common(eval, eval_flags, /*needs_out=*/false);
  eval->add_option("--run", eval_run, "training run directory")->required();
  eval->add_option("--cohort", eval_cohort, "cohort directory")->required();

  CommonFlags report_flags;
  std::string report_run;
  auto* report = app.add_subcommand("report", "render plots from eval outputs");
  add_common(report, report_flags, /*needs_out=*/false);
  report->add_option("--run", report_run, "training run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_flags);
    if (cluster->parsed())
      return cmd_cluster(cluster_flags, cluster_cohort, cluster_k, cluster_sweep, cluster_compare);
    if (train->parsed())
      return cmd_train(train_flags, train_cohort, train_task, train_label, train_teachers,
                       train_npatches, train_sweep_teachers, train_sweep_npatches, train_pool);
    if (eval->parsed()) return cmd_eval(eval_flags, eval_run, eval_cohort);
    if (report->parsed()) return cmd_report(report_flags, report_run);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace fusemil::cli
