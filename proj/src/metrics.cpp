#include "fusemil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace fusemil {

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  if (n != labels.size() || n == 0) throw data_error("auroc: inputs must be nonempty and equal-sized");
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw data_error("auroc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw data_error("auroc: undefined with a single class");

  // Average ranks with tie midpoints.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[k] == 1) rank_sum_pos += rank[k];
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double mse_paper(const std::vector<Vecd>& preds, const std::vector<Vecd>& truths) {
  if (preds.size() != truths.size() || preds.empty())
    throw data_error("mse_paper: inputs must be nonempty and equal-sized");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != truths[i].size()) throw data_error("mse_paper: vector shape mismatch");
    total += (preds[i] - truths[i]).squaredNorm();
  }
  return std::sqrt(total) / static_cast<double>(preds.size());
}

double mse_standard(const std::vector<Vecd>& preds, const std::vector<Vecd>& truths) {
  if (preds.size() != truths.size() || preds.empty())
    throw data_error("mse_standard: inputs must be nonempty and equal-sized");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != truths[i].size()) throw data_error("mse_standard: vector shape mismatch");
    total += (preds[i] - truths[i]).squaredNorm();
    count += static_cast<std::size_t>(preds[i].size());
  }
  if (count == 0) throw data_error("mse_standard: empty vectors");
  return total / static_cast<double>(count);
}

double tpm_transform(double tpm) {
  if (!(tpm >= 0.0)) throw data_error("tpm_transform: input must be >= 0");
  return std::log2(tpm + 1.0);
}

double c_index(const std::vector<SurvivalSample>& samples) {
  const std::size_t n = samples.size();
  // Sweep in time order; for each event, compare against strictly later times.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return samples[a].time < samples[b].time; });
  double comparable = 0.0, concordant = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const auto& si = samples[order[a]];
    if (!si.event) continue;
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto& sj = samples[order[b]];
      if (!(si.time < sj.time)) continue;  // ties in time are not comparable
      comparable += 1.0;
      if (si.risk > sj.risk)
        concordant += 1.0;
      else if (si.risk == sj.risk)
        concordant += 0.5;
    }
  }
  if (comparable == 0.0) throw data_error("c_index: no comparable pairs");
  return concordant / comparable;
}

KMCurve km_curve(const std::vector<double>& times, const std::vector<int>& events) {
  const std::size_t n = times.size();
  if (n == 0 || events.size() != n) throw data_error("km_curve: inputs must be nonempty and equal-sized");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  KMCurve curve;
  double survival = 1.0;
  std::size_t i = 0;
  int at_risk = static_cast<int>(n);
  while (i < n) {
    std::size_t j = i;
    int deaths = 0;
    while (j < n && times[order[j]] == times[order[i]]) {
      deaths += events[order[j]] ? 1 : 0;
      ++j;
    }
    if (deaths > 0) {
      curve.times.push_back(times[order[i]]);
      curve.at_risk.push_back(at_risk);
      survival *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      curve.survival.push_back(survival);
    }
    at_risk -= static_cast<int>(j - i);
    i = j;
  }
  return curve;
}

double chi2_sf_1df(double chi2) {
  if (chi2 < 0.0) throw data_error("chi2_sf_1df: statistic must be >= 0");
  return std::erfc(std::sqrt(chi2 / 2.0));
}

std::pair<double, double> logrank_test(const std::vector<SurvivalSample>& group_a,
                                       const std::vector<SurvivalSample>& group_b) {
  if (group_a.empty() || group_b.empty())
    throw data_error("logrank_test: both groups must be nonempty");

  struct Row {
    double time;
    int event;
    int group;  // 0 = a, 1 = b
  };
  std::vector<Row> rows;
  rows.reserve(group_a.size() + group_b.size());
  for (const auto& s : group_a) rows.push_back({s.time, s.event, 0});
  for (const auto& s : group_b) rows.push_back({s.time, s.event, 1});
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) { return x.time < y.time; });

  int total_events = 0;
  for (const auto& r : rows) total_events += r.event ? 1 : 0;
  if (total_events == 0) throw data_error("logrank_test: undefined without any event");

  double n_at_risk = static_cast<double>(rows.size());
  double n_a_at_risk = static_cast<double>(group_a.size());
  double observed_minus_expected = 0.0;
  double variance = 0.0;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    int deaths = 0, deaths_a = 0, leaving_a = 0;
    while (j < rows.size() && rows[j].time == rows[i].time) {
      deaths += rows[j].event ? 1 : 0;
      deaths_a += (rows[j].event && rows[j].group == 0) ? 1 : 0;
      leaving_a += rows[j].group == 0 ? 1 : 0;
      ++j;
    }
    if (deaths > 0) {
      const double d = static_cast<double>(deaths);
      const double expected_a = d * n_a_at_risk / n_at_risk;
      observed_minus_expected += static_cast<double>(deaths_a) - expected_a;
      if (n_at_risk > 1.0)
        variance += d * (n_a_at_risk / n_at_risk) * (1.0 - n_a_at_risk / n_at_risk) *
                    (n_at_risk - d) / (n_at_risk - 1.0);
    }
    n_at_risk -= static_cast<double>(j - i);
    n_a_at_risk -= static_cast<double>(leaving_a);
    i = j;
  }
  const double chi2 =
      variance > 0.0 ? observed_minus_expected * observed_minus_expected / variance : 0.0;
  return {chi2, chi2_sf_1df(chi2)};
}

std::vector<int> median_risk_split(const std::vector<double>& risks) {
  const std::size_t n = risks.size();
  if (n < 2) throw data_error("median_risk_split: need at least 2 samples");
  std::vector<double> sorted = risks;
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<int> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = risks[i] >= median ? 1 : 0;
  return group;
}

}  // namespace fusemil
