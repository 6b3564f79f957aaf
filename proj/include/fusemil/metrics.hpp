#pragma once

#include <vector>

#include "fusemil/common.hpp"

namespace fusemil {

struct SurvivalSample {
  double time = 0.0;
  int event = 0;  // 1 = observed, 0 = censored
  double risk = 0.0;
};

struct KMCurve {
  std::vector<double> times;     // increasing event-time grid
  std::vector<double> survival;  // non-increasing step values in [0, 1]
  std::vector<int> at_risk;      // risk-set size just before each drop
};

/// Rank-statistic AUROC: P(score+ > score-) + 0.5 P(tie), via average ranks.
/// Both classes must be present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Regression error in the form (1/N) * sqrt(sum_i ||pred_i - truth_i||^2)
/// over N samples of vectors.
double mse_paper(const std::vector<Vecd>& preds, const std::vector<Vecd>& truths);

/// Conventional mean of squared errors over all vector components.
double mse_standard(const std::vector<Vecd>& preds, const std::vector<Vecd>& truths);

/// log2(tpm + 1); negative input is a domain error.
double tpm_transform(double tpm);

/// Harrell's concordance: pairs (i, j) with t_i < t_j and event_i = 1 are
/// comparable; concordant iff risk_i > risk_j; risk ties count 1/2.
double c_index(const std::vector<SurvivalSample>& samples);

/// Product-limit estimator; censored subjects leave the risk set silently.
KMCurve km_curve(const std::vector<double>& times, const std::vector<int>& events);

/// One-degree-of-freedom log-rank test with hypergeometric variance.
/// Returns (chi2, p) with p from the chi-square(1) upper tail.
std::pair<double, double> logrank_test(const std::vector<SurvivalSample>& group_a,
                                       const std::vector<SurvivalSample>& group_b);

/// Upper tail of the chi-square(1) distribution.
double chi2_sf_1df(double chi2);

/// Median split: risk >= median goes high. Returns 1 for high, 0 for low.
std::vector<int> median_risk_split(const std::vector<double>& risks);

}  // namespace fusemil
