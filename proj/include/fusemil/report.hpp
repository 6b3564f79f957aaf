#pragma once

#include <string>
#include <vector>

#include "fusemil/metrics.hpp"
#include "fusemil/spectral.hpp"

namespace fusemil {

/// Generic CSV writer; fields must not contain commas.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string csv_num(double v);

/// Per-slide cluster assignment export: patch_index, cluster_id.
void write_assignment_csv(const std::string& path, const ClusterAssignment& assignment);

/// Run-level quality table: slide_id, k, sc, ch.
void write_quality_csv(const std::string& path,
                       const std::vector<ClusterAssignment>& assignments);

/// Per-slide attention export: patch_index, attn.
void write_attention_csv(const std::string& path, const std::vector<int>& patch_indices,
                         const Vecd& attention);

/// Survival curves as CSV rows (time, survival, at_risk, group).
void write_km_csv(const std::string& path, const KMCurve& low, const KMCurve& high);

/// Self-contained SVG step plot of two survival curves with the log-rank p.
void write_km_svg(const std::string& path, const KMCurve& low, const KMCurve& high,
                  double logrank_p);

/// Self-contained SVG scatter of a 2-D embedding colored by cluster.
void write_scatter_svg(const std::string& path, const Matd& points2d,
                       const std::vector<int>& labels);

}  // namespace fusemil
