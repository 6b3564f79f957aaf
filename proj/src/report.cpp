#include "fusemil/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fusemil {

std::string csv_num(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open for writing: " + path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw data_error("write failed: " + path);
}

void write_assignment_csv(const std::string& path, const ClusterAssignment& assignment) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(assignment.labels.size());
  for (std::size_t i = 0; i < assignment.labels.size(); ++i)
    rows.push_back({std::to_string(i), std::to_string(assignment.labels[i])});
  write_csv(path, {"patch_index", "cluster_id"}, rows);
}

void write_quality_csv(const std::string& path,
                       const std::vector<ClusterAssignment>& assignments) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& a : assignments)
    rows.push_back({a.slide_id, std::to_string(a.k), csv_num(a.quality.sc), csv_num(a.quality.ch)});
  write_csv(path, {"slide_id", "k", "sc", "ch"}, rows);
}

void write_attention_csv(const std::string& path, const std::vector<int>& patch_indices,
                         const Vecd& attention) {
  if (static_cast<int>(patch_indices.size()) != attention.size())
    throw data_error("attention export: index/weight length mismatch");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < patch_indices.size(); ++i)
    rows.push_back({std::to_string(patch_indices[i]), csv_num(attention(static_cast<int>(i)))});
  write_csv(path, {"patch_index", "attn"}, rows);
}

void write_km_csv(const std::string& path, const KMCurve& low, const KMCurve& high) {
  std::vector<std::vector<std::string>> rows;
  auto emit = [&rows](const KMCurve& c, const char* group) {
    rows.push_back({"0", "1", std::to_string(c.at_risk.empty() ? 0 : c.at_risk.front()), group});
    for (std::size_t i = 0; i < c.times.size(); ++i)
      rows.push_back({csv_num(c.times[i]), csv_num(c.survival[i]), std::to_string(c.at_risk[i]),
                      group});
  };
  emit(low, "low");
  emit(high, "high");
  write_csv(path, {"time", "survival", "at_risk", "group"}, rows);
}

namespace {

constexpr double kW = 640, kH = 420, kMargin = 50;

double sx(double t, double t_max) { return kMargin + (kW - 2 * kMargin) * (t_max > 0 ? t / t_max : 0); }
double sy(double s) { return kH - kMargin - (kH - 2 * kMargin) * s; }

std::string step_path(const KMCurve& c, double t_max) {
  std::ostringstream p;
  p << "M " << sx(0, t_max) << " " << sy(1.0);
  double s = 1.0;
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    p << " H " << sx(c.times[i], t_max);
    s = c.survival[i];
    p << " V " << sy(s);
  }
  p << " H " << sx(t_max, t_max);
  return p.str();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void write_km_svg(const std::string& path, const KMCurve& low, const KMCurve& high,
                  double logrank_p) {
  double t_max = 1.0;
  for (double t : low.times) t_max = std::max(t_max, t);
  for (double t : high.times) t_max = std::max(t_max, t);

  std::ofstream out(path);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
      << "' viewBox='0 0 " << kW << " " << kH << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<line x1='" << kMargin << "' y1='" << sy(0) << "' x2='" << kW - kMargin << "' y2='"
      << sy(0) << "' stroke='black'/>\n";
  out << "<line x1='" << kMargin << "' y1='" << sy(0) << "' x2='" << kMargin << "' y2='" << sy(1)
      << "' stroke='black'/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double s = tick / 4.0;
    out << "<text x='" << kMargin - 35 << "' y='" << sy(s) + 4 << "' font-size='11'>" << s
        << "</text>\n";
    out << "<line x1='" << kMargin - 4 << "' y1='" << sy(s) << "' x2='" << kMargin << "' y2='"
        << sy(s) << "' stroke='black'/>\n";
  }
  out << "<path d='" << step_path(low, t_max) << "' fill='none' stroke='" << kPalette[0]
      << "' stroke-width='2'/>\n";
  out << "<path d='" << step_path(high, t_max) << "' fill='none' stroke='" << kPalette[1]
      << "' stroke-width='2'/>\n";
  out << "<text x='" << kW - kMargin - 160 << "' y='" << kMargin << "' font-size='12' fill='"
      << kPalette[0] << "'>low risk</text>\n";
  out << "<text x='" << kW - kMargin - 160 << "' y='" << kMargin + 16 << "' font-size='12' fill='"
      << kPalette[1] << "'>high risk</text>\n";
  out << "<text x='" << kW - kMargin - 160 << "' y='" << kMargin + 32
      << "' font-size='12'>log-rank p = " << csv_num(logrank_p) << "</text>\n";
  out << "<text x='" << kW / 2 - 20 << "' y='" << kH - 12 << "' font-size='12'>time</text>\n";
  out << "<text x='12' y='" << kH / 2 << "' font-size='12' transform='rotate(-90 12 " << kH / 2
      << ")'>survival</text>\n";
  out << "</svg>\n";
}

void write_scatter_svg(const std::string& path, const Matd& points2d,
                       const std::vector<int>& labels) {
  if (points2d.cols() < 2 || points2d.rows() != static_cast<int>(labels.size()))
    throw data_error("scatter export: expects n x 2 points with matching labels");
  double x0 = points2d.col(0).minCoeff(), x1 = points2d.col(0).maxCoeff();
  double y0 = points2d.col(1).minCoeff(), y1 = points2d.col(1).maxCoeff();
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;

  std::ofstream out(path);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
      << "' viewBox='0 0 " << kW << " " << kH << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  for (int i = 0; i < points2d.rows(); ++i) {
    const double px = kMargin + (kW - 2 * kMargin) * (points2d(i, 0) - x0) / (x1 - x0);
    const double py = kH - kMargin - (kH - 2 * kMargin) * (points2d(i, 1) - y0) / (y1 - y0);
    out << "<circle cx='" << px << "' cy='" << py << "' r='3' fill='"
        << kPalette[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]) % 10]
        << "' fill-opacity='0.8'/>\n";
  }
  out << "</svg>\n";
}

}  // namespace fusemil
