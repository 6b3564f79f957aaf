#include "fusemil/cohort_csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fusemil {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) {
    while (!cur.empty() && (cur.back() == '\r' || cur.back() == '\n')) cur.pop_back();
    out.push_back(cur);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

namespace {

constexpr const char* kBioPrefix = "biomarker:";
constexpr const char* kExprPrefix = "expr:";

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

double parse_double_cell(const std::string& cell, const std::string& ctx) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw data_error("labels csv: cannot parse '" + cell + "' in " + ctx);
  }
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

std::vector<CohortRecord> read_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open labels csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw data_error("labels csv is empty: " + path);
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "slide_id")
    throw schema_error("labels csv must start with a slide_id column: " + path);

  std::vector<std::string> biomarkers, genes;
  int col_time = -1, col_event = -1;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& h = header[c];
    if (starts_with(h, kBioPrefix)) {
      biomarkers.push_back(h.substr(std::string(kBioPrefix).size()));
    } else if (starts_with(h, kExprPrefix)) {
      genes.push_back(h.substr(std::string(kExprPrefix).size()));
    } else if (h == "surv_time") {
      col_time = static_cast<int>(c);
    } else if (h == "surv_event") {
      col_event = static_cast<int>(c);
    } else {
      throw schema_error("labels csv: unknown column '" + h + "': " + path);
    }
  }

  std::vector<CohortRecord> records;
  std::set<std::string> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    cells.resize(header.size());
    CohortRecord rec;
    rec.slide_id = cells[0];
    if (rec.slide_id.empty())
      throw data_error("labels csv line " + std::to_string(lineno) + ": empty slide_id");
    if (!seen.insert(rec.slide_id).second)
      throw data_error("labels csv: duplicate slide_id '" + rec.slide_id + "'");

    std::size_t bio_i = 0, expr_i = 0;
    std::vector<double> expr;
    int expr_present = 0;
    for (std::size_t c = 1; c < header.size(); ++c) {
      const auto& h = header[c];
      const auto& cell = cells[c];
      if (starts_with(h, kBioPrefix)) {
        const auto& name = biomarkers[bio_i++];
        if (!cell.empty()) {
          if (cell != "0" && cell != "1")
            throw data_error("labels csv line " + std::to_string(lineno) + ": biomarker '" + name +
                             "' must be 0/1/empty, got '" + cell + "'");
          rec.binary_labels[name] = cell == "1" ? 1 : 0;
        }
      } else if (starts_with(h, kExprPrefix)) {
        ++expr_i;
        if (!cell.empty()) {
          ++expr_present;
          expr.push_back(parse_double_cell(cell, "expr column, line " + std::to_string(lineno)));
        } else {
          expr.push_back(std::nan(""));
        }
      } else if (static_cast<int>(c) == col_time) {
        if (!cell.empty())
          rec.survival_time = parse_double_cell(cell, "surv_time, line " + std::to_string(lineno));
      } else if (static_cast<int>(c) == col_event) {
        if (!cell.empty())
          rec.event_indicator =
              static_cast<int>(parse_double_cell(cell, "surv_event, line " + std::to_string(lineno)));
      }
    }
    if (expr_present > 0) {
      if (expr_present != static_cast<int>(genes.size()))
        throw data_error("labels csv line " + std::to_string(lineno) +
                         ": expression must fill all expr columns or none");
      rec.gene_names = genes;
      rec.expression = Eigen::Map<const Vecd>(expr.data(), static_cast<Eigen::Index>(expr.size()));
    }
    rec.validate();
    records.push_back(std::move(rec));
  }
  return records;
}

void write_labels_csv(const std::string& path, const std::vector<CohortRecord>& records) {
  // Column sets are the union over records, in first-seen order.
  std::vector<std::string> biomarkers, genes;
  for (const auto& r : records) {
    for (const auto& [name, v] : r.binary_labels) {
      (void)v;
      if (std::find(biomarkers.begin(), biomarkers.end(), name) == biomarkers.end())
        biomarkers.push_back(name);
    }
    for (const auto& g : r.gene_names)
      if (std::find(genes.begin(), genes.end(), g) == genes.end()) genes.push_back(g);
  }

  std::ofstream out(path);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << "slide_id";
  for (const auto& b : biomarkers) out << "," << kBioPrefix << b;
  for (const auto& g : genes) out << "," << kExprPrefix << g;
  out << ",surv_time,surv_event\n";

  for (const auto& r : records) {
    out << r.slide_id;
    for (const auto& b : biomarkers) {
      const auto it = r.binary_labels.find(b);
      out << ",";
      if (it != r.binary_labels.end()) out << it->second;
    }
    for (std::size_t gi = 0; gi < genes.size(); ++gi) {
      out << ",";
      if (r.expression) {
        const auto it = std::find(r.gene_names.begin(), r.gene_names.end(), genes[gi]);
        if (it != r.gene_names.end())
          out << fmt((*r.expression)(it - r.gene_names.begin()));
      }
    }
    out << ",";
    if (r.survival_time) out << fmt(*r.survival_time);
    out << ",";
    if (r.event_indicator) out << *r.event_indicator;
    out << "\n";
  }
  if (!out) throw data_error("write failed: " + path);
}

}  // namespace fusemil
