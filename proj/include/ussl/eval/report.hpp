#pragma once

#include "ussl/eval/metrics.hpp"
#include "ussl/train/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ussl {

/// Downstream accuracies of one configuration on one graph, across instances.
struct RunReport {
  std::string run_id;
  std::string regime;
  std::string graph_id;
  std::vector<std::uint64_t> seeds;  // one per instance
  std::vector<double> accuracies;    // one per instance
  double mean = 0.0;
  double std = 0.0;
  double epoch_time_s = 0.0;  // trimmed median of the training run's epoch times
  std::string config_fingerprint;
  std::vector<double> loss_curve;  // per-epoch training loss of the run that produced the representations

  void recompute() {
    mean = mean_of(accuracies);
    std = sample_std(accuracies);
  }
};

inline RunReport make_report(std::string run_id, std::string regime, std::string graph_id,
                             std::vector<std::uint64_t> seeds, std::vector<double> accuracies,
                             const LossHistory* history, std::string fingerprint) {
  if (seeds.size() != accuracies.size()) throw ValidationError("report: one seed per accuracy required");
  RunReport r{std::move(run_id), std::move(regime), std::move(graph_id), std::move(seeds), std::move(accuracies)};
  r.config_fingerprint = std::move(fingerprint);
  if (history) {
    r.epoch_time_s = trimmed_median(history->epoch_seconds());
    r.loss_curve = history->totals();
  }
  r.recompute();
  return r;
}

inline std::string config_fingerprint(const nlohmann::json& resolved) { return hex64(fnv1a(resolved.dump())); }

/// Shortest text that parses back to the same double.
inline std::string exact_number(double v) {
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline nlohmann::json to_json(const RunReport& r) {
  return {{"run_id", r.run_id},
          {"regime", r.regime},
          {"graph_id", r.graph_id},
          {"seeds", r.seeds},
          {"accuracies", r.accuracies},
          {"mean", r.mean},
          {"std", r.std},
          {"epoch_time_s", r.epoch_time_s},
          {"config_fingerprint", r.config_fingerprint},
          {"loss_curve", r.loss_curve}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.run_id = j.at("run_id");
  r.regime = j.at("regime");
  r.graph_id = j.at("graph_id");
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.accuracies = j.at("accuracies").get<std::vector<double>>();
  r.mean = j.at("mean");
  r.std = j.at("std");
  r.epoch_time_s = j.at("epoch_time_s");
  r.config_fingerprint = j.at("config_fingerprint");
  r.loss_curve = j.value("loss_curve", std::vector<double>{});
  return r;
}

inline constexpr const char* kReportCsvHeader = "run_id,regime,graph_id,seed,accuracy,epoch_time_s,config_fingerprint";

/// One row per instance.
inline std::string reports_to_csv(const std::vector<RunReport>& reports) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.accuracies.size(); ++i)
      out += r.run_id + "," + r.regime + "," + r.graph_id + "," + std::to_string(r.seeds[i]) + "," +
             exact_number(r.accuracies[i]) + "," + exact_number(r.epoch_time_s) + "," + r.config_fingerprint + "\n";
  return out;
}

/// Inverse of reports_to_csv; rows sharing a run_id form one report (loss curves are not in the CSV).
inline std::vector<RunReport> reports_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader) throw ValidationError("report CSV: unexpected header");
  std::vector<RunReport> out;
  std::map<std::string, std::size_t> index;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw DatasetError("reports.csv", lineno, "expected 7 columns");
    auto [it, fresh] = index.emplace(f[0], out.size());
    if (fresh) {
      out.emplace_back();
      out.back().run_id = f[0];
      out.back().regime = f[1];
      out.back().graph_id = f[2];
      out.back().epoch_time_s = std::strtod(f[5].c_str(), nullptr);
      out.back().config_fingerprint = f[6];
    }
    auto& r = out[it->second];
    r.seeds.push_back(std::stoull(f[3]));
    r.accuracies.push_back(std::strtod(f[4].c_str(), nullptr));
  }
  for (auto& r : out) r.recompute();
  return out;
}

struct TableCell {
  double mean = 0.0;
  double std = 0.0;
  std::optional<double> delta;  // rendered in parentheses

  static TableCell of(const RunReport& r) { return {r.mean, r.std, std::nullopt}; }
};

/// Rows per graph, one column per regime or ablation value.
struct ComparisonTable {
  std::string title;
  std::string row_header = "Dataset";
  std::vector<std::string> columns;
  std::vector<std::string> rows;
  std::vector<std::vector<std::optional<TableCell>>> cells;  // [row][column]
  std::vector<int> bold_columns;                              // columns competing for boldface; empty = all
  std::optional<std::pair<int, int>> improvement;             // (from, to): adds a to - from column
  std::optional<int> underline_reference;  // underline `improvement->second` when it matches this column

  ComparisonTable() = default;
  ComparisonTable(std::string t, std::vector<std::string> cols, std::vector<std::string> row_ids)
      : title(std::move(t)), columns(std::move(cols)), rows(std::move(row_ids)) {
    cells.assign(rows.size(), std::vector<std::optional<TableCell>>(columns.size()));
  }

  void set(std::size_t row, std::size_t col, TableCell c) { cells.at(row).at(col) = c; }

  std::optional<double> improvement_of(std::size_t row) const {
    if (!improvement) return std::nullopt;
    const auto& a = cells[row][improvement->first];
    const auto& b = cells[row][improvement->second];
    if (!a || !b) return std::nullopt;
    return b->mean - a->mean;
  }

  std::string to_markdown(int digits = 3) const;
  std::string to_csv() const;
};

namespace report_detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string signed_fixed(double v, int digits) { return (v >= 0 ? "+" : "") + fixed(v, digits); }

inline double rounded(double v, int digits) {
  const double s = std::pow(10.0, digits);
  return std::round(v * s) / s;
}

}  // namespace report_detail

inline std::string ComparisonTable::to_markdown(int digits) const {
  using namespace report_detail;
  std::string out;
  if (!title.empty()) out += "### " + title + "\n\n";
  out += "| " + row_header;
  for (const auto& c : columns) out += " | " + c;
  if (improvement) out += " | " + columns[improvement->second] + " − " + columns[improvement->first];
  out += " |\n|---";
  for (std::size_t i = 0; i < columns.size() + (improvement ? 1 : 0); ++i) out += "|---";
  out += "|\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<int> eligible = bold_columns;
    if (eligible.empty())
      for (std::size_t c = 0; c < columns.size(); ++c) eligible.push_back(static_cast<int>(c));
    std::optional<double> best;
    for (int c : eligible)
      if (cells[r][c]) best = std::max(best.value_or(-1e300), rounded(cells[r][c]->mean, digits));
    out += "| " + rows[r];
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out += " | ";
      const auto& cell = cells[r][c];
      if (!cell) {
        out += "–";
        continue;
      }
      std::string m = fixed(cell->mean, digits);
      const bool is_eligible = std::find(eligible.begin(), eligible.end(), static_cast<int>(c)) != eligible.end();
      if (improvement && underline_reference && static_cast<int>(c) == improvement->second &&
          cells[r][*underline_reference] &&
          rounded(cell->mean, 2) >= rounded(cells[r][*underline_reference]->mean, 2))
        m = "<u>" + m + "</u>";
      if (is_eligible && best && rounded(cell->mean, digits) == *best) m = "**" + m + "**";
      out += m + " ± " + fixed(cell->std, digits);
      if (cell->delta) out += " (" + signed_fixed(*cell->delta, 2) + ")";
    }
    if (improvement) {
      const auto d = improvement_of(r);
      out += " | " + (d ? signed_fixed(*d, digits) : std::string("–"));
    }
    out += " |\n";
  }
  return out;
}

inline std::string ComparisonTable::to_csv() const {
  std::string out = "row";
  for (const auto& c : columns) out += "," + c + "_mean," + c + "_std";
  if (improvement) out += ",improvement";
  out += "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += rows[r];
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& cell = cells[r][c];
      out += cell ? "," + exact_number(cell->mean) + "," + exact_number(cell->std) : std::string(",,");
    }
    if (improvement) {
      const auto d = improvement_of(r);
      out += "," + (d ? exact_number(*d) : std::string());
    }
    out += "\n";
  }
  return out;
}

// ---- plots --------------------------------------------------------------------------

namespace svg {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};
  return colors[i % 6];
}

struct Series {
  std::string name;
  std::vector<double> values;
};

/// Line chart of one or more series against epoch index.
inline std::string line_plot(const std::string& title, const std::vector<Series>& series, const std::string& ylabel) {
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  double lo = 1e300, hi = -1e300;
  std::size_t n = 1;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values)
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  }
  if (lo > hi) lo = 0, hi = 1;
  if (hi - lo < 1e-12) hi = lo + 1;
  auto x = [&](std::size_t i) { return L + (W - L - R) * (n > 1 ? double(i) / double(n - 1) : 0.0); };
  auto y = [&](double v) { return T + (H - T - B) * (1.0 - (v - lo) / (hi - lo)); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
      << report_detail::fixed(v, 3) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    o << "<polyline fill=\"none\" stroke=\"" << palette(s) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].values.size(); ++i)
      if (std::isfinite(series[s].values[i])) o << x(i) << "," << y(series[s].values[i]) << " ";
    o << "\"/>\n";
    o << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (s + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
      << palette(s) << "\">" << escape(series[s].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Grouped bars (one group per table row, one bar per column) with ±std whiskers.
inline std::string grouped_bars(const ComparisonTable& t) {
  const double W = 120.0 + 110.0 * static_cast<double>(t.rows.size()), H = 400, L = 60, R = 20, T = 40, B = 60;
  const double group_w = (W - L - R) / std::max<std::size_t>(1, t.rows.size());
  const double bar_w = group_w * 0.8 / std::max<std::size_t>(1, t.columns.size());
  auto y = [&](double v) { return T + (H - T - B) * (1.0 - std::clamp(v, 0.0, 1.0)); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(t.title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k)
    o << "<text x=\"" << L - 6 << "\" y=\"" << y(k / 4.0) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
      << report_detail::fixed(k / 4.0, 2) << "</text>\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double gx = L + group_w * static_cast<double>(r) + group_w * 0.1;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const auto& cell = t.cells[r][c];
      if (!cell) continue;
      const double bx = gx + bar_w * static_cast<double>(c);
      o << "<rect x=\"" << bx << "\" y=\"" << y(cell->mean) << "\" width=\"" << bar_w * 0.9 << "\" height=\""
        << (H - B) - y(cell->mean) << "\" fill=\"" << palette(c) << "\"/>\n";
      const double cx = bx + bar_w * 0.45;
      o << "<line x1=\"" << cx << "\" y1=\"" << y(cell->mean - cell->std) << "\" x2=\"" << cx << "\" y2=\""
        << y(cell->mean + cell->std) << "\" stroke=\"black\"/>\n";
    }
    o << "<text x=\"" << gx + group_w * 0.4 << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << escape(t.rows[r]) << "</text>\n";
  }
  for (std::size_t c = 0; c < t.columns.size(); ++c)
    o << "<text x=\"" << L + 90.0 * static_cast<double>(c) << "\" y=\"" << H - 14 << "\" font-size=\"12\" fill=\""
      << palette(c) << "\">" << escape(t.columns[c]) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace svg

namespace report_detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("failed writing " + p.string());
}

inline std::string file_stem(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

}  // namespace report_detail

/// Files written by emit_report.
struct EmittedFiles {
  std::vector<std::filesystem::path> data;   // CSV / JSON / markdown
  std::vector<std::filesystem::path> plots;  // SVG
};

/// Writes reports.csv, reports.json, one loss-curve SVG per report with a loss curve, and for
/// each table <name>.md, <name>.csv and a grouped-bar SVG.
inline EmittedFiles emit_report(const std::vector<RunReport>& reports, const std::filesystem::path& out_dir,
                                const std::vector<std::pair<std::string, ComparisonTable>>& tables = {}) {
  namespace fs = std::filesystem;
  using report_detail::write_text;
  if (reports.empty()) throw ValidationError("emit_report: no reports");
  std::error_code ec;
  fs::create_directories(out_dir / "plots", ec);
  if (ec) throw Error("cannot create report directory " + out_dir.string() + ": " + ec.message());
  EmittedFiles files;
  auto data = [&](const fs::path& p, const std::string& text) {
    write_text(p, text);
    files.data.push_back(p);
  };
  auto plot = [&](const fs::path& p, const std::string& text) {
    write_text(p, text);
    files.plots.push_back(p);
  };
  data(out_dir / "reports.csv", reports_to_csv(reports));
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(to_json(r));
  data(out_dir / "reports.json", j.dump(2) + "\n");
  for (const auto& r : reports)
    if (!r.loss_curve.empty())
      plot(out_dir / "plots" / ("loss_" + report_detail::file_stem(r.run_id) + ".svg"),
           svg::line_plot(r.run_id + " training loss", {{r.regime, r.loss_curve}}, "loss"));
  std::string md;
  for (const auto& [name, table] : tables) {
    const std::string stem = report_detail::file_stem(name);
    data(out_dir / (stem + ".md"), table.to_markdown());
    data(out_dir / (stem + ".csv"), table.to_csv());
    plot(out_dir / "plots" / (stem + "_bars.svg"), svg::grouped_bars(table));
    md += table.to_markdown() + "\n";
  }
  if (!md.empty()) data(out_dir / "tables.md", md);
  return files;
}

}  // namespace ussl
