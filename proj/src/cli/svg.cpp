// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lsx/cli.hpp"
#include "lsx/parallel.hpp"

namespace lsx::cli {
namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string f(double v, int prec = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

double column(const eval::MetricReport& r, std::size_t c) {
  switch (c) {
    case 0: return r.accuracy;
    case 1: return r.ridge_accuracy;
    case 2: return r.iies;
    case 3: return r.comp;
    default: return r.suff;
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw RunError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Config text without the lines that legitimately differ between seeds.
std::string comparable_config(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("dir = ", 0) != 0) out += line + "\n";
  return out;
}

}  // namespace

std::vector<std::string> aggregate_columns() { return {"accuracy", "ridge_accuracy", "iies", "comp", "suff"}; }

std::vector<AggregateRow> aggregate(const std::vector<eval::MetricReport>& rows) {
  std::map<std::string, std::vector<const eval::MetricReport*>> groups;
  for (const auto& r : rows) groups[r.mode].push_back(&r);
  std::vector<AggregateRow> out;
  const std::size_t ncol = aggregate_columns().size();
  for (const auto& [mode, members] : groups) {
    AggregateRow a;
    a.mode = mode;
    a.runs = members.size();
    for (std::size_t c = 0; c < ncol; ++c) {
      double mean = 0.0;
      for (const auto* m : members) mean += column(*m, c);
      mean /= static_cast<double>(members.size());
      double var = 0.0;
      for (const auto* m : members) var += (column(*m, c) - mean) * (column(*m, c) - mean);
      const double sd = members.size() > 1 ? std::sqrt(var / static_cast<double>(members.size() - 1)) : 0.0;
      a.columns.emplace_back(mean, sd);
    }
    out.push_back(std::move(a));
  }
  // Baseline first.
  std::stable_sort(out.begin(), out.end(), [](const AggregateRow& a, const AggregateRow& b) {
    return (a.mode == "vanilla") > (b.mode == "vanilla");
  });
  return out;
}

std::string render_svg(const std::vector<AggregateRow>& rows, const std::string& title) {
  const auto cols = aggregate_columns();
  const int panel_w = 170, panel_h = 200, top = 50, left = 20, bar_area = 120;
  const int width = left * 2 + panel_w * static_cast<int>(cols.size());
  const int height = top + panel_h + 70;
  static const char* palette[] = {"#7f7f7f", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"24\" font-size=\"15\">" << escape(title) << "</text>\n";
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const int x0 = left + panel_w * static_cast<int>(c);
    const int base = top + bar_area;
    double lo = 0.0, hi = 0.0;
    for (const auto& r : rows) {
      lo = std::min(lo, r.columns[c].first - r.columns[c].second);
      hi = std::max(hi, r.columns[c].first + r.columns[c].second);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    auto y = [&](double v) { return top + bar_area * (hi - v) / (hi - lo); };
    s << "<g>\n<text x=\"" << x0 + 10 << "\" y=\"" << top - 8 << "\">" << escape(cols[c]) << "</text>\n";
    s << "<line x1=\"" << x0 + 10 << "\" y1=\"" << f(y(0.0)) << "\" x2=\"" << x0 + panel_w - 20 << "\" y2=\""
      << f(y(0.0)) << "\" stroke=\"black\"/>\n";
    const int n = std::max<int>(1, static_cast<int>(rows.size()));
    const int bw = std::max(8, (panel_w - 40) / n - 6);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto [mean, sd] = rows[i].columns[c];
      const int bx = x0 + 14 + static_cast<int>(i) * (bw + 6);
      const double y0 = y(std::max(mean, 0.0)), y1 = y(std::min(mean, 0.0));
      s << "<rect x=\"" << bx << "\" y=\"" << f(y0) << "\" width=\"" << bw << "\" height=\"" << f(y1 - y0)
        << "\" fill=\"" << palette[i % 6] << "\"><title>" << escape(rows[i].mode) << ": " << f(mean, 3) << " &#177; "
        << f(sd, 3) << "</title></rect>\n";
      const double cx = bx + bw / 2.0;
      s << "<line x1=\"" << f(cx) << "\" y1=\"" << f(y(mean - sd)) << "\" x2=\"" << f(cx) << "\" y2=\""
        << f(y(mean + sd)) << "\" stroke=\"black\"/>\n";
      s << "<text x=\"" << bx << "\" y=\"" << base + 16 + 12 * static_cast<int>(i % 2) << "\" font-size=\"9\">"
        << f(mean, 2) << "</text>\n";
    }
    s << "</g>\n";
  }
  int lx = left;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s << "<rect x=\"" << lx << "\" y=\"" << height - 30 << "\" width=\"10\" height=\"10\" fill=\"" << palette[i % 6]
      << "\"/>\n<text x=\"" << lx + 14 << "\" y=\"" << height - 21 << "\">" << escape(rows[i].mode) << " (n="
      << rows[i].runs << ")</text>\n";
    lx += 130;
  }
  s << "</svg>\n";
  return s.str();
}

void cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir, bool overwrite) {
  if (run_dirs.empty()) throw core::ConfigError("report needs at least one run directory");
  std::vector<eval::MetricReport> rows(run_dirs.size());
  std::vector<std::string> configs(run_dirs.size());
  parallel_for(run_dirs.size(), [&](std::size_t i) {
    configs[i] = comparable_config(slurp(run_dirs[i] / "config.resolved"));
    std::istringstream in(slurp(run_dirs[i] / "metrics.csv"));
    std::string line, last;
    while (std::getline(in, line))
      if (!line.empty()) last = line;
    if (last.empty() || last == eval::csv_header()) throw RunError(run_dirs[i].string() + " has no metric rows");
    rows[i] = eval::parse_csv_row(last);
  });
  for (std::size_t i = 1; i < configs.size(); ++i) {
    if (configs[i] != configs[0]) {
      throw RunError("incompatible run configs: " + run_dirs[i].string() + " differs from " + run_dirs[0].string());
    }
  }
  const fs::path csv = out_dir / "aggregate.csv", svg = out_dir / "report.svg";
  if (!overwrite && (fs::exists(csv) || fs::exists(svg))) {
    throw RunError("report files exist in " + out_dir.string() + "; pass --overwrite to replace them");
  }
  fs::create_directories(out_dir);
  const auto agg = aggregate(rows);
  std::ostringstream c;
  c << "mode,runs";
  for (const auto& name : aggregate_columns()) c << ',' << name << "_mean," << name << "_std";
  c << '\n';
  for (const auto& a : agg) {
    c << a.mode << ',' << a.runs;
    for (const auto& [m, sd] : a.columns) c << ',' << f(m, 6) << ',' << f(sd, 6);
    c << '\n';
  }
  std::ofstream(csv) << c.str();
  std::ofstream(svg) << render_svg(agg, "mean and std over " + std::to_string(rows.size()) + " runs");
}

}  // namespace lsx::cli
