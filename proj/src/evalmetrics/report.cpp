// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lsx/evalmetrics.hpp"

namespace lsx::eval {
namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw MetricError(std::string("metrics row: bad ") + field + " '" + s + "'");
  }
}

}  // namespace

void MetricReport::validate() const {
  if (!(accuracy >= 0.0 && accuracy <= 100.0)) throw MetricError("accuracy outside [0, 100]");
  if (!(ridge_accuracy >= 0.0 && ridge_accuracy <= 100.0)) throw MetricError("ridge accuracy outside [0, 100]");
  if (!std::isfinite(comp) || !std::isfinite(suff)) throw MetricError("comp/suff must be finite");
  if (!std::isfinite(iies) || iies < 0.0) throw MetricError("IIES must be finite and non-negative");
}

std::string csv_header() { return "run,mode,seed,accuracy,ridge_accuracy,iies,comp,suff,variant,b_set"; }

std::string to_csv_row(const MetricReport& r) {
  r.validate();
  if (r.run.find_first_of(",\n") != std::string::npos || r.mode.find_first_of(",\n") != std::string::npos) {
    throw MetricError("run and mode names may not contain commas");
  }
  std::string b;
  for (std::size_t i = 0; i < r.b_set.size(); ++i) b += (i ? ";" : "") + num(r.b_set[i]);
  return r.run + ',' + r.mode + ',' + std::to_string(r.seed) + ',' + num(r.accuracy) + ',' + num(r.ridge_accuracy) +
         ',' + num(r.iies) + ',' + num(r.comp) + ',' + num(r.suff) + ',' +
         (r.variant == Variant::discrete ? "discrete" : "continuous") + ',' + b;
}

MetricReport parse_csv_row(const std::string& line) {
  const auto f = split(line, ',');
  if (f.size() != 10) throw MetricError("metrics row has " + std::to_string(f.size()) + " fields, expected 10");
  MetricReport r;
  r.run = f[0];
  r.mode = f[1];
  try {
    r.seed = std::stoull(f[2]);
  } catch (const std::exception&) {
    throw MetricError("metrics row: bad seed '" + f[2] + "'");
  }
  r.accuracy = to_double(f[3], "accuracy");
  r.ridge_accuracy = to_double(f[4], "ridge_accuracy");
  r.iies = to_double(f[5], "iies");
  r.comp = to_double(f[6], "comp");
  r.suff = to_double(f[7], "suff");
  if (f[8] == "discrete") {
    r.variant = Variant::discrete;
  } else if (f[8] == "continuous") {
    r.variant = Variant::continuous;
  } else {
    throw MetricError("metrics row: bad variant '" + f[8] + "'");
  }
  if (!f[9].empty())
    for (const auto& q : split(f[9], ';')) r.b_set.push_back(to_double(q, "b_set"));
  r.validate();
  return r;
}

}  // namespace lsx::eval
