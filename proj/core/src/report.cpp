// Copyright 2026 The crossdim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "crossdim/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace crossdim {

std::optional<double> metric_value(const ClassMetrics& m, const std::string& metric) {
  if (metric == "dice") return m.dice.value;
  if (metric == "ravd_percent") return m.ravd_percent;
  if (!m.distances) {
    if (metric == "mad_mm" || metric == "assd_mm" || metric == "mssd_mm" || metric == "hd_mm") return std::nullopt;
  } else {
    if (metric == "mad_mm") return m.distances->mad;
    if (metric == "assd_mm") return m.distances->assd;
    if (metric == "mssd_mm") return m.distances->mssd;
    if (metric == "hd_mm") return m.distances->hd;
  }
  throw LookupError("unknown metric '" + metric + "'");
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(q >= 0 && q <= 1)) throw ConfigError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<CaseReport>& cases) {
  std::vector<std::string> class_order;
  std::map<std::string, std::vector<std::vector<double>>> samples;
  const auto& metrics = metric_names();
  for (const auto& c : cases)
    for (const auto& m : c.classes) {
      auto [it, inserted] = samples.try_emplace(m.name, metrics.size());
      if (inserted) class_order.push_back(m.name);
      for (std::size_t k = 0; k < metrics.size(); ++k)
        if (auto v = metric_value(m, metrics[k])) it->second[k].push_back(*v);
    }
  const std::vector<std::pair<std::string, double>> stats{
      {"Mean", -1}, {"Median", 0.5}, {"25 Quartile", 0.25}, {"75 Quartile", 0.75}};
  std::vector<SummaryRow> rows;
  for (const auto& [stat, q] : stats)
    for (const auto& cls : class_order) {
      SummaryRow row{stat, cls, {}};
      for (const auto& s : samples[cls]) {
        if (s.empty()) {
          row.values.push_back(std::nullopt);
        } else if (q < 0) {
          row.values.push_back(std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size()));
        } else {
          row.values.push_back(quantile(s, q));
        }
      }
      rows.push_back(std::move(row));
    }
  return rows;
}

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string report_csv(const std::vector<CaseReport>& cases) {
  std::ostringstream os;
  os << "case_id,class";
  for (const auto& m : metric_names()) os << ',' << m;
  os << ",flags\n";
  for (const auto& c : cases)
    for (const auto& m : c.classes) {
      os << csv_field(c.case_id) << ',' << csv_field(m.name);
      for (const auto& name : metric_names()) os << ',' << fmt(metric_value(m, name));
      os << ',' << m.flags() << '\n';
    }
  for (const auto& row : summarize(cases)) {
    os << row.statistic << ',' << csv_field(row.class_name);
    for (const auto& v : row.values) os << ',' << fmt(v);
    os << ",\n";
  }
  return os.str();
}

double ThresholdClamp::operator()(double value) const {
  if (best == worst) throw ConfigError("score transform needs distinct best and worst values");
  const double t = (value - worst) / (best - worst);
  return 100.0 * std::clamp(t, 0.0, 1.0);
}

}  // namespace crossdim
