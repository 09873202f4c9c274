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

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crossdim/metrics.hpp"

namespace crossdim {

/// Metric columns of the per-case report, in CSV order.
inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"dice", "ravd_percent", "mad_mm", "assd_mm", "mssd_mm", "hd_mm"};
  return names;
}

/// Value of a named metric; empty when undefined for this class.
std::optional<double> metric_value(const ClassMetrics& m, const std::string& metric);

/// Linear-interpolation quantile (q in [0, 1]) of a non-empty sample.
double quantile(std::vector<double> values, double q);

struct SummaryRow {
  std::string statistic;  // "Mean", "Median", "25 Quartile", "75 Quartile"
  std::string class_name;
  std::vector<std::optional<double>> values;  // aligned with metric_names()
};

/// Cohort statistics per class over cases where the metric is defined.
std::vector<SummaryRow> summarize(const std::vector<CaseReport>& cases);

/// Columns: case_id, class, dice, ravd_percent, mad_mm, assd_mm, mssd_mm,
/// hd_mm, flags. Undefined values print as "NA". Summary rows follow with the
/// statistic name in the case_id column.
std::string report_csv(const std::vector<CaseReport>& cases);

/// Maps a raw metric to a 0..100 score by linear interpolation between a
/// `worst` value (score 0) and a `best` value (score 100), clamped. No
/// thresholds are built in; callers supply both ends.
struct ThresholdClamp {
  double best = 0;
  double worst = 1;

  double operator()(double value) const;
};

}  // namespace crossdim
