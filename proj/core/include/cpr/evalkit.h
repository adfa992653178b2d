/*
 * Copyright 2026 The CPR Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpr/dialogue.h"

namespace cpr {

// What the metrics need from an episode: the turn it succeeded at, if any.
struct EpisodeOutcome {
  std::optional<int> success_turn;

  static EpisodeOutcome From(const EpisodeLog& log) {
    return {log.success ? std::optional<int>(log.success_turn) : std::nullopt};
  }
};

std::vector<EpisodeOutcome> Outcomes(std::span<const EpisodeLog> logs);

// Fraction of episodes that succeeded at turn <= t. Throws on empty input.
double SuccessRateAt(std::span<const EpisodeOutcome> outcomes, int t);

// Mean of success turn, counting failures as max_turns.
double AverageTurns(std::span<const EpisodeOutcome> outcomes, int max_turns);

// SR@t(a) - SR@t(reference).
double RelativeSuccessRate(std::span<const EpisodeOutcome> a,
                           std::span<const EpisodeOutcome> reference, int t);

// AT recovered from the SR@t curve:
//   sum_t t * (SR@t - SR@t-1) + (1 - SR@T) * T
double AverageTurnsFromCurve(std::span<const double> sr_curve, int max_turns);

struct PolicyMetrics {
  std::string policy;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  std::vector<double> success_rate;   // index t-1 holds SR@t, t = 1..T
  double average_turns = 0.0;
  std::vector<double> relative_sr;    // SR* per turn; empty without reference
};

PolicyMetrics ComputeMetrics(const std::string& policy, std::uint64_t seed,
                             std::span<const EpisodeOutcome> outcomes,
                             int max_turns);

// Fills relative_sr of every entry from the entry with the same seed whose
// policy is `reference`.
void AttachRelativeSuccess(std::vector<PolicyMetrics>& metrics,
                           const std::string& reference);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for one value
};

MeanStd Summarize(std::span<const double> values);

struct MetricReport {
  int max_turns = 15;
  std::string reference;  // empty when no SR* was requested
  std::vector<PolicyMetrics> runs;  // one per (policy, seed)

  std::vector<std::string> policies() const;
};

// Throws if any run breaks SR@t monotonicity, SR bounds, AT bounds or the
// curve identity for AT (absolute tolerance 1e-12).
void CheckMetricIdentities(const MetricReport& report);

// Rows: policy,seed,metric,t,value with metric in {SR, SR*, AT}; seed
// "mean"/"std" rows aggregate across seeds.
void WriteReportCsv(std::ostream& os, const MetricReport& report);
void WriteReportJson(std::ostream& os, const MetricReport& report);

}  // namespace cpr
