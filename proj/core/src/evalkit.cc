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

#include "cpr/evalkit.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cpr/error.h"

namespace cpr {

namespace {

void RequireNonEmpty(std::span<const EpisodeOutcome> outcomes) {
  if (outcomes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "metrics need at least one episode");
  }
}

std::string Num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

std::vector<EpisodeOutcome> Outcomes(std::span<const EpisodeLog> logs) {
  std::vector<EpisodeOutcome> out;
  out.reserve(logs.size());
  for (const EpisodeLog& log : logs) out.push_back(EpisodeOutcome::From(log));
  return out;
}

double SuccessRateAt(std::span<const EpisodeOutcome> outcomes, int t) {
  RequireNonEmpty(outcomes);
  if (t < 1) throw Error(ErrorCode::kInvalidArgument, "turn must be >= 1");
  std::size_t hits = 0;
  for (const EpisodeOutcome& o : outcomes) {
    if (o.success_turn && *o.success_turn <= t) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

double AverageTurns(std::span<const EpisodeOutcome> outcomes, int max_turns) {
  RequireNonEmpty(outcomes);
  double sum = 0.0;
  for (const EpisodeOutcome& o : outcomes) {
    sum += o.success_turn ? *o.success_turn : max_turns;
  }
  return sum / static_cast<double>(outcomes.size());
}

double RelativeSuccessRate(std::span<const EpisodeOutcome> a,
                           std::span<const EpisodeOutcome> reference, int t) {
  return SuccessRateAt(a, t) - SuccessRateAt(reference, t);
}

double AverageTurnsFromCurve(std::span<const double> sr, int max_turns) {
  double at = 0.0;
  double prev = 0.0;
  for (int t = 1; t <= max_turns; ++t) {
    at += t * (sr[t - 1] - prev);
    prev = sr[t - 1];
  }
  return at + (1.0 - prev) * max_turns;
}

PolicyMetrics ComputeMetrics(const std::string& policy, std::uint64_t seed,
                             std::span<const EpisodeOutcome> outcomes,
                             int max_turns) {
  PolicyMetrics m;
  m.policy = policy;
  m.seed = seed;
  m.episodes = outcomes.size();
  for (int t = 1; t <= max_turns; ++t) {
    m.success_rate.push_back(SuccessRateAt(outcomes, t));
  }
  m.average_turns = AverageTurns(outcomes, max_turns);
  return m;
}

void AttachRelativeSuccess(std::vector<PolicyMetrics>& metrics,
                           const std::string& reference) {
  std::map<std::uint64_t, const PolicyMetrics*> ref;
  for (const PolicyMetrics& m : metrics) {
    if (m.policy == reference) ref[m.seed] = &m;
  }
  std::vector<std::vector<double>> rel(metrics.size());
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    auto it = ref.find(metrics[i].seed);
    if (it == ref.end()) {
      throw Error(ErrorCode::kNotFound, "no reference run '" + reference +
                                            "' for seed " +
                                            std::to_string(metrics[i].seed));
    }
    for (std::size_t t = 0; t < metrics[i].success_rate.size(); ++t) {
      rel[i].push_back(metrics[i].success_rate[t] - it->second->success_rate[t]);
    }
  }
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    metrics[i].relative_sr = std::move(rel[i]);
  }
}

MeanStd Summarize(std::span<const double> values) {
  MeanStd s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::vector<std::string> MetricReport::policies() const {
  std::vector<std::string> out;
  for (const PolicyMetrics& m : runs) {
    if (std::find(out.begin(), out.end(), m.policy) == out.end()) {
      out.push_back(m.policy);
    }
  }
  return out;
}

void CheckMetricIdentities(const MetricReport& report) {
  for (const PolicyMetrics& m : report.runs) {
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::kInternal, "metric identity violated for " +
                                            m.policy + " seed " +
                                            std::to_string(m.seed) + ": " + what);
    };
    if (m.success_rate.size() != static_cast<std::size_t>(report.max_turns)) {
      fail("SR curve length");
    }
    double prev = 0.0;
    for (double sr : m.success_rate) {
      if (sr < prev) fail("SR@t decreases");
      if (sr < 0.0 || sr > 1.0) fail("SR outside [0, 1]");
      prev = sr;
    }
    if (m.average_turns < 1.0 || m.average_turns > report.max_turns) {
      fail("AT outside [1, T]");
    }
    const double from_curve = AverageTurnsFromCurve(m.success_rate, report.max_turns);
    if (std::abs(from_curve - m.average_turns) > 1e-12) {
      fail("AT differs from the SR-curve reconstruction");
    }
  }
}

void WriteReportCsv(std::ostream& os, const MetricReport& report) {
  os << "policy,seed,metric,t,value\n";
  for (const PolicyMetrics& m : report.runs) {
    for (std::size_t t = 0; t < m.success_rate.size(); ++t) {
      os << m.policy << ',' << m.seed << ",SR," << t + 1 << ','
         << Num(m.success_rate[t]) << '\n';
    }
    for (std::size_t t = 0; t < m.relative_sr.size(); ++t) {
      os << m.policy << ',' << m.seed << ",SR*," << t + 1 << ','
         << Num(m.relative_sr[t]) << '\n';
    }
    os << m.policy << ',' << m.seed << ",AT,," << Num(m.average_turns) << '\n';
  }
  for (const std::string& policy : report.policies()) {
    std::vector<const PolicyMetrics*> runs;
    for (const PolicyMetrics& m : report.runs) {
      if (m.policy == policy) runs.push_back(&m);
    }
    auto emit = [&](const std::string& metric, int t, auto&& value_of) {
      std::vector<double> v;
      for (const PolicyMetrics* m : runs) v.push_back(value_of(*m));
      const MeanStd s = Summarize(v);
      const std::string tt = t > 0 ? std::to_string(t) : "";
      os << policy << ",mean," << metric << ',' << tt << ',' << Num(s.mean) << '\n';
      os << policy << ",std," << metric << ',' << tt << ',' << Num(s.stddev) << '\n';
    };
    for (int t = 1; t <= report.max_turns; ++t) {
      emit("SR", t, [t](const PolicyMetrics& m) { return m.success_rate[t - 1]; });
    }
    emit("AT", 0, [](const PolicyMetrics& m) { return m.average_turns; });
  }
}

void WriteReportJson(std::ostream& os, const MetricReport& report) {
  nlohmann::json j;
  j["max_turns"] = report.max_turns;
  if (!report.reference.empty()) j["reference"] = report.reference;
  nlohmann::json runs = nlohmann::json::array();
  for (const PolicyMetrics& m : report.runs) {
    nlohmann::json r = {{"policy", m.policy},
                        {"seed", m.seed},
                        {"episodes", m.episodes},
                        {"sr", m.success_rate},
                        {"at", m.average_turns}};
    if (!m.relative_sr.empty()) r["sr_star"] = m.relative_sr;
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  nlohmann::json summary = nlohmann::json::object();
  for (const std::string& policy : report.policies()) {
    std::vector<double> at;
    std::vector<std::vector<double>> sr(report.max_turns);
    for (const PolicyMetrics& m : report.runs) {
      if (m.policy != policy) continue;
      at.push_back(m.average_turns);
      for (int t = 0; t < report.max_turns; ++t) sr[t].push_back(m.success_rate[t]);
    }
    nlohmann::json sr_mean = nlohmann::json::array();
    nlohmann::json sr_std = nlohmann::json::array();
    for (const auto& values : sr) {
      const MeanStd s = Summarize(values);
      sr_mean.push_back(s.mean);
      sr_std.push_back(s.stddev);
    }
    const MeanStd a = Summarize(at);
    summary[policy] = {{"sr_mean", sr_mean},
                       {"sr_std", sr_std},
                       {"at_mean", a.mean},
                       {"at_std", a.stddev},
                       {"seeds", at.size()}};
  }
  j["summary"] = std::move(summary);
  os << j.dump(2) << '\n';
}

}  // namespace cpr
