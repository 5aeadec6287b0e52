// Copyright 2026 The FairDraw Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fairdraw/error.hpp"
#include "fairdraw/modular_draw.hpp"
#include "fairdraw/transcript.hpp"

namespace fairdraw {

namespace detail {

inline constexpr double kGammaTolerance = 1e-10;
inline constexpr int kGammaMaxIterations = 100000;

// Lower regularized gamma P(a, x) by its power series; converges fast for
// x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kGammaMaxIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kGammaTolerance) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma Q(a, x) by modified Lentz evaluation of the
// continued fraction; used for x >= a + 1.
inline double gamma_q_continued_fraction(double a, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kGammaTolerance) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
inline double regularized_gamma_q(double a, double x) {
  FAIRDRAW_ENFORCE(a > 0.0 && x >= 0.0 && std::isfinite(x) && std::isfinite(a),
                   ErrorCode::kDomain, "regularized_gamma_q needs a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  double q = x < a + 1.0 ? 1.0 - detail::gamma_p_series(a, x)
                         : detail::gamma_q_continued_fraction(a, x);
  if (q < 0.0) q = 0.0;
  if (q > 1.0) q = 1.0;
  return q;
}

/// Upper tail of the chi-square distribution.
inline double chi_square_p_value(double statistic, std::uint64_t dof) {
  FAIRDRAW_ENFORCE(dof >= 1, ErrorCode::kDomain, "dof must be >= 1");
  return regularized_gamma_q(static_cast<double>(dof) / 2.0, statistic / 2.0);
}

struct UniformitySummary {
  std::uint64_t bins = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
  double statistic = 0.0;
  std::uint64_t dof = 0;
  double p_value = 1.0;
  // Set when the expected count per bin is below 5.
  std::optional<std::string> warning;
};

inline UniformitySummary chi_square_uniformity(
    std::span<const std::uint64_t> counts) {
  FAIRDRAW_ENFORCE(counts.size() >= 2, ErrorCode::kDomain,
                   "need at least 2 bins");
  UniformitySummary s;
  s.bins = counts.size();
  s.counts.assign(counts.begin(), counts.end());
  for (auto c : counts) s.total += c;
  FAIRDRAW_ENFORCE(s.total > 0, ErrorCode::kDomain, "no observations");

  const double expected =
      static_cast<double>(s.total) / static_cast<double>(s.bins);
  double stat = 0.0;
  for (auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    stat += diff * diff / expected;
  }
  s.statistic = stat;
  s.dof = s.bins - 1;
  s.p_value = chi_square_p_value(stat, s.dof);
  if (expected < 5.0) {
    s.warning = "expected count per bin " + std::to_string(expected) +
                " is below 5; chi-square approximation is unreliable";
  }
  return s;
}

/// Buckets outcomes into `bins` equal-width intervals of [0, m).
inline UniformitySummary audit_outcome_values(
    std::span<const ContributionValue> outcomes, std::uint64_t bins) {
  FAIRDRAW_ENFORCE(bins >= 2, ErrorCode::kDomain, "need at least 2 bins");
  FAIRDRAW_ENFORCE(!outcomes.empty(), ErrorCode::kDomain, "no outcomes");
  const Modulus m = outcomes.front().modulus();
  FAIRDRAW_ENFORCE(m.value() % bins == 0, ErrorCode::kDomain,
                   "bins (" + std::to_string(bins) +
                       ") must divide the modulus (" +
                       std::to_string(m.value()) + ")");
  const std::uint64_t width = m.value() / bins;
  std::vector<std::uint64_t> counts(bins, 0);
  for (const auto& o : outcomes) {
    FAIRDRAW_ENFORCE(o.modulus() == m, ErrorCode::kDomain,
                     "outcomes have mixed moduli");
    ++counts[o.value() / width];
  }
  return chi_square_uniformity(counts);
}

inline UniformitySummary audit_outcomes(std::span<const Transcript> transcripts,
                                        std::uint64_t bins) {
  std::vector<ContributionValue> outcomes;
  outcomes.reserve(transcripts.size());
  for (const auto& t : transcripts) {
    const auto& st = t.state();
    FAIRDRAW_ENFORCE(st && st->phase == Phase::kComplete, ErrorCode::kDomain,
                     "audit needs completed ceremonies only");
    outcomes.push_back(*st->outcome);
  }
  return audit_outcome_values(outcomes, bins);
}

inline nlohmann::ordered_json summary_to_json(const UniformitySummary& s) {
  nlohmann::ordered_json j;
  j["bins"] = s.bins;
  j["counts"] = s.counts;
  j["total"] = s.total;
  j["statistic"] = s.statistic;
  j["dof"] = s.dof;
  j["p_value"] = s.p_value;
  j["warning"] =
      s.warning ? nlohmann::ordered_json(*s.warning) : nlohmann::ordered_json();
  return j;
}

}  // namespace fairdraw
