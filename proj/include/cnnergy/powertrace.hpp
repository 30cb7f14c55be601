/* Copyright 2026 The cnnergy Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cnnergy/error.hpp"
#include "cnnergy/text.hpp"

namespace cnnergy {

struct PowerSample {
  double t = 0.0;
  std::vector<double> channel_watts;
};

struct PowerTrace {
  std::vector<std::string> channel_labels;
  std::vector<PowerSample> samples;

  [[nodiscard]] size_t channels() const { return channel_labels.size(); }
  [[nodiscard]] double t_first() const { return samples.front().t; }
  [[nodiscard]] double t_last() const { return samples.back().t; }
};

enum class RegionLabel { forward, backward, update, load, other };

constexpr std::string_view label_name(RegionLabel l) {
  switch (l) {
    case RegionLabel::forward: return "forward";
    case RegionLabel::backward: return "backward";
    case RegionLabel::update: return "update";
    case RegionLabel::load: return "load";
    case RegionLabel::other: return "other";
  }
  return "other";
}

inline std::optional<RegionLabel> label_from_name(std::string_view s) {
  for (auto l : {RegionLabel::forward, RegionLabel::backward, RegionLabel::update,
                 RegionLabel::load, RegionLabel::other})
    if (label_name(l) == s) return l;
  return std::nullopt;
}

struct Region {
  std::string id;
  RegionLabel label = RegionLabel::other;
  double t_start = 0.0;
  double t_end = 0.0;
};

struct EnergyResult {
  double joules_total = 0.0;
  std::vector<double> joules_per_channel;
  double duration = 0.0;
  double mean_watts = 0.0;
};

// ---- parsing ------------------------------------------------------------

inline PowerTrace parse_trace(std::string_view body) {
  PowerTrace tr;
  bool header = false;
  int n = 0;
  for (auto& raw : text::lines(body)) {
    ++n;
    auto l = text::trim(raw);
    if (l.empty() || l.front() == '#') continue;
    auto cells = text::split(l, ',');
    const std::string at = "line " + std::to_string(n);
    if (!header) {
      if (cells.size() < 2 || cells[0] != "t_s")
        throw Error(Errc::FormatError, at + ": header must be 't_s,<channel>_w,...'");
      for (size_t i = 1; i < cells.size(); ++i) {
        std::string lab = cells[i];
        if (lab.size() > 2 && lab.ends_with("_w")) lab.resize(lab.size() - 2);
        if (lab.empty()) throw Error(Errc::FormatError, at + ": empty channel label");
        tr.channel_labels.push_back(std::move(lab));
      }
      header = true;
      continue;
    }
    if (cells.size() != tr.channels() + 1)
      throw Error(Errc::ChannelCountMismatch, at + ": expected " +
                                                  std::to_string(tr.channels()) +
                                                  " channels, got " +
                                                  std::to_string(cells.size() - 1));
    PowerSample s;
    s.t = text::to_double(cells[0], Errc::FormatError, at);
    for (size_t i = 1; i < cells.size(); ++i) {
      double w = text::to_double(cells[i], Errc::FormatError, at);
      if (w < 0) throw Error(Errc::FormatError, at + ": negative wattage");
      s.channel_watts.push_back(w);
    }
    if (!tr.samples.empty()) {
      const auto& prev = tr.samples.back();
      if (s.t == prev.t && s.channel_watts == prev.channel_watts) continue;  // duplicate row
      if (s.t <= prev.t)
        throw Error(Errc::NonMonotoneTime, at + ": timestamp does not increase");
    }
    tr.samples.push_back(std::move(s));
  }
  if (!header) throw Error(Errc::FormatError, "missing header");
  return tr;
}

inline std::string emit_trace(const PowerTrace& tr) {
  std::ostringstream os;
  os << "t_s";
  for (auto& l : tr.channel_labels) os << ',' << l << "_w";
  os << '\n';
  char buf[64];
  for (auto& s : tr.samples) {
    std::snprintf(buf, sizeof buf, "%.9f", s.t);
    os << buf;
    for (double w : s.channel_watts) {
      std::snprintf(buf, sizeof buf, ",%.6f", w);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

inline std::vector<Region> parse_regions(std::string_view body) {
  auto csv = text::parse_csv(body, Errc::FormatError);
  int ci = csv.column("id"), cl = csv.column("label"), cs = csv.column("t_start_s"),
      ce = csv.column("t_end_s");
  if (ci < 0 || cl < 0 || cs < 0 || ce < 0)
    throw Error(Errc::FormatError, "region header must be id,label,t_start_s,t_end_s");
  std::vector<Region> out;
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string at = "line " + std::to_string(csv.line_no[r]);
    auto lab = label_from_name(row[cl]);
    if (!lab) throw Error(Errc::FormatError, at + ": unknown region label '" + row[cl] + "'");
    Region g{row[ci], *lab, text::to_double(row[cs], Errc::FormatError, at),
             text::to_double(row[ce], Errc::FormatError, at)};
    if (!(g.t_start < g.t_end)) throw Error(Errc::FormatError, at + ": t_start must be < t_end");
    out.push_back(std::move(g));
  }
  return out;
}

// ---- integration --------------------------------------------------------

/// Trapezoidal integral per channel over [t_start, t_end]; the region edges
/// are linearly interpolated between the bracketing samples.
inline EnergyResult integrate(const PowerTrace& tr, const Region& region) {
  if (!(region.t_start < region.t_end))
    throw Error(Errc::InvalidArgument, "region '" + region.id + "': t_start must be < t_end");
  if (tr.samples.empty() || region.t_end <= tr.t_first() || region.t_start >= tr.t_last())
    throw Error(Errc::EmptyRegion, "region '" + region.id + "' does not overlap the trace");
  if (tr.samples.size() < 2 || region.t_start < tr.t_first() || region.t_end > tr.t_last())
    throw Error(Errc::InsufficientSamples,
                "region '" + region.id + "' is not bracketed by samples on both sides");

  const size_t nc = tr.channels();
  const auto& S = tr.samples;
  auto at = [&](size_t hi, double t, size_t c) {  // interpolate in [hi-1, hi]
    const auto& a = S[hi - 1];
    const auto& b = S[hi];
    double f = (t - a.t) / (b.t - a.t);
    return a.channel_watts[c] + (b.channel_watts[c] - a.channel_watts[c]) * f;
  };
  // first sample strictly after t_start; exists because t_start < t_last
  size_t i = std::upper_bound(S.begin(), S.end(), region.t_start,
                              [](double t, const PowerSample& s) { return t < s.t; }) -
             S.begin();
  EnergyResult e;
  e.joules_per_channel.assign(nc, 0.0);
  for (size_t c = 0; c < nc; ++c) {
    double t_prev = region.t_start;
    double v_prev = at(i, region.t_start, c);
    double acc = 0.0;
    size_t j = i;
    for (; j < S.size() && S[j].t < region.t_end; ++j) {
      acc += 0.5 * (v_prev + S[j].channel_watts[c]) * (S[j].t - t_prev);
      t_prev = S[j].t;
      v_prev = S[j].channel_watts[c];
    }
    double v_end = at(j, region.t_end, c);  // j >= 1 and S[j].t >= t_end
    acc += 0.5 * (v_prev + v_end) * (region.t_end - t_prev);
    e.joules_per_channel[c] = acc;
  }
  for (double j : e.joules_per_channel) e.joules_total += j;
  e.duration = region.t_end - region.t_start;
  e.mean_watts = e.joules_total / e.duration;
  return e;
}

/// Homogeneous extrapolation: every GPU in the set draws what the measured one did.
inline EnergyResult scale_energy(const EnergyResult& e, int64_t gpu_count) {
  if (gpu_count < 1) throw Error(Errc::InvalidArgument, "gpu_count must be >= 1");
  EnergyResult r = e;
  const double k = static_cast<double>(gpu_count);
  r.joules_total *= k;
  for (auto& j : r.joules_per_channel) j *= k;
  r.mean_watts *= k;
  return r;
}

/// Heterogeneous aggregation: sum of count_i * e_i. Per-channel sums are kept
/// only when every group reports the same channel layout.
inline EnergyResult scale_energy(const std::vector<std::pair<int64_t, EnergyResult>>& groups) {
  if (groups.empty()) throw Error(Errc::InvalidArgument, "no device groups");
  EnergyResult r;
  bool same_layout = true;
  const size_t nc = groups.front().second.joules_per_channel.size();
  for (auto& [count, e] : groups) {
    if (count < 0) throw Error(Errc::InvalidArgument, "negative device count");
    same_layout = same_layout && e.joules_per_channel.size() == nc;
    r.duration = std::max(r.duration, e.duration);
  }
  if (same_layout) r.joules_per_channel.assign(nc, 0.0);
  for (auto& [count, e] : groups) {
    r.joules_total += static_cast<double>(count) * e.joules_total;
    if (same_layout)
      for (size_t c = 0; c < nc; ++c)
        r.joules_per_channel[c] += static_cast<double>(count) * e.joules_per_channel[c];
  }
  r.mean_watts = r.duration > 0 ? r.joules_total / r.duration : 0.0;
  return r;
}

// ---- synthetic traces ---------------------------------------------------

struct PowerSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  double watts_start = 0.0;
  double watts_end = 0.0;  // linear ramp across the segment
};

struct SyntheticProfile {
  std::vector<PowerSegment> segments;
  std::vector<std::string> channel_labels{"total"};
  std::vector<double> channel_shares{1.0};  // fraction of power on each rail
  double noise_sigma = 0.0;                 // watts, applied to the total
  uint64_t seed = 0;
};

/// Eight rails as wired on the measurement rig: PCIe slot 12 V and 3.3 V plus
/// six external 12 V pins.
inline SyntheticProfile eight_rail_profile(std::vector<PowerSegment> segs) {
  SyntheticProfile p;
  p.segments = std::move(segs);
  p.channel_labels = {"pcie_12v", "pcie_3v3", "ext_12v_1", "ext_12v_2",
                      "ext_12v_3", "ext_12v_4", "ext_12v_5", "ext_12v_6"};
  p.channel_shares = {0.25, 0.03};
  for (int i = 0; i < 6; ++i) p.channel_shares.push_back(0.72 / 6);
  return p;
}

/// Samples the profile on a uniform grid anchored at the first segment, with
/// every segment boundary inserted as an extra sample. Gaps between segments
/// draw 0 W. At a discontinuity the boundary sample carries the spacing-
/// weighted mean of both sides, which keeps the trapezoidal integral of the
/// whole trace equal to the profile's exact integral.
inline PowerTrace generate_synthetic_trace(const SyntheticProfile& prof, double sample_rate) {
  if (!(sample_rate > 0)) throw Error(Errc::InvalidArgument, "sample_rate must be positive");
  if (prof.segments.empty()) throw Error(Errc::InvalidArgument, "profile has no segments");
  if (prof.channel_labels.size() != prof.channel_shares.size() || prof.channel_labels.empty())
    throw Error(Errc::InvalidArgument, "one share per channel label required");
  if (prof.noise_sigma < 0) throw Error(Errc::InvalidArgument, "noise sigma must be >= 0");
  auto segs = prof.segments;
  std::sort(segs.begin(), segs.end(),
            [](const PowerSegment& a, const PowerSegment& b) { return a.t_start < b.t_start; });
  for (size_t i = 0; i < segs.size(); ++i) {
    if (!(segs[i].t_start < segs[i].t_end))
      throw Error(Errc::InvalidArgument, "segment must have t_start < t_end");
    if (segs[i].watts_start < 0 || segs[i].watts_end < 0)
      throw Error(Errc::InvalidArgument, "segment power must be >= 0");
    if (i && segs[i].t_start < segs[i - 1].t_end)
      throw Error(Errc::InvalidArgument, "segments overlap");
  }
  // fill gaps with idle segments so the profile is a contiguous partition
  std::vector<PowerSegment> parts;
  for (auto& s : segs) {
    if (!parts.empty() && parts.back().t_end < s.t_start)
      parts.push_back({parts.back().t_end, s.t_start, 0.0, 0.0});
    parts.push_back(s);
  }
  const double t0 = parts.front().t_start, t1 = parts.back().t_end;

  // (time, is_boundary); near-coincident grid points snap onto boundaries
  std::vector<std::pair<double, bool>> times;
  for (int64_t j = 0;; ++j) {
    double t = t0 + static_cast<double>(j) / sample_rate;
    if (t >= t1) break;
    times.emplace_back(t, j == 0);
  }
  for (auto& p : parts) times.emplace_back(p.t_end, true);
  std::sort(times.begin(), times.end());
  const double eps = 1e-9 / sample_rate;
  std::vector<double> grid;
  bool last_boundary = false;
  for (auto [t, b] : times) {
    if (grid.empty() || t - grid.back() > eps) {
      grid.push_back(t);
      last_boundary = b;
    } else if (b && !last_boundary) {
      grid.back() = t;
      last_boundary = true;
    }
  }

  auto eval = [](const PowerSegment& s, double t) {
    double f = (t - s.t_start) / (s.t_end - s.t_start);
    return s.watts_start + (s.watts_end - s.watts_start) * f;
  };
  std::vector<double> total(grid.size());
  size_t seg = 0;
  for (size_t k = 0; k < grid.size(); ++k) {
    double t = grid[k];
    while (seg + 1 < parts.size() && t > parts[seg].t_end + eps) ++seg;
    const bool boundary = std::abs(t - parts[seg].t_end) <= eps && seg + 1 < parts.size();
    if (boundary) {
      double left = parts[seg].watts_end, right = parts[seg + 1].watts_start;
      double h1 = k ? t - grid[k - 1] : 0.0, h2 = k + 1 < grid.size() ? grid[k + 1] - t : 0.0;
      total[k] = (h1 + h2) > 0 ? (h1 * left + h2 * right) / (h1 + h2) : left;
    } else {
      total[k] = eval(parts[seg], t);
    }
  }
  if (prof.noise_sigma > 0) {
    std::mt19937_64 rng(prof.seed);
    std::normal_distribution<double> noise(0.0, prof.noise_sigma);
    for (auto& w : total) w = std::max(0.0, w + noise(rng));
  }
  PowerTrace tr;
  tr.channel_labels = prof.channel_labels;
  tr.samples.reserve(grid.size());
  for (size_t k = 0; k < grid.size(); ++k) {
    PowerSample s{grid[k], {}};
    for (double share : prof.channel_shares) s.channel_watts.push_back(share * total[k]);
    tr.samples.push_back(std::move(s));
  }
  return tr;
}

/// Per-region energy rows; regions that cannot be integrated produce a row
/// whose joules_total cell is `error:<code>`.
inline text::Table energy_report(const PowerTrace& tr, const std::vector<Region>& regions) {
  text::Table t;
  t.header = {"id", "label", "duration_s", "joules_total", "mean_watts"};
  for (auto& l : tr.channel_labels) t.header.push_back(l + "_j");
  for (auto& r : regions) {
    std::vector<std::string> row{r.id, std::string(label_name(r.label)),
                                 text::fmt6(r.t_end - r.t_start)};
    try {
      auto e = integrate(tr, r);
      row.push_back(text::fmt6(e.joules_total));
      row.push_back(text::fmt6(e.mean_watts));
      for (double j : e.joules_per_channel) row.push_back(text::fmt6(j));
    } catch (const Error& err) {
      row.push_back("error:" + std::string(to_string(err.code())));
      row.resize(t.header.size());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace cnnergy
