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
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cnnergy/costmodel.hpp"
#include "cnnergy/error.hpp"
#include "cnnergy/text.hpp"

namespace cnnergy {

struct GpuMember {
  std::string device;
  int64_t count = 1;
  friend bool operator==(const GpuMember&, const GpuMember&) = default;
};

struct GpuSet {
  std::vector<GpuMember> members;
  double link_bandwidth = 15.75e9;  // bytes/s, PCIe 3.0 x16
  double link_latency = 5e-6;       // seconds per package hop

  [[nodiscard]] int64_t total() const {
    int64_t n = 0;
    for (auto& m : members) n += m.count;
    return n;
  }
  [[nodiscard]] bool heterogeneous() const {
    int distinct = 0;
    for (auto& m : members) distinct += m.count > 0;
    return distinct > 1;
  }
  /// "pascal:2+maxwell:2"
  [[nodiscard]] std::string label() const {
    std::string s;
    for (auto& m : members) {
      if (m.count == 0) continue;
      if (!s.empty()) s += '+';
      s += m.device + ":" + std::to_string(m.count);
    }
    return s;
  }
};

inline GpuSet homogeneous_set(std::string device, int64_t count) {
  GpuSet s;
  s.members.push_back({std::move(device), count});
  return s;
}

inline void validate(const GpuSet& s) {
  if (s.total() < 1) throw Error(Errc::InvalidArgument, "GPU set needs at least one device");
  for (auto& m : s.members)
    if (m.count < 0 || m.device.empty())
      throw Error(Errc::InvalidArgument, "GPU set member needs a device and count >= 0");
  if (!(s.link_bandwidth > 0)) throw Error(Errc::InvalidArgument, "link bandwidth must be > 0");
  if (s.link_latency < 0) throw Error(Errc::InvalidArgument, "link latency must be >= 0");
}

/// "pascal:2,maxwell:2" (also accepts '+' as separator); count defaults to 1.
inline std::vector<GpuMember> parse_members(std::string_view spec) {
  std::string norm(spec);
  std::replace(norm.begin(), norm.end(), '+', ',');
  std::vector<GpuMember> out;
  for (auto& part : text::split(norm, ',')) {
    if (part.empty()) continue;
    GpuMember m;
    auto colon = part.find(':');
    m.device = std::string(text::trim(part.substr(0, colon)));
    if (colon != std::string::npos)
      m.count = text::to_int(part.substr(colon + 1), Errc::FormatError, "member '" + part + "'");
    if (m.device.empty() || m.count < 0)
      throw Error(Errc::FormatError, "bad GPU set member '" + part + "'");
    out.push_back(std::move(m));
  }
  return out;
}

/// key=value file: repeated `member=<device>:<count>`, optional
/// `link_bandwidth_bytes_per_s` and `link_latency_s`.
inline GpuSet parse_gpu_set(std::string_view body) {
  GpuSet s;
  for (auto& [k, v] : text::parse_kv(body, Errc::FormatError)) {
    if (k == "member") {
      for (auto& m : parse_members(v)) s.members.push_back(m);
    } else if (k == "link_bandwidth_bytes_per_s") {
      s.link_bandwidth = text::to_double(v, Errc::FormatError, k);
    } else if (k == "link_latency_s") {
      s.link_latency = text::to_double(v, Errc::FormatError, k);
    } else {
      throw Error(Errc::FormatError, "unknown GPU set key '" + k + "'");
    }
  }
  validate(s);
  return s;
}

inline int64_t split_batch(int64_t batch, int64_t n_gpus) {
  if (n_gpus < 1) throw Error(Errc::InvalidArgument, "n_gpus must be >= 1");
  if (batch < 1) throw Error(Errc::InvalidArgument, "batch must be >= 1");
  if (batch % n_gpus != 0)
    throw Error(Errc::IndivisibleBatch, std::to_string(n_gpus) + " GPUs do not divide batch " +
                                            std::to_string(batch));
  return batch / n_gpus;
}

/// Gradient volume exchanged per step: one value per trainable parameter.
inline double gradient_bytes(const CostSummary& s) {
  return static_cast<double>(s.parameter_count) * static_cast<double>(s.element_bytes);
}

/// Ring all-reduce: reduce-scatter plus all-gather, each n-1 hops of 1/n of
/// the payload.
inline double ring_allreduce_time(double bytes, int64_t n_gpus, const GpuSet& set) {
  if (bytes < 0) throw Error(Errc::InvalidArgument, "gradient bytes must be >= 0");
  if (n_gpus < 1) throw Error(Errc::InvalidArgument, "n_gpus must be >= 1");
  if (!(set.link_bandwidth > 0)) throw Error(Errc::InvalidArgument, "link bandwidth must be > 0");
  if (n_gpus == 1) return 0.0;
  const double n = static_cast<double>(n_gpus);
  return 2.0 * (n - 1) / n * bytes / set.link_bandwidth + 2.0 * (n - 1) * set.link_latency;
}

/// How much of the all-reduce hides behind computation. Networks with a low
/// computation-to-communication ratio cannot hide it.
struct OverlapPolicy {
  double ctc_threshold = 15.0;
  double omega_high = 1.0;  // ctc >= threshold
  double omega_low = 0.5;
};

inline double overlap_for(double ctc, const OverlapPolicy& p = {}) {
  return ctc >= p.ctc_threshold ? p.omega_high : p.omega_low;
}

struct StepEstimate {
  std::vector<double> compute_time;
  double comm_time = 0;
  double step_time = 0;
  double energy_joules = 0;
};

inline StepEstimate hetero_step_time(const std::vector<double>& compute, double comm_time,
                                     double omega = 1.0) {
  if (compute.empty()) throw Error(Errc::InvalidArgument, "need at least one compute estimate");
  if (omega < 0 || omega > 1) throw Error(Errc::InvalidArgument, "overlap must be in [0,1]");
  if (comm_time < 0) throw Error(Errc::InvalidArgument, "comm time must be >= 0");
  for (double c : compute)
    if (c < 0) throw Error(Errc::InvalidArgument, "compute time must be >= 0");
  StepEstimate e;
  e.compute_time = compute;
  e.comm_time = comm_time;
  e.step_time = *std::max_element(compute.begin(), compute.end()) + (1.0 - omega) * comm_time;
  return e;
}

/// Sum of count_i * joules_i over the set's members.
inline double set_energy(const std::map<std::string, double>& joules_per_device,
                         const GpuSet& set) {
  double total = 0;
  for (auto& m : set.members) {
    if (m.count == 0) continue;
    auto it = joules_per_device.find(m.device);
    if (it == joules_per_device.end())
      throw Error(Errc::MissingDevice, "no energy value for device '" + m.device + "'");
    total += static_cast<double>(m.count) * it->second;
  }
  return total;
}

}  // namespace cnnergy
