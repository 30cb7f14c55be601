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

// Access to the data files compiled into the binary (see cmake/EmbedData.cmake).

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cnnergy/arch.hpp"
#include "cnnergy/bundled_data.hpp"
#include "cnnergy/energymodel.hpp"
#include "cnnergy/error.hpp"
#include "cnnergy/tuner.hpp"

namespace cnnergy::bundled {

inline std::string_view file(std::string_view path) {
  for (auto& [p, body] : files)
    if (p == path) return body;
  throw Error(Errc::IoError, "no bundled file '" + std::string(path) + "'");
}

inline std::vector<MeasurementRecord> measurements() {
  return parse_measurements(file("measurements/per_batch.csv"));
}

inline std::vector<TrainingPlan> plans() { return parse_plans(file("plans/iterations.csv")); }

inline std::map<std::string, DeviceProfile> devices() {
  std::map<std::string, DeviceProfile> out;
  for (auto& [p, body] : files)
    if (p.starts_with("devices/")) {
      auto d = parse_device_profile(body);
      out[d.name] = d;
    }
  return out;
}

inline std::vector<AccuracyRecord> accuracy() {
  auto a = parse_accuracy(file("accuracy/tum_gaid.csv"));
  auto b = parse_accuracy(file("accuracy/imagenet.csv"));
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// The built-in networks, shape-inferred, keyed by name.
inline std::map<std::string, ShapedNetwork> shaped_networks() {
  std::map<std::string, ShapedNetwork> out;
  for (auto& n : builtin_names()) out.emplace(n, infer_shapes(builtin_network(n)));
  return out;
}

/// The measured 4-GPU rig: two Pascal and two Maxwell cards.
inline GpuSet four_gpu_rig() {
  GpuSet s;
  s.members = {{"pascal", 2}, {"maxwell", 2}};
  return s;
}

}  // namespace cnnergy::bundled
