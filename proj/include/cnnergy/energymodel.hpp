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
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "cnnergy/costmodel.hpp"
#include "cnnergy/error.hpp"
#include "cnnergy/text.hpp"

namespace cnnergy {

// ---- device profiles ----------------------------------------------------

struct DeviceProfile {
  std::string name;
  std::string model;  // marketing name, informational
  std::string generation;
  int64_t release_year = 0;  // informational, 0 when unknown
  int64_t cores = 0;
  double core_freq_mhz = 0;
  double peak_tflops = 0;
  int64_t dram_bytes = 0;
  double bandwidth = 0;  // bytes/s
  double tdp_w = 0;
};

inline DeviceProfile parse_device_profile(std::string_view body) {
  DeviceProfile d;
  std::set<std::string> got;
  for (auto& [k, v] : text::parse_kv(body, Errc::FormatError)) {
    const std::string at = "device profile key '" + k + "'";
    auto num = [&] { return text::to_double(v, Errc::FormatError, at); };
    auto integer = [&] {
      double x = num();
      if (x != std::floor(x)) throw Error(Errc::FormatError, at + ": expected an integer");
      return static_cast<int64_t>(x);
    };
    if (!got.insert(k).second) throw Error(Errc::FormatError, at + ": repeated");
    if (k == "name") d.name = v;
    else if (k == "model") d.model = v;
    else if (k == "generation") d.generation = v;
    else if (k == "release_year") d.release_year = integer();
    else if (k == "cores") d.cores = integer();
    else if (k == "core_freq_mhz") d.core_freq_mhz = num();
    else if (k == "peak_tflops") d.peak_tflops = num();
    else if (k == "dram_bytes") d.dram_bytes = integer();
    else if (k == "bandwidth_bytes_per_s") d.bandwidth = num();
    else if (k == "tdp_w") d.tdp_w = num();
    else throw Error(Errc::FormatError, at + ": unknown key");
  }
  for (const char* req : {"name", "generation", "cores", "core_freq_mhz", "peak_tflops",
                          "dram_bytes", "bandwidth_bytes_per_s", "tdp_w"})
    if (!got.count(req)) throw Error(Errc::FormatError, std::string("device profile lacks ") + req);
  if (d.cores <= 0 || d.core_freq_mhz <= 0 || d.peak_tflops <= 0 || d.dram_bytes <= 0 ||
      d.bandwidth <= 0 || d.tdp_w <= 0)
    throw Error(Errc::FormatError, "device profile '" + d.name + "': numeric fields must be positive");
  return d;
}

// ---- measurement records ------------------------------------------------

enum class Step { forward, backward };

constexpr std::string_view step_name(Step s) { return s == Step::forward ? "forward" : "backward"; }

inline std::optional<Step> step_from_name(std::string_view s) {
  if (s == "forward") return Step::forward;
  if (s == "backward") return Step::backward;
  return std::nullopt;
}

struct MeasurementRecord {
  std::string device;
  std::string network;
  Step step = Step::forward;
  int64_t gpus = 1;
  int64_t batch = 1;
  double seconds_per_batch = 0;
  double joules_per_batch = 0;  // per measured GPU
};

inline std::vector<MeasurementRecord> parse_measurements(std::string_view body) {
  auto csv = text::parse_csv(body, Errc::FormatError);
  const char* names[] = {"device", "network", "step", "gpus", "batch", "seconds_per_batch",
                         "joules_per_batch"};
  int col[7];
  for (int i = 0; i < 7; ++i)
    if ((col[i] = csv.column(names[i])) < 0)
      throw Error(Errc::FormatError, std::string("measurement CSV lacks column ") + names[i]);
  std::vector<MeasurementRecord> out;
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string at = "line " + std::to_string(csv.line_no[r]);
    auto step = step_from_name(row[col[2]]);
    if (!step) throw Error(Errc::FormatError, at + ": step must be forward or backward");
    MeasurementRecord m{row[col[0]],
                        row[col[1]],
                        *step,
                        text::to_int(row[col[3]], Errc::FormatError, at),
                        text::to_int(row[col[4]], Errc::FormatError, at),
                        text::to_double(row[col[5]], Errc::FormatError, at),
                        text::to_double(row[col[6]], Errc::FormatError, at)};
    if (m.device.empty() || m.network.empty())
      throw Error(Errc::FormatError, at + ": empty device or network");
    if (m.gpus < 1 || m.batch < 1 || m.seconds_per_batch <= 0 || m.joules_per_batch <= 0)
      throw Error(Errc::FormatError, at + ": counts, seconds and joules must be positive");
    out.push_back(std::move(m));
  }
  return out;
}

inline const MeasurementRecord* find_record(const std::vector<MeasurementRecord>& recs,
                                            std::string_view device, std::string_view network,
                                            Step step, int64_t gpus, int64_t batch) {
  for (auto& r : recs)
    if (r.device == device && r.network == network && r.step == step && r.gpus == gpus &&
        r.batch == batch)
      return &r;
  return nullptr;
}

// ---- training plans -----------------------------------------------------

struct TrainingPlan {
  std::string network;
  int64_t batch = 1;
  int64_t iterations = 1;
  int64_t epochs = 1;
};

inline std::vector<TrainingPlan> parse_plans(std::string_view body) {
  auto csv = text::parse_csv(body, Errc::FormatError);
  int cn = csv.column("network"), cb = csv.column("batch"), ci = csv.column("iterations"),
      ce = csv.column("epochs");
  if (cn < 0 || cb < 0 || ci < 0 || ce < 0)
    throw Error(Errc::FormatError, "plan CSV header must be network,batch,iterations,epochs");
  std::vector<TrainingPlan> out;
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string at = "line " + std::to_string(csv.line_no[r]);
    TrainingPlan p{row[cn], text::to_int(row[cb], Errc::FormatError, at),
                   text::to_int(row[ci], Errc::FormatError, at),
                   text::to_int(row[ce], Errc::FormatError, at)};
    if (p.batch < 1 || p.iterations < 1 || p.epochs < 1)
      throw Error(Errc::FormatError, at + ": batch, iterations and epochs must be positive");
    out.push_back(std::move(p));
  }
  return out;
}

inline std::optional<TrainingPlan> find_plan(const std::vector<TrainingPlan>& plans,
                                             std::string_view network, int64_t batch) {
  for (auto& p : plans)
    if (p.network == network && p.batch == batch) return p;
  return std::nullopt;
}

// ---- derived quantities -------------------------------------------------

inline double samples_per_second(int64_t batch, double seconds_per_batch) {
  if (!(seconds_per_batch > 0)) throw Error(Errc::InvalidArgument, "seconds_per_batch must be > 0");
  return static_cast<double>(batch) / seconds_per_batch;
}

inline double whole_training(double per_batch_value, const TrainingPlan& plan) {
  if (plan.iterations < 1) throw Error(Errc::InvalidArgument, "plan needs at least one iteration");
  return per_batch_value * static_cast<double>(plan.iterations);
}

inline int64_t iterations_for(int64_t dataset_samples, int64_t batch, int64_t epochs) {
  if (dataset_samples < 1 || batch < 1 || epochs < 1)
    throw Error(Errc::InvalidArgument, "samples, batch and epochs must be positive");
  return epochs * ((dataset_samples + batch - 1) / batch);
}

// ---- calibration --------------------------------------------------------

enum class Quantity { seconds, joules };

constexpr std::string_view quantity_name(Quantity q) {
  return q == Quantity::seconds ? "seconds" : "joules";
}

inline std::optional<Quantity> quantity_from_name(std::string_view s) {
  if (s == "seconds") return Quantity::seconds;
  if (s == "joules") return Quantity::joules;
  return std::nullopt;
}

struct ScopeKey {
  std::string device;
  std::string network;
  Step step = Step::forward;
  int64_t gpus = 1;

  auto tie() const { return std::tie(device, network, step, gpus); }
  friend bool operator<(const ScopeKey& a, const ScopeKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const ScopeKey& a, const ScopeKey& b) { return a.tie() == b.tie(); }
  [[nodiscard]] std::string str() const {
    return device + "/" + network + "/" + std::string(step_name(step)) + "/" +
           std::to_string(gpus) + "gpu";
  }
};

struct CalibratedModel {
  ScopeKey key;
  Quantity quantity = Quantity::joules;
  double slope = 0;      // per sample
  double intercept = 0;  // per batch
  double r_squared = 0;
  std::vector<double> residuals;  // in input order; not persisted
  int64_t batch_min = 0;
  int64_t batch_max = 0;
  int64_t points = 0;
};

struct CalibrationDiagnostic {
  ScopeKey key;
  std::string kind;  // "skipped" or "poor_fit"
  std::string message;
};

struct CalibrationOptions {
  std::set<int64_t> excluded_gpu_counts{4};  // heterogeneous 4-GPU rows by default
  double poor_fit_r_squared = 0.95;
};

struct CalibrationResult {
  std::vector<CalibratedModel> models;
  std::vector<CalibrationDiagnostic> diagnostics;
  [[nodiscard]] size_t skipped() const {
    return static_cast<size_t>(std::count_if(diagnostics.begin(), diagnostics.end(),
                                             [](auto& d) { return d.kind == "skipped"; }));
  }
};

struct LinearFit {
  double slope = 0, intercept = 0, r_squared = 0;
  std::vector<double> residuals;
};

/// Ordinary least squares y = slope*x + intercept. Needs two distinct x.
inline LinearFit fit_affine(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n != y.size() || n < 2) throw Error(Errc::InsufficientData, "need at least two points");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw Error(Errc::InsufficientData, "need at least two distinct batch sizes");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (size_t i = 0; i < n; ++i) {
    double r = y[i] - (f.slope * x[i] + f.intercept);
    f.residuals.push_back(r);
    ss_res += r * r;
  }
  if (syy == 0) f.r_squared = ss_res <= 1e-24 ? 1.0 : 0.0;
  else f.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return f;
}

inline CalibrationResult calibrate(const std::vector<MeasurementRecord>& recs,
                                   const CalibrationOptions& opt = {}) {
  std::map<ScopeKey, std::vector<const MeasurementRecord*>> groups;
  for (auto& r : recs)
    if (!opt.excluded_gpu_counts.count(r.gpus))
      groups[{r.device, r.network, r.step, r.gpus}].push_back(&r);
  CalibrationResult res;
  for (auto& [key, rows] : groups) {
    std::set<int64_t> distinct;
    for (auto* r : rows) distinct.insert(r->batch);
    if (distinct.size() < 2) {
      res.diagnostics.push_back(
          {key, "skipped", "InsufficientData: only one batch size (" +
                               std::to_string(*distinct.begin()) + ")"});
      continue;
    }
    std::vector<double> x, ys, yj;
    for (auto* r : rows) {
      x.push_back(static_cast<double>(r->batch));
      ys.push_back(r->seconds_per_batch);
      yj.push_back(r->joules_per_batch);
    }
    for (auto q : {Quantity::seconds, Quantity::joules}) {
      auto f = fit_affine(x, q == Quantity::seconds ? ys : yj);
      CalibratedModel m{key, q, f.slope, f.intercept, f.r_squared, f.residuals,
                        *distinct.begin(), *distinct.rbegin(), static_cast<int64_t>(rows.size())};
      if (m.r_squared < opt.poor_fit_r_squared)
        res.diagnostics.push_back({key, "poor_fit", std::string(quantity_name(q)) +
                                                        " fit R^2=" + text::fmt6(m.r_squared)});
      res.models.push_back(std::move(m));
    }
  }
  return res;
}

struct Prediction {
  double value = 0;
  bool extrapolated = false;  // outside [batch_min/2, 2*batch_max]
};

inline Prediction predict(const CalibratedModel& m, int64_t batch) {
  if (batch < 1) throw Error(Errc::InvalidArgument, "batch must be positive");
  const double b = static_cast<double>(batch);
  Prediction p;
  p.value = std::max(0.0, m.slope * b + m.intercept);
  p.extrapolated = b < 0.5 * static_cast<double>(m.batch_min) ||
                   b > 2.0 * static_cast<double>(m.batch_max);
  return p;
}

inline const CalibratedModel* find_model(const std::vector<CalibratedModel>& models,
                                         const ScopeKey& key, Quantity q) {
  for (auto& m : models)
    if (m.key == key && m.quantity == q) return &m;
  return nullptr;
}

/// Model file: one CSV row per fitted (scope, quantity); coefficients are
/// written round-trip exact.
inline std::string emit_models(const std::vector<CalibratedModel>& models) {
  std::ostringstream os;
  os << "device,network,step,gpus,quantity,slope,intercept,r_squared,batch_min,batch_max,points\n";
  char buf[64];
  auto g17 = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (auto& m : models)
    os << m.key.device << ',' << m.key.network << ',' << step_name(m.key.step) << ','
       << m.key.gpus << ',' << quantity_name(m.quantity) << ',' << g17(m.slope) << ','
       << g17(m.intercept) << ',' << g17(m.r_squared) << ',' << m.batch_min << ','
       << m.batch_max << ',' << m.points << '\n';
  return os.str();
}

inline std::vector<CalibratedModel> parse_models(std::string_view body) {
  auto csv = text::parse_csv(body, Errc::FormatError);
  const char* names[] = {"device", "network", "step", "gpus", "quantity", "slope",
                         "intercept", "r_squared", "batch_min", "batch_max", "points"};
  int c[11];
  for (int i = 0; i < 11; ++i)
    if ((c[i] = csv.column(names[i])) < 0)
      throw Error(Errc::FormatError, std::string("model file lacks column ") + names[i]);
  std::vector<CalibratedModel> out;
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string at = "line " + std::to_string(csv.line_no[r]);
    auto step = step_from_name(row[c[2]]);
    auto q = quantity_from_name(row[c[4]]);
    if (!step || !q) throw Error(Errc::FormatError, at + ": bad step or quantity");
    CalibratedModel m;
    m.key = {row[c[0]], row[c[1]], *step, text::to_int(row[c[3]], Errc::FormatError, at)};
    m.quantity = *q;
    m.slope = text::to_double(row[c[5]], Errc::FormatError, at);
    m.intercept = text::to_double(row[c[6]], Errc::FormatError, at);
    m.r_squared = text::to_double(row[c[7]], Errc::FormatError, at);
    m.batch_min = text::to_int(row[c[8]], Errc::FormatError, at);
    m.batch_max = text::to_int(row[c[9]], Errc::FormatError, at);
    m.points = text::to_int(row[c[10]], Errc::FormatError, at);
    out.push_back(std::move(m));
  }
  return out;
}

// ---- optional cross-network model ---------------------------------------

/// value = alpha*(ops*B) + beta*(read_bytes*B) + gamma, fitted across all
/// networks sharing (device, step, gpus). Reported for inspection only.
struct CrossNetworkModel {
  std::string device;
  Step step = Step::forward;
  int64_t gpus = 1;
  Quantity quantity = Quantity::joules;
  double alpha = 0, beta = 0, gamma = 0;
  double r_squared = 0;
  std::vector<double> residuals;
  int64_t points = 0;
};

inline std::vector<CrossNetworkModel> calibrate_cross_network(
    const std::vector<MeasurementRecord>& recs, const std::map<std::string, CostSummary>& costs,
    const CalibrationOptions& opt = {}) {
  std::map<std::tuple<std::string, Step, int64_t>, std::vector<const MeasurementRecord*>> groups;
  for (auto& r : recs)
    if (!opt.excluded_gpu_counts.count(r.gpus) && costs.count(r.network))
      groups[{r.device, r.step, r.gpus}].push_back(&r);
  std::vector<CrossNetworkModel> out;
  for (auto& [key, rows] : groups) {
    if (rows.size() < 4) continue;  // three unknowns, need redundancy
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd ys(n), yj(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& c = costs.at(rows[i]->network);
      const double b = static_cast<double>(rows[i]->batch);
      // scale to Gops / GB to keep the system well conditioned
      A(i, 0) = static_cast<double>(c.total_ops) * b * 1e-9;
      A(i, 1) = static_cast<double>(c.total_read_bytes) * b * 1e-9;
      A(i, 2) = 1.0;
      ys(i) = rows[i]->seconds_per_batch;
      yj(i) = rows[i]->joules_per_batch;
    }
    auto qr = A.colPivHouseholderQr();
    if (qr.rank() < 3) continue;
    for (auto q : {Quantity::seconds, Quantity::joules}) {
      const Eigen::VectorXd& y = q == Quantity::seconds ? ys : yj;
      Eigen::VectorXd coef = qr.solve(y);
      Eigen::VectorXd res = y - A * coef;
      double ss_tot = (y.array() - y.mean()).square().sum();
      CrossNetworkModel m;
      std::tie(m.device, m.step, m.gpus) = key;
      m.quantity = q;
      m.alpha = coef(0) * 1e-9;
      m.beta = coef(1) * 1e-9;
      m.gamma = coef(2);
      m.r_squared = ss_tot > 0 ? std::clamp(1.0 - res.squaredNorm() / ss_tot, 0.0, 1.0) : 1.0;
      m.residuals.assign(res.data(), res.data() + res.size());
      m.points = n;
      out.push_back(std::move(m));
    }
  }
  return out;
}

// ---- efficiency and generation comparison -------------------------------

/// Billions of operations per joule for one forward+backward batch, taking
/// backward work equal to forward work. Energy covers all `gpus` devices.
inline double gflops_per_watt(double ops_per_sample, const MeasurementRecord& fwd,
                              const MeasurementRecord& bwd) {
  if (fwd.step != Step::forward || bwd.step != Step::backward || fwd.device != bwd.device ||
      fwd.network != bwd.network || fwd.gpus != bwd.gpus || fwd.batch != bwd.batch)
    throw Error(Errc::MismatchedRecords,
                "forward/backward records must share device, network, gpus and batch");
  const double work = 2.0 * ops_per_sample * static_cast<double>(fwd.batch);
  const double joules =
      static_cast<double>(fwd.gpus) * (fwd.joules_per_batch + bwd.joules_per_batch);
  return work / joules / 1e9;
}

inline double gflops_per_watt(const CostSummary& s, const MeasurementRecord& fwd,
                              const MeasurementRecord& bwd) {
  return gflops_per_watt(static_cast<double>(s.total_ops), fwd, bwd);
}

struct GapEntry {
  std::string network;
  Step step = Step::forward;
  int64_t gpus = 1;
  int64_t batch = 1;
  double time_pct = 0;    // (reference - candidate) / reference * 100
  double joules_pct = 0;
};

/// Percent improvement of `candidate` over `reference` (e.g. a newer over an
/// older generation) for every shared configuration key.
inline std::vector<GapEntry> generation_gap(const std::vector<MeasurementRecord>& reference,
                                            const std::vector<MeasurementRecord>& candidate) {
  using Key = std::tuple<std::string, Step, int64_t, int64_t>;
  auto index = [](const std::vector<MeasurementRecord>& v) {
    std::map<Key, const MeasurementRecord*> m;
    for (auto& r : v)
      if (!m.emplace(Key{r.network, r.step, r.gpus, r.batch}, &r).second)
        throw Error(Errc::KeyMismatch, "duplicate record for " + r.network);
    return m;
  };
  auto a = index(reference), b = index(candidate);
  if (a.size() != b.size())
    throw Error(Errc::KeyMismatch, "record sets cover different configurations");
  std::vector<GapEntry> out;
  for (auto& [k, ra] : a) {
    auto it = b.find(k);
    if (it == b.end())
      throw Error(Errc::KeyMismatch, "no counterpart for " + std::get<0>(k) + " " +
                                         std::string(step_name(std::get<1>(k))));
    const auto* rb = it->second;
    out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k),
                   (ra->seconds_per_batch - rb->seconds_per_batch) / ra->seconds_per_batch * 100,
                   (ra->joules_per_batch - rb->joules_per_batch) / ra->joules_per_batch * 100});
  }
  return out;
}

}  // namespace cnnergy
