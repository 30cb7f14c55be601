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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cnnergy/arch.hpp"
#include "cnnergy/costmodel.hpp"
#include "cnnergy/energymodel.hpp"
#include "cnnergy/error.hpp"
#include "cnnergy/multigpu.hpp"
#include "cnnergy/text.hpp"

namespace cnnergy {

inline double edp(double total_seconds, double total_joules) {
  if (total_seconds < 0 || total_joules < 0)
    throw Error(Errc::InvalidArgument, "time and energy must be >= 0");
  return total_seconds * total_joules;
}

/// EDP in kiloseconds x megajoules, the unit of the published tables.
inline double edp_ks_mj(double total_seconds, double total_joules) {
  return edp(total_seconds, total_joules) * 1e-9;
}

// ---- memory -------------------------------------------------------------

struct MemoryOptions {
  int64_t element_bytes = 4;
  double overhead_bytes = 1024.0 * 1024.0 * 1024.0;  // context, workspaces
};

struct MemoryEstimate {
  double bytes = 0;
  int64_t activation_elems = 0;  // per sample
  int64_t parameters = 0;
  bool feasible = false;
};

/// Tensors kept for the backward pass: the input and every layer output,
/// except rectifier/dropout outputs which overwrite their input in place.
inline int64_t stored_activation_elems(const ShapedNetwork& net) {
  int64_t n = net.spec.input.elems();
  for (auto& l : net.per_layer)
    if (l.layer.kind != LayerKind::relu && l.layer.kind != LayerKind::dropout) n += l.out.elems();
  return n;
}

inline MemoryEstimate memory_feasible(const ShapedNetwork& net, int64_t batch,
                                      const DeviceProfile& device, const MemoryOptions& opt = {}) {
  if (batch < 1) throw Error(Errc::InvalidArgument, "batch must be >= 1");
  MemoryEstimate m;
  m.activation_elems = stored_activation_elems(net);
  for (auto& l : net.per_layer) m.parameters += layer_parameters(l.layer, l.in);
  const double eb = static_cast<double>(opt.element_bytes);
  // activations twice (forward values kept for backward, plus their
  // gradients), weights once and weight gradients once
  m.bytes = eb * (static_cast<double>(m.activation_elems) * static_cast<double>(batch) * 2.0 +
                  2.0 * static_cast<double>(m.parameters)) +
            opt.overhead_bytes;
  m.feasible = m.bytes <= static_cast<double>(device.dram_bytes);
  return m;
}

// ---- scoring ------------------------------------------------------------

struct TrainingConfig {
  std::string network;
  int64_t batch = 1;
  GpuSet gpu_set;
  TrainingPlan plan;
};

enum class Metric { time, energy, edp };

constexpr std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::time: return "time";
    case Metric::energy: return "energy";
    case Metric::edp: return "edp";
  }
  return "edp";
}

inline std::optional<Metric> metric_from_name(std::string_view s) {
  for (auto m : {Metric::time, Metric::energy, Metric::edp})
    if (metric_name(m) == s) return m;
  return std::nullopt;
}

struct ConfigReport {
  TrainingConfig config;
  bool has_totals = false;  // false for infeasible configs that were not scored
  double per_batch_seconds = 0;
  double per_batch_joules = 0;
  double total_seconds = 0;
  double total_joules = 0;
  double edp = 0;  // joules x seconds
  bool feasible = true;
  std::string reason;  // why infeasible
  std::vector<std::string> warnings;
  bool predicted = false;  // some per-batch value came from a fitted model
  int rank_time = 0;       // 1-based, 0 = unranked
  int rank_energy = 0;
  int rank_edp = 0;

  [[nodiscard]] double value(Metric m) const {
    switch (m) {
      case Metric::time: return total_seconds;
      case Metric::energy: return total_joules;
      case Metric::edp: return edp;
    }
    return edp;
  }
};

struct ScoreContext {
  const std::vector<MeasurementRecord>* records = nullptr;
  const std::vector<CalibratedModel>* models = nullptr;
  bool allow_prediction = true;
  std::map<std::string, DeviceProfile> devices;    // for memory checks
  std::map<std::string, ShapedNetwork> networks;   // for memory checks
  MemoryOptions memory;
  double update_fraction = 0.0;  // e.g. 0.05 to account for the weight update
};

namespace detail {
struct StepValue {
  double seconds = 0, joules = 0;
  bool predicted = false, extrapolated = false;
};

inline std::optional<StepValue> lookup(const ScoreContext& ctx, const std::string& device,
                                       const std::string& network, Step step, int64_t gpus,
                                       int64_t batch) {
  if (ctx.records)
    if (auto* r = find_record(*ctx.records, device, network, step, gpus, batch))
      return StepValue{r->seconds_per_batch, r->joules_per_batch, false, false};
  if (ctx.models && ctx.allow_prediction) {
    ScopeKey key{device, network, step, gpus};
    auto* ms = find_model(*ctx.models, key, Quantity::seconds);
    auto* mj = find_model(*ctx.models, key, Quantity::joules);
    if (ms && mj) {
      auto ps = predict(*ms, batch), pj = predict(*mj, batch);
      return StepValue{ps.value, pj.value, true, ps.extrapolated || pj.extrapolated};
    }
  }
  return std::nullopt;
}
}  // namespace detail

inline std::string config_label(const TrainingConfig& c) {
  return c.network + " B=" + std::to_string(c.batch) + " on " + c.gpu_set.label();
}

inline ConfigReport score(const TrainingConfig& cfg, const ScoreContext& ctx) {
  validate(cfg.gpu_set);
  ConfigReport rep;
  rep.config = cfg;
  const int64_t n = cfg.gpu_set.total();

  if (cfg.batch % n != 0) {
    rep.feasible = false;
    rep.reason = "batch not divisible by GPU count";
  } else {
    const int64_t sub = cfg.batch / n;
    auto net = ctx.networks.find(cfg.network);
    for (auto& m : cfg.gpu_set.members) {
      if (m.count == 0) continue;
      auto dev = ctx.devices.find(m.device);
      if (net == ctx.networks.end() || dev == ctx.devices.end()) {
        rep.warnings.push_back("memory not checked for " + m.device);
        continue;
      }
      auto est = memory_feasible(net->second, sub, dev->second, ctx.memory);
      if (!est.feasible) {
        rep.feasible = false;
        rep.reason = "needs " + text::fmt6(est.bytes / 1e9) + " GB per " + m.device + " (" +
                     text::fmt6(static_cast<double>(dev->second.dram_bytes) / 1e9) + " GB)";
        break;
      }
    }
  }
  if (!rep.feasible) return rep;

  std::vector<double> times;
  std::map<std::string, double> joules;
  for (auto& m : cfg.gpu_set.members) {
    if (m.count == 0) continue;
    auto f = detail::lookup(ctx, m.device, cfg.network, Step::forward, n, cfg.batch);
    auto b = detail::lookup(ctx, m.device, cfg.network, Step::backward, n, cfg.batch);
    if (!f || !b)
      throw Error(Errc::NoDataForConfig, "no measurement or model for " + config_label(cfg));
    rep.predicted = rep.predicted || f->predicted || b->predicted;
    if (f->extrapolated || b->extrapolated)
      rep.warnings.push_back("ExtrapolationWarning: " + m.device + " batch " +
                             std::to_string(cfg.batch) + " outside fitted range");
    times.push_back(f->seconds + b->seconds);
    joules[m.device] = f->joules + b->joules;
  }
  // measured per-batch times already contain synchronisation, so no extra
  // communication term here; the slowest member gates the step
  const double adj = 1.0 + ctx.update_fraction;
  rep.per_batch_seconds = hetero_step_time(times, 0.0).step_time * adj;
  rep.per_batch_joules = set_energy(joules, cfg.gpu_set) * adj;
  rep.total_seconds = whole_training(rep.per_batch_seconds, cfg.plan);
  rep.total_joules = whole_training(rep.per_batch_joules, cfg.plan);
  rep.edp = rep.total_seconds * rep.total_joules;
  rep.has_totals = true;
  return rep;
}

// ---- ranking ------------------------------------------------------------

namespace detail {
inline bool rank_less(const ConfigReport& a, const ConfigReport& b, Metric m) {
  double va = a.value(m), vb = b.value(m);
  if (va != vb) return va < vb;
  if (a.config.batch != b.config.batch) return a.config.batch < b.config.batch;
  int64_t ga = a.config.gpu_set.total(), gb = b.config.gpu_set.total();
  if (ga != gb) return ga < gb;
  if (a.config.network != b.config.network) return a.config.network < b.config.network;
  return a.config.gpu_set.label() < b.config.gpu_set.label();
}
}  // namespace detail

/// Feasible reports in ascending metric order.
inline std::vector<ConfigReport> rank(const std::vector<ConfigReport>& reports, Metric m) {
  std::vector<ConfigReport> out;
  for (auto& r : reports)
    if (r.feasible && r.has_totals) out.push_back(r);
  if (out.empty()) throw Error(Errc::NothingFeasible, "no feasible configuration to rank");
  std::sort(out.begin(), out.end(),
            [m](const ConfigReport& a, const ConfigReport& b) { return detail::rank_less(a, b, m); });
  return out;
}

/// Fill the per-metric rank positions of every feasible report.
inline void assign_ranks(std::vector<ConfigReport>& reports) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < reports.size(); ++i)
    if (reports[i].feasible && reports[i].has_totals) idx.push_back(i);
  for (auto m : {Metric::time, Metric::energy, Metric::edp}) {
    auto order = idx;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return detail::rank_less(reports[a], reports[b], m);
    });
    for (size_t p = 0; p < order.size(); ++p) {
      auto& r = reports[order[p]];
      int pos = static_cast<int>(p + 1);
      (m == Metric::time ? r.rank_time : m == Metric::energy ? r.rank_energy : r.rank_edp) = pos;
    }
  }
}

inline text::Table report_table(const std::vector<ConfigReport>& reports) {
  text::Table t;
  t.header = {"network", "gpus", "devices", "batch", "feasible", "seconds_per_batch",
              "joules_per_batch", "kiloseconds", "megajoules", "edp_ks_mj", "rank_time",
              "rank_energy", "rank_edp", "note"};
  for (auto& r : reports) {
    std::string note = r.reason;
    if (r.predicted) note += std::string(note.empty() ? "" : "; ") + "predicted";
    for (auto& w : r.warnings) note += std::string(note.empty() ? "" : "; ") + w;
    std::replace(note.begin(), note.end(), ',', ';');
    auto num = [&](double v) { return r.has_totals ? text::fmt6(v) : std::string(); };
    auto pos = [](int p) { return p ? std::to_string(p) : std::string(); };
    t.rows.push_back({r.config.network, std::to_string(r.config.gpu_set.total()),
                      r.config.gpu_set.label(), std::to_string(r.config.batch),
                      r.feasible ? "yes" : "no", num(r.per_batch_seconds),
                      num(r.per_batch_joules), num(r.total_seconds / 1e3),
                      num(r.total_joules / 1e6), num(r.edp * 1e-9), pos(r.rank_time),
                      pos(r.rank_energy), pos(r.rank_edp), note});
  }
  return t;
}

// ---- recommendation -----------------------------------------------------

struct AccuracyRecord {
  std::string network;
  int64_t batch = 1;
  std::string metric;
  double value = 0;  // percent
};

inline std::vector<AccuracyRecord> parse_accuracy(std::string_view body) {
  auto csv = text::parse_csv(body, Errc::FormatError);
  int cn = csv.column("network"), cb = csv.column("batch"), cm = csv.column("metric"),
      cv = csv.column("value");
  if (cn < 0 || cb < 0 || cm < 0 || cv < 0)
    throw Error(Errc::FormatError, "accuracy CSV header must be network,batch,metric,value");
  std::vector<AccuracyRecord> out;
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string at = "line " + std::to_string(csv.line_no[r]);
    AccuracyRecord a{row[cn], text::to_int(row[cb], Errc::FormatError, at), row[cm],
                     text::to_double(row[cv], Errc::FormatError, at)};
    if (a.value < 0 || a.value > 100 || a.batch < 1)
      throw Error(Errc::FormatError, at + ": accuracy must be in [0,100] and batch positive");
    out.push_back(std::move(a));
  }
  return out;
}

enum class DatasetClass { small, large };
enum class NetFamily { plain_conv, residual };

struct RecommendOptions {
  std::string network;          // selects accuracy rows; may be empty if only one network
  std::string metric;           // empty: top1, then weighted_average, then first found
  double tolerance_pct = 5.0;   // relative to the best accuracy
  const std::vector<ConfigReport>* reports = nullptr;  // EDP tie-break among qualifiers
};

struct Recommendation {
  std::string guideline;
  std::string advisory;
  bool prefer_largest = true;
  std::vector<int64_t> allowed_batches;  // ascending; empty when unconstrained
  std::optional<int64_t> batch;
  std::optional<ConfigReport> config;    // best-EDP qualifying report, if any
  std::string metric_used;
};

inline Recommendation recommend(DatasetClass dataset, NetFamily family,
                                const std::vector<AccuracyRecord>& accuracy = {},
                                const RecommendOptions& opt = {}) {
  Recommendation rec;
  if (dataset == DatasetClass::large) {
    rec.prefer_largest = true;
    rec.guideline =
        "Large dataset: train with the largest batch that fits in device memory; it is the "
        "fastest and most energy-efficient choice and does not cost accuracy.";
  } else if (family == NetFamily::plain_conv) {
    rec.prefer_largest = true;
    rec.guideline =
        "Small dataset, plain convolutional network: large batches are acceptable and save "
        "time and energy at a small accuracy cost.";
  } else {
    rec.prefer_largest = false;
    rec.guideline =
        "Small dataset, residual network: prefer the smallest batch; it trains slower and "
        "uses more energy, but accuracy degrades markedly with larger batches.";
  }
  rec.advisory =
      "Two GPUs usually pay off. Larger sets, especially mixing device generations, need "
      "case-by-case evaluation: the slowest device gates every step and gradient exchange "
      "can erase the gain.";

  // accuracy filter
  std::vector<const AccuracyRecord*> rows;
  std::set<std::string> nets, metrics;
  for (auto& a : accuracy)
    if (opt.network.empty() || a.network == opt.network) nets.insert(a.network);
  if (nets.size() > 1)
    throw Error(Errc::InvalidArgument, "accuracy rows cover several networks; choose one");
  for (auto& a : accuracy)
    if (nets.count(a.network)) metrics.insert(a.metric);
  std::string metric = opt.metric;
  if (metric.empty() && !metrics.empty()) {
    if (metrics.count("top1")) metric = "top1";
    else if (metrics.count("weighted_average")) metric = "weighted_average";
    else metric = *metrics.begin();
  }
  for (auto& a : accuracy)
    if (nets.count(a.network) && a.metric == metric) rows.push_back(&a);
  rec.metric_used = rows.empty() ? "" : metric;

  std::set<int64_t> allowed;
  if (!rows.empty()) {
    double best = 0;
    for (auto* a : rows) best = std::max(best, a->value);
    const double floor = best * (1.0 - opt.tolerance_pct / 100.0);
    for (auto* a : rows)
      if (a->value >= floor - 1e-12) allowed.insert(a->batch);
  }
  rec.allowed_batches.assign(allowed.begin(), allowed.end());

  if (opt.reports) {
    std::vector<ConfigReport> pool;
    for (auto& r : *opt.reports)
      if (r.feasible && r.has_totals && (allowed.empty() || allowed.count(r.config.batch)) &&
          (opt.network.empty() || r.config.network == opt.network))
        pool.push_back(r);
    if (!pool.empty()) {
      if (!rows.empty()) {
        // accuracy already filtered the batches: EDP decides
        rec.config = rank(pool, Metric::edp).front();
      } else {
        // no accuracy data: the rule picks the batch, EDP picks the device set
        int64_t target = pool.front().config.batch;
        for (auto& r : pool)
          target = rec.prefer_largest ? std::max(target, r.config.batch)
                                      : std::min(target, r.config.batch);
        std::vector<ConfigReport> at;
        for (auto& r : pool)
          if (r.config.batch == target) at.push_back(r);
        rec.config = rank(at, Metric::edp).front();
      }
      rec.batch = rec.config->config.batch;
      return rec;
    }
  }
  if (!allowed.empty()) rec.batch = rec.prefer_largest ? *allowed.rbegin() : *allowed.begin();
  return rec;
}

}  // namespace cnnergy
