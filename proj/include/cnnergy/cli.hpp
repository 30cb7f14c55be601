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

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cnnergy/arch.hpp"
#include "cnnergy/bundled.hpp"
#include "cnnergy/costmodel.hpp"
#include "cnnergy/energymodel.hpp"
#include "cnnergy/error.hpp"
#include "cnnergy/multigpu.hpp"
#include "cnnergy/powertrace.hpp"
#include "cnnergy/text.hpp"
#include "cnnergy/tuner.hpp"

namespace cnnergy::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kNothingFeasible = 3 };

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

struct Options {
  std::string output;
  std::string format = "csv";

  // analyze
  std::string builtin, arch;
  int64_t element_bytes = 4, batch = 1, classes = 0;
  std::string weights = "physical";

  // integrate
  std::string trace, regions;

  // calibrate / predict / rank / recommend
  std::string measurements, model_in, model_out, plans_file, models_for_rank;
  bool bundled = false, include_4gpu = false;
  std::string device, network, step = "forward";
  int64_t gpus = 1;
  std::string metric = "edp";
  std::vector<int64_t> batches, gpu_counts;
  std::vector<std::string> gpu_sets, device_profiles;
  double update_fraction = 0.0;

  // gen-trace
  std::vector<std::string> segments;
  double rate = 1000.0, noise = 0.0;
  uint64_t seed = 0;
  int rails = 1;

  // recommend
  std::string dataset, family, accuracy_file, accuracy_metric;
  double tolerance = 5.0;
};

inline std::string render(const text::Table& t, const Options& o) {
  return o.format == "table" ? t.pretty() : t.csv();
}

inline std::string i64(int64_t v) { return std::to_string(v); }

inline std::string cmd_analyze(const Options& o) {
  if (o.builtin.empty() == o.arch.empty())
    throw Error(Errc::InvalidArgument, "give exactly one of --builtin or --arch");
  if (o.batch < 1 || o.element_bytes < 1)
    throw Error(Errc::InvalidArgument, "--batch and --element-bytes must be positive");
  NetworkSpec spec;
  if (!o.builtin.empty()) {
    spec = builtin_network(o.builtin, o.classes > 0 ? std::optional<int64_t>(o.classes)
                                                    : std::nullopt);
  } else {
    std::string name = o.arch;
    if (auto s = name.find_last_of('/'); s != std::string::npos) name.erase(0, s + 1);
    if (auto d = name.find('.'); d != std::string::npos) name.resize(d);
    spec = parse_network(read_file(o.arch), name);
  }
  auto mode = o.weights == "literal" ? WeightMode::literal : WeightMode::physical;
  auto shaped = infer_shapes(spec);
  auto cost = network_cost(shaped, o.element_bytes, mode);
  const int64_t B = o.batch;

  text::Table t;
  t.header = {"layer", "kind", "macc", "max_ops", "add_div", "exp_add_div", "mul01",
              "bias_add", "read_bytes", "written_bytes"};
  for (auto& l : cost.per_layer)
    t.rows.push_back({l.name, std::string(kind_name(l.kind)), i64(l.ops.macc * B),
                      i64(l.ops.max_ops * B), i64(l.ops.add_div * B), i64(l.ops.exp_add_div * B),
                      i64(l.ops.mul01 * B), i64(l.ops.bias_add * B), i64(l.data.read_bytes() * B),
                      i64(l.data.written_bytes() * B)});
  const auto bc = batch_cost(cost, B);
  t.rows.push_back({"total", "", i64(cost.ops.macc * B), i64(cost.ops.max_ops * B),
                    i64(cost.ops.add_div * B), i64(cost.ops.exp_add_div * B),
                    i64(cost.ops.mul01 * B), i64(cost.ops.bias_add * B),
                    i64(bc.read_elems * o.element_bytes), i64(bc.written_elems * o.element_bytes)});
  std::string s = render(t, o);
  std::string ctc = cost.read_elems ? text::fmt6(cost.ctc()) : "undefined";
  s += "# network=" + spec.name + " batch=" + i64(B) + " weights=" + o.weights +
       " total_ops=" + i64(bc.ops) + " mops=" + text::fmt6(static_cast<double>(bc.ops) / 1e6) +
       " read_mib=" + text::fmt6(static_cast<double>(bc.read_elems * o.element_bytes) / kMiB) +
       " written_mib=" +
       text::fmt6(static_cast<double>(bc.written_elems * o.element_bytes) / kMiB) +
       " ctc=" + ctc + " parameters=" + i64(cost.parameter_count) + "\n";
  return s;
}

inline std::string cmd_integrate(const Options& o) {
  auto tr = parse_trace(read_file(o.trace));
  auto regions = parse_regions(read_file(o.regions));
  return render(energy_report(tr, regions), o);
}

inline std::vector<MeasurementRecord> load_records(const Options& o) {
  if (o.bundled == !o.measurements.empty())
    throw Error(Errc::InvalidArgument, "give exactly one of --measurements or --bundled");
  return o.bundled ? bundled::measurements() : parse_measurements(read_file(o.measurements));
}

inline std::string cmd_calibrate(const Options& o, std::ostream& err) {
  auto recs = load_records(o);
  CalibrationOptions co;
  if (o.include_4gpu) co.excluded_gpu_counts.clear();
  auto res = calibrate(recs, co);
  if (!o.model_out.empty()) {
    std::ofstream f(o.model_out, std::ios::binary);
    if (!f) throw Error(Errc::IoError, "cannot write '" + o.model_out + "'");
    f << emit_models(res.models);
  }
  text::Table t;
  t.header = {"device", "network", "step", "gpus", "quantity", "slope", "intercept",
              "r_squared", "batch_min", "batch_max", "points"};
  for (auto& m : res.models)
    t.rows.push_back({m.key.device, m.key.network, std::string(step_name(m.key.step)),
                      i64(m.key.gpus), std::string(quantity_name(m.quantity)),
                      text::fmt6(m.slope), text::fmt6(m.intercept), text::fmt6(m.r_squared),
                      i64(m.batch_min), i64(m.batch_max), i64(m.points)});
  std::string s = render(t, o);
  for (auto& d : res.diagnostics) {
    s += "# " + d.kind + " " + d.key.str() + ": " + d.message + "\n";
    err << "calibrate: " << d.kind << " " << d.key.str() << ": " << d.message << "\n";
  }
  s += "# fitted_groups=" + i64(static_cast<int64_t>(res.models.size() / 2)) +
       " skipped_groups=" + i64(static_cast<int64_t>(res.skipped())) + "\n";
  return s;
}

inline std::string cmd_predict(const Options& o, std::ostream& err) {
  auto models = parse_models(read_file(o.model_in));
  auto step = step_from_name(o.step);
  if (!step) throw Error(Errc::InvalidArgument, "--step must be forward or backward");
  ScopeKey key{o.device, o.network, *step, o.gpus};
  auto* ms = find_model(models, key, Quantity::seconds);
  auto* mj = find_model(models, key, Quantity::joules);
  if (!ms && !mj) throw Error(Errc::NoDataForConfig, "no model for " + key.str());
  text::Table t;
  t.header = {"device", "network", "step", "gpus", "batch", "seconds_per_batch",
              "joules_per_batch", "extrapolated"};
  bool extra = false;
  auto cell = [&](const CalibratedModel* m) {
    if (!m) return std::string();
    auto p = predict(*m, o.batch);
    extra = extra || p.extrapolated;
    return text::fmt6(p.value);
  };
  std::string s = cell(ms), j = cell(mj);
  t.rows.push_back({o.device, o.network, o.step, i64(o.gpus), i64(o.batch), s, j,
                    extra ? "yes" : "no"});
  if (extra)
    err << "predict: ExtrapolationWarning: batch " << o.batch << " is outside the fitted range\n";
  return render(t, o);
}

/// Device set used for a given GPU count in the rank grid.
inline GpuSet grid_set(const Options& o, int64_t n) {
  for (auto& spec : o.gpu_sets) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) throw Error(Errc::InvalidArgument, "--gpu-set expects N=dev:c+...");
    if (text::to_int(spec.substr(0, eq), Errc::InvalidArgument, "--gpu-set") != n) continue;
    GpuSet s;
    s.members = parse_members(spec.substr(eq + 1));
    if (s.total() != n) throw Error(Errc::InvalidArgument, "--gpu-set '" + spec + "' does not add up");
    return s;
  }
  if (o.bundled && n == 4) return bundled::four_gpu_rig();
  return homogeneous_set(o.device, n);
}

struct Grid {
  std::vector<ConfigReport> reports;
  std::vector<std::string> networks;
};

inline Grid score_grid(const Options& o, const std::vector<MeasurementRecord>& recs,
                       std::ostream& err) {
  auto plans = o.plans_file.empty() ? bundled::plans() : parse_plans(read_file(o.plans_file));
  std::vector<CalibratedModel> models;
  if (!o.models_for_rank.empty()) models = parse_models(read_file(o.models_for_rank));

  ScoreContext ctx;
  ctx.records = &recs;
  ctx.models = models.empty() ? nullptr : &models;
  ctx.allow_prediction = !models.empty();
  ctx.devices = bundled::devices();
  for (auto& path : o.device_profiles) {
    auto d = parse_device_profile(read_file(path));
    ctx.devices[d.name] = d;
  }
  ctx.networks = bundled::shaped_networks();
  ctx.update_fraction = o.update_fraction;

  std::set<std::string> nets;
  std::set<int64_t> batches(o.batches.begin(), o.batches.end()),
      counts(o.gpu_counts.begin(), o.gpu_counts.end());
  for (auto& r : recs) {
    if (r.device != o.device) continue;
    if (o.network.empty() || r.network == o.network) nets.insert(r.network);
    if (o.batches.empty()) batches.insert(r.batch);
    if (o.gpu_counts.empty()) counts.insert(r.gpus);
  }
  if (!o.network.empty()) nets.insert(o.network);
  if (nets.empty()) throw Error(Errc::NoDataForConfig, "no records for device '" + o.device + "'");

  Grid g;
  for (auto& net : nets) {
    g.networks.push_back(net);
    for (int64_t n : counts)
      for (int64_t b : batches) {
        auto plan = find_plan(plans, net, b);
        if (!plan) {
          err << "rank: no training plan for " << net << " B=" << b << ", skipped\n";
          continue;
        }
        TrainingConfig cfg{net, b, grid_set(o, n), *plan};
        try {
          g.reports.push_back(score(cfg, ctx));
        } catch (const Error& e) {
          if (e.code() != Errc::NoDataForConfig) throw;
          ConfigReport r;
          r.config = cfg;
          r.feasible = false;
          r.reason = "no data";
          g.reports.push_back(r);
        }
      }
  }
  return g;
}

inline std::string cmd_rank(const Options& o, std::ostream& err, int& code) {
  auto metric = metric_from_name(o.metric);
  if (!metric) throw Error(Errc::InvalidArgument, "--metric must be time, energy or edp");
  if (o.device.empty()) throw Error(Errc::InvalidArgument, "--device is required");
  auto recs = load_records(o);
  auto grid = score_grid(o, recs, err);
  std::vector<ConfigReport> ordered;
  size_t empty_networks = 0;
  for (auto& net : grid.networks) {
    std::vector<ConfigReport> mine;
    for (auto& r : grid.reports)
      if (r.config.network == net) mine.push_back(r);
    assign_ranks(mine);
    std::vector<ConfigReport> ranked;
    try {
      ranked = rank(mine, *metric);
    } catch (const Error& e) {
      if (e.code() != Errc::NothingFeasible) throw;
      ++empty_networks;
      err << "rank: nothing feasible for " << net << "\n";
    }
    // rank() copies; recover the positions assigned above
    for (auto& r : ranked)
      for (auto& m : mine)
        if (m.feasible && m.has_totals && m.config.batch == r.config.batch &&
            m.config.gpu_set.label() == r.config.gpu_set.label())
          r = m;
    ordered.insert(ordered.end(), ranked.begin(), ranked.end());
    for (auto& r : mine)
      if (!(r.feasible && r.has_totals)) ordered.push_back(r);
  }
  if (empty_networks == grid.networks.size()) code = kNothingFeasible;
  auto s = render(report_table(ordered), o);
  s += "# device=" + o.device + " metric=" + o.metric + "\n";
  for (auto& net : grid.networks)
    for (auto& r : ordered)
      if (r.config.network == net && r.feasible && r.has_totals) {
        s += "# best " + net + ": " + i64(r.config.gpu_set.total()) + " GPU(s) " +
             r.config.gpu_set.label() + " B=" + i64(r.config.batch) + "\n";
        break;
      }
  return s;
}

inline std::string cmd_gen_trace(const Options& o) {
  std::vector<PowerSegment> segs;
  for (auto& spec : o.segments) {
    auto parts = text::split(spec, ',');
    if (parts.size() != 3 && parts.size() != 4)
      throw Error(Errc::InvalidArgument, "--segment expects t_start,t_end,watts[,watts_end]");
    PowerSegment s;
    s.t_start = text::to_double(parts[0], Errc::InvalidArgument, "--segment");
    s.t_end = text::to_double(parts[1], Errc::InvalidArgument, "--segment");
    s.watts_start = text::to_double(parts[2], Errc::InvalidArgument, "--segment");
    s.watts_end = parts.size() == 4 ? text::to_double(parts[3], Errc::InvalidArgument, "--segment")
                                    : s.watts_start;
    segs.push_back(s);
  }
  SyntheticProfile p;
  if (o.rails == 8) p = eight_rail_profile(segs);
  else if (o.rails == 1) p.segments = segs;
  else throw Error(Errc::InvalidArgument, "--rails must be 1 or 8");
  p.noise_sigma = o.noise;
  p.seed = o.seed;
  return emit_trace(generate_synthetic_trace(p, o.rate));
}

inline std::string cmd_recommend(const Options& o, std::ostream& err) {
  DatasetClass dc;
  NetFamily nf;
  if (o.dataset == "small") dc = DatasetClass::small;
  else if (o.dataset == "large") dc = DatasetClass::large;
  else throw Error(Errc::InvalidArgument, "--dataset must be small or large");
  if (o.family == "plain_conv") nf = NetFamily::plain_conv;
  else if (o.family == "residual") nf = NetFamily::residual;
  else throw Error(Errc::InvalidArgument, "--family must be plain_conv or residual");

  std::vector<AccuracyRecord> acc;
  if (!o.accuracy_file.empty()) acc = parse_accuracy(read_file(o.accuracy_file));
  else if (o.bundled) acc = bundled::accuracy();
  RecommendOptions ro;
  ro.network = o.network;
  ro.metric = o.accuracy_metric;
  ro.tolerance_pct = o.tolerance;
  if (!o.network.empty()) {
    std::vector<AccuracyRecord> mine;
    for (auto& a : acc)
      if (a.network == o.network) mine.push_back(a);
    acc = mine;
  }
  std::vector<ConfigReport> reports;
  if (!o.device.empty()) {
    auto recs = load_records(o);
    reports = score_grid(o, recs, err).reports;
    ro.reports = &reports;
  }
  auto rec = recommend(dc, nf, acc, ro);
  std::string s;
  s += "guideline: " + rec.guideline + "\n";
  s += "advisory: " + rec.advisory + "\n";
  if (!rec.metric_used.empty()) s += "accuracy_metric: " + rec.metric_used + "\n";
  std::string allowed;
  for (auto b : rec.allowed_batches) allowed += (allowed.empty() ? "" : ",") + i64(b);
  s += "allowed_batches: " + (allowed.empty() ? std::string("any") : allowed) + "\n";
  s += "prefer: " + std::string(rec.prefer_largest ? "largest" : "smallest") + " batch\n";
  s += "batch: " + (rec.batch ? i64(*rec.batch) : std::string("unspecified")) + "\n";
  if (rec.config)
    s += "config: " + config_label(rec.config->config) +
         " edp_ks_mj=" + text::fmt6(rec.config->edp * 1e-9) + "\n";
  return s;
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  detail::Options o;
  CLI::App app{"Cost, energy and EDP modelling for CNN training configurations", "cnnergy"};
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();
  app.add_option("-o,--output", o.output, "Write the report to this file instead of stdout");
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "table"}));

  auto* analyze = app.add_subcommand("analyze", "Per-layer operation and data-volume report");
  analyze->fallthrough();
  analyze->add_option("--builtin", o.builtin, "Built-in network")
      ->check(CLI::IsMember(builtin_names()));
  analyze->add_option("--arch", o.arch, "Architecture file");
  analyze->add_option("--batch", o.batch, "Batch size");
  analyze->add_option("--element-bytes", o.element_bytes, "Bytes per tensor element");
  analyze->add_option("--weights", o.weights, "Weight term of the read volume")
      ->check(CLI::IsMember({"physical", "literal"}));
  analyze->add_option("--classes", o.classes, "Override the classifier width of a built-in");

  auto* integ = app.add_subcommand("integrate", "Energy per region of a power trace");
  integ->fallthrough();
  integ->add_option("--trace", o.trace, "Trace CSV")->required();
  integ->add_option("--regions", o.regions, "Region CSV")->required();

  auto add_source = [&](CLI::App* c) {
    c->add_option("--measurements", o.measurements, "Measurement CSV");
    c->add_flag("--bundled", o.bundled, "Use the bundled measurements");
  };

  auto* calib = app.add_subcommand("calibrate", "Fit affine-in-batch time and energy models");
  calib->fallthrough();
  add_source(calib);
  calib->add_option("--model-out", o.model_out, "Write the fitted models here");
  calib->add_flag("--include-4gpu", o.include_4gpu, "Also fit the 4-GPU rows");

  auto* pred = app.add_subcommand("predict", "Evaluate a fitted model");
  pred->fallthrough();
  pred->add_option("--model", o.model_in, "Model file from calibrate")->required();
  pred->add_option("--device", o.device)->required();
  pred->add_option("--network", o.network)->required();
  pred->add_option("--step", o.step)->check(CLI::IsMember({"forward", "backward"}));
  pred->add_option("--gpus", o.gpus);
  pred->add_option("--batch", o.batch)->required();

  auto add_grid = [&](CLI::App* c) {
    c->add_option("--device", o.device, "Device whose measurements drive the grid");
    c->add_option("--network", o.network, "Restrict to one network");
    c->add_option("--batches", o.batches, "Batch sizes (default: those measured)")->delimiter(',');
    c->add_option("--gpus", o.gpu_counts, "GPU counts (default: those measured)")->delimiter(',');
    c->add_option("--gpu-set", o.gpu_sets, "Device mix for a GPU count, e.g. 4=pascal:2+maxwell:2");
    c->add_option("--plans", o.plans_file, "Iterations CSV (default: bundled)");
    c->add_option("--models", o.models_for_rank, "Model file used where records are missing");
    c->add_option("--device-profile", o.device_profiles, "Extra device profile files");
    c->add_option("--update-fraction", o.update_fraction, "Extra share for the weight update");
  };

  auto* rank_cmd = app.add_subcommand("rank", "Score and rank a (batch x GPU) grid");
  rank_cmd->fallthrough();
  add_source(rank_cmd);
  add_grid(rank_cmd);
  rank_cmd->add_option("--metric", o.metric)->check(CLI::IsMember({"time", "energy", "edp"}));

  auto* gen = app.add_subcommand("gen-trace", "Synthesize a power trace");
  gen->fallthrough();
  gen->add_option("--segment", o.segments, "t_start,t_end,watts[,watts_end]; repeatable")
      ->required()
      ->allow_extra_args(false);
  gen->add_option("--rate", o.rate, "Samples per second");
  gen->add_option("--noise", o.noise, "Gaussian noise sigma in watts");
  gen->add_option("--seed", o.seed, "Noise seed");
  gen->add_option("--rails", o.rails, "Channels: 1 or 8");

  auto* recmd = app.add_subcommand("recommend", "Batch-size guideline");
  recmd->fallthrough();
  recmd->add_option("--dataset", o.dataset, "small or large")->required();
  recmd->add_option("--family", o.family, "plain_conv or residual")->required();
  recmd->add_option("--accuracy", o.accuracy_file, "Accuracy CSV");
  recmd->add_option("--metric", o.accuracy_metric, "Accuracy metric to use");
  recmd->add_option("--tolerance", o.tolerance, "Accepted accuracy loss, percent of best");
  add_source(recmd);
  add_grid(recmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "cnnergy: " << e.what() << "\n";
    return kInputError;
  }

  int code = kOk;
  std::string report;
  try {
    if (analyze->parsed()) report = detail::cmd_analyze(o);
    else if (integ->parsed()) report = detail::cmd_integrate(o);
    else if (calib->parsed()) report = detail::cmd_calibrate(o, err);
    else if (pred->parsed()) report = detail::cmd_predict(o, err);
    else if (rank_cmd->parsed()) report = detail::cmd_rank(o, err, code);
    else if (gen->parsed()) report = detail::cmd_gen_trace(o);
    else if (recmd->parsed()) report = detail::cmd_recommend(o, err);
  } catch (const Error& e) {
    err << "cnnergy: " << e.what() << "\n";
    return e.code() == Errc::NothingFeasible ? kNothingFeasible : kInputError;
  }
  if (o.output.empty()) {
    out << report;
  } else {
    std::ofstream f(o.output, std::ios::binary);
    if (!f) {
      err << "cnnergy: cannot write '" << o.output << "'\n";
      return kInputError;
    }
    f << report;
  }
  return code;
}

}  // namespace cnnergy::cli
