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

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>

#include "cnnergy/bundled.hpp"
#include "cnnergy/tuner.hpp"

using namespace cnnergy;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::IoError;
}

struct Bundle {
  std::vector<MeasurementRecord> recs = bundled::measurements();
  std::vector<TrainingPlan> plans = bundled::plans();
  ScoreContext ctx;
  Bundle() {
    ctx.records = &recs;
    ctx.devices = bundled::devices();
    ctx.networks = bundled::shaped_networks();
  }
  GpuSet set_for(const std::string& dev, int64_t n) const {
    return n == 4 ? bundled::four_gpu_rig() : homogeneous_set(dev, n);
  }
  std::vector<ConfigReport> grid(const std::string& dev, const std::string& net) const {
    std::vector<ConfigReport> out;
    for (int64_t n : {1, 2, 4})
      for (int64_t b : {64, 128, 256})
        out.push_back(score({net, b, set_for(dev, n), *find_plan(plans, net, b)}, ctx));
    return out;
  }
};

}  // namespace

TEST(Edp, Examples) {
  EXPECT_NEAR(edp(5.8e3, 0.77e6) * 1e-9, 4.466, 1e-9);
  EXPECT_NEAR(edp_ks_mj(5.8e3, 0.77e6), 4.5, 0.05);
  EXPECT_EQ(edp(0, 123), 0);
  EXPECT_NEAR(edp_ks_mj(44.1e3, 19.40e6), 855.5, 0.05);
  EXPECT_THROW(edp(-1, 1), Error);
}

TEST(Memory, ResNetImAtTheDeviceLimit) {
  auto dev = bundled::devices().at("pascal");
  auto net = infer_shapes(builtin_network("resnet_im"));
  auto big = memory_feasible(net, 256, dev);
  auto ok = memory_feasible(net, 128, dev);
  EXPECT_FALSE(big.feasible);
  EXPECT_TRUE(ok.feasible);
  EXPECT_GT(big.bytes, static_cast<double>(dev.dram_bytes));
  EXPECT_LT(ok.bytes, static_cast<double>(dev.dram_bytes));
}

TEST(Memory, OtherBuiltinsFitAtLargestBatch) {
  auto dev = bundled::devices().at("maxwell");
  for (auto n : {"two_d_cnn", "resnet_gait", "caffenet"})
    EXPECT_TRUE(memory_feasible(infer_shapes(builtin_network(n)), 256, dev).feasible) << n;
}

TEST(Memory, TinyNetwork) {
  auto dev = bundled::devices().at("pascal");
  auto tiny = infer_shapes(parse_network("input 4 4 1\nconv c filters=2 k=3\nfc f units=2"));
  auto m = memory_feasible(tiny, 1, dev);
  EXPECT_TRUE(m.feasible);
  EXPECT_LT(m.bytes, 0.1 * static_cast<double>(dev.dram_bytes));
}

TEST(Score, ResNetPascalOneGpu256) {
  Bundle b;
  auto r = score({"resnet_gait", 256, homogeneous_set("pascal", 1),
                  *find_plan(b.plans, "resnet_gait", 256)},
                 b.ctx);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.total_seconds / 1e3, 5.8, 0.05);
  EXPECT_NEAR(r.total_joules / 1e6, 0.77, 0.005);
  EXPECT_NEAR(r.edp * 1e-9, 4.5, 0.05);
  EXPECT_EQ(r.edp, r.total_seconds * r.total_joules);
}

TEST(Score, ReportsAreSelfConsistent) {
  Bundle b;
  for (auto dev : {"pascal", "maxwell"})
    for (auto& net : builtin_names())
      for (auto& r : b.grid(dev, net)) {
        if (!r.has_totals) continue;
        EXPECT_EQ(r.edp, r.total_seconds * r.total_joules);
        EXPECT_EQ(r.total_seconds,
                  r.per_batch_seconds * static_cast<double>(r.config.plan.iterations));
      }
}

TEST(Score, InfeasibleConfigIsNotRanked) {
  Bundle b;
  auto r = score({"resnet_im", 256, homogeneous_set("pascal", 1),
                  *find_plan(b.plans, "resnet_im", 256)},
                 b.ctx);
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(r.reason.empty());
  std::vector<ConfigReport> v{r};
  EXPECT_EQ(code_of([&] { rank(v, Metric::edp); }), Errc::NothingFeasible);
  assign_ranks(v);
  EXPECT_EQ(v[0].rank_edp, 0);
  auto indiv = score({"resnet_gait", 64, homogeneous_set("pascal", 3),
                      *find_plan(b.plans, "resnet_gait", 64)},
                     b.ctx);
  EXPECT_FALSE(indiv.feasible);
}

TEST(Score, PredictionPathSurfacesExtrapolation) {
  Bundle b;
  auto models = calibrate(b.recs).models;
  b.ctx.models = &models;
  TrainingPlan plan{"two_d_cnn", 1024, 4523, 20};
  auto r = score({"two_d_cnn", 1024, homogeneous_set("pascal", 1), plan}, b.ctx);
  ASSERT_TRUE(r.has_totals);
  EXPECT_TRUE(r.predicted);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings[0].find("ExtrapolationWarning"), std::string::npos);
  b.ctx.allow_prediction = false;
  EXPECT_EQ(code_of([&] { score({"two_d_cnn", 1024, homogeneous_set("pascal", 1), plan}, b.ctx); }),
            Errc::NoDataForConfig);
}

TEST(Score, UpdateAdjustment) {
  Bundle b;
  TrainingConfig c{"caffenet", 128, homogeneous_set("maxwell", 2),
                   *find_plan(b.plans, "caffenet", 128)};
  auto base = score(c, b.ctx);
  b.ctx.update_fraction = 0.05;
  auto adj = score(c, b.ctx);
  EXPECT_NEAR(adj.total_seconds, 1.05 * base.total_seconds, 1e-9 * base.total_seconds);
  EXPECT_NEAR(adj.total_joules, 1.05 * base.total_joules, 1e-9 * base.total_joules);
}

TEST(Rank, PublishedEdpWinners) {
  Bundle b;
  auto best = [&](const char* dev, const char* net) {
    auto w = rank(b.grid(dev, net), Metric::edp).front();
    return std::make_pair(w.config.gpu_set.total(), w.config.batch);
  };
  EXPECT_EQ(best("pascal", "resnet_gait"), std::make_pair(int64_t{1}, int64_t{256}));
  EXPECT_EQ(best("maxwell", "resnet_gait"), std::make_pair(int64_t{2}, int64_t{256}));
}

TEST(Rank, TieBreakAndPermutationInvariance) {
  auto mk = [](int64_t b, int64_t g, double s, double j) {
    ConfigReport r;
    r.config.network = "n";
    r.config.batch = b;
    r.config.gpu_set = homogeneous_set("d", g);
    r.total_seconds = s;
    r.total_joules = j;
    r.edp = s * j;
    r.has_totals = true;
    return r;
  };
  std::vector<ConfigReport> v{mk(256, 2, 1, 1), mk(128, 2, 1, 1), mk(128, 1, 1, 1),
                              mk(64, 4, 2, 2)};
  auto r = rank(v, Metric::edp);
  EXPECT_EQ(r[0].config.batch, 128);
  EXPECT_EQ(r[0].config.gpu_set.total(), 1);
  EXPECT_EQ(r[1].config.gpu_set.total(), 2);
  EXPECT_EQ(r[2].config.batch, 256);
  std::mt19937 rng(10);
  for (int i = 0; i < 50; ++i) {
    std::shuffle(v.begin(), v.end(), rng);
    auto again = rank(v, Metric::edp);
    for (size_t k = 0; k < r.size(); ++k) {
      EXPECT_EQ(again[k].config.batch, r[k].config.batch);
      EXPECT_EQ(again[k].config.gpu_set.total(), r[k].config.gpu_set.total());
    }
  }
}

TEST(Rank, ArgminInvariantUnderEnergyScaling) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> s(1, 1e5), j(1, 1e8), k(1e-3, 1e3);
  std::uniform_int_distribution<int> n(1, 12);
  for (int t = 0; t < 1000; ++t) {
    std::vector<ConfigReport> v;
    int m = n(rng);
    for (int i = 0; i < m; ++i) {
      ConfigReport r;
      r.config.network = "n";
      r.config.batch = 64 << (i % 3);
      r.config.gpu_set = homogeneous_set("d", 1 + i / 3);
      r.total_seconds = s(rng);
      r.total_joules = j(rng);
      r.edp = r.total_seconds * r.total_joules;
      r.has_totals = true;
      v.push_back(r);
    }
    auto e0 = rank(v, Metric::energy).front().config;
    auto d0 = rank(v, Metric::edp).front().config;
    double f = k(rng);
    for (auto& r : v) {
      r.total_joules *= f;
      r.edp = r.total_seconds * r.total_joules;
    }
    auto e1 = rank(v, Metric::energy).front().config;
    auto d1 = rank(v, Metric::edp).front().config;
    ASSERT_EQ(e0.batch, e1.batch);
    ASSERT_EQ(e0.gpu_set.total(), e1.gpu_set.total());
    ASSERT_EQ(d0.batch, d1.batch);
    ASSERT_EQ(d0.gpu_set.total(), d1.gpu_set.total());
  }
}

TEST(Recommend, ResidualSmallDatasetPicksSmallestBatch) {
  auto acc = bundled::accuracy();
  RecommendOptions o;
  o.network = "resnet_gait";
  auto r = recommend(DatasetClass::small, NetFamily::residual, acc, o);
  ASSERT_TRUE(r.batch.has_value());
  EXPECT_EQ(*r.batch, 64);
  EXPECT_FALSE(r.prefer_largest);
  EXPECT_EQ(r.metric_used, "weighted_average");
  EXPECT_FALSE(r.advisory.empty());
}

TEST(Recommend, ResidualLargeDatasetPicksLargestBatch) {
  auto acc = bundled::accuracy();
  RecommendOptions o;
  o.network = "resnet_im";
  auto r = recommend(DatasetClass::large, NetFamily::residual, acc, o);
  ASSERT_TRUE(r.batch.has_value());
  EXPECT_EQ(*r.batch, 256);
  EXPECT_EQ(r.metric_used, "top1");
}

TEST(Recommend, PlainConvToleranceThenEdp) {
  Bundle b;
  auto acc = bundled::accuracy();
  RecommendOptions o;
  o.network = "two_d_cnn";
  o.tolerance_pct = 5;
  auto five = recommend(DatasetClass::small, NetFamily::plain_conv, acc, o);
  EXPECT_EQ(five.allowed_batches, (std::vector<int64_t>{64, 128}));
  o.tolerance_pct = 6;
  auto six = recommend(DatasetClass::small, NetFamily::plain_conv, acc, o);
  EXPECT_EQ(six.allowed_batches, (std::vector<int64_t>{64, 128, 256}));
  // EDP decides among the qualifiers
  auto reports = b.grid("pascal", "two_d_cnn");
  o.reports = &reports;
  auto with_edp = recommend(DatasetClass::small, NetFamily::plain_conv, acc, o);
  ASSERT_TRUE(with_edp.config.has_value());
  EXPECT_EQ(*with_edp.batch, 256);
  EXPECT_EQ(with_edp.config->config.gpu_set.total(), 2);
  o.tolerance_pct = 5;
  auto tight = recommend(DatasetClass::small, NetFamily::plain_conv, acc, o);
  EXPECT_EQ(*tight.batch, 128);
}

TEST(Recommend, WithoutAccuracyFollowsRule) {
  auto r = recommend(DatasetClass::large, NetFamily::plain_conv);
  EXPECT_TRUE(r.prefer_largest);
  EXPECT_FALSE(r.batch.has_value());
  EXPECT_FALSE(r.guideline.empty());
  Bundle b;
  auto reports = b.grid("maxwell", "resnet_im");
  RecommendOptions o;
  o.reports = &reports;
  auto big = recommend(DatasetClass::large, NetFamily::residual, {}, o);
  EXPECT_EQ(*big.batch, 256);
  EXPECT_TRUE(big.config->feasible);
  auto acc = bundled::accuracy();
  EXPECT_THROW(recommend(DatasetClass::large, NetFamily::residual, acc), Error);
}

TEST(Accuracy, ParseValidation) {
  EXPECT_EQ(bundled::accuracy().size(), 18u);
  EXPECT_EQ(code_of([] { parse_accuracy("network,batch,metric,value\nn,64,top1,101\n"); }),
            Errc::FormatError);
}
