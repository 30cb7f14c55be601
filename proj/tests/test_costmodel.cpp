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

#include "cnnergy/costmodel.hpp"

using namespace cnnergy;
using namespace cnnergy::layers;

namespace {

// Oracle: enumerate every (output position, kernel cell, channel pair) tuple
// that a direct convolution loop nest would execute.
int64_t loop_nest_conv(int64_t w, int64_t h, int64_t cin, int64_t cout, int64_t kw, int64_t kh,
                       int64_t s, int64_t p, int64_t groups) {
  int64_t n = 0;
  const int64_t cin_g = cin / groups, cout_g = cout / groups;
  for (int64_t oy = -p; oy + kh <= h + p; oy += s)
    for (int64_t ox = -p; ox + kw <= w + p; ox += s)
      for (int64_t g = 0; g < groups; ++g)
        for (int64_t co = 0; co < cout_g; ++co)
          for (int64_t ci = 0; ci < cin_g; ++ci)
            for (int64_t ky = 0; ky < kh; ++ky)
              for (int64_t kx = 0; kx < kw; ++kx) ++n;
  return n;
}

int64_t loop_nest_pool(int64_t w, int64_t h, int64_t c, int64_t kw, int64_t kh, int64_t s,
                       int64_t p) {
  int64_t n = 0;
  for (int64_t oy = -p; oy + kh <= h + p; oy += s)
    for (int64_t ox = -p; ox + kw <= w + p; ox += s)
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t ky = 0; ky < kh; ++ky)
          for (int64_t kx = 0; kx < kw; ++kx) ++n;
  return n;
}

OpCount ops_of(TensorShape in, const LayerSpec& l) {
  auto sn = infer_shapes(NetworkSpec{"t", in, {l}});
  return layer_ops(l, sn.per_layer[0].in, sn.per_layer[0].out);
}

}  // namespace

TEST(CostLayer, UnitConv) {
  auto ops = ops_of({1, 1, 1}, conv("c", 1, 1));
  EXPECT_EQ(ops.macc, 1);
  EXPECT_EQ(ops.total(), 1);
}

TEST(CostLayer, GaitFirstConv) {
  // scaled-down instance against the oracle, then the closed form at full size
  EXPECT_EQ(ops_of({8, 8, 5}, conv("c", 6, 7)).macc, loop_nest_conv(8, 8, 5, 6, 7, 7, 1, 0, 1));
  EXPECT_EQ(ops_of({60, 60, 50}, conv("c", 96, 7)).macc, 685'843'200);
  EXPECT_EQ(49LL * 2916 * 50 * 96, 685'843'200);
}

TEST(CostLayer, SoftmaxOverThousand) {
  auto bare = ops_of({1, 1, 1000}, softmax("s", 0));
  EXPECT_EQ(bare.exp_add_div, 3000);
  EXPECT_EQ(bare.macc, 0);
  auto cls = ops_of({1, 1, 4096}, softmax("s", 1000));
  EXPECT_EQ(cls.exp_add_div, 3000);
  EXPECT_EQ(cls.macc, 4096 * 1000);
}

TEST(CostLayer, PerKindFormulas) {
  TensorShape s{4, 5, 6};
  EXPECT_EQ(ops_of(s, simple("r", LayerKind::relu)).max_ops, 120);
  EXPECT_EQ(ops_of(s, simple("d", LayerKind::dropout)).mul01, 120);
  EXPECT_EQ(ops_of(s, simple("b", LayerKind::batch_norm)).add_div, 240);
  EXPECT_EQ(ops_of(s, simple("n", LayerKind::local_response_norm)).add_div, 120);
  EXPECT_EQ(ops_of(s, fc("f", 7)).macc, 120 * 7);
  EXPECT_EQ(ops_of(s, pool("p", 2, 2)).max_ops, 4 * 2 * 2 * 6);
  EXPECT_EQ(ops_of(s, pool("p", 2, 2, 0, PoolKind::average)).add_div, 4 * 2 * 2 * 6);
  auto biased = ops_of(s, conv("c", 4, 3, 1, 1, 2, true));
  EXPECT_EQ(biased.bias_add, 4);
  EXPECT_EQ(biased.macc, 9 * 20 * 6 * 4 / 2);
  // residual_sum: a + b over the block output
  auto sn = infer_shapes(NetworkSpec{"t", s, {conv("c", 6, 3, 1, 1), residual_sum("x", "input")}});
  auto& l = sn.per_layer[1];
  EXPECT_EQ(layer_ops(l.layer, l.in, l.out).add_div, 120);
}

TEST(CostLayer, OracleEquivalenceAllSmallDims) {
  int64_t checked = 0;
  for (int64_t w = 1; w <= 8; ++w)
    for (int64_t k = 1; k <= 8; ++k)
      for (int64_t s = 1; s <= 3; ++s)
        for (int64_t p = 0; p <= 2; ++p) {
          if (w + 2 * p < k) continue;
          for (int64_t cin : {1, 2, 4, 6})
            for (int64_t cout : {1, 2, 4, 6})
              for (int64_t g : {1, 2}) {
                if (cin % g || cout % g) continue;
                auto got = ops_of({w, w, cin}, conv("c", cout, k, s, p, g));
                ASSERT_EQ(got.macc, loop_nest_conv(w, w, cin, cout, k, k, s, p, g))
                    << w << " " << k << " " << s << " " << p << " " << cin << " " << cout;
                ++checked;
              }
          auto pl = ops_of({w, w, 3}, pool("p", k, s, p));
          ASSERT_EQ(pl.max_ops, loop_nest_pool(w, w, 3, k, k, s, p));
        }
  // rectangular kernels and inputs, randomly drawn within the same bounds
  std::mt19937 rng(7);
  std::uniform_int_distribution<int64_t> d8(1, 8), d3(1, 3), d02(0, 2);
  for (int i = 0; i < 2000; ++i) {
    int64_t w = d8(rng), h = d8(rng), kw = d8(rng), kh = d8(rng), s = d3(rng), p = d02(rng);
    if (w + 2 * p < kw || h + 2 * p < kh) continue;
    int64_t cin = d8(rng), cout = d8(rng);
    LayerSpec l = conv("c", cout, 1, s, p);
    l.kernel_w = kw;
    l.kernel_h = kh;
    ASSERT_EQ(ops_of({w, h, cin}, l).macc, loop_nest_conv(w, h, cin, cout, kw, kh, s, p, 1));
    ++checked;
  }
  EXPECT_GT(checked, 5000);
}

TEST(CostLayer, DataVolumes) {
  auto sn = infer_shapes(NetworkSpec{"t", {60, 60, 50}, {conv("c", 96, 7)}});
  auto& l = sn.per_layer[0];
  auto lit = layer_data(l.layer, l.in, l.out, WeightMode::literal);
  EXPECT_EQ(lit.read_elems, 182'450);
  EXPECT_EQ(lit.written_elems, 279'936);
  EXPECT_EQ(lit.read_bytes(), 4 * 182'450);
  auto phys = layer_data(l.layer, l.in, l.out, WeightMode::physical);
  EXPECT_EQ(phys.read_elems, 180'000 + 49 * 50 * 96);

  LayerSpec r = simple("r", LayerKind::relu);
  auto rd = layer_data(r, {10, 10, 3}, {10, 10, 3});
  EXPECT_EQ(rd.read_elems, 300);
  EXPECT_EQ(rd.written_elems, 300);
}

TEST(CostLayer, ShapeMismatch) {
  LayerSpec c = conv("c", 8, 3);
  EXPECT_THROW(layer_ops(c, {10, 10, 3}, {9, 9, 8}), Error);
  try {
    layer_data(simple("r", LayerKind::relu), {2, 2, 2}, {2, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(CostNetwork, EmptyNetwork) {
  auto s = network_cost(infer_shapes(NetworkSpec{"empty", {4, 4, 1}, {}}));
  EXPECT_EQ(s.total_ops, 0);
  EXPECT_EQ(s.total_read_bytes, 0);
  EXPECT_EQ(s.total_written_bytes, 0);
  try {
    (void)s.ctc();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UndefinedRatio);
  }
}

TEST(CostNetwork, Additivity) {
  for (auto& n : builtin_names()) {
    for (auto mode : {WeightMode::literal, WeightMode::physical}) {
      auto s = network_cost(infer_shapes(builtin_network(n)), 4, mode);
      int64_t ops = 0, rd = 0, wr = 0;
      OpCount by;
      for (auto& l : s.per_layer) {
        ops += l.ops.total();
        rd += l.data.read_elems;
        wr += l.data.written_elems;
        by += l.ops;
      }
      EXPECT_EQ(ops, s.total_ops);
      EXPECT_EQ(by, s.ops);
      EXPECT_EQ(rd * 4, s.total_read_bytes);
      EXPECT_EQ(wr * 4, s.total_written_bytes);
    }
  }
}

TEST(CostNetwork, CharacterizationWherePublishedTotalsAreReachable) {
  struct Row {
    const char* name;
    double mops, read_mb, written_mb, ctc;
  };
  auto within = [](double got, double ref, double tol) { return std::abs(got / ref - 1) <= tol; };
  auto cost = [](const char* n) { return network_cost(infer_shapes(builtin_network(n))); };
  auto two = cost("two_d_cnn");
  EXPECT_TRUE(within(two.total_ops / 1e6, 783.84, 0.10));
  EXPECT_TRUE(within(two.total_read_bytes / kMiB, 73.8, 0.10));
  EXPECT_TRUE(within(two.total_written_bytes / kMiB, 1.9, 0.10));
  EXPECT_TRUE(within(two.ctc(), 40.5, 0.10));
  auto caffe = cost("caffenet");
  EXPECT_TRUE(within(caffe.total_ops / 1e6, 727.20, 0.05));
  EXPECT_TRUE(within(caffe.total_read_bytes / kMiB, 239.1, 0.10));
  EXPECT_TRUE(within(caffe.total_written_bytes / kMiB, 6.0, 0.10));
  EXPECT_TRUE(within(caffe.ctc(), 11.6, 0.10));
  auto gait = cost("resnet_gait");
  EXPECT_TRUE(within(gait.total_ops / 1e6, 425.13, 0.10));
  EXPECT_TRUE(within(gait.total_read_bytes / kMiB, 87.6, 0.10));
}

TEST(CostBatch, ExactLinearity) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int64_t> dB(1, 4096);
  for (auto& n : builtin_names()) {
    auto s = network_cost(infer_shapes(builtin_network(n)));
    EXPECT_EQ(batch_cost(s, 1).ops, s.total_ops);
    for (int i = 0; i < 200; ++i) {
      int64_t B = dB(rng);
      auto b = batch_cost(s, B);
      EXPECT_EQ(b.batch, B);
      EXPECT_EQ(b.ops, B * s.total_ops);
      EXPECT_EQ(b.read_elems, B * s.read_elems);
      EXPECT_EQ(b.written_elems, B * s.written_elems);
    }
  }
  EXPECT_THROW(batch_cost(CostSummary{}, 0), Error);
}

TEST(CostBatch, TwoDCnnAt256) {
  auto s = network_cost(infer_shapes(builtin_network("two_d_cnn")));
  double gops = batch_cost(s, 256).ops / 1e9;
  EXPECT_NEAR(gops, 200.66, 200.66 * 0.001);
  EXPECT_NEAR(783.84e6 * 256 / 1e9, 200.66, 0.01);
}

TEST(CostNetwork, MonotoneUnderAppend) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> kind(0, 5), small(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    NetworkSpec n{"r", {16, 16, 4}, {}};
    auto prev = network_cost(infer_shapes(n));
    for (int i = 0; i < 10; ++i) {
      std::string id = "l" + std::to_string(i);
      TensorShape cur = infer_shapes(n).output();
      LayerSpec l;
      switch (kind(rng)) {
        case 0: l = conv(id, small(rng) * 2, std::min<int64_t>(small(rng), cur.width), 1); break;
        case 1: l = pool(id, 1, 1); break;
        case 2: l = simple(id, LayerKind::relu); break;
        case 3: l = simple(id, LayerKind::batch_norm); break;
        case 4: l = simple(id, LayerKind::dropout); break;
        default: l = fc(id, small(rng) * 8); break;
      }
      n.layers.push_back(l);
      auto next = network_cost(infer_shapes(n));
      EXPECT_GE(next.total_ops, prev.total_ops);
      EXPECT_GE(next.read_elems, prev.read_elems);
      prev = next;
    }
  }
}

TEST(CostNetwork, PhysicalReadsAtLeastLiteral) {
  for (auto& n : builtin_names()) {
    auto sn = infer_shapes(builtin_network(n));
    EXPECT_GE(network_cost(sn, 4, WeightMode::physical).read_elems,
              network_cost(sn, 4, WeightMode::literal).read_elems);
    EXPECT_EQ(network_cost(sn, 4, WeightMode::physical).total_ops,
              network_cost(sn, 4, WeightMode::literal).total_ops);
  }
  auto half = network_cost(infer_shapes(builtin_network("caffenet")), 2);
  EXPECT_EQ(half.total_read_bytes, half.read_elems * 2);
}
