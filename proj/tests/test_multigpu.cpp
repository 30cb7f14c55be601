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

#include <functional>
#include <random>

#include "cnnergy/multigpu.hpp"

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

GpuSet link(double bw, double lat) {
  GpuSet s = homogeneous_set("d", 1);
  s.link_bandwidth = bw;
  s.link_latency = lat;
  return s;
}
}  // namespace

TEST(SplitBatch, Examples) {
  EXPECT_EQ(split_batch(64, 2), 32);
  EXPECT_EQ(split_batch(64, 1), 64);
  EXPECT_EQ(code_of([] { split_batch(64, 3); }), Errc::IndivisibleBatch);
  EXPECT_EQ(code_of([] { split_batch(64, 0); }), Errc::InvalidArgument);
}

TEST(SplitBatch, Conservation) {
  for (int64_t n = 1; n <= 16; ++n)
    for (int64_t b = 1; b <= 1024; ++b) {
      if (b % n) {
        EXPECT_THROW(split_batch(b, n), Error);
        continue;
      }
      EXPECT_EQ(n * split_batch(b, n), b);
    }
}

TEST(Ring, Examples) {
  EXPECT_EQ(ring_allreduce_time(1e9, 1, link(10e9, 1e-3)), 0.0);
  EXPECT_NEAR(ring_allreduce_time(1e9, 2, link(10e9, 0)), 0.1, 1e-15);
  EXPECT_NEAR(ring_allreduce_time(1e9, 2, link(10e9, 1e-3)), 0.102, 1e-12);
}

TEST(Ring, ZeroAtOneGpuBoundedAndMonotone) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> bytes(1, 1e10), bw(1e8, 1e11);
  for (int t = 0; t < 1000; ++t) {
    double b = bytes(rng);
    auto s = link(bw(rng), 0);
    EXPECT_EQ(ring_allreduce_time(b, 1, s), 0.0);
    double prev = 0;
    for (int64_t n = 2; n <= 64; ++n) {
      double x = ring_allreduce_time(b, n, s);
      EXPECT_GT(x, 0);
      EXPECT_GE(x, prev);
      EXPECT_LE(x, 2 * b / s.link_bandwidth * (1 + 1e-12));
      prev = x;
    }
  }
}

TEST(Hetero, Examples) {
  EXPECT_DOUBLE_EQ(hetero_step_time({0.023, 0.046}, 0).step_time, 0.046);
  EXPECT_DOUBLE_EQ(hetero_step_time({0.5}, 0).step_time, 0.5);
  EXPECT_DOUBLE_EQ(hetero_step_time({0.1, 0.2}, 0.3, 1.0).step_time, 0.2);
  EXPECT_DOUBLE_EQ(hetero_step_time({0.1, 0.2}, 0.3, 0.0).step_time, 0.5);
  EXPECT_DOUBLE_EQ(hetero_step_time({0.1, 0.2}, 0.2, 0.5).step_time, 0.3);
  EXPECT_THROW(hetero_step_time({}, 0), Error);
  EXPECT_THROW(hetero_step_time({0.1}, 0, 1.5), Error);
}

TEST(Hetero, IdenticalDevicesMatchHomogeneous) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> t(0, 1), w(0, 1);
  for (int i = 0; i < 500; ++i) {
    double c = t(rng), comm = t(rng), om = w(rng);
    auto one = hetero_step_time({c}, comm, om);
    auto four = hetero_step_time({c, c, c, c}, comm, om);
    EXPECT_EQ(one.step_time, four.step_time);
    EXPECT_GE(four.step_time, c);
  }
}

TEST(Overlap, Defaults) {
  EXPECT_EQ(overlap_for(40.5), 1.0);
  EXPECT_EQ(overlap_for(15.0), 1.0);
  EXPECT_EQ(overlap_for(11.6), 0.5);
  OverlapPolicy p{20, 0.9, 0.1};
  EXPECT_EQ(overlap_for(18.5, p), 0.1);
}

TEST(SetEnergy, Examples) {
  GpuSet rig;
  rig.members = {{"pascal", 2}, {"maxwell", 2}};
  EXPECT_NEAR(set_energy({{"pascal", 2.222}, {"maxwell", 2.979}}, rig), 10.402, 1e-12);
  EXPECT_DOUBLE_EQ(set_energy({{"pascal", 3.0}}, homogeneous_set("pascal", 1)), 3.0);
  GpuSet zero;
  zero.members = {{"pascal", 1}, {"maxwell", 0}};
  EXPECT_DOUBLE_EQ(set_energy({{"pascal", 3.0}}, zero), 3.0);
  EXPECT_EQ(code_of([&] { set_energy({{"pascal", 1.0}}, rig); }), Errc::MissingDevice);
}

TEST(SetEnergy, Linearity) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> j(0, 100);
  std::uniform_int_distribution<int64_t> c(0, 8);
  for (int i = 0; i < 500; ++i) {
    double ja = j(rng), jb = j(rng);
    int64_t ca = c(rng), cb = c(rng);
    GpuSet s;
    s.members = {{"a", ca}, {"b", cb}};
    GpuSet s2;
    s2.members = {{"a", 2 * ca}, {"b", 2 * cb}};
    double e = set_energy({{"a", ja}, {"b", jb}}, s);
    EXPECT_NEAR(set_energy({{"a", ja}, {"b", jb}}, s2), 2 * e, 1e-9 * (1 + e));
    EXPECT_NEAR(set_energy({{"a", 3 * ja}, {"b", 3 * jb}}, s), 3 * e, 1e-9 * (1 + e));
  }
}

TEST(GpuSetFile, Parse) {
  auto s = parse_gpu_set(
      "# testbed\nmember=pascal:2\nmember=maxwell:2\nlink_bandwidth_bytes_per_s=12e9\n"
      "link_latency_s=1e-5\n");
  EXPECT_EQ(s.total(), 4);
  EXPECT_TRUE(s.heterogeneous());
  EXPECT_EQ(s.label(), "pascal:2+maxwell:2");
  EXPECT_DOUBLE_EQ(s.link_bandwidth, 12e9);
  EXPECT_EQ(parse_members("pascal:2+maxwell:2"), s.members);
  EXPECT_EQ(code_of([] { parse_gpu_set("member=pascal:0\n"); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_gpu_set("member=pascal:1\nlink_bandwidth_bytes_per_s=0\n"); }),
            Errc::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_gpu_set("colour=blue\n"); }), Errc::FormatError);
}
