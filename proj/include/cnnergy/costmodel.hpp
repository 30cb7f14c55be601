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

#include <cstdint>
#include <string>
#include <vector>

#include "cnnergy/arch.hpp"
#include "cnnergy/error.hpp"

namespace cnnergy {

struct OpCount {
  int64_t macc = 0;
  int64_t max_ops = 0;
  int64_t add_div = 0;
  int64_t exp_add_div = 0;
  int64_t mul01 = 0;
  int64_t bias_add = 0;

  [[nodiscard]] int64_t total() const {
    return macc + max_ops + add_div + exp_add_div + mul01 + bias_add;
  }
  OpCount& operator+=(const OpCount& o) {
    macc += o.macc;
    max_ops += o.max_ops;
    add_div += o.add_div;
    exp_add_div += o.exp_add_div;
    mul01 += o.mul01;
    bias_add += o.bias_add;
    return *this;
  }
  friend bool operator==(const OpCount&, const OpCount&) = default;
};

struct DataVolume {
  int64_t read_elems = 0;
  int64_t written_elems = 0;
  int64_t element_bytes = 4;

  [[nodiscard]] int64_t read_bytes() const { return read_elems * element_bytes; }
  [[nodiscard]] int64_t written_bytes() const { return written_elems * element_bytes; }
  friend bool operator==(const DataVolume&, const DataVolume&) = default;
};

/// How the weight term of a kernel layer's read volume is counted.
///  literal:  k_w*k_h*ch_in for conv and pool layers, nothing elsewhere.
///  physical: the parameters actually fetched, k_w*k_h*ch_in*ch_out/groups
///            for conv and in*units for fc/softmax classifiers.
enum class WeightMode { literal, physical };

struct LayerCost {
  std::string name;
  LayerKind kind = LayerKind::relu;
  OpCount ops;
  DataVolume data;
};

struct CostSummary {
  std::vector<LayerCost> per_layer;
  OpCount ops;  // by type
  int64_t total_ops = 0;
  int64_t read_elems = 0;
  int64_t written_elems = 0;
  int64_t element_bytes = 4;
  int64_t parameter_count = 0;  // always physical, used for gradient volume
  int64_t total_read_bytes = 0;
  int64_t total_written_bytes = 0;

  /// Operations per element read. Throws when nothing is read.
  [[nodiscard]] double ctc() const {
    if (read_elems == 0) throw Error(Errc::UndefinedRatio, "no data read, ratio undefined");
    return static_cast<double>(total_ops) / static_cast<double>(read_elems);
  }
};

struct BatchCost {
  int64_t batch = 1;
  int64_t ops = 0;
  int64_t read_elems = 0;
  int64_t written_elems = 0;
};

inline constexpr double kMiB = 1024.0 * 1024.0;

namespace detail {
inline void check_shapes(const LayerSpec& l, const TensorShape& in, const TensorShape& out) {
  auto bad = [&](const std::string& m) {
    throw Error(Errc::ShapeMismatch, "layer '" + l.name + "': " + m);
  };
  if (in.width < 1 || in.height < 1 || in.channels < 1 || out.width < 1 || out.height < 1 ||
      out.channels < 1)
    bad("non-positive shape");
  switch (l.kind) {
    case LayerKind::conv:
    case LayerKind::pool: {
      if (l.kernel_w < 1 || l.kernel_h < 1 || l.stride < 1) bad("invalid kernel");
      auto ow = in.width - l.kernel_w + 2 * l.padding;
      auto oh = in.height - l.kernel_h + 2 * l.padding;
      if (ow < 0 || oh < 0 || ow / l.stride + 1 != out.width || oh / l.stride + 1 != out.height)
        bad("output spatial size inconsistent with kernel geometry");
      if (l.kind == LayerKind::conv &&
          (out.channels != l.units || in.channels % l.groups || l.units % l.groups))
        bad("channel counts inconsistent with filters/groups");
      if (l.kind == LayerKind::pool && out.channels != in.channels) bad("pool changes channels");
      break;
    }
    case LayerKind::fully_connected:
      if (!(out == TensorShape{1, 1, l.units})) bad("fc output must be 1x1xunits");
      break;
    case LayerKind::softmax:
      if (!(out == TensorShape{1, 1, l.units > 0 ? l.units : in.elems()}))
        bad("softmax output must be 1x1xunits");
      break;
    default:
      if (!(in == out)) bad("shape-preserving layer changes shape");
  }
}
}  // namespace detail

inline OpCount layer_ops(const LayerSpec& l, const TensorShape& in, const TensorShape& out) {
  detail::check_shapes(l, in, out);
  OpCount c;
  const int64_t k2 = l.kernel_w * l.kernel_h;
  const int64_t out_px = out.width * out.height;
  switch (l.kind) {
    case LayerKind::conv:
      c.macc = k2 * out_px * in.channels * out.channels / l.groups;
      if (l.has_bias) c.bias_add = out.channels;
      break;
    case LayerKind::fully_connected:
      c.macc = in.elems() * l.units;
      break;
    case LayerKind::pool:
      (l.pool_kind == PoolKind::max ? c.max_ops : c.add_div) = k2 * out_px * in.channels;
      break;
    case LayerKind::relu:
      c.max_ops = in.elems();
      break;
    case LayerKind::dropout:
      c.mul01 = in.elems();
      break;
    case LayerKind::batch_norm:
      c.add_div = 2 * in.elems();
      break;
    case LayerKind::local_response_norm:
      c.add_div = in.elems();
      break;
    case LayerKind::residual_sum:
      c.add_div = in.elems();
      break;
    case LayerKind::softmax:
      // A classifier softmax carries its own in*units projection.
      if (l.units > 0) c.macc = in.elems() * l.units;
      c.exp_add_div = 3 * out.elems();
      break;
  }
  return c;
}

/// Parameters held by the layer (weights only; biases and normalisation
/// statistics are negligible and ignored).
inline int64_t layer_parameters(const LayerSpec& l, const TensorShape& in) {
  switch (l.kind) {
    case LayerKind::conv:
      return l.kernel_w * l.kernel_h * in.channels * l.units / l.groups;
    case LayerKind::fully_connected:
      return in.elems() * l.units;
    case LayerKind::softmax:
      return l.units > 0 ? in.elems() * l.units : 0;
    default:
      return 0;
  }
}

inline DataVolume layer_data(const LayerSpec& l, const TensorShape& in, const TensorShape& out,
                             WeightMode mode = WeightMode::literal, int64_t element_bytes = 4) {
  detail::check_shapes(l, in, out);
  DataVolume d;
  d.element_bytes = element_bytes;
  d.read_elems = in.elems();
  if (l.kind == LayerKind::residual_sum) d.read_elems += in.elems();  // both operands
  if (mode == WeightMode::literal) {
    if (has_kernel(l.kind)) d.read_elems += l.kernel_w * l.kernel_h * in.channels;
  } else {
    d.read_elems += layer_parameters(l, in);
  }
  d.written_elems = out.elems();
  return d;
}

inline CostSummary network_cost(const ShapedNetwork& net, int64_t element_bytes = 4,
                                WeightMode mode = WeightMode::physical) {
  if (element_bytes < 1) throw Error(Errc::InvalidArgument, "element_bytes must be positive");
  CostSummary s;
  s.element_bytes = element_bytes;
  for (const auto& sl : net.per_layer) {
    LayerCost lc{sl.layer.name, sl.layer.kind, layer_ops(sl.layer, sl.in, sl.out),
                 layer_data(sl.layer, sl.in, sl.out, mode, element_bytes)};
    s.ops += lc.ops;
    s.read_elems += lc.data.read_elems;
    s.written_elems += lc.data.written_elems;
    s.parameter_count += layer_parameters(sl.layer, sl.in);
    s.per_layer.push_back(std::move(lc));
  }
  s.total_ops = s.ops.total();
  s.total_read_bytes = s.read_elems * element_bytes;
  s.total_written_bytes = s.written_elems * element_bytes;
  return s;
}

inline BatchCost batch_cost(const CostSummary& s, int64_t batch) {
  if (batch < 1) throw Error(Errc::InvalidArgument, "batch must be >= 1");
  return {batch, s.total_ops * batch, s.read_elems * batch, s.written_elems * batch};
}

}  // namespace cnnergy
