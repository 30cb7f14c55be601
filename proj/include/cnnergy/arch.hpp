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
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cnnergy/error.hpp"
#include "cnnergy/text.hpp"

namespace cnnergy {

struct TensorShape {
  int64_t width = 1;
  int64_t height = 1;
  int64_t channels = 1;

  [[nodiscard]] int64_t elems() const { return width * height * channels; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

enum class LayerKind {
  conv,
  fully_connected,
  pool,
  relu,
  dropout,
  batch_norm,
  softmax,
  residual_sum,
  local_response_norm,
};

enum class PoolKind { max, average };

constexpr std::string_view kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::fully_connected: return "fc";
    case LayerKind::pool: return "pool";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::softmax: return "softmax";
    case LayerKind::residual_sum: return "residual_sum";
    case LayerKind::local_response_norm: return "lrn";
  }
  return "?";
}

inline std::optional<LayerKind> kind_from_name(std::string_view s) {
  static const std::map<std::string_view, LayerKind> names{
      {"conv", LayerKind::conv},
      {"fc", LayerKind::fully_connected},
      {"fully_connected", LayerKind::fully_connected},
      {"pool", LayerKind::pool},
      {"relu", LayerKind::relu},
      {"dropout", LayerKind::dropout},
      {"batch_norm", LayerKind::batch_norm},
      {"bn", LayerKind::batch_norm},
      {"softmax", LayerKind::softmax},
      {"residual_sum", LayerKind::residual_sum},
      {"sum", LayerKind::residual_sum},
      {"lrn", LayerKind::local_response_norm},
      {"local_response_norm", LayerKind::local_response_norm},
  };
  auto it = names.find(s);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

constexpr bool has_kernel(LayerKind k) { return k == LayerKind::conv || k == LayerKind::pool; }

// Name a residual_sum may use to refer to the network input.
inline constexpr std::string_view kInputName = "input";

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  int64_t kernel_w = 0;  // conv/pool only
  int64_t kernel_h = 0;
  int64_t stride = 1;
  int64_t padding = 0;
  // conv: output channels; fc/softmax: units. A softmax with 0 units is a
  // bare normalisation over its input instead of a classifier.
  int64_t units = 0;
  int64_t groups = 1;
  bool has_bias = false;
  PoolKind pool_kind = PoolKind::max;
  std::string skip_from;  // residual_sum: producer of the shortcut tensor

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  std::string name;
  TensorShape input;
  std::vector<LayerSpec> layers;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct ShapedLayer {
  LayerSpec layer;
  TensorShape in;
  TensorShape out;
  TensorShape skip;  // second operand of residual_sum, else == in
};

struct ShapedNetwork {
  NetworkSpec spec;
  std::vector<ShapedLayer> per_layer;

  [[nodiscard]] TensorShape output() const {
    return per_layer.empty() ? spec.input : per_layer.back().out;
  }
};

// ---- layer constructors -------------------------------------------------

namespace layers {

inline LayerSpec conv(std::string name, int64_t filters, int64_t k, int64_t stride = 1,
                      int64_t pad = 0, int64_t groups = 1, bool bias = false) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::conv;
  l.kernel_w = l.kernel_h = k;
  l.stride = stride;
  l.padding = pad;
  l.units = filters;
  l.groups = groups;
  l.has_bias = bias;
  return l;
}

inline LayerSpec pool(std::string name, int64_t k, int64_t stride, int64_t pad = 0,
                      PoolKind kind = PoolKind::max) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::pool;
  l.kernel_w = l.kernel_h = k;
  l.stride = stride;
  l.padding = pad;
  l.pool_kind = kind;
  return l;
}

inline LayerSpec fc(std::string name, int64_t units) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::fully_connected;
  l.units = units;
  return l;
}

inline LayerSpec softmax(std::string name, int64_t units) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::softmax;
  l.units = units;
  return l;
}

inline LayerSpec simple(std::string name, LayerKind kind) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = kind;
  return l;
}

inline LayerSpec residual_sum(std::string name, std::string from) {
  LayerSpec l = simple(std::move(name), LayerKind::residual_sum);
  l.skip_from = std::move(from);
  return l;
}

}  // namespace layers

/// Adapter (1x1 conv + batch norm) followed by `count` basic residual blocks.
/// `prev` names the layer feeding the group; it is the first shortcut source
/// when there is no adapter.
inline void append_residual_group(std::vector<LayerSpec>& out, const std::string& name,
                                  int64_t filters, int64_t count, int64_t adapter_stride,
                                  bool adapter, std::string prev) {
  using namespace layers;
  if (adapter) {
    out.push_back(conv(name + "_adapt", filters, 1, adapter_stride));
    out.push_back(simple(name + "_adapt_bn", LayerKind::batch_norm));
    prev = name + "_adapt_bn";
  }
  for (int64_t i = 1; i <= count; ++i) {
    std::string b = name + "_" + std::to_string(i);
    out.push_back(conv(b + "_conv_a", filters, 3, 1, 1));
    out.push_back(simple(b + "_bn_a", LayerKind::batch_norm));
    out.push_back(simple(b + "_relu_a", LayerKind::relu));
    out.push_back(conv(b + "_conv_b", filters, 3, 1, 1));
    out.push_back(simple(b + "_bn_b", LayerKind::batch_norm));
    out.push_back(residual_sum(b + "_sum", prev));
    out.push_back(simple(b + "_relu", LayerKind::relu));
    prev = b + "_relu";
  }
}

// ---- validation ---------------------------------------------------------

inline void validate(const NetworkSpec& net) {
  auto fail = [](const std::string& m) { throw Error(Errc::SemanticError, m); };
  if (net.input.width < 1 || net.input.height < 1 || net.input.channels < 1)
    fail("input dimensions must be positive");
  std::set<std::string> seen;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    const std::string at = "layer '" + l.name + "'";
    if (l.name.empty()) fail("layer " + std::to_string(i + 1) + " has no name");
    if (l.name == kInputName) fail(at + ": name is reserved");
    if (!seen.insert(l.name).second) fail(at + ": duplicate name");
    if (has_kernel(l.kind)) {
      if (l.kernel_w < 1 || l.kernel_h < 1) fail(at + ": kernel must be positive");
      if (l.stride < 1) fail(at + ": stride must be positive");
      if (l.padding < 0) fail(at + ": padding must be nonnegative");
    } else if (l.kernel_w != 0 || l.kernel_h != 0 || l.padding != 0 || l.stride != 1) {
      fail(at + ": kernel fields only apply to conv and pool");
    }
    if (l.kind == LayerKind::conv || l.kind == LayerKind::fully_connected) {
      if (l.units < 1) fail(at + ": needs a positive filter/unit count");
    } else if (l.kind == LayerKind::softmax) {
      if (l.units < 0) fail(at + ": negative unit count");
    } else if (l.units != 0) {
      fail(at + ": units only apply to conv, fc and softmax");
    }
    if (l.kind == LayerKind::conv) {
      if (l.groups < 1) fail(at + ": groups must be positive");
      if (l.units % l.groups != 0)
        throw Error(Errc::GroupMismatch, at + ": groups does not divide filters");
    } else if (l.groups != 1 || l.has_bias) {
      fail(at + ": groups/bias only apply to conv");
    }
    if (l.kind == LayerKind::softmax && i + 1 != net.layers.size())
      fail(at + ": softmax must be the last layer");
    if (l.kind == LayerKind::residual_sum) {
      if (l.skip_from != kInputName && !seen.count(l.skip_from))
        fail(at + ": shortcut source '" + l.skip_from + "' is not an earlier layer");
      if (l.skip_from == l.name) fail(at + ": shortcut refers to itself");
    } else if (!l.skip_from.empty()) {
      fail(at + ": 'from' only applies to residual_sum");
    }
  }
}

// ---- shape inference ----------------------------------------------------

/// floor((w - k + 2P) / S) + 1; throws when no kernel placement fits.
inline int64_t conv_output_size(int64_t w, int64_t k, int64_t stride, int64_t pad,
                                const std::string& who = "layer") {
  int64_t span = w - k + 2 * pad;
  if (span < 0)
    throw Error(Errc::NonPositiveOutput, who + ": kernel " + std::to_string(k) +
                                             " larger than padded input " +
                                             std::to_string(w + 2 * pad));
  return span / stride + 1;
}

inline ShapedNetwork infer_shapes(const NetworkSpec& net) {
  validate(net);
  ShapedNetwork sn{net, {}};
  sn.per_layer.reserve(net.layers.size());
  std::map<std::string, TensorShape> produced{{std::string(kInputName), net.input}};
  TensorShape cur = net.input;
  for (const auto& l : net.layers) {
    const std::string who = "layer '" + l.name + "'";
    ShapedLayer s{l, cur, cur, cur};
    switch (l.kind) {
      case LayerKind::conv:
        if (cur.channels % l.groups != 0)
          throw Error(Errc::GroupMismatch, who + ": groups does not divide input channels " +
                                               std::to_string(cur.channels));
        [[fallthrough]];
      case LayerKind::pool:
        s.out.width = conv_output_size(cur.width, l.kernel_w, l.stride, l.padding, who);
        s.out.height = conv_output_size(cur.height, l.kernel_h, l.stride, l.padding, who);
        if (l.kind == LayerKind::conv) s.out.channels = l.units;
        break;
      case LayerKind::fully_connected:
        s.out = {1, 1, l.units};
        break;
      case LayerKind::softmax:
        s.out = {1, 1, l.units > 0 ? l.units : cur.elems()};
        break;
      case LayerKind::residual_sum:
        s.skip = produced.at(l.skip_from);
        if (!(s.skip == cur))
          throw Error(Errc::ShapeConflict, who + ": shortcut from '" + l.skip_from +
                                               "' does not match the main branch");
        break;
      default:
        break;
    }
    produced[l.name] = s.out;
    cur = s.out;
    sn.per_layer.push_back(std::move(s));
  }
  return sn;
}

// ---- built-in networks --------------------------------------------------

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"two_d_cnn", "resnet_gait", "caffenet",
                                              "resnet_im"};
  return names;
}

inline int64_t default_classes(std::string_view name) {
  return (name == "caffenet" || name == "resnet_im") ? 1000 : 155;
}

inline NetworkSpec builtin_network(std::string_view name, std::optional<int64_t> classes = {}) {
  using namespace layers;
  NetworkSpec n;
  n.name = std::string(name);
  const int64_t k = classes.value_or(default_classes(name));
  auto& L = n.layers;
  if (name == "two_d_cnn") {
    // Pooling precedes the rectifier; conv4's 2x2 filters collapse the map
    // to 1x1 and act as the 4096-wide fully connected stage.
    n.input = {60, 60, 50};
    L = {conv("conv1", 96, 7, 1, 0, 1, true),   pool("pool1", 2, 2),
         simple("relu1", LayerKind::relu),      conv("conv2", 192, 5, 2, 0, 1, true),
         pool("pool2", 2, 2),                   simple("relu2", LayerKind::relu),
         conv("conv3", 512, 3, 1, 0, 1, true),  pool("pool3", 2, 2),
         simple("relu3", LayerKind::relu),      conv("conv4", 4096, 2, 1, 0, 1, true),
         simple("relu4", LayerKind::relu),      simple("drop4", LayerKind::dropout),
         fc("fc5", 2048),                       simple("relu5", LayerKind::relu),
         simple("drop5", LayerKind::dropout),   softmax("prob", k)};
  } else if (name == "caffenet") {
    n.input = {227, 227, 3};
    auto R = [](const char* s) { return simple(s, LayerKind::relu); };
    L = {conv("conv1", 96, 11, 4, 0, 1, true),
         R("relu1"),
         pool("pool1", 3, 2),
         simple("norm1", LayerKind::local_response_norm),
         conv("conv2", 256, 5, 1, 2, 2, true),
         R("relu2"),
         pool("pool2", 3, 2),
         simple("norm2", LayerKind::local_response_norm),
         conv("conv3", 384, 3, 1, 1, 1, true),
         R("relu3"),
         conv("conv4", 384, 3, 1, 1, 2, true),
         R("relu4"),
         conv("conv5", 256, 3, 1, 1, 2, true),
         R("relu5"),
         pool("pool5", 3, 2),
         fc("fc6", 4096),
         R("relu6"),
         simple("drop6", LayerKind::dropout),
         fc("fc7", 4096),
         R("relu7"),
         simple("drop7", LayerKind::dropout),
         softmax("prob", k)};
  } else if (name == "resnet_gait" || name == "resnet_im") {
    const bool im = name == "resnet_im";
    n.input = im ? TensorShape{224, 224, 3} : TensorShape{60, 60, 50};
    L.push_back(conv("conv1", 64, 7, 2, im ? 3 : 0));
    L.push_back(simple("bn1", LayerKind::batch_norm));
    L.push_back(simple("relu1", LayerKind::relu));
    L.push_back(pool("pool1", 3, 2, im ? 1 : 0));
    const int64_t blocks_gait[] = {4, 6, 7, 2};
    const int64_t blocks_im[] = {3, 4, 6, 3};
    const int64_t filters[] = {64, 128, 256, 512};
    std::string prev = "pool1";
    for (int g = 0; g < 4; ++g) {
      std::string gname = "res" + std::to_string(g + 2);
      append_residual_group(L, gname, filters[g], im ? blocks_im[g] : blocks_gait[g],
                            g == 0 ? 1 : 2, true, prev);
      prev = L.back().name;
    }
    // Global average over the final 7x7 (image) or 2x2 (gait) map.
    L.push_back(pool("pool_global", im ? 7 : 2, 1, 0, PoolKind::average));
    L.push_back(softmax("prob", k));
  } else {
    throw Error(Errc::UnknownNetwork, "unknown built-in network '" + std::string(name) + "'");
  }
  return n;
}

// ---- text format --------------------------------------------------------

inline std::string emit_network(const NetworkSpec& net) {
  std::ostringstream os;
  if (!net.name.empty()) os << "# " << net.name << '\n';
  os << "input " << net.input.width << ' ' << net.input.height << ' ' << net.input.channels
     << '\n';
  for (const auto& l : net.layers) {
    os << kind_name(l.kind) << ' ' << l.name;
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::pool:
        if (l.kind == LayerKind::conv) os << " filters=" << l.units;
        else os << " type=" << (l.pool_kind == PoolKind::max ? "max" : "avg");
        if (l.kernel_w == l.kernel_h) os << " k=" << l.kernel_w;
        else os << " kw=" << l.kernel_w << " kh=" << l.kernel_h;
        os << " stride=" << l.stride << " pad=" << l.padding;
        if (l.groups != 1) os << " groups=" << l.groups;
        if (l.has_bias) os << " bias=1";
        break;
      case LayerKind::fully_connected:
        os << " units=" << l.units;
        break;
      case LayerKind::softmax:
        if (l.units > 0) os << " units=" << l.units;
        break;
      case LayerKind::residual_sum:
        os << " from=" << l.skip_from;
        break;
      default:
        break;
    }
    os << '\n';
  }
  return os.str();
}

/// Parse the line-oriented architecture format. `name` labels the result.
inline NetworkSpec parse_network(std::string_view textv, std::string name = "custom") {
  NetworkSpec net;
  net.name = std::move(name);
  bool have_input = false;
  int lineno = 0;
  auto syntax = [&](const std::string& m) {
    throw Error(Errc::SyntaxError, "line " + std::to_string(lineno) + ": " + m);
  };
  for (auto& raw : text::lines(textv)) {
    ++lineno;
    std::string line = raw;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    auto tok = text::split_ws(line);
    if (tok.empty()) continue;
    if (!have_input) {
      if (tok[0] != "input" || tok.size() != 4) syntax("expected 'input <w> <h> <ch>'");
      long long d[3];
      for (int i = 0; i < 3; ++i)
        if (!text::parse_int(tok[i + 1], d[i]) || d[i] < 1)
          syntax("input dimensions must be positive integers");
      net.input = {d[0], d[1], d[2]};
      have_input = true;
      continue;
    }
    if (tok[0] == "input") syntax("duplicate input line");
    if (tok.size() < 2) syntax("expected '<kind> <name> key=value ...'");
    std::map<std::string, std::string> kv;
    for (size_t i = 2; i < tok.size(); ++i) {
      auto eq = tok[i].find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == tok[i].size())
        syntax("malformed attribute '" + tok[i] + "'");
      if (!kv.emplace(tok[i].substr(0, eq), tok[i].substr(eq + 1)).second)
        syntax("repeated attribute '" + tok[i].substr(0, eq) + "'");
    }
    auto take_int = [&](const char* key, int64_t fallback, int64_t min) -> int64_t {
      auto it = kv.find(key);
      if (it == kv.end()) return fallback;
      long long v;
      if (!text::parse_int(it->second, v)) syntax(std::string(key) + " must be an integer");
      if (v < min)
        syntax(std::string(key) + " must be >= " + std::to_string(min));
      kv.erase(it);
      return v;
    };
    auto require = [&](const char* key) {
      if (!kv.count(key)) syntax(std::string("missing ") + key + "=");
    };
    auto finish = [&]() {
      if (!kv.empty()) syntax("unknown attribute '" + kv.begin()->first + "' for " + tok[0]);
    };

    if (tok[0] == "resblock") {
      require("filters");
      require("count");
      int64_t f = take_int("filters", 0, 1);
      int64_t c = take_int("count", 0, 1);
      int64_t st = take_int("stride", 1, 1);
      int64_t ad = take_int("adapter", 1, 0);
      finish();
      std::string prev =
          net.layers.empty() ? std::string(kInputName) : net.layers.back().name;
      append_residual_group(net.layers, tok[1], f, c, st, ad != 0, prev);
      continue;
    }
    auto kind = kind_from_name(tok[0]);
    if (!kind) syntax("unknown layer kind '" + tok[0] + "'");
    LayerSpec l;
    l.name = tok[1];
    l.kind = *kind;
    switch (*kind) {
      case LayerKind::conv:
      case LayerKind::pool: {
        if (*kind == LayerKind::conv) {
          require("filters");
          l.units = take_int("filters", 0, 1);
          l.groups = take_int("groups", 1, 1);
          l.has_bias = take_int("bias", 0, 0) != 0;
        } else {
          auto it = kv.find("type");
          if (it != kv.end()) {
            if (it->second == "max") l.pool_kind = PoolKind::max;
            else if (it->second == "avg" || it->second == "average") l.pool_kind = PoolKind::average;
            else syntax("pool type must be max or avg");
            kv.erase(it);
          }
        }
        int64_t k = take_int("k", 0, 1);
        l.kernel_w = take_int("kw", k, 1);
        l.kernel_h = take_int("kh", k, 1);
        if (l.kernel_w == 0 || l.kernel_h == 0) syntax("missing kernel size (k= or kw=/kh=)");
        l.stride = take_int("stride", 1, 1);
        l.padding = take_int("pad", 0, 0);
        break;
      }
      case LayerKind::fully_connected:
        require("units");
        l.units = take_int("units", 0, 1);
        break;
      case LayerKind::softmax:
        l.units = take_int("units", 0, 1);
        break;
      case LayerKind::residual_sum: {
        auto it = kv.find("from");
        if (it == kv.end()) syntax("residual_sum needs from=<layer>");
        l.skip_from = it->second;
        kv.erase(it);
        break;
      }
      default:
        break;
    }
    finish();
    net.layers.push_back(std::move(l));
  }
  if (!have_input) throw Error(Errc::SyntaxError, "missing 'input <w> <h> <ch>' line");
  validate(net);
  return net;
}

}  // namespace cnnergy
