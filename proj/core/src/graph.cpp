// Copyright 2026 The crossdim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "crossdim/graph.hpp"

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace crossdim {

std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::input: return "input";
    case NodeKind::conv: return "conv";
    case NodeKind::tconv: return "tconv";
    case NodeKind::norm: return "norm";
    case NodeKind::act: return "act";
    case NodeKind::upsample: return "upsample";
    case NodeKind::concat: return "concat";
    case NodeKind::fold_depth: return "fold-depth";
    case NodeKind::unfold_depth: return "unfold-depth";
    case NodeKind::output: return "output";
  }
  return "input";
}

const Node& NetworkGraph::node(const std::string& name) const {
  for (const auto& n : nodes)
    if (n.name == name) return n;
  throw LookupError("graph '" + arch + "' has no node named '" + name + "'");
}

namespace {

std::string node_label(const Node& n) { return "node " + std::to_string(n.id) + " (" + n.name + ")"; }

Shape kernel_shape(const Node& n, std::int64_t in_channels) {
  Shape s;
  if (n.kind == NodeKind::conv) {
    s = {n.out_channels, in_channels};
  } else {
    s = {in_channels, n.out_channels};
  }
  for (int k : n.kernel) s.push_back(k);
  return s;
}

Shape node_output_shape(const Node& n, const std::vector<Shape>& in) {
  switch (n.kind) {
    case NodeKind::input:
    case NodeKind::output:
    case NodeKind::norm:
    case NodeKind::act:
      return in.empty() ? Shape{} : in[0];
    case NodeKind::conv:
      return conv_output_shape(in[0], kernel_shape(n, in[0][1]), n.conv_config());
    case NodeKind::tconv:
      return transposed_conv_output_shape(in[0], kernel_shape(n, in[0][1]), n.conv_config());
    case NodeKind::upsample: {
      Shape s = in[0];
      if (n.factor.size() + 2 != s.size()) throw DimensionError(node_label(n) + ": factor rank mismatch");
      for (std::size_t a = 0; a < n.factor.size(); ++a) {
        if (n.factor[a] < 1) throw ConfigError(node_label(n) + ": upsample factor must be >= 1");
        s[a + 2] *= n.factor[a];
      }
      return s;
    }
    case NodeKind::concat: {
      Shape s = in[0];
      for (std::size_t i = 1; i < in.size(); ++i) {
        if (in[i].size() != s.size() || in[i][0] != s[0] || !std::equal(in[i].begin() + 2, in[i].end(), s.begin() + 2)) {
          throw DimensionError(node_label(n) + ": cannot concatenate " + shape_to_string(s) + " with " +
                               shape_to_string(in[i]));
        }
        s[1] += in[i][1];
      }
      return s;
    }
    case NodeKind::fold_depth: {
      const Shape& s = in[0];
      if (s.size() != 5) throw DimensionError(node_label(n) + ": fold-depth needs a 3D input, got " + shape_to_string(s));
      return {s[0] * s[2], s[1], s[3], s[4]};
    }
    case NodeKind::unfold_depth: {
      const Shape& s = in[0];
      if (s.size() != 4) throw DimensionError(node_label(n) + ": unfold-depth needs a 2D input, got " + shape_to_string(s));
      if (n.depth < 1 || s[0] % n.depth != 0) {
        throw DimensionError(node_label(n) + ": batch " + std::to_string(s[0]) + " not divisible by depth " +
                             std::to_string(n.depth));
      }
      return {s[0] / n.depth, s[1], n.depth, s[2], s[3]};
    }
  }
  return {};
}

std::size_t expected_arity(NodeKind k) {
  switch (k) {
    case NodeKind::input: return 0;
    case NodeKind::concat: return 2;  // minimum
    default: return 1;
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void validate_graph(const NetworkGraph& g) {
  auto fail = [&](const std::string& msg) { throw ValidationError("graph '" + g.arch + "': " + msg); };
  if (g.nodes.empty()) fail("no nodes");
  if (g.input_shape.size() < 3 || g.input_shape.size() > 5) fail("input shape must be [N, C, spatial...]");
  std::set<std::string> names;
  int inputs = 0, outputs = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    if (n.id != static_cast<int>(i)) fail("node ids must be dense and ordered; found id " + std::to_string(n.id) + " at position " + std::to_string(i));
    if (!names.insert(n.name).second) fail("duplicate node name '" + n.name + "'");
    if (n.kind == NodeKind::input) ++inputs;
    if (n.kind == NodeKind::output) ++outputs;
    const std::size_t arity = expected_arity(n.kind);
    if (n.kind == NodeKind::concat ? n.inputs.size() < arity : n.inputs.size() != arity) {
      fail(node_label(n) + ": " + to_string(n.kind) + " has " + std::to_string(n.inputs.size()) + " inputs");
    }
    for (int p : n.inputs) {
      if (p < 0 || p >= n.id) fail(node_label(n) + ": predecessor " + std::to_string(p) + " is not an earlier node");
    }
    if ((n.kind == NodeKind::conv || n.kind == NodeKind::tconv) &&
        (n.out_channels < 1 || n.kernel.size() != static_cast<std::size_t>(n.rank) ||
         n.stride.size() != n.kernel.size() || n.padding.size() != n.kernel.size())) {
      fail(node_label(n) + ": inconsistent convolution attributes");
    }
  }
  if (inputs != 1) fail("expected exactly one input node, found " + std::to_string(inputs));
  if (outputs != 1) fail("expected exactly one output node, found " + std::to_string(outputs));
  if (g.entry != 0 || g.nodes[0].kind != NodeKind::input) fail("entry must be node 0 of kind input");
  if (g.exit < 0 || g.exit >= static_cast<int>(g.nodes.size()) || g.nodes[static_cast<std::size_t>(g.exit)].kind != NodeKind::output) {
    fail("exit must reference the output node");
  }
  // Every node feeds the exit.
  std::vector<bool> live(g.nodes.size(), false);
  live[static_cast<std::size_t>(g.exit)] = true;
  for (std::size_t i = g.nodes.size(); i-- > 0;) {
    if (!live[i]) fail(node_label(g.nodes[i]) + " does not reach the output");
    for (int p : g.nodes[i].inputs) live[static_cast<std::size_t>(p)] = true;
  }
  try {
    infer_shapes(g);
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    fail(std::string("shape inference failed: ") + e.what());
  }
}

std::vector<Shape> infer_shapes(const NetworkGraph& g) {
  std::vector<Shape> shapes(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    if (n.kind == NodeKind::input) {
      shapes[i] = g.input_shape;
      continue;
    }
    std::vector<Shape> in;
    for (int p : n.inputs) in.push_back(shapes.at(static_cast<std::size_t>(p)));
    shapes[i] = node_output_shape(n, in);
    if (static_cast<int>(shapes[i].size()) != n.rank + 2) {
      throw DimensionError(node_label(n) + ": declared rank " + std::to_string(n.rank) + " but shape is " +
                           shape_to_string(shapes[i]));
    }
  }
  return shapes;
}

std::vector<ParamSpec> param_specs(const NetworkGraph& g) {
  const std::vector<Shape> shapes = infer_shapes(g);
  std::vector<ParamSpec> specs;
  for (const Node& n : g.nodes) {
    if (n.kind == NodeKind::conv || n.kind == NodeKind::tconv) {
      const std::int64_t in_c = shapes[static_cast<std::size_t>(n.inputs[0])][1];
      specs.push_back({n.name + ".weight", ParamRole::conv_kernel, n.rank, kernel_shape(n, in_c), std::nullopt, n.id});
      if (n.bias) specs.push_back({n.name + ".bias", ParamRole::conv_bias, n.rank, {n.out_channels}, std::nullopt, n.id});
    } else if (n.kind == NodeKind::norm) {
      const std::int64_t c = shapes[static_cast<std::size_t>(n.id)][1];
      specs.push_back({n.name + ".gamma", ParamRole::norm_gamma, n.rank, {c}, n.norm_mode, n.id});
      specs.push_back({n.name + ".beta", ParamRole::norm_beta, n.rank, {c}, n.norm_mode, n.id});
      if (n.norm_mode == NormMode::batch) {
        specs.push_back({n.name + ".running_mean", ParamRole::norm_running_mean, n.rank, {c}, n.norm_mode, n.id});
        specs.push_back({n.name + ".running_var", ParamRole::norm_running_var, n.rank, {c}, n.norm_mode, n.id});
      }
    }
  }
  return specs;
}

std::int64_t count_parameters(const NetworkGraph& g) {
  std::int64_t total = 0;
  for (const auto& s : param_specs(g))
    if (is_trainable_role(s.role)) total += shape_numel(s.shape);
  return total;
}

std::string graph_to_json(const NetworkGraph& g) {
  using nlohmann::ordered_json;
  const std::vector<Shape> shapes = infer_shapes(g);
  ordered_json j;
  j["arch"] = g.arch;
  j["input_shape"] = g.input_shape;
  j["entry"] = g.entry;
  j["exit"] = g.exit;
  j["parameters"] = count_parameters(g);
  ordered_json nodes = ordered_json::array();
  for (const Node& n : g.nodes) {
    ordered_json o;
    o["id"] = n.id;
    o["kind"] = to_string(n.kind);
    o["name"] = n.name;
    o["inputs"] = n.inputs;
    o["rank"] = n.rank;
    o["shape"] = shapes[static_cast<std::size_t>(n.id)];
    switch (n.kind) {
      case NodeKind::conv:
      case NodeKind::tconv:
        o["out_channels"] = n.out_channels;
        o["kernel"] = n.kernel;
        o["stride"] = n.stride;
        o["padding"] = n.padding;
        o["bias"] = n.bias;
        break;
      case NodeKind::norm:
        o["mode"] = to_string(n.norm_mode);
        o["epsilon"] = n.epsilon;
        break;
      case NodeKind::act: o["activation"] = to_string(n.activation); break;
      case NodeKind::upsample: o["factor"] = n.factor; break;
      case NodeKind::unfold_depth: o["depth"] = n.depth; break;
      default: break;
    }
    if (n.frozen) o["frozen"] = true;
    nodes.push_back(o);
  }
  j["nodes"] = nodes;
  return j.dump(2) + "\n";
}

template <typename T>
WeightStore<T> init_store(const NetworkGraph& g, std::uint64_t seed) {
  WeightStore<T> store;
  store.meta().source = g.arch;
  for (const ParamSpec& s : param_specs(g)) {
    Tensor<T> value(s.shape);
    switch (s.role) {
      case ParamRole::conv_kernel: {
        const Node& n = g.nodes[static_cast<std::size_t>(s.node)];
        double fan_in = 1;
        for (std::size_t a = 2; a < s.shape.size(); ++a) fan_in *= static_cast<double>(s.shape[a]);
        if (n.kind == NodeKind::conv) {
          fan_in *= static_cast<double>(s.shape[1]);
        } else {
          fan_in *= static_cast<double>(s.shape[0]);
          for (int st : n.stride) fan_in /= st;
        }
        std::mt19937_64 rng(seed ^ fnv1a(s.name));
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / std::max(fan_in, 1.0)));
        for (auto& v : value.data()) v = static_cast<T>(normal(rng));
        break;
      }
      case ParamRole::norm_gamma:
      case ParamRole::norm_running_var:
        for (auto& v : value.data()) v = T(1);
        break;
      default: break;
    }
    store.add(s.name, s.role, s.rank, std::move(value), s.norm);
  }
  return store;
}

template <typename T>
void check_store(const NetworkGraph& g, const WeightStore<T>& store) {
  std::vector<std::string> problems;
  for (const ParamSpec& s : param_specs(g)) {
    const StoreEntry<T>* e = store.find(s.name);
    const std::string where = "node " + std::to_string(s.node) + ": ";
    if (!e) {
      problems.push_back(where + s.name + " missing");
    } else if (e->value.shape() != s.shape || e->role != s.role) {
      problems.push_back(where + s.name + " is " + to_string(e->role) + " " + shape_to_string(e->value.shape()) +
                         ", expected " + to_string(s.role) + " " + shape_to_string(s.shape));
    }
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << "weight store does not fit graph '" << g.arch << "':";
    for (const auto& p : problems) os << "\n  " << p;
    throw ValidationError(os.str());
  }
}

template WeightStore<float> init_store(const NetworkGraph&, std::uint64_t);
template WeightStore<double> init_store(const NetworkGraph&, std::uint64_t);
template void check_store(const NetworkGraph&, const WeightStore<float>&);
template void check_store(const NetworkGraph&, const WeightStore<double>&);

// --- builder -----------------------------------------------------------------------

GraphBuilder::GraphBuilder(std::string arch, Shape input_shape)
    : arch_(std::move(arch)), input_shape_(std::move(input_shape)) {
  if (input_shape_.size() < 3 || input_shape_.size() > 5) {
    throw DimensionError("graph input must be [N, C, spatial...], got " + shape_to_string(input_shape_));
  }
  Node n;
  n.kind = NodeKind::input;
  n.name = "input";
  n.rank = static_cast<int>(input_shape_.size()) - 2;
  push(std::move(n), input_shape_[1]);
}

int GraphBuilder::push(Node n, std::int64_t channels) {
  n.id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));
  channels_.push_back(channels);
  return nodes_.back().id;
}

int GraphBuilder::conv(const std::string& name, int in, std::int64_t out_channels, std::vector<int> kernel,
                       std::vector<int> stride, std::vector<int> padding, bool bias) {
  Node n;
  n.kind = NodeKind::conv;
  n.name = name;
  n.inputs = {in};
  n.rank = rank(in);
  n.out_channels = out_channels;
  n.kernel = std::move(kernel);
  n.stride = std::move(stride);
  n.padding = std::move(padding);
  n.bias = bias;
  return push(std::move(n), out_channels);
}

int GraphBuilder::tconv(const std::string& name, int in, std::int64_t out_channels, std::vector<int> kernel,
                        std::vector<int> stride, std::vector<int> padding, bool bias) {
  const int id = conv(name, in, out_channels, std::move(kernel), std::move(stride), std::move(padding), bias);
  nodes_.back().kind = NodeKind::tconv;
  return id;
}

int GraphBuilder::norm(const std::string& name, int in, NormMode mode, double epsilon) {
  Node n;
  n.kind = NodeKind::norm;
  n.name = name;
  n.inputs = {in};
  n.rank = rank(in);
  n.norm_mode = mode;
  n.epsilon = epsilon;
  return push(std::move(n), channels(in));
}

int GraphBuilder::act(const std::string& name, int in, Activation kind) {
  Node n;
  n.kind = NodeKind::act;
  n.name = name;
  n.inputs = {in};
  n.rank = rank(in);
  n.activation = kind;
  return push(std::move(n), channels(in));
}

int GraphBuilder::upsample(const std::string& name, int in, std::vector<int> factor) {
  Node n;
  n.kind = NodeKind::upsample;
  n.name = name;
  n.inputs = {in};
  n.rank = rank(in);
  n.factor = std::move(factor);
  return push(std::move(n), channels(in));
}

int GraphBuilder::concat(const std::string& name, std::vector<int> ins) {
  Node n;
  n.kind = NodeKind::concat;
  n.name = name;
  n.rank = rank(ins.at(0));
  std::int64_t c = 0;
  for (int i : ins) c += channels(i);
  n.inputs = std::move(ins);
  return push(std::move(n), c);
}

int GraphBuilder::fold_depth(const std::string& name, int in) {
  Node n;
  n.kind = NodeKind::fold_depth;
  n.name = name;
  n.inputs = {in};
  n.rank = 2;
  return push(std::move(n), channels(in));
}

int GraphBuilder::unfold_depth(const std::string& name, int in, std::int64_t depth) {
  Node n;
  n.kind = NodeKind::unfold_depth;
  n.name = name;
  n.inputs = {in};
  n.rank = 3;
  n.depth = depth;
  return push(std::move(n), channels(in));
}

int GraphBuilder::output(int in) {
  Node n;
  n.kind = NodeKind::output;
  n.name = "output";
  n.inputs = {in};
  n.rank = rank(in);
  return push(std::move(n), channels(in));
}

void GraphBuilder::freeze_prefix(const std::string& prefix) {
  for (auto& n : nodes_)
    if (n.name.rfind(prefix, 0) == 0) n.frozen = true;
}

NetworkGraph GraphBuilder::finish() {
  NetworkGraph g;
  g.arch = arch_;
  g.input_shape = input_shape_;
  g.nodes = nodes_;
  g.entry = 0;
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::output) g.exit = n.id;
  validate_graph(g);
  return g;
}

}  // namespace crossdim
