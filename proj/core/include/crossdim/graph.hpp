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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crossdim/ops.hpp"
#include "crossdim/weight_store.hpp"

namespace crossdim {

enum class NodeKind { input, conv, tconv, norm, act, upsample, concat, fold_depth, unfold_depth, output };

std::string to_string(NodeKind k);

/// One layer of a NetworkGraph. Parameterized nodes (conv, tconv, norm) look
/// up their tensors in a WeightStore under "<name>.weight", "<name>.bias",
/// "<name>.gamma", "<name>.beta", "<name>.running_mean", "<name>.running_var".
struct Node {
  int id = 0;
  NodeKind kind = NodeKind::input;
  std::string name;
  std::vector<int> inputs;
  int rank = 2;  // spatial rank of the output

  // conv / tconv
  std::int64_t out_channels = 0;
  std::vector<int> kernel;
  std::vector<int> stride;
  std::vector<int> padding;
  bool bias = false;

  // norm
  NormMode norm_mode = NormMode::instance;
  double epsilon = 1e-5;

  // act
  Activation activation = Activation::identity;

  // upsample
  std::vector<int> factor;

  // unfold_depth
  std::int64_t depth = 1;

  /// Frozen nodes receive no parameter gradients and, for batch norm, always
  /// normalize with running statistics.
  bool frozen = false;

  ConvConfig conv_config() const { return ConvConfig{rank, stride, padding}; }
  NormConfig norm_config() const { return NormConfig{norm_mode, epsilon}; }
};

/// Declared parameter of a graph: what a WeightStore must provide.
struct ParamSpec {
  std::string name;
  ParamRole role;
  int rank;
  Shape shape;
  std::optional<NormMode> norm;
  int node;
};

/// Directed acyclic graph of layers in topological order (node i only reads
/// nodes < i). Exactly one input node and one output node.
struct NetworkGraph {
  std::string arch;
  Shape input_shape;  // [N, C, spatial...]
  std::vector<Node> nodes;
  int entry = 0;
  int exit = -1;

  const Node& node(const std::string& name) const;
};

/// Throws ValidationError describing the first structural violation.
void validate_graph(const NetworkGraph& g);

/// Output shape of every node, derived from the entry shape alone.
std::vector<Shape> infer_shapes(const NetworkGraph& g);

std::vector<ParamSpec> param_specs(const NetworkGraph& g);

/// Number of trainable scalars (running statistics excluded).
std::int64_t count_parameters(const NetworkGraph& g);

/// Deterministic JSON description of the graph (nodes, attributes, shapes).
std::string graph_to_json(const NetworkGraph& g);

/// Fresh parameters for a graph: He-normal conv kernels, zero biases, unit
/// gammas, zero betas, running mean 0 / var 1. Each entry draws from its own
/// stream keyed by (seed, entry name), so graphs with equal topology get
/// identical values.
template <typename T>
WeightStore<T> init_store(const NetworkGraph& g, std::uint64_t seed);

/// Throws ValidationError listing every spec the store lacks or mis-shapes.
template <typename T>
void check_store(const NetworkGraph& g, const WeightStore<T>& store);

/// Incrementally assembles a graph and tracks channel counts per node.
class GraphBuilder {
 public:
  GraphBuilder(std::string arch, Shape input_shape);

  int input() const { return 0; }
  std::int64_t channels(int node) const { return channels_.at(static_cast<std::size_t>(node)); }
  int rank(int node) const { return nodes_.at(static_cast<std::size_t>(node)).rank; }

  int conv(const std::string& name, int in, std::int64_t out_channels, std::vector<int> kernel,
           std::vector<int> stride, std::vector<int> padding, bool bias);
  int tconv(const std::string& name, int in, std::int64_t out_channels, std::vector<int> kernel,
            std::vector<int> stride, std::vector<int> padding, bool bias);
  int norm(const std::string& name, int in, NormMode mode, double epsilon = 1e-5);
  int act(const std::string& name, int in, Activation kind);
  int upsample(const std::string& name, int in, std::vector<int> factor);
  int concat(const std::string& name, std::vector<int> ins);
  int fold_depth(const std::string& name, int in);
  int unfold_depth(const std::string& name, int in, std::int64_t depth);
  int output(int in);

  /// Marks every node whose name starts with `prefix` as frozen.
  void freeze_prefix(const std::string& prefix);

  NetworkGraph finish();

 private:
  int push(Node n, std::int64_t channels);

  std::string arch_;
  Shape input_shape_;
  std::vector<Node> nodes_;
  std::vector<std::int64_t> channels_;
};

}  // namespace crossdim
