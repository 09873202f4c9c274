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

#include <optional>
#include <vector>

#include "crossdim/graph.hpp"

namespace crossdim {

enum class RunMode { train, infer };

/// Activations recorded by run_graph. In train mode every node output and
/// every normalization statistic is kept for run_backward; in infer mode
/// intermediates are released as soon as their last consumer has run.
template <typename T>
struct Tape {
  RunMode mode = RunMode::infer;
  std::vector<std::optional<Tensor<T>>> values;
  std::vector<std::optional<NormForward<T>>> norms;
  int exit = -1;

  const Tensor<T>& output() const { return *values.at(static_cast<std::size_t>(exit)); }
};

/// Executes the graph in topological order. The store is read only.
/// Throws DimensionError if x does not match the entry shape, LookupError
/// (with the node id) for a missing parameter, and NumericError naming the
/// first node whose output is not finite.
template <typename T>
Tape<T> run_graph(const NetworkGraph& g, const WeightStore<T>& store, const Tensor<T>& x, RunMode mode);

template <typename T>
Tensor<T> forward(const NetworkGraph& g, const WeightStore<T>& store, const Tensor<T>& x, RunMode mode) {
  Tape<T> tape = run_graph(g, store, x, mode);
  return std::move(*tape.values[static_cast<std::size_t>(tape.exit)]);
}

/// Back-propagates grad_output (shaped like the graph output) through a
/// train-mode tape. Parameter gradients of non-frozen nodes are accumulated
/// into the grad slots of the store entries. Returns the gradient with
/// respect to the graph input.
template <typename T>
Tensor<T> run_backward(const NetworkGraph& g, const Tape<T>& tape, WeightStore<T>& store,
                       const Tensor<T>& grad_output);

/// Exponential update of batch-norm running statistics from a train-mode tape:
/// r <- (1 - momentum) r + momentum * batch_stat, with the unbiased variance.
/// Frozen nodes are left untouched.
template <typename T>
void update_running_stats(const NetworkGraph& g, const Tape<T>& tape, WeightStore<T>& store, double momentum = 0.1);

}  // namespace crossdim
