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

#include "crossdim/runner.hpp"

namespace crossdim {

namespace {

std::string label(const Node& n) { return "node " + std::to_string(n.id) + " (" + n.name + ")"; }

template <typename T>
const StoreEntry<T>& param(const WeightStore<T>& store, const Node& n, const std::string& suffix) {
  const StoreEntry<T>* e = store.find(n.name + suffix);
  if (!e) throw LookupError(label(n) + ": weight entry '" + n.name + suffix + "' not found");
  return *e;
}

template <typename T>
StoreEntry<T>& param(WeightStore<T>& store, const Node& n, const std::string& suffix) {
  StoreEntry<T>* e = store.find(n.name + suffix);
  if (!e) throw LookupError(label(n) + ": weight entry '" + n.name + suffix + "' not found");
  return *e;
}

template <typename T>
void accumulate(std::optional<Tensor<T>>& slot, Tensor<T>&& g) {
  if (!slot) {
    slot = std::move(g);
    return;
  }
  auto dst = slot->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void add_param_grad(StoreEntry<T>& e, const Tensor<T>& g) {
  e.value.ensure_grad();
  auto dst = e.value.grad();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
Tape<T> run_graph(const NetworkGraph& g, const WeightStore<T>& store, const Tensor<T>& x, RunMode mode) {
  if (x.shape() != g.input_shape) {
    throw DimensionError("graph '" + g.arch + "' expects input " + shape_to_string(g.input_shape) + ", got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t count = g.nodes.size();
  Tape<T> tape;
  tape.mode = mode;
  tape.exit = g.exit;
  tape.values.resize(count);
  tape.norms.resize(count);
  std::vector<int> last_use(count, -1);
  for (const Node& n : g.nodes)
    for (int p : n.inputs) last_use[static_cast<std::size_t>(p)] = n.id;

  for (std::size_t i = 0; i < count; ++i) {
    const Node& n = g.nodes[i];
    auto in = [&](std::size_t k) -> const Tensor<T>& {
      return *tape.values[static_cast<std::size_t>(n.inputs[k])];
    };
    Tensor<T> y;
    switch (n.kind) {
      case NodeKind::input: y = x; break;
      case NodeKind::output: y = in(0); break;
      case NodeKind::conv:
      case NodeKind::tconv: {
        const Tensor<T>& w = param(store, n, ".weight").value;
        const Tensor<T>* b = n.bias ? &param(store, n, ".bias").value : nullptr;
        y = n.kind == NodeKind::conv ? conv_forward(in(0), w, b, n.conv_config())
                                     : transposed_conv_forward(in(0), w, b, n.conv_config());
        break;
      }
      case NodeKind::norm: {
        const Tensor<T>& gamma = param(store, n, ".gamma").value;
        const Tensor<T>& beta = param(store, n, ".beta").value;
        const Tensor<T>* rm = nullptr;
        const Tensor<T>* rv = nullptr;
        if (n.norm_mode == NormMode::batch) {
          rm = &param(store, n, ".running_mean").value;
          rv = &param(store, n, ".running_var").value;
        }
        const bool batch_stats = mode == RunMode::train && !n.frozen;
        NormForward<T> f = normalize_forward(in(0), gamma, beta, rm, rv, n.norm_config(), batch_stats);
        y = std::move(f.y);
        if (mode == RunMode::train) tape.norms[i] = std::move(f);
        break;
      }
      case NodeKind::act: y = activation(in(0), n.activation); break;
      case NodeKind::upsample: y = nearest_upsample(in(0), n.factor); break;
      case NodeKind::concat: {
        std::vector<const Tensor<T>*> xs;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) xs.push_back(&in(k));
        y = concat_channels(xs);
        break;
      }
      case NodeKind::fold_depth: y = fold_depth(in(0)); break;
      case NodeKind::unfold_depth: y = unfold_depth(in(0), n.depth); break;
    }
    if (!y.all_finite()) throw NumericError("non-finite activation at " + label(n) + " of graph '" + g.arch + "'");
    tape.values[i] = std::move(y);
    if (mode == RunMode::infer) {
      for (int p : n.inputs) {
        if (last_use[static_cast<std::size_t>(p)] == n.id && p != g.exit) tape.values[static_cast<std::size_t>(p)].reset();
      }
    }
  }
  return tape;
}

template <typename T>
Tensor<T> run_backward(const NetworkGraph& g, const Tape<T>& tape, WeightStore<T>& store,
                       const Tensor<T>& grad_output) {
  if (tape.mode != RunMode::train) throw ValidationError("run_backward needs a train-mode tape");
  if (tape.values.size() != g.nodes.size()) throw ValidationError("tape does not belong to graph '" + g.arch + "'");
  const Tensor<T>& out = tape.output();
  if (grad_output.shape() != out.shape()) {
    throw DimensionError("output gradient " + shape_to_string(grad_output.shape()) + " does not match output " +
                         shape_to_string(out.shape()));
  }
  std::vector<std::optional<Tensor<T>>> grads(g.nodes.size());
  grads[static_cast<std::size_t>(g.exit)] = grad_output;

  for (std::size_t i = g.nodes.size(); i-- > 1;) {
    if (!grads[i]) continue;
    const Node& n = g.nodes[i];
    const Tensor<T> gy = std::move(*grads[i]);
    grads[i].reset();
    auto value = [&](int id) -> const Tensor<T>& { return *tape.values[static_cast<std::size_t>(id)]; };
    auto slot = [&](std::size_t k) -> std::optional<Tensor<T>>& {
      return grads[static_cast<std::size_t>(n.inputs[k])];
    };
    switch (n.kind) {
      case NodeKind::input: break;
      case NodeKind::output: accumulate(slot(0), Tensor<T>(gy)); break;
      case NodeKind::conv:
      case NodeKind::tconv: {
        StoreEntry<T>& w = param(store, n, ".weight");
        ConvGrads<T> cg = n.kind == NodeKind::conv
                              ? conv_backward(value(n.inputs[0]), w.value, n.bias, n.conv_config(), gy)
                              : transposed_conv_backward(value(n.inputs[0]), w.value, n.bias, n.conv_config(), gy);
        if (!n.frozen) {
          add_param_grad(w, cg.grad_kernel);
          if (n.bias) add_param_grad(param(store, n, ".bias"), *cg.grad_bias);
        }
        accumulate(slot(0), std::move(cg.grad_x));
        break;
      }
      case NodeKind::norm: {
        StoreEntry<T>& gamma = param(store, n, ".gamma");
        NormGrads<T> ng = normalize_backward(value(n.inputs[0]), gamma.value, n.norm_config(), *tape.norms[i], gy);
        if (!n.frozen) {
          add_param_grad(gamma, ng.grad_gamma);
          add_param_grad(param(store, n, ".beta"), ng.grad_beta);
        }
        accumulate(slot(0), std::move(ng.grad_x));
        break;
      }
      case NodeKind::act:
        accumulate(slot(0), activation_backward(value(n.inputs[0]), value(n.id), n.activation, gy));
        break;
      case NodeKind::upsample:
        accumulate(slot(0), nearest_upsample_backward(gy, n.factor, value(n.inputs[0]).shape()));
        break;
      case NodeKind::concat: {
        std::vector<std::int64_t> sizes;
        for (int p : n.inputs) sizes.push_back(value(p).dim(1));
        std::vector<Tensor<T>> parts = split_channels(gy, sizes);
        for (std::size_t k = 0; k < parts.size(); ++k) accumulate(slot(k), std::move(parts[k]));
        break;
      }
      case NodeKind::fold_depth: accumulate(slot(0), unfold_depth(gy, value(n.inputs[0]).dim(2))); break;
      case NodeKind::unfold_depth: accumulate(slot(0), fold_depth(gy)); break;
    }
  }
  if (!grads[0]) return Tensor<T>(g.input_shape);
  return std::move(*grads[0]);
}

template <typename T>
void update_running_stats(const NetworkGraph& g, const Tape<T>& tape, WeightStore<T>& store, double momentum) {
  if (!(momentum >= 0 && momentum <= 1)) throw ConfigError("running-stat momentum must lie in [0, 1]");
  if (tape.mode != RunMode::train) return;
  for (const Node& n : g.nodes) {
    if (n.kind != NodeKind::norm || n.norm_mode != NormMode::batch || n.frozen) continue;
    const auto& f = tape.norms[static_cast<std::size_t>(n.id)];
    if (!f || !f->batch_statistics) continue;
    const Tensor<T>& x = *tape.values[static_cast<std::size_t>(n.inputs[0])];
    const double count = static_cast<double>(x.numel()) / static_cast<double>(x.dim(1));
    const double unbias = count > 1 ? count / (count - 1) : 1.0;
    Tensor<T>& rm = param(store, n, ".running_mean").value;
    Tensor<T>& rv = param(store, n, ".running_var").value;
    for (std::size_t c = 0; c < rm.numel(); ++c) {
      rm[c] = static_cast<T>((1 - momentum) * rm[c] + momentum * f->mean[c]);
      rv[c] = static_cast<T>((1 - momentum) * rv[c] + momentum * f->var[c] * unbias);
    }
  }
}

template Tape<float> run_graph(const NetworkGraph&, const WeightStore<float>&, const Tensor<float>&, RunMode);
template Tape<double> run_graph(const NetworkGraph&, const WeightStore<double>&, const Tensor<double>&, RunMode);
template Tensor<float> run_backward(const NetworkGraph&, const Tape<float>&, WeightStore<float>&,
                                    const Tensor<float>&);
template Tensor<double> run_backward(const NetworkGraph&, const Tape<double>&, WeightStore<double>&,
                                     const Tensor<double>&);
template void update_running_stats(const NetworkGraph&, const Tape<float>&, WeightStore<float>&, double);
template void update_running_stats(const NetworkGraph&, const Tape<double>&, WeightStore<double>&, double);

}  // namespace crossdim
