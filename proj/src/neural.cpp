// Copyright 2026 The muevo Authors.
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

#include "muevo/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "muevo/error.hpp"
#include "muevo/kernels.hpp"

namespace muevo {

namespace {

constexpr std::uint64_t kTagShuffle = 0x5B0F;
constexpr std::size_t kEvalChunk = 512;

bool is_affine(ComponentKind k) {
  return k == ComponentKind::kDense || k == ComponentKind::kEmbeddingStub;
}

Layer unpack(const Component& c) {
  Layer l;
  l.kind = c.kind;
  l.in_dim = c.in_dim;
  l.out_dim = c.out_dim;
  l.params.assign(c.params.begin(), c.params.end());
  return l;
}

void layer_forward(const Layer& layer, const Matrix& in, Matrix& out) {
  const std::size_t rows = in.rows();
  out = Matrix(rows, layer.out_dim);
  if (is_affine(layer.kind)) {
    const std::size_t n_in = layer.in_dim;
    const std::span<const double> w(layer.params);
    const double* bias = layer.params.data() + n_in * layer.out_dim;
    for (std::size_t b = 0; b < rows; ++b) {
      const auto x = in.row(b);
      auto y = out.row(b);
      for (std::size_t o = 0; o < layer.out_dim; ++o) {
        y[o] = bias[o] + kernels::dot(w.subspan(o * n_in, n_in), x);
      }
    }
  } else {
    const auto src = in.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::tanh(src[i]);
  }
}

// Forward through layers [from, to).
Matrix forward_range(const Network& net, std::size_t from, std::size_t to,
                     Matrix x) {
  Matrix next;
  for (std::size_t i = from; i < to; ++i) {
    layer_forward(net.layers[i], x, next);
    std::swap(x, next);
  }
  return x;
}

// Loss and gradients for layers [start, end) given the activations entering
// layer `start`.
LossGrads loss_and_grads_from(const Network& net, std::size_t start,
                              const Matrix& features, std::span<const int> labels,
                              const std::vector<bool>& trainable) {
  const std::size_t rows = features.rows();
  if (rows == 0) throw Error(ErrorCode::kEmptyBatch, "empty batch");
  if (labels.size() != rows) {
    throw Error(ErrorCode::kDimMismatch, "label count differs from batch rows");
  }
  const std::size_t n_layers = net.layers.size();

  std::vector<Matrix> acts;
  acts.reserve(n_layers - start + 1);
  acts.push_back(features);
  for (std::size_t i = start; i < n_layers; ++i) {
    Matrix out;
    layer_forward(net.layers[i], acts.back(), out);
    acts.push_back(std::move(out));
  }

  const Matrix& logits = acts.back();
  const std::size_t classes = logits.cols();
  Matrix delta(rows, classes);
  double loss = 0.0;
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t b = 0; b < rows; ++b) {
    const auto z = logits.row(b);
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw Error(ErrorCode::kDimMismatch, "label outside class range");
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    loss += lse - z[static_cast<std::size_t>(y)];
    auto d = delta.row(b);
    for (std::size_t k = 0; k < classes; ++k) {
      d[k] = std::exp(z[k] - lse) * inv_rows;
    }
    d[static_cast<std::size_t>(y)] -= inv_rows;
  }

  LossGrads out;
  out.loss = loss * inv_rows;
  out.grads.resize(n_layers);

  std::size_t lowest = n_layers - 1;
  for (std::size_t i = start; i < n_layers; ++i) {
    if (trainable[i]) {
      lowest = i;
      break;
    }
  }

  for (std::size_t i = n_layers; i-- > lowest;) {
    const Layer& layer = net.layers[i];
    const Matrix& x = acts[i - start];
    const bool need_dx = i > lowest;
    if (is_affine(layer.kind)) {
      const std::size_t n_in = layer.in_dim;
      const std::size_t n_out = layer.out_dim;
      if (trainable[i]) {
        std::vector<double> g(layer.params.size(), 0.0);
        const std::span<double> gw(g);
        double* gb = g.data() + n_in * n_out;
        for (std::size_t b = 0; b < rows; ++b) {
          const auto d = delta.row(b);
          const auto xb = x.row(b);
          for (std::size_t o = 0; o < n_out; ++o) {
            kernels::axpy(d[o], xb, gw.subspan(o * n_in, n_in));
            gb[o] += d[o];
          }
        }
        out.grads[i] = std::move(g);
      }
      if (need_dx) {
        Matrix dx(rows, n_in);
        const std::span<const double> w(layer.params);
        for (std::size_t b = 0; b < rows; ++b) {
          const auto d = delta.row(b);
          auto dxb = dx.row(b);
          for (std::size_t o = 0; o < n_out; ++o) {
            kernels::axpy(d[o], w.subspan(o * n_in, n_in), dxb);
          }
        }
        delta = std::move(dx);
      }
    } else {
      if (trainable[i]) out.grads[i] = std::vector<double>{};
      if (need_dx) {
        const auto y = acts[i - start + 1].data();
        auto d = delta.data();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] *= 1.0 - y[k] * y[k];
      }
    }
  }
  return out;
}

std::vector<bool> trainable_mask(std::size_t n_layers,
                                 const std::set<std::size_t>& unfrozen) {
  std::vector<bool> mask(n_layers, false);
  for (std::size_t p : unfrozen) {
    if (p >= n_layers) {
      throw Error(ErrorCode::kIllegalMutation,
                  "unfrozen position " + std::to_string(p) + " outside path");
    }
    mask[p] = true;
  }
  mask[n_layers - 1] = true;
  return mask;
}

}  // namespace

Network build_network(const ModelPath& path, const SystemState& state) {
  if (path.component_ids.empty() || path.head_id.empty()) {
    throw Error(ErrorCode::kDimMismatch, "path needs a body and a head");
  }
  Network net;
  net.resolution = path.hyperparams.input_resolution;
  for (const auto& id : path.all_component_ids()) {
    const Component& c = state.at(id);
    if (c.kind != ComponentKind::kDense && c.kind != ComponentKind::kActivation &&
        c.kind != ComponentKind::kEmbeddingStub) {
      throw Error(ErrorCode::kUnsupportedComponentKind, "unsupported kind in " + id);
    }
    if (!net.layers.empty() && net.layers.back().out_dim != c.in_dim) {
      throw Error(ErrorCode::kDimMismatch,
                  "dimension mismatch at position " + std::to_string(net.layers.size()));
    }
    net.layers.push_back(unpack(c));
  }
  net.input_dim = net.layers.front().in_dim;
  return net;
}

Matrix select_features(const Matrix& inputs, Resolution resolution,
                       std::uint32_t expected_width) {
  const std::size_t width = input_width(static_cast<std::uint32_t>(inputs.cols()), resolution);
  if (width != expected_width) {
    throw Error(ErrorCode::kDimMismatch,
                "input width " + std::to_string(width) + " != embedding in_dim " +
                    std::to_string(expected_width));
  }
  if (resolution == Resolution::kHigh) return inputs;
  Matrix out(inputs.rows(), width);
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    const auto src = inputs.row(r);
    auto dst = out.row(r);
    for (std::size_t k = 0; k < width; ++k) dst[k] = src[2 * k];
  }
  return out;
}

Matrix forward(const Network& net, const Matrix& inputs) {
  if (inputs.cols() != net.input_dim) {
    throw Error(ErrorCode::kDimMismatch, "batch width does not match first component");
  }
  return forward_range(net, 0, net.layers.size(), inputs);
}

Matrix forward(const ModelPath& path, const SystemState& state, const Batch& batch) {
  const Network net = build_network(path, state);
  return forward(net, select_features(batch.inputs, net.resolution, net.input_dim));
}

LossGrads loss_and_grads(const Network& net, const Matrix& features,
                         std::span<const int> labels,
                         const std::vector<bool>& trainable) {
  if (features.cols() != net.input_dim && features.rows() > 0) {
    throw Error(ErrorCode::kDimMismatch, "batch width does not match first component");
  }
  std::vector<bool> mask = trainable;
  mask.resize(net.layers.size(), false);
  mask.back() = true;
  return loss_and_grads_from(net, 0, features, labels, mask);
}

LossGrads loss_and_grads(const ModelPath& path, const SystemState& state,
                         const Batch& batch, const std::set<std::size_t>& unfrozen) {
  if (batch.labels.empty()) throw Error(ErrorCode::kEmptyBatch, "empty batch");
  const Network net = build_network(path, state);
  return loss_and_grads_from(
      net, 0, select_features(batch.inputs, net.resolution, net.input_dim),
      batch.labels, trainable_mask(net.layers.size(), unfrozen));
}

int planned_steps(const TrainBudget& budget, const HyperParams& hp,
                  std::size_t train_size) {
  if (budget.epochs < 1 || hp.batch_size < 1 || budget.samples_cap < hp.batch_size) {
    return 0;
  }
  const int epochs = std::min(hp.epochs, budget.epochs);
  const std::size_t per_epoch =
      budget.equal_budget
          ? static_cast<std::size_t>(budget.samples_cap)
          : std::min(train_size, static_cast<std::size_t>(budget.samples_cap));
  return epochs * static_cast<int>(per_epoch / static_cast<std::size_t>(hp.batch_size));
}

TrainOutcome train_child(const ModelPath& path, const SystemState& state,
                         const std::set<std::size_t>& unfrozen,
                         const TaskData& task, const TrainBudget& budget,
                         std::uint64_t seed) {
  const HyperParams& hp = path.hyperparams;
  if (budget.epochs < 1 || budget.samples_cap < hp.batch_size || hp.epochs < 1) {
    throw Error(ErrorCode::kInvalidBudget,
                "budget needs epochs >= 1 and samples_cap >= batch_size");
  }
  if (task.train.size() == 0) throw Error(ErrorCode::kEmptySplit, "empty train split");
  const int steps_total = planned_steps(budget, hp, task.train.size());
  if (steps_total <= 0) throw Error(ErrorCode::kInvalidBudget, "budget yields zero steps");

  Network net = build_network(path, state);
  const std::vector<bool> mask = trainable_mask(net.layers.size(), unfrozen);
  const std::size_t lowest = static_cast<std::size_t>(
      std::find(mask.begin(), mask.end(), true) - mask.begin());

  // Layers below the lowest trainable one are frozen, so their outputs are
  // computed once for the whole train split.
  const Matrix prefix = forward_range(
      net, 0, lowest, select_features(task.train.x, net.resolution, net.input_dim));

  const std::size_t n = task.train.size();
  const std::size_t bs = static_cast<std::size_t>(hp.batch_size);
  const int epochs = std::min(hp.epochs, budget.epochs);
  const int steps_per_epoch = steps_total / epochs;

  std::vector<std::vector<double>> velocity(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (mask[i]) velocity[i].assign(net.layers[i].params.size(), 0.0);
  }

  CounterRng rng = CounterRng(seed).derive({kTagShuffle});
  std::vector<std::size_t> order;
  std::vector<std::size_t> perm(n);
  Matrix batch(bs, prefix.cols());
  std::vector<int> labels(bs);
  double last_epoch_loss = 0.0;
  int steps = 0;

  for (int e = 0; e < epochs; ++e) {
    const std::size_t need = static_cast<std::size_t>(steps_per_epoch) * bs;
    order.clear();
    while (order.size() < need) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.below(i + 1)]);
      }
      order.insert(order.end(), perm.begin(), perm.end());
    }
    double epoch_loss = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s) {
      for (std::size_t b = 0; b < bs; ++b) {
        const std::size_t idx = order[static_cast<std::size_t>(s) * bs + b];
        const auto src = prefix.row(idx);
        std::copy(src.begin(), src.end(), batch.row(b).begin());
        labels[b] = task.train.y[idx];
      }
      LossGrads lg = loss_and_grads_from(net, lowest, batch, labels, mask);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorCode::kTrainingDiverged, "training loss is not finite");
      }
      epoch_loss += lg.loss;
      for (std::size_t i = lowest; i < net.layers.size(); ++i) {
        if (!mask[i] || net.layers[i].params.empty()) continue;
        kernels::momentum_step(net.layers[i].params, velocity[i], *lg.grads[i],
                               hp.learning_rate, hp.momentum);
      }
      ++steps;
    }
    last_epoch_loss = epoch_loss / steps_per_epoch;
  }

  TrainOutcome outcome;
  outcome.final_train_loss = last_epoch_loss;
  outcome.steps_executed = steps;
  outcome.trained_path = path;
  const std::size_t head = net.head_position();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!mask[i]) continue;
    const Layer& l = net.layers[i];
    std::vector<float> params(l.params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      params[k] = static_cast<float>(l.params[k]);
      if (!std::isfinite(params[k])) {
        throw Error(ErrorCode::kTrainingDiverged, "parameter overflow");
      }
    }
    Component c = make_component(l.kind, l.in_dim, l.out_dim, std::move(params),
                                 task.spec.task_id, static_cast<std::uint32_t>(i));
    if (i == head) {
      outcome.trained_path.head_id = c.id;
    } else {
      outcome.trained_path.component_ids[i] = c.id;
    }
    outcome.new_components.emplace_back(i, std::move(c));
  }
  return outcome;
}

double evaluate(const ModelPath& path, const SystemState& state, const Dataset& split) {
  if (split.size() == 0) throw Error(ErrorCode::kEmptySplit, "empty split");
  const Network net = build_network(path, state);
  const Matrix feats = select_features(split.x, net.resolution, net.input_dim);
  std::size_t correct = 0;
  for (std::size_t start = 0; start < split.size(); start += kEvalChunk) {
    const std::size_t rows = std::min(kEvalChunk, split.size() - start);
    Matrix chunk(rows, feats.cols());
    for (std::size_t r = 0; r < rows; ++r) {
      const auto src = feats.row(start + r);
      std::copy(src.begin(), src.end(), chunk.row(r).begin());
    }
    const Matrix logits = forward_range(net, 0, net.layers.size(), std::move(chunk));
    for (std::size_t r = 0; r < rows; ++r) {
      const auto z = logits.row(r);
      const auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
      if (best == split.y[start + r]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

std::vector<float> init_glorot(std::uint32_t in_dim, std::uint32_t out_dim,
                               CounterRng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::vector<float> p(expected_param_count(ComponentKind::kDense, in_dim, out_dim), 0.0f);
  for (std::size_t i = 0; i < static_cast<std::size_t>(in_dim) * out_dim; ++i) {
    p[i] = static_cast<float>(rng.uniform(-a, a));
  }
  return p;
}

std::vector<float> init_near_identity(std::uint32_t dim, CounterRng& rng) {
  const double a = 0.1 / std::sqrt(static_cast<double>(dim));
  std::vector<float> p(expected_param_count(ComponentKind::kDense, dim, dim), 0.0f);
  for (std::uint32_t o = 0; o < dim; ++o) {
    for (std::uint32_t i = 0; i < dim; ++i) {
      const double base = o == i ? 1.0 : 0.0;
      p[static_cast<std::size_t>(o) * dim + i] = static_cast<float>(base + rng.uniform(-a, a));
    }
  }
  return p;
}

}  // namespace muevo
