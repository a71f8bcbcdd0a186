#pragma once

#include "helpers.hpp"

#include "pgma/graph.hpp"
#include "pgma/model.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

// Central-difference gradient checking shared by the unit and acceptance
// suites.
namespace testing {

using Eigen::Index;
using namespace pgma::model;

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.sensors = 4;
  c.window = 12;
  c.embed_dim = 5;
  c.graph_dim = 5;
  c.temporal_dim = 4;
  c.channels = 2;
  c.mlp_hidden = 6;
  c.slots = 2;
  c.k = 2;
  return c;
}

struct Instance {
  ModelConfig cfg;
  ModelParams params;
  std::vector<pgma::graph::Adjacency> graphs;
  std::vector<Eigen::MatrixXd> windows;
  std::vector<Eigen::VectorXd> targets;
  std::vector<Sample> samples;
};

inline Instance random_instance(std::uint64_t seed, bool use_temporal, Index tcn_layers = 1) {
  Instance in;
  in.cfg = tiny_config();
  in.cfg.use_temporal = use_temporal;
  in.cfg.tcn_layers = tcn_layers;
  if (tcn_layers > 1) in.cfg.window = 16;
  in.params = init_params(in.cfg, seed);
  std::mt19937_64 rng(seed * 31 + 1);
  // Non-default gains and biases so every path carries signal.
  in.params.proj_b = testing::random_matrix(in.cfg.embed_dim, 1, rng, -0.3, 0.3);
  in.params.ln_gain = testing::random_matrix(in.cfg.fused_dim(), 1, rng, 0.5, 1.5);
  in.params.ln_bias = testing::random_matrix(in.cfg.fused_dim(), 1, rng, -0.3, 0.3);
  in.params.mlp1_b = testing::random_matrix(in.cfg.mlp_hidden, 1, rng, -0.3, 0.3);
  in.params.mlp2_b(0) = 0.1;
  if (use_temporal) {
    in.params.reduce_b = testing::random_matrix(in.cfg.temporal_dim, 1, rng, -0.3, 0.3);
    for (auto& layer : in.params.conv) {
      for (auto& bank : layer) bank.bias = testing::random_matrix(in.cfg.channels, 1, rng, -0.1, 0.3);
    }
  }
  for (auto& e : in.params.embeddings) e = testing::random_matrix(in.cfg.sensors, in.cfg.embed_dim, rng);
  in.params.att_a = testing::random_matrix(2 * in.cfg.graph_dim, 1, rng);
  in.graphs = pgma::graph::build_slot_graphs(in.params.embeddings, in.cfg.k);
  for (int b = 0; b < 3; ++b) {
    in.windows.push_back(testing::random_matrix(in.cfg.sensors, in.cfg.window, rng));
    in.targets.push_back(testing::random_matrix(in.cfg.sensors, 1, rng));
  }
  for (int b = 0; b < 3; ++b) in.samples.push_back({&in.windows[b], &in.targets[b], b % in.cfg.slots});
  return in;
}

// Sign pattern of every ReLU / LeakyReLU input over the batch. Central
// differences are only a valid reference when the pattern is the same at
// theta + h and theta - h.
inline std::vector<bool> activation_pattern(const Instance& in) {
  std::vector<bool> bits;
  auto push = [&](const Eigen::MatrixXd& m) {
    for (Index k = 0; k < m.size(); ++k) bits.push_back(m.data()[k] > 0.0);
  };
  for (const auto& s : in.samples) {
    const auto att = attention_coefficients(in.params.embeddings[s.slot], in.graphs[s.slot], in.params.att_w,
                                            in.params.att_a, in.cfg.leaky_slope);
    push(att.logits);
    const auto tr = forward_window(in.cfg, in.params, att, *s.window);
    push(att.alpha * tr.xw);
    for (const auto& layer : tr.temporal.layers) {
      for (const auto& m : layer) push(m);
    }
    push(tr.head.hidden_pre);
  }
  return bits;
}

struct GradientCheck {
  std::vector<std::pair<std::string, double>> errors;
  Index checked = 0;
  Index kinked = 0;
};

// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||) per
// parameter tensor, over coordinates whose perturbation stays on one linear
// piece of every activation.
inline GradientCheck gradient_errors(Instance& in, double h = 1e-3) {
  ModelParams grad;
  loss_and_gradient(in.cfg, in.params, in.graphs, in.samples, &grad);
  auto pv = param_views(in.params);
  const auto gv = param_views(grad);
  GradientCheck out;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (Index e = 0; e < pv[k].size(); ++e) {
      const double analytic = gv[k].data[e];
      a2 += analytic * analytic;  // skipped coordinates still set the tensor's scale
      const double orig = pv[k].data[e];
      pv[k].data[e] = orig + h;
      const double up = loss_and_gradient(in.cfg, in.params, in.graphs, in.samples, nullptr);
      const auto pattern_up = activation_pattern(in);
      pv[k].data[e] = orig - h;
      const double down = loss_and_gradient(in.cfg, in.params, in.graphs, in.samples, nullptr);
      const auto pattern_down = activation_pattern(in);
      pv[k].data[e] = orig;
      if (pattern_up != pattern_down) {
        ++out.kinked;
        continue;
      }
      ++out.checked;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic - numeric) * (analytic - numeric);
      n2 += numeric * numeric;
    }
    const double scale = std::sqrt(std::max(a2, n2));
    out.errors.emplace_back(pv[k].name, scale > 0.0 ? std::sqrt(diff2) / scale : 0.0);
  }
  return out;
}

}  // namespace testing
