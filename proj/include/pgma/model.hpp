#pragma once

#include "pgma/graph.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pgma::model {

using Eigen::Index;

struct ModelConfig {
  Index sensors = 1;
  Index window = 64;
  Index embed_dim = 64;     // input projection width, also the node embedding width
  Index graph_dim = 64;     // output width of the attention transform
  Index temporal_dim = 32;  // width the flattened conv features are reduced to
  Index channels = 8;       // output channels per kernel size
  Index dilation = 1;
  Index tcn_layers = 1;     // layers after the first double the dilation
  std::array<Index, 3> kernel_sizes{2, 3, 5};
  Index mlp_hidden = 128;
  Index slots = 4;
  Index k = 15;
  double leaky_slope = 0.2;
  double ln_eps = 1e-5;
  bool use_temporal = true;

  void validate() const;

  Index max_kernel() const;
  Index layer_dilation(Index layer) const { return dilation << layer; }
  Index layer_in_channels(Index layer) const { return layer == 0 ? 1 : 3 * channels; }
  /// Sequence length entering `layer`; layer == tcn_layers gives the final length.
  Index layer_length(Index layer) const;
  Index temporal_length() const { return layer_length(tcn_layers); }
  Index temporal_features() const { return 3 * channels * temporal_length(); }
  Index fused_dim() const { return (use_temporal ? temporal_dim : 0) + graph_dim; }
};

/// One kernel size worth of filters: weight(o, ci * c + s) is tap s of
/// input channel ci for output channel o.
struct ConvBank {
  Index kernel = 0;
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct ModelParams {
  Eigen::MatrixXd proj_w;  // d x w
  Eigen::VectorXd proj_b;  // d
  std::vector<Eigen::MatrixXd> embeddings;  // G slots, each N x d
  Eigen::MatrixXd att_w;   // d' x d
  Eigen::VectorXd att_a;   // 2 d'  (source half, then neighbor half)
  std::vector<std::array<ConvBank, 3>> conv;  // per temporal layer
  Eigen::MatrixXd reduce_w;  // temporal_dim x 3C*L_out
  Eigen::VectorXd reduce_b;
  Eigen::VectorXd ln_gain;
  Eigen::VectorXd ln_bias;
  Eigen::MatrixXd mlp1_w;  // H x F
  Eigen::VectorXd mlp1_b;
  Eigen::MatrixXd mlp2_w;  // 1 x H
  Eigen::VectorXd mlp2_b;  // 1
};

/// Flat view of one parameter tensor. Views of two ModelParams built from the
/// same config line up index by index.
struct ParamView {
  std::string name;
  double* data;
  Index rows;
  Index cols;
  Index size() const { return rows * cols; }
  std::span<double> span() const { return {data, static_cast<std::size_t>(size())}; }
};

std::vector<ParamView> param_views(ModelParams& params);
std::vector<ParamView> param_views(const ModelParams& params);  // data must not be written through

ModelParams zeros_like(const ModelParams& params);
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
/// Expected (rows, cols) per parameter name for a config, in view order.
std::vector<std::pair<std::string, std::pair<Index, Index>>> expected_shapes(const ModelConfig& config);

bool all_finite(const ModelParams& params);
double squared_norm(const ModelParams& params);
void scale(ModelParams& params, double factor);
void add_to(ModelParams& dst, const ModelParams& src);

/// Attention of one graph slot. Row i holds the weights node i gives its
/// sources; entries outside N(i) and {i} are exactly zero.
struct SlotAttention {
  Eigen::MatrixXd alpha;   // N x N
  Eigen::MatrixXd logits;  // pre-LeakyReLU scores, N x N, masked
  Eigen::MatrixXd v;       // N x d', embeddings after the shared transform
  const graph::Adjacency* graph = nullptr;
};

SlotAttention attention_coefficients(const Eigen::MatrixXd& embeddings, const graph::Adjacency& adjacency,
                                     const Eigen::MatrixXd& att_w, const Eigen::VectorXd& att_a,
                                     double leaky_slope);

/// x'_i = P window_i + b for every sensor row.
Eigen::MatrixXd project_input(const ModelParams& params, const Eigen::MatrixXd& window);

/// h^s_i = ReLU(sum_j alpha_ij W x'_j), the self term included through alpha_ii.
Eigen::MatrixXd graph_attention_forward(const Eigen::MatrixXd& x_proj, const Eigen::MatrixXd& alpha,
                                        const Eigen::MatrixXd& att_w);

/// Valid-mode causal dilated convolution: out(u) = sum_s f(s) x(t - q s) with
/// t = u + q (c - 1). Output length L - q (c - 1).
std::vector<double> dilated_conv(std::span<const double> x, std::span<const double> filter, Index dilation);

/// Per-sensor multi-scale conv stack.
struct TemporalTrace {
  // layers[l][i] is the post-ReLU output of layer l for sensor i, 3C x L_{l+1}.
  std::vector<std::vector<Eigen::MatrixXd>> layers;
  Eigen::MatrixXd features;  // N x 3C*L_out, row i = channel-major flattening
};

TemporalTrace temporal_module_forward(const ModelConfig& config, const ModelParams& params,
                                      const Eigen::MatrixXd& window);

struct HeadTrace {
  Eigen::MatrixXd fused;       // N x F
  Eigen::MatrixXd normalized;  // layer-norm output before gain/bias
  Eigen::VectorXd inv_std;
  Eigen::MatrixXd hidden_pre;  // N x H
  Eigen::VectorXd prediction;  // N
};

/// Concatenates [h^t | h^s] per node (h^t omitted when temporal is empty),
/// applies LayerNorm and the two-layer MLP.
HeadTrace fuse_and_predict(const ModelConfig& config, const ModelParams& params, const Eigen::MatrixXd& spatial,
                           const Eigen::MatrixXd& temporal);

struct WindowTrace {
  const Eigen::MatrixXd* window = nullptr;
  Eigen::MatrixXd x_proj;       // N x d
  Eigen::MatrixXd xw;           // N x d'
  Eigen::MatrixXd spatial;      // h^s, N x d'
  TemporalTrace temporal;
  Eigen::MatrixXd temporal_reduced;  // N x temporal_dim
  HeadTrace head;
};

WindowTrace forward_window(const ModelConfig& config, const ModelParams& params, const SlotAttention& attention,
                           const Eigen::MatrixXd& window);

/// Accumulates parameter gradients of one window into `grad` given
/// dLoss/dPrediction. The attention part stops at `dalpha`; call
/// `attention_backward` once the slot's dalpha is complete.
void backward_window(const ModelConfig& config, const ModelParams& params, const SlotAttention& attention,
                     const WindowTrace& trace, const Eigen::VectorXd& d_prediction, ModelParams& grad,
                     Eigen::MatrixXd& dalpha);

/// Pushes dLoss/dalpha of one slot into att_w, att_a and the slot embeddings.
void attention_backward(const ModelConfig& config, const ModelParams& params, Index slot,
                        const SlotAttention& attention, const Eigen::MatrixXd& dalpha, ModelParams& grad);

struct Sample {
  const Eigen::MatrixXd* window;
  const Eigen::VectorXd* target;
  Index slot;
};

/// Mean squared error over sensors and samples.
double l2_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed);

/// Loss over `samples` and, when `grad` is non-null, its full gradient
/// (overwritten). Adjacencies are held fixed. With threads > 1 the samples are
/// split into contiguous chunks whose gradients are summed in chunk order.
double loss_and_gradient(const ModelConfig& config, const ModelParams& params,
                         const std::vector<graph::Adjacency>& graphs, std::span<const Sample> samples,
                         ModelParams* grad, int threads = 1);

/// Inference helper that caches per-slot attention.
class Predictor {
 public:
  Predictor(ModelConfig config, ModelParams params, std::vector<graph::Adjacency> graphs);
  Predictor(const Predictor&) = delete;
  Predictor& operator=(const Predictor&) = delete;
  Predictor(Predictor&&) = default;

  Eigen::VectorXd predict(const Eigen::MatrixXd& window, Index slot) const;
  const std::vector<graph::Adjacency>& graphs() const { return graphs_; }

 private:
  ModelConfig config_;
  ModelParams params_;
  std::vector<graph::Adjacency> graphs_;
  std::vector<SlotAttention> attention_;
};

}  // namespace pgma::model
