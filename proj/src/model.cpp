#include "pgma/model.hpp"

#include "pgma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace pgma::model {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid model config: " + what);
}

void check_shape(const Eigen::MatrixXd& m, Index rows, Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DataError(std::string(what) + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                    ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

template <class M>
void fill_uniform(M&& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
  }
}

double leaky(double x, double slope) { return x > 0.0 ? x : slope * x; }

template <class Params>
std::vector<ParamView> views_impl(Params& p) {
  std::vector<ParamView> out;
  auto add = [&](std::string name, auto& m) {
    if (m.size() == 0) return;
    out.push_back({std::move(name), const_cast<double*>(m.data()), m.rows(), m.cols()});
  };
  add("proj_w", p.proj_w);
  add("proj_b", p.proj_b);
  for (std::size_t s = 0; s < p.embeddings.size(); ++s) add("embedding" + std::to_string(s), p.embeddings[s]);
  add("att_w", p.att_w);
  add("att_a", p.att_a);
  for (std::size_t l = 0; l < p.conv.size(); ++l) {
    for (std::size_t m = 0; m < 3; ++m) {
      const auto prefix = "conv" + std::to_string(l) + "_" + std::to_string(m);
      add(prefix + "_w", p.conv[l][m].weight);
      add(prefix + "_b", p.conv[l][m].bias);
    }
  }
  add("reduce_w", p.reduce_w);
  add("reduce_b", p.reduce_b);
  add("ln_gain", p.ln_gain);
  add("ln_bias", p.ln_bias);
  add("mlp1_w", p.mlp1_w);
  add("mlp1_b", p.mlp1_b);
  add("mlp2_w", p.mlp2_w);
  add("mlp2_b", p.mlp2_b);
  return out;
}

}  // namespace

Index ModelConfig::max_kernel() const { return *std::max_element(kernel_sizes.begin(), kernel_sizes.end()); }

Index ModelConfig::layer_length(Index layer) const {
  Index len = window;
  for (Index l = 0; l < layer; ++l) len -= layer_dilation(l) * (max_kernel() - 1);
  return len;
}

void ModelConfig::validate() const {
  require(sensors >= 1, "sensors must be >= 1");
  require(window >= 1, "window must be >= 1");
  require(embed_dim >= 1 && graph_dim >= 1 && mlp_hidden >= 1, "dimensions must be >= 1");
  require(slots >= 1, "slots must be >= 1");
  require(k >= 1, "k must be >= 1");
  require(leaky_slope >= 0.0 && ln_eps > 0.0, "slope must be >= 0 and layer-norm epsilon > 0");
  if (use_temporal) {
    require(temporal_dim >= 1 && channels >= 1, "temporal dimensions must be >= 1");
    require(dilation >= 1 && tcn_layers >= 1 && tcn_layers <= 16, "dilation >= 1 and 1 <= tcn_layers <= 16");
    for (auto c : kernel_sizes) require(c >= 1, "kernel sizes must be >= 1");
    require(temporal_length() >= 1, "window " + std::to_string(window) +
                                        " is shorter than the temporal receptive field");
  }
}

std::vector<ParamView> param_views(ModelParams& params) { return views_impl(params); }
std::vector<ParamView> param_views(const ModelParams& params) { return views_impl(params); }

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z = params;
  for (auto& v : param_views(z)) std::fill(v.span().begin(), v.span().end(), 0.0);
  return z;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const auto fan = [](Index n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
  ModelParams p;
  p.proj_w.resize(cfg.embed_dim, cfg.window);
  fill_uniform(p.proj_w, fan(cfg.window), rng);
  p.proj_b = Eigen::VectorXd::Zero(cfg.embed_dim);

  p.embeddings.resize(cfg.slots);
  for (auto& m : p.embeddings) {
    m.resize(cfg.sensors, cfg.embed_dim);
    fill_uniform(m, fan(cfg.embed_dim), rng);
    for (Index i = 0; i < m.rows(); ++i) {
      while (!(m.row(i).norm() > 0.0)) fill_uniform(m.row(i), fan(cfg.embed_dim), rng);
    }
  }
  p.att_w.resize(cfg.graph_dim, cfg.embed_dim);
  fill_uniform(p.att_w, fan(cfg.embed_dim), rng);
  p.att_a.resize(2 * cfg.graph_dim);
  fill_uniform(p.att_a, fan(2 * cfg.graph_dim), rng);

  if (cfg.use_temporal) {
    p.conv.resize(cfg.tcn_layers);
    for (Index l = 0; l < cfg.tcn_layers; ++l) {
      const Index cin = cfg.layer_in_channels(l);
      for (std::size_t m = 0; m < 3; ++m) {
        auto& bank = p.conv[l][m];
        bank.kernel = cfg.kernel_sizes[m];
        bank.weight.resize(cfg.channels, cin * bank.kernel);
        fill_uniform(bank.weight, fan(cin * bank.kernel), rng);
        bank.bias = Eigen::VectorXd::Zero(cfg.channels);
      }
    }
    p.reduce_w.resize(cfg.temporal_dim, cfg.temporal_features());
    fill_uniform(p.reduce_w, fan(cfg.temporal_features()), rng);
    p.reduce_b = Eigen::VectorXd::Zero(cfg.temporal_dim);
  }
  p.ln_gain = Eigen::VectorXd::Ones(cfg.fused_dim());
  p.ln_bias = Eigen::VectorXd::Zero(cfg.fused_dim());
  p.mlp1_w.resize(cfg.mlp_hidden, cfg.fused_dim());
  fill_uniform(p.mlp1_w, fan(cfg.fused_dim()), rng);
  p.mlp1_b = Eigen::VectorXd::Zero(cfg.mlp_hidden);
  p.mlp2_w.resize(1, cfg.mlp_hidden);
  fill_uniform(p.mlp2_w, fan(cfg.mlp_hidden), rng);
  p.mlp2_b = Eigen::VectorXd::Zero(1);
  return p;
}

std::vector<std::pair<std::string, std::pair<Index, Index>>> expected_shapes(const ModelConfig& config) {
  // Shapes only depend on the config; a zero-seeded init is cheap enough.
  const auto params = init_params(config, 0);
  std::vector<std::pair<std::string, std::pair<Index, Index>>> out;
  for (const auto& v : param_views(params)) out.push_back({v.name, {v.rows, v.cols}});
  return out;
}

bool all_finite(const ModelParams& params) {
  for (const auto& v : param_views(params)) {
    for (double x : v.span()) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

double squared_norm(const ModelParams& params) {
  double total = 0.0;
  for (const auto& v : param_views(params)) {
    for (double x : v.span()) total += x * x;
  }
  return total;
}

void scale(ModelParams& params, double factor) {
  for (auto& v : param_views(params)) {
    for (double& x : v.span()) x *= factor;
  }
}

void add_to(ModelParams& dst, const ModelParams& src) {
  auto d = param_views(dst);
  const auto s = param_views(src);
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (Index e = 0; e < d[k].size(); ++e) d[k].data[e] += s[k].data[e];
  }
}

SlotAttention attention_coefficients(const Eigen::MatrixXd& embeddings, const graph::Adjacency& adjacency,
                                     const Eigen::MatrixXd& att_w, const Eigen::VectorXd& att_a,
                                     double leaky_slope) {
  const Index n = embeddings.rows();
  const Index dg = att_w.rows();
  if (adjacency.nodes != n) throw DataError("adjacency node count does not match embeddings");
  check_shape(att_w, dg, embeddings.cols(), "attention transform");
  if (att_a.size() != 2 * dg) throw DataError("attention vector must have length 2 d'");

  SlotAttention att;
  att.graph = &adjacency;
  att.v = embeddings * att_w.transpose();
  const Eigen::VectorXd s_self = att.v * att_a.head(dg);
  const Eigen::VectorXd s_nb = att.v * att_a.tail(dg);
  att.alpha = Eigen::MatrixXd::Zero(n, n);
  att.logits = Eigen::MatrixXd::Zero(n, n);
  std::vector<Index> support;
  for (Index i = 0; i < n; ++i) {
    support.assign(1, i);
    support.insert(support.end(), adjacency.in_neighbors[i].begin(), adjacency.in_neighbors[i].end());
    double peak = -std::numeric_limits<double>::infinity();
    for (auto j : support) {
      att.logits(i, j) = s_self(i) + s_nb(j);
      peak = std::max(peak, leaky(att.logits(i, j), leaky_slope));
    }
    double total = 0.0;
    for (auto j : support) {
      const double e = std::exp(leaky(att.logits(i, j), leaky_slope) - peak);
      att.alpha(i, j) = e;
      total += e;
    }
    for (auto j : support) att.alpha(i, j) /= total;
  }
  return att;
}

Eigen::MatrixXd project_input(const ModelParams& params, const Eigen::MatrixXd& window) {
  if (window.cols() != params.proj_w.cols()) {
    throw DataError("window length " + std::to_string(window.cols()) + " does not match projection input " +
                    std::to_string(params.proj_w.cols()));
  }
  Eigen::MatrixXd x = window * params.proj_w.transpose();
  x.rowwise() += params.proj_b.transpose();
  return x;
}

Eigen::MatrixXd graph_attention_forward(const Eigen::MatrixXd& x_proj, const Eigen::MatrixXd& alpha,
                                        const Eigen::MatrixXd& att_w) {
  if (alpha.rows() != x_proj.rows() || alpha.cols() != x_proj.rows()) throw DataError("alpha must be N x N");
  if (att_w.cols() != x_proj.cols()) throw DataError("attention transform does not match feature width");
  return (alpha * (x_proj * att_w.transpose())).cwiseMax(0.0);
}

std::vector<double> dilated_conv(std::span<const double> x, std::span<const double> filter, Index dilation) {
  const auto len = static_cast<Index>(x.size());
  const auto c = static_cast<Index>(filter.size());
  if (c < 1 || dilation < 1) throw ConfigError("filter must be non-empty and dilation >= 1");
  const Index reach = dilation * (c - 1);
  if (len <= reach) {
    throw DataError("sequence of length " + std::to_string(len) + " is too short for receptive field " +
                    std::to_string(reach + 1));
  }
  std::vector<double> out(static_cast<std::size_t>(len - reach));
  for (Index u = 0; u < len - reach; ++u) {
    const Index t = u + reach;
    double acc = 0.0;
    for (Index s = 0; s < c; ++s) acc += filter[s] * x[t - dilation * s];
    out[u] = acc;
  }
  return out;
}

namespace {

// One conv layer for one sensor, post-ReLU.
Eigen::MatrixXd conv_layer_forward(const ModelConfig& cfg, const std::array<ConvBank, 3>& banks, Index layer,
                                   const Eigen::Ref<const Eigen::MatrixXd>& in) {
  const Index q = cfg.layer_dilation(layer);
  const Index reach = q * (cfg.max_kernel() - 1);
  const Index out_len = in.cols() - reach;
  const Index cin = in.rows();
  const Index ch = cfg.channels;
  Eigen::MatrixXd out(3 * ch, out_len);
  for (Index m = 0; m < 3; ++m) {
    const auto& bank = banks[m];
    const Index c = bank.kernel;
    for (Index o = 0; o < ch; ++o) {
      for (Index u = 0; u < out_len; ++u) {
        const Index t = u + reach;
        double acc = bank.bias(o);
        for (Index ci = 0; ci < cin; ++ci) {
          for (Index s = 0; s < c; ++s) acc += bank.weight(o, ci * c + s) * in(ci, t - q * s);
        }
        out(m * ch + o, u) = acc > 0.0 ? acc : 0.0;
      }
    }
  }
  return out;
}

// d_out is dLoss/d(post-ReLU output); masks it in place and accumulates into
// the bank gradients and, when d_in is non-null, the layer input gradient.
void conv_layer_backward(const ModelConfig& cfg, const std::array<ConvBank, 3>& banks,
                         std::array<ConvBank, 3>& grads, Index layer, const Eigen::Ref<const Eigen::MatrixXd>& in,
                         const Eigen::MatrixXd& out, Eigen::MatrixXd& d_out, Eigen::MatrixXd* d_in) {
  const Index q = cfg.layer_dilation(layer);
  const Index reach = q * (cfg.max_kernel() - 1);
  const Index cin = in.rows();
  const Index ch = cfg.channels;
  d_out = d_out.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
  for (Index m = 0; m < 3; ++m) {
    const auto& bank = banks[m];
    auto& gbank = grads[m];
    const Index c = bank.kernel;
    for (Index o = 0; o < ch; ++o) {
      for (Index u = 0; u < out.cols(); ++u) {
        const double g = d_out(m * ch + o, u);
        if (g == 0.0) continue;
        const Index t = u + reach;
        gbank.bias(o) += g;
        for (Index ci = 0; ci < cin; ++ci) {
          for (Index s = 0; s < c; ++s) {
            gbank.weight(o, ci * c + s) += g * in(ci, t - q * s);
            if (d_in) (*d_in)(ci, t - q * s) += g * bank.weight(o, ci * c + s);
          }
        }
      }
    }
  }
}

}  // namespace

TemporalTrace temporal_module_forward(const ModelConfig& cfg, const ModelParams& params,
                                      const Eigen::MatrixXd& window) {
  if (window.cols() != cfg.window) throw DataError("window length does not match the model config");
  const Index n = window.rows();
  TemporalTrace trace;
  trace.layers.resize(cfg.tcn_layers);
  for (Index l = 0; l < cfg.tcn_layers; ++l) {
    trace.layers[l].resize(n);
    for (Index i = 0; i < n; ++i) {
      if (l == 0) {
        trace.layers[0][i] = conv_layer_forward(cfg, params.conv[0], 0, window.row(i));
      } else {
        trace.layers[l][i] = conv_layer_forward(cfg, params.conv[l], l, trace.layers[l - 1][i]);
      }
    }
  }
  const Index len = cfg.temporal_length();
  const Index ch3 = 3 * cfg.channels;
  trace.features.resize(n, ch3 * len);
  for (Index i = 0; i < n; ++i) {
    const auto& last = trace.layers.back()[i];
    for (Index g = 0; g < ch3; ++g) trace.features.row(i).segment(g * len, len) = last.row(g);
  }
  return trace;
}

HeadTrace fuse_and_predict(const ModelConfig& cfg, const ModelParams& params, const Eigen::MatrixXd& spatial,
                           const Eigen::MatrixXd& temporal) {
  const Index n = spatial.rows();
  const Index f = cfg.fused_dim();
  const Index tdim = cfg.use_temporal ? cfg.temporal_dim : 0;
  if (spatial.cols() != cfg.graph_dim || (tdim > 0 && (temporal.rows() != n || temporal.cols() != tdim))) {
    throw DataError("fused feature shapes do not match the model config");
  }
  HeadTrace head;
  head.fused.resize(n, f);
  if (tdim > 0) head.fused.leftCols(tdim) = temporal;
  head.fused.rightCols(cfg.graph_dim) = spatial;

  head.normalized.resize(n, f);
  head.inv_std.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double mean = head.fused.row(i).mean();
    const double var = (head.fused.row(i).array() - mean).square().mean();
    head.inv_std(i) = 1.0 / std::sqrt(var + cfg.ln_eps);
    head.normalized.row(i) = (head.fused.row(i).array() - mean) * head.inv_std(i);
  }
  Eigen::MatrixXd y = head.normalized * params.ln_gain.asDiagonal();
  y.rowwise() += params.ln_bias.transpose();
  head.hidden_pre = y * params.mlp1_w.transpose();
  head.hidden_pre.rowwise() += params.mlp1_b.transpose();
  const Eigen::MatrixXd hidden = head.hidden_pre.cwiseMax(0.0);
  head.prediction = hidden * params.mlp2_w.transpose();
  head.prediction.array() += params.mlp2_b(0);
  return head;
}

namespace {

// Sparse sum in support order (self, then neighbors by similarity) so that
// relabeling sensors never reorders a floating-point sum.
Eigen::MatrixXd aggregate_neighbors(const SlotAttention& att, const Eigen::MatrixXd& xw) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(xw.rows(), xw.cols());
  for (Index i = 0; i < xw.rows(); ++i) {
    out.row(i) = att.alpha(i, i) * xw.row(i);
    for (auto j : att.graph->in_neighbors[i]) out.row(i) += att.alpha(i, j) * xw.row(j);
  }
  return out;
}

}  // namespace

WindowTrace forward_window(const ModelConfig& cfg, const ModelParams& params, const SlotAttention& attention,
                           const Eigen::MatrixXd& window) {
  check_shape(window, cfg.sensors, cfg.window, "window");
  WindowTrace tr;
  tr.window = &window;
  tr.x_proj = project_input(params, window);
  tr.xw = tr.x_proj * params.att_w.transpose();
  tr.spatial = aggregate_neighbors(attention, tr.xw).cwiseMax(0.0);
  if (cfg.use_temporal) {
    tr.temporal = temporal_module_forward(cfg, params, window);
    tr.temporal_reduced = tr.temporal.features * params.reduce_w.transpose();
    tr.temporal_reduced.rowwise() += params.reduce_b.transpose();
  }
  tr.head = fuse_and_predict(cfg, params, tr.spatial, tr.temporal_reduced);
  return tr;
}

void backward_window(const ModelConfig& cfg, const ModelParams& params, const SlotAttention& attention,
                     const WindowTrace& tr, const Eigen::VectorXd& d_pred, ModelParams& grad,
                     Eigen::MatrixXd& dalpha) {
  const auto& head = tr.head;
  const Index n = cfg.sensors;

  // Output MLP.
  const Eigen::MatrixXd hidden = head.hidden_pre.cwiseMax(0.0);
  grad.mlp2_w += d_pred.transpose() * hidden;
  grad.mlp2_b(0) += d_pred.sum();
  Eigen::MatrixXd d_hidden = d_pred * params.mlp2_w;
  d_hidden = d_hidden.cwiseProduct((head.hidden_pre.array() > 0.0).cast<double>().matrix());
  Eigen::MatrixXd y = head.normalized * params.ln_gain.asDiagonal();
  y.rowwise() += params.ln_bias.transpose();
  grad.mlp1_w += d_hidden.transpose() * y;
  grad.mlp1_b += d_hidden.colwise().sum().transpose();
  const Eigen::MatrixXd d_y = d_hidden * params.mlp1_w;

  // LayerNorm.
  grad.ln_gain += d_y.cwiseProduct(head.normalized).colwise().sum().transpose();
  grad.ln_bias += d_y.colwise().sum().transpose();
  const Eigen::MatrixXd d_hat = d_y * params.ln_gain.asDiagonal();
  Eigen::MatrixXd d_fused(n, cfg.fused_dim());
  for (Index i = 0; i < n; ++i) {
    const double mean_d = d_hat.row(i).mean();
    const double mean_dx = d_hat.row(i).dot(head.normalized.row(i)) / static_cast<double>(cfg.fused_dim());
    d_fused.row(i) = tr.head.inv_std(i) *
                     (d_hat.row(i).array() - mean_d - head.normalized.row(i).array() * mean_dx).matrix();
  }

  // Spatial branch.
  Eigen::MatrixXd d_z = d_fused.rightCols(cfg.graph_dim);
  d_z = d_z.cwiseProduct((tr.spatial.array() > 0.0).cast<double>().matrix());
  dalpha.noalias() += d_z * tr.xw.transpose();
  const Eigen::MatrixXd d_xw = attention.alpha.transpose() * d_z;
  grad.att_w.noalias() += d_xw.transpose() * tr.x_proj;
  const Eigen::MatrixXd d_xproj = d_xw * params.att_w;
  grad.proj_w.noalias() += d_xproj.transpose() * (*tr.window);
  grad.proj_b += d_xproj.colwise().sum().transpose();

  if (!cfg.use_temporal) return;

  // Temporal branch.
  const Eigen::MatrixXd d_t = d_fused.leftCols(cfg.temporal_dim);
  grad.reduce_w.noalias() += d_t.transpose() * tr.temporal.features;
  grad.reduce_b += d_t.colwise().sum().transpose();
  const Eigen::MatrixXd d_features = d_t * params.reduce_w;
  const Index len = cfg.temporal_length();
  const Index ch3 = 3 * cfg.channels;
  for (Index i = 0; i < n; ++i) {
    Eigen::MatrixXd d_out(ch3, len);
    for (Index g = 0; g < ch3; ++g) d_out.row(g) = d_features.row(i).segment(g * len, len);
    for (Index l = cfg.tcn_layers - 1; l >= 0; --l) {
      const auto& out = tr.temporal.layers[l][i];
      if (l == 0) {
        conv_layer_backward(cfg, params.conv[0], grad.conv[0], 0, tr.window->row(i), out, d_out, nullptr);
      } else {
        const auto& in = tr.temporal.layers[l - 1][i];
        Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(in.rows(), in.cols());
        conv_layer_backward(cfg, params.conv[l], grad.conv[l], l, in, out, d_out, &d_in);
        d_out = std::move(d_in);
      }
    }
  }
}

void attention_backward(const ModelConfig& cfg, const ModelParams& params, Index slot,
                        const SlotAttention& att, const Eigen::MatrixXd& dalpha, ModelParams& grad) {
  const Index n = att.alpha.rows();
  const Index dg = cfg.graph_dim;
  Eigen::VectorXd ds_self = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd ds_nb = Eigen::VectorXd::Zero(n);
  std::vector<Index> support;
  for (Index i = 0; i < n; ++i) {
    support.assign(1, i);
    support.insert(support.end(), att.graph->in_neighbors[i].begin(), att.graph->in_neighbors[i].end());
    double weighted = 0.0;
    for (auto j : support) weighted += att.alpha(i, j) * dalpha(i, j);
    for (auto j : support) {
      const double de = att.alpha(i, j) * (dalpha(i, j) - weighted);
      const double dlogit = att.logits(i, j) > 0.0 ? de : cfg.leaky_slope * de;
      ds_self(i) += dlogit;
      ds_nb(j) += dlogit;
    }
  }
  grad.att_a.head(dg) += att.v.transpose() * ds_self;
  grad.att_a.tail(dg) += att.v.transpose() * ds_nb;
  const Eigen::MatrixXd d_v = ds_self * params.att_a.head(dg).transpose() + ds_nb * params.att_a.tail(dg).transpose();
  const auto& m = params.embeddings[slot];
  grad.att_w.noalias() += d_v.transpose() * m;
  grad.embeddings[slot].noalias() += d_v * params.att_w;
}

double l2_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed) {
  if (predicted.rows() != observed.rows() || predicted.cols() != observed.cols()) {
    throw DataError("loss inputs differ in shape");
  }
  if (predicted.size() == 0) return 0.0;
  return (predicted - observed).squaredNorm() / static_cast<double>(predicted.size());
}

double loss_and_gradient(const ModelConfig& cfg, const ModelParams& params,
                         const std::vector<graph::Adjacency>& graphs, std::span<const Sample> samples,
                         ModelParams* grad, int threads) {
  if (samples.empty()) {
    if (grad) *grad = zeros_like(params);
    return 0.0;
  }
  const Index n = cfg.sensors;
  const auto slots = static_cast<Index>(params.embeddings.size());
  if (static_cast<Index>(graphs.size()) != slots) throw DataError("one adjacency per slot is required");

  std::vector<bool> used(slots, false);
  for (const auto& s : samples) {
    if (s.slot < 0 || s.slot >= slots) throw DataError("sample slot out of range");
    used[s.slot] = true;
  }
  std::vector<SlotAttention> attention(slots);
  for (Index s = 0; s < slots; ++s) {
    if (used[s]) {
      attention[s] = attention_coefficients(params.embeddings[s], graphs[s], params.att_w, params.att_a,
                                            cfg.leaky_slope);
    }
  }

  const double norm = 1.0 / static_cast<double>(samples.size() * n);
  const int chunks = std::max(1, std::min<int>(threads, static_cast<int>(samples.size())));

  struct Partial {
    double loss = 0.0;
    ModelParams grad;
    std::vector<Eigen::MatrixXd> dalpha;
  };
  std::vector<Partial> partial(chunks);

  auto work = [&](int c) {
    auto& part = partial[c];
    if (grad) {
      part.grad = zeros_like(params);
      part.dalpha.assign(slots, Eigen::MatrixXd::Zero(n, n));
    }
    const std::size_t begin = samples.size() * c / chunks;
    const std::size_t end = samples.size() * (c + 1) / chunks;
    for (std::size_t b = begin; b < end; ++b) {
      const auto& s = samples[b];
      const auto tr = forward_window(cfg, params, attention[s.slot], *s.window);
      const Eigen::VectorXd diff = tr.head.prediction - *s.target;
      part.loss += diff.squaredNorm();
      if (grad) {
        const Eigen::VectorXd d_pred = 2.0 * norm * diff;
        backward_window(cfg, params, attention[s.slot], tr, d_pred, part.grad, part.dalpha[s.slot]);
      }
    }
  };

  if (chunks == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int c = 0; c < chunks; ++c) pool.emplace_back(work, c);
    for (auto& t : pool) t.join();
  }

  double loss = 0.0;
  for (const auto& p : partial) loss += p.loss;
  if (grad) {
    *grad = std::move(partial[0].grad);
    std::vector<Eigen::MatrixXd> dalpha = std::move(partial[0].dalpha);
    for (int c = 1; c < chunks; ++c) {
      add_to(*grad, partial[c].grad);
      for (Index s = 0; s < slots; ++s) dalpha[s] += partial[c].dalpha[s];
    }
    for (Index s = 0; s < slots; ++s) {
      if (used[s]) attention_backward(cfg, params, s, attention[s], dalpha[s], *grad);
    }
  }
  return loss * norm;
}

Predictor::Predictor(ModelConfig config, ModelParams params, std::vector<graph::Adjacency> graphs)
    : config_(std::move(config)), params_(std::move(params)), graphs_(std::move(graphs)) {
  if (graphs_.size() != params_.embeddings.size()) throw DataError("one adjacency per slot is required");
  attention_.reserve(graphs_.size());
  for (std::size_t s = 0; s < graphs_.size(); ++s) {
    attention_.push_back(attention_coefficients(params_.embeddings[s], graphs_[s], params_.att_w, params_.att_a,
                                                config_.leaky_slope));
  }
}

Eigen::VectorXd Predictor::predict(const Eigen::MatrixXd& window, Index slot) const {
  if (slot < 0 || slot >= static_cast<Index>(attention_.size())) throw DataError("slot out of range");
  return forward_window(config_, params_, attention_[slot], window).head.prediction;
}

}  // namespace pgma::model
