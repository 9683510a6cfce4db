#include "hebbsnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace hebbsnn {

void ModelConfig::validate() const {
  HSNN_CHECK_ARG(tau_sim_steps > 0 && tau_read_steps >= 0, "ModelConfig: bad window sizes");
  HSNN_CHECK_ARG(tau_read_steps <= tau_sim_steps, "ModelConfig: tau_read exceeds tau_sim");
  HSNN_CHECK_ARG(d_feedback_steps >= 1, "ModelConfig: feedback delay must be >= 1 step");
  HSNN_CHECK_ARG(l > 0 && encoder_size > 0 && vec_dim > 0 && label_range > 0,
                 "ModelConfig: sizes must be positive");
  HSNN_CHECK_ARG(lif.theta > 0.0, "ModelConfig: threshold must be positive");
  HSNN_CHECK_ARG(surrogate_beta > 0.0 && surrogate_beta <= 1.0,
                 "ModelConfig: surrogate beta must be in (0, 1]");
  (void)lif.refractory_steps();
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) fail_numeric("checkpoint: missing config key '" + key + "'");
  return std::strtod(it->second.c_str(), nullptr);
}

std::int32_t parse_int(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) fail_numeric("checkpoint: missing config key '" + key + "'");
  return static_cast<std::int32_t>(std::strtol(it->second.c_str(), nullptr, 10));
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_meta(const std::string& prefix) const {
  std::map<std::string, std::string> m;
  m[prefix + "tau_sim_steps"] = std::to_string(tau_sim_steps);
  m[prefix + "tau_read_steps"] = std::to_string(tau_read_steps);
  m[prefix + "d_feedback_steps"] = std::to_string(d_feedback_steps);
  m[prefix + "l"] = std::to_string(l);
  m[prefix + "encoder_size"] = std::to_string(encoder_size);
  m[prefix + "vec_dim"] = std::to_string(vec_dim);
  m[prefix + "label_range"] = std::to_string(label_range);
  m[prefix + "lif.theta"] = fmt_double(lif.theta);
  m[prefix + "lif.tau_m"] = fmt_double(lif.tau_m);
  m[prefix + "lif.delta_abs"] = fmt_double(lif.delta_abs);
  m[prefix + "lif.dt"] = fmt_double(lif.dt);
  m[prefix + "hebbian.gamma_plus"] = fmt_double(hebbian.gamma_plus);
  m[prefix + "hebbian.gamma_minus"] = fmt_double(hebbian.gamma_minus);
  m[prefix + "hebbian.w_max"] = fmt_double(hebbian.w_max);
  m[prefix + "hebbian.tau_trace"] = fmt_double(hebbian.tau_trace);
  m[prefix + "hebbian.c"] = fmt_double(hebbian.c);
  m[prefix + "surrogate_beta"] = fmt_double(surrogate_beta);
  m[prefix + "plasticity_on_recall"] = plasticity_on_recall ? "1" : "0";
  return m;
}

ModelConfig ModelConfig::from_meta(const std::map<std::string, std::string>& meta,
                                   const std::string& prefix) {
  ModelConfig c;
  c.tau_sim_steps = parse_int(meta, prefix + "tau_sim_steps");
  c.tau_read_steps = parse_int(meta, prefix + "tau_read_steps");
  c.d_feedback_steps = parse_int(meta, prefix + "d_feedback_steps");
  c.l = parse_int(meta, prefix + "l");
  c.encoder_size = parse_int(meta, prefix + "encoder_size");
  c.vec_dim = parse_int(meta, prefix + "vec_dim");
  c.label_range = parse_int(meta, prefix + "label_range");
  c.lif.theta = parse_double(meta, prefix + "lif.theta");
  c.lif.tau_m = parse_double(meta, prefix + "lif.tau_m");
  c.lif.delta_abs = parse_double(meta, prefix + "lif.delta_abs");
  c.lif.dt = parse_double(meta, prefix + "lif.dt");
  c.hebbian.gamma_plus = parse_double(meta, prefix + "hebbian.gamma_plus");
  c.hebbian.gamma_minus = parse_double(meta, prefix + "hebbian.gamma_minus");
  c.hebbian.w_max = parse_double(meta, prefix + "hebbian.w_max");
  c.hebbian.tau_trace = parse_double(meta, prefix + "hebbian.tau_trace");
  c.hebbian.c = parse_double(meta, prefix + "hebbian.c");
  c.surrogate_beta = parse_double(meta, prefix + "surrogate_beta");
  c.plasticity_on_recall = parse_int(meta, prefix + "plasticity_on_recall") != 0;
  c.validate();
  return c;
}

AssocParams::AssocParams(const ModelConfig& config)
    : w_enc_vec(config.vec_dim, config.encoder_size),
      w_enc_lab(config.label_range, config.encoder_size),
      mem(config.assoc_layout()),
      w_out(config.l, config.label_range) {}

std::vector<ParamView> param_views(AssocParams& p) {
  return {
      {"w_enc_vec", p.w_enc_vec.a.data(), p.w_enc_vec.size()},
      {"w_enc_lab", p.w_enc_lab.a.data(), p.w_enc_lab.size()},
      {"w_s_key", p.mem.w_s_key.a.data(), p.mem.w_s_key.size()},
      {"w_s_value", p.mem.w_s_value.a.data(), p.mem.w_s_value.size()},
      {"w_r_key", p.mem.w_r_key.a.data(), p.mem.w_r_key.size()},
      {"w_out", p.w_out.a.data(), p.w_out.size()},
  };
}

namespace {

void check_episode(const ModelConfig& config, const EpisodeInput& episode) {
  HSNN_CHECK_ARG(!episode.facts.empty(), "episode: needs at least one fact");
  for (const Fact& f : episode.facts) {
    HSNN_CHECK_ARG(static_cast<std::int32_t>(f.vec.size()) == config.vec_dim,
                   "episode: fact dimension mismatch");
    HSNN_CHECK_ARG(f.label >= 1 && f.label <= config.label_range,
                   "episode: label outside [1, label_range]");
  }
  HSNN_CHECK_ARG(static_cast<std::int32_t>(episode.query.size()) == config.vec_dim,
                 "episode: query dimension mismatch");
  HSNN_CHECK_ARG(episode.target_label >= 1 && episode.target_label <= config.label_range,
                 "episode: target label outside [1, label_range]");
}

void accumulate_counts(std::vector<double>& counts, std::span<const std::uint8_t> z) {
  for (std::size_t i = 0; i < z.size(); ++i) counts[i] += z[i];
}

}  // namespace

AssocRunResult run_sequence(const AssocParams& params, const ModelConfig& config,
                            const EpisodeInput& episode, RunCapture* capture) {
  config.validate();
  check_episode(config, episode);
  const std::int32_t T = config.tau_sim_steps;
  const std::int32_t enc = config.encoder_size;
  const std::int32_t l = config.l;
  const std::int32_t n_facts = static_cast<std::int32_t>(episode.facts.size());
  const std::int32_t total_steps = (n_facts + 1) * T;

  HebbianMemoryState mem(config.assoc_layout(), config.d_feedback_steps);
  LifLayerState enc_vec(enc), enc_lab(enc);

  AssocRunResult result;
  result.stats.counts = {std::vector<double>(enc, 0.0), std::vector<double>(enc, 0.0),
                         std::vector<double>(l, 0.0), std::vector<double>(l, 0.0)};
  result.stats.steps = {total_steps, static_cast<std::int64_t>(n_facts) * T, total_steps,
                        total_steps};
  if (capture) {
    capture->key = SpikeRaster(l, total_steps);
    capture->value = SpikeRaster(l, total_steps);
  }

  std::vector<double> i_vec(enc), i_lab(enc);
  std::vector<std::uint8_t> z_vec(enc), z_lab(enc), z_enc(2 * enc), z_key(l), z_value(l);
  std::vector<double> onehot(config.label_range, 0.0);

  for (std::int32_t m = 0; m < n_facts; ++m) {
    const Fact& fact = episode.facts[m];
    enc_vec.reset();
    enc_lab.reset();
    std::fill(i_vec.begin(), i_vec.end(), 0.0);
    add_vecmat(fact.vec, params.w_enc_vec, i_vec);
    std::fill(onehot.begin(), onehot.end(), 0.0);
    onehot[fact.label - 1] = 1.0;
    std::fill(i_lab.begin(), i_lab.end(), 0.0);
    add_vecmat(onehot, params.w_enc_lab, i_lab);

    for (std::int32_t t = 0; t < T; ++t) {
      lif_step(enc_vec, i_vec, config.lif, z_vec);
      lif_step(enc_lab, i_lab, config.lif, z_lab);
      std::memcpy(z_enc.data(), z_vec.data(), z_vec.size());
      std::memcpy(z_enc.data() + enc, z_lab.data(), z_lab.size());
      store_step(mem, params.mem, z_enc, config.lif, config.hebbian, z_key, z_value);
      accumulate_counts(result.stats.counts[kVecEncoder], z_vec);
      accumulate_counts(result.stats.counts[kLabEncoder], z_lab);
      accumulate_counts(result.stats.counts[kKeyLayer], z_key);
      accumulate_counts(result.stats.counts[kValueLayer], z_value);
      if (capture) {
        std::memcpy(capture->key.step(m * T + t), z_key.data(), z_key.size());
        std::memcpy(capture->value.step(m * T + t), z_value.data(), z_value.size());
      }
    }
  }

  enc_vec.reset();
  std::fill(i_vec.begin(), i_vec.end(), 0.0);
  add_vecmat(episode.query, params.w_enc_vec, i_vec);
  std::vector<double> read_counts(l, 0.0);
  for (std::int32_t t = 0; t < T; ++t) {
    lif_step(enc_vec, i_vec, config.lif, z_vec);
    recall_step(mem, params.mem, z_vec, config.lif, config.hebbian, z_key, z_value,
                config.plasticity_on_recall);
    accumulate_counts(result.stats.counts[kVecEncoder], z_vec);
    accumulate_counts(result.stats.counts[kKeyLayer], z_key);
    accumulate_counts(result.stats.counts[kValueLayer], z_value);
    if (t >= T - config.tau_read_steps) accumulate_counts(read_counts, z_value);
    if (capture) {
      std::memcpy(capture->key.step(n_facts * T + t), z_key.data(), z_key.size());
      std::memcpy(capture->value.step(n_facts * T + t), z_value.data(), z_value.size());
    }
  }

  result.logits.assign(config.label_range, 0.0);
  add_vecmat(read_counts, params.w_out, result.logits);
  const auto best = std::max_element(result.logits.begin(), result.logits.end());
  result.predicted_label = static_cast<std::int32_t>(best - result.logits.begin()) + 1;
  return result;
}

// --- Graph builders ----------------------------------------------------------

namespace {

// LIF layer unrolled node by node. Spikes and refractory bookkeeping are
// decided from forward values while building, matching lif_step exactly.
struct GraphLif {
  NodeId membrane = kNoNode;
  std::vector<std::int32_t> refr;
  std::vector<std::uint8_t> eligible;
  double alpha = 0.0, one_minus_alpha = 0.0, theta = 0.0;
  std::int32_t refr_steps = 0;
  SurrogateParams sp;

  void init(Graph& g, std::int32_t size, const LifParams& lif, const SurrogateParams& sp_,
            std::span<const double> membrane0 = {}, std::span<const std::int32_t> refr0 = {}) {
    alpha = lif.alpha();
    one_minus_alpha = 1.0 - alpha;
    theta = lif.theta;
    refr_steps = lif.refractory_steps();
    sp = sp_;
    membrane = membrane0.empty() ? g.leaf_zeros(size, false) : g.leaf(membrane0, false);
    refr.assign(size, 0);
    if (!refr0.empty()) refr.assign(refr0.begin(), refr0.end());
    eligible.assign(size, 1);
  }

  NodeId step(Graph& g, NodeId current) {
    for (std::size_t i = 0; i < refr.size(); ++i) eligible[i] = refr[i] == 0 ? 1 : 0;
    auto [z, v] = g.spike_threshold(membrane, sp, eligible.data());
    const std::array<double, 3> coeffs = {alpha, one_minus_alpha, -theta};
    const std::array<NodeId, 3> terms = {membrane, current, z};
    membrane = g.lincomb(coeffs, terms);
    const double* zv = g.values(z).data();
    for (std::size_t i = 0; i < refr.size(); ++i) {
      refr[i] = zv[i] != 0.0 ? refr_steps : (refr[i] > 0 ? refr[i] - 1 : 0);
    }
    return z;
  }
};

// Associative memory unrolled node by node; mirrors store/recall/combined_step.
struct GraphMemory {
  NodeId w_assoc = kNoNode, kappa_key = kNoNode, kappa_value = kNoNode;
  GraphLif key, value;
  std::vector<NodeId> fb_ring;
  std::int64_t step = 0;
  std::int32_t fb_depth = 1, l = 0;
  double c = 0.2, decay = 0.0;
  HebbianRule rule;

  void init_fresh(Graph& g, const MemoryLayout& layout, std::int32_t feedback_steps,
                  const LifParams& lif, const HebbianParams& hebb, const SurrogateParams& sp) {
    l = layout.l;
    fb_depth = std::max(feedback_steps, 1);
    c = hebb.c;
    decay = hebb.trace_decay(lif.dt);
    rule = hebb.rule();
    w_assoc = g.leaf_zeros(l * l, false);
    kappa_key = g.leaf_zeros(l, false);
    kappa_value = g.leaf_zeros(l, false);
    key.init(g, l, lif, sp);
    value.init(g, l, lif, sp);
    fb_ring.assign(fb_depth, g.leaf_zeros(l, false));
    step = 0;
  }

  void init_from_state(Graph& g, const HebbianMemoryState& state, const LifParams& lif,
                       const HebbianParams& hebb, const SurrogateParams& sp) {
    l = state.l();
    fb_depth = state.fb_depth;
    c = hebb.c;
    decay = hebb.trace_decay(lif.dt);
    rule = hebb.rule();
    w_assoc = g.leaf(state.w_assoc.a, false);
    kappa_key = g.leaf(state.kappa_key, false);
    kappa_value = g.leaf(state.kappa_value, false);
    key.init(g, l, lif, sp, state.key_state.membrane, state.key_state.refractory_remaining);
    value.init(g, l, lif, sp, state.value_state.membrane, state.value_state.refractory_remaining);
    fb_ring.resize(fb_depth);
    std::vector<double> frame(l);
    for (std::int32_t d = 0; d < fb_depth; ++d) {
      const std::uint8_t* src = state.feedback_ring.data() + static_cast<std::size_t>(d) * l;
      for (std::int32_t i = 0; i < l; ++i) frame[i] = src[i] ? 1.0 : 0.0;
      fb_ring[d] = g.leaf(frame, false);
    }
    step = state.step;
  }

  void plasticity(Graph& g, NodeId z_key, NodeId z_value) {
    const std::array<double, 2> coeffs = {decay, 1.0 - decay};
    const std::array<NodeId, 2> tk = {kappa_key, z_key};
    kappa_key = g.lincomb(coeffs, tk);
    const std::array<NodeId, 2> tv = {kappa_value, z_value};
    kappa_value = g.lincomb(coeffs, tv);
    w_assoc = g.hebbian_step(w_assoc, kappa_key, kappa_value, rule);
  }

  std::pair<NodeId, NodeId> store(Graph& g, NodeId z_enc, NodeId w_s_key, NodeId w_s_value) {
    NodeId i_key = g.vecmat(z_enc, w_s_key);
    NodeId z_key = key.step(g, i_key);
    NodeId i_store = g.vecmat(z_enc, w_s_value);
    NodeId i_assoc = g.vecmat(z_key, w_assoc);
    const std::array<double, 2> coeffs = {1.0, c};
    const std::array<NodeId, 2> terms = {i_store, i_assoc};
    NodeId z_value = value.step(g, g.lincomb(coeffs, terms));
    plasticity(g, z_key, z_value);
    return {z_key, z_value};
  }

  std::pair<NodeId, NodeId> recall(Graph& g, NodeId z_enc, NodeId w_r_key, bool plastic) {
    NodeId fb = fb_ring[static_cast<std::size_t>(step % fb_depth)];
    NodeId comb = g.concat(z_enc, fb);
    NodeId i_key = g.vecmat(comb, w_r_key);
    NodeId z_key = key.step(g, i_key);
    NodeId i_value = g.vecmat(z_key, w_assoc);
    NodeId z_value = value.step(g, i_value);
    fb_ring[static_cast<std::size_t>(step % fb_depth)] = z_value;
    ++step;
    if (plastic) plasticity(g, z_key, z_value);
    return {z_key, z_value};
  }

  std::pair<NodeId, NodeId> combined(Graph& g, NodeId z_enc, NodeId w_s_key, NodeId w_s_value,
                                     NodeId w_r_key) {
    NodeId fb = fb_ring[static_cast<std::size_t>(step % fb_depth)];
    NodeId comb = g.concat(z_enc, fb);
    NodeId i_key = g.add(g.vecmat(z_enc, w_s_key), g.vecmat(comb, w_r_key));
    NodeId z_key = key.step(g, i_key);
    NodeId i_store = g.vecmat(z_enc, w_s_value);
    NodeId i_assoc = g.vecmat(z_key, w_assoc);
    const std::array<double, 2> coeffs = {1.0, c};
    const std::array<NodeId, 2> terms = {i_store, i_assoc};
    NodeId z_value = value.step(g, g.lincomb(coeffs, terms));
    fb_ring[static_cast<std::size_t>(step % fb_depth)] = z_value;
    ++step;
    plasticity(g, z_key, z_value);
    return {z_key, z_value};
  }
};

}  // namespace

AssocGraphResult build_sequence_graph(Graph& g, const AssocParams& params,
                                      const ModelConfig& config, const EpisodeInput& episode) {
  config.validate();
  check_episode(config, episode);
  const std::int32_t T = config.tau_sim_steps;
  const std::int32_t n_facts = static_cast<std::int32_t>(episode.facts.size());
  const SurrogateParams sp = config.surrogate();

  AssocGraphResult out;
  out.params.w_enc_vec = g.leaf_view(params.w_enc_vec.a.data(),
                                     static_cast<std::int32_t>(params.w_enc_vec.size()), true);
  out.params.w_enc_lab = g.leaf_view(params.w_enc_lab.a.data(),
                                     static_cast<std::int32_t>(params.w_enc_lab.size()), true);
  out.params.w_s_key = g.leaf_view(params.mem.w_s_key.a.data(),
                                   static_cast<std::int32_t>(params.mem.w_s_key.size()), true);
  out.params.w_s_value = g.leaf_view(params.mem.w_s_value.a.data(),
                                     static_cast<std::int32_t>(params.mem.w_s_value.size()), true);
  out.params.w_r_key = g.leaf_view(params.mem.w_r_key.a.data(),
                                   static_cast<std::int32_t>(params.mem.w_r_key.size()), true);
  out.params.w_out =
      g.leaf_view(params.w_out.a.data(), static_cast<std::int32_t>(params.w_out.size()), true);

  GraphMemory mem;
  mem.init_fresh(g, config.assoc_layout(), config.d_feedback_steps, config.lif, config.hebbian,
                 sp);

  std::array<std::vector<NodeId>, 4> layer_spikes;
  std::vector<NodeId> window_values;
  std::vector<double> onehot(config.label_range, 0.0);

  for (std::int32_t m = 0; m < n_facts; ++m) {
    const Fact& fact = episode.facts[m];
    NodeId x = g.leaf(fact.vec, false);
    std::fill(onehot.begin(), onehot.end(), 0.0);
    onehot[fact.label - 1] = 1.0;
    NodeId oh = g.leaf(onehot, false);
    NodeId i_vec = g.vecmat(x, out.params.w_enc_vec);
    NodeId i_lab = g.vecmat(oh, out.params.w_enc_lab);
    GraphLif enc_vec, enc_lab;
    enc_vec.init(g, config.encoder_size, config.lif, sp);
    enc_lab.init(g, config.encoder_size, config.lif, sp);
    for (std::int32_t t = 0; t < T; ++t) {
      NodeId z_vec = enc_vec.step(g, i_vec);
      NodeId z_lab = enc_lab.step(g, i_lab);
      NodeId z_enc = g.concat(z_vec, z_lab);
      auto [z_key, z_value] = mem.store(g, z_enc, out.params.w_s_key, out.params.w_s_value);
      layer_spikes[kVecEncoder].push_back(z_vec);
      layer_spikes[kLabEncoder].push_back(z_lab);
      layer_spikes[kKeyLayer].push_back(z_key);
      layer_spikes[kValueLayer].push_back(z_value);
    }
  }

  NodeId q = g.leaf(episode.query, false);
  NodeId i_query = g.vecmat(q, out.params.w_enc_vec);
  GraphLif enc_query;
  enc_query.init(g, config.encoder_size, config.lif, sp);
  for (std::int32_t t = 0; t < T; ++t) {
    NodeId z_vec = enc_query.step(g, i_query);
    auto [z_key, z_value] =
        mem.recall(g, z_vec, out.params.w_r_key, config.plasticity_on_recall);
    layer_spikes[kVecEncoder].push_back(z_vec);
    layer_spikes[kKeyLayer].push_back(z_key);
    layer_spikes[kValueLayer].push_back(z_value);
    if (t >= T - config.tau_read_steps) window_values.push_back(z_value);
  }

  NodeId read_counts = g.sum_list(window_values);
  out.logits = g.vecmat(read_counts, out.params.w_out);
  out.loss_ce = g.softmax_cross_entropy(out.logits, episode.target_label - 1);
  for (std::int32_t layer = 0; layer < 4; ++layer) {
    out.layer_spike_sums[layer] = g.sum_list(layer_spikes[layer]);
  }
  return out;
}

// --- RL variant --------------------------------------------------------------

void RlModelConfig::validate() const {
  core.validate();
  HSNN_CHECK_ARG(obs_dim > 0 && n_actions >= 2, "RlModelConfig: bad dimensions");
  HSNN_CHECK_ARG(actor_hidden > 0 && critic_hidden > 0, "RlModelConfig: bad head sizes");
}

Mlp Mlp::make(std::span<const std::int32_t> sizes) {
  HSNN_CHECK_ARG(sizes.size() >= 2, "Mlp: need at least input and output sizes");
  Mlp m;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    m.w.emplace_back(sizes[i], sizes[i + 1]);
    m.b.emplace_back(sizes[i + 1], 0.0);
  }
  return m;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  std::vector<double> h(x.begin(), x.end());
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::vector<double> lin(w[i].cols, 0.0);
    add_vecmat(h, w[i], lin);
    std::vector<double> next(w[i].cols);
    for (std::int32_t k = 0; k < w[i].cols; ++k) next[k] = lin[k] + b[i][k];
    if (i + 1 < w.size()) {
      for (double& v : next) v = std::tanh(v);
    }
    h = std::move(next);
  }
  return h;
}

Mlp::GraphLeaves Mlp::make_leaves(Graph& g) const {
  GraphLeaves leaves;
  for (std::size_t i = 0; i < w.size(); ++i) {
    leaves.w.push_back(
        g.leaf_view(w[i].a.data(), static_cast<std::int32_t>(w[i].size()), true));
    leaves.b.push_back(g.leaf_view(b[i].data(), static_cast<std::int32_t>(b[i].size()), true));
  }
  return leaves;
}

NodeId Mlp::build(Graph& g, const GraphLeaves& leaves, NodeId x) const {
  NodeId h = x;
  for (std::size_t i = 0; i < w.size(); ++i) {
    h = g.add(g.vecmat(h, leaves.w[i]), leaves.b[i]);
    if (i + 1 < w.size()) h = g.tanh_op(h);
  }
  return h;
}

RlParams::RlParams(const RlModelConfig& config)
    : w_enc_obs(config.obs_dim, config.core.encoder_size), mem(config.core.rl_layout()) {
  const std::array<std::int32_t, 4> actor_sizes = {config.core.l, config.actor_hidden,
                                                   config.actor_hidden, config.n_actions};
  actor = Mlp::make(actor_sizes);
  const std::array<std::int32_t, 4> critic_sizes = {config.core.l + config.obs_dim,
                                                    config.critic_hidden, config.critic_hidden, 1};
  critic = Mlp::make(critic_sizes);
}

std::vector<ParamView> param_views(RlParams& p) {
  std::vector<ParamView> v = {
      {"w_enc_obs", p.w_enc_obs.a.data(), p.w_enc_obs.size()},
      {"w_s_key", p.mem.w_s_key.a.data(), p.mem.w_s_key.size()},
      {"w_s_value", p.mem.w_s_value.a.data(), p.mem.w_s_value.size()},
      {"w_r_key", p.mem.w_r_key.a.data(), p.mem.w_r_key.size()},
  };
  for (std::size_t i = 0; i < p.actor.w.size(); ++i) {
    v.push_back({"actor.w" + std::to_string(i), p.actor.w[i].a.data(), p.actor.w[i].size()});
    v.push_back({"actor.b" + std::to_string(i), p.actor.b[i].data(), p.actor.b[i].size()});
  }
  for (std::size_t i = 0; i < p.critic.w.size(); ++i) {
    v.push_back({"critic.w" + std::to_string(i), p.critic.w[i].a.data(), p.critic.w[i].size()});
    v.push_back({"critic.b" + std::to_string(i), p.critic.b[i].data(), p.critic.b[i].size()});
  }
  return v;
}

std::vector<double> run_rl_step(const RlParams& params, const RlModelConfig& config,
                                std::span<const double> obs, RlCarry& carry, SpikeStats* stats) {
  HSNN_CHECK_ARG(static_cast<std::int32_t>(obs.size()) == config.obs_dim,
                 "run_rl_step: observation dimension mismatch");
  const std::int32_t T = config.core.tau_sim_steps;
  const std::int32_t enc = config.core.encoder_size;
  const std::int32_t l = config.core.l;

  std::vector<double> i_enc(enc, 0.0);
  add_vecmat(obs, params.w_enc_obs, i_enc);
  LifLayerState enc_state(enc);
  std::vector<std::uint8_t> z_enc(enc), z_key(l), z_value(l);
  std::vector<double> counts(l, 0.0);
  for (std::int32_t t = 0; t < T; ++t) {
    lif_step(enc_state, i_enc, config.core.lif, z_enc);
    combined_step(carry.mem, params.mem, z_enc, config.core.lif, config.core.hebbian, z_key,
                  z_value);
    if (t >= T - config.core.tau_read_steps) accumulate_counts(counts, z_value);
    if (stats) {
      accumulate_counts(stats->counts[0], z_enc);
      accumulate_counts(stats->counts[1], z_key);
      accumulate_counts(stats->counts[2], z_value);
    }
  }
  if (stats) {
    for (int i = 0; i < 3; ++i) stats->steps[i] += T;
  }
  return counts;
}

RlSegmentGraph build_rl_segment_graph(Graph& g, const RlParams& params,
                                      const RlModelConfig& config, const RlCarry& carry_start,
                                      std::span<const std::vector<double>> observations,
                                      std::span<const std::uint8_t> resets) {
  config.validate();
  HSNN_CHECK_ARG(observations.size() == resets.size(), "rl segment: resets/observations mismatch");
  const std::int32_t T = config.core.tau_sim_steps;
  const SurrogateParams sp = config.core.surrogate();

  RlSegmentGraph out;
  out.w_enc_obs = g.leaf_view(params.w_enc_obs.a.data(),
                              static_cast<std::int32_t>(params.w_enc_obs.size()), true);
  out.w_s_key = g.leaf_view(params.mem.w_s_key.a.data(),
                            static_cast<std::int32_t>(params.mem.w_s_key.size()), true);
  out.w_s_value = g.leaf_view(params.mem.w_s_value.a.data(),
                              static_cast<std::int32_t>(params.mem.w_s_value.size()), true);
  out.w_r_key = g.leaf_view(params.mem.w_r_key.a.data(),
                            static_cast<std::int32_t>(params.mem.w_r_key.size()), true);
  out.actor = params.actor.make_leaves(g);
  out.critic = params.critic.make_leaves(g);

  GraphMemory mem;
  mem.init_from_state(g, carry_start.mem, config.core.lif, config.core.hebbian, sp);

  for (std::size_t step = 0; step < observations.size(); ++step) {
    if (resets[step]) {
      mem.init_fresh(g, config.core.rl_layout(), config.core.d_feedback_steps, config.core.lif,
                     config.core.hebbian, sp);
    }
    const std::vector<double>& obs = observations[step];
    HSNN_CHECK_ARG(static_cast<std::int32_t>(obs.size()) == config.obs_dim,
                   "rl segment: observation dimension mismatch");
    NodeId obs_leaf = g.leaf(obs, false);
    NodeId i_enc = g.vecmat(obs_leaf, out.w_enc_obs);
    GraphLif enc;
    enc.init(g, config.core.encoder_size, config.core.lif, sp);
    std::vector<NodeId> window_values;
    for (std::int32_t t = 0; t < T; ++t) {
      NodeId z_enc = enc.step(g, i_enc);
      auto [z_key, z_value] = mem.combined(g, z_enc, out.w_s_key, out.w_s_value, out.w_r_key);
      (void)z_key;
      if (t >= T - config.core.tau_read_steps) window_values.push_back(z_value);
    }
    NodeId counts = g.sum_list(window_values);
    out.logits.push_back(params.actor.build(g, out.actor, counts));
    NodeId critic_in = g.concat(counts, obs_leaf);
    out.values.push_back(params.critic.build(g, out.critic, critic_in));
  }
  return out;
}

// --- Checkpoints -------------------------------------------------------------

void save_assoc_checkpoint(const std::string& path, const AssocParams& params,
                           const ModelConfig& config,
                           const std::map<std::string, std::string>& extra_meta) {
  Checkpoint ck;
  ck.add("w_enc_vec", params.w_enc_vec);
  ck.add("w_enc_lab", params.w_enc_lab);
  ck.add("w_s_key", params.mem.w_s_key);
  ck.add("w_s_value", params.mem.w_s_value);
  ck.add("w_r_key", params.mem.w_r_key);
  ck.add("w_out", params.w_out);
  ck.meta = config.to_meta("model.");
  ck.meta["kind"] = "assoc";
  for (const auto& [k, v] : extra_meta) ck.meta[k] = v;
  ck.save(path);
}

AssocParams load_assoc_checkpoint(const std::string& path, ModelConfig* config_out,
                                  std::map<std::string, std::string>* meta_out) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta_or("kind", "") != "assoc") {
    fail_numeric("checkpoint: '" + path + "' does not hold an association model");
  }
  ModelConfig config = ModelConfig::from_meta(ck.meta, "model.");
  AssocParams params(config);
  ck.read("w_enc_vec", params.w_enc_vec);
  ck.read("w_enc_lab", params.w_enc_lab);
  ck.read("w_s_key", params.mem.w_s_key);
  ck.read("w_s_value", params.mem.w_s_value);
  ck.read("w_r_key", params.mem.w_r_key);
  ck.read("w_out", params.w_out);
  if (config_out) *config_out = config;
  if (meta_out) *meta_out = ck.meta;
  return params;
}

void save_rl_checkpoint(const std::string& path, const RlParams& params,
                        const RlModelConfig& config,
                        const std::map<std::string, std::string>& extra_meta) {
  Checkpoint ck;
  ck.add("w_enc_obs", params.w_enc_obs);
  ck.add("w_s_key", params.mem.w_s_key);
  ck.add("w_s_value", params.mem.w_s_value);
  ck.add("w_r_key", params.mem.w_r_key);
  for (std::size_t i = 0; i < params.actor.w.size(); ++i) {
    ck.add("actor.w" + std::to_string(i), params.actor.w[i]);
    ck.add("actor.b" + std::to_string(i), params.actor.b[i]);
  }
  for (std::size_t i = 0; i < params.critic.w.size(); ++i) {
    ck.add("critic.w" + std::to_string(i), params.critic.w[i]);
    ck.add("critic.b" + std::to_string(i), params.critic.b[i]);
  }
  ck.meta = config.core.to_meta("model.");
  ck.meta["kind"] = "rl";
  ck.meta["rl.obs_dim"] = std::to_string(config.obs_dim);
  ck.meta["rl.n_actions"] = std::to_string(config.n_actions);
  ck.meta["rl.actor_hidden"] = std::to_string(config.actor_hidden);
  ck.meta["rl.critic_hidden"] = std::to_string(config.critic_hidden);
  for (const auto& [k, v] : extra_meta) ck.meta[k] = v;
  ck.save(path);
}

RlParams load_rl_checkpoint(const std::string& path, RlModelConfig* config_out,
                            std::map<std::string, std::string>* meta_out) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta_or("kind", "") != "rl") {
    fail_numeric("checkpoint: '" + path + "' does not hold an RL model");
  }
  RlModelConfig config;
  config.core = ModelConfig::from_meta(ck.meta, "model.");
  config.obs_dim = parse_int(ck.meta, "rl.obs_dim");
  config.n_actions = parse_int(ck.meta, "rl.n_actions");
  config.actor_hidden = parse_int(ck.meta, "rl.actor_hidden");
  config.critic_hidden = parse_int(ck.meta, "rl.critic_hidden");
  config.validate();
  RlParams params(config);
  ck.read("w_enc_obs", params.w_enc_obs);
  ck.read("w_s_key", params.mem.w_s_key);
  ck.read("w_s_value", params.mem.w_s_value);
  ck.read("w_r_key", params.mem.w_r_key);
  for (std::size_t i = 0; i < params.actor.w.size(); ++i) {
    ck.read("actor.w" + std::to_string(i), params.actor.w[i]);
    ck.read("actor.b" + std::to_string(i), params.actor.b[i]);
  }
  for (std::size_t i = 0; i < params.critic.w.size(); ++i) {
    ck.read("critic.w" + std::to_string(i), params.critic.w[i]);
    ck.read("critic.b" + std::to_string(i), params.critic.b[i]);
  }
  if (config_out) *config_out = config;
  if (meta_out) *meta_out = ck.meta;
  return params;
}

}  // namespace hebbsnn
