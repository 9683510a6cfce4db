#include "hebbsnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hebbsnn {

void spike_backward(std::span<const double> v_norm, std::span<const double> upstream,
                    const SurrogateParams& params, std::span<double> out) {
  HSNN_CHECK_ARG(v_norm.size() == upstream.size() && v_norm.size() == out.size(),
                 "spike_backward: size mismatch");
  for (std::size_t i = 0; i < v_norm.size(); ++i) {
    out[i] = upstream[i] * pseudo_derivative(v_norm[i], params.beta);
  }
}

const Node& Graph::node(NodeId id) const {
  HSNN_CHECK_ARG(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), "Graph: bad node id");
  return nodes_[id];
}

double Graph::value_scalar(NodeId id) const {
  const Node& n = node(id);
  HSNN_CHECK_ARG(n.size == 1, "Graph: node is not scalar");
  return n.values[0];
}

double* Graph::alloc_values(std::int64_t n) {
  if (n > kChunkDoubles) {
    // Oversized block gets a dedicated chunk.
    chunks_.insert(chunks_.begin() + chunk_index_, std::make_unique<double[]>(n));
    double* p = chunks_[chunk_index_].get();
    ++chunk_index_;
    chunk_used_ = kChunkDoubles;  // force a fresh chunk for the next alloc
    return p;
  }
  if (chunk_index_ >= chunks_.size() || chunk_used_ + n > kChunkDoubles) {
    if (chunk_index_ < chunks_.size() && chunk_used_ + n > kChunkDoubles) ++chunk_index_;
    while (chunk_index_ >= chunks_.size()) {
      chunks_.push_back(std::make_unique<double[]>(kChunkDoubles));
    }
    chunk_used_ = 0;
  }
  double* p = chunks_[chunk_index_].get() + chunk_used_;
  chunk_used_ += n;
  return p;
}

std::uint8_t* Graph::alloc_bytes(std::int64_t n) {
  constexpr std::int64_t kChunkBytes = 1 << 20;
  HSNN_CHECK_ARG(n <= kChunkBytes, "Graph: mask block too large");
  if (byte_chunk_index_ >= byte_chunks_.size() || byte_chunk_used_ + n > kChunkBytes) {
    if (byte_chunk_index_ < byte_chunks_.size()) ++byte_chunk_index_;
    while (byte_chunk_index_ >= byte_chunks_.size()) {
      byte_chunks_.push_back(std::make_unique<std::uint8_t[]>(kChunkBytes));
    }
    byte_chunk_used_ = 0;
  }
  std::uint8_t* p = byte_chunks_[byte_chunk_index_].get() + byte_chunk_used_;
  byte_chunk_used_ += n;
  return p;
}

double* Graph::acquire_grad(std::int32_t size) {
  auto& pool = grad_pool_[size];
  double* p;
  if (!pool.empty()) {
    p = pool.back();
    pool.pop_back();
  } else {
    grad_storage_.push_back(std::make_unique<double[]>(size));
    p = grad_storage_.back().get();
  }
  std::memset(p, 0, sizeof(double) * static_cast<std::size_t>(size));
  return p;
}

void Graph::release_grad(double* p, std::int32_t size) { grad_pool_[size].push_back(p); }

double* Graph::ensure_grad(Node& n) {
  if (!n.grad) n.grad = acquire_grad(n.size);
  return n.grad;
}

void Graph::check_parent(NodeId parent, NodeId) const {
  HSNN_CHECK_ARG(parent >= 0 && static_cast<std::size_t>(parent) < nodes_.size(),
                 "Graph: operand does not exist yet (graph must be built in topological order)");
}

NodeId Graph::push(Node n) {
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(std::span<const double> values, bool needs_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.size = static_cast<std::int32_t>(values.size());
  n.needs_grad = needs_grad;
  n.values = alloc_values(n.size);
  std::memcpy(n.values, values.data(), values.size() * sizeof(double));
  return push(n);
}

NodeId Graph::leaf_zeros(std::int32_t size, bool needs_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.size = size;
  n.needs_grad = needs_grad;
  n.values = alloc_values(size);
  std::memset(n.values, 0, sizeof(double) * static_cast<std::size_t>(size));
  return push(n);
}

NodeId Graph::leaf_view(const double* data, std::int32_t size, bool needs_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.size = size;
  n.needs_grad = needs_grad;
  n.values_owned = false;
  n.values = const_cast<double*>(data);  // never written; see class comment
  return push(n);
}

NodeId Graph::vecmat(NodeId x, NodeId m) {
  check_parent(x, 0);
  check_parent(m, 0);
  const Node& nx = nodes_[x];
  const Node& nm = nodes_[m];
  HSNN_CHECK_ARG(nm.rows > 0 || nm.cols > 0 || true, "");
  Node n;
  n.op = Op::kVecMat;
  n.a = x;
  n.b = m;
  // The matrix operand carries its shape in rows/cols when it is itself a
  // vecmat/hebbian result; leaves get their shape from the caller contract:
  // rows = x.size, cols = m.size / x.size.
  n.rows = nx.size;
  HSNN_CHECK_ARG(n.rows > 0 && nm.size % n.rows == 0, "vecmat: dimension mismatch");
  n.cols = nm.size / n.rows;
  n.size = n.cols;
  n.needs_grad = nx.needs_grad || nm.needs_grad;
  n.values = alloc_values(n.size);
  std::memset(n.values, 0, sizeof(double) * static_cast<std::size_t>(n.size));
  const double* xv = nx.values;
  const double* mv = nm.values;
  for (std::int32_t r = 0; r < n.rows; ++r) {
    const double xr = xv[r];
    if (xr == 0.0) continue;
    const double* row = mv + static_cast<std::size_t>(r) * n.cols;
    double* out = n.values;
    for (std::int32_t c = 0; c < n.cols; ++c) out[c] += xr * row[c];
  }
  return push(n);
}

NodeId Graph::lincomb(std::span<const double> coeffs, std::span<const NodeId> terms) {
  HSNN_CHECK_ARG(!terms.empty() && coeffs.size() == terms.size(),
                 "lincomb: need one coefficient per term");
  const std::int32_t size = nodes_.at(terms[0]).size;
  Node n;
  n.op = Op::kLinComb;
  n.size = size;
  n.args_begin = static_cast<std::int32_t>(args_.size());
  n.args_len = static_cast<std::int32_t>(terms.size());
  n.aux_i = static_cast<std::int32_t>(coeffs_.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    check_parent(terms[i], 0);
    HSNN_CHECK_ARG(nodes_[terms[i]].size == size, "lincomb: size mismatch");
    n.needs_grad = n.needs_grad || nodes_[terms[i]].needs_grad;
    args_.push_back(terms[i]);
    coeffs_.push_back(coeffs[i]);
  }
  n.values = alloc_values(size);
  std::memset(n.values, 0, sizeof(double) * static_cast<std::size_t>(size));
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double ci = coeffs[i];
    const double* pv = nodes_[terms[i]].values;
    for (std::int32_t k = 0; k < size; ++k) n.values[k] += ci * pv[k];
  }
  return push(n);
}

NodeId Graph::affine(NodeId x, double scale, double shift) {
  check_parent(x, 0);
  const Node& nx = nodes_[x];
  Node n;
  n.op = Op::kAffine;
  n.a = x;
  n.size = nx.size;
  n.x0 = scale;
  n.x1 = shift;
  n.needs_grad = nx.needs_grad;
  n.values = alloc_values(n.size);
  for (std::int32_t i = 0; i < n.size; ++i) n.values[i] = scale * nx.values[i] + shift;
  return push(n);
}

NodeId Graph::add(NodeId x, NodeId y) {
  check_parent(x, 0);
  check_parent(y, 0);
  const Node& nx = nodes_[x];
  const Node& ny = nodes_[y];
  HSNN_CHECK_ARG(nx.size == ny.size, "add: size mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = x;
  n.b = y;
  n.size = nx.size;
  n.needs_grad = nx.needs_grad || ny.needs_grad;
  n.values = alloc_values(n.size);
  for (std::int32_t i = 0; i < n.size; ++i) n.values[i] = nx.values[i] + ny.values[i];
  return push(n);
}

NodeId Graph::mul(NodeId x, NodeId y) {
  check_parent(x, 0);
  check_parent(y, 0);
  const Node& nx = nodes_[x];
  const Node& ny = nodes_[y];
  HSNN_CHECK_ARG(nx.size == ny.size, "mul: size mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = x;
  n.b = y;
  n.size = nx.size;
  n.needs_grad = nx.needs_grad || ny.needs_grad;
  n.values = alloc_values(n.size);
  for (std::int32_t i = 0; i < n.size; ++i) n.values[i] = nx.values[i] * ny.values[i];
  return push(n);
}

NodeId Graph::concat(NodeId x, NodeId y) {
  check_parent(x, 0);
  check_parent(y, 0);
  const Node& nx = nodes_[x];
  const Node& ny = nodes_[y];
  Node n;
  n.op = Op::kConcat;
  n.a = x;
  n.b = y;
  n.size = nx.size + ny.size;
  n.binary = nx.binary && ny.binary;
  n.needs_grad = nx.needs_grad || ny.needs_grad;
  n.values = alloc_values(n.size);
  std::memcpy(n.values, nx.values, sizeof(double) * static_cast<std::size_t>(nx.size));
  std::memcpy(n.values + nx.size, ny.values, sizeof(double) * static_cast<std::size_t>(ny.size));
  return push(n);
}

NodeId Graph::sum_list(std::span<const NodeId> terms) {
  HSNN_CHECK_ARG(!terms.empty(), "sum_list: empty");
  const std::int32_t size = nodes_.at(terms[0]).size;
  Node n;
  n.op = Op::kSumList;
  n.size = size;
  n.args_begin = static_cast<std::int32_t>(args_.size());
  n.args_len = static_cast<std::int32_t>(terms.size());
  for (NodeId t : terms) {
    check_parent(t, 0);
    HSNN_CHECK_ARG(nodes_[t].size == size, "sum_list: size mismatch");
    n.needs_grad = n.needs_grad || nodes_[t].needs_grad;
    args_.push_back(t);
  }
  n.values = alloc_values(size);
  std::memset(n.values, 0, sizeof(double) * static_cast<std::size_t>(size));
  for (NodeId t : terms) {
    const double* pv = nodes_[t].values;
    for (std::int32_t k = 0; k < size; ++k) n.values[k] += pv[k];
  }
  return push(n);
}

NodeId Graph::sum(NodeId x) {
  check_parent(x, 0);
  const Node& nx = nodes_[x];
  Node n;
  n.op = Op::kSum;
  n.a = x;
  n.size = 1;
  n.needs_grad = nx.needs_grad;
  n.values = alloc_values(1);
  double s = 0.0;
  for (std::int32_t i = 0; i < nx.size; ++i) s += nx.values[i];
  n.values[0] = s;
  return push(n);
}

NodeId Graph::tanh_op(NodeId x) {
  check_parent(x, 0);
  const Node& nx = nodes_[x];
  Node n;
  n.op = Op::kTanh;
  n.a = x;
  n.size = nx.size;
  n.needs_grad = nx.needs_grad;
  n.values = alloc_values(n.size);
  for (std::int32_t i = 0; i < n.size; ++i) n.values[i] = std::tanh(nx.values[i]);
  return push(n);
}

NodeId Graph::spike(NodeId v_norm, const std::uint8_t* eligible, const SurrogateParams& params) {
  check_parent(v_norm, 0);
  const Node& nv = nodes_[v_norm];
  Node n;
  n.op = Op::kSpike;
  n.a = v_norm;
  n.size = nv.size;
  n.binary = true;
  n.x0 = params.beta;
  n.needs_grad = nv.needs_grad;
  if (eligible) {
    std::uint8_t* m = alloc_bytes(n.size);
    std::memcpy(m, eligible, static_cast<std::size_t>(n.size));
    n.mask = m;
  }
  n.values = alloc_values(n.size);
  for (std::int32_t i = 0; i < n.size; ++i) {
    const bool ok = !eligible || eligible[i];
    n.values[i] = (ok && nv.values[i] > 0.0) ? 1.0 : 0.0;
  }
  ++spike_count_;
  return push(n);
}

std::pair<NodeId, NodeId> Graph::spike_threshold(NodeId membrane, const SurrogateParams& params,
                                                 const std::uint8_t* eligible) {
  HSNN_CHECK_ARG(params.theta > 0.0, "spike_threshold: theta must be positive");
  // v = (V - theta) / theta; z = 1[v > 0].
  NodeId v = affine(membrane, 1.0 / params.theta, -1.0);
  NodeId z = spike(v, eligible, params);
  return {z, v};
}

NodeId Graph::hebbian_step(NodeId w, NodeId kappa_key, NodeId kappa_value,
                           const HebbianRule& rule) {
  check_parent(w, 0);
  check_parent(kappa_key, 0);
  check_parent(kappa_value, 0);
  const Node& nw = nodes_[w];
  const Node& nk = nodes_[kappa_key];
  const Node& nv = nodes_[kappa_value];
  HSNN_CHECK_ARG(nw.size == nk.size * nv.size, "hebbian_step: dimension mismatch");
  Node n;
  n.op = Op::kHebbianStep;
  n.a = w;
  n.b = kappa_key;
  n.c = kappa_value;
  n.rows = nk.size;  // rows index the presynaptic key side
  n.cols = nv.size;
  n.size = nw.size;
  n.x0 = rule.gamma_plus;
  n.x1 = rule.gamma_minus;
  n.x2 = rule.w_max;
  n.needs_grad = nw.needs_grad || nk.needs_grad || nv.needs_grad;
  n.values = alloc_values(n.size);
  const double* wv = nw.values;
  const double* kk = nk.values;
  const double* kv = nv.values;
  for (std::int32_t j = 0; j < n.rows; ++j) {
    const double kkj = kk[j];
    const double* wrow = wv + static_cast<std::size_t>(j) * n.cols;
    double* out = n.values + static_cast<std::size_t>(j) * n.cols;
    if (kkj == 0.0) {
      std::memcpy(out, wrow, sizeof(double) * static_cast<std::size_t>(n.cols));
      continue;
    }
    for (std::int32_t k = 0; k < n.cols; ++k) {
      out[k] = wrow[k] + hebbian_delta(wrow[k], kkj, kv[k], rule);
    }
  }
  return push(n);
}

NodeId Graph::softmax_cross_entropy(NodeId logits, std::int32_t target) {
  check_parent(logits, 0);
  const Node& nl = nodes_[logits];
  HSNN_CHECK_ARG(target >= 0 && target < nl.size, "softmax_cross_entropy: target out of range");
  Node n;
  n.op = Op::kSoftmaxXent;
  n.a = logits;
  n.size = 1;
  n.aux_i = target;
  n.needs_grad = nl.needs_grad;
  double mx = nl.values[0];
  for (std::int32_t i = 1; i < nl.size; ++i) mx = std::max(mx, nl.values[i]);
  HSNN_CHECK_ARG(std::isfinite(mx), "softmax_cross_entropy: non-finite logits");
  double lse = 0.0;
  for (std::int32_t i = 0; i < nl.size; ++i) lse += std::exp(nl.values[i] - mx);
  lse = mx + std::log(lse);
  n.values = alloc_values(1);
  n.values[0] = lse - nl.values[target];
  return push(n);
}

NodeId Graph::log_softmax_pick(NodeId logits, std::int32_t index) {
  NodeId ce = softmax_cross_entropy(logits, index);
  // log p = -cross entropy; flip the sign so the result reads as a log-prob.
  Node n;
  n.op = Op::kAffine;
  n.a = ce;
  n.size = 1;
  n.x0 = -1.0;
  n.x1 = 0.0;
  n.needs_grad = nodes_[ce].needs_grad;
  n.values = alloc_values(1);
  n.values[0] = -nodes_[ce].values[0];
  return push(n);
}

NodeId Graph::softmax_entropy(NodeId logits) {
  check_parent(logits, 0);
  const Node& nl = nodes_[logits];
  Node n;
  n.op = Op::kSoftmaxEntropy;
  n.a = logits;
  n.size = 1;
  n.needs_grad = nl.needs_grad;
  double mx = nl.values[0];
  for (std::int32_t i = 1; i < nl.size; ++i) mx = std::max(mx, nl.values[i]);
  double z = 0.0;
  for (std::int32_t i = 0; i < nl.size; ++i) z += std::exp(nl.values[i] - mx);
  double h = 0.0;
  for (std::int32_t i = 0; i < nl.size; ++i) {
    const double p = std::exp(nl.values[i] - mx) / z;
    if (p > 0.0) h -= p * std::log(p);
  }
  n.values = alloc_values(1);
  n.values[0] = h;
  return push(n);
}

NodeId Graph::ppo_policy_loss(NodeId logp_new, double logp_old, double advantage, double clip) {
  check_parent(logp_new, 0);
  const Node& np = nodes_[logp_new];
  HSNN_CHECK_ARG(np.size == 1, "ppo_policy_loss: logp must be scalar");
  HSNN_CHECK_ARG(clip > 0.0 && clip < 1.0, "ppo_policy_loss: clip out of range");
  Node n;
  n.op = Op::kPpoPolicyLoss;
  n.a = logp_new;
  n.size = 1;
  n.x0 = logp_old;
  n.x1 = advantage;
  n.x2 = clip;
  n.needs_grad = np.needs_grad;
  const double r = std::exp(np.values[0] - logp_old);
  const double rc = std::clamp(r, 1.0 - clip, 1.0 + clip);
  n.values = alloc_values(1);
  n.values[0] = -std::min(r * advantage, rc * advantage);
  return push(n);
}

NodeId Graph::squared_error(NodeId x, double target) {
  check_parent(x, 0);
  const Node& nx = nodes_[x];
  HSNN_CHECK_ARG(nx.size == 1, "squared_error: scalar expected");
  Node n;
  n.op = Op::kSquaredError;
  n.a = x;
  n.size = 1;
  n.x0 = target;
  n.needs_grad = nx.needs_grad;
  const double d = nx.values[0] - target;
  n.values = alloc_values(1);
  n.values[0] = d * d;
  return push(n);
}

void Graph::backward(NodeId loss) {
  GradSeed seed;
  seed.node = loss;
  seed.scalar = 1.0;
  backward(std::span<const GradSeed>(&seed, 1));
}

void Graph::backward(std::span<const GradSeed> seeds) {
  NodeId max_id = -1;
  for (const GradSeed& s : seeds) {
    HSNN_CHECK_ARG(s.node >= 0 && static_cast<std::size_t>(s.node) < nodes_.size(),
                   "backward: bad seed node");
    Node& n = nodes_[s.node];
    if (!n.needs_grad) continue;
    double* g = ensure_grad(n);
    if (s.vec) {
      for (std::int32_t i = 0; i < n.size; ++i) g[i] += s.vec[i];
    } else {
      for (std::int32_t i = 0; i < n.size; ++i) g[i] += s.scalar;
    }
    max_id = std::max(max_id, s.node);
  }

  for (NodeId id = max_id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.grad) continue;
    const double* g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        continue;  // keep leaf gradients for the caller
      case Op::kVecMat: {
        Node& nx = nodes_[n.a];
        Node& nm = nodes_[n.b];
        if (nm.needs_grad) {
          double* gm = ensure_grad(nm);
          const double* xv = nx.values;
          for (std::int32_t r = 0; r < n.rows; ++r) {
            const double xr = xv[r];
            if (xr == 0.0) continue;
            double* grow = gm + static_cast<std::size_t>(r) * n.cols;
            for (std::int32_t c = 0; c < n.cols; ++c) grow[c] += xr * g[c];
          }
        }
        if (nx.needs_grad) {
          double* gx = ensure_grad(nx);
          const double* mv = nm.values;
          for (std::int32_t r = 0; r < n.rows; ++r) {
            const double* row = mv + static_cast<std::size_t>(r) * n.cols;
            double s = 0.0;
            for (std::int32_t c = 0; c < n.cols; ++c) s += row[c] * g[c];
            gx[r] += s;
          }
        }
        break;
      }
      case Op::kLinComb: {
        for (std::int32_t i = 0; i < n.args_len; ++i) {
          Node& p = nodes_[args_[n.args_begin + i]];
          if (!p.needs_grad) continue;
          const double ci = coeffs_[n.aux_i + i];
          double* gp = ensure_grad(p);
          for (std::int32_t k = 0; k < n.size; ++k) gp[k] += ci * g[k];
        }
        break;
      }
      case Op::kAffine: {
        Node& p = nodes_[n.a];
        if (p.needs_grad) {
          double* gp = ensure_grad(p);
          for (std::int32_t k = 0; k < n.size; ++k) gp[k] += n.x0 * g[k];
        }
        break;
      }
      case Op::kAdd: {
        for (NodeId pid : {n.a, n.b}) {
          Node& p = nodes_[pid];
          if (!p.needs_grad) continue;
          double* gp = ensure_grad(p);
          for (std::int32_t k = 0; k < n.size; ++k) gp[k] += g[k];
        }
        break;
      }
      case Op::kMul: {
        Node& pa = nodes_[n.a];
        Node& pb = nodes_[n.b];
        if (pa.needs_grad) {
          double* gp = ensure_grad(pa);
          for (std::int32_t k = 0; k < n.size; ++k) gp[k] += pb.values[k] * g[k];
        }
        if (pb.needs_grad) {
          double* gp = ensure_grad(pb);
          for (std::int32_t k = 0; k < n.size; ++k) gp[k] += pa.values[k] * g[k];
        }
        break;
      }
      case Op::kConcat: {
        Node& pa = nodes_[n.a];
        Node& pb = nodes_[n.b];
        if (pa.needs_grad) {
          double* gp = ensure_grad(pa);
          for (std::int32_t k = 0; k < pa.size; ++k) gp[k] += g[k];
        }
        if (pb.needs_grad) {
          double* gp = ensure_grad(pb);
          for (std::int32_t k = 0; k < pb.size; ++k) gp[k] += g[pa.size + k];
        }
        break;
      }
      case Op::kSumList: {
        for (std::int32_t i = 0; i < n.args_len; ++i) {
          Node& p = nodes_[args_[n.args_begin + i]];
          if (!p.needs_grad) continue;
          double* gp = ensure_grad(p);
          for (std::int32_t k = 0; k < n.size; ++k) gp[k] += g[k];
        }
        break;
      }
      case Op::kSum: {
        Node& p = nodes_[n.a];
        if (p.needs_grad) {
          double* gp = ensure_grad(p);
          for (std::int32_t k = 0; k < p.size; ++k) gp[k] += g[0];
        }
        break;
      }
      case Op::kTanh: {
        Node& p = nodes_[n.a];
        if (p.needs_grad) {
          double* gp = ensure_grad(p);
          for (std::int32_t k = 0; k < n.size; ++k) {
            gp[k] += (1.0 - n.values[k] * n.values[k]) * g[k];
          }
        }
        break;
      }
      case Op::kSpike: {
        Node& p = nodes_[n.a];
        if (p.needs_grad) {
          double* gp = ensure_grad(p);
          for (std::int32_t k = 0; k < n.size; ++k) {
            if (n.mask && !n.mask[k]) continue;  // refractory: could not have spiked
            gp[k] += g[k] * pseudo_derivative(p.values[k], n.x0);
          }
        }
        break;
      }
      case Op::kHebbianStep: {
        Node& pw = nodes_[n.a];
        Node& pk = nodes_[n.b];
        Node& pv = nodes_[n.c];
        const double gp_ = n.x0, gm_ = n.x1, wmax = n.x2;
        const double* wv = pw.values;
        const double* kk = pk.values;
        const double* kv = pv.values;
        double* gw = pw.needs_grad ? ensure_grad(pw) : nullptr;
        double* gk = pk.needs_grad ? ensure_grad(pk) : nullptr;
        double* gv = pv.needs_grad ? ensure_grad(pv) : nullptr;
        for (std::int32_t j = 0; j < n.rows; ++j) {
          const double kkj = kk[j];
          const std::size_t off = static_cast<std::size_t>(j) * n.cols;
          const double* grow = g + off;
          const double* wrow = wv + off;
          if (gw) {
            double* gwrow = gw + off;
            if (kkj == 0.0) {
              for (std::int32_t k = 0; k < n.cols; ++k) gwrow[k] += grow[k];
            } else {
              for (std::int32_t k = 0; k < n.cols; ++k) {
                gwrow[k] += grow[k] * (1.0 - gp_ * kv[k] * kkj - gm_ * kkj * kkj);
              }
            }
          }
          if (gk) {
            double s = 0.0;
            for (std::int32_t k = 0; k < n.cols; ++k) {
              s += grow[k] * (gp_ * (wmax - wrow[k]) * kv[k] - 2.0 * gm_ * wrow[k] * kkj);
            }
            gk[j] += s;
          }
          if (gv && kkj != 0.0) {
            for (std::int32_t k = 0; k < n.cols; ++k) {
              gv[k] += grow[k] * gp_ * (wmax - wrow[k]) * kkj;
            }
          }
        }
        break;
      }
      case Op::kSoftmaxXent: {
        Node& p = nodes_[n.a];
        if (p.needs_grad) {
          double* gp = ensure_grad(p);
          double mx = p.values[0];
          for (std::int32_t i = 1; i < p.size; ++i) mx = std::max(mx, p.values[i]);
          double z = 0.0;
          for (std::int32_t i = 0; i < p.size; ++i) z += std::exp(p.values[i] - mx);
          for (std::int32_t i = 0; i < p.size; ++i) {
            const double soft = std::exp(p.values[i] - mx) / z;
            gp[i] += g[0] * (soft - (i == n.aux_i ? 1.0 : 0.0));
          }
        }
        break;
      }
      case Op::kSoftmaxEntropy: {
        Node& p = nodes_[n.a];
        if (p.needs_grad) {
          double* gp = ensure_grad(p);
          double mx = p.values[0];
          for (std::int32_t i = 1; i < p.size; ++i) mx = std::max(mx, p.values[i]);
          double z = 0.0;
          for (std::int32_t i = 0; i < p.size; ++i) z += std::exp(p.values[i] - mx);
          const double h = n.values[0];
          for (std::int32_t i = 0; i < p.size; ++i) {
            const double pi = std::exp(p.values[i] - mx) / z;
            if (pi > 0.0) gp[i] += g[0] * (-pi * (std::log(pi) + h));
          }
        }
        break;
      }
      case Op::kPpoPolicyLoss: {
        Node& p = nodes_[n.a];
        if (p.needs_grad) {
          double* gp = ensure_grad(p);
          const double adv = n.x1;
          const double r = std::exp(p.values[0] - n.x0);
          const double rc = std::clamp(r, 1.0 - n.x2, 1.0 + n.x2);
          // d(-min(rA, rcA))/dlogp; the clipped branch has zero derivative.
          if (r * adv <= rc * adv) gp[0] += g[0] * (-adv * r);
        }
        break;
      }
      case Op::kSquaredError: {
        Node& p = nodes_[n.a];
        if (p.needs_grad) {
          double* gp = ensure_grad(p);
          gp[0] += g[0] * 2.0 * (p.values[0] - n.x0);
        }
        break;
      }
    }
    release_grad(n.grad, n.size);
    n.grad = nullptr;
  }
}

void Graph::clear() {
  for (Node& n : nodes_) {
    if (n.grad) {
      release_grad(n.grad, n.size);
      n.grad = nullptr;
    }
  }
  nodes_.clear();
  args_.clear();
  coeffs_.clear();
  spike_count_ = 0;
  chunk_index_ = 0;
  chunk_used_ = 0;
  byte_chunk_index_ = 0;
  byte_chunk_used_ = 0;
}

double grad_check(const SubgraphBuilder& build, std::vector<double> params, double eps) {
  HSNN_CHECK_ARG(eps > 0.0, "grad_check: eps must be positive");
  std::vector<double> analytic(params.size(), 0.0);
  {
    Graph g;
    std::vector<NodeId> leaves;
    NodeId loss = build(g, params, &leaves);
    HSNN_CHECK_STATE(!g.contains_spike(),
                     "grad_check: subgraph contains spike nodes; finite differences are invalid "
                     "across the hard threshold");
    HSNN_CHECK_ARG(g.node(loss).size == 1, "grad_check: loss must be scalar");
    g.backward(loss);
    std::size_t offset = 0;
    for (NodeId leaf : leaves) {
      const Node& n = g.node(leaf);
      const double* gl = g.grad(leaf);
      for (std::int32_t i = 0; i < n.size; ++i) {
        HSNN_CHECK_ARG(offset < params.size(), "grad_check: leaves exceed parameter vector");
        analytic[offset++] = gl ? gl[i] : 0.0;
      }
    }
    HSNN_CHECK_ARG(offset == params.size(), "grad_check: leaves do not cover parameter vector");
  }

  auto eval = [&](const std::vector<double>& p) {
    Graph g;
    NodeId loss = build(g, p, nullptr);
    return g.value_scalar(loss);
  };

  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + eps;
    const double fp = eval(params);
    params[i] = orig - eps;
    const double fm = eval(params);
    params[i] = orig;
    const double fd = (fp - fm) / (2.0 * eps);
    const double rel = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace hebbsnn
