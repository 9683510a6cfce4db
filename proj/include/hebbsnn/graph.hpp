#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "hebbsnn/common.hpp"

namespace hebbsnn {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

struct SurrogateParams {
  double beta = 1.0;   // dampening factor of the triangular pseudo-derivative
  double theta = 0.1;  // firing threshold (shared with the LIF layers)
};

// Pseudo-derivative dz/dv of the spike nonlinearity at normalized membrane
// potential v = (V - theta) / theta: a triangular bump beta * max(0, 1 - |v|).
inline double pseudo_derivative(double v_norm, double beta) {
  const double w = 1.0 - std::abs(v_norm);
  return w > 0.0 ? beta * w : 0.0;
}

// out[i] = upstream[i] * beta * max(0, 1 - |v_norm[i]|). This is the backward
// rule of the spike op, exposed standalone so it can be tested directly.
void spike_backward(std::span<const double> v_norm, std::span<const double> upstream,
                    const SurrogateParams& params, std::span<double> out);

struct HebbianRule {
  double gamma_plus = 0.3;   // write factor
  double gamma_minus = 0.3;  // forget factor
  double w_max = 1.0;        // soft weight maximum
};

// Per-synapse weight change of the soft-bounded Hebbian rule. kk is the
// presynaptic (key) trace, kv the postsynaptic (value) trace. Shared between
// the plain stepper and the graph op so both produce bit-identical forward
// trajectories.
inline double hebbian_delta(double w, double kk, double kv, const HebbianRule& r) {
  return r.gamma_plus * (r.w_max - w) * kv * kk - r.gamma_minus * w * (kk * kk);
}

enum class Op : std::uint8_t {
  kLeaf,
  kVecMat,        // y = x^T M       (a = x [rows], b = M [rows x cols])
  kLinComb,       // y = sum_i c_i * P_i, elementwise
  kAffine,        // y = s * x + t
  kAdd,           // y = x + b, elementwise
  kMul,           // y = x * b, elementwise
  kConcat,        // y = [x ; b]
  kSumList,       // y = sum_i P_i, elementwise
  kSum,           // scalar = sum_i x_i
  kTanh,          // y = tanh(x)
  kSpike,         // z = 1[v > 0 and eligible]; backward via pseudo-derivative
  kHebbianStep,   // W' = W + soft-bounded Hebbian delta (a = W, b = kk, c = kv)
  kSoftmaxXent,   // scalar = -log softmax(logits)[target]
  kLogSoftmaxPick,// scalar = log softmax(logits)[index]
  kSoftmaxEntropy,// scalar = entropy of softmax(logits)
  kPpoPolicyLoss, // scalar = -min(r*A, clamp(r, 1-eps, 1+eps)*A), r = exp(lp - lp_old)
  kSquaredError,  // scalar = (x - target)^2
};

struct Node {
  Op op = Op::kLeaf;
  bool needs_grad = false;
  bool binary = false;       // values known to be exactly 0/1 (spike trains)
  bool values_owned = true;  // false for leaf_view aliases of caller storage
  bool in_place = false;     // kHebbianStep sharing its parent's buffer
  std::int32_t size = 0;
  std::int32_t rows = 0, cols = 0;             // kVecMat / kHebbianStep
  NodeId a = kNoNode, b = kNoNode, c = kNoNode;
  std::int32_t args_begin = 0, args_len = 0;   // kLinComb / kSumList operands
  double x0 = 0.0, x1 = 0.0, x2 = 0.0;         // op constants
  std::int32_t aux_i = 0;                      // class / pick index
  const std::uint8_t* mask = nullptr;          // kSpike eligibility (1 = may fire)
  double* values = nullptr;
  double* grad = nullptr;  // allocated on demand during backward
};

struct GradSeed {
  NodeId node = kNoNode;
  double scalar = 1.0;            // used when vec == nullptr (broadcast)
  const double* vec = nullptr;    // per-element seed of length node.size
};

// Reverse-mode tape over an explicitly unrolled simulation. Nodes are created
// in topological order (operands must already exist), so reverse creation
// order is a valid backward schedule and the whole pass is deterministic.
// Value storage lives in a bump arena that is recycled by clear(); gradient
// buffers are pooled and released as soon as a node has propagated to its
// parents, which keeps backward memory at a small working set.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf holding a copy of `values`.
  NodeId leaf(std::span<const double> values, bool needs_grad);
  NodeId leaf_zeros(std::int32_t size, bool needs_grad);
  // Leaf aliasing caller-owned storage (no copy). The graph never writes
  // through it; `data` must outlive the graph contents.
  NodeId leaf_view(const double* data, std::int32_t size, bool needs_grad);

  NodeId vecmat(NodeId x, NodeId m);
  NodeId lincomb(std::span<const double> coeffs, std::span<const NodeId> terms);
  NodeId affine(NodeId x, double scale, double shift);
  NodeId add(NodeId x, NodeId y);
  NodeId mul(NodeId x, NodeId y);
  NodeId concat(NodeId x, NodeId y);
  NodeId sum_list(std::span<const NodeId> terms);
  NodeId sum(NodeId x);
  NodeId tanh_op(NodeId x);
  // eligible may be nullptr (all neurons may fire); otherwise one byte per
  // neuron, copied into the graph. Spikes are suppressed and the surrogate
  // is zeroed where eligible is 0.
  NodeId spike(NodeId v_norm, const std::uint8_t* eligible, const SurrogateParams& params);
  // With in_place = true the result shares its parent's value buffer: the
  // update is applied in place during the forward build (legal because every
  // forward consumer of the old weights must already exist) and the parent's
  // values are reconstructed during the backward sweep by inverting the
  // per-element affine update. This keeps long plasticity chains
  // cache-resident instead of materializing one matrix per time step. The
  // parent must own its buffer and have no consumers created after this node.
  NodeId hebbian_step(NodeId w, NodeId kappa_key, NodeId kappa_value, const HebbianRule& rule,
                      bool in_place = false);
  NodeId softmax_cross_entropy(NodeId logits, std::int32_t target);
  NodeId log_softmax_pick(NodeId logits, std::int32_t index);
  NodeId softmax_entropy(NodeId logits);
  NodeId ppo_policy_loss(NodeId logp_new, double logp_old, double advantage, double clip);
  NodeId squared_error(NodeId x, double target);

  // z = 1 where membrane strictly exceeds theta (and the neuron is eligible).
  // Returns the spike node and the normalized-potential node recorded for the
  // backward pass.
  std::pair<NodeId, NodeId> spike_threshold(NodeId membrane, const SurrogateParams& params,
                                            const std::uint8_t* eligible = nullptr);

  // Accumulates reverse-mode gradients into every leaf reachable from the
  // seeds. Leaf gradients stay valid until clear().
  void backward(std::span<const GradSeed> seeds);
  void backward(NodeId loss);  // seeds d(loss)/d(loss) = 1

  std::span<const double> values(NodeId id) const {
    const Node& n = node(id);
    return {n.values, static_cast<std::size_t>(n.size)};
  }
  double value_scalar(NodeId id) const;
  // nullptr when no gradient reached the node (treated as zero).
  const double* grad(NodeId id) const { return node(id).grad; }
  const Node& node(NodeId id) const;
  std::size_t node_count() const { return nodes_.size(); }
  bool contains_spike() const { return spike_count_ > 0; }

  // Drops all nodes but keeps arena capacity and gradient pools for reuse.
  void clear();

 private:
  NodeId push(Node n);
  double* alloc_values(std::int64_t n);
  std::uint8_t* alloc_bytes(std::int64_t n);
  double* acquire_grad(std::int32_t size);
  void release_grad(double* p, std::int32_t size);
  double* ensure_grad(Node& n);
  void check_parent(NodeId parent, NodeId self_upcoming) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> args_;
  std::vector<double> coeffs_;
  std::int64_t spike_count_ = 0;

  static constexpr std::int64_t kChunkDoubles = 1 << 20;
  std::vector<std::unique_ptr<double[]>> chunks_;
  std::size_t chunk_index_ = 0;
  std::int64_t chunk_used_ = 0;
  std::vector<std::unique_ptr<std::uint8_t[]>> byte_chunks_;
  std::size_t byte_chunk_index_ = 0;
  std::int64_t byte_chunk_used_ = 0;
  std::unordered_map<std::int32_t, std::vector<double*>> grad_pool_;
  std::vector<std::unique_ptr<double[]>> grad_storage_;
};

// Builds a scalar-valued graph of smooth ops from a flat parameter vector and
// returns the max over parameters of |analytic - central difference| /
// max(1, |analytic|). The builder must register one leaf per parameter block
// in `param_leaves`, covering the parameter vector in order. Rejects graphs
// containing spike nodes (finite differences are invalid across the hard
// threshold).
using SubgraphBuilder =
    std::function<NodeId(Graph&, std::span<const double>, std::vector<NodeId>*)>;
double grad_check(const SubgraphBuilder& build, std::vector<double> params, double eps);

}  // namespace hebbsnn
