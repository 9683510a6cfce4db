#include "hebbsnn/gradcheck_suite.hpp"

#include <array>
#include <cmath>

#include "hebbsnn/graph.hpp"
#include "hebbsnn/rng.hpp"

namespace hebbsnn {

namespace {

std::vector<double> random_params(std::size_t n, std::uint64_t seed, double lo = -1.0,
                                  double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> p(n);
  for (double& v : p) v = rng.uniform(lo, hi);
  return p;
}

GradCheckCase check(const std::string& name, const SubgraphBuilder& build,
                    std::vector<double> params, double eps = 1e-5) {
  return {name, grad_check(build, std::move(params), eps)};
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite() {
  std::vector<GradCheckCase> cases;

  // Quadratic through mul + sum: loss = sum(x * x).
  cases.push_back(check(
      "quadratic",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId x = g.leaf(p, true);
        if (leaves) leaves->push_back(x);
        return g.sum(g.mul(x, x));
      },
      random_params(6, 11)));

  // vecmat with both operands differentiated: loss = sum(x^T M).
  cases.push_back(check(
      "vecmat",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId x = g.leaf(p.subspan(0, 3), true);
        NodeId m = g.leaf(p.subspan(3, 12), true);
        if (leaves) {
          leaves->push_back(x);
          leaves->push_back(m);
        }
        return g.sum(g.vecmat(x, m));
      },
      random_params(15, 12)));

  // lincomb + affine + add + concat, reduced with sum.
  cases.push_back(check(
      "lincomb_affine_concat",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId a = g.leaf(p.subspan(0, 4), true);
        NodeId b = g.leaf(p.subspan(4, 4), true);
        if (leaves) {
          leaves->push_back(a);
          leaves->push_back(b);
        }
        const std::array<double, 2> coeffs = {0.7, -1.3};
        const std::array<NodeId, 2> terms = {a, b};
        NodeId lc = g.lincomb(coeffs, terms);
        NodeId af = g.affine(lc, 2.5, -0.25);
        NodeId ad = g.add(af, b);
        return g.sum(g.concat(ad, a));
      },
      random_params(8, 13)));

  // sum_list across several vectors.
  cases.push_back(check(
      "sum_list",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId a = g.leaf(p.subspan(0, 3), true);
        NodeId b = g.leaf(p.subspan(3, 3), true);
        NodeId c = g.leaf(p.subspan(6, 3), true);
        if (leaves) {
          leaves->push_back(a);
          leaves->push_back(b);
          leaves->push_back(c);
        }
        const std::array<NodeId, 3> terms = {a, b, c};
        return g.sum(g.mul(g.sum_list(terms), a));
      },
      random_params(9, 14)));

  // tanh head.
  cases.push_back(check(
      "tanh",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId x = g.leaf(p, true);
        if (leaves) leaves->push_back(x);
        return g.sum(g.tanh_op(x));
      },
      random_params(5, 15, -2.0, 2.0)));

  // Soft-bounded Hebbian update, all three operands differentiated.
  cases.push_back(check(
      "hebbian_step",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId w = g.leaf(p.subspan(0, 12), true);
        NodeId kk = g.leaf(p.subspan(12, 3), true);
        NodeId kv = g.leaf(p.subspan(15, 4), true);
        if (leaves) {
          leaves->push_back(w);
          leaves->push_back(kk);
          leaves->push_back(kv);
        }
        HebbianRule rule;
        NodeId w1 = g.hebbian_step(w, kk, kv, rule);
        NodeId w2 = g.hebbian_step(w1, kk, kv, rule);
        return g.sum(g.mul(w2, w2));
      },
      random_params(19, 16, 0.05, 0.9)));

  // Softmax cross-entropy on 5 logits.
  cases.push_back(check(
      "softmax_cross_entropy",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId logits = g.leaf(p, true);
        if (leaves) leaves->push_back(logits);
        return g.softmax_cross_entropy(logits, 2);
      },
      random_params(5, 17, -2.0, 2.0)));

  // log softmax pick and entropy, combined into one scalar.
  cases.push_back(check(
      "log_softmax_entropy",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId logits = g.leaf(p, true);
        if (leaves) leaves->push_back(logits);
        NodeId lp = g.log_softmax_pick(logits, 1);
        NodeId h = g.softmax_entropy(logits);
        return g.add(lp, h);
      },
      random_params(4, 18, -1.5, 1.5)));

  // PPO policy loss with the ratio near 1, inside the clip band where the
  // surrogate is smooth. logp_old is a fixed constant.
  cases.push_back(check(
      "ppo_policy_loss",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId logits = g.leaf(p, true);
        if (leaves) leaves->push_back(logits);
        NodeId lp = g.log_softmax_pick(logits, 0);
        return g.ppo_policy_loss(lp, -1.0986122886681098, 1.7, 0.2);
      },
      random_params(3, 19, -0.05, 0.05)));

  // Squared error head.
  cases.push_back(check(
      "squared_error",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId x = g.leaf(p, true);
        if (leaves) leaves->push_back(x);
        return g.squared_error(g.sum(x), 0.8);
      },
      random_params(3, 20)));

  // Ten-step linear recurrence: h' = a*h + b*u with shared weights.
  cases.push_back(check(
      "linear_recurrence_10",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId u = g.leaf(p.subspan(0, 4), true);
        if (leaves) leaves->push_back(u);
        NodeId h = g.leaf_zeros(4, false);
        for (int t = 0; t < 10; ++t) {
          const std::array<double, 2> coeffs = {0.9, 0.3};
          const std::array<NodeId, 2> terms = {h, u};
          h = g.lincomb(coeffs, terms);
        }
        return g.sum(h);
      },
      random_params(4, 21)));

  // Two-layer tanh network, matching the actor/critic head shape.
  cases.push_back(check(
      "mlp_head",
      [](Graph& g, std::span<const double> p, std::vector<NodeId>* leaves) {
        NodeId x = g.leaf(p.subspan(0, 3), true);
        NodeId w1 = g.leaf(p.subspan(3, 12), true);
        NodeId b1 = g.leaf(p.subspan(15, 4), true);
        NodeId w2 = g.leaf(p.subspan(19, 4), true);
        if (leaves) {
          leaves->push_back(x);
          leaves->push_back(w1);
          leaves->push_back(b1);
          leaves->push_back(w2);
        }
        NodeId h = g.tanh_op(g.add(g.vecmat(x, w1), b1));
        return g.sum(g.vecmat(h, w2));
      },
      random_params(23, 22)));

  return cases;
}

}  // namespace hebbsnn
