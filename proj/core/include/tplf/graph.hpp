#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tplf/common.hpp"

namespace tplf {

// A named, trainable array. Owned by model structs; graphs reference them
// per forward pass and never mutate them.
template <class S>
struct Parameter {
  std::string name;
  Mat<S> value;

  Parameter() = default;
  Parameter(std::string n, Mat<S> v) : name(std::move(n)), value(std::move(v)) {}
};

// Reverse-mode tape over dense matrices. One Graph per forward pass; nodes
// are created in topological order, backward() walks them in reverse.
// Values are immutable once created, so backward() may be called more than
// once (with zero_grad() in between) to obtain per-loss gradients.
template <class S>
class Graph {
 public:
  using M = Mat<S>;

  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  // --- leaves ---

  Var param(Parameter<S>& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Var{it->second};
    Var v = make_leaf(p.value, /*requires_grad=*/true);
    nodes_[v.id].param = &p;
    param_ids_.emplace(&p, v.id);
    return v;
  }

  Var input(M value) { return make_leaf(std::move(value), /*requires_grad=*/false); }

  Var scalar(S value) {
    M m(1, 1);
    m(0, 0) = value;
    return input(std::move(m));
  }

  // --- arithmetic ---

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Var out = make_node(value(a) + value(b), {a, b});
    set_backward(out, [a, b](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      g.accum(a, go);
      g.accum(b, go);
    });
    return out;
  }

  Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Var out = make_node(value(a) - value(b), {a, b});
    set_backward(out, [a, b](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      g.accum(a, go);
      g.accum(b, -go);
    });
    return out;
  }

  Var scale(Var a, S s) {
    Var out = make_node(value(a) * s, {a});
    set_backward(out, [a, s](Graph& g, int self) { g.accum(a, g.nodes_[self].grad * s); });
    return out;
  }

  Var hadamard(Var a, Var b) {
    check_same_shape(a, b, "hadamard");
    Var out = make_node(value(a).cwiseProduct(value(b)), {a, b});
    set_backward(out, [a, b](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      g.accum(a, go.cwiseProduct(g.value(b)));
      g.accum(b, go.cwiseProduct(g.value(a)));
    });
    return out;
  }

  // C = A * B
  Var matmul(Var a, Var b) {
    if (value(a).cols() != value(b).rows())
      throw ConfigError("matmul: inner dimensions disagree");
    Var out = make_node(value(a) * value(b), {a, b});
    set_backward(out, [a, b](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      g.accum(a, go * g.value(b).transpose());
      g.accum(b, g.value(a).transpose() * go);
    });
    return out;
  }

  // C = A * B^T (rows of B are output features; the Linear-layer layout)
  Var matmul_t(Var a, Var b) {
    if (value(a).cols() != value(b).cols())
      throw ConfigError("matmul_t: inner dimensions disagree");
    Var out = make_node(value(a) * value(b).transpose(), {a, b});
    set_backward(out, [a, b](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      g.accum(a, go * g.value(b));
      g.accum(b, go.transpose() * g.value(a));
    });
    return out;
  }

  // y = A + 1*row  (row is 1 x n, broadcast over rows)
  Var add_rowvec(Var a, Var row) {
    if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
      throw ConfigError("add_rowvec: bias must be 1 x cols(a)");
    M out = value(a);
    out.rowwise() += value(row).row(0);
    Var v = make_node(std::move(out), {a, row});
    set_backward(v, [a, row](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      g.accum(a, go);
      g.accum(row, go.colwise().sum());
    });
    return v;
  }

  // y = A .* (1*row)
  Var mul_rowvec(Var a, Var row) {
    if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
      throw ConfigError("mul_rowvec: gain must be 1 x cols(a)");
    M out = value(a).array().rowwise() * value(row).row(0).array();
    Var v = make_node(std::move(out), {a, row});
    set_backward(v, [a, row](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      g.accum(a, (go.array().rowwise() * g.value(row).row(0).array()).matrix());
      g.accum(row, go.cwiseProduct(g.value(a)).colwise().sum());
    });
    return v;
  }

  // --- nonlinearities ---

  Var gelu(Var a) {
    const M& x = value(a);
    M out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double xi = static_cast<double>(x.data()[i]);
      out.data()[i] = static_cast<S>(xi * 0.5 * (1.0 + std::erf(xi / std::sqrt(2.0))));
    }
    Var v = make_node(std::move(out), {a});
    set_backward(v, [a](Graph& g, int self) {
      const M& x = g.value(a);
      const M& go = g.nodes_[self].grad;
      M dx(x.rows(), x.cols());
      constexpr double inv_sqrt2pi = 0.3989422804014327;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        double xi = static_cast<double>(x.data()[i]);
        double cdf = 0.5 * (1.0 + std::erf(xi / std::sqrt(2.0)));
        double pdf = inv_sqrt2pi * std::exp(-0.5 * xi * xi);
        dx.data()[i] = static_cast<S>(go.data()[i] * static_cast<S>(cdf + xi * pdf));
      }
      g.accum(a, dx);
    });
    return v;
  }

  Var softmax_rows(Var a) {
    const M& x = value(a);
    M out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      S mx = x.row(r).maxCoeff();
      out.row(r) = (x.row(r).array() - mx).exp();
      out.row(r) /= out.row(r).sum();
    }
    Var v = make_node(std::move(out), {a});
    set_backward(v, [a](Graph& g, int self) {
      const M& y = g.nodes_[self].value;
      const M& go = g.nodes_[self].grad;
      M dx(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        S dot = go.row(r).dot(y.row(r));
        dx.row(r) = (y.row(r).array() * (go.row(r).array() - dot)).matrix();
      }
      g.accum(a, dx);
    });
    return v;
  }

  // Row-wise layer norm with learned gain/bias (1 x n each).
  Var layer_norm(Var a, Var gain, Var bias, S eps = S(1e-5)) {
    const M& x = value(a);
    const Eigen::Index n = x.cols();
    auto aux = std::make_shared<std::pair<M, M>>();  // (xhat, inv_std per row)
    M& xhat = aux->first;
    M& inv_std = aux->second;
    xhat.resize(x.rows(), n);
    inv_std.resize(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      S mu = x.row(r).mean();
      S var = (x.row(r).array() - mu).square().sum() / S(n);
      S is = S(1) / std::sqrt(var + eps);
      inv_std(r, 0) = is;
      xhat.row(r) = (x.row(r).array() - mu) * is;
    }
    M out = xhat.array().rowwise() * value(gain).row(0).array();
    out.rowwise() += value(bias).row(0);
    Var v = make_node(std::move(out), {a, gain, bias});
    set_backward(v, [a, gain, bias, aux](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      const M& xhat = aux->first;
      const M& inv_std = aux->second;
      const Eigen::Index n = xhat.cols();
      g.accum(gain, go.cwiseProduct(xhat).colwise().sum());
      g.accum(bias, go.colwise().sum());
      if (!g.requires_grad(a)) return;
      M dx(xhat.rows(), n);
      const auto& gr = g.value(gain).row(0);
      for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
        // dxhat = go .* gain; dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
        Eigen::Array<S, 1, Eigen::Dynamic> dxhat = go.row(r).array() * gr.array();
        S m1 = dxhat.mean();
        S m2 = (dxhat * xhat.row(r).array()).mean();
        dx.row(r) = (inv_std(r, 0) * (dxhat - m1 - xhat.row(r).array() * m2)).matrix();
      }
      g.accum(a, dx);
    });
    return v;
  }

  // --- gathers / structure ---

  Var embedding_lookup(Parameter<S>& table, const std::vector<int>& ids) {
    Var tv = param(table);
    const M& t = value(tv);
    M out(static_cast<Eigen::Index>(ids.size()), t.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= t.rows())
        throw ConfigError("embedding_lookup: id " + std::to_string(ids[i]) + " out of range");
      out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
    }
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    Var v = make_node(std::move(out), {tv});
    set_backward(v, [tv, ids_copy](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      M dt = M::Zero(g.value(tv).rows(), g.value(tv).cols());
      for (size_t i = 0; i < ids_copy->size(); ++i)
        dt.row((*ids_copy)[i]) += go.row(static_cast<Eigen::Index>(i));
      g.accum(tv, dt);
    });
    return v;
  }

  // tokens: (batch*seq) x H, mask: batch x seq with a 1s-prefix per row.
  // Output: batch x H, mean over mask==1 positions.
  Var mean_pool_rows(Var tokens, const MatI& mask) {
    const M& t = value(tokens);
    const Eigen::Index batch = mask.rows(), seq = mask.cols();
    if (t.rows() != batch * seq) throw ConfigError("mean_pool_rows: tokens/mask disagree");
    M out = M::Zero(batch, t.cols());
    std::vector<S> inv_count(static_cast<size_t>(batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
      int c = 0;
      for (Eigen::Index s = 0; s < seq; ++s) {
        if (mask(b, s) != 0) {
          out.row(b) += t.row(b * seq + s);
          ++c;
        }
      }
      if (c == 0) throw DataError("pool_mean: empty sequence at row " + std::to_string(b));
      inv_count[static_cast<size_t>(b)] = S(1) / S(c);
      out.row(b) *= inv_count[static_cast<size_t>(b)];
    }
    auto aux = std::make_shared<std::pair<MatI, std::vector<S>>>(mask, std::move(inv_count));
    Var v = make_node(std::move(out), {tokens});
    set_backward(v, [tokens, aux, seq](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      const MatI& mask = aux->first;
      M dt = M::Zero(g.value(tokens).rows(), g.value(tokens).cols());
      for (Eigen::Index b = 0; b < mask.rows(); ++b)
        for (Eigen::Index s = 0; s < mask.cols(); ++s)
          if (mask(b, s) != 0) dt.row(b * seq + s) = go.row(b) * aux->second[static_cast<size_t>(b)];
      g.accum(tokens, dt);
    });
    return v;
  }

  Var l2_normalize_rows(Var a) {
    const M& x = value(a);
    M out(x.rows(), x.cols());
    std::vector<S> inv_norm(static_cast<size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      S n = x.row(r).norm();
      if (n <= S(kNormEps)) throw NumericError("degenerate embedding: row " + std::to_string(r));
      inv_norm[static_cast<size_t>(r)] = S(1) / n;
      out.row(r) = x.row(r) * inv_norm[static_cast<size_t>(r)];
    }
    auto aux = std::make_shared<std::vector<S>>(std::move(inv_norm));
    Var v = make_node(std::move(out), {a});
    set_backward(v, [a, aux](Graph& g, int self) {
      const M& y = g.nodes_[self].value;
      const M& go = g.nodes_[self].grad;
      M dx(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        S in = (*aux)[static_cast<size_t>(r)];
        dx.row(r) = (go.row(r) - y.row(r) * go.row(r).dot(y.row(r))) * in;
      }
      g.accum(a, dx);
    });
    return v;
  }

  // Inverted dropout; mask drawn from rng so a fixed seed reproduces the run.
  Var dropout(Var a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
    const M& x = value(a);
    auto keep = std::make_shared<M>(x.rows(), x.cols());
    std::bernoulli_distribution dist(1.0 - rate);
    S inv_keep = S(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < x.size(); ++i)
      keep->data()[i] = dist(rng) ? inv_keep : S(0);
    Var v = make_node(x.cwiseProduct(*keep), {a});
    set_backward(v, [a, keep](Graph& g, int self) {
      g.accum(a, g.nodes_[self].grad.cwiseProduct(*keep));
    });
    return v;
  }

  // Fused multi-head self-attention. q,k,v: (batch*seq) x H. mask: batch x seq,
  // zero entries are excluded as keys. Softmax probabilities are kept for backward.
  Var self_attention(Var q, Var k, Var v, const MatI& mask, int num_heads) {
    const M& Q = value(q);
    const Eigen::Index batch = mask.rows(), seq = mask.cols();
    const Eigen::Index H = Q.cols();
    if (Q.rows() != batch * seq) throw ConfigError("self_attention: q/mask disagree");
    if (H % num_heads != 0) throw ConfigError("self_attention: heads must divide hidden_dim");
    const Eigen::Index dh = H / num_heads;
    const S scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dh)));

    auto probs = std::make_shared<std::vector<M>>();  // batch*heads entries, seq x seq
    probs->reserve(static_cast<size_t>(batch) * static_cast<size_t>(num_heads));
    const M& K = value(k);
    const M& V = value(v);
    M out(batch * seq, H);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int h = 0; h < num_heads; ++h) {
        auto Qb = Q.block(b * seq, h * dh, seq, dh);
        auto Kb = K.block(b * seq, h * dh, seq, dh);
        auto Vb = V.block(b * seq, h * dh, seq, dh);
        M scores = (Qb * Kb.transpose()) * scale;
        for (Eigen::Index j = 0; j < seq; ++j)
          if (mask(b, j) == 0) scores.col(j).array() = S(-1e9);
        M p(seq, seq);
        for (Eigen::Index r = 0; r < seq; ++r) {
          S mx = scores.row(r).maxCoeff();
          p.row(r) = (scores.row(r).array() - mx).exp();
          p.row(r) /= p.row(r).sum();
        }
        out.block(b * seq, h * dh, seq, dh) = p * Vb;
        probs->push_back(std::move(p));
      }
    }
    auto mask_copy = std::make_shared<MatI>(mask);
    Var outv = make_node(std::move(out), {q, k, v});
    set_backward(outv, [q, k, v, probs, mask_copy, num_heads, seq, dh, scale](Graph& g, int self) {
      const M& go = g.nodes_[self].grad;
      const M& Q = g.value(q);
      const M& K = g.value(k);
      const M& V = g.value(v);
      M dQ = M::Zero(Q.rows(), Q.cols());
      M dK = M::Zero(K.rows(), K.cols());
      M dV = M::Zero(V.rows(), V.cols());
      const Eigen::Index batch = mask_copy->rows();
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (int h = 0; h < num_heads; ++h) {
          const M& p = (*probs)[static_cast<size_t>(b) * num_heads + static_cast<size_t>(h)];
          auto Qb = Q.block(b * seq, h * dh, seq, dh);
          auto Kb = K.block(b * seq, h * dh, seq, dh);
          auto Vb = V.block(b * seq, h * dh, seq, dh);
          auto Gb = go.block(b * seq, h * dh, seq, dh);
          M dP = Gb * Vb.transpose();
          dV.block(b * seq, h * dh, seq, dh) += p.transpose() * Gb;
          M dS(seq, seq);
          for (Eigen::Index r = 0; r < seq; ++r) {
            S dot = dP.row(r).dot(p.row(r));
            dS.row(r) = (p.row(r).array() * (dP.row(r).array() - dot)).matrix() * scale;
          }
          dQ.block(b * seq, h * dh, seq, dh) += dS * Kb;
          dK.block(b * seq, h * dh, seq, dh) += dS.transpose() * Qb;
        }
      }
      g.accum(q, dQ);
      g.accum(k, dK);
      g.accum(v, dV);
    });
    return outv;
  }

  // Mean of -log softmax(logits)[label] over rows whose label != ignore_label.
  // Returns a 1x1 node.
  Var cross_entropy_rows(Var logits, const std::vector<int>& labels, int ignore_label = kIgnoreLabel) {
    const M& x = value(logits);
    if (static_cast<Eigen::Index>(labels.size()) != x.rows())
      throw ConfigError("cross_entropy_rows: labels/rows disagree");
    auto sm = std::make_shared<M>(x.rows(), x.cols());
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    double total = 0.0;
    int active = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      int lab = labels[static_cast<size_t>(r)];
      if (lab == ignore_label) {
        sm->row(r).setZero();
        continue;
      }
      if (lab < 0 || lab >= x.cols())
        throw DataError("cross_entropy_rows: label " + std::to_string(lab) + " out of range");
      S mx = x.row(r).maxCoeff();
      Eigen::Array<S, 1, Eigen::Dynamic> e = (x.row(r).array() - mx).exp();
      S z = e.sum();
      sm->row(r) = (e / z).matrix();
      total += -(static_cast<double>(x(r, lab)) - static_cast<double>(mx) - std::log(static_cast<double>(z)));
      ++active;
    }
    if (active == 0) throw DataError("empty supervision: every label is the ignore sentinel");
    M out(1, 1);
    out(0, 0) = static_cast<S>(total / active);
    Var vv = make_node(std::move(out), {logits});
    S inv_active = S(1) / S(active);
    set_backward(vv, [logits, sm, labels_copy, ignore_label, inv_active](Graph& g, int self) {
      S go = g.nodes_[self].grad(0, 0);
      M dx = *sm;
      for (Eigen::Index r = 0; r < dx.rows(); ++r) {
        int lab = (*labels_copy)[static_cast<size_t>(r)];
        if (lab == ignore_label) continue;
        dx(r, lab) -= S(1);
      }
      g.accum(logits, dx * (go * inv_active));
    });
    return vv;
  }

  Var sum(Var a) {
    M out(1, 1);
    out(0, 0) = value(a).sum();
    Var v = make_node(std::move(out), {a});
    set_backward(v, [a](Graph& g, int self) {
      S go = g.nodes_[self].grad(0, 0);
      g.accum(a, M::Constant(g.value(a).rows(), g.value(a).cols(), go));
    });
    return v;
  }

  Var mean(Var a) { return scale(sum(a), S(1) / S(value(a).size())); }

  // --- execution ---

  const M& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }

  bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].requires_grad; }

  void backward(Var loss) {
    Node& ln = nodes_[static_cast<size_t>(loss.id)];
    if (ln.value.size() != 1) throw ConfigError("backward: loss must be 1x1");
    if (!ln.requires_grad) return;
    ensure_grad(loss.id);
    ln.grad(0, 0) += S(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, i);
    }
  }

  void zero_grad() {
    for (auto& n : nodes_) n.grad.resize(0, 0);
  }

  bool has_grad(const Parameter<S>& p) const {
    auto it = param_ids_.find(&p);
    if (it == param_ids_.end()) return false;
    return nodes_[static_cast<size_t>(it->second)].grad.size() != 0;
  }

  // Gradient of the last backward() w.r.t. p; exact zeros if p was not part
  // of the graph (how task routing yields structurally-zero gradients).
  Mat<S> grad(const Parameter<S>& p) const {
    auto it = param_ids_.find(&p);
    if (it == param_ids_.end() || nodes_[static_cast<size_t>(it->second)].grad.size() == 0)
      return Mat<S>::Zero(p.value.rows(), p.value.cols());
    return nodes_[static_cast<size_t>(it->second)].grad;
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    M value;
    M grad;  // empty until touched
    bool requires_grad = false;
    const Parameter<S>* param = nullptr;
    std::function<void(Graph&, int)> backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<S>*, int> param_ids_;

  Var make_leaf(M value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  Var make_node(M value, std::initializer_list<Var> parents) {
    Node n;
    n.value = std::move(value);
    for (Var p : parents)
      if (nodes_[static_cast<size_t>(p.id)].requires_grad) n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void set_backward(Var v, std::function<void(Graph&, int)> fn) {
    if (nodes_[static_cast<size_t>(v.id)].requires_grad)
      nodes_[static_cast<size_t>(v.id)].backward = std::move(fn);
  }

  void ensure_grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.size() == 0) n.grad = M::Zero(n.value.rows(), n.value.cols());
  }

  template <class Expr>
  void accum(Var v, const Expr& g) {
    Node& n = nodes_[static_cast<size_t>(v.id)];
    if (!n.requires_grad) return;
    ensure_grad(v.id);
    n.grad += g;
  }

  void check_same_shape(Var a, Var b, const char* op) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
      throw ConfigError(std::string(op) + ": shape mismatch");
  }
};

}  // namespace tplf
