#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "phaseflow/nn/loss.hpp"
#include "phaseflow/nn/tensor.hpp"

namespace phaseflow::nn {

enum class Padding { acausal_same, causal };

// Eager reverse-mode tape. Ops compute values immediately and record a
// closure that scatters the node's gradient into its parents. Creation
// order is a topological order, so backward() is a single reverse sweep.
template <class S>
class GraphT {
 public:
  using Ref = std::uint32_t;

  Ref leaf(TensorT<S> value, bool requires_grad = false) {
    return push(std::move(value), requires_grad, nullptr);
  }

  const TensorT<S>& value(Ref r) const { return nodes_.at(r).value; }
  const TensorT<S>& grad(Ref r) const {
    const Node& n = nodes_.at(r);
    if (n.grad.shape.empty() && n.value.numel() > 0)
      throw InputError("gradient not computed; call backward first");
    return n.grad;
  }
  std::size_t size() const { return nodes_.size(); }

  // ---- ops ----

  Ref matmul(Ref ar, Ref br) {
    const auto& a = value(ar);
    const auto& b = value(br);
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
      throw InputError("matmul shape mismatch");
    const std::size_t m = a.dim(0), n = a.dim(1), p = b.dim(1);
    TensorT<S> out({m, p});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const S aik = a.data[i * n + k];
        if (aik == S(0)) continue;
        const S* brow = b.data.data() + k * p;
        S* orow = out.data.data() + i * p;
        for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
      }
    return push(std::move(out), needs(ar) || needs(br),
                [ar, br, m, n, p](GraphT& g, const TensorT<S>& gy) {
                  const auto& a = g.value(ar);
                  const auto& b = g.value(br);
                  if (g.needs(ar)) {
                    auto& da = g.grad_buf(ar);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t k = 0; k < n; ++k) {
                        S acc = 0;
                        const S* gr = gy.data.data() + i * p;
                        const S* br_ = b.data.data() + k * p;
                        for (std::size_t j = 0; j < p; ++j) acc += gr[j] * br_[j];
                        da.data[i * n + k] += acc;
                      }
                  }
                  if (g.needs(br)) {
                    auto& db = g.grad_buf(br);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t k = 0; k < n; ++k) {
                        const S aik = a.data[i * n + k];
                        if (aik == S(0)) continue;
                        const S* gr = gy.data.data() + i * p;
                        S* dbr = db.data.data() + k * p;
                        for (std::size_t j = 0; j < p; ++j) dbr[j] += aik * gr[j];
                      }
                  }
                });
  }

  // x: C_in x T, w: C_out x C_in x k, bias: C_out (or no_bias()).
  Ref conv1d(Ref xr, Ref wr, Ref br, int dilation, Padding pad) {
    const auto& x = value(xr);
    const auto& w = value(wr);
    if (x.rank() != 2 || w.rank() != 3 || w.dim(1) != x.dim(0))
      throw InputError("conv1d shape mismatch");
    if (dilation < 1) throw InputError("dilation must be >= 1");
    const std::size_t k = w.dim(2);
    if (pad == Padding::acausal_same && k % 2 == 0)
      throw InputError("acausal_same requires odd kernel size");
    const bool has_bias = br != kNoRef;
    if (has_bias &&
        (value(br).rank() != 1 || value(br).dim(0) != w.dim(0)))
      throw InputError("conv1d bias shape mismatch");

    const std::size_t c_out = w.dim(0), c_in = x.dim(0), t_len = x.dim(1);
    // tap j reads input position t + (j - anchor) * dilation
    const std::int64_t anchor =
        pad == Padding::acausal_same ? static_cast<std::int64_t>((k - 1) / 2)
                                     : static_cast<std::int64_t>(k - 1);
    const auto valid_range = [t_len](std::int64_t off, std::size_t& lo,
                                     std::size_t& hi) {
      lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
      hi = off > 0 ? t_len - std::min<std::size_t>(t_len,
                                                   static_cast<std::size_t>(off))
                   : t_len;
    };

    TensorT<S> out({c_out, t_len});
    for (std::size_t co = 0; co < c_out; ++co) {
      S* orow = out.data.data() + co * t_len;
      if (has_bias) {
        const S b = value(br).data[co];
        for (std::size_t t = 0; t < t_len; ++t) orow[t] = b;
      }
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const S* xrow = x.data.data() + ci * t_len;
        for (std::size_t j = 0; j < k; ++j) {
          const S wv = w.at3(co, ci, j);
          if (wv == S(0)) continue;
          const std::int64_t off =
              (static_cast<std::int64_t>(j) - anchor) * dilation;
          std::size_t lo, hi;
          valid_range(off, lo, hi);
          for (std::size_t t = lo; t < hi; ++t) orow[t] += wv * xrow[t + off];
        }
      }
    }

    const bool ng = needs(xr) || needs(wr) || (has_bias && needs(br));
    return push(
        std::move(out), ng,
        [xr, wr, br, dilation, anchor, valid_range, k, c_out, c_in, t_len,
         has_bias](GraphT& g, const TensorT<S>& gy) {
          const auto& x = g.value(xr);
          const auto& w = g.value(wr);
          if (has_bias && g.needs(br)) {
            auto& db = g.grad_buf(br);
            for (std::size_t co = 0; co < c_out; ++co) {
              S acc = 0;
              const S* gr = gy.data.data() + co * t_len;
              for (std::size_t t = 0; t < t_len; ++t) acc += gr[t];
              db.data[co] += acc;
            }
          }
          for (std::size_t co = 0; co < c_out; ++co) {
            const S* gr = gy.data.data() + co * t_len;
            for (std::size_t ci = 0; ci < c_in; ++ci) {
              const S* xrow = x.data.data() + ci * t_len;
              for (std::size_t j = 0; j < k; ++j) {
                const std::int64_t off =
                    (static_cast<std::int64_t>(j) - anchor) * dilation;
                std::size_t lo, hi;
                valid_range(off, lo, hi);
                if (g.needs(wr)) {
                  S acc = 0;
                  for (std::size_t t = lo; t < hi; ++t)
                    acc += gr[t] * xrow[t + off];
                  g.grad_buf(wr).at3(co, ci, j) += acc;
                }
                if (g.needs(xr)) {
                  const S wv = w.at3(co, ci, j);
                  if (wv == S(0)) continue;
                  S* dx = g.grad_buf(xr).data.data() + ci * t_len;
                  for (std::size_t t = lo; t < hi; ++t)
                    dx[t + off] += wv * gr[t];
                }
              }
            }
          }
        });
  }

  Ref add(Ref ar, Ref br) {
    const auto& a = value(ar);
    const auto& b = value(br);
    if (!a.same_shape(b)) throw InputError("add shape mismatch");
    TensorT<S> out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += b.data[i];
    return push(std::move(out), needs(ar) || needs(br),
                [ar, br](GraphT& g, const TensorT<S>& gy) {
                  for (Ref p : {ar, br})
                    if (g.needs(p)) {
                      auto& d = g.grad_buf(p);
                      for (std::size_t i = 0; i < gy.numel(); ++i)
                        d.data[i] += gy.data[i];
                    }
                });
  }

  // x: C x T plus per-channel bias b: C.
  Ref add_bias(Ref xr, Ref br) {
    const auto& x = value(xr);
    const auto& b = value(br);
    if (x.rank() != 2 || b.rank() != 1 || b.dim(0) != x.dim(0))
      throw InputError("add_bias shape mismatch");
    TensorT<S> out = x;
    const std::size_t c = x.dim(0), t_len = x.dim(1);
    for (std::size_t i = 0; i < c; ++i) {
      const S bv = b.data[i];
      S* row = out.data.data() + i * t_len;
      for (std::size_t t = 0; t < t_len; ++t) row[t] += bv;
    }
    return push(std::move(out), needs(xr) || needs(br),
                [xr, br, c, t_len](GraphT& g, const TensorT<S>& gy) {
                  if (g.needs(xr)) {
                    auto& dx = g.grad_buf(xr);
                    for (std::size_t i = 0; i < gy.numel(); ++i)
                      dx.data[i] += gy.data[i];
                  }
                  if (g.needs(br)) {
                    auto& db = g.grad_buf(br);
                    for (std::size_t i = 0; i < c; ++i) {
                      S acc = 0;
                      const S* row = gy.data.data() + i * t_len;
                      for (std::size_t t = 0; t < t_len; ++t) acc += row[t];
                      db.data[i] += acc;
                    }
                  }
                });
  }

  Ref mul(Ref ar, Ref br) {
    const auto& a = value(ar);
    const auto& b = value(br);
    if (!a.same_shape(b)) throw InputError("mul shape mismatch");
    TensorT<S> out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b.data[i];
    return push(std::move(out), needs(ar) || needs(br),
                [ar, br](GraphT& g, const TensorT<S>& gy) {
                  const auto& a = g.value(ar);
                  const auto& b = g.value(br);
                  if (g.needs(ar)) {
                    auto& da = g.grad_buf(ar);
                    for (std::size_t i = 0; i < gy.numel(); ++i)
                      da.data[i] += gy.data[i] * b.data[i];
                  }
                  if (g.needs(br)) {
                    auto& db = g.grad_buf(br);
                    for (std::size_t i = 0; i < gy.numel(); ++i)
                      db.data[i] += gy.data[i] * a.data[i];
                  }
                });
  }

  Ref scale(Ref ar, S c) {
    TensorT<S> out = value(ar);
    for (auto& v : out.data) v *= c;
    return push(std::move(out), needs(ar),
                [ar, c](GraphT& g, const TensorT<S>& gy) {
                  if (!g.needs(ar)) return;
                  auto& da = g.grad_buf(ar);
                  for (std::size_t i = 0; i < gy.numel(); ++i)
                    da.data[i] += c * gy.data[i];
                });
  }

  Ref tanh(Ref ar) {
    TensorT<S> out = value(ar);
    for (auto& v : out.data) v = std::tanh(v);
    const Ref self = next_ref();
    return push(std::move(out), needs(ar),
                [ar, self](GraphT& g, const TensorT<S>& gy) {
                  if (!g.needs(ar)) return;
                  const auto& y = g.value(self);
                  auto& da = g.grad_buf(ar);
                  for (std::size_t i = 0; i < gy.numel(); ++i)
                    da.data[i] += gy.data[i] * (S(1) - y.data[i] * y.data[i]);
                });
  }

  Ref sigmoid(Ref ar) {
    TensorT<S> out = value(ar);
    for (auto& v : out.data) v = S(1) / (S(1) + std::exp(-v));
    const Ref self = next_ref();
    return push(std::move(out), needs(ar),
                [ar, self](GraphT& g, const TensorT<S>& gy) {
                  if (!g.needs(ar)) return;
                  const auto& y = g.value(self);
                  auto& da = g.grad_buf(ar);
                  for (std::size_t i = 0; i < gy.numel(); ++i)
                    da.data[i] += gy.data[i] * y.data[i] * (S(1) - y.data[i]);
                });
  }

  Ref relu(Ref ar) {
    TensorT<S> out = value(ar);
    for (auto& v : out.data) {
      relu_clearance_ = std::min(relu_clearance_, std::abs(v));
      v = v > S(0) ? v : S(0);
    }
    return push(std::move(out), needs(ar),
                [ar](GraphT& g, const TensorT<S>& gy) {
                  if (!g.needs(ar)) return;
                  const auto& x = g.value(ar);
                  auto& da = g.grad_buf(ar);
                  for (std::size_t i = 0; i < gy.numel(); ++i)
                    if (x.data[i] > S(0)) da.data[i] += gy.data[i];
                });
  }

  // Stack along the feature dimension; all inputs share the time length.
  Ref concat_rows(const std::vector<Ref>& parts) {
    if (parts.empty()) throw InputError("concat of nothing");
    const std::size_t t_len = value(parts[0]).dim(1);
    std::size_t rows = 0;
    bool ng = false;
    for (Ref p : parts) {
      const auto& v = value(p);
      if (v.rank() != 2 || v.dim(1) != t_len)
        throw InputError("concat shape mismatch");
      rows += v.dim(0);
      ng = ng || needs(p);
    }
    TensorT<S> out({rows, t_len});
    std::size_t r0 = 0;
    for (Ref p : parts) {
      const auto& v = value(p);
      std::copy(v.data.begin(), v.data.end(), out.data.begin() + r0 * t_len);
      r0 += v.dim(0);
    }
    return push(std::move(out), ng,
                [parts, t_len](GraphT& g, const TensorT<S>& gy) {
                  std::size_t r0 = 0;
                  for (Ref p : parts) {
                    const std::size_t rows = g.value(p).dim(0);
                    if (g.needs(p)) {
                      auto& d = g.grad_buf(p);
                      for (std::size_t i = 0; i < rows * t_len; ++i)
                        d.data[i] += gy.data[r0 * t_len + i];
                    }
                    r0 += rows;
                  }
                });
  }

  // Softmax over the class dimension, independently per time step.
  Ref softmax_classes(Ref zr) {
    const auto& z = value(zr);
    if (z.rank() != 2) throw InputError("softmax expects 2-D logits");
    const std::size_t c = z.dim(0), t_len = z.dim(1);
    TensorT<S> out({c, t_len});
    for (std::size_t t = 0; t < t_len; ++t) {
      S m = z.data[t];
      for (std::size_t j = 1; j < c; ++j) m = std::max(m, z.data[j * t_len + t]);
      S denom = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const S e = std::exp(z.data[j * t_len + t] - m);
        out.data[j * t_len + t] = e;
        denom += e;
      }
      for (std::size_t j = 0; j < c; ++j) out.data[j * t_len + t] /= denom;
    }
    const Ref self = next_ref();
    return push(std::move(out), needs(zr),
                [zr, self, c, t_len](GraphT& g, const TensorT<S>& gy) {
                  if (!g.needs(zr)) return;
                  const auto& p = g.value(self);
                  auto& dz = g.grad_buf(zr);
                  for (std::size_t t = 0; t < t_len; ++t) {
                    S dot = 0;
                    for (std::size_t j = 0; j < c; ++j)
                      dot += gy.data[j * t_len + t] * p.data[j * t_len + t];
                    for (std::size_t j = 0; j < c; ++j)
                      dz.data[j * t_len + t] +=
                          p.data[j * t_len + t] * (gy.data[j * t_len + t] - dot);
                  }
                });
  }

  // Adaptive average pooling along the feature dimension.
  Ref avg_pool_rows(Ref xr, std::size_t out_rows) {
    const auto& x = value(xr);
    if (x.rank() != 2 || out_rows < 1) throw InputError("avg_pool shape");
    const std::size_t in_rows = x.dim(0), t_len = x.dim(1);
    TensorT<S> out({out_rows, t_len});
    for (std::size_t i = 0; i < out_rows; ++i) {
      const std::size_t lo = i * in_rows / out_rows;
      const std::size_t hi = ((i + 1) * in_rows + out_rows - 1) / out_rows;
      const S inv = S(1) / static_cast<S>(hi - lo);
      for (std::size_t t = 0; t < t_len; ++t) {
        S acc = 0;
        for (std::size_t r = lo; r < hi; ++r) acc += x.data[r * t_len + t];
        out.data[i * t_len + t] = acc * inv;
      }
    }
    return push(std::move(out), needs(xr),
                [xr, out_rows, in_rows, t_len](GraphT& g, const TensorT<S>& gy) {
                  if (!g.needs(xr)) return;
                  auto& dx = g.grad_buf(xr);
                  for (std::size_t i = 0; i < out_rows; ++i) {
                    const std::size_t lo = i * in_rows / out_rows;
                    const std::size_t hi =
                        ((i + 1) * in_rows + out_rows - 1) / out_rows;
                    const S inv = S(1) / static_cast<S>(hi - lo);
                    for (std::size_t t = 0; t < t_len; ++t) {
                      const S gv = gy.data[i * t_len + t] * inv;
                      for (std::size_t r = lo; r < hi; ++r)
                        dx.data[r * t_len + t] += gv;
                    }
                  }
                });
  }

  // table: R x D; output D x T with column t = table[ids[t]].
  Ref embed(Ref tr, std::vector<int> ids) {
    const auto& tab = value(tr);
    if (tab.rank() != 2) throw InputError("embedding table must be 2-D");
    const std::size_t d = tab.dim(1), t_len = ids.size();
    for (int id : ids)
      if (id < 0 || static_cast<std::size_t>(id) >= tab.dim(0))
        throw InputError("embedding id out of range");
    TensorT<S> out({d, t_len});
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t j = 0; j < d; ++j)
        out.data[j * t_len + t] = tab.at2(static_cast<std::size_t>(ids[t]), j);
    return push(std::move(out), needs(tr),
                [tr, ids = std::move(ids), d, t_len](GraphT& g,
                                                     const TensorT<S>& gy) {
                  if (!g.needs(tr)) return;
                  auto& dt = g.grad_buf(tr);
                  for (std::size_t t = 0; t < t_len; ++t)
                    for (std::size_t j = 0; j < d; ++j)
                      dt.at2(static_cast<std::size_t>(ids[t]), j) +=
                          gy.data[j * t_len + t];
                });
  }

  Ref sum_all(Ref ar) {
    const auto& a = value(ar);
    S acc = 0;
    for (S v : a.data) acc += v;
    return push(TensorT<S>::scalar(acc), needs(ar),
                [ar](GraphT& g, const TensorT<S>& gy) {
                  if (!g.needs(ar)) return;
                  auto& da = g.grad_buf(ar);
                  for (auto& v : da.data) v += gy.data[0];
                });
  }

  // Mean over frames of the margin-adjusted scaled cross-entropy.
  Ref ldam_loss(Ref zr, const std::vector<int>& labels, const LdamConfig& cfg) {
    const auto& z = value(zr);
    if (z.rank() != 2) throw InputError("ldam expects 2-D logits");
    const std::size_t c = z.dim(0), t_len = z.dim(1);
    if (labels.size() != t_len) throw InputError("labels length mismatch");
    if (cfg.class_counts.size() != c)
      throw InputError("class_counts size mismatch");
    const auto margins = cfg.margins();
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= c)
        throw InputError("label out of range");
      if (cfg.class_counts[static_cast<std::size_t>(y)] < 1.0)
        throw InputError("observed label has non-positive class count");
    }
    const S s = static_cast<S>(cfg.logit_scale);

    // p holds the softmax of the margin-adjusted scaled logits, reused in
    // the backward closure.
    TensorT<S> p({c, t_len});
    double loss = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const auto y = static_cast<std::size_t>(labels[t]);
      S m = -std::numeric_limits<S>::infinity();
      for (std::size_t j = 0; j < c; ++j) {
        S u = s * z.data[j * t_len + t];
        if (j == y) u -= s * static_cast<S>(margins[y]);
        p.data[j * t_len + t] = u;
        m = std::max(m, u);
      }
      S denom = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const S e = std::exp(p.data[j * t_len + t] - m);
        p.data[j * t_len + t] = e;
        denom += e;
      }
      for (std::size_t j = 0; j < c; ++j) p.data[j * t_len + t] /= denom;
      loss -= std::log(static_cast<double>(p.data[y * t_len + t]));
    }
    loss /= static_cast<double>(t_len);

    return push(TensorT<S>::scalar(static_cast<S>(loss)), needs(zr),
                [zr, labels, p = std::move(p), s, c, t_len](
                    GraphT& g, const TensorT<S>& gy) {
                  if (!g.needs(zr)) return;
                  const S go = gy.data[0] * s / static_cast<S>(t_len);
                  auto& dz = g.grad_buf(zr);
                  for (std::size_t t = 0; t < t_len; ++t) {
                    const auto y = static_cast<std::size_t>(labels[t]);
                    for (std::size_t j = 0; j < c; ++j) {
                      S v = p.data[j * t_len + t];
                      if (j == y) v -= S(1);
                      dz.data[j * t_len + t] += go * v;
                    }
                  }
                });
  }

  // Reverse sweep from a scalar root. Gradients of earlier backward calls
  // on the same graph are discarded.
  void backward(Ref root) {
    if (nodes_.empty() || root >= nodes_.size())
      throw InputError("backward without forward");
    if (value(root).numel() != 1)
      throw InputError("backward root must be scalar");
    for (Ref i = 0; i <= root; ++i) {
      Node& n = nodes_[i];
      if (n.needs_grad)
        n.grad = TensorT<S>::zeros(n.value.shape);
      else
        n.grad = TensorT<S>{};
    }
    Node& r = nodes_[root];
    if (!r.needs_grad) r.grad = TensorT<S>::zeros(r.value.shape);
    r.grad.data[0] = S(1);
    for (Ref i = root + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.back && n.needs_grad) n.back(*this, n.grad);
    }
  }

  static constexpr Ref kNoRef = static_cast<Ref>(-1);
  Ref no_bias() const { return kNoRef; }

  bool needs(Ref r) const { return nodes_.at(r).needs_grad; }

  // Smallest |input| any relu saw; finite-difference checks use this to
  // reject fixtures whose kinks sit inside the probe step.
  S relu_kink_clearance() const { return relu_clearance_; }

 private:
  struct Node {
    TensorT<S> value;
    TensorT<S> grad;
    bool needs_grad = false;
    std::function<void(GraphT&, const TensorT<S>&)> back;
  };

  TensorT<S>& grad_buf(Ref r) { return nodes_.at(r).grad; }

  Ref next_ref() const { return static_cast<Ref>(nodes_.size()); }

  template <class F>
  Ref push(TensorT<S> v, bool needs_grad, F&& back) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    if constexpr (!std::is_same_v<std::decay_t<F>, std::nullptr_t>)
      n.back = std::forward<F>(back);
    nodes_.push_back(std::move(n));
    return static_cast<Ref>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  S relu_clearance_ = std::numeric_limits<S>::infinity();
};

using Graph = GraphT<float>;
using GraphD = GraphT<double>;

}  // namespace phaseflow::nn
