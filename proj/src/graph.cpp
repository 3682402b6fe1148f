#include "vqseg/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "vqseg/errors.hpp"
#include "vqseg/kernels.hpp"

namespace vqseg::ad {

namespace {
constexpr bool kCheckFinite =
#ifdef NDEBUG
    false;
#else
    true;
#endif
}  // namespace

int32_t Graph::new_node(Tensor value, bool requires_grad) {
  if (kCheckFinite && !value.all_finite())
    throw NumericError("non-finite value produced in graph node " +
                       std::to_string(nodes_.size()));
  Node nd;
  nd.value = std::move(value);
  nd.requires_grad = requires_grad && recording_;
  nodes_.push_back(std::move(nd));
  return static_cast<int32_t>(nodes_.size()) - 1;
}

void Graph::check_owned(Var v) const {
  if (v.g != this || v.id < 0 || v.id >= static_cast<int32_t>(nodes_.size()))
    throw std::logic_error("Var does not belong to this graph");
}

Graph::Node& Graph::node(Var v) {
  check_owned(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Graph::Node& Graph::node(Var v) const {
  check_owned(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

Tensor& Graph::grad_buf(int32_t id) {
  Node& nd = nodes_[static_cast<std::size_t>(id)];
  if (!nd.grad_live) {
    nd.grad = Tensor::zeros(nd.value.shape());
    nd.grad_live = true;
  }
  return nd.grad;
}

void Graph::add_grad(int32_t id, const double* src, int64_t n) {
  Tensor& g = grad_buf(id);
  kernels::active().accumulate(g.data(), src, static_cast<std::size_t>(n));
}

bool Graph::wants_grad(Var v) const { return node(v).requires_grad; }

const Tensor& Graph::value(Var v) const { return node(v).value; }

Tensor Graph::grad(Var v) const {
  const Node& nd = node(v);
  if (nd.grad_live) return nd.grad;
  return Tensor::zeros(nd.value.shape());
}

Var Graph::constant(Tensor value) {
  return Var{this, new_node(std::move(value), false)};
}

Var Graph::param(const Tensor& value) {
  return Var{this, new_node(value, true)};
}

Var Graph::conv1d_dilated(Var x, Var w, int64_t dilation) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  if (xv.shape().size() != 2 || wv.shape().size() != 3)
    throw DimensionError("conv1d_dilated expects x:[ci,t], w:[co,ci,k]");
  const int64_t ci = xv.dim(0), t = xv.dim(1);
  const int64_t co = wv.dim(0), k = wv.dim(2);
  if (wv.dim(1) != ci)
    throw DimensionError("conv1d_dilated channel mismatch");
  if (k % 2 == 0) throw DimensionError("conv1d_dilated kernel must be odd");
  if (dilation < 1) throw DimensionError("conv1d_dilated dilation must be >= 1");

  Tensor out = Tensor::zeros({co, t});
  kernels::active().conv1d_same(out.data(), xv.data(), wv.data(),
                                static_cast<std::size_t>(co),
                                static_cast<std::size_t>(ci),
                                static_cast<std::size_t>(t),
                                static_cast<std::size_t>(k),
                                static_cast<std::size_t>(dilation));
  const bool need = wants_grad(x) || wants_grad(w);
  Var outv{this, new_node(std::move(out), need)};
  if (need) {
    const int32_t xid = x.id, wid = w.id;
    nodes_.back().backprop = [xid, wid, co, ci, t, k,
                              dilation](Graph& g, int32_t self) {
      const Tensor& gy = g.nodes_[self].grad;
      const auto& kr = kernels::active();
      if (g.nodes_[xid].requires_grad)
        kr.conv1d_same_backward_input(
            g.grad_buf(xid).data(), gy.data(), g.nodes_[wid].value.data(),
            static_cast<std::size_t>(co), static_cast<std::size_t>(ci),
            static_cast<std::size_t>(t), static_cast<std::size_t>(k),
            static_cast<std::size_t>(dilation));
      if (g.nodes_[wid].requires_grad)
        kr.conv1d_same_backward_weight(
            g.grad_buf(wid).data(), gy.data(), g.nodes_[xid].value.data(),
            static_cast<std::size_t>(co), static_cast<std::size_t>(ci),
            static_cast<std::size_t>(t), static_cast<std::size_t>(k),
            static_cast<std::size_t>(dilation));
    };
  }
  return outv;
}

Var Graph::pointwise(Var x, Var w, Var b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  if (xv.shape().size() != 2 || wv.shape().size() != 2 ||
      bv.shape().size() != 1)
    throw DimensionError("pointwise expects x:[ci,t], w:[co,ci], b:[co]");
  const int64_t ci = xv.dim(0), t = xv.dim(1), co = wv.dim(0);
  if (wv.dim(1) != ci || bv.dim(0) != co)
    throw DimensionError("pointwise shape mismatch");

  Tensor out({co, t});
  kernels::active().matmul_bias(out.data(), wv.data(), xv.data(), bv.data(),
                                static_cast<std::size_t>(co),
                                static_cast<std::size_t>(ci),
                                static_cast<std::size_t>(t));
  const bool need = wants_grad(x) || wants_grad(w) || wants_grad(b);
  Var outv{this, new_node(std::move(out), need)};
  if (need) {
    const int32_t xid = x.id, wid = w.id, bid = b.id;
    nodes_.back().backprop = [xid, wid, bid, co, ci, t](Graph& g,
                                                        int32_t self) {
      const Tensor& gy = g.nodes_[self].grad;
      const auto& kr = kernels::active();
      if (g.nodes_[xid].requires_grad)
        kr.matmul_at_b_acc(g.grad_buf(xid).data(),
                           g.nodes_[wid].value.data(), gy.data(),
                           static_cast<std::size_t>(co),
                           static_cast<std::size_t>(ci),
                           static_cast<std::size_t>(t));
      if (g.nodes_[wid].requires_grad)
        kr.matmul_abt_acc(g.grad_buf(wid).data(), gy.data(),
                          g.nodes_[xid].value.data(),
                          static_cast<std::size_t>(co),
                          static_cast<std::size_t>(t),
                          static_cast<std::size_t>(ci));
      if (g.nodes_[bid].requires_grad) {
        Tensor& gb = g.grad_buf(bid);
        for (int64_t i = 0; i < co; ++i) {
          double acc = gb[i];
          for (int64_t j = 0; j < t; ++j) acc += gy[i * t + j];
          gb[i] = acc;
        }
      }
    };
  }
  return outv;
}

Var Graph::relu(Var x) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  kernels::active().relu(xv.data(), out.data(),
                         static_cast<std::size_t>(xv.numel()));
  const bool need = wants_grad(x);
  Var outv{this, new_node(std::move(out), need)};
  if (need) {
    const int32_t xid = x.id;
    nodes_.back().backprop = [xid](Graph& g, int32_t self) {
      const Tensor& gy = g.nodes_[self].grad;
      const Tensor& xval = g.nodes_[xid].value;
      kernels::active().relu_backward(xval.data(), gy.data(),
                                      g.grad_buf(xid).data(),
                                      static_cast<std::size_t>(xval.numel()));
    };
  }
  return outv;
}

Var Graph::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw DimensionError("add shape mismatch");
  Tensor out(av.shape());
  kernels::active().add(av.data(), bv.data(), out.data(),
                        static_cast<std::size_t>(av.numel()));
  const bool need = wants_grad(a) || wants_grad(b);
  Var outv{this, new_node(std::move(out), need)};
  if (need) {
    const int32_t aid = a.id, bid = b.id;
    nodes_.back().backprop = [aid, bid](Graph& g, int32_t self) {
      const Tensor& gy = g.nodes_[self].grad;
      if (g.nodes_[aid].requires_grad) g.add_grad(aid, gy.data(), gy.numel());
      if (g.nodes_[bid].requires_grad) g.add_grad(bid, gy.data(), gy.numel());
    };
  }
  return outv;
}

Var Graph::mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw DimensionError("mul shape mismatch");
  Tensor out(av.shape());
  for (int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] * bv[i];
  const bool need = wants_grad(a) || wants_grad(b);
  Var outv{this, new_node(std::move(out), need)};
  if (need) {
    const int32_t aid = a.id, bid = b.id;
    nodes_.back().backprop = [aid, bid](Graph& g, int32_t self) {
      const Tensor& gy = g.nodes_[self].grad;
      const Tensor& av2 = g.nodes_[aid].value;
      const Tensor& bv2 = g.nodes_[bid].value;
      if (g.nodes_[aid].requires_grad) {
        Tensor& ga = g.grad_buf(aid);
        for (int64_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i] * bv2[i];
      }
      if (g.nodes_[bid].requires_grad) {
        Tensor& gb = g.grad_buf(bid);
        for (int64_t i = 0; i < gy.numel(); ++i) gb[i] += gy[i] * av2[i];
      }
    };
  }
  return outv;
}

Var Graph::scale(Var x, double c) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] * c;
  const bool need = wants_grad(x);
  Var outv{this, new_node(std::move(out), need)};
  if (need) {
    const int32_t xid = x.id;
    nodes_.back().backprop = [xid, c](Graph& g, int32_t self) {
      const Tensor& gy = g.nodes_[self].grad;
      if (g.nodes_[xid].requires_grad)
        kernels::active().axpy(c, gy.data(), g.grad_buf(xid).data(),
                               static_cast<std::size_t>(gy.numel()));
    };
  }
  return outv;
}

Var Graph::sum(Var x) {
  const Tensor& xv = value(x);
  double acc = 0.0;
  for (int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
  const bool need = wants_grad(x);
  Var outv{this, new_node(Tensor::scalar(acc), need)};
  if (need) {
    const int32_t xid = x.id;
    nodes_.back().backprop = [xid](Graph& g, int32_t self) {
      const double gy = g.nodes_[self].grad[0];
      Tensor& gx = g.grad_buf(xid);
      for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += gy;
    };
  }
  return outv;
}

Var Graph::mse(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw DimensionError("mse shape mismatch");
  const int64_t n = av.numel();
  if (n == 0) throw DimensionError("mse on empty tensors");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  acc /= static_cast<double>(n);
  const bool need = wants_grad(a) || wants_grad(b);
  Var outv{this, new_node(Tensor::scalar(acc), need)};
  if (need) {
    const int32_t aid = a.id, bid = b.id;
    nodes_.back().backprop = [aid, bid, n](Graph& g, int32_t self) {
      const double gy = g.nodes_[self].grad[0];
      const Tensor& av2 = g.nodes_[aid].value;
      const Tensor& bv2 = g.nodes_[bid].value;
      const double c = 2.0 * gy / static_cast<double>(n);
      if (g.nodes_[aid].requires_grad) {
        Tensor& ga = g.grad_buf(aid);
        for (int64_t i = 0; i < n; ++i) ga[i] += c * (av2[i] - bv2[i]);
      }
      if (g.nodes_[bid].requires_grad) {
        Tensor& gb = g.grad_buf(bid);
        for (int64_t i = 0; i < n; ++i) gb[i] -= c * (av2[i] - bv2[i]);
      }
    };
  }
  return outv;
}

Var Graph::masked_sqdiff_sum(Var a, Var b, std::shared_ptr<const Tensor> mask) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw DimensionError("masked_sqdiff_sum shape mismatch");
  if (mask && !mask->same_shape(av))
    throw DimensionError("masked_sqdiff_sum mask shape mismatch");
  const int64_t n = av.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double m = mask ? (*mask)[i] : 1.0;
    const double d = av[i] - bv[i];
    acc += m * d * d;
  }
  const bool need = wants_grad(a) || wants_grad(b);
  Var outv{this, new_node(Tensor::scalar(acc), need)};
  if (need) {
    const int32_t aid = a.id, bid = b.id;
    nodes_.back().backprop = [aid, bid, n, mask](Graph& g, int32_t self) {
      const double gy = g.nodes_[self].grad[0];
      const Tensor& av2 = g.nodes_[aid].value;
      const Tensor& bv2 = g.nodes_[bid].value;
      if (g.nodes_[aid].requires_grad) {
        Tensor& ga = g.grad_buf(aid);
        for (int64_t i = 0; i < n; ++i) {
          const double m = mask ? (*mask)[i] : 1.0;
          ga[i] += gy * 2.0 * m * (av2[i] - bv2[i]);
        }
      }
      if (g.nodes_[bid].requires_grad) {
        Tensor& gb = g.grad_buf(bid);
        for (int64_t i = 0; i < n; ++i) {
          const double m = mask ? (*mask)[i] : 1.0;
          gb[i] -= gy * 2.0 * m * (av2[i] - bv2[i]);
        }
      }
    };
  }
  return outv;
}

namespace {

// Pair sum of Eq-style inter-joint squared distances for one frame.
// s layout: [c,t,v]; returns D[v*vn + w] = sum_c (s[c,t,v] - s[c,t,w])^2.
void frame_pair_distances(const Tensor& s, int64_t t, std::vector<double>& d) {
  const int64_t cn = s.dim(0), tn = s.dim(1), vn = s.dim(2);
  for (int64_t v = 0; v < vn; ++v)
    for (int64_t w = 0; w < vn; ++w) {
      double acc = 0.0;
      for (int64_t c = 0; c < cn; ++c) {
        const double diff =
            s[(c * tn + t) * vn + v] - s[(c * tn + t) * vn + w];
        acc += diff * diff;
      }
      d[static_cast<std::size_t>(v * vn + w)] = acc;
    }
}

}  // namespace

Var Graph::spatial_recon(Var shat, std::shared_ptr<const Tensor> s,
                         std::vector<uint8_t> frame_mask) {
  const Tensor& hv = value(shat);
  if (hv.shape().size() != 3) throw DimensionError("spatial_recon expects [c,t,v]");
  if (!s || !s->same_shape(hv))
    throw DimensionError("spatial_recon target shape mismatch");
  const int64_t tn = hv.dim(1), vn = hv.dim(2);
  if (!frame_mask.empty() && static_cast<int64_t>(frame_mask.size()) != tn)
    throw DimensionError("spatial_recon frame mask length mismatch");

  int64_t t_real = 0;
  for (int64_t t = 0; t < tn; ++t)
    if (frame_mask.empty() || frame_mask[static_cast<std::size_t>(t)]) ++t_real;
  if (t_real == 0) throw DimensionError("spatial_recon with no real frames");
  const double norm =
      static_cast<double>(t_real) * static_cast<double>(vn * vn);

  std::vector<double> ds(static_cast<std::size_t>(vn * vn));
  std::vector<double> dh(static_cast<std::size_t>(vn * vn));
  double acc = 0.0;
  for (int64_t t = 0; t < tn; ++t) {
    if (!frame_mask.empty() && !frame_mask[static_cast<std::size_t>(t)]) continue;
    frame_pair_distances(*s, t, ds);
    frame_pair_distances(hv, t, dh);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const double e = ds[i] - dh[i];
      acc += e * e;
    }
  }
  acc /= norm;

  const bool need = wants_grad(shat);
  Var outv{this, new_node(Tensor::scalar(acc), need)};
  if (need) {
    const int32_t hid = shat.id;
    auto mask = std::make_shared<const std::vector<uint8_t>>(std::move(frame_mask));
    nodes_.back().backprop = [hid, s, mask, norm](Graph& g, int32_t self) {
      const double gy = g.nodes_[self].grad[0];
      if (!g.nodes_[hid].requires_grad) return;
      const Tensor& hv2 = g.nodes_[hid].value;
      const int64_t cn = hv2.dim(0), tn2 = hv2.dim(1), vn2 = hv2.dim(2);
      Tensor& gh = g.grad_buf(hid);
      std::vector<double> ds2(static_cast<std::size_t>(vn2 * vn2));
      std::vector<double> dh2(static_cast<std::size_t>(vn2 * vn2));
      const double coef = -8.0 * gy / norm;
      for (int64_t t = 0; t < tn2; ++t) {
        if (!mask->empty() && !(*mask)[static_cast<std::size_t>(t)]) continue;
        frame_pair_distances(*s, t, ds2);
        frame_pair_distances(hv2, t, dh2);
        for (int64_t u = 0; u < vn2; ++u)
          for (int64_t c = 0; c < cn; ++c) {
            double g_acc = 0.0;
            const double hu = hv2[(c * tn2 + t) * vn2 + u];
            for (int64_t w = 0; w < vn2; ++w) {
              const double e = ds2[static_cast<std::size_t>(u * vn2 + w)] -
                               dh2[static_cast<std::size_t>(u * vn2 + w)];
              g_acc += e * (hu - hv2[(c * tn2 + t) * vn2 + w]);
            }
            gh[(c * tn2 + t) * vn2 + u] += coef * g_acc;
          }
      }
    };
  }
  return outv;
}

Var Graph::gather(Var x, IndexMap map, std::vector<int64_t> out_shape) {
  const Tensor& xv = value(x);
  const int64_t out_n = shape_numel(out_shape);
  if (!map || static_cast<int64_t>(map->size()) != out_n)
    throw DimensionError("gather map length does not match output shape");
  Tensor out(std::move(out_shape));
  const int64_t in_n = xv.numel();
  for (int64_t i = 0; i < out_n; ++i) {
    const int64_t src = (*map)[static_cast<std::size_t>(i)];
    if (src < 0 || src >= in_n) throw DimensionError("gather index out of range");
    out[i] = xv[src];
  }
  const bool need = wants_grad(x);
  Var outv{this, new_node(std::move(out), need)};
  if (need) {
    const int32_t xid = x.id;
    nodes_.back().backprop = [xid, map, out_n](Graph& g, int32_t self) {
      const Tensor& gy = g.nodes_[self].grad;
      if (!g.nodes_[xid].requires_grad) return;
      Tensor& gx = g.grad_buf(xid);
      for (int64_t i = 0; i < out_n; ++i)
        gx[(*map)[static_cast<std::size_t>(i)]] += gy[i];
    };
  }
  return outv;
}

Var Graph::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero parts");
  int64_t total = 0;
  bool need = false;
  for (Var p : parts) {
    total += value(p).numel();
    need = need || wants_grad(p);
  }
  Tensor out({total});
  int64_t off = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    for (int64_t i = 0; i < pv.numel(); ++i) out[off + i] = pv[i];
    off += pv.numel();
  }
  Var outv{this, new_node(std::move(out), need)};
  if (need) {
    std::vector<int32_t> ids;
    ids.reserve(parts.size());
    for (Var p : parts) ids.push_back(p.id);
    nodes_.back().backprop = [ids](Graph& g, int32_t self) {
      const Tensor& gy = g.nodes_[self].grad;
      int64_t off2 = 0;
      for (int32_t pid : ids) {
        const int64_t n = g.nodes_[pid].value.numel();
        if (g.nodes_[pid].requires_grad)
          g.add_grad(pid, gy.data() + off2, n);
        off2 += n;
      }
    };
  }
  return outv;
}

Var Graph::stop_gradient(Var x) {
  return Var{this, new_node(value(x), false)};
}

Var Graph::straight_through(Var pre, Tensor quantized) {
  const Tensor& pv = value(pre);
  if (!pv.same_shape(quantized))
    throw DimensionError("straight_through shape mismatch");
  const bool need = wants_grad(pre);
  Var outv{this, new_node(std::move(quantized), need)};
  if (need) {
    const int32_t pid = pre.id;
    nodes_.back().backprop = [pid](Graph& g, int32_t self) {
      const Tensor& gy = g.nodes_[self].grad;
      if (g.nodes_[pid].requires_grad) g.add_grad(pid, gy.data(), gy.numel());
    };
  }
  return outv;
}

void Graph::backward(Var loss) {
  check_owned(loss);
  if (!recording_)
    throw std::logic_error("backward on a non-recording graph");
  if (value(loss).numel() != 1)
    throw DimensionError("backward expects a scalar loss");
  grad_buf(loss.id)[0] += 1.0;
  for (int32_t id = loss.id; id >= 0; --id) {
    Node& nd = nodes_[static_cast<std::size_t>(id)];
    if (!nd.requires_grad || !nd.grad_live || !nd.backprop) continue;
    nd.backprop(*this, id);
  }
}

}  // namespace vqseg::ad
