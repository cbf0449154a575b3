#include "expomap/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace expomap {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

Tensor4::Tensor4(Shape4 s) : shape(s), v(s.count(), 0.0) {}

Tensor4::Tensor4(Shape4 s, std::vector<double> values) : shape(s), v(std::move(values)) {
  if (v.size() != shape.count()) {
    throw ValidationError("tensor data size " + std::to_string(v.size()) +
                          " does not match shape " + shape.str());
  }
}

Tensor4 tensor_from(const ExposureGrid& grid) {
  return Tensor4(Shape4{1, 1, grid.dims().rows, grid.dims().cols}, grid.values());
}

Tensor4 tensor_from(const BinaryGrid& mask) {
  std::vector<double> v(mask.bits().begin(), mask.bits().end());
  return Tensor4(Shape4{1, 1, mask.dims().rows, mask.dims().cols}, std::move(v));
}

Tensor4& ParamStore::add(const std::string& name, Tensor4 t) {
  if (name.empty()) {
    throw ValidationError("parameter name must be non-empty");
  }
  if (!index_.emplace(name, tensors_.size()).second) {
    throw ValidationError("duplicate parameter name '" + name + "'");
  }
  names_.push_back(name);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor4& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ValidationError("unknown parameter '" + name + "'");
  }
  return tensors_[it->second];
}

const Tensor4& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ValidationError("unknown parameter '" + name + "'");
  }
  return tensors_[it->second];
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const Tensor4& t : tensors_) n += t.size();
  return n;
}

bool ParamStore::grads_populated() const {
  for (const Tensor4& t : tensors_) {
    if (!t.has_grad()) return false;
  }
  return !tensors_.empty();
}

void ParamStore::zero_grads() {
  for (Tensor4& t : tensors_) t.zero_grad();
}

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg_.lr > 0.0) || !(cfg_.eps > 0.0)) {
    throw ValidationError("adam lr and eps must be positive");
  }
  if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params.tensor(i).size(), 0.0);
    v_.emplace_back(params.tensor(i).size(), 0.0);
  }
}

void AdamState::step(ParamStore& params) {
  if (params.size() != m_.size()) {
    throw ValidationError("adam state does not match parameter store");
  }
  if (!params.grads_populated()) {
    throw ValidationError("adam step before any backward pass populated gradients");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor4& p = params.tensor(i);
    if (p.size() != m_[i].size()) {
      throw ValidationError("adam state size mismatch for parameter '" + params.name(i) + "'");
    }
    double* m = m_[i].data();
    double* v = v_[i].data();
    double* val = p.v.data();
    const double* g = p.g.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      val[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

int Tape::push(Shape4 shape, std::vector<double> val) {
  Node n;
  n.shape = shape;
  n.val = std::move(val);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw ValidationError("invalid tape variable");
  }
  return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) { return const_cast<Node&>(std::as_const(*this).node(v)); }

Tape::Var Tape::leaf(Tensor4& param) {
  const int id = push(param.shape, param.v);
  nodes_[id].leaf = &param;
  return Var{id};
}

Tape::Var Tape::constant(const Tensor4& value) { return Var{push(value.shape, value.v)}; }

Shape4 Tape::shape(Var v) const { return node(v).shape; }

const std::vector<double>& Tape::values(Var v) const { return node(v).val; }

double Tape::scalar(Var v) const {
  const Node& n = node(v);
  if (n.shape.count() != 1) {
    throw ValidationError("scalar() on non-scalar node of shape " + n.shape.str());
  }
  return n.val[0];
}

Tensor4 Tape::tensor(Var v) const {
  const Node& n = node(v);
  return Tensor4(n.shape, n.val);
}

Tape::Var Tape::conv2d(Var input, Var weight, Var bias, int stride, int padding) {
  if (padding < 0) {
    throw ValidationError("conv2d padding must be non-negative");
  }
  return conv2d(input, weight, bias, stride, Padding{padding, padding, padding, padding});
}

Tape::Var Tape::conv2d(Var input, Var weight, Var bias, int stride, Padding pad) {
  const Node& in = node(input);
  const Node& wt = node(weight);
  const Node& bi = node(bias);
  const Shape4 is = in.shape;
  const Shape4 ws = wt.shape;
  if (is.n < 1 || is.c < 1 || is.h < 1 || is.w < 1) {
    throw ValidationError("conv2d input has empty shape " + is.str());
  }
  if (ws.c != is.c) {
    throw ValidationError("conv2d channel mismatch: input has " + std::to_string(is.c) +
                          " channels, weight expects " + std::to_string(ws.c));
  }
  if (bi.shape != Shape4{1, ws.n, 1, 1}) {
    throw ValidationError("conv2d bias shape " + bi.shape.str() + " must be (1, " +
                          std::to_string(ws.n) + ", 1, 1)");
  }
  if (stride < 1) {
    throw ValidationError("conv2d stride must be >= 1");
  }
  if (pad.top < 0 || pad.bottom < 0 || pad.left < 0 || pad.right < 0) {
    throw ValidationError("conv2d padding must be non-negative");
  }
  const int out_h = (is.h + pad.top + pad.bottom - ws.h) / stride + 1;
  const int out_w = (is.w + pad.left + pad.right - ws.w) / stride + 1;
  if (is.h + pad.top + pad.bottom < ws.h || is.w + pad.left + pad.right < ws.w || out_h < 1 ||
      out_w < 1) {
    throw ValidationError("conv2d output would be empty: input " + is.str() + ", kernel " +
                          std::to_string(ws.h) + "x" + std::to_string(ws.w) + ", stride " +
                          std::to_string(stride));
  }
  const Shape4 os{is.n, ws.n, out_h, out_w};
  std::vector<double> out(os.count(), 0.0);

  // Row-buffered accumulation. For any fixed output pixel the updates land
  // bias first, then in ascending (in-channel, kernel-row, kernel-col) order,
  // i.e. the exact floating-point sequence of the naive per-pixel loop, while
  // the inner loop runs over independent output columns.
  const double* pin = in.val.data();
  const double* pw = wt.val.data();
  const double* pb = bi.val.data();
  const std::size_t in_cstride = static_cast<std::size_t>(is.h) * is.w;
  const std::size_t in_nstride = in_cstride * is.c;
  const std::size_t w_cstride = static_cast<std::size_t>(ws.h) * ws.w;
  const std::size_t w_nstride = w_cstride * ws.c;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  for (int b = 0; b < is.n; ++b) {
    for (int oc = 0; oc < ws.n; ++oc) {
      double* plane = out.data() + (static_cast<std::size_t>(b) * ws.n + oc) * out_plane;
      std::fill(plane, plane + out_plane, pb[oc]);
      for (int ic = 0; ic < is.c; ++ic) {
        const double* in_ch = pin + b * in_nstride + ic * in_cstride;
        const double* w_ch = pw + oc * w_nstride + ic * w_cstride;
        for (int kh = 0; kh < ws.h; ++kh) {
          const double* w_row = w_ch + static_cast<std::size_t>(kh) * ws.w;
          for (int oh = 0; oh < out_h; ++oh) {
            const int ih = oh * stride - pad.top + kh;
            if (ih < 0 || ih >= is.h) continue;
            const double* in_row = in_ch + static_cast<std::size_t>(ih) * is.w;
            double* out_row = plane + static_cast<std::size_t>(oh) * out_w;
            for (int kw = 0; kw < ws.w; ++kw) {
              const double wv = w_row[kw];
              const int off = kw - pad.left;
              const int lo = off < 0 ? (-off + stride - 1) / stride : 0;
              const int hi_num = is.w - 1 - off;
              if (hi_num < 0) continue;
              const int hi = std::min(out_w, hi_num / stride + 1);
              for (int ow = lo; ow < hi; ++ow) {
                out_row[ow] += wv * in_row[ow * stride + off];
              }
            }
          }
        }
      }
    }
  }

  const int id = push(os, std::move(out));
  const int in_id = input.id, w_id = weight.id, b_id = bias.id;
  nodes_[id].back = [id, in_id, w_id, b_id, stride, pad](Tape& t) {
    Node& on = t.nodes_[id];
    Node& in = t.nodes_[in_id];
    Node& wt = t.nodes_[w_id];
    Node& bi = t.nodes_[b_id];
    const Shape4 is = in.shape;
    const Shape4 ws = wt.shape;
    const Shape4 os = on.shape;
    const double* gout = on.grad.data();
    const double* pin = in.val.data();
    const double* pw = wt.val.data();
    double* din = in.grad.data();
    double* dw = wt.grad.data();
    double* db = bi.grad.data();
    const std::size_t in_cstride = static_cast<std::size_t>(is.h) * is.w;
    const std::size_t in_nstride = in_cstride * is.c;
    const std::size_t w_cstride = static_cast<std::size_t>(ws.h) * ws.w;
    const std::size_t w_nstride = w_cstride * ws.c;
    const std::size_t out_plane = static_cast<std::size_t>(os.h) * os.w;
    for (int b = 0; b < is.n; ++b) {
      for (int oc = 0; oc < ws.n; ++oc) {
        const double* go_plane = gout + (static_cast<std::size_t>(b) * ws.n + oc) * out_plane;
        double s0 = 0.0, s1 = 0.0;
        for (std::size_t i = 0; i + 1 < out_plane; i += 2) {
          s0 += go_plane[i];
          s1 += go_plane[i + 1];
        }
        if (out_plane % 2 != 0) s0 += go_plane[out_plane - 1];
        db[oc] += s0 + s1;
        for (int ic = 0; ic < is.c; ++ic) {
          const double* in_ch = pin + b * in_nstride + ic * in_cstride;
          double* din_ch = din + b * in_nstride + ic * in_cstride;
          const double* w_ch = pw + oc * w_nstride + ic * w_cstride;
          double* dw_ch = dw + oc * w_nstride + ic * w_cstride;
          for (int kh = 0; kh < ws.h; ++kh) {
            const double* w_row = w_ch + static_cast<std::size_t>(kh) * ws.w;
            double* dw_row = dw_ch + static_cast<std::size_t>(kh) * ws.w;
            for (int oh = 0; oh < os.h; ++oh) {
              const int ih = oh * stride - pad.top + kh;
              if (ih < 0 || ih >= is.h) continue;
              const double* in_row = in_ch + static_cast<std::size_t>(ih) * is.w;
              double* din_row = din_ch + static_cast<std::size_t>(ih) * is.w;
              const double* go_row = go_plane + static_cast<std::size_t>(oh) * os.w;
              for (int kw = 0; kw < ws.w; ++kw) {
                const double wv = w_row[kw];
                const int off = kw - pad.left;
                const int lo = off < 0 ? (-off + stride - 1) / stride : 0;
                const int hi_num = is.w - 1 - off;
                if (hi_num < 0) continue;
                const int hi = std::min(os.w, hi_num / stride + 1);
                for (int ow = lo; ow < hi; ++ow) {
                  din_row[ow * stride + off] += wv * go_row[ow];
                }
                double a0 = 0.0, a1 = 0.0;
                for (int ow = lo; ow + 1 < hi; ow += 2) {
                  a0 += go_row[ow] * in_row[ow * stride + off];
                  a1 += go_row[ow + 1] * in_row[(ow + 1) * stride + off];
                }
                if ((hi - lo) % 2 != 0 && hi > lo) {
                  a0 += go_row[hi - 1] * in_row[(hi - 1) * stride + off];
                }
                dw_row[kw] += a0 + a1;
              }
            }
          }
        }
      }
    }
  };
  return Var{id};
}

Tape::Var Tape::upsample_nearest(Var input, int factor) {
  if (factor < 1) {
    throw ValidationError("upsample factor must be >= 1");
  }
  const Node& in = node(input);
  const Shape4 is = in.shape;
  const Shape4 os{is.n, is.c, is.h * factor, is.w * factor};
  std::vector<double> out(os.count());
  std::size_t o = 0;
  for (int b = 0; b < is.n; ++b) {
    for (int c = 0; c < is.c; ++c) {
      const double* plane = in.val.data() + (static_cast<std::size_t>(b) * is.c + c) *
                                                (static_cast<std::size_t>(is.h) * is.w);
      for (int oh = 0; oh < os.h; ++oh) {
        const double* row = plane + static_cast<std::size_t>(oh / factor) * is.w;
        for (int ow = 0; ow < os.w; ++ow, ++o) {
          out[o] = row[ow / factor];
        }
      }
    }
  }
  const int id = push(os, std::move(out));
  const int in_id = input.id;
  nodes_[id].back = [id, in_id, factor](Tape& t) {
    Node& on = t.nodes_[id];
    Node& in = t.nodes_[in_id];
    const Shape4 is = in.shape;
    const Shape4 os = on.shape;
    const double* gout = on.grad.data();
    double* din = in.grad.data();
    std::size_t o = 0;
    for (int b = 0; b < is.n; ++b) {
      for (int c = 0; c < is.c; ++c) {
        double* plane = din + (static_cast<std::size_t>(b) * is.c + c) *
                                  (static_cast<std::size_t>(is.h) * is.w);
        for (int oh = 0; oh < os.h; ++oh) {
          double* row = plane + static_cast<std::size_t>(oh / factor) * is.w;
          for (int ow = 0; ow < os.w; ++ow, ++o) {
            row[ow / factor] += gout[o];
          }
        }
      }
    }
  };
  return Var{id};
}

Tape::Var Tape::leaky_relu(Var input, double slope) {
  if (!(slope > 0.0) || !(slope < 1.0)) {
    throw ValidationError("leaky_relu slope must lie in (0, 1)");
  }
  const Node& in = node(input);
  std::vector<double> out(in.val.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = in.val[i];
    out[i] = x >= 0.0 ? x : slope * x;
  }
  const int id = push(in.shape, std::move(out));
  const int in_id = input.id;
  nodes_[id].back = [id, in_id, slope](Tape& t) {
    Node& on = t.nodes_[id];
    Node& in = t.nodes_[in_id];
    const double* gout = on.grad.data();
    double* din = in.grad.data();
    for (std::size_t i = 0; i < in.val.size(); ++i) {
      din[i] += gout[i] * (in.val[i] >= 0.0 ? 1.0 : slope);
    }
  };
  return Var{id};
}

Tape::Var Tape::batch_norm(Var input, Var gamma, Var beta, double eps) {
  if (!(eps > 0.0)) {
    throw ValidationError("batch_norm eps must be positive");
  }
  const Node& in = node(input);
  const Node& ga = node(gamma);
  const Node& be = node(beta);
  const Shape4 is = in.shape;
  if (ga.shape != Shape4{1, is.c, 1, 1} || be.shape != Shape4{1, is.c, 1, 1}) {
    throw ValidationError("batch_norm gamma/beta must have shape (1, " + std::to_string(is.c) +
                          ", 1, 1)");
  }
  const std::size_t m = static_cast<std::size_t>(is.n) * is.h * is.w;
  if (m < 2) {
    throw ValidationError("batch_norm needs at least 2 values per channel, got " +
                          std::to_string(m));
  }
  const std::size_t plane = static_cast<std::size_t>(is.h) * is.w;
  std::vector<double> out(in.val.size());
  std::vector<double> xhat(in.val.size());
  std::vector<double> inv_s(is.c);
  for (int c = 0; c < is.c; ++c) {
    double sum = 0.0;
    for (int b = 0; b < is.n; ++b) {
      const double* p = in.val.data() + (static_cast<std::size_t>(b) * is.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    const double mean = sum / static_cast<double>(m);
    double var_sum = 0.0;
    for (int b = 0; b < is.n; ++b) {
      const double* p = in.val.data() + (static_cast<std::size_t>(b) * is.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = p[i] - mean;
        var_sum += d * d;
      }
    }
    const double inv = 1.0 / std::sqrt(var_sum / static_cast<double>(m) + eps);
    inv_s[c] = inv;
    const double g = ga.val[c];
    const double bta = be.val[c];
    for (int b = 0; b < is.n; ++b) {
      const std::size_t base = (static_cast<std::size_t>(b) * is.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double xh = (in.val[base + i] - mean) * inv;
        xhat[base + i] = xh;
        out[base + i] = g * xh + bta;
      }
    }
  }
  const int id = push(is, std::move(out));
  const int in_id = input.id, g_id = gamma.id, b_id = beta.id;
  nodes_[id].back = [id, in_id, g_id, b_id, xhat = std::move(xhat),
                     inv_s = std::move(inv_s)](Tape& t) {
    Node& on = t.nodes_[id];
    Node& in = t.nodes_[in_id];
    Node& ga = t.nodes_[g_id];
    Node& be = t.nodes_[b_id];
    const Shape4 is = in.shape;
    const std::size_t plane = static_cast<std::size_t>(is.h) * is.w;
    const std::size_t m = static_cast<std::size_t>(is.n) * plane;
    const double* gout = on.grad.data();
    double* din = in.grad.data();
    for (int c = 0; c < is.c; ++c) {
      double sum_g = 0.0;
      double sum_gx = 0.0;
      for (int b = 0; b < is.n; ++b) {
        const std::size_t base = (static_cast<std::size_t>(b) * is.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_g += gout[base + i];
          sum_gx += gout[base + i] * xhat[base + i];
        }
      }
      be.grad[c] += sum_g;
      ga.grad[c] += sum_gx;
      const double mean_g = sum_g / static_cast<double>(m);
      const double mean_gx = sum_gx / static_cast<double>(m);
      const double scale = ga.val[c] * inv_s[c];
      for (int b = 0; b < is.n; ++b) {
        const std::size_t base = (static_cast<std::size_t>(b) * is.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          din[base + i] += scale * (gout[base + i] - mean_g - xhat[base + i] * mean_gx);
        }
      }
    }
  };
  return Var{id};
}

Tape::Var Tape::concat_channels(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  const Shape4 sa = na.shape;
  const Shape4 sb = nb.shape;
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ValidationError("concat_channels spatial/batch mismatch: " + sa.str() + " vs " +
                          sb.str());
  }
  const Shape4 os{sa.n, sa.c + sb.c, sa.h, sa.w};
  const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;
  std::vector<double> out(os.count());
  for (int bt = 0; bt < os.n; ++bt) {
    double* dst = out.data() + static_cast<std::size_t>(bt) * os.c * plane;
    const double* pa = na.val.data() + static_cast<std::size_t>(bt) * sa.c * plane;
    const double* pb = nb.val.data() + static_cast<std::size_t>(bt) * sb.c * plane;
    std::copy(pa, pa + sa.c * plane, dst);
    std::copy(pb, pb + sb.c * plane, dst + sa.c * plane);
  }
  const int id = push(os, std::move(out));
  const int a_id = a.id, b_id = b.id;
  nodes_[id].back = [id, a_id, b_id](Tape& t) {
    Node& on = t.nodes_[id];
    Node& na = t.nodes_[a_id];
    Node& nb = t.nodes_[b_id];
    const Shape4 sa = na.shape;
    const Shape4 sb = nb.shape;
    const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;
    for (int bt = 0; bt < on.shape.n; ++bt) {
      const double* src = on.grad.data() + static_cast<std::size_t>(bt) * on.shape.c * plane;
      double* da = na.grad.data() + static_cast<std::size_t>(bt) * sa.c * plane;
      double* db = nb.grad.data() + static_cast<std::size_t>(bt) * sb.c * plane;
      for (std::size_t i = 0; i < sa.c * plane; ++i) da[i] += src[i];
      for (std::size_t i = 0; i < sb.c * plane; ++i) db[i] += src[sa.c * plane + i];
    }
  };
  return Var{id};
}

Tape::Var Tape::sigmoid(Var input) {
  const Node& in = node(input);
  std::vector<double> out(in.val.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = in.val[i];
    if (x >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      out[i] = e / (1.0 + e);
    }
  }
  const int id = push(in.shape, std::move(out));
  const int in_id = input.id;
  nodes_[id].back = [id, in_id](Tape& t) {
    Node& on = t.nodes_[id];
    Node& in = t.nodes_[in_id];
    const double* gout = on.grad.data();
    double* din = in.grad.data();
    for (std::size_t i = 0; i < in.val.size(); ++i) {
      const double y = on.val[i];
      din[i] += gout[i] * y * (1.0 - y);
    }
  };
  return Var{id};
}

Tape::Var Tape::masked_sq_loss(Var pred, const Tensor4& target, const Tensor4& mask) {
  const Node& pr = node(pred);
  if (target.shape != pr.shape) {
    throw ValidationError("masked_sq_loss target shape " + target.shape.str() +
                          " does not match prediction " + pr.shape.str());
  }
  if (mask.shape != pr.shape) {
    throw ValidationError("masked_sq_loss mask shape " + mask.shape.str() +
                          " does not match prediction " + pr.shape.str());
  }
  std::vector<std::size_t> cells;
  std::vector<double> targets;
  for (std::size_t i = 0; i < mask.v.size(); ++i) {
    if (mask.v[i] == 1.0) {
      cells.push_back(i);
      targets.push_back(target.v[i]);
    } else if (mask.v[i] != 0.0) {
      throw ValidationError("masked_sq_loss mask entries must be 0 or 1");
    }
  }
  if (cells.empty()) {
    throw ValidationError("masked_sq_loss: no observed points");
  }
  const double inv_k = 1.0 / static_cast<double>(cells.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const double d = pr.val[cells[k]] - targets[k];
    acc += d * d;
  }
  const int id = push(Shape4{1, 1, 1, 1}, {acc * inv_k});
  const int pred_id = pred.id;
  nodes_[id].back = [id, pred_id, cells = std::move(cells), targets = std::move(targets),
                     inv_k](Tape& t) {
    Node& on = t.nodes_[id];
    Node& pr = t.nodes_[pred_id];
    const double go = on.grad[0];
    double* din = pr.grad.data();
    for (std::size_t k = 0; k < cells.size(); ++k) {
      din[cells[k]] += 2.0 * inv_k * (pr.val[cells[k]] - targets[k]) * go;
    }
  };
  return Var{id};
}

Tape::Var Tape::masked_sq_loss(Var pred, const ExposureGrid& target, const ObservationMask& mask) {
  return masked_sq_loss(pred, tensor_from(target), tensor_from(mask));
}

void Tape::backward(Var loss) {
  if (consumed_) {
    throw ValidationError("backward on a consumed tape");
  }
  const Node& ln = node(loss);
  if (ln.shape.count() != 1) {
    throw ValidationError("backward requires a scalar loss, got shape " + ln.shape.str());
  }
  for (int i = 0; i <= loss.id; ++i) {
    nodes_[i].grad.assign(nodes_[i].val.size(), 0.0);
  }
  nodes_[loss.id].grad[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
  for (int i = 0; i <= loss.id; ++i) {
    if (nodes_[i].leaf == nullptr) continue;
    Tensor4& p = *nodes_[i].leaf;
    p.ensure_grad();
    for (std::size_t j = 0; j < p.size(); ++j) {
      p.g[j] += nodes_[i].grad[j];
    }
  }
  consumed_ = true;
}

}  // namespace expomap
