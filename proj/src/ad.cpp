#include "volrob/ad.hpp"

#include <algorithm>
#include <cmath>

namespace volrob::ad {

namespace {

void check_same_tape(const Tensor& a, const Tensor& b) {
  require(a.tape() == b.tape(), ErrKind::InvalidArgument,
          "tensors belong to different tapes");
}

void check_same_numel(const Tensor& a, const Tensor& b, const char* op) {
  require(a.numel() == b.numel(), ErrKind::ShapeMismatch,
          std::string(op) + ": element counts differ, " + std::to_string(a.numel()) + " vs " +
              std::to_string(b.numel()));
}

}  // namespace

Tensor Tape::leaf(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  auto node = std::make_unique<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  require(static_cast<long>(node->value.size()) == node->numel(), ErrKind::ShapeMismatch,
          "leaf value size does not match shape");
  node->requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Tensor(nodes_.back().get(), this);
}

Tensor Tape::make(std::vector<int> shape, bool requires_grad) {
  auto node = std::make_unique<Node>();
  node->shape = std::move(shape);
  node->value.assign(node->numel(), 0.0);
  node->requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Tensor(nodes_.back().get(), this);
}

void Tape::backward(const Tensor& root) {
  require(root.numel() == 1, ErrKind::InvalidArgument, "backward root must be a scalar");
  root.node()->ensure_grad();
  root.node()->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->requires_grad && n->backprop && !n->grad.empty()) n->backprop();
  }
}

namespace {

Tensor unary(Tensor a, std::vector<int> out_shape,
             const std::function<void(const Node&, Node&)>& forward,
             const std::function<void(Node&, Node&)>& backward) {
  Tensor out = a.tape()->make(std::move(out_shape), a.node()->requires_grad);
  forward(*a.node(), *out.node());
  if (out.node()->requires_grad) {
    Node* an = a.node();
    Node* on = out.node();
    on->backprop = [an, on, backward]() {
      an->ensure_grad();
      backward(*on, *an);
    };
  }
  return out;
}

}  // namespace

Tensor add(Tensor a, Tensor b) {
  check_same_tape(a, b);
  check_same_numel(a, b, "add");
  Tensor out = a.tape()->make(a.shape(), a.node()->requires_grad || b.node()->requires_grad);
  const long n = out.numel();
  for (long i = 0; i < n; ++i) out.node()->value[i] = a.value()[i] + b.value()[i];
  if (out.node()->requires_grad) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backprop = [an, bn, on]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
      }
    };
  }
  return out;
}

Tensor sub(Tensor a, Tensor b) {
  check_same_tape(a, b);
  check_same_numel(a, b, "sub");
  Tensor out = a.tape()->make(a.shape(), a.node()->requires_grad || b.node()->requires_grad);
  const long n = out.numel();
  for (long i = 0; i < n; ++i) out.node()->value[i] = a.value()[i] - b.value()[i];
  if (out.node()->requires_grad) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backprop = [an, bn, on]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
      }
    };
  }
  return out;
}

Tensor mul(Tensor a, Tensor b) {
  check_same_tape(a, b);
  check_same_numel(a, b, "mul");
  Tensor out = a.tape()->make(a.shape(), a.node()->requires_grad || b.node()->requires_grad);
  const long n = out.numel();
  for (long i = 0; i < n; ++i) out.node()->value[i] = a.value()[i] * b.value()[i];
  if (out.node()->requires_grad) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backprop = [an, bn, on]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i] * an->value[i];
      }
    };
  }
  return out;
}

Tensor div(Tensor a, Tensor b) {
  check_same_tape(a, b);
  check_same_numel(a, b, "div");
  Tensor out = a.tape()->make(a.shape(), a.node()->requires_grad || b.node()->requires_grad);
  const long n = out.numel();
  for (long i = 0; i < n; ++i) out.node()->value[i] = a.value()[i] / b.value()[i];
  if (out.node()->requires_grad) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backprop = [an, bn, on]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] / bn->value[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) {
          bn->grad[i] -= on->grad[i] * an->value[i] / (bn->value[i] * bn->value[i]);
        }
      }
    };
  }
  return out;
}

Tensor scale(Tensor a, double s) {
  return unary(
      a, a.shape(),
      [s](const Node& an, Node& on) {
        for (std::size_t i = 0; i < an.value.size(); ++i) on.value[i] = s * an.value[i];
      },
      [s](Node& on, Node& an) {
        for (std::size_t i = 0; i < on.grad.size(); ++i) an.grad[i] += s * on.grad[i];
      });
}

Tensor relu(Tensor a) {
  return unary(
      a, a.shape(),
      [](const Node& an, Node& on) {
        for (std::size_t i = 0; i < an.value.size(); ++i)
          on.value[i] = an.value[i] > 0.0 ? an.value[i] : 0.0;
      },
      [](Node& on, Node& an) {
        for (std::size_t i = 0; i < on.grad.size(); ++i)
          if (an.value[i] > 0.0) an.grad[i] += on.grad[i];
      });
}

Tensor sigmoid(Tensor a) {
  return unary(
      a, a.shape(),
      [](const Node& an, Node& on) {
        for (std::size_t i = 0; i < an.value.size(); ++i)
          on.value[i] = 1.0 / (1.0 + std::exp(-an.value[i]));
      },
      [](Node& on, Node& an) {
        for (std::size_t i = 0; i < on.grad.size(); ++i)
          an.grad[i] += on.grad[i] * on.value[i] * (1.0 - on.value[i]);
      });
}

Tensor sqrt(Tensor a) {
  return unary(
      a, a.shape(),
      [](const Node& an, Node& on) {
        for (std::size_t i = 0; i < an.value.size(); ++i) on.value[i] = std::sqrt(an.value[i]);
      },
      [](Node& on, Node& an) {
        for (std::size_t i = 0; i < on.grad.size(); ++i)
          an.grad[i] += on.grad[i] * 0.5 / on.value[i];
      });
}

Tensor exp(Tensor a) {
  return unary(
      a, a.shape(),
      [](const Node& an, Node& on) {
        for (std::size_t i = 0; i < an.value.size(); ++i) on.value[i] = std::exp(an.value[i]);
      },
      [](Node& on, Node& an) {
        for (std::size_t i = 0; i < on.grad.size(); ++i) an.grad[i] += on.grad[i] * on.value[i];
      });
}

Tensor matmul(Tensor a, Tensor b) {
  check_same_tape(a, b);
  require(a.shape().size() == 2 && b.shape().size() == 2, ErrKind::ShapeMismatch,
          "matmul expects rank-2 tensors");
  const int n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  require(b.shape()[0] == k, ErrKind::ShapeMismatch, "matmul inner dimensions differ");
  Tensor out = a.tape()->make({n, m}, a.node()->requires_grad || b.node()->requires_grad);
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* ov = out.node()->value.data();
  for (int i = 0; i < n; ++i) {
    double* orow = ov + static_cast<long>(i) * m;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = av[static_cast<long>(i) * k + kk];
      const double* brow = bv + static_cast<long>(kk) * m;
      for (int j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  if (out.node()->requires_grad) {
    Node* an = a.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backprop = [an, bn, on, n, k, m]() {
      const double* g = on->grad.data();
      if (an->requires_grad) {
        an->ensure_grad();
        // dA = G * B^T
        for (int i = 0; i < n; ++i)
          for (int kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            const double* grow = g + static_cast<long>(i) * m;
            const double* brow = bn->value.data() + static_cast<long>(kk) * m;
            for (int j = 0; j < m; ++j) acc += grow[j] * brow[j];
            an->grad[static_cast<long>(i) * k + kk] += acc;
          }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        // dB = A^T * G
        for (int kk = 0; kk < k; ++kk)
          for (int i = 0; i < n; ++i) {
            const double aik = an->value[static_cast<long>(i) * k + kk];
            double* brow = bn->grad.data() + static_cast<long>(kk) * m;
            const double* grow = g + static_cast<long>(i) * m;
            for (int j = 0; j < m; ++j) brow[j] += aik * grow[j];
          }
      }
    };
  }
  return out;
}

Tensor add_rowvec(Tensor m, Tensor v) {
  check_same_tape(m, v);
  require(m.shape().size() == 2 && v.shape().size() == 1 && m.shape()[1] == v.shape()[0],
          ErrKind::ShapeMismatch, "add_rowvec expects (N,G) + (G)");
  const int rows = m.shape()[0], cols = m.shape()[1];
  Tensor out = m.tape()->make(m.shape(), m.node()->requires_grad || v.node()->requires_grad);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out.node()->value[static_cast<long>(i) * cols + j] =
          m.value()[static_cast<long>(i) * cols + j] + v.value()[j];
  if (out.node()->requires_grad) {
    Node* mn = m.node();
    Node* vn = v.node();
    Node* on = out.node();
    on->backprop = [mn, vn, on, rows, cols]() {
      if (mn->requires_grad) {
        mn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) mn->grad[i] += on->grad[i];
      }
      if (vn->requires_grad) {
        vn->ensure_grad();
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) vn->grad[j] += on->grad[static_cast<long>(i) * cols + j];
      }
    };
  }
  return out;
}

Tensor softmax_rows(Tensor m) {
  require(m.shape().size() == 2, ErrKind::ShapeMismatch, "softmax_rows expects rank 2");
  const int rows = m.shape()[0], cols = m.shape()[1];
  Tensor out = m.tape()->make(m.shape(), m.node()->requires_grad);
  for (int i = 0; i < rows; ++i) {
    const double* x = m.value().data() + static_cast<long>(i) * cols;
    double* p = out.node()->value.data() + static_cast<long>(i) * cols;
    double mx = x[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
      p[j] = std::exp(x[j] - mx);
      sum += p[j];
    }
    for (int j = 0; j < cols; ++j) p[j] /= sum;
  }
  if (out.node()->requires_grad) {
    Node* mn = m.node();
    Node* on = out.node();
    on->backprop = [mn, on, rows, cols]() {
      mn->ensure_grad();
      for (int i = 0; i < rows; ++i) {
        const double* p = on->value.data() + static_cast<long>(i) * cols;
        const double* g = on->grad.data() + static_cast<long>(i) * cols;
        double dot = 0.0;
        for (int j = 0; j < cols; ++j) dot += p[j] * g[j];
        double* dst = mn->grad.data() + static_cast<long>(i) * cols;
        for (int j = 0; j < cols; ++j) dst[j] += p[j] * (g[j] - dot);
      }
    };
  }
  return out;
}

Tensor log_softmax_channels(Tensor z) {
  require(z.shape().size() == 2, ErrKind::ShapeMismatch, "log_softmax_channels expects (C,N)");
  const int c = z.shape()[0];
  const long n = z.shape()[1];
  Tensor out = z.tape()->make(z.shape(), z.node()->requires_grad);
  const double* x = z.value().data();
  double* y = out.node()->value.data();
  for (long v = 0; v < n; ++v) {
    double mx = x[v];
    for (int k = 1; k < c; ++k) mx = std::max(mx, x[k * n + v]);
    double sum = 0.0;
    for (int k = 0; k < c; ++k) sum += std::exp(x[k * n + v] - mx);
    const double lse = mx + std::log(sum);
    for (int k = 0; k < c; ++k) y[k * n + v] = x[k * n + v] - lse;
  }
  if (out.node()->requires_grad) {
    Node* zn = z.node();
    Node* on = out.node();
    on->backprop = [zn, on, c, n]() {
      zn->ensure_grad();
      for (long v = 0; v < n; ++v) {
        double gsum = 0.0;
        for (int k = 0; k < c; ++k) gsum += on->grad[k * n + v];
        for (int k = 0; k < c; ++k) {
          zn->grad[k * n + v] += on->grad[k * n + v] - std::exp(on->value[k * n + v]) * gsum;
        }
      }
    };
  }
  return out;
}

Tensor select_channel(Tensor x, const std::vector<std::int32_t>& labels) {
  require(x.shape().size() == 2, ErrKind::ShapeMismatch, "select_channel expects (C,N)");
  const long n = x.shape()[1];
  require(static_cast<long>(labels.size()) == n, ErrKind::ShapeMismatch,
          "label count does not match voxel count");
  Tensor out = x.tape()->make({static_cast<int>(n)}, x.node()->requires_grad);
  for (long v = 0; v < n; ++v) out.node()->value[v] = x.value()[labels[v] * n + v];
  if (out.node()->requires_grad) {
    Node* xn = x.node();
    Node* on = out.node();
    std::vector<std::int32_t> owned(labels);
    on->backprop = [xn, on, n, owned = std::move(owned)]() {
      xn->ensure_grad();
      for (long v = 0; v < n; ++v) xn->grad[owned[v] * n + v] += on->grad[v];
    };
  }
  return out;
}

Tensor channel_sum(Tensor x) {
  require(x.shape().size() == 2, ErrKind::ShapeMismatch, "channel_sum expects (C,N)");
  const int c = x.shape()[0];
  const long n = x.shape()[1];
  Tensor out = x.tape()->make({static_cast<int>(n)}, x.node()->requires_grad);
  for (long v = 0; v < n; ++v) {
    double acc = 0.0;
    for (int k = 0; k < c; ++k) acc += x.value()[k * n + v];
    out.node()->value[v] = acc;
  }
  if (out.node()->requires_grad) {
    Node* xn = x.node();
    Node* on = out.node();
    on->backprop = [xn, on, c, n]() {
      xn->ensure_grad();
      for (long v = 0; v < n; ++v)
        for (int k = 0; k < c; ++k) xn->grad[k * n + v] += on->grad[v];
    };
  }
  return out;
}

Tensor mean(Tensor a) {
  const long n = a.numel();
  Tensor out = a.tape()->make({1}, a.node()->requires_grad);
  double acc = 0.0;
  for (long i = 0; i < n; ++i) acc += a.value()[i];
  out.node()->value[0] = acc / static_cast<double>(n);
  if (out.node()->requires_grad) {
    Node* an = a.node();
    Node* on = out.node();
    on->backprop = [an, on, n]() {
      an->ensure_grad();
      const double g = on->grad[0] / static_cast<double>(n);
      for (long i = 0; i < n; ++i) an->grad[i] += g;
    };
  }
  return out;
}

Tensor sum(Tensor a) {
  const long n = a.numel();
  Tensor out = a.tape()->make({1}, a.node()->requires_grad);
  double acc = 0.0;
  for (long i = 0; i < n; ++i) acc += a.value()[i];
  out.node()->value[0] = acc;
  if (out.node()->requires_grad) {
    Node* an = a.node();
    Node* on = out.node();
    on->backprop = [an, on, n]() {
      an->ensure_grad();
      for (long i = 0; i < n; ++i) an->grad[i] += on->grad[0];
    };
  }
  return out;
}

Tensor gather(Tensor x, const std::vector<long>& index_map, std::vector<int> out_shape) {
  Tensor out = x.tape()->make(std::move(out_shape), x.node()->requires_grad);
  require(static_cast<long>(index_map.size()) == out.numel(), ErrKind::ShapeMismatch,
          "gather index map does not match output size");
  for (std::size_t i = 0; i < index_map.size(); ++i) out.node()->value[i] = x.value()[index_map[i]];
  if (out.node()->requires_grad) {
    Node* xn = x.node();
    Node* on = out.node();
    std::vector<long> owned(index_map);
    on->backprop = [xn, on, owned = std::move(owned)]() {
      xn->ensure_grad();
      for (std::size_t i = 0; i < owned.size(); ++i) xn->grad[owned[i]] += on->grad[i];
    };
  }
  return out;
}

Tensor conv3d(Tensor x, Tensor w, Tensor b, int cin, int cout, Shape3 spatial) {
  check_same_tape(x, w);
  check_same_tape(x, b);
  const int H = spatial[0], W = spatial[1], D = spatial[2];
  const long hwd = static_cast<long>(H) * W * D;
  require(x.numel() == cin * hwd, ErrKind::ShapeMismatch, "conv3d input size mismatch");
  require(w.numel() == static_cast<long>(cout) * cin * 27, ErrKind::ShapeMismatch,
          "conv3d weight size mismatch");
  require(b.numel() == cout, ErrKind::ShapeMismatch, "conv3d bias size mismatch");

  const bool rg = x.node()->requires_grad || w.node()->requires_grad || b.node()->requires_grad;
  Tensor out = x.tape()->make({cout, H, W, D}, rg);

  // ko: flat kernel offset (kh+1)*9 + (kw+1)*3 + (kd+1).
  auto run = [H, W, D, hwd](const double* src, double* dst, double weight, int kh, int kw,
                            int kd) {
    const int h0 = kh < 0 ? 1 : 0, h1 = kh > 0 ? H - 1 : H;
    const int w0 = kw < 0 ? 1 : 0, w1 = kw > 0 ? W - 1 : W;
    const int d0 = kd < 0 ? 1 : 0, d1 = kd > 0 ? D - 1 : D;
    (void)hwd;
    for (int h = h0; h < h1; ++h) {
      for (int ww = w0; ww < w1; ++ww) {
        double* orow = dst + (static_cast<long>(h) * W + ww) * D;
        const double* xrow = src + (static_cast<long>(h + kh) * W + (ww + kw)) * D + kd;
        for (int d = d0; d < d1; ++d) orow[d] += weight * xrow[d];
      }
    }
  };

  const double* xv = x.value().data();
  const double* wv = w.value().data();
  double* ov = out.node()->value.data();
  for (int co = 0; co < cout; ++co) {
    double* oc = ov + co * hwd;
    const double bias = b.value()[co];
    for (long i = 0; i < hwd; ++i) oc[i] = bias;
    for (int ci = 0; ci < cin; ++ci) {
      const double* xc = xv + ci * hwd;
      const double* wk = wv + (static_cast<long>(co) * cin + ci) * 27;
      for (int kh = -1; kh <= 1; ++kh)
        for (int kw = -1; kw <= 1; ++kw)
          for (int kd = -1; kd <= 1; ++kd)
            run(xc, oc, wk[(kh + 1) * 9 + (kw + 1) * 3 + (kd + 1)], kh, kw, kd);
    }
  }

  if (rg) {
    Node* xn = x.node();
    Node* wn = w.node();
    Node* bn = b.node();
    Node* on = out.node();
    on->backprop = [xn, wn, bn, on, cin, cout, H, W, D, hwd, run]() {
      const double* g = on->grad.data();
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int co = 0; co < cout; ++co) {
          double acc = 0.0;
          const double* gc = g + co * hwd;
          for (long i = 0; i < hwd; ++i) acc += gc[i];
          bn->grad[co] += acc;
        }
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        // Transposed convolution: same slab walk with mirrored offsets.
        for (int ci = 0; ci < cin; ++ci) {
          double* dst = xn->grad.data() + ci * hwd;
          for (int co = 0; co < cout; ++co) {
            const double* gc = g + co * hwd;
            const double* wk = wn->value.data() + (static_cast<long>(co) * cin + ci) * 27;
            for (int kh = -1; kh <= 1; ++kh)
              for (int kw = -1; kw <= 1; ++kw)
                for (int kd = -1; kd <= 1; ++kd)
                  run(gc, dst, wk[(-kh + 1) * 9 + (-kw + 1) * 3 + (-kd + 1)], kh, kw, kd);
          }
        }
      }
      if (wn->requires_grad) {
        wn->ensure_grad();
        for (int co = 0; co < cout; ++co) {
          const double* gc = g + co * hwd;
          for (int ci = 0; ci < cin; ++ci) {
            const double* xc = xn->value.data() + ci * hwd;
            double* wg = wn->grad.data() + (static_cast<long>(co) * cin + ci) * 27;
            for (int kh = -1; kh <= 1; ++kh)
              for (int kw = -1; kw <= 1; ++kw)
                for (int kd = -1; kd <= 1; ++kd) {
                  const int h0 = kh < 0 ? 1 : 0, h1 = kh > 0 ? H - 1 : H;
                  const int w0 = kw < 0 ? 1 : 0, w1 = kw > 0 ? W - 1 : W;
                  const int d0 = kd < 0 ? 1 : 0, d1 = kd > 0 ? D - 1 : D;
                  double acc = 0.0;
                  for (int h = h0; h < h1; ++h)
                    for (int ww = w0; ww < w1; ++ww) {
                      const double* grow = gc + (static_cast<long>(h) * W + ww) * D;
                      const double* xrow =
                          xc + (static_cast<long>(h + kh) * W + (ww + kw)) * D + kd;
                      for (int d = d0; d < d1; ++d) acc += grow[d] * xrow[d];
                    }
                  wg[(kh + 1) * 9 + (kw + 1) * 3 + (kd + 1)] += acc;
                }
          }
        }
      }
    };
  }
  return out;
}

Tensor gated_scan(Tensor gate, Tensor update) {
  check_same_tape(gate, update);
  check_same_numel(gate, update, "gated_scan");
  require(gate.shape().size() == 2, ErrKind::ShapeMismatch, "gated_scan expects (N,d)");
  const long n = gate.shape()[0];
  const int d = gate.shape()[1];
  const bool rg = gate.node()->requires_grad || update.node()->requires_grad;
  Tensor out = gate.tape()->make(gate.shape(), rg);

  const double* g = gate.value().data();
  const double* u = update.value().data();
  double* h = out.node()->value.data();
  for (int j = 0; j < d; ++j) h[j] = (1.0 - g[j]) * u[j];
  for (long t = 1; t < n; ++t) {
    const double* gt = g + t * d;
    const double* ut = u + t * d;
    const double* hp = h + (t - 1) * d;
    double* ht = h + t * d;
    for (int j = 0; j < d; ++j) ht[j] = gt[j] * hp[j] + (1.0 - gt[j]) * ut[j];
  }

  if (rg) {
    Node* gn = gate.node();
    Node* un = update.node();
    Node* on = out.node();
    on->backprop = [gn, un, on, n, d]() {
      gn->ensure_grad();
      un->ensure_grad();
      std::vector<double> carry(d, 0.0);
      for (long t = n - 1; t >= 0; --t) {
        const double* gt = gn->value.data() + t * d;
        const double* ut = un->value.data() + t * d;
        const double* hp = t > 0 ? on->value.data() + (t - 1) * d : nullptr;
        const double* gout = on->grad.data() + t * d;
        for (int j = 0; j < d; ++j) {
          const double gh = carry[j] + gout[j];
          const double prev = hp ? hp[j] : 0.0;
          gn->grad[t * d + j] += gh * (prev - ut[j]);
          un->grad[t * d + j] += gh * (1.0 - gt[j]);
          carry[j] = gh * gt[j];
        }
      }
    };
  }
  return out;
}

Tensor soft_dice_loss(Tensor probs, const std::vector<std::int32_t>& labels, int num_classes,
                      double smoothing) {
  require(probs.shape().size() == 2 && probs.shape()[0] == num_classes, ErrKind::ShapeMismatch,
          "soft_dice_loss expects (C,N) probabilities");
  require(num_classes >= 2, ErrKind::InvalidArgument, "soft dice needs >= 2 classes");
  const long n = probs.shape()[1];
  require(static_cast<long>(labels.size()) == n, ErrKind::ShapeMismatch,
          "label count does not match voxel count");

  const int fg = num_classes - 1;
  std::vector<double> inter(num_classes, 0.0), psum(num_classes, 0.0), gsum(num_classes, 0.0);
  const double* p = probs.value().data();
  for (long v = 0; v < n; ++v) {
    const std::int32_t y = labels[v];
    for (int c = 1; c < num_classes; ++c) {
      const double pc = p[c * n + v];
      psum[c] += pc;
      if (y == c) {
        inter[c] += pc;
        gsum[c] += 1.0;
      }
    }
  }

  double dice_mean = 0.0;
  std::vector<double> num(num_classes, 0.0), den(num_classes, 0.0);
  for (int c = 1; c < num_classes; ++c) {
    num[c] = 2.0 * inter[c] + smoothing;
    den[c] = psum[c] + gsum[c] + smoothing;
    dice_mean += num[c] / den[c];
  }
  dice_mean /= static_cast<double>(fg);

  Tensor out = probs.tape()->make({1}, probs.node()->requires_grad);
  out.node()->value[0] = 1.0 - dice_mean;

  if (out.node()->requires_grad) {
    Node* pn = probs.node();
    Node* on = out.node();
    std::vector<std::int32_t> owned(labels);
    on->backprop = [pn, on, owned = std::move(owned), num, den, n, num_classes, fg]() {
      pn->ensure_grad();
      const double gscale = on->grad[0] / static_cast<double>(fg);
      for (int c = 1; c < num_classes; ++c) {
        const double d2 = den[c] * den[c];
        for (long v = 0; v < n; ++v) {
          const double gc = owned[v] == c ? 1.0 : 0.0;
          // d(dice_c)/dp_c(v) = (2*g - num/den) / den
          pn->grad[c * n + v] -= gscale * (2.0 * gc * den[c] - num[c]) / d2;
        }
      }
    };
  }
  return out;
}

}  // namespace volrob::ad
