#include "holofuse/nn/graph.hpp"

#include <cmath>

#include "holofuse/errors.hpp"

namespace holofuse::nn {

const Tensor& Var::value() const { return graph->value(id); }
bool Var::requires_grad() const { return graph->requires_grad(id); }

Var Graph::constant(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(ParamStore& store, const std::string& name) {
  Param& p = store.at(name);
  Node& n = nodes_.emplace_back();
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.graph != this) throw StateError("graph: input recorded on a different graph");
    needs = needs || nodes_.at(v.id).requires_grad;
  }
  if (!value.all_finite()) throw NumericError("graph: op produced non-finite values");
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var{this, nodes_.size() - 1};
}

Tensor& Graph::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (backward_done_) throw StateError("backward called twice without a new forward pass");
  if (loss.graph != this) throw StateError("backward: loss belongs to another graph");
  if (value(loss.id).size() != 1) throw ShapeError("backward: loss must be a scalar");
  backward_done_ = true;
  grad(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      n.param->touched = true;
    }
  }
}

// ---- ops ------------------------------------------------------------------

namespace {

void expect_rank(const Var& v, std::size_t rank, const char* op) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(v.shape()));
  }
}

}  // namespace

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

inline void axpy(double* __restrict y, const double* __restrict x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Four partial sums so the reduction vectorizes without reassociation flags.
inline double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void conv_backward(Graph& g, const Var& x, const Var& w, const Tensor& gout, std::size_t dilation) {
  const std::size_t batch = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  const std::size_t cout = w.shape()[0], ksize = w.shape()[2];
  const double* xd = x.value().data().data();
  const double* wd = w.value().data().data();
  const double* god = gout.data().data();
  double* gxd = x.requires_grad() ? g.grad(x.id).data().data() : nullptr;
  double* gwd = w.requires_grad() ? g.grad(w.id).data().data() : nullptr;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < cout; ++o) {
      const double* grow = god + (n * cout + o) * len;
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xrow = xd + (n * cin + c) * len;
        const double* wrow = wd + (o * cin + c) * ksize;
        double* gxrow = gxd ? gxd + (n * cin + c) * len : nullptr;
        double* gwrow = gwd ? gwd + (o * cin + c) * ksize : nullptr;
        for (std::size_t k = 0; k < ksize; ++k) {
          const std::size_t shift = k * dilation;
          if (shift >= len) break;
          if (gwrow) gwrow[k] += dot(grow + shift, xrow, len - shift);
          if (gxrow) axpy(gxrow, grow + shift, wrow[k], len - shift);
        }
      }
    }
  }
}

}  // namespace

Var conv1d_causal(Var x, Var w, std::optional<Var> bias, std::size_t dilation) {
  expect_rank(x, 3, "conv1d_causal");
  expect_rank(w, 3, "conv1d_causal");
  if (dilation == 0) throw ShapeError("conv1d_causal: dilation must be positive");
  const std::size_t batch = x.shape()[0];
  const std::size_t cin = x.shape()[1];
  const std::size_t len = x.shape()[2];
  const std::size_t cout = w.shape()[0];
  const std::size_t ksize = w.shape()[2];
  if (w.shape()[1] != cin || ksize == 0) {
    throw ShapeError("conv1d_causal: weights " + shape_string(w.shape()) + " incompatible with input " +
                     shape_string(x.shape()));
  }
  if (bias && (bias->value().rank() != 1 || bias->shape()[0] != cout)) {
    throw ShapeError("conv1d_causal: bias must have shape [" + std::to_string(cout) + "]");
  }

  Tensor out({batch, cout, len});
  const double* xd = x.value().data().data();
  const double* wd = w.value().data().data();
  const double* bd = bias ? bias->value().data().data() : nullptr;
  double* od = out.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < cout; ++o) {
      double* orow = od + (n * cout + o) * len;
      if (bd) {
        for (std::size_t t = 0; t < len; ++t) orow[t] = bd[o];
      }
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xrow = xd + (n * cin + c) * len;
        const double* wrow = wd + (o * cin + c) * ksize;
        for (std::size_t k = 0; k < ksize; ++k) {
          const std::size_t shift = k * dilation;
          if (shift >= len) break;
          axpy(orow + shift, xrow, wrow[k], len - shift);
        }
      }
    }
  }

  Graph& g = *x.graph;
  if (!bias) {
    return g.record(std::move(out), {x, w}, [x, w, dilation](Graph& g, const Tensor& gout) {
      conv_backward(g, x, w, gout, dilation);
    });
  }
  return g.record(std::move(out), {x, w, *bias}, [x, w, b = *bias, dilation](Graph& g, const Tensor& gout) {
    conv_backward(g, x, w, gout, dilation);
    if (!b.requires_grad()) return;
    const std::size_t batch = gout.dim(0), cout = gout.dim(1), len = gout.dim(2);
    Tensor& gb = g.grad(b.id);
    const double* god = gout.data().data();
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t o = 0; o < cout; ++o) {
        const double* grow = god + (n * cout + o) * len;
        double s = 0.0;
        for (std::size_t t = 0; t < len; ++t) s += grow[t];
        gb[o] += s;
      }
    }
  });
}

Var leaky_relu(Var x, double slope) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  return x.graph->record(std::move(out), {x}, [x, slope](Graph& g, const Tensor& gout) {
    const Tensor& xv = x.value();
    Tensor& gx = g.grad(x.id);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += xv[i] > 0.0 ? gout[i] : slope * gout[i];
  });
}

Var downsample2(Var x) {
  expect_rank(x, 3, "downsample2");
  const std::size_t rows = x.shape()[0] * x.shape()[1];
  const std::size_t len = x.shape()[2];
  const std::size_t half = (len + 1) / 2;
  Tensor out({x.shape()[0], x.shape()[1], half});
  const Tensor& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < half; ++t) out[r * half + t] = xv[r * len + 2 * t];
  return x.graph->record(std::move(out), {x}, [x, rows, len, half](Graph& g, const Tensor& gout) {
    Tensor& gx = g.grad(x.id);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t t = 0; t < half; ++t) gx[r * len + 2 * t] += gout[r * half + t];
  });
}

Var mean_last(Var x) {
  expect_rank(x, 3, "mean_last");
  const std::size_t rows = x.shape()[0] * x.shape()[1];
  const std::size_t len = x.shape()[2];
  Tensor out({x.shape()[0], x.shape()[1]});
  const Tensor& xv = x.value();
  const double inv = 1.0 / static_cast<double>(len);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += xv[r * len + t];
    out[r] = s * inv;
  }
  return x.graph->record(std::move(out), {x}, [x, rows, len, inv](Graph& g, const Tensor& gout) {
    Tensor& gx = g.grad(x.id);
    for (std::size_t r = 0; r < rows; ++r) {
      const double v = gout[r] * inv;
      for (std::size_t t = 0; t < len; ++t) gx[r * len + t] += v;
    }
  });
}

Var last_step(Var x) {
  expect_rank(x, 3, "last_step");
  const std::size_t rows = x.shape()[0] * x.shape()[1];
  const std::size_t len = x.shape()[2];
  Tensor out({x.shape()[0], x.shape()[1]});
  const Tensor& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) out[r] = xv[r * len + len - 1];
  return x.graph->record(std::move(out), {x}, [x, rows, len](Graph& g, const Tensor& gout) {
    Tensor& gx = g.grad(x.id);
    for (std::size_t r = 0; r < rows; ++r) gx[r * len + len - 1] += gout[r];
  });
}

Var linear(Var x, Var w, std::optional<Var> bias) {
  expect_rank(x, 2, "linear");
  expect_rank(w, 2, "linear");
  const std::size_t batch = x.shape()[0];
  const std::size_t in = x.shape()[1];
  const std::size_t out_dim = w.shape()[0];
  if (w.shape()[1] != in) {
    throw ShapeError("linear: weights " + shape_string(w.shape()) + " incompatible with input " +
                     shape_string(x.shape()));
  }
  if (bias && (bias->value().rank() != 1 || bias->shape()[0] != out_dim)) {
    throw ShapeError("linear: bias must have shape [" + std::to_string(out_dim) + "]");
  }
  Tensor out({batch, out_dim});
  const double* xd = x.value().data().data();
  const double* wd = w.value().data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      double s = bias ? bias->value()[o] : 0.0;
      const double* wrow = wd + o * in;
      const double* xrow = xd + n * in;
      for (std::size_t i = 0; i < in; ++i) s += wrow[i] * xrow[i];
      out[n * out_dim + o] = s;
    }
  }
  auto backward = [x, w, bias, batch, in, out_dim](Graph& g, const Tensor& gout) {
    const double* xd = x.value().data().data();
    const double* wd = w.value().data().data();
    if (x.requires_grad()) {
      Tensor& gx = g.grad(x.id);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double go = gout[n * out_dim + o];
          if (go == 0.0) continue;
          const double* wrow = wd + o * in;
          for (std::size_t i = 0; i < in; ++i) gx[n * in + i] += go * wrow[i];
        }
    }
    if (w.requires_grad()) {
      Tensor& gw = g.grad(w.id);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double go = gout[n * out_dim + o];
          if (go == 0.0) continue;
          const double* xrow = xd + n * in;
          for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += go * xrow[i];
        }
    }
    if (bias && bias->requires_grad()) {
      Tensor& gb = g.grad(bias->id);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < out_dim; ++o) gb[o] += gout[n * out_dim + o];
    }
  };
  if (bias) return x.graph->record(std::move(out), {x, w, *bias}, backward);
  return x.graph->record(std::move(out), {x, w}, backward);
}

Var add(Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& gout) {
    if (a.requires_grad()) {
      Tensor& ga = g.grad(a.id);
      for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = g.grad(b.id);
      for (std::size_t i = 0; i < gout.size(); ++i) gb[i] += gout[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x.value()[i];
  return x.graph->record(std::move(out), {x}, [x, factor](Graph& g, const Tensor& gout) {
    Tensor& gx = g.grad(x.id);
    for (std::size_t i = 0; i < gout.size(); ++i) gx[i] += factor * gout[i];
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value();
  out.reshape(std::move(shape));
  return x.graph->record(std::move(out), {x}, [x](Graph& g, const Tensor& gout) {
    Tensor& gx = g.grad(x.id);
    for (std::size_t i = 0; i < gout.size(); ++i) gx[i] += gout[i];
  });
}

Var sum_squares(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v * v;
  return x.graph->record(Tensor({1}, {s}), {x}, [x](Graph& g, const Tensor& gout) {
    Tensor& gx = g.grad(x.id);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += 2.0 * xv[i] * gout[0];
  });
}

Var weighted_bce_with_logits(Var logits, std::vector<double> labels, std::vector<double> weights) {
  const std::size_t n = logits.value().size();
  if (labels.size() != n || weights.size() != n || n == 0) {
    throw ShapeError("weighted_bce_with_logits: " + std::to_string(n) + " logits, " +
                     std::to_string(labels.size()) + " labels, " + std::to_string(weights.size()) +
                     " weights");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.value()[i];
    // softplus(z) - y z, written to stay finite for large |z|.
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    total += weights[i] * (softplus - labels[i] * z);
  }
  const double inv = 1.0 / static_cast<double>(n);
  return logits.graph->record(
      Tensor({1}, {total * inv}), {logits},
      [logits, labels = std::move(labels), weights = std::move(weights), inv](Graph& g, const Tensor& gout) {
        Tensor& gz = g.grad(logits.id);
        for (std::size_t i = 0; i < labels.size(); ++i) {
          gz[i] += gout[0] * inv * weights[i] * (sigmoid(logits.value()[i]) - labels[i]);
        }
      });
}

}  // namespace holofuse::nn
