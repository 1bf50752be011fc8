#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vdnet/tensor.hpp"

namespace vdnet {

namespace {

enum class Broadcast { kSame, kRightRepeats, kLeftRepeats };

bool is_suffix(const Shape& shorter, const Shape& longer) {
  if (shorter.size() > longer.size()) return false;
  return std::equal(shorter.rbegin(), shorter.rend(), longer.rbegin());
}

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (is_suffix(b.shape(), a.shape())) return Broadcast::kRightRepeats;
  if (is_suffix(a.shape(), b.shape())) return Broadcast::kLeftRepeats;
  throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                   shape_to_string(b.shape()) + " are not broadcastable");
}

// Elementwise binary op over the broadcast result; the shorter operand is
// indexed modulo its length.
template <typename Forward, typename GradA, typename GradB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Forward f, GradA da, GradB db) {
  Broadcast kind = broadcast_kind(op, a, b);
  const Shape& out_shape = kind == Broadcast::kLeftRepeats ? b.shape() : a.shape();
  const std::size_t n = shape_numel(out_shape);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i % na], bv[i % nb]);
  return make_result(out_shape, std::move(out), {a, b}, op,
                     [a, b, n, na, nb, da, db](std::span<const double> g, std::span<double* const> gi) {
                       auto av = a.data();
                       auto bv = b.data();
                       if (gi[0]) {
                         for (std::size_t i = 0; i < n; ++i) gi[0][i % na] += g[i] * da(av[i % na], bv[i % nb]);
                       }
                       if (gi[1]) {
                         for (std::size_t i = 0; i < n; ++i) gi[1][i % nb] += g[i] * db(av[i % na], bv[i % nb]);
                       }
                     });
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), {x}, "scale",
                     [factor](std::span<const double> g, std::span<double* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += factor * g[i];
                     });
}

namespace {

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, kh, kw, stride, padding, out_h, out_w;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, std::size_t stride,
                           std::size_t padding) {
  require_rank("conv2d input", input, 3);
  require_rank("conv2d kernel", kernel, 4);
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), kernel.dim(0), kernel.dim(2),
                 kernel.dim(3), stride, padding, 0, 0};
  if (kernel.dim(1) != g.c_in) {
    throw ShapeError("conv2d: kernel " + shape_to_string(kernel.shape()) + " expects " +
                     std::to_string(kernel.dim(1)) + " input channels, input " +
                     shape_to_string(input.shape()) + " has " + std::to_string(g.c_in));
  }
  const std::size_t ph = g.h + 2 * padding;
  const std::size_t pw = g.w + 2 * padding;
  if (stride == 0 || g.kh > ph || g.kw > pw || (ph - g.kh) % stride != 0 ||
      (pw - g.kw) % stride != 0) {
    throw GeometryError("conv2d: incompatible geometry: input " + std::to_string(g.h) + "x" +
                        std::to_string(g.w) + ", kernel " + std::to_string(g.kh) + "x" +
                        std::to_string(g.kw) + ", stride " + std::to_string(stride) +
                        ", padding " + std::to_string(padding));
  }
  g.out_h = (ph - g.kh) / stride + 1;
  g.out_w = (pw - g.kw) / stride + 1;
  return g;
}

// Column matrix [c_in*kh*kw, out_h*out_w]; padded taps are zero.
std::vector<double> im2col(std::span<const double> x, const ConvGeometry& g) {
  const std::size_t positions = g.out_h * g.out_w;
  std::vector<double> cols(g.c_in * g.kh * g.kw * positions, 0.0);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj, ++row) {
        double* dst = cols.data() + row * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          const double* src = x.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            dst[oy * g.out_w + ox] = src[ix];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(std::span<const double> cols, const ConvGeometry& g, double* dx) {
  const std::size_t positions = g.out_h * g.out_w;
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj, ++row) {
        const double* src = cols.data() + row * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          double* dst = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            dst[ix] += src[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

Tensor conv2d_impl(const Tensor& input, const Tensor& kernel, const Tensor* bias,
                   std::size_t stride, std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, kernel, stride, padding);
  if (bias && bias->shape() != Shape{g.c_out}) {
    throw ShapeError("conv2d: bias " + shape_to_string(bias->shape()) + " does not match " +
                     std::to_string(g.c_out) + " output channels");
  }
  const std::size_t positions = g.out_h * g.out_w;
  const std::size_t taps = g.c_in * g.kh * g.kw;
  auto cols = std::make_shared<std::vector<double>>(im2col(input.data(), g));
  auto w = kernel.data();
  std::vector<double> out(g.c_out * positions, 0.0);
  for (std::size_t co = 0; co < g.c_out; ++co) {
    double* dst = out.data() + co * positions;
    if (bias) std::fill(dst, dst + positions, (*bias)[co]);
    for (std::size_t t = 0; t < taps; ++t) {
      const double wv = w[co * taps + t];
      if (wv == 0.0) continue;
      const double* src = cols->data() + t * positions;
      for (std::size_t p = 0; p < positions; ++p) dst[p] += wv * src[p];
    }
  }
  std::vector<Tensor> inputs{input, kernel};
  if (bias) inputs.push_back(*bias);
  return make_result(
      {g.c_out, g.out_h, g.out_w}, std::move(out), std::move(inputs), "conv2d",
      [g, cols, kernel, positions, taps](std::span<const double> grad, std::span<double* const> gi) {
        if (gi[1]) {
          for (std::size_t co = 0; co < g.c_out; ++co) {
            const double* gr = grad.data() + co * positions;
            for (std::size_t t = 0; t < taps; ++t) {
              const double* src = cols->data() + t * positions;
              double acc = 0.0;
              for (std::size_t p = 0; p < positions; ++p) acc += gr[p] * src[p];
              gi[1][co * taps + t] += acc;
            }
          }
        }
        if (gi.size() > 2 && gi[2]) {
          for (std::size_t co = 0; co < g.c_out; ++co) {
            const double* gr = grad.data() + co * positions;
            double acc = 0.0;
            for (std::size_t p = 0; p < positions; ++p) acc += gr[p];
            gi[2][co] += acc;
          }
        }
        if (gi[0]) {
          auto w = kernel.data();
          std::vector<double> dcols(taps * positions, 0.0);
          for (std::size_t co = 0; co < g.c_out; ++co) {
            const double* gr = grad.data() + co * positions;
            for (std::size_t t = 0; t < taps; ++t) {
              const double wv = w[co * taps + t];
              if (wv == 0.0) continue;
              double* dst = dcols.data() + t * positions;
              for (std::size_t p = 0; p < positions; ++p) dst[p] += wv * gr[p];
            }
          }
          col2im_add(dcols, g, gi[0]);
        }
      });
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  return conv2d_impl(input, kernel, nullptr, stride, padding);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  return conv2d_impl(input, kernel, &bias, stride, padding);
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(x.shape(), std::move(out), {x}, "relu",
                     [x](std::span<const double> g, std::span<double* const> gi) {
                       auto xv = x.data();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (xv[i] > 0.0) gi[0][i] += g[i];
                       }
                     });
}

Tensor maxpool2d(const Tensor& x, std::size_t window, std::size_t stride) {
  require_rank("maxpool2d", x, 3);
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (window == 0 || stride == 0 || window > h || window > w || (h - window) % stride != 0 ||
      (w - window) % stride != 0) {
    throw GeometryError("maxpool2d: window " + std::to_string(window) + ", stride " +
                        std::to_string(stride) + " do not tile input " + std::to_string(h) + "x" +
                        std::to_string(w));
  }
  const std::size_t oh = (h - window) / stride + 1;
  const std::size_t ow = (w - window) / stride + 1;
  auto xv = x.data();
  std::vector<double> out(c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (ch * h + oy * stride) * w + ox * stride;
        // Row-major scan with strict comparison keeps the lowest index on ties.
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = (ch * h + oy * stride + dy) * w + ox * stride + dx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (ch * oh + oy) * ow + ox;
        out[o] = xv[best];
        (*argmax)[o] = best;
      }
    }
  }
  return make_result({c, oh, ow}, std::move(out), {x}, "maxpool2d",
                     [argmax](std::span<const double> g, std::span<double* const> gi) {
                       for (std::size_t o = 0; o < g.size(); ++o) gi[0][(*argmax)[o]] += g[o];
                     });
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  require_rank("dense input", x, 1);
  require_rank("dense weights", weights, 2);
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  if (x.dim(0) != n || bias.shape() != Shape{m}) {
    throw ShapeError("dense: weights " + shape_to_string(weights.shape()) + ", input " +
                     shape_to_string(x.shape()) + ", bias " + shape_to_string(bias.shape()) +
                     " do not agree");
  }
  auto xv = x.data();
  auto wv = weights.data();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = bias[i];
    for (std::size_t j = 0; j < n; ++j) acc += wv[i * n + j] * xv[j];
    out[i] = acc;
  }
  return make_result({m}, std::move(out), {x, weights, bias}, "dense",
                     [x, weights, m, n](std::span<const double> g, std::span<double* const> gi) {
                       auto xv = x.data();
                       auto wv = weights.data();
                       for (std::size_t i = 0; i < m; ++i) {
                         if (gi[0]) {
                           for (std::size_t j = 0; j < n; ++j) gi[0][j] += g[i] * wv[i * n + j];
                         }
                         if (gi[1]) {
                           for (std::size_t j = 0; j < n; ++j) gi[1][i * n + j] += g[i] * xv[j];
                         }
                         if (gi[2]) gi[2][i] += g[i];
                       }
                     });
}

std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  require_rank("softmax_cross_entropy", logits, 1);
  const std::size_t k = logits.dim(0);
  if (label >= k) {
    throw ValueError("softmax_cross_entropy: label " + std::to_string(label) +
                     " out of range for " + std::to_string(k) + " classes");
  }
  auto z = logits.data();
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - peak);
  const double loss = std::log(total) - (z[label] - peak);
  return make_result({1}, {loss}, {logits}, "softmax_cross_entropy",
                     [logits, label](std::span<const double> g, std::span<double* const> gi) {
                       const std::vector<double> p = softmax(logits.data());
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         gi[0][i] += g[0] * (p[i] - (i == label ? 1.0 : 0.0));
                       }
                     });
}

Tensor softmax_cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels) {
  require_rank("softmax_cross_entropy_rows", logits, 2);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy_rows: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  auto z = logits.data();
  std::vector<double> probs(n * k);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] >= k) {
      throw ValueError("softmax_cross_entropy_rows: label " + std::to_string(labels[r]) + " out of range for " +
                       std::to_string(k) + " classes");
    }
    const std::vector<double> p = softmax(z.subspan(r * k, k));
    std::copy(p.begin(), p.end(), probs.begin() + static_cast<std::ptrdiff_t>(r * k));
    const auto row = z.subspan(r * k, k);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - peak);
    loss += std::log(total) - (row[labels[r]] - peak);
  }
  std::vector<std::size_t> targets(labels.begin(), labels.end());
  return make_result({1}, {loss}, {logits}, "softmax_cross_entropy_rows",
                     [probs = std::move(probs), targets = std::move(targets), k](std::span<const double> g,
                                                                                 std::span<double* const> gi) {
                       for (std::size_t i = 0; i < probs.size(); ++i) {
                         const double hot = (i % k) == targets[i / k] ? 1.0 : 0.0;
                         gi[0][i] += g[0] * (probs[i] - hot);
                       }
                     });
}

Tensor sum_all(const Tensor& x) {
  // Sum each leading-axis slice, then the slice totals. Fixing this order
  // makes sum_all(x) bit-identical to summing channel_sum(x).
  auto xv = x.data();
  const std::size_t n = x.numel();
  const std::size_t slices = x.rank() >= 2 ? x.dim(0) : 1;
  const std::size_t slice = slices == 0 ? 0 : n / slices;
  double total = 0.0;
  for (std::size_t k = 0; k < slices; ++k) {
    double part = 0.0;
    for (std::size_t p = 0; p < slice; ++p) part += xv[k * slice + p];
    total += part;
  }
  return make_result({1}, {total}, {x}, "sum_all",
                     [n](std::span<const double> g, std::span<double* const> gi) {
                       for (std::size_t i = 0; i < n; ++i) gi[0][i] += g[0];
                     });
}

Tensor channel_sum(const Tensor& x) {
  require_rank("channel_sum", x, 3);
  const std::size_t c = x.dim(0);
  const std::size_t plane = x.dim(1) * x.dim(2);
  auto xv = x.data();
  std::vector<double> out(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t p = 0; p < plane; ++p) out[k] += xv[k * plane + p];
  }
  return make_result({c}, std::move(out), {x}, "channel_sum",
                     [c, plane](std::span<const double> g, std::span<double* const> gi) {
                       for (std::size_t k = 0; k < c; ++k) {
                         for (std::size_t p = 0; p < plane; ++p) gi[0][k * plane + p] += g[k];
                       }
                     });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  return make_result(shape, x.to_vector(), {x}, "reshape",
                     [](std::span<const double> g, std::span<double* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                     });
}

Tensor gather(const Tensor& x, std::span<const std::size_t> indices, const Shape& shape) {
  if (shape_numel(shape) != indices.size()) {
    throw ShapeError("gather: " + std::to_string(indices.size()) + " indices cannot fill " +
                     shape_to_string(shape));
  }
  auto xv = x.data();
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= xv.size()) {
      throw ShapeError("gather: index " + std::to_string(indices[i]) + " out of range for " +
                       shape_to_string(x.shape()));
    }
    out[i] = xv[indices[i]];
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(indices.begin(), indices.end());
  return make_result(shape, std::move(out), {x}, "gather",
                     [idx](std::span<const double> g, std::span<double* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][(*idx)[i]] += g[i];
                     });
}

Tensor smooth_l1(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v = std::abs(v) < 1.0 ? 0.5 * v * v : std::abs(v) - 0.5;
  return make_result(x.shape(), std::move(out), {x}, "smooth_l1",
                     [x](std::span<const double> g, std::span<double* const> gi) {
                       auto xv = x.data();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double v = xv[i];
                         const double d = std::abs(v) < 1.0 ? v : (v > 0.0 ? 1.0 : -1.0);
                         gi[0][i] += g[i] * d;
                       }
                     });
}

}  // namespace vdnet
