#include "mmgesture/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "mmgesture/errors.hpp"

namespace mmgesture::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::Upsample2x: return "upsample2x";
    case LayerKind::MaxPool2x2: return "maxpool2x2";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::BatchChannelScale: return "batch_channel_scale";
    case LayerKind::Concat: return "concat";
    case LayerKind::Dense: return "dense";
    case LayerKind::GlobalAvgPool: return "global_avg_pool";
    case LayerKind::ChannelGate: return "channel_gate";
  }
  return "unknown";
}

std::size_t conv_output_extent(std::size_t n, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (n + 2 * padding < kernel) return 0;
  return (n + 2 * padding - kernel) / stride + 1;
}

LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                          std::size_t groups) {
  LayerSpec s;
  s.kind = LayerKind::Conv2D;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = kernel / 2;
  s.groups = groups;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.in_features = in;
  s.out_features = out;
  return s;
}

LayerSpec LayerSpec::batch_channel_scale(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::BatchChannelScale;
  s.in_channels = channels;
  s.out_channels = channels;
  return s;
}

LayerSpec LayerSpec::of(LayerKind kind) {
  LayerSpec s;
  s.kind = kind;
  return s;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::Conv2D:
      if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 || groups == 0) {
        throw InvalidArgument("conv2d: channels, kernel, stride and groups must be positive");
      }
      if (in_channels % groups != 0 || out_channels % groups != 0) {
        throw InvalidArgument("conv2d: channels must be divisible by groups");
      }
      break;
    case LayerKind::Dense:
      if (in_features == 0 || out_features == 0) throw InvalidArgument("dense: zero features");
      break;
    case LayerKind::BatchChannelScale:
      if (in_channels == 0) throw InvalidArgument("batch_channel_scale: zero channels");
      if (!(momentum >= 0.0 && momentum <= 1.0) || !(epsilon > 0.0)) {
        throw InvalidArgument("batch_channel_scale: bad momentum or epsilon");
      }
      break;
    default:
      break;
  }
}

namespace {

[[noreturn]] void shape_fail(LayerKind kind, const std::string& what) {
  throw ShapeError(std::string(to_string(kind)) + ": " + what);
}

void require_rank3(LayerKind kind, const Shape& s) {
  if (s.size() != 3) shape_fail(kind, "expected [C,H,W] input, got " + shape_string(s));
}

// Full MBxNB tile: y[i][j] += sum_k ap[k*MB + i] * b[k*ldb + j].
template <typename T>
void gemm_tile(std::size_t K, const T* __restrict ap, const T* __restrict b, std::size_t ldb,
               T* __restrict y, std::size_t ldy) {
  constexpr std::size_t MB = 2, NB = 16;
  T acc[MB][NB];
  for (std::size_t i = 0; i < MB; ++i)
    for (std::size_t j = 0; j < NB; ++j) acc[i][j] = y[i * ldy + j];
  for (std::size_t k = 0; k < K; ++k) {
    const T* br = b + k * ldb;
    for (std::size_t i = 0; i < MB; ++i) {
      const T av = ap[k * MB + i];
      for (std::size_t j = 0; j < NB; ++j) acc[i][j] += av * br[j];
    }
  }
  for (std::size_t i = 0; i < MB; ++i)
    for (std::size_t j = 0; j < NB; ++j) y[i * ldy + j] = acc[i][j];
}

// y[m][n] += sum_k a[m*a_m + k*a_k] * b[k][n], with b and y row-major (n fastest).
// Rows of a are packed MB at a time; each output sums k in ascending order.
template <typename T>
void gemm_accumulate(std::size_t M, std::size_t N, std::size_t K, const T* a, std::size_t a_m,
                     std::size_t a_k, const T* b, T* y) {
  constexpr std::size_t MB = 2, NB = 16;
  std::vector<T> packed(K * MB);
  for (std::size_t m0 = 0; m0 < M; m0 += MB) {
    const std::size_t mb = std::min(MB, M - m0);
    if (mb == MB) {
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < MB; ++i) packed[k * MB + i] = a[(m0 + i) * a_m + k * a_k];
    }
    for (std::size_t n0 = 0; n0 < N; n0 += NB) {
      const std::size_t nb = std::min(NB, N - n0);
      if (mb == MB && nb == NB) {
        gemm_tile(K, packed.data(), b + n0, N, y + m0 * N + n0, N);
        continue;
      }
      for (std::size_t i = 0; i < mb; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
          T acc = y[(m0 + i) * N + n0 + j];
          for (std::size_t k = 0; k < K; ++k) acc += a[(m0 + i) * a_m + k * a_k] * b[k * N + n0 + j];
          y[(m0 + i) * N + n0 + j] = acc;
        }
      }
    }
  }
}

// g[m][k] += sum_n p[m][n] * q[k][n]. Eight partial sums per dot keep the
// reduction vectorizable without reassociating floating point.
template <typename T>
void gemm_dot_accumulate(std::size_t M, std::size_t K, std::size_t N, const T* p, const T* q, T* g) {
  constexpr std::size_t L = 8;
  const std::size_t n_main = N - N % L;
  for (std::size_t m = 0; m < M; ++m) {
    const T* pr = p + m * N;
    for (std::size_t k = 0; k < K; ++k) {
      const T* qr = q + k * N;
      T lane[L] = {};
      for (std::size_t n = 0; n < n_main; n += L)
        for (std::size_t j = 0; j < L; ++j) lane[j] += pr[n + j] * qr[n + j];
      T acc{};
      for (std::size_t j = 0; j < L; ++j) acc += lane[j];
      for (std::size_t n = n_main; n < N; ++n) acc += pr[n] * qr[n];
      g[m * K + k] += acc;
    }
  }
}

template <typename T>
class Conv2D final : public Layer<T> {
 public:
  explicit Conv2D(LayerSpec spec) : s_(spec) {}
  LayerKind kind() const override { return LayerKind::Conv2D; }

  std::vector<ParamSpec> parameters() const override {
    const std::size_t cin_g = s_.in_channels / s_.groups;
    return {
        {"weight", {s_.out_channels, cin_g, s_.kernel, s_.kernel}, Init::HeUniform,
         cin_g * s_.kernel * s_.kernel, true},
        {"bias", {s_.out_channels}, Init::Zeros, 0, true},
    };
  }

  Shape output_shape(std::span<const Shape> in) const override {
    require_rank3(kind(), in[0]);
    if (in[0][0] != s_.in_channels) {
      shape_fail(kind(), "expected " + std::to_string(s_.in_channels) + " input channels, got " +
                             shape_string(in[0]));
    }
    const auto ho = conv_output_extent(in[0][1], s_.kernel, s_.stride, s_.padding);
    const auto wo = conv_output_extent(in[0][2], s_.kernel, s_.stride, s_.padding);
    if (ho == 0 || wo == 0) shape_fail(kind(), "input " + shape_string(in[0]) + " smaller than kernel");
    return {s_.out_channels, ho, wo};
  }

  void forward(const ForwardArgs<T>& a) override {
    const Tensor<T>& x = *a.inputs[0];
    const T* w = a.params[0]->values.data();
    const T* b = a.params[1]->values.data();
    Geometry g(s_, x.shape, a.output.shape);
    T* y = a.output.values.data();
    if (s_.groups == 1) {
      // Lowered to a matrix product over the unfolded input.
      im2col(x.values.data(), g);
      const std::size_t rows = g.cin_g * s_.kernel * s_.kernel;
      for (std::size_t oc = 0; oc < s_.out_channels; ++oc) {
        std::fill(y + oc * g.plane_out, y + (oc + 1) * g.plane_out, b[oc]);
      }
      gemm_accumulate<T>(s_.out_channels, g.plane_out, rows, w, rows, 1, col_.data(), y);
      return;
    }
    for (std::size_t oc = 0; oc < s_.out_channels; ++oc) {
      T* yc = y + oc * g.plane_out;
      std::fill(yc, yc + g.plane_out, b[oc]);
      const std::size_t group = oc / g.cout_g;
      for (std::size_t icl = 0; icl < g.cin_g; ++icl) {
        const T* xc = x.values.data() + (group * g.cin_g + icl) * g.plane_in;
        const T* wk = w + (oc * g.cin_g + icl) * s_.kernel * s_.kernel;
        for (std::size_t ky = 0; ky < s_.kernel; ++ky) {
          for (std::size_t kx = 0; kx < s_.kernel; ++kx) {
            const T wv = wk[ky * s_.kernel + kx];
            g.for_each_row(ky, kx, [&](std::size_t oy, std::size_t iy, std::size_t lo, std::size_t hi,
                                       std::ptrdiff_t shift) {
              T* yr = yc + oy * g.w_out;
              const T* xr = xc + iy * g.w_in;
              if (s_.stride == 1) {
                const T* xs = xr + shift;
                for (std::size_t ox = lo; ox < hi; ++ox) yr[ox] += wv * xs[ox];
              } else {
                for (std::size_t ox = lo; ox < hi; ++ox) {
                  yr[ox] += wv * xr[static_cast<std::ptrdiff_t>(ox * s_.stride) + shift];
                }
              }
            });
          }
        }
      }
    }
  }

  void backward(const BackwardArgs<T>& a) override {
    const Tensor<T>& x = *a.inputs[0];
    Tensor<T>& weight = *a.params[0];
    Tensor<T>& bias = *a.params[1];
    Geometry g(s_, x.shape, a.output.shape);
    const T* gy = a.grad_output.values.data();
    T* gx = a.grad_inputs[0]->values.data();
    if (s_.groups == 1) {
      // col_ still holds the unfolded input from forward().
      const std::size_t rows = g.cin_g * s_.kernel * s_.kernel;
      for (std::size_t oc = 0; oc < s_.out_channels; ++oc) {
        const T* gyc = gy + oc * g.plane_out;
        T bsum{};
        for (std::size_t i = 0; i < g.plane_out; ++i) bsum += gyc[i];
        bias.grad[oc] += bsum;
      }
      // dW = dY * col^T, dcol = W^T * dY
      gemm_dot_accumulate<T>(s_.out_channels, rows, g.plane_out, gy, col_.data(), weight.grad.data());
      gcol_.assign(rows * g.plane_out, T{});
      gemm_accumulate<T>(rows, g.plane_out, s_.out_channels, weight.values.data(), 1, rows, gy,
                         gcol_.data());
      col2im(gx, g);
      return;
    }
    for (std::size_t oc = 0; oc < s_.out_channels; ++oc) {
      const T* gyc = gy + oc * g.plane_out;
      T bsum{};
      for (std::size_t i = 0; i < g.plane_out; ++i) bsum += gyc[i];
      bias.grad[oc] += bsum;
      const std::size_t group = oc / g.cout_g;
      for (std::size_t icl = 0; icl < g.cin_g; ++icl) {
        const std::size_t ic = group * g.cin_g + icl;
        const T* xc = x.values.data() + ic * g.plane_in;
        T* gxc = gx + ic * g.plane_in;
        const std::size_t wbase = (oc * g.cin_g + icl) * s_.kernel * s_.kernel;
        for (std::size_t ky = 0; ky < s_.kernel; ++ky) {
          for (std::size_t kx = 0; kx < s_.kernel; ++kx) {
            const T wv = weight.values[wbase + ky * s_.kernel + kx];
            T wgrad{};
            g.for_each_row(ky, kx, [&](std::size_t oy, std::size_t iy, std::size_t lo, std::size_t hi,
                                       std::ptrdiff_t shift) {
              const T* gyr = gyc + oy * g.w_out;
              const T* xr = xc + iy * g.w_in;
              T* gxr = gxc + iy * g.w_in;
              if (s_.stride == 1) {
                const T* xs = xr + shift;
                T* gxs = gxr + shift;
                T acc{};
                for (std::size_t ox = lo; ox < hi; ++ox) {
                  acc += gyr[ox] * xs[ox];
                  gxs[ox] += wv * gyr[ox];
                }
                wgrad += acc;
              } else {
                for (std::size_t ox = lo; ox < hi; ++ox) {
                  const auto ix = static_cast<std::ptrdiff_t>(ox * s_.stride) + shift;
                  wgrad += gyr[ox] * xr[ix];
                  gxr[ix] += wv * gyr[ox];
                }
              }
            });
            weight.grad[wbase + ky * s_.kernel + kx] += wgrad;
          }
        }
      }
    }
  }

 private:
  // Index bookkeeping shared by forward and backward.
  struct Geometry {
    Geometry(const LayerSpec& s, const Shape& in, const Shape& out)
        : spec(s),
          h_in(in[1]),
          w_in(in[2]),
          h_out(out[1]),
          w_out(out[2]),
          plane_in(h_in * w_in),
          plane_out(h_out * w_out),
          cin_g(s.in_channels / s.groups),
          cout_g(s.out_channels / s.groups) {}

    // Calls fn(oy, iy, ox_lo, ox_hi, shift) for every output row that reads a
    // valid input row at kernel offset (ky, kx); input column = ox*stride + shift.
    template <typename Fn>
    void for_each_row(std::size_t ky, std::size_t kx, Fn&& fn) const {
      const auto s = static_cast<std::ptrdiff_t>(spec.stride);
      const auto p = static_cast<std::ptrdiff_t>(spec.padding);
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - p;
      // ox*s + shift in [0, wi)
      std::ptrdiff_t lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
      std::ptrdiff_t hi_x = static_cast<std::ptrdiff_t>(w_in) - 1 - shift;
      if (hi_x < 0) return;
      std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w_out), hi_x / s + 1);
      if (lo >= hi) return;
      for (std::size_t oy = 0; oy < h_out; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s + static_cast<std::ptrdiff_t>(ky) - p;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h_in)) continue;
        fn(oy, static_cast<std::size_t>(iy), static_cast<std::size_t>(lo),
           static_cast<std::size_t>(hi), shift);
      }
    }

    const LayerSpec& spec;
    std::size_t h_in, w_in, h_out, w_out, plane_in, plane_out, cin_g, cout_g;
  };

  // col_[(ic*k + ky)*k + kx][oy*w_out + ox] = x[ic][oy*s + ky - p][ox*s + kx - p], zero outside.
  void im2col(const T* x, const Geometry& g) {
    const std::size_t k = s_.kernel;
    col_.assign(g.cin_g * k * k * g.plane_out, T{});
    for (std::size_t ic = 0; ic < g.cin_g; ++ic) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          T* cr = col_.data() + ((ic * k + ky) * k + kx) * g.plane_out;
          const T* xc = x + ic * g.plane_in;
          g.for_each_row(ky, kx, [&](std::size_t oy, std::size_t iy, std::size_t lo, std::size_t hi,
                                     std::ptrdiff_t shift) {
            T* dst = cr + oy * g.w_out;
            const T* xr = xc + iy * g.w_in;
            for (std::size_t ox = lo; ox < hi; ++ox) {
              dst[ox] = xr[static_cast<std::ptrdiff_t>(ox * s_.stride) + shift];
            }
          });
        }
      }
    }
  }

  void col2im(T* gx, const Geometry& g) const {
    const std::size_t k = s_.kernel;
    for (std::size_t ic = 0; ic < g.cin_g; ++ic) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const T* cr = gcol_.data() + ((ic * k + ky) * k + kx) * g.plane_out;
          T* gxc = gx + ic * g.plane_in;
          g.for_each_row(ky, kx, [&](std::size_t oy, std::size_t iy, std::size_t lo, std::size_t hi,
                                     std::ptrdiff_t shift) {
            const T* src = cr + oy * g.w_out;
            T* gxr = gxc + iy * g.w_in;
            for (std::size_t ox = lo; ox < hi; ++ox) {
              gxr[static_cast<std::ptrdiff_t>(ox * s_.stride) + shift] += src[ox];
            }
          });
        }
      }
    }
  }

  LayerSpec s_;
  std::vector<T> col_;
  std::vector<T> gcol_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  Shape output_shape(std::span<const Shape> in) const override { return in[0]; }
  void forward(const ForwardArgs<T>& a) override {
    const auto& x = a.inputs[0]->values;
    auto& y = a.output.values;
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{} ? x[i] : T{};
  }
  void backward(const BackwardArgs<T>& a) override {
    const auto& x = a.inputs[0]->values;
    const auto& gy = a.grad_output.values;
    auto& gx = a.grad_inputs[0]->values;
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += x[i] > T{} ? gy[i] : T{};
  }
};

template <typename T>
class Sigmoid final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Sigmoid; }
  Shape output_shape(std::span<const Shape> in) const override { return in[0]; }
  void forward(const ForwardArgs<T>& a) override {
    const auto& x = a.inputs[0]->values;
    auto& y = a.output.values;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] >= T{}) {
        y[i] = T{1} / (T{1} + std::exp(-x[i]));
      } else {
        const T e = std::exp(x[i]);
        y[i] = e / (T{1} + e);
      }
    }
  }
  void backward(const BackwardArgs<T>& a) override {
    const auto& y = a.output.values;
    const auto& gy = a.grad_output.values;
    auto& gx = a.grad_inputs[0]->values;
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += gy[i] * y[i] * (T{1} - y[i]);
  }
};

template <typename T>
class MaxPool2x2 final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::MaxPool2x2; }
  Shape output_shape(std::span<const Shape> in) const override {
    require_rank3(kind(), in[0]);
    if (in[0][1] < 2 || in[0][2] < 2) shape_fail(kind(), "input smaller than 2x2: " + shape_string(in[0]));
    return {in[0][0], in[0][1] / 2, in[0][2] / 2};
  }
  void forward(const ForwardArgs<T>& a) override {
    const Tensor<T>& x = *a.inputs[0];
    const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    const std::size_t ho = h / 2, wo = w / 2;
    argmax_.resize(a.output.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          std::size_t best = (ch * h + 2 * oy) * w + 2 * ox;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
              if (x.values[idx] > x.values[best]) best = idx;
            }
          }
          const std::size_t o = (ch * ho + oy) * wo + ox;
          argmax_[o] = best;
          a.output.values[o] = x.values[best];
        }
      }
    }
  }
  void backward(const BackwardArgs<T>& a) override {
    auto& gx = a.grad_inputs[0]->values;
    for (std::size_t o = 0; o < argmax_.size(); ++o) gx[argmax_[o]] += a.grad_output.values[o];
  }

 private:
  std::vector<std::size_t> argmax_;
};

template <typename T>
class Upsample2x final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Upsample2x; }
  Shape output_shape(std::span<const Shape> in) const override {
    require_rank3(kind(), in[0]);
    return {in[0][0], in[0][1] * 2, in[0][2] * 2};
  }
  void forward(const ForwardArgs<T>& a) override {
    const Tensor<T>& x = *a.inputs[0];
    const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    T* y = a.output.values.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t oy = 0; oy < 2 * h; ++oy) {
        const T* xr = x.values.data() + (ch * h + oy / 2) * w;
        T* yr = y + (ch * 2 * h + oy) * 2 * w;
        for (std::size_t ox = 0; ox < 2 * w; ++ox) yr[ox] = xr[ox / 2];
      }
    }
  }
  void backward(const BackwardArgs<T>& a) override {
    const Shape& s = a.inputs[0]->shape;
    const std::size_t c = s[0], h = s[1], w = s[2];
    const T* gy = a.grad_output.values.data();
    T* gx = a.grad_inputs[0]->values.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t oy = 0; oy < 2 * h; ++oy) {
        T* gxr = gx + (ch * h + oy / 2) * w;
        const T* gyr = gy + (ch * 2 * h + oy) * 2 * w;
        for (std::size_t ox = 0; ox < 2 * w; ++ox) gxr[ox / 2] += gyr[ox];
      }
    }
  }
};

template <typename T>
class Concat final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Concat; }
  std::size_t arity() const override { return 2; }
  Shape output_shape(std::span<const Shape> in) const override {
    require_rank3(kind(), in[0]);
    require_rank3(kind(), in[1]);
    if (in[0][1] != in[1][1] || in[0][2] != in[1][2]) {
      shape_fail(kind(), "spatial sizes differ: " + shape_string(in[0]) + " vs " + shape_string(in[1]));
    }
    return {in[0][0] + in[1][0], in[0][1], in[0][2]};
  }
  void forward(const ForwardArgs<T>& a) override {
    const auto& x0 = a.inputs[0]->values;
    const auto& x1 = a.inputs[1]->values;
    std::copy(x0.begin(), x0.end(), a.output.values.begin());
    std::copy(x1.begin(), x1.end(), a.output.values.begin() + static_cast<std::ptrdiff_t>(x0.size()));
  }
  void backward(const BackwardArgs<T>& a) override {
    const std::size_t n0 = a.inputs[0]->size();
    auto& g0 = a.grad_inputs[0]->values;
    auto& g1 = a.grad_inputs[1]->values;
    for (std::size_t i = 0; i < n0; ++i) g0[i] += a.grad_output.values[i];
    for (std::size_t i = 0; i < g1.size(); ++i) g1[i] += a.grad_output.values[n0 + i];
  }
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  explicit Dense(LayerSpec spec) : s_(spec) {}
  LayerKind kind() const override { return LayerKind::Dense; }
  std::vector<ParamSpec> parameters() const override {
    return {
        {"weight", {s_.out_features, s_.in_features}, Init::HeUniform, s_.in_features, true},
        {"bias", {s_.out_features}, Init::Zeros, 0, true},
    };
  }
  Shape output_shape(std::span<const Shape> in) const override {
    if (shape_size(in[0]) != s_.in_features) {
      shape_fail(kind(), "expected " + std::to_string(s_.in_features) + " features, got " +
                             shape_string(in[0]));
    }
    return {s_.out_features};
  }
  void forward(const ForwardArgs<T>& a) override {
    const auto& x = a.inputs[0]->values;
    const auto& w = a.params[0]->values;
    const auto& b = a.params[1]->values;
    for (std::size_t o = 0; o < s_.out_features; ++o) {
      T acc = b[o];
      const T* wr = w.data() + o * s_.in_features;
      for (std::size_t i = 0; i < s_.in_features; ++i) acc += wr[i] * x[i];
      a.output.values[o] = acc;
    }
  }
  void backward(const BackwardArgs<T>& a) override {
    const auto& x = a.inputs[0]->values;
    Tensor<T>& w = *a.params[0];
    Tensor<T>& b = *a.params[1];
    auto& gx = a.grad_inputs[0]->values;
    for (std::size_t o = 0; o < s_.out_features; ++o) {
      const T g = a.grad_output.values[o];
      b.grad[o] += g;
      T* gwr = w.grad.data() + o * s_.in_features;
      const T* wr = w.values.data() + o * s_.in_features;
      for (std::size_t i = 0; i < s_.in_features; ++i) {
        gwr[i] += g * x[i];
        gx[i] += g * wr[i];
      }
    }
  }

 private:
  LayerSpec s_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::GlobalAvgPool; }
  Shape output_shape(std::span<const Shape> in) const override {
    require_rank3(kind(), in[0]);
    return {in[0][0]};
  }
  void forward(const ForwardArgs<T>& a) override {
    const Shape& s = a.inputs[0]->shape;
    const std::size_t plane = s[1] * s[2];
    const T inv = T{1} / static_cast<T>(plane);
    for (std::size_t c = 0; c < s[0]; ++c) {
      T acc{};
      const T* x = a.inputs[0]->values.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += x[i];
      a.output.values[c] = acc * inv;
    }
  }
  void backward(const BackwardArgs<T>& a) override {
    const Shape& s = a.inputs[0]->shape;
    const std::size_t plane = s[1] * s[2];
    const T inv = T{1} / static_cast<T>(plane);
    for (std::size_t c = 0; c < s[0]; ++c) {
      const T g = a.grad_output.values[c] * inv;
      T* gx = a.grad_inputs[0]->values.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) gx[i] += g;
    }
  }
};

template <typename T>
class ChannelGate final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::ChannelGate; }
  std::size_t arity() const override { return 2; }
  Shape output_shape(std::span<const Shape> in) const override {
    require_rank3(kind(), in[0]);
    if (in[1].size() != 1 || in[1][0] != in[0][0]) {
      shape_fail(kind(), "gate " + shape_string(in[1]) + " does not match " + shape_string(in[0]));
    }
    return in[0];
  }
  void forward(const ForwardArgs<T>& a) override {
    const Shape& s = a.inputs[0]->shape;
    const std::size_t plane = s[1] * s[2];
    for (std::size_t c = 0; c < s[0]; ++c) {
      const T g = a.inputs[1]->values[c];
      const T* x = a.inputs[0]->values.data() + c * plane;
      T* y = a.output.values.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) y[i] = x[i] * g;
    }
  }
  void backward(const BackwardArgs<T>& a) override {
    const Shape& s = a.inputs[0]->shape;
    const std::size_t plane = s[1] * s[2];
    for (std::size_t c = 0; c < s[0]; ++c) {
      const T g = a.inputs[1]->values[c];
      const T* x = a.inputs[0]->values.data() + c * plane;
      const T* gy = a.grad_output.values.data() + c * plane;
      T* gx = a.grad_inputs[0]->values.data() + c * plane;
      T acc{};
      for (std::size_t i = 0; i < plane; ++i) {
        gx[i] += gy[i] * g;
        acc += gy[i] * x[i];
      }
      a.grad_inputs[1]->values[c] += acc;
    }
  }
};

// Per-channel affine normalization by running estimates. The estimates are
// constants for differentiation; training forwards refresh them afterwards.
template <typename T>
class BatchChannelScale final : public Layer<T> {
 public:
  explicit BatchChannelScale(LayerSpec spec) : s_(spec) {}
  LayerKind kind() const override { return LayerKind::BatchChannelScale; }
  std::vector<ParamSpec> parameters() const override {
    const std::size_t c = s_.in_channels;
    return {
        {"gamma", {c}, Init::Ones, 0, true},
        {"beta", {c}, Init::Zeros, 0, true},
        {"running_mean", {c}, Init::Zeros, 0, false},
        {"running_var", {c}, Init::Ones, 0, false},
    };
  }
  Shape output_shape(std::span<const Shape> in) const override {
    require_rank3(kind(), in[0]);
    if (in[0][0] != s_.in_channels) {
      shape_fail(kind(), "expected " + std::to_string(s_.in_channels) + " channels, got " +
                             shape_string(in[0]));
    }
    return in[0];
  }
  void forward(const ForwardArgs<T>& a) override {
    const Shape& s = a.inputs[0]->shape;
    const std::size_t c_n = s[0], plane = s[1] * s[2];
    const auto& gamma = a.params[0]->values;
    const auto& beta = a.params[1]->values;
    auto& rmean = a.params[2]->values;
    auto& rvar = a.params[3]->values;
    mean_.assign(rmean.begin(), rmean.end());
    inv_std_.resize(c_n);
    for (std::size_t c = 0; c < c_n; ++c) {
      inv_std_[c] = T{1} / std::sqrt(rvar[c] + static_cast<T>(s_.epsilon));
      const T* x = a.inputs[0]->values.data() + c * plane;
      T* y = a.output.values.data() + c * plane;
      const T scale = gamma[c] * inv_std_[c];
      for (std::size_t i = 0; i < plane; ++i) y[i] = (x[i] - mean_[c]) * scale + beta[c];
    }
    if (a.training) {
      const T mom = static_cast<T>(s_.momentum);
      for (std::size_t c = 0; c < c_n; ++c) {
        const T* x = a.inputs[0]->values.data() + c * plane;
        T m{};
        for (std::size_t i = 0; i < plane; ++i) m += x[i];
        m /= static_cast<T>(plane);
        T v{};
        for (std::size_t i = 0; i < plane; ++i) v += (x[i] - m) * (x[i] - m);
        v /= static_cast<T>(plane);
        rmean[c] = (T{1} - mom) * rmean[c] + mom * m;
        rvar[c] = (T{1} - mom) * rvar[c] + mom * v;
      }
    }
  }
  void backward(const BackwardArgs<T>& a) override {
    const Shape& s = a.inputs[0]->shape;
    const std::size_t c_n = s[0], plane = s[1] * s[2];
    Tensor<T>& gamma = *a.params[0];
    Tensor<T>& beta = *a.params[1];
    for (std::size_t c = 0; c < c_n; ++c) {
      const T* x = a.inputs[0]->values.data() + c * plane;
      const T* gy = a.grad_output.values.data() + c * plane;
      T* gx = a.grad_inputs[0]->values.data() + c * plane;
      const T scale = gamma.values[c] * inv_std_[c];
      T dgamma{}, dbeta{};
      for (std::size_t i = 0; i < plane; ++i) {
        dgamma += gy[i] * (x[i] - mean_[c]) * inv_std_[c];
        dbeta += gy[i];
        gx[i] += gy[i] * scale;
      }
      gamma.grad[c] += dgamma;
      beta.grad[c] += dbeta;
    }
  }

 private:
  LayerSpec s_;
  std::vector<T> mean_;
  std::vector<T> inv_std_;
};

}  // namespace

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::Conv2D: return std::make_unique<Conv2D<T>>(spec);
    case LayerKind::Upsample2x: return std::make_unique<Upsample2x<T>>();
    case LayerKind::MaxPool2x2: return std::make_unique<MaxPool2x2<T>>();
    case LayerKind::ReLU: return std::make_unique<ReLU<T>>();
    case LayerKind::Sigmoid: return std::make_unique<Sigmoid<T>>();
    case LayerKind::BatchChannelScale: return std::make_unique<BatchChannelScale<T>>(spec);
    case LayerKind::Concat: return std::make_unique<Concat<T>>();
    case LayerKind::Dense: return std::make_unique<Dense<T>>(spec);
    case LayerKind::GlobalAvgPool: return std::make_unique<GlobalAvgPool<T>>();
    case LayerKind::ChannelGate: return std::make_unique<ChannelGate<T>>();
  }
  throw InvalidArgument("make_layer: unknown layer kind");
}

template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&);

}  // namespace mmgesture::nn
