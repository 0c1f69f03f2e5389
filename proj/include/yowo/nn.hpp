#pragma once

// Convolution and normalization layers over the autodiff core. Convolutions
// use the cross-correlation convention (no kernel flip) and are computed
// per batch item as im2col followed by a matrix product; backward recomputes
// the column buffer instead of storing it.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "yowo/rng.hpp"
#include "yowo/tensor.hpp"

namespace yowo {

// Named handle to a parameter tensor; `trainable` is what the optimizer
// consults (frozen modules list their parameters with trainable=false).
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
};

template <typename T>
struct Conv2D {
    Tensor<T> weight;  // [Cout, Cin, kh, kw]
    Tensor<T> bias;    // [Cout], optional (undefined when absent)
    std::size_t stride = 1;
    std::size_t pad = 0;
};

template <typename T>
struct Conv3D {
    Tensor<T> weight;  // [Cout, Cin, kd, kh, kw]
    Tensor<T> bias;    // [Cout], optional
    std::size_t stride_d = 1, stride_h = 1, stride_w = 1;
    std::size_t pad_d = 0, pad_h = 0, pad_w = 0;
};

namespace detail {

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t pad, std::size_t stride,
                                const char* what) {
    std::ptrdiff_t num = std::ptrdiff_t(in) + 2 * std::ptrdiff_t(pad) - std::ptrdiff_t(k);
    if (num < 0)
        throw std::invalid_argument(std::string(what) + ": kernel " + std::to_string(k) +
                                    " exceeds padded input " + std::to_string(in + 2 * pad));
    return std::size_t(num) / stride + 1;
}

// col[(cin*kh+ky)*kw+kx][oy*Wo+ox] = x[cin][oy*s+ky-p][ox*s+kx-p] (0 outside)
template <typename T>
void im2col_2d(const T* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh,
               std::size_t kw, std::size_t pad, std::size_t stride, std::size_t ho, std::size_t wo,
               T* col) {
    for (std::size_t c = 0; c < cin; ++c) {
        const T* xc = x + c * h * w;
        for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx) {
                T* row = col + ((c * kh + ky) * kw + kx) * (ho * wo);
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    std::ptrdiff_t iy = std::ptrdiff_t(oy * stride + ky) - std::ptrdiff_t(pad);
                    T* dst = row + oy * wo;
                    if (iy < 0 || iy >= std::ptrdiff_t(h)) {
                        for (std::size_t ox = 0; ox < wo; ++ox) dst[ox] = T(0);
                        continue;
                    }
                    const T* src = xc + std::size_t(iy) * w;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        std::ptrdiff_t ix = std::ptrdiff_t(ox * stride + kx) - std::ptrdiff_t(pad);
                        dst[ox] = (ix >= 0 && ix < std::ptrdiff_t(w)) ? src[std::size_t(ix)] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_2d(const T* col, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh,
               std::size_t kw, std::size_t pad, std::size_t stride, std::size_t ho, std::size_t wo,
               T* x) {
    for (std::size_t c = 0; c < cin; ++c) {
        T* xc = x + c * h * w;
        for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx) {
                const T* row = col + ((c * kh + ky) * kw + kx) * (ho * wo);
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    std::ptrdiff_t iy = std::ptrdiff_t(oy * stride + ky) - std::ptrdiff_t(pad);
                    if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
                    const T* src = row + oy * wo;
                    T* dstrow = xc + std::size_t(iy) * w;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        std::ptrdiff_t ix = std::ptrdiff_t(ox * stride + kx) - std::ptrdiff_t(pad);
                        if (ix >= 0 && ix < std::ptrdiff_t(w)) dstrow[std::size_t(ix)] += src[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
void im2col_3d(const T* x, std::size_t cin, std::size_t d, std::size_t h, std::size_t w,
               std::size_t kd, std::size_t kh, std::size_t kw, std::size_t pd, std::size_t ph,
               std::size_t pw, std::size_t sd, std::size_t sh, std::size_t sw, std::size_t dout,
               std::size_t ho, std::size_t wo, T* col) {
    std::size_t L = dout * ho * wo;
    for (std::size_t c = 0; c < cin; ++c) {
        const T* xc = x + c * d * h * w;
        for (std::size_t kz = 0; kz < kd; ++kz)
            for (std::size_t ky = 0; ky < kh; ++ky)
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    T* row = col + (((c * kd + kz) * kh + ky) * kw + kx) * L;
                    for (std::size_t oz = 0; oz < dout; ++oz) {
                        std::ptrdiff_t iz = std::ptrdiff_t(oz * sd + kz) - std::ptrdiff_t(pd);
                        bool zin = iz >= 0 && iz < std::ptrdiff_t(d);
                        for (std::size_t oy = 0; oy < ho; ++oy) {
                            std::ptrdiff_t iy = std::ptrdiff_t(oy * sh + ky) - std::ptrdiff_t(ph);
                            T* dst = row + (oz * ho + oy) * wo;
                            if (!zin || iy < 0 || iy >= std::ptrdiff_t(h)) {
                                for (std::size_t ox = 0; ox < wo; ++ox) dst[ox] = T(0);
                                continue;
                            }
                            const T* src = xc + (std::size_t(iz) * h + std::size_t(iy)) * w;
                            for (std::size_t ox = 0; ox < wo; ++ox) {
                                std::ptrdiff_t ix = std::ptrdiff_t(ox * sw + kx) - std::ptrdiff_t(pw);
                                dst[ox] = (ix >= 0 && ix < std::ptrdiff_t(w)) ? src[std::size_t(ix)]
                                                                              : T(0);
                            }
                        }
                    }
                }
    }
}

template <typename T>
void col2im_3d(const T* col, std::size_t cin, std::size_t d, std::size_t h, std::size_t w,
               std::size_t kd, std::size_t kh, std::size_t kw, std::size_t pd, std::size_t ph,
               std::size_t pw, std::size_t sd, std::size_t sh, std::size_t sw, std::size_t dout,
               std::size_t ho, std::size_t wo, T* x) {
    std::size_t L = dout * ho * wo;
    for (std::size_t c = 0; c < cin; ++c) {
        T* xc = x + c * d * h * w;
        for (std::size_t kz = 0; kz < kd; ++kz)
            for (std::size_t ky = 0; ky < kh; ++ky)
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    const T* row = col + (((c * kd + kz) * kh + ky) * kw + kx) * L;
                    for (std::size_t oz = 0; oz < dout; ++oz) {
                        std::ptrdiff_t iz = std::ptrdiff_t(oz * sd + kz) - std::ptrdiff_t(pd);
                        if (iz < 0 || iz >= std::ptrdiff_t(d)) continue;
                        for (std::size_t oy = 0; oy < ho; ++oy) {
                            std::ptrdiff_t iy = std::ptrdiff_t(oy * sh + ky) - std::ptrdiff_t(ph);
                            if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
                            const T* src = row + (oz * ho + oy) * wo;
                            T* dstrow = xc + (std::size_t(iz) * h + std::size_t(iy)) * w;
                            for (std::size_t ox = 0; ox < wo; ++ox) {
                                std::ptrdiff_t ix = std::ptrdiff_t(ox * sw + kx) - std::ptrdiff_t(pw);
                                if (ix >= 0 && ix < std::ptrdiff_t(w))
                                    dstrow[std::size_t(ix)] += src[ox];
                            }
                        }
                    }
                }
    }
}

}  // namespace detail

// x: [N, Cin, H, W] -> [N, Cout, H', W']
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Conv2D<T>& layer) {
    if (x.ndim() != 4) throw std::invalid_argument("conv2d: input must be [N,Cin,H,W]");
    const auto& ws = layer.weight.shape();
    std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    std::size_t cout = ws[0], kh = ws[2], kw = ws[3];
    if (ws[1] != cin)
        throw std::invalid_argument("conv2d: input has " + std::to_string(cin) +
                                    " channels, layer expects " + std::to_string(ws[1]));
    std::size_t ho = detail::conv_out_dim(h, kh, layer.pad, layer.stride, "conv2d");
    std::size_t wo = detail::conv_out_dim(w, kw, layer.pad, layer.stride, "conv2d");
    if (ho == 0 || wo == 0) throw std::invalid_argument("conv2d: degenerate output size");

    std::size_t K = cin * kh * kw, L = ho * wo;
    std::vector<T> out(n * cout * L, T(0));
    std::vector<T> col(K * L);
    const T* xv = x.values().data();
    const T* wv = layer.weight.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        detail::im2col_2d(xv + i * cin * h * w, cin, h, w, kh, kw, layer.pad, layer.stride, ho, wo,
                          col.data());
        detail::gemm_nn(wv, col.data(), out.data() + i * cout * L, cout, K, L);
    }
    if (layer.bias.defined()) {
        const auto& bv = layer.bias.values();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < cout; ++c) {
                T* dst = out.data() + (i * cout + c) * L;
                for (std::size_t j = 0; j < L; ++j) dst[j] += bv[c];
            }
    }

    bool rg = grad_enabled() && (x.requires_grad() || layer.weight.requires_grad() ||
                                 (layer.bias.defined() && layer.bias.requires_grad()));
    Tensor<T> r(Shape{n, cout, ho, wo}, std::move(out), rg);
    if (rg) {
        auto xn = x.node_ptr(), wn = layer.weight.node_ptr(), rn = r.node_ptr();
        auto bn = layer.bias.defined() ? layer.bias.node_ptr() : nullptr;
        std::size_t pad = layer.pad, stride = layer.stride;
        detail::record(r, [xn, wn, bn, rn, n, cin, h, w, cout, kh, kw, pad, stride, ho, wo, K, L] {
            if (rn->grad.empty()) return;
            std::vector<T> col2(K * L);
            std::vector<T> dcol(K * L);
            if (bn && bn->requires_grad && bn->grad.empty()) bn->grad.assign(cout, T(0));
            if (wn->requires_grad && wn->grad.empty()) wn->grad.assign(wn->values.size(), T(0));
            if (xn->requires_grad && xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            for (std::size_t i = 0; i < n; ++i) {
                const T* g = rn->grad.data() + i * cout * L;
                if (bn && bn->requires_grad) {
                    for (std::size_t c = 0; c < cout; ++c) {
                        T s = 0;
                        for (std::size_t j = 0; j < L; ++j) s += g[c * L + j];
                        bn->grad[c] += s;
                    }
                }
                if (wn->requires_grad) {
                    detail::im2col_2d(xn->values.data() + i * cin * h * w, cin, h, w, kh, kw, pad,
                                      stride, ho, wo, col2.data());
                    detail::gemm_nt(g, col2.data(), wn->grad.data(), cout, L, K);
                }
                if (xn->requires_grad) {
                    std::fill(dcol.begin(), dcol.end(), T(0));
                    detail::gemm_tn(wn->values.data(), g, dcol.data(), K, cout, L);
                    detail::col2im_2d(dcol.data(), cin, h, w, kh, kw, pad, stride, ho, wo,
                                      xn->grad.data() + i * cin * h * w);
                }
            }
        });
    }
    return r;
}

// x: [N, Cin, D, H, W] -> [N, Cout, D', H', W']
template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Conv3D<T>& layer) {
    if (x.ndim() != 5) throw std::invalid_argument("conv3d: input must be [N,Cin,D,H,W]");
    const auto& ws = layer.weight.shape();
    std::size_t n = x.dim(0), cin = x.dim(1), d = x.dim(2), h = x.dim(3), w = x.dim(4);
    std::size_t cout = ws[0], kd = ws[2], kh = ws[3], kw = ws[4];
    if (ws[1] != cin)
        throw std::invalid_argument("conv3d: input has " + std::to_string(cin) +
                                    " channels, layer expects " + std::to_string(ws[1]));
    std::size_t dout = detail::conv_out_dim(d, kd, layer.pad_d, layer.stride_d, "conv3d");
    std::size_t ho = detail::conv_out_dim(h, kh, layer.pad_h, layer.stride_h, "conv3d");
    std::size_t wo = detail::conv_out_dim(w, kw, layer.pad_w, layer.stride_w, "conv3d");
    if (dout == 0 || ho == 0 || wo == 0) throw std::invalid_argument("conv3d: degenerate output");

    std::size_t K = cin * kd * kh * kw, L = dout * ho * wo;
    std::vector<T> out(n * cout * L, T(0));
    std::vector<T> col(K * L);
    const T* xv = x.values().data();
    const T* wv = layer.weight.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        detail::im2col_3d(xv + i * cin * d * h * w, cin, d, h, w, kd, kh, kw, layer.pad_d,
                          layer.pad_h, layer.pad_w, layer.stride_d, layer.stride_h, layer.stride_w,
                          dout, ho, wo, col.data());
        detail::gemm_nn(wv, col.data(), out.data() + i * cout * L, cout, K, L);
    }
    if (layer.bias.defined()) {
        const auto& bv = layer.bias.values();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < cout; ++c) {
                T* dst = out.data() + (i * cout + c) * L;
                for (std::size_t j = 0; j < L; ++j) dst[j] += bv[c];
            }
    }

    bool rg = grad_enabled() && (x.requires_grad() || layer.weight.requires_grad() ||
                                 (layer.bias.defined() && layer.bias.requires_grad()));
    Tensor<T> r(Shape{n, cout, dout, ho, wo}, std::move(out), rg);
    if (rg) {
        auto xn = x.node_ptr(), wn = layer.weight.node_ptr(), rn = r.node_ptr();
        auto bn = layer.bias.defined() ? layer.bias.node_ptr() : nullptr;
        std::size_t pd = layer.pad_d, ph = layer.pad_h, pw = layer.pad_w;
        std::size_t sd = layer.stride_d, sh = layer.stride_h, sw = layer.stride_w;
        detail::record(r, [xn, wn, bn, rn, n, cin, d, h, w, cout, kd, kh, kw, pd, ph, pw, sd, sh,
                           sw, dout, ho, wo, K, L] {
            if (rn->grad.empty()) return;
            std::vector<T> col2(K * L);
            std::vector<T> dcol(K * L);
            if (bn && bn->requires_grad && bn->grad.empty()) bn->grad.assign(cout, T(0));
            if (wn->requires_grad && wn->grad.empty()) wn->grad.assign(wn->values.size(), T(0));
            if (xn->requires_grad && xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            for (std::size_t i = 0; i < n; ++i) {
                const T* g = rn->grad.data() + i * cout * L;
                if (bn && bn->requires_grad) {
                    for (std::size_t c = 0; c < cout; ++c) {
                        T s = 0;
                        for (std::size_t j = 0; j < L; ++j) s += g[c * L + j];
                        bn->grad[c] += s;
                    }
                }
                if (wn->requires_grad) {
                    detail::im2col_3d(xn->values.data() + i * cin * d * h * w, cin, d, h, w, kd, kh,
                                      kw, pd, ph, pw, sd, sh, sw, dout, ho, wo, col2.data());
                    detail::gemm_nt(g, col2.data(), wn->grad.data(), cout, L, K);
                }
                if (xn->requires_grad) {
                    std::fill(dcol.begin(), dcol.end(), T(0));
                    detail::gemm_tn(wn->values.data(), g, dcol.data(), K, cout, L);
                    detail::col2im_3d(dcol.data(), cin, d, h, w, kd, kh, kw, pd, ph, pw, sd, sh, sw,
                                      dout, ho, wo, xn->grad.data() + i * cin * d * h * w);
                }
            }
        });
    }
    return r;
}

enum class NormMode { train, eval };

// Per-channel batch normalization; channel axis is 1, statistics reduce over
// every other axis. Running statistics are single-writer (the training loop).
template <typename T>
struct BatchNorm {
    Tensor<T> scale;  // [C]
    Tensor<T> shift;  // [C]
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.9);  // running = momentum*running + (1-momentum)*batch
    T eps = T(1e-5);
};

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, BatchNorm<T>& layer, NormMode mode) {
    if (x.ndim() < 2) throw std::invalid_argument("batchnorm: input must have a channel axis");
    std::size_t n = x.dim(0), c = x.dim(1);
    if (c != layer.scale.numel())
        throw std::invalid_argument("batchnorm: channel mismatch, input " + std::to_string(c) +
                                    " vs layer " + std::to_string(layer.scale.numel()));
    if (mode == NormMode::train && n < 2)
        throw std::invalid_argument("batchnorm: train mode needs batch size >= 2");
    std::size_t inner = x.numel() / (n * c);
    std::size_t m = n * inner;  // samples per channel

    std::vector<T> mean(c), invstd(c);
    const auto& xv = x.values();
    if (mode == NormMode::train) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            T s = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const T* p = xv.data() + (i * c + ch) * inner;
                for (std::size_t j = 0; j < inner; ++j) s += p[j];
            }
            mean[ch] = s / T(m);
            T v = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const T* p = xv.data() + (i * c + ch) * inner;
                for (std::size_t j = 0; j < inner; ++j) {
                    T dlt = p[j] - mean[ch];
                    v += dlt * dlt;
                }
            }
            T var = v / T(m);
            invstd[ch] = T(1) / std::sqrt(var + layer.eps);
            layer.running_mean[ch] = layer.momentum * layer.running_mean[ch] + (T(1) - layer.momentum) * mean[ch];
            layer.running_var[ch] = layer.momentum * layer.running_var[ch] + (T(1) - layer.momentum) * var;
        }
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            mean[ch] = layer.running_mean[ch];
            invstd[ch] = T(1) / std::sqrt(layer.running_var[ch] + layer.eps);
        }
    }

    std::vector<T> out(x.numel());
    const auto& gv = layer.scale.values();
    const auto& bv = layer.shift.values();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* p = xv.data() + (i * c + ch) * inner;
            T* q = out.data() + (i * c + ch) * inner;
            T mu = mean[ch], is = invstd[ch], ga = gv[ch], be = bv[ch];
            for (std::size_t j = 0; j < inner; ++j) q[j] = ga * (p[j] - mu) * is + be;
        }

    bool rg = grad_enabled() && (x.requires_grad() || layer.scale.requires_grad() ||
                                 layer.shift.requires_grad());
    Tensor<T> r(x.shape(), std::move(out), rg);
    if (rg) {
        auto xn = x.node_ptr(), gn = layer.scale.node_ptr(), sn = layer.shift.node_ptr(),
             rn = r.node_ptr();
        bool train = mode == NormMode::train;
        detail::record(r, [xn, gn, sn, rn, mean, invstd, n, c, inner, m, train] {
            if (rn->grad.empty()) return;
            const auto& g = rn->grad;
            const auto& xv2 = xn->values;
            const auto& ga = gn->values;
            std::vector<T> dgamma(c, T(0)), dbeta(c, T(0));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const T* gp = g.data() + (i * c + ch) * inner;
                    const T* xp = xv2.data() + (i * c + ch) * inner;
                    T mu = mean[ch], is = invstd[ch];
                    T sg = 0, sgx = 0;
                    for (std::size_t j = 0; j < inner; ++j) {
                        sg += gp[j];
                        sgx += gp[j] * (xp[j] - mu) * is;
                    }
                    dbeta[ch] += sg;
                    dgamma[ch] += sgx;
                }
            if (gn->requires_grad) {
                if (gn->grad.empty()) gn->grad.assign(c, T(0));
                for (std::size_t ch = 0; ch < c; ++ch) gn->grad[ch] += dgamma[ch];
            }
            if (sn->requires_grad) {
                if (sn->grad.empty()) sn->grad.assign(c, T(0));
                for (std::size_t ch = 0; ch < c; ++ch) sn->grad[ch] += dbeta[ch];
            }
            if (xn->requires_grad) {
                if (xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const T* gp = g.data() + (i * c + ch) * inner;
                        const T* xp = xv2.data() + (i * c + ch) * inner;
                        T* dp = xn->grad.data() + (i * c + ch) * inner;
                        T mu = mean[ch], is = invstd[ch], gam = ga[ch];
                        if (train) {
                            T k1 = dbeta[ch] / T(m), k2 = dgamma[ch] / T(m);
                            for (std::size_t j = 0; j < inner; ++j) {
                                T xhat = (xp[j] - mu) * is;
                                dp[j] += gam * is * (gp[j] - k1 - xhat * k2);
                            }
                        } else {
                            for (std::size_t j = 0; j < inner; ++j) dp[j] += gam * is * gp[j];
                        }
                    }
            }
        });
    }
    return r;
}

// ---------------------------------------------------------------------------
// construction helpers
// ---------------------------------------------------------------------------

// Kaiming-uniform fan-in: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
Tensor<T> kaiming_uniform(Rng& rng, Shape shape) {
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    double bound = std::sqrt(6.0 / double(fan_in));
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v) x = T(rng.uniform(-bound, bound));
    return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
Conv2D<T> make_conv2d(Rng& rng, std::size_t cin, std::size_t cout, std::size_t k,
                      std::size_t stride, std::size_t pad, bool bias = true) {
    Conv2D<T> layer;
    layer.weight = kaiming_uniform<T>(rng, {cout, cin, k, k});
    if (bias) layer.bias = Tensor<T>::zeros({cout}, true);
    layer.stride = stride;
    layer.pad = pad;
    return layer;
}

template <typename T>
Conv3D<T> make_conv3d(Rng& rng, std::size_t cin, std::size_t cout, std::size_t k,
                      std::size_t stride_d, std::size_t stride_s, std::size_t pad, bool bias = true) {
    Conv3D<T> layer;
    layer.weight = kaiming_uniform<T>(rng, {cout, cin, k, k, k});
    if (bias) layer.bias = Tensor<T>::zeros({cout}, true);
    layer.stride_d = stride_d;
    layer.stride_h = layer.stride_w = stride_s;
    layer.pad_d = layer.pad_h = layer.pad_w = pad;
    return layer;
}

template <typename T>
BatchNorm<T> make_batchnorm(std::size_t c) {
    BatchNorm<T> layer;
    layer.scale = Tensor<T>::ones({c}, true);
    layer.shift = Tensor<T>::zeros({c}, true);
    layer.running_mean.assign(c, T(0));
    layer.running_var.assign(c, T(1));
    return layer;
}

}  // namespace yowo
