#pragma once

// Channel fusion and attention. The 2D and 3D feature maps are stacked
// along channels, projected by two convolutions, passed through Gram-matrix
// channel attention (softmax over each row of F*F^T), blended back into the
// projection with a trainable scalar that starts at 0, and projected again
// to the head width.

#include <stdexcept>
#include <vector>

#include "yowo/nn.hpp"
#include "yowo/tensor.hpp"

namespace yowo {

template <typename T>
struct Cfam {
    Conv2D<T> conv_in1, conv_in2;   // (C'+C'') -> C -> C
    BatchNorm<T> bn_in;             // after conv_in1
    Tensor<T> alpha;                // scalar residual weight, trainable, starts at 0
    Conv2D<T> conv_out1, conv_out2; // C -> C -> C*
    BatchNorm<T> bn_out;            // after conv_out1
    bool attention_enabled = true;

    std::size_t in_channels() const { return conv_in1.weight.dim(1); }
    std::size_t mid_channels() const { return conv_in2.weight.dim(0); }
    std::size_t out_channels() const { return conv_out2.weight.dim(0); }
};

template <typename T>
Cfam<T> make_cfam(Rng& rng, std::size_t cin, std::size_t mid, std::size_t cout,
                  bool attention = true) {
    Cfam<T> m;
    m.conv_in1 = make_conv2d<T>(rng, cin, mid, 3, 1, 1, false);
    m.bn_in = make_batchnorm<T>(mid);
    m.conv_in2 = make_conv2d<T>(rng, mid, mid, 3, 1, 1, true);
    m.alpha = Tensor<T>::zeros({1}, true);
    m.conv_out1 = make_conv2d<T>(rng, mid, mid, 3, 1, 1, false);
    m.bn_out = make_batchnorm<T>(mid);
    m.conv_out2 = make_conv2d<T>(rng, mid, cout, 3, 1, 1, true);
    m.attention_enabled = attention;
    return m;
}

// Stacks the two feature maps along channels, 3D channels first.
// f3d: [N,C',H,W], f2d: [N,C'',H,W] -> [N,C'+C'',H,W]
template <typename T>
Tensor<T> fuse_concat(const Tensor<T>& f3d, const Tensor<T>& f2d) {
    if (f3d.ndim() != 4 || f2d.ndim() != 4)
        throw std::invalid_argument("fuse_concat: expects [N,C,H,W] features");
    if (f3d.dim(0) != f2d.dim(0) || f3d.dim(2) != f2d.dim(2) || f3d.dim(3) != f2d.dim(3))
        throw std::invalid_argument("fuse_concat: grid mismatch " + shape_str(f3d.shape()) +
                                    " vs " + shape_str(f2d.shape()));
    return concat(std::vector<Tensor<T>>{f3d, f2d}, 1);
}

// Gram matrix G = F * F^T of channel-vectorized features F [C,N].
template <typename T>
Tensor<T> gram(const Tensor<T>& f) {
    if (f.ndim() != 2) throw std::invalid_argument("gram: expects [C,N]");
    return matmul(f, transpose2d(f));
}

// Row-wise softmax of the Gram matrix; entry (i,j) scores channel j's
// impact on channel i, each row summing to 1.
template <typename T>
Tensor<T> attention_map(const Tensor<T>& g) {
    if (g.ndim() != 2 || g.dim(0) != g.dim(1))
        throw std::invalid_argument("attention_map: expects square [C,C]");
    return softmax_rows(g);
}

// out = alpha * reshape(M*F) + B for one item; F must be the vectorization
// of B ([C, H*W] in row-major order over the grid).
template <typename T>
Tensor<T> apply_attention(const Tensor<T>& m, const Tensor<T>& f, const Tensor<T>& b,
                          const Tensor<T>& alpha) {
    if (b.ndim() != 3) throw std::invalid_argument("apply_attention: B must be [C,H,W]");
    if (f.ndim() != 2 || f.dim(0) != b.dim(0) || f.dim(1) != b.dim(1) * b.dim(2))
        throw std::invalid_argument("apply_attention: F " + shape_str(f.shape()) +
                                    " is not the vectorization of B " + shape_str(b.shape()));
    if (m.dim(0) != f.dim(0) || m.dim(1) != f.dim(0))
        throw std::invalid_argument("apply_attention: M/F channel mismatch");
    Tensor<T> reweighted = matmul(m, f);
    Tensor<T> back = reshape(reweighted, b.shape());
    return add(mul(back, alpha), b);
}

// Full block: conv_in pair, per-item Gram attention, conv_out pair.
// a: [N, C'+C'', H, W] -> [N, C*, H, W]
template <typename T>
Tensor<T> cfam_forward(const Tensor<T>& a, Cfam<T>& m, NormMode mode) {
    if (a.ndim() != 4) throw std::invalid_argument("cfam_forward: expects [N,C,H,W]");
    if (a.dim(1) != m.in_channels())
        throw std::invalid_argument("cfam_forward: input has " + std::to_string(a.dim(1)) +
                                    " channels, block expects " + std::to_string(m.in_channels()));
    Tensor<T> b = conv2d_forward(a, m.conv_in1);
    b = batchnorm_forward(b, m.bn_in, mode);
    b = relu(b);
    b = conv2d_forward(b, m.conv_in2);

    Tensor<T> fused = b;
    if (m.attention_enabled) {
        std::size_t n = b.dim(0), c = b.dim(1), h = b.dim(2), w = b.dim(3);
        std::vector<Tensor<T>> items;
        items.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            Tensor<T> bi = reshape(slice(b, 0, i, i + 1), {c, h, w});
            Tensor<T> f = reshape(bi, {c, h * w});
            Tensor<T> att = apply_attention(attention_map(gram(f)), f, bi, m.alpha);
            items.push_back(reshape(att, {1, c, h, w}));
        }
        fused = concat(items, 0);
    }

    Tensor<T> d = conv2d_forward(fused, m.conv_out1);
    d = batchnorm_forward(d, m.bn_out, mode);
    d = relu(d);
    return conv2d_forward(d, m.conv_out2);
}

template <typename T>
void collect_params(Cfam<T>& m, const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".conv_in1.weight", m.conv_in1.weight, true});
    out.push_back({prefix + ".bn_in.scale", m.bn_in.scale, true});
    out.push_back({prefix + ".bn_in.shift", m.bn_in.shift, true});
    out.push_back({prefix + ".conv_in2.weight", m.conv_in2.weight, true});
    out.push_back({prefix + ".conv_in2.bias", m.conv_in2.bias, true});
    out.push_back({prefix + ".alpha", m.alpha, true});
    out.push_back({prefix + ".conv_out1.weight", m.conv_out1.weight, true});
    out.push_back({prefix + ".bn_out.scale", m.bn_out.scale, true});
    out.push_back({prefix + ".bn_out.shift", m.bn_out.shift, true});
    out.push_back({prefix + ".conv_out2.weight", m.conv_out2.weight, true});
    out.push_back({prefix + ".conv_out2.bias", m.conv_out2.bias, true});
}

}  // namespace yowo
