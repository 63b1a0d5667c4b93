#include "semattn/nn/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "semattn/errors.hpp"

namespace semattn::nn {

namespace {

using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Upper bound on im2col scratch per GEMM call, in scalars.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

struct ConvGeometry {
    int channels, height, width;
    int kernel, stride, padding;
    int out_h, out_w;

    int rows() const { return channels * kernel * kernel; }
    int spatial() const { return out_h * out_w; }
};

// Writes the column matrix for `count` samples starting at `src` (CHW each)
// into `cols` laid out [rows, count * spatial].
void im2col(const Scalar* src, int count, const ConvGeometry& g, Scalar* cols) {
    const int spatial = g.spatial();
    const std::size_t ld = static_cast<std::size_t>(count) * spatial;
    const std::size_t image = static_cast<std::size_t>(g.channels) * g.height * g.width;
    for (int n = 0; n < count; ++n) {
        const Scalar* img = src + n * image;
        for (int c = 0; c < g.channels; ++c) {
            const Scalar* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
            for (int ki = 0; ki < g.kernel; ++ki) {
                for (int kj = 0; kj < g.kernel; ++kj) {
                    const int row = (c * g.kernel + ki) * g.kernel + kj;
                    Scalar* out = cols + row * ld + static_cast<std::size_t>(n) * spatial;
                    for (int oh = 0; oh < g.out_h; ++oh) {
                        const int ih = oh * g.stride - g.padding + ki;
                        Scalar* line = out + oh * g.out_w;
                        if (ih < 0 || ih >= g.height) {
                            std::fill_n(line, g.out_w, Scalar{0});
                            continue;
                        }
                        const Scalar* in_row = plane + static_cast<std::size_t>(ih) * g.width;
                        for (int ow = 0; ow < g.out_w; ++ow) {
                            const int iw = ow * g.stride - g.padding + kj;
                            line[ow] = (iw >= 0 && iw < g.width) ? in_row[iw] : Scalar{0};
                        }
                    }
                }
            }
        }
    }
}

void col2im(const Scalar* cols, int count, const ConvGeometry& g, Scalar* dst) {
    const int spatial = g.spatial();
    const std::size_t ld = static_cast<std::size_t>(count) * spatial;
    const std::size_t image = static_cast<std::size_t>(g.channels) * g.height * g.width;
    for (int n = 0; n < count; ++n) {
        Scalar* img = dst + n * image;
        for (int c = 0; c < g.channels; ++c) {
            Scalar* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
            for (int ki = 0; ki < g.kernel; ++ki) {
                for (int kj = 0; kj < g.kernel; ++kj) {
                    const int row = (c * g.kernel + ki) * g.kernel + kj;
                    const Scalar* in = cols + row * ld + static_cast<std::size_t>(n) * spatial;
                    for (int oh = 0; oh < g.out_h; ++oh) {
                        const int ih = oh * g.stride - g.padding + ki;
                        if (ih < 0 || ih >= g.height) continue;
                        Scalar* out_row = plane + static_cast<std::size_t>(ih) * g.width;
                        const Scalar* line = in + oh * g.out_w;
                        for (int ow = 0; ow < g.out_w; ++ow) {
                            const int iw = ow * g.stride - g.padding + kj;
                            if (iw >= 0 && iw < g.width) out_row[iw] += line[ow];
                        }
                    }
                }
            }
        }
    }
}

int chunk_size(const ConvGeometry& g, int batch) {
    const std::size_t per_sample = static_cast<std::size_t>(g.rows()) * g.spatial();
    const std::size_t fit = std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(per_sample, 1));
    return static_cast<int>(std::min<std::size_t>(fit, static_cast<std::size_t>(batch)));
}

}  // namespace

int conv_output_size(int input, int kernel, int stride, int padding) {
    return (input + 2 * padding - kernel) / stride + 1;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(ConvSpec spec, Rng& rng)
    : spec_(spec),
      weight_({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}, true),
      bias_(std::vector<int>{spec.bias ? spec.out_channels : 0}, false) {
    if (spec.in_channels < 1 || spec.out_channels < 1 || spec.kernel < 1 || spec.stride < 1 || spec.padding < 0) {
        throw ConfigError("invalid convolution spec");
    }
    const int fan_in = spec.in_channels * spec.kernel * spec.kernel;
    kaiming_uniform(weight_.value, fan_in, rng);
    if (spec.bias) uniform_fill(bias_.value, 1.0 / std::sqrt(static_cast<Scalar>(fan_in)), rng);
}

void Conv2d::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
    fn(join_name(prefix, "weight"), weight_);
    if (spec_.bias) fn(join_name(prefix, "bias"), bias_);
}

Tensor Conv2d::forward(const Tensor& x, Mode /*mode*/) {
    require_rank(x, 4, "Conv2d input");
    if (x.dim(1) != spec_.in_channels) {
        throw ShapeError("Conv2d expects " + std::to_string(spec_.in_channels) + " input channels, got " +
                         x.shape_str());
    }
    const ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), spec_.kernel, spec_.stride, spec_.padding,
                         conv_output_size(x.dim(2), spec_.kernel, spec_.stride, spec_.padding),
                         conv_output_size(x.dim(3), spec_.kernel, spec_.stride, spec_.padding)};
    if (g.out_h < 1 || g.out_w < 1) throw ShapeError("Conv2d input too small: " + x.shape_str());
    input_ = x;
    const int batch = x.dim(0);
    const int out_c = spec_.out_channels;
    Tensor out({batch, out_c, g.out_h, g.out_w});
    ConstMatMap w(weight_.value.data(), out_c, g.rows());
    const std::size_t in_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
    const std::size_t out_stride = static_cast<std::size_t>(out_c) * g.spatial();

    if (pointwise()) {
        for (int n = 0; n < batch; ++n) {
            ConstMatMap xin(x.data() + n * in_stride, g.channels, g.spatial());
            MatMap y(out.data() + n * out_stride, out_c, g.spatial());
            y.noalias() = w * xin;
        }
    } else {
        const int chunk = chunk_size(g, batch);
        std::vector<Scalar> cols(static_cast<std::size_t>(g.rows()) * chunk * g.spatial());
        RowMat result;
        for (int n0 = 0; n0 < batch; n0 += chunk) {
            const int count = std::min(chunk, batch - n0);
            const int ncols = count * g.spatial();
            im2col(x.data() + n0 * in_stride, count, g, cols.data());
            ConstMatMap c(cols.data(), g.rows(), ncols);
            if (count == 1) {
                MatMap y(out.data() + n0 * out_stride, out_c, g.spatial());
                y.noalias() = w * c;
            } else {
                result.noalias() = w * c;
                for (int k = 0; k < count; ++k) {
                    MatMap y(out.data() + (n0 + k) * out_stride, out_c, g.spatial());
                    y = result.middleCols(static_cast<Eigen::Index>(k) * g.spatial(), g.spatial());
                }
            }
        }
    }
    if (spec_.bias) {
        for (int n = 0; n < batch; ++n) {
            for (int o = 0; o < out_c; ++o) {
                Scalar* p = out.data() + n * out_stride + static_cast<std::size_t>(o) * g.spatial();
                const Scalar b = bias_.value[o];
                for (int s = 0; s < g.spatial(); ++s) p[s] += b;
            }
        }
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const Tensor& x = input_;
    const ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), spec_.kernel, spec_.stride, spec_.padding,
                         grad_out.dim(2), grad_out.dim(3)};
    const int batch = x.dim(0);
    const int out_c = spec_.out_channels;
    require_shape(grad_out, {batch, out_c, g.out_h, g.out_w}, "Conv2d grad");
    const std::size_t in_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
    const std::size_t out_stride = static_cast<std::size_t>(out_c) * g.spatial();

    ConstMatMap w(weight_.value.data(), out_c, g.rows());
    MatMap dw(weight_.grad.data(), out_c, g.rows());
    Tensor grad_in;
    if (propagate_input_grad_) grad_in = Tensor(x.shape());

    if (pointwise()) {
        for (int n = 0; n < batch; ++n) {
            ConstMatMap xin(x.data() + n * in_stride, g.channels, g.spatial());
            ConstMatMap gy(grad_out.data() + n * out_stride, out_c, g.spatial());
            dw.noalias() += gy * xin.transpose();
            if (propagate_input_grad_) {
                MatMap gx(grad_in.data() + n * in_stride, g.channels, g.spatial());
                gx.noalias() = w.transpose() * gy;
            }
        }
    } else {
        const int chunk = chunk_size(g, batch);
        std::vector<Scalar> cols(static_cast<std::size_t>(g.rows()) * chunk * g.spatial());
        RowMat gy_chunk;
        RowMat gcols;
        for (int n0 = 0; n0 < batch; n0 += chunk) {
            const int count = std::min(chunk, batch - n0);
            const int ncols = count * g.spatial();
            im2col(x.data() + n0 * in_stride, count, g, cols.data());
            ConstMatMap c(cols.data(), g.rows(), ncols);
            gy_chunk.resize(out_c, ncols);
            for (int k = 0; k < count; ++k) {
                gy_chunk.middleCols(static_cast<Eigen::Index>(k) * g.spatial(), g.spatial()) =
                    ConstMatMap(grad_out.data() + (n0 + k) * out_stride, out_c, g.spatial());
            }
            dw.noalias() += gy_chunk * c.transpose();
            if (propagate_input_grad_) {
                gcols.noalias() = w.transpose() * gy_chunk;
                col2im(gcols.data(), count, g, grad_in.data() + n0 * in_stride);
            }
        }
    }
    if (spec_.bias) {
        for (int n = 0; n < batch; ++n) {
            for (int o = 0; o < out_c; ++o) {
                const Scalar* p = grad_out.data() + n * out_stride + static_cast<std::size_t>(o) * g.spatial();
                Scalar s = 0;
                for (int i = 0; i < g.spatial(); ++i) s += p[i];
                bias_.grad[o] += s;
            }
        }
    }
    return grad_in;
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, Scalar momentum, Scalar eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(std::vector<int>{channels}, false),
      beta_(std::vector<int>{channels}, false),
      running_mean_({channels}),
      running_var_({channels}, 1.0) {
    gamma_.value.fill(1.0);
}

void BatchNorm2d::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
    fn(join_name(prefix, "weight"), gamma_);
    fn(join_name(prefix, "bias"), beta_);
}

void BatchNorm2d::visit_buffers(const std::string& prefix, const BufferVisitor& fn) {
    fn(join_name(prefix, "running_mean"), running_mean_);
    fn(join_name(prefix, "running_var"), running_var_);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
    require_rank(x, 4, "BatchNorm2d input");
    if (x.dim(1) != channels_) throw ShapeError("BatchNorm2d channel mismatch: " + x.shape_str());
    const int batch = x.dim(0);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const std::size_t count = plane * batch;
    mode_ = mode;
    Tensor out(x.shape());
    xhat_ = Tensor(x.shape());
    inv_std_.assign(channels_, 0);
    for (int c = 0; c < channels_; ++c) {
        Scalar mean = running_mean_[c];
        Scalar var = running_var_[c];
        if (mode == Mode::Train) {
            Scalar sum = 0;
            for (int n = 0; n < batch; ++n) {
                const Scalar* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            mean = sum / static_cast<Scalar>(count);
            Scalar sq = 0;
            for (int n = 0; n < batch; ++n) {
                const Scalar* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
            }
            var = sq / static_cast<Scalar>(count);
            const Scalar unbiased = count > 1 ? sq / static_cast<Scalar>(count - 1) : var;
            running_mean_[c] = (1 - momentum_) * running_mean_[c] + momentum_ * mean;
            running_var_[c] = (1 - momentum_) * running_var_[c] + momentum_ * unbiased;
        }
        const Scalar inv_std = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv_std;
        const Scalar gm = gamma_.value[c];
        const Scalar bt = beta_.value[c];
        for (int n = 0; n < batch; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const Scalar xh = (x[off + i] - mean) * inv_std;
                xhat_[off + i] = xh;
                out[off + i] = gm * xh + bt;
            }
        }
    }
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    if (!grad_out.same_shape(xhat_)) throw ShapeError("BatchNorm2d grad shape mismatch");
    const int batch = grad_out.dim(0);
    const std::size_t plane = static_cast<std::size_t>(grad_out.dim(2)) * grad_out.dim(3);
    const Scalar m = static_cast<Scalar>(plane * batch);
    Tensor grad_in(grad_out.shape());
    for (int c = 0; c < channels_; ++c) {
        Scalar sum_dy = 0;
        Scalar sum_dy_xhat = 0;
        for (int n = 0; n < batch; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += grad_out[off + i];
                sum_dy_xhat += grad_out[off + i] * xhat_[off + i];
            }
        }
        gamma_.grad[c] += sum_dy_xhat;
        beta_.grad[c] += sum_dy;
        const Scalar gm = gamma_.value[c];
        const Scalar inv_std = inv_std_[c];
        for (int n = 0; n < batch; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                if (mode_ == Mode::Train) {
                    grad_in[off + i] =
                        gm * inv_std * (grad_out[off + i] - sum_dy / m - xhat_[off + i] * sum_dy_xhat / m);
                } else {
                    grad_in[off + i] = gm * inv_std * grad_out[off + i];
                }
            }
        }
    }
    return grad_in;
}

// ---------------------------------------------------------------- activations

Tensor ReLU::forward(const Tensor& x, Mode /*mode*/) {
    output_ = x;
    for (auto& v : output_.values()) v = v > 0 ? v : Scalar{0};
    return output_;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.numel(); ++i) {
        if (!(output_[i] > 0)) g[i] = 0;
    }
    return g;
}

// Clamped so the result stays strictly inside (0, 1) in double precision.
Scalar sigmoid(Scalar z) {
    z = std::clamp(z, -36.0, 36.0);
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const Scalar e = std::exp(z);
    return e / (1.0 + e);
}

Tensor Sigmoid::forward(const Tensor& x, Mode /*mode*/) {
    output_ = x;
    for (auto& v : output_.values()) v = sigmoid(v);
    return output_;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= output_[i] * (1 - output_[i]);
    return g;
}

// ---------------------------------------------------------------- pooling

MaxPool2d::MaxPool2d(int kernel, int stride, int padding) : kernel_(kernel), stride_(stride), padding_(padding) {}

Tensor MaxPool2d::forward(const Tensor& x, Mode /*mode*/) {
    require_rank(x, 4, "MaxPool2d input");
    const int n_b = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = conv_output_size(h, kernel_, stride_, padding_);
    const int ow = conv_output_size(w, kernel_, stride_, padding_);
    if (oh < 1 || ow < 1) throw ShapeError("MaxPool2d input too small: " + x.shape_str());
    input_shape_ = x.shape();
    Tensor out({n_b, ch, oh, ow});
    argmax_.assign(out.numel(), 0);
    std::size_t o = 0;
    for (int n = 0; n < n_b; ++n) {
        for (int c = 0; c < ch; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * ch + c) * h * w;
            for (int i = 0; i < oh; ++i) {
                for (int j = 0; j < ow; ++j, ++o) {
                    Scalar best = -std::numeric_limits<Scalar>::infinity();
                    std::int64_t best_idx = -1;
                    for (int ki = 0; ki < kernel_; ++ki) {
                        const int ih = i * stride_ - padding_ + ki;
                        if (ih < 0 || ih >= h) continue;
                        for (int kj = 0; kj < kernel_; ++kj) {
                            const int iw = j * stride_ - padding_ + kj;
                            if (iw < 0 || iw >= w) continue;
                            const std::size_t idx = base + static_cast<std::size_t>(ih) * w + iw;
                            if (best_idx < 0 || x[idx] > best) {
                                best = x[idx];
                                best_idx = static_cast<std::int64_t>(idx);
                            }
                        }
                    }
                    out[o] = best;
                    argmax_[o] = best_idx;
                }
            }
        }
    }
    return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
    Tensor grad_in(input_shape_);
    for (std::size_t o = 0; o < grad_out.numel(); ++o) grad_in[static_cast<std::size_t>(argmax_[o])] += grad_out[o];
    return grad_in;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Mode /*mode*/) {
    require_rank(x, 4, "GlobalAvgPool input");
    input_shape_ = x.shape();
    const int n_b = x.dim(0), ch = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor out({n_b, ch});
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(n_b) * ch; ++nc) {
        Scalar s = 0;
        for (std::size_t i = 0; i < plane; ++i) s += x[nc * plane + i];
        out[nc] = s / static_cast<Scalar>(plane);
    }
    return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
    Tensor grad_in(input_shape_);
    const std::size_t plane = static_cast<std::size_t>(input_shape_[2]) * input_shape_[3];
    for (std::size_t nc = 0; nc < grad_out.numel(); ++nc) {
        const Scalar g = grad_out[nc] / static_cast<Scalar>(plane);
        for (std::size_t i = 0; i < plane; ++i) grad_in[nc * plane + i] = g;
    }
    return grad_in;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, Rng& rng)
    : weight_({out_features, in_features}, true), bias_(std::vector<int>{out_features}, false) {
    if (in_features < 1 || out_features < 1) throw ConfigError("invalid linear layer size");
    const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(in_features));
    uniform_fill(weight_.value, bound, rng);
    uniform_fill(bias_.value, bound, rng);
}

void Linear::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
    fn(join_name(prefix, "weight"), weight_);
    fn(join_name(prefix, "bias"), bias_);
}

Tensor Linear::forward(const Tensor& x, Mode /*mode*/) {
    require_rank(x, 2, "Linear input");
    const int in_f = weight_.value.dim(1), out_f = weight_.value.dim(0);
    if (x.dim(1) != in_f) throw ShapeError("Linear expects " + std::to_string(in_f) + " features, got " + x.shape_str());
    input_ = x;
    Tensor out({x.dim(0), out_f});
    ConstMatMap xm(x.data(), x.dim(0), in_f);
    ConstMatMap w(weight_.value.data(), out_f, in_f);
    MatMap y(out.data(), x.dim(0), out_f);
    y.noalias() = xm * w.transpose();
    for (int n = 0; n < x.dim(0); ++n) {
        for (int o = 0; o < out_f; ++o) y(n, o) += bias_.value[o];
    }
    return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
    const int in_f = weight_.value.dim(1), out_f = weight_.value.dim(0);
    const int batch = input_.dim(0);
    require_shape(grad_out, {batch, out_f}, "Linear grad");
    ConstMatMap gy(grad_out.data(), batch, out_f);
    ConstMatMap xm(input_.data(), batch, in_f);
    MatMap dw(weight_.grad.data(), out_f, in_f);
    dw.noalias() += gy.transpose() * xm;
    for (int n = 0; n < batch; ++n) {
        for (int o = 0; o < out_f; ++o) bias_.grad[o] += gy(n, o);
    }
    Tensor grad_in({batch, in_f});
    MatMap gx(grad_in.data(), batch, in_f);
    gx.noalias() = gy * ConstMatMap(weight_.value.data(), out_f, in_f);
    return grad_in;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(Scalar p, std::uint64_t seed) : p_(p), rng_(seed) {
    if (!(p >= 0 && p < 1)) throw ConfigError("dropout probability must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode) {
    active_ = mode == Mode::Train && p_ > 0;
    if (!active_) return x;
    mask_ = Tensor(x.shape());
    std::bernoulli_distribution keep(1 - p_);
    const Scalar scale = 1.0 / (1 - p_);
    Tensor out = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        mask_[i] = keep(rng_) ? scale : 0;
        out[i] *= mask_[i];
    }
    return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
    if (!active_) return grad_out;
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= mask_[i];
    return g;
}

// ---------------------------------------------------------------- LogSoftmax

Tensor log_softmax(const Tensor& logits) {
    require_rank(logits, 2, "log_softmax input");
    const int n_b = logits.dim(0), k = logits.dim(1);
    Tensor out(logits.shape());
    for (int n = 0; n < n_b; ++n) {
        const Scalar* z = logits.data() + static_cast<std::size_t>(n) * k;
        const Scalar mx = *std::max_element(z, z + k);
        Scalar s = 0;
        for (int i = 0; i < k; ++i) s += std::exp(z[i] - mx);
        const Scalar lse = mx + std::log(s);
        for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(n) * k + i] = z[i] - lse;
    }
    return out;
}

Tensor LogSoftmax::forward(const Tensor& x, Mode /*mode*/) {
    output_ = log_softmax(x);
    return output_;
}

Tensor LogSoftmax::backward(const Tensor& grad_out) {
    const int n_b = output_.dim(0), k = output_.dim(1);
    Tensor g(output_.shape());
    for (int n = 0; n < n_b; ++n) {
        const std::size_t off = static_cast<std::size_t>(n) * k;
        Scalar s = 0;
        for (int i = 0; i < k; ++i) s += grad_out[off + i];
        for (int i = 0; i < k; ++i) g[off + i] = grad_out[off + i] - std::exp(output_[off + i]) * s;
    }
    return g;
}

}  // namespace semattn::nn
