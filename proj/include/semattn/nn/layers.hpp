#pragma once

#include <cstdint>
#include <vector>

#include "semattn/nn/module.hpp"

namespace semattn::nn {

struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 0;
    bool bias = false;
};

int conv_output_size(int input, int kernel, int stride, int padding);

// 2-D convolution over NCHW input via im2col + GEMM.
class Conv2d : public Layer {
 public:
    Conv2d(ConvSpec spec, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const ParamVisitor& fn) override;

    const ConvSpec& spec() const { return spec_; }
    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

 private:
    bool pointwise() const { return spec_.kernel == 1 && spec_.stride == 1 && spec_.padding == 0; }

    ConvSpec spec_;
    Parameter weight_;  // [out, in, k, k]
    Parameter bias_;    // [out] when spec_.bias
    Tensor input_;
};

class BatchNorm2d : public Layer {
 public:
    explicit BatchNorm2d(int channels, Scalar momentum = 0.1, Scalar eps = 1e-5);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const ParamVisitor& fn) override;
    void visit_buffers(const std::string& prefix, const BufferVisitor& fn) override;

    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }

 private:
    int channels_;
    Scalar momentum_;
    Scalar eps_;
    Parameter gamma_;
    Parameter beta_;
    Tensor running_mean_;
    Tensor running_var_;
    // Backward cache.
    Mode mode_ = Mode::Eval;
    Tensor xhat_;
    std::vector<Scalar> inv_std_;
};

class ReLU : public Layer {
 public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

 private:
    Tensor output_;
};

class Sigmoid : public Layer {
 public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

 private:
    Tensor output_;
};

// Max pooling; padded positions never win. Ties resolve to the first maximal
// position in row-major window order, which is also where the gradient goes.
class MaxPool2d : public Layer {
 public:
    MaxPool2d(int kernel, int stride, int padding = 0);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

 private:
    int kernel_, stride_, padding_;
    std::vector<int> input_shape_;
    std::vector<std::int64_t> argmax_;
};

// NCHW -> NC spatial mean.
class GlobalAvgPool : public Layer {
 public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

 private:
    std::vector<int> input_shape_;
};

// NF -> NO affine map, weight [out, in].
class Linear : public Layer {
 public:
    Linear(int in_features, int out_features, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const ParamVisitor& fn) override;

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

 private:
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

// Inverted dropout; identity in eval mode.
class Dropout : public Layer {
 public:
    Dropout(Scalar p, std::uint64_t seed);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

    void reseed(std::uint64_t seed) { rng_.seed(seed); }
    Scalar probability() const { return p_; }

 private:
    Scalar p_;
    Rng rng_;
    Tensor mask_;
    bool active_ = false;
};

// Row-wise log-softmax over NK.
class LogSoftmax : public Layer {
 public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

 private:
    Tensor output_;
};

Tensor log_softmax(const Tensor& logits);
Scalar sigmoid(Scalar z);

}  // namespace semattn::nn
