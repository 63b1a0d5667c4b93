#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "semattn/tensor.hpp"

namespace semattn::nn {

enum class Mode { Train, Eval };

using Rng = std::mt19937_64;

struct Parameter {
    Parameter() = default;
    Parameter(std::vector<int> shape, bool decay) : value(shape), grad(std::move(shape)), decay(decay) {}

    Tensor value;
    Tensor grad;
    // Weight decay applies to conv/linear weights only.
    bool decay = true;
};

using ParamVisitor = std::function<void(const std::string& name, Parameter& param)>;
using BufferVisitor = std::function<void(const std::string& name, Tensor& buffer)>;

std::string join_name(const std::string& prefix, const std::string& name);

// Anything owning learnable parameters or persistent buffers.
class Module {
 public:
    virtual ~Module() = default;

    virtual void visit_parameters(const std::string& prefix, const ParamVisitor& fn) = 0;
    virtual void visit_buffers(const std::string& /*prefix*/, const BufferVisitor& /*fn*/) {}

    void zero_grad();
    std::size_t parameter_count();
};

// Single-input, single-output differentiable layer. `forward` caches what
// `backward` needs; `backward` accumulates parameter gradients and returns
// the gradient with respect to the input of the most recent forward call.
class Layer : public Module {
 public:
    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;

    void visit_parameters(const std::string& /*prefix*/, const ParamVisitor& /*fn*/) override {}

    // When false the layer may skip computing the input gradient and return
    // an empty tensor from backward (used for the first layer of a network).
    virtual void set_propagate_input_grad(bool enabled) { propagate_input_grad_ = enabled; }
    bool propagate_input_grad() const { return propagate_input_grad_; }

 protected:
    bool propagate_input_grad_ = true;
};

using LayerPtr = std::unique_ptr<Layer>;

class Sequential : public Layer {
 public:
    Sequential() = default;

    template <typename L, typename... Args>
    L& add(std::string name, Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        layers_.emplace_back(std::move(name), std::move(layer));
        return ref;
    }
    void add_layer(std::string name, LayerPtr layer) { layers_.emplace_back(std::move(name), std::move(layer)); }

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void visit_parameters(const std::string& prefix, const ParamVisitor& fn) override;
    void visit_buffers(const std::string& prefix, const BufferVisitor& fn) override;
    void set_propagate_input_grad(bool enabled) override;

    std::size_t size() const { return layers_.size(); }
    Layer& at(std::size_t i) { return *layers_.at(i).second; }
    const std::string& name_at(std::size_t i) const { return layers_.at(i).first; }

 private:
    std::vector<std::pair<std::string, LayerPtr>> layers_;
};

// Kaiming-uniform (fan-in, ReLU gain): U(-sqrt(6/fan_in), sqrt(6/fan_in)).
void kaiming_uniform(Tensor& t, int fan_in, Rng& rng);
void uniform_fill(Tensor& t, Scalar bound, Rng& rng);

}  // namespace semattn::nn
