#include "semattn/nn/module.hpp"

#include <cmath>

namespace semattn::nn {

std::string join_name(const std::string& prefix, const std::string& name) {
    if (prefix.empty()) return name;
    if (name.empty()) return prefix;
    return prefix + "." + name;
}

void Module::zero_grad() {
    visit_parameters("", [](const std::string&, Parameter& p) { p.grad.fill(0); });
}

std::size_t Module::parameter_count() {
    std::size_t n = 0;
    visit_parameters("", [&n](const std::string&, Parameter& p) { n += p.value.numel(); });
    return n;
}

Tensor Sequential::forward(const Tensor& x, Mode mode) {
    if (layers_.empty()) return x;
    Tensor h = layers_.front().second->forward(x, mode);
    for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i].second->forward(h, mode);
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->backward(g);
    return g;
}

void Sequential::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
    for (auto& [name, layer] : layers_) layer->visit_parameters(join_name(prefix, name), fn);
}

void Sequential::visit_buffers(const std::string& prefix, const BufferVisitor& fn) {
    for (auto& [name, layer] : layers_) layer->visit_buffers(join_name(prefix, name), fn);
}

void Sequential::set_propagate_input_grad(bool enabled) {
    Layer::set_propagate_input_grad(enabled);
    if (!layers_.empty()) layers_.front().second->set_propagate_input_grad(enabled);
}

void kaiming_uniform(Tensor& t, int fan_in, Rng& rng) {
    uniform_fill(t, std::sqrt(6.0 / static_cast<Scalar>(fan_in)), rng);
}

void uniform_fill(Tensor& t, Scalar bound, Rng& rng) {
    std::uniform_real_distribution<Scalar> dist(-bound, bound);
    for (auto& v : t.values()) v = dist(rng);
}

}  // namespace semattn::nn
