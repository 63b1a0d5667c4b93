#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "semattn/nn/module.hpp"

namespace semattn::testing {

struct GradcheckResult {
    double max_rel = 0;
    std::string worst;
    int checked = 0;
};

// Relative error with a floor so entries that are zero on both sides do not
// divide by zero.
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Central difference at `i`. A large gap between the one-sided slopes means
// the step crossed a ReLU or max-pool kink; the step then shrinks until the
// slopes agree or reaches 1e-8.
inline double numeric_derivative(Scalar& x, const std::function<double()>& loss, double eps) {
    const Scalar saved = x;
    const double f0 = loss();
    double central = 0;
    for (double h = eps; h >= 1e-8 * 0.999; h /= 10) {
        x = saved + h;
        const double up = loss();
        x = saved - h;
        const double down = loss();
        x = saved;
        const double fwd = (up - f0) / h, bwd = (f0 - down) / h;
        central = (up - down) / (2 * h);
        if (std::abs(fwd - bwd) <= 1e-4 * std::max({std::abs(fwd), std::abs(bwd), 1e-4})) break;
    }
    return central;
}

// Central differences of `loss` against the gradients `analytic` leaves in
// each parameter's grad. At most `per_tensor` randomly chosen entries per
// tensor are probed (all of them when the tensor is smaller).
inline GradcheckResult gradcheck(const std::vector<std::pair<std::string, nn::Parameter*>>& params,
                                 const std::function<double()>& loss, const std::function<void()>& analytic,
                                 int per_tensor, std::uint64_t seed, double eps = 1e-6) {
    for (auto& [name, p] : params) p->grad.fill(0);
    analytic();
    std::mt19937_64 rng(seed);
    GradcheckResult out;
    for (auto& [name, p] : params) {
        const Tensor grad = p->grad;
        std::vector<std::size_t> idx(p->value.numel());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        if (static_cast<int>(idx.size()) > per_tensor) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(static_cast<std::size_t>(per_tensor));
        }
        for (std::size_t i : idx) {
            const double rel = relative_error(grad[i], numeric_derivative(p->value[i], loss, eps));
            ++out.checked;
            if (rel > out.max_rel) {
                out.max_rel = rel;
                out.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return out;
}

// Same probe for the input of a computation.
inline GradcheckResult gradcheck_input(Tensor& input, const Tensor& analytic_grad, const std::function<double()>& loss,
                                       int count, std::uint64_t seed, double eps = 1e-6) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, input.numel() - 1);
    GradcheckResult out;
    for (int n = 0; n < count; ++n) {
        const std::size_t i = pick(rng);
        const double rel = relative_error(analytic_grad[i], numeric_derivative(input[i], loss, eps));
        ++out.checked;
        if (rel > out.max_rel) {
            out.max_rel = rel;
            out.worst = "input[" + std::to_string(i) + "]";
        }
    }
    return out;
}

// Fixed random projection loss sum(r * y) used to turn a tensor-valued layer
// into a scalar.
inline Tensor projection(const std::vector<int>& shape, std::uint64_t seed) {
    Tensor r(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : r.values()) v = u(rng);
    return r;
}

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

inline std::vector<std::pair<std::string, nn::Parameter*>> collect(nn::Module& m) {
    std::vector<std::pair<std::string, nn::Parameter*>> out;
    m.visit_parameters("", [&](const std::string& name, nn::Parameter& p) { out.emplace_back(name, &p); });
    return out;
}

inline Tensor random_tensor(const std::vector<int>& shape, std::uint64_t seed, double lo = -1, double hi = 1) {
    Tensor t(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

}  // namespace semattn::testing
