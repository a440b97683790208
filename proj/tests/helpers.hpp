#pragma once

// Shared test utilities: central-difference gradient checks against the
// analytic backward passes, plus small metric oracles.

#include <cmath>
#include <random>
#include <vector>

#include "dfd/nn.hpp"

namespace dfd::testutil {

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
    Tensor t{std::move(shape)};
    std::uniform_real_distribution<double> uni(lo, hi);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = uni(rng);
    return t;
}

// Checks d(sum(w . layer(x)))/dx and the parameter gradients of `layer`
// against central differences. Returns the maximum relative error, where
// relative means |analytic - numeric| / max(1, |analytic|, |numeric|).
inline double layer_grad_check(nn::Layer& layer, const Tensor& x, std::mt19937_64& rng,
                               double h = 1e-5) {
    Tensor y0 = layer.forward(x);
    const Tensor w = random_tensor(y0.shape(), rng);
    auto loss_of = [&](const Tensor& in) {
        const Tensor y = layer.forward(in);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
        return s;
    };

    for (Tensor* g : layer.grads()) g->fill(0.0);
    layer.forward(x);
    const Tensor gx = layer.backward(w);

    double max_rel = 0.0;
    auto rel = [](double a, double n) {
        return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
    };

    Tensor xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        const double up = loss_of(xp);
        xp[i] = x[i] - h;
        const double dn = loss_of(xp);
        xp[i] = x[i];
        max_rel = std::max(max_rel, rel(gx[i], (up - dn) / (2.0 * h)));
    }

    const auto params = layer.params();
    const auto grads = layer.grads();
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double orig = p[i];
            p[i] = orig + h;
            const double up = loss_of(x);
            p[i] = orig - h;
            const double dn = loss_of(x);
            p[i] = orig;
            max_rel = std::max(max_rel, rel((*grads[k])[i], (up - dn) / (2.0 * h)));
        }
    }
    // Restore the forward cache for any caller that keeps using the layer.
    layer.forward(x);
    return max_rel;
}

inline double scalar_grad_check(double (*fn)(double), double (*grad)(double), double x,
                                double h = 1e-6) {
    const double numeric = (fn(x + h) - fn(x - h)) / (2.0 * h);
    const double analytic = grad(x);
    return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

}  // namespace dfd::testutil
