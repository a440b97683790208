#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "dfd/common.hpp"
#include "dfd/tensor.hpp"

namespace dfd::nn {

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double swish(double x) { return x * sigmoid(x); }
inline double swish_grad(double x) {
    const double s = sigmoid(x);
    return s + x * s * (1.0 - s);
}

// Exact erf form: x * Phi(x)
inline double gelu(double x) { return x * 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double gelu_grad(double x) {
    const double phi_cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
    const double phi_pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return phi_cdf + x * phi_pdf;
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline Tensor map(const Tensor& x, double (*fn)(double)) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = fn(x[i]);
    return y;
}

inline Tensor swish(const Tensor& x) { return map(x, static_cast<double (*)(double)>(swish)); }
inline Tensor gelu(const Tensor& x) { return map(x, static_cast<double (*)(double)>(gelu)); }

// ---------------------------------------------------------------------------
// Spec-level building blocks (used by the layers below and tested directly)
// ---------------------------------------------------------------------------

// Global average pool: z_c = mean over the spatial extent of channel c.
inline Tensor squeeze(const Tensor& featmap) {
    if (featmap.rank() != 3) throw invalid_input("squeeze: expected HxWxC input");
    const std::size_t h = featmap.dim(0), w = featmap.dim(1), c = featmap.dim(2);
    if (h == 0 || w == 0) throw invalid_input("squeeze: zero spatial extent");
    Tensor z = Tensor::vector(c);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t ch = 0; ch < c; ++ch) z[ch] += featmap.at(i, j, ch);
    z *= 1.0 / static_cast<double>(h * w);
    return z;
}

// Bottleneck gating: sigmoid(W2 * relu(W1 * z)). W1 is r x c, W2 is c x r.
inline Tensor excite(const Tensor& z, const Tensor& w1, const Tensor& w2) {
    const std::size_t c = z.size();
    if (w1.dim(1) != c || w2.dim(0) != c || w2.dim(1) != w1.dim(0))
        throw invalid_input("excite: weight dimensions do not match input");
    const std::size_t r = w1.dim(0);
    Tensor h = Tensor::vector(r);
    for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += w1.at(i, j) * z[j];
        h[i] = relu(acc);
    }
    Tensor gates = Tensor::vector(c);
    for (std::size_t i = 0; i < c; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < r; ++j) acc += w2.at(i, j) * h[j];
        gates[i] = sigmoid(acc);
    }
    return gates;
}

// Per-site channel normalization: (x - mu) / sqrt(var + eps) * gamma + beta,
// with mu/var taken across channels.
inline Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                  double eps) {
    const std::size_t c = x.size();
    if (c == 0 || eps <= 0.0) throw invalid_input("layer_norm_channels: bad input");
    double mu = 0.0;
    for (std::size_t i = 0; i < c; ++i) mu += x[i];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t i = 0; i < c; ++i) var += (x[i] - mu) * (x[i] - mu);
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + eps);
    Tensor y = Tensor::vector(c);
    for (std::size_t i = 0; i < c; ++i) y[i] = (x[i] - mu) * inv * gamma[i] + beta[i];
    return y;
}

// softmax(Q K^T / sqrt(d)) V.  Q is n x d, K is m x d, V is m x dv.
inline Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                   std::size_t d) {
    if (d == 0) throw invalid_config("scaled_dot_attention: head dimension must be positive");
    if (q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0))
        throw invalid_input("scaled_dot_attention: inconsistent shapes");
    const std::size_t n = q.dim(0), m = k.dim(0), dv = v.dim(1);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor out = Tensor::matrix(n, dv);
    std::vector<double> row(m);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < q.dim(1); ++t) s += q.at(i, t) * k.at(j, t);
            row[j] = s * scale;
            mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::size_t j = 0; j < m; ++j) row[j] /= z;
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t t = 0; t < dv; ++t) out.at(i, t) += row[j] * v.at(j, t);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

// Sigmoid binary cross-entropy from a single logit. Returns loss; fills
// d(loss)/d(logit).
inline double bce_with_logit(double logit, int label, double* dlogit) {
    const double p = sigmoid(logit);
    const double eps = 1e-12;
    const double loss = label == 1 ? -std::log(p + eps) : -std::log(1.0 - p + eps);
    if (dlogit) *dlogit = p - static_cast<double>(label);
    return loss;
}

// Softmax cross-entropy; fills d(loss)/d(logits).
inline double softmax_ce(const std::vector<double>& logits, int label,
                         std::vector<double>* dlogits) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw invalid_input("softmax_ce: label out of range");
    const std::vector<double> p = softmax(logits);
    const double loss = -std::log(p[static_cast<std::size_t>(label)] + 1e-12);
    if (dlogits) {
        dlogits->assign(p.begin(), p.end());
        (*dlogits)[static_cast<std::size_t>(label)] -= 1.0;
    }
    return loss;
}

// 1/2 CE(softmax(Zs), y) + 1/2 CE(softmax(Zs), argmax(Zt))
inline double hard_distill_loss(const std::vector<double>& student_logits,
                                const std::vector<double>& teacher_logits, int label,
                                std::vector<double>* dlogits) {
    if (student_logits.size() != teacher_logits.size())
        throw invalid_input("hard_distill_loss: class count mismatch");
    int teacher_label = 0;
    for (std::size_t i = 1; i < teacher_logits.size(); ++i)
        if (teacher_logits[i] > teacher_logits[static_cast<std::size_t>(teacher_label)])
            teacher_label = static_cast<int>(i);
    std::vector<double> g1, g2;
    const double l1 = softmax_ce(student_logits, label, dlogits ? &g1 : nullptr);
    const double l2 = softmax_ce(student_logits, teacher_label, dlogits ? &g2 : nullptr);
    if (dlogits) {
        dlogits->resize(student_logits.size());
        for (std::size_t i = 0; i < dlogits->size(); ++i)
            (*dlogits)[i] = 0.5 * g1[i] + 0.5 * g2[i];
    }
    return 0.5 * l1 + 0.5 * l2;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    // Accumulates parameter gradients and returns the input gradient.
    virtual Tensor backward(const Tensor& gy) = 0;
    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> grads() { return {}; }
};

// Uniform fan-in scaled initialization.
inline void init_uniform(Tensor& w, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = dist(rng);
}

class Dense : public Layer {
public:
    Dense(std::size_t in, std::size_t out, std::mt19937_64& rng)
        : w_(Tensor::matrix(out, in)), b_(Tensor::vector(out)),
          gw_(Tensor::matrix(out, in)), gb_(Tensor::vector(out)) {
        init_uniform(w_, in, rng);
        init_uniform(b_, in, rng);
    }

    Tensor forward(const Tensor& x) override {
        x_ = x;
        const std::size_t out = w_.dim(0), in = w_.dim(1);
        Tensor y = Tensor::vector(out);
        for (std::size_t i = 0; i < out; ++i) {
            double acc = b_[i];
            for (std::size_t j = 0; j < in; ++j) acc += w_.at(i, j) * x[j];
            y[i] = acc;
        }
        return y;
    }

    Tensor backward(const Tensor& gy) override {
        const std::size_t out = w_.dim(0), in = w_.dim(1);
        Tensor gx = Tensor::vector(in);
        for (std::size_t i = 0; i < out; ++i) {
            gb_[i] += gy[i];
            for (std::size_t j = 0; j < in; ++j) {
                gw_.at(i, j) += gy[i] * x_[j];
                gx[j] += w_.at(i, j) * gy[i];
            }
        }
        return gx;
    }

    std::vector<Tensor*> params() override { return {&w_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }

private:
    Tensor w_, b_, gw_, gb_, x_;
};

// 2-D convolution on HWC maps. stride==kernel with no padding doubles as a
// patchify stem; otherwise zero "same" padding is used for odd kernels.
class Conv2D : public Layer {
public:
    Conv2D(std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t stride,
           bool same_pad, std::mt19937_64& rng)
        : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), same_pad_(same_pad),
          w_(Tensor({out_c, k, k * in_c})), b_(Tensor::vector(out_c)),
          gw_(Tensor({out_c, k, k * in_c})), gb_(Tensor::vector(out_c)) {
        init_uniform(w_, k * k * in_c, rng);
        init_uniform(b_, k * k * in_c, rng);
    }

    Tensor forward(const Tensor& x) override {
        x_ = x;
        const std::size_t h = x.dim(0), w = x.dim(1);
        const long pad = same_pad_ ? static_cast<long>(k_ / 2) : 0;
        const std::size_t oh = same_pad_ ? (h + stride_ - 1) / stride_ : (h - k_) / stride_ + 1;
        const std::size_t ow = same_pad_ ? (w + stride_ - 1) / stride_ : (w - k_) / stride_ + 1;
        Tensor y = Tensor::hwc(oh, ow, out_c_);
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                for (std::size_t oc = 0; oc < out_c_; ++oc) {
                    double acc = b_[oc];
                    for (std::size_t ky = 0; ky < k_; ++ky) {
                        const long iy = static_cast<long>(oy * stride_ + ky) - pad;
                        if (iy < 0 || iy >= static_cast<long>(h)) continue;
                        for (std::size_t kx = 0; kx < k_; ++kx) {
                            const long ix = static_cast<long>(ox * stride_ + kx) - pad;
                            if (ix < 0 || ix >= static_cast<long>(w)) continue;
                            for (std::size_t ic = 0; ic < in_c_; ++ic)
                                acc += wt(oc, ky, kx, ic) *
                                       x.at(static_cast<std::size_t>(iy),
                                            static_cast<std::size_t>(ix), ic);
                        }
                    }
                    y.at(oy, ox, oc) = acc;
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) override {
        const std::size_t h = x_.dim(0), w = x_.dim(1);
        const long pad = same_pad_ ? static_cast<long>(k_ / 2) : 0;
        Tensor gx = Tensor::hwc(h, w, in_c_);
        for (std::size_t oy = 0; oy < gy.dim(0); ++oy) {
            for (std::size_t ox = 0; ox < gy.dim(1); ++ox) {
                for (std::size_t oc = 0; oc < out_c_; ++oc) {
                    const double g = gy.at(oy, ox, oc);
                    gb_[oc] += g;
                    for (std::size_t ky = 0; ky < k_; ++ky) {
                        const long iy = static_cast<long>(oy * stride_ + ky) - pad;
                        if (iy < 0 || iy >= static_cast<long>(h)) continue;
                        for (std::size_t kx = 0; kx < k_; ++kx) {
                            const long ix = static_cast<long>(ox * stride_ + kx) - pad;
                            if (ix < 0 || ix >= static_cast<long>(w)) continue;
                            for (std::size_t ic = 0; ic < in_c_; ++ic) {
                                gwt(oc, ky, kx, ic) +=
                                    g * x_.at(static_cast<std::size_t>(iy),
                                              static_cast<std::size_t>(ix), ic);
                                gx.at(static_cast<std::size_t>(iy),
                                      static_cast<std::size_t>(ix), ic) +=
                                    g * wt(oc, ky, kx, ic);
                            }
                        }
                    }
                }
            }
        }
        return gx;
    }

    std::vector<Tensor*> params() override { return {&w_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }

private:
    double& wt(std::size_t oc, std::size_t ky, std::size_t kx, std::size_t ic) {
        return w_.at(oc, ky, kx * in_c_ + ic);
    }
    double& gwt(std::size_t oc, std::size_t ky, std::size_t kx, std::size_t ic) {
        return gw_.at(oc, ky, kx * in_c_ + ic);
    }

    std::size_t in_c_, out_c_, k_, stride_;
    bool same_pad_;
    Tensor w_, b_, gw_, gb_, x_;
};

// Depthwise convolution, zero "same" padding, stride 1.
class DepthwiseConv2D : public Layer {
public:
    DepthwiseConv2D(std::size_t c, std::size_t k, std::mt19937_64& rng)
        : c_(c), k_(k), w_(Tensor({c, k, k})), b_(Tensor::vector(c)),
          gw_(Tensor({c, k, k})), gb_(Tensor::vector(c)) {
        init_uniform(w_, k * k, rng);
        init_uniform(b_, k * k, rng);
    }

    Tensor forward(const Tensor& x) override {
        x_ = x;
        const std::size_t h = x.dim(0), w = x.dim(1);
        const long pad = static_cast<long>(k_ / 2);
        Tensor y = Tensor::hwc(h, w, c_);
        for (std::size_t oy = 0; oy < h; ++oy)
            for (std::size_t ox = 0; ox < w; ++ox)
                for (std::size_t c = 0; c < c_; ++c) {
                    double acc = b_[c];
                    for (std::size_t ky = 0; ky < k_; ++ky) {
                        const long iy = static_cast<long>(oy + ky) - pad;
                        if (iy < 0 || iy >= static_cast<long>(h)) continue;
                        for (std::size_t kx = 0; kx < k_; ++kx) {
                            const long ix = static_cast<long>(ox + kx) - pad;
                            if (ix < 0 || ix >= static_cast<long>(w)) continue;
                            acc += w_.at(c, ky, kx) *
                                   x.at(static_cast<std::size_t>(iy),
                                        static_cast<std::size_t>(ix), c);
                        }
                    }
                    y.at(oy, ox, c) = acc;
                }
        return y;
    }

    Tensor backward(const Tensor& gy) override {
        const std::size_t h = x_.dim(0), w = x_.dim(1);
        const long pad = static_cast<long>(k_ / 2);
        Tensor gx = Tensor::hwc(h, w, c_);
        for (std::size_t oy = 0; oy < h; ++oy)
            for (std::size_t ox = 0; ox < w; ++ox)
                for (std::size_t c = 0; c < c_; ++c) {
                    const double g = gy.at(oy, ox, c);
                    gb_[c] += g;
                    for (std::size_t ky = 0; ky < k_; ++ky) {
                        const long iy = static_cast<long>(oy + ky) - pad;
                        if (iy < 0 || iy >= static_cast<long>(h)) continue;
                        for (std::size_t kx = 0; kx < k_; ++kx) {
                            const long ix = static_cast<long>(ox + kx) - pad;
                            if (ix < 0 || ix >= static_cast<long>(w)) continue;
                            gw_.at(c, ky, kx) += g * x_.at(static_cast<std::size_t>(iy),
                                                           static_cast<std::size_t>(ix), c);
                            gx.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix),
                                  c) += g * w_.at(c, ky, kx);
                        }
                    }
                }
        return gx;
    }

    std::vector<Tensor*> params() override { return {&w_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }

private:
    std::size_t c_, k_;
    Tensor w_, b_, gw_, gb_, x_;
};

// 1x1 convolution (shared per-site linear map across channels).
class PointwiseConv : public Layer {
public:
    PointwiseConv(std::size_t in_c, std::size_t out_c, std::mt19937_64& rng)
        : in_c_(in_c), out_c_(out_c), w_(Tensor::matrix(out_c, in_c)), b_(Tensor::vector(out_c)),
          gw_(Tensor::matrix(out_c, in_c)), gb_(Tensor::vector(out_c)) {
        init_uniform(w_, in_c, rng);
        init_uniform(b_, in_c, rng);
    }

    Tensor forward(const Tensor& x) override {
        x_ = x;
        Tensor y = Tensor::hwc(x.dim(0), x.dim(1), out_c_);
        for (std::size_t i = 0; i < x.dim(0); ++i)
            for (std::size_t j = 0; j < x.dim(1); ++j)
                for (std::size_t oc = 0; oc < out_c_; ++oc) {
                    double acc = b_[oc];
                    for (std::size_t ic = 0; ic < in_c_; ++ic)
                        acc += w_.at(oc, ic) * x.at(i, j, ic);
                    y.at(i, j, oc) = acc;
                }
        return y;
    }

    Tensor backward(const Tensor& gy) override {
        Tensor gx = Tensor::hwc(x_.dim(0), x_.dim(1), in_c_);
        for (std::size_t i = 0; i < x_.dim(0); ++i)
            for (std::size_t j = 0; j < x_.dim(1); ++j)
                for (std::size_t oc = 0; oc < out_c_; ++oc) {
                    const double g = gy.at(i, j, oc);
                    gb_[oc] += g;
                    for (std::size_t ic = 0; ic < in_c_; ++ic) {
                        gw_.at(oc, ic) += g * x_.at(i, j, ic);
                        gx.at(i, j, ic) += g * w_.at(oc, ic);
                    }
                }
        return gx;
    }

    std::vector<Tensor*> params() override { return {&w_, &b_}; }
    std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }

private:
    std::size_t in_c_, out_c_;
    Tensor w_, b_, gw_, gb_, x_;
};

class Activation : public Layer {
public:
    enum Kind { kSwish, kGelu, kRelu };
    explicit Activation(Kind kind) : kind_(kind) {}

    Tensor forward(const Tensor& x) override {
        x_ = x;
        Tensor y = x;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = apply(x[i]);
        return y;
    }
    Tensor backward(const Tensor& gy) override {
        Tensor gx = gy;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = gy[i] * grad(x_[i]);
        return gx;
    }

private:
    double apply(double v) const {
        switch (kind_) {
            case kSwish: return swish(v);
            case kGelu: return gelu(v);
            default: return relu(v);
        }
    }
    double grad(double v) const {
        switch (kind_) {
            case kSwish: return swish_grad(v);
            case kGelu: return gelu_grad(v);
            default: return v > 0.0 ? 1.0 : 0.0;
        }
    }
    Kind kind_;
    Tensor x_;
};

class AvgPool2 : public Layer {
public:
    Tensor forward(const Tensor& x) override {
        in_h_ = x.dim(0);
        in_w_ = x.dim(1);
        const std::size_t oh = x.dim(0) / 2, ow = x.dim(1) / 2, c = x.dim(2);
        Tensor y = Tensor::hwc(oh, ow, c);
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j)
                for (std::size_t ch = 0; ch < c; ++ch)
                    y.at(i, j, ch) = 0.25 * (x.at(2 * i, 2 * j, ch) + x.at(2 * i, 2 * j + 1, ch) +
                                             x.at(2 * i + 1, 2 * j, ch) +
                                             x.at(2 * i + 1, 2 * j + 1, ch));
        return y;
    }
    Tensor backward(const Tensor& gy) override {
        const std::size_t c = gy.dim(2);
        Tensor gx = Tensor::hwc(in_h_, in_w_, c);
        for (std::size_t i = 0; i < gy.dim(0); ++i)
            for (std::size_t j = 0; j < gy.dim(1); ++j)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double g = 0.25 * gy.at(i, j, ch);
                    gx.at(2 * i, 2 * j, ch) = g;
                    gx.at(2 * i, 2 * j + 1, ch) = g;
                    gx.at(2 * i + 1, 2 * j, ch) = g;
                    gx.at(2 * i + 1, 2 * j + 1, ch) = g;
                }
        return gx;
    }

private:
    std::size_t in_h_ = 0, in_w_ = 0;
};

class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x) override {
        in_h_ = x.dim(0);
        in_w_ = x.dim(1);
        return squeeze(x);
    }
    Tensor backward(const Tensor& gy) override {
        const std::size_t c = gy.size();
        Tensor gx = Tensor::hwc(in_h_, in_w_, c);
        const double scale = 1.0 / static_cast<double>(in_h_ * in_w_);
        for (std::size_t i = 0; i < in_h_; ++i)
            for (std::size_t j = 0; j < in_w_; ++j)
                for (std::size_t ch = 0; ch < c; ++ch) gx.at(i, j, ch) = gy[ch] * scale;
        return gx;
    }

private:
    std::size_t in_h_ = 0, in_w_ = 0;
};

// Squeeze-and-excitation: channels rescaled by excite(squeeze(x)).
class SEBlock : public Layer {
public:
    SEBlock(std::size_t c, std::size_t reduction, std::mt19937_64& rng)
        : c_(c), r_(c / reduction) {
        if (r_ == 0 || c % reduction != 0)
            throw invalid_config("SEBlock: reduction must divide channel count");
        w1_ = Tensor::matrix(r_, c_);
        w2_ = Tensor::matrix(c_, r_);
        gw1_ = Tensor::matrix(r_, c_);
        gw2_ = Tensor::matrix(c_, r_);
        init_uniform(w1_, c_, rng);
        init_uniform(w2_, r_, rng);
    }

    Tensor forward(const Tensor& x) override {
        x_ = x;
        z_ = squeeze(x);
        h_ = Tensor::vector(r_);
        for (std::size_t i = 0; i < r_; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c_; ++j) acc += w1_.at(i, j) * z_[j];
            h_[i] = acc;
        }
        s_ = Tensor::vector(c_);
        for (std::size_t i = 0; i < c_; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < r_; ++j) acc += w2_.at(i, j) * relu(h_[j]);
            s_[i] = sigmoid(acc);
        }
        Tensor y = x;
        for (std::size_t i = 0; i < x.dim(0); ++i)
            for (std::size_t j = 0; j < x.dim(1); ++j)
                for (std::size_t ch = 0; ch < c_; ++ch) y.at(i, j, ch) *= s_[ch];
        return y;
    }

    Tensor backward(const Tensor& gy) override {
        const std::size_t hgt = x_.dim(0), wid = x_.dim(1);
        Tensor gx = gy;
        Tensor gs = Tensor::vector(c_);
        for (std::size_t i = 0; i < hgt; ++i)
            for (std::size_t j = 0; j < wid; ++j)
                for (std::size_t ch = 0; ch < c_; ++ch) {
                    gs[ch] += gy.at(i, j, ch) * x_.at(i, j, ch);
                    gx.at(i, j, ch) = gy.at(i, j, ch) * s_[ch];
                }
        // Through sigmoid + W2
        Tensor gh = Tensor::vector(r_);
        for (std::size_t i = 0; i < c_; ++i) {
            const double ga = gs[i] * s_[i] * (1.0 - s_[i]);
            for (std::size_t j = 0; j < r_; ++j) {
                gw2_.at(i, j) += ga * relu(h_[j]);
                gh[j] += ga * w2_.at(i, j);
            }
        }
        // Through relu + W1
        Tensor gz = Tensor::vector(c_);
        for (std::size_t i = 0; i < r_; ++i) {
            const double gr = h_[i] > 0.0 ? gh[i] : 0.0;
            for (std::size_t j = 0; j < c_; ++j) {
                gw1_.at(i, j) += gr * z_[j];
                gz[j] += gr * w1_.at(i, j);
            }
        }
        // Through squeeze
        const double scale = 1.0 / static_cast<double>(hgt * wid);
        for (std::size_t i = 0; i < hgt; ++i)
            for (std::size_t j = 0; j < wid; ++j)
                for (std::size_t ch = 0; ch < c_; ++ch) gx.at(i, j, ch) += gz[ch] * scale;
        return gx;
    }

    std::vector<Tensor*> params() override { return {&w1_, &w2_}; }
    std::vector<Tensor*> grads() override { return {&gw1_, &gw2_}; }

private:
    std::size_t c_, r_;
    Tensor w1_, w2_, gw1_, gw2_;
    Tensor x_, z_, h_, s_;
};

// Channel LayerNorm applied at every spatial site of an HWC map.
class ChannelLayerNorm : public Layer {
public:
    explicit ChannelLayerNorm(std::size_t c, double eps = 1e-6)
        : c_(c), eps_(eps), gamma_(Tensor::vector(c, 1.0)), beta_(Tensor::vector(c)),
          ggamma_(Tensor::vector(c)), gbeta_(Tensor::vector(c)) {}

    Tensor forward(const Tensor& x) override {
        x_ = x;
        Tensor y = x;
        const std::size_t n = x.dim(0) * x.dim(1);
        mu_.assign(n, 0.0);
        inv_.assign(n, 0.0);
        std::size_t site = 0;
        for (std::size_t i = 0; i < x.dim(0); ++i)
            for (std::size_t j = 0; j < x.dim(1); ++j, ++site) {
                double mu = 0.0;
                for (std::size_t ch = 0; ch < c_; ++ch) mu += x.at(i, j, ch);
                mu /= static_cast<double>(c_);
                double var = 0.0;
                for (std::size_t ch = 0; ch < c_; ++ch) {
                    const double d = x.at(i, j, ch) - mu;
                    var += d * d;
                }
                var /= static_cast<double>(c_);
                const double inv = 1.0 / std::sqrt(var + eps_);
                mu_[site] = mu;
                inv_[site] = inv;
                for (std::size_t ch = 0; ch < c_; ++ch)
                    y.at(i, j, ch) = (x.at(i, j, ch) - mu) * inv * gamma_[ch] + beta_[ch];
            }
        return y;
    }

    Tensor backward(const Tensor& gy) override {
        Tensor gx = Tensor::hwc(x_.dim(0), x_.dim(1), c_);
        std::size_t site = 0;
        const double n = static_cast<double>(c_);
        for (std::size_t i = 0; i < x_.dim(0); ++i)
            for (std::size_t j = 0; j < x_.dim(1); ++j, ++site) {
                const double mu = mu_[site], inv = inv_[site];
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::size_t ch = 0; ch < c_; ++ch) {
                    const double xhat = (x_.at(i, j, ch) - mu) * inv;
                    const double g = gy.at(i, j, ch);
                    ggamma_[ch] += g * xhat;
                    gbeta_[ch] += g;
                    const double gg = g * gamma_[ch];
                    sum_g += gg;
                    sum_gx += gg * xhat;
                }
                for (std::size_t ch = 0; ch < c_; ++ch) {
                    const double xhat = (x_.at(i, j, ch) - mu) * inv;
                    const double gg = gy.at(i, j, ch) * gamma_[ch];
                    gx.at(i, j, ch) = inv * (gg - sum_g / n - xhat * sum_gx / n);
                }
            }
        return gx;
    }

    std::vector<Tensor*> params() override { return {&gamma_, &beta_}; }
    std::vector<Tensor*> grads() override { return {&ggamma_, &gbeta_}; }

private:
    std::size_t c_;
    double eps_;
    Tensor gamma_, beta_, ggamma_, gbeta_, x_;
    std::vector<double> mu_, inv_;
};

// Single-head self-attention over a token matrix (N x dm) with residual:
// out = X + attention(X Wq, X Wk, X Wv).
class SelfAttention : public Layer {
public:
    SelfAttention(std::size_t dm, std::mt19937_64& rng)
        : dm_(dm), wq_(Tensor::matrix(dm, dm)), wk_(Tensor::matrix(dm, dm)),
          wv_(Tensor::matrix(dm, dm)), gwq_(Tensor::matrix(dm, dm)),
          gwk_(Tensor::matrix(dm, dm)), gwv_(Tensor::matrix(dm, dm)) {
        init_uniform(wq_, dm, rng);
        init_uniform(wk_, dm, rng);
        init_uniform(wv_, dm, rng);
    }

    Tensor forward(const Tensor& x) override {
        x_ = x;
        const std::size_t n = x.dim(0);
        q_ = matmul(x, wq_);
        k_ = matmul(x, wk_);
        v_ = matmul(x, wv_);
        attn_ = Tensor::matrix(n, n);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dm_));
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t t = 0; t < dm_; ++t) s += q_.at(i, t) * k_.at(j, t);
                attn_.at(i, j) = s * scale;
                mx = std::max(mx, attn_.at(i, j));
            }
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                attn_.at(i, j) = std::exp(attn_.at(i, j) - mx);
                z += attn_.at(i, j);
            }
            for (std::size_t j = 0; j < n; ++j) attn_.at(i, j) /= z;
        }
        Tensor y = x;  // residual
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < dm_; ++t) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += attn_.at(i, j) * v_.at(j, t);
                y.at(i, t) += acc;
            }
        return y;
    }

    Tensor backward(const Tensor& gy) override {
        const std::size_t n = x_.dim(0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dm_));
        Tensor gv = Tensor::matrix(n, dm_);
        Tensor gscore = Tensor::matrix(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            // ga = gy_i V^T ; gscore_i = a_i o (ga_i - <ga_i, a_i>)
            std::vector<double> ga(n, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t t = 0; t < dm_; ++t) {
                    ga[j] += gy.at(i, t) * v_.at(j, t);
                    gv.at(j, t) += attn_.at(i, j) * gy.at(i, t);
                }
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += ga[j] * attn_.at(i, j);
            for (std::size_t j = 0; j < n; ++j)
                gscore.at(i, j) = attn_.at(i, j) * (ga[j] - dot);
        }
        Tensor gq = Tensor::matrix(n, dm_);
        Tensor gk = Tensor::matrix(n, dm_);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double g = gscore.at(i, j) * scale;
                for (std::size_t t = 0; t < dm_; ++t) {
                    gq.at(i, t) += g * k_.at(j, t);
                    gk.at(j, t) += g * q_.at(i, t);
                }
            }
        Tensor gx = gy;  // residual path
        accumulate_proj(gq, wq_, gwq_, gx);
        accumulate_proj(gk, wk_, gwk_, gx);
        accumulate_proj(gv, wv_, gwv_, gx);
        return gx;
    }

    std::vector<Tensor*> params() override { return {&wq_, &wk_, &wv_}; }
    std::vector<Tensor*> grads() override { return {&gwq_, &gwk_, &gwv_}; }

private:
    Tensor matmul(const Tensor& x, const Tensor& w) const {
        const std::size_t n = x.dim(0);
        Tensor y = Tensor::matrix(n, dm_);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < dm_; ++t) {
                double acc = 0.0;
                for (std::size_t u = 0; u < dm_; ++u) acc += x.at(i, u) * w.at(u, t);
                y.at(i, t) = acc;
            }
        return y;
    }
    // gx += gproj W^T ; gW += X^T gproj
    void accumulate_proj(const Tensor& gproj, const Tensor& w, Tensor& gw, Tensor& gx) {
        const std::size_t n = x_.dim(0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < dm_; ++t) {
                const double g = gproj.at(i, t);
                for (std::size_t u = 0; u < dm_; ++u) {
                    gw.at(u, t) += x_.at(i, u) * g;
                    gx.at(i, u) += g * w.at(u, t);
                }
            }
    }

    std::size_t dm_;
    Tensor wq_, wk_, wv_, gwq_, gwk_, gwv_;
    Tensor x_, q_, k_, v_, attn_;
};

// ConvNeXt-style residual block: depthwise 7x7 -> channel LayerNorm ->
// pointwise expand 4x -> GELU -> pointwise project, plus identity shortcut.
class InvertedResidualBlock : public Layer {
public:
    InvertedResidualBlock(std::size_t c, std::mt19937_64& rng)
        : dw_(c, 7, rng), ln_(c), expand_(c, 4 * c, rng), act_(Activation::kGelu),
          project_(4 * c, c, rng) {}

    Tensor forward(const Tensor& x) override {
        Tensor y = project_.forward(act_.forward(expand_.forward(ln_.forward(dw_.forward(x)))));
        y += x;
        return y;
    }
    Tensor backward(const Tensor& gy) override {
        Tensor g = dw_.backward(ln_.backward(expand_.backward(act_.backward(project_.backward(gy)))));
        g += gy;  // shortcut
        return g;
    }
    std::vector<Tensor*> params() override {
        return collect({&dw_, &ln_, &expand_, &project_}, true);
    }
    std::vector<Tensor*> grads() override {
        return collect({&dw_, &ln_, &expand_, &project_}, false);
    }

private:
    std::vector<Tensor*> collect(std::vector<Layer*> layers, bool p) {
        std::vector<Tensor*> out;
        for (Layer* l : layers) {
            auto v = p ? l->params() : l->grads();
            out.insert(out.end(), v.begin(), v.end());
        }
        return out;
    }
    DepthwiseConv2D dw_;
    ChannelLayerNorm ln_;
    PointwiseConv expand_;
    Activation act_;
    PointwiseConv project_;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

class Adam {
public:
    Adam(std::vector<Tensor*> params, std::vector<Tensor*> grads, double lr,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), grads_(std::move(grads)), lr_(lr), beta1_(beta1),
          beta2_(beta2), eps_(eps) {
        for (Tensor* p : params_) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    }

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

    void zero_gradients() {
        for (Tensor* g : grads_) g->fill(0.0);
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            Tensor& p = *params_[k];
            const Tensor& g = *grads_[k];
            Tensor& m = m_[k];
            Tensor& v = v_[k];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
                p[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
        }
    }

private:
    std::vector<Tensor*> params_, grads_;
    std::vector<Tensor> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace dfd::nn
