#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "dfd/augment.hpp"
#include "dfd/image.hpp"
#include "dfd/nn.hpp"
#include "dfd/wavelet.hpp"

namespace dfd {

enum class Preproc { plain, wavelet };

// Binary classifier over preprocessed tensors. Fake is class 1. Parameters
// are exposed as a flat double vector; get/set round-trips bit-exactly,
// which the stage warm-start relies on.
class Backbone {
public:
    virtual ~Backbone() = default;

    virtual std::string name() const = 0;
    virtual std::size_t input_size() const = 0;
    virtual Preproc preprocessor() const = 0;
    virtual int head_arity() const = 0;

    virtual std::vector<double> logits(const Tensor& x) = 0;

    // One backward pass for (x, label). Parameter gradients are scaled by
    // `scale` and accumulated; the input gradient (of the unscaled loss) is
    // written to *input_grad when requested. Returns the loss value.
    virtual double backprop(const Tensor& x, int label, double scale, Tensor* input_grad,
                            const std::vector<double>* teacher_logits) = 0;

    virtual std::vector<Tensor*> params() = 0;
    virtual std::vector<Tensor*> grads() = 0;

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (Tensor* p : params()) n += p->size();
        return n;
    }

    std::vector<double> get_parameters() {
        std::vector<double> flat;
        for (Tensor* p : params()) flat.insert(flat.end(), p->raw().begin(), p->raw().end());
        return flat;
    }

    void set_parameters(const std::vector<double>& flat) {
        std::size_t off = 0;
        for (Tensor* p : params()) {
            if (off + p->size() > flat.size())
                throw invalid_input("set_parameters: size mismatch");
            std::copy(flat.begin() + static_cast<long>(off),
                      flat.begin() + static_cast<long>(off + p->size()), p->raw().begin());
            off += p->size();
        }
        if (off != flat.size()) throw invalid_input("set_parameters: size mismatch");
    }

    // Probability of the fake class.
    double predict_proba(const Tensor& x) {
        const std::vector<double> z = logits(x);
        if (head_arity() == 1) return nn::sigmoid(z[0]);
        return nn::softmax(z)[1];
    }

    // Fake-class probability of the sample last seen by backprop; lets the
    // trainer track batch accuracy without a second forward pass.
    double last_proba = -1.0;

    std::vector<double> predict_proba_batch(const std::vector<Tensor>& batch) {
        std::vector<double> out;
        out.reserve(batch.size());
        for (const Tensor& x : batch) out.push_back(predict_proba(x));
        return out;
    }
};

namespace detail {

inline std::vector<Tensor*> collect_params(const std::vector<nn::Layer*>& layers) {
    std::vector<Tensor*> out;
    for (nn::Layer* l : layers) {
        auto v = l->params();
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}
inline std::vector<Tensor*> collect_grads(const std::vector<nn::Layer*>& layers) {
    std::vector<Tensor*> out;
    for (nn::Layer* l : layers) {
        auto v = l->grads();
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

}  // namespace detail

// Plain layer-stack backbone with a 1-logit sigmoid head.
class SequentialBackbone : public Backbone {
public:
    SequentialBackbone(std::string name, std::size_t input_size, Preproc pre)
        : name_(std::move(name)), input_size_(input_size), pre_(pre) {}

    std::string name() const override { return name_; }
    std::size_t input_size() const override { return input_size_; }
    Preproc preprocessor() const override { return pre_; }
    int head_arity() const override { return 1; }

    std::vector<double> logits(const Tensor& x) override {
        Tensor cur = x;
        for (auto& l : layers_) cur = l->forward(cur);
        return {cur[0]};
    }

    double backprop(const Tensor& x, int label, double scale, Tensor* input_grad,
                    const std::vector<double>*) override {
        const std::vector<double> z = logits(x);
        last_proba = nn::sigmoid(z[0]);
        double dlogit = 0.0;
        const double loss = nn::bce_with_logit(z[0], label, &dlogit);
        Tensor g = Tensor::vector(1);
        g[0] = dlogit * scale;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
        if (input_grad) {
            *input_grad = g;
            if (scale != 1.0) *input_grad *= 1.0 / scale;
        }
        return loss;
    }

    std::vector<Tensor*> params() override { return detail::collect_params(raw_layers()); }
    std::vector<Tensor*> grads() override { return detail::collect_grads(raw_layers()); }

    void add(std::unique_ptr<nn::Layer> l) { layers_.push_back(std::move(l)); }

private:
    std::vector<nn::Layer*> raw_layers() {
        std::vector<nn::Layer*> out;
        for (auto& l : layers_) out.push_back(l.get());
        return out;
    }
    std::string name_;
    std::size_t input_size_;
    Preproc pre_;
    std::vector<std::unique_ptr<nn::Layer>> layers_;
};

// SE-conv stand-in: conv3x3 + swish + SE, twice, with 2x pooling between,
// global average pool and a sigmoid head.
inline std::unique_ptr<SequentialBackbone> make_conv_backbone(std::size_t input_size,
                                                              std::uint64_t seed) {
    auto rng = make_rng(mix_seed(seed, 0xC0));
    auto bb = std::make_unique<SequentialBackbone>("se_conv", input_size, Preproc::plain);
    bb->add(std::make_unique<nn::Conv2D>(3, 16, 3, 1, true, rng));
    bb->add(std::make_unique<nn::Activation>(nn::Activation::kSwish));
    bb->add(std::make_unique<nn::SEBlock>(16, 4, rng));
    bb->add(std::make_unique<nn::AvgPool2>());
    bb->add(std::make_unique<nn::Conv2D>(16, 32, 3, 1, true, rng));
    bb->add(std::make_unique<nn::Activation>(nn::Activation::kSwish));
    bb->add(std::make_unique<nn::SEBlock>(32, 4, rng));
    bb->add(std::make_unique<nn::AvgPool2>());
    bb->add(std::make_unique<nn::GlobalAvgPool>());
    bb->add(std::make_unique<nn::Dense>(32, 1, rng));
    return bb;
}

// Wavelet-fed stand-in: 4-stride patchify stem, two inverted-residual blocks
// with channel LayerNorm and GELU, global pool, sigmoid head. Expects
// wavelet feature images as input.
inline std::unique_ptr<SequentialBackbone> make_wavelet_backbone(std::size_t input_size,
                                                                 std::uint64_t seed) {
    auto rng = make_rng(mix_seed(seed, 0xCE));
    auto bb = std::make_unique<SequentialBackbone>("wave_convnext", input_size, Preproc::wavelet);
    bb->add(std::make_unique<nn::Conv2D>(3, 24, 4, 4, false, rng));
    bb->add(std::make_unique<nn::InvertedResidualBlock>(24, rng));
    bb->add(std::make_unique<nn::InvertedResidualBlock>(24, rng));
    bb->add(std::make_unique<nn::GlobalAvgPool>());
    bb->add(std::make_unique<nn::Dense>(24, 1, rng));
    return bb;
}

// Attention stand-in: 16x16 patch embedding with learned positions, one
// residual self-attention layer, token mean pooling, 2-logit softmax head.
// Supports opt-in hard distillation against a teacher's logits.
class AttentionBackbone : public Backbone {
public:
    AttentionBackbone(std::size_t input_size, std::uint64_t seed, std::size_t patch = 16,
                      std::size_t dm = 32)
        : input_size_(input_size), patch_(patch), dm_(dm) {
        if (input_size % patch != 0)
            throw invalid_config("AttentionBackbone: input size must be a multiple of patch");
        n_tokens_ = (input_size / patch) * (input_size / patch);
        auto rng = make_rng(mix_seed(seed, 0xA7));
        embed_ = std::make_unique<nn::Dense>(patch * patch * 3, dm, rng);
        pos_ = Tensor::matrix(n_tokens_, dm);
        gpos_ = Tensor::matrix(n_tokens_, dm);
        nn::init_uniform(pos_, dm, rng);
        attn_ = std::make_unique<nn::SelfAttention>(dm, rng);
        head_ = std::make_unique<nn::Dense>(dm, 2, rng);
    }

    std::string name() const override { return "patch_attention"; }
    std::size_t input_size() const override { return input_size_; }
    Preproc preprocessor() const override { return Preproc::plain; }
    int head_arity() const override { return 2; }

    std::vector<double> logits(const Tensor& x) override {
        Tensor tokens = patchify(x);
        embedded_ = Tensor::matrix(n_tokens_, dm_);
        token_cache_.clear();
        for (std::size_t t = 0; t < n_tokens_; ++t) {
            Tensor tok = Tensor::vector(patch_ * patch_ * 3);
            for (std::size_t i = 0; i < tok.size(); ++i) tok[i] = tokens.at(t, i);
            token_cache_.push_back(tok);
            const Tensor e = embed_->forward(tok);
            for (std::size_t j = 0; j < dm_; ++j)
                embedded_.at(t, j) = e[j] + pos_.at(t, j);
        }
        attended_ = attn_->forward(embedded_);
        Tensor pooled = Tensor::vector(dm_);
        for (std::size_t t = 0; t < n_tokens_; ++t)
            for (std::size_t j = 0; j < dm_; ++j) pooled[j] += attended_.at(t, j);
        pooled *= 1.0 / static_cast<double>(n_tokens_);
        const Tensor z = head_->forward(pooled);
        return {z[0], z[1]};
    }

    double backprop(const Tensor& x, int label, double scale, Tensor* input_grad,
                    const std::vector<double>* teacher_logits) override {
        const std::vector<double> z = logits(x);
        last_proba = nn::softmax(z)[1];
        std::vector<double> dz;
        double loss;
        if (teacher_logits)
            loss = nn::hard_distill_loss(z, *teacher_logits, label, &dz);
        else
            loss = nn::softmax_ce(z, label, &dz);
        Tensor g = Tensor::vector(2);
        g[0] = dz[0] * scale;
        g[1] = dz[1] * scale;
        Tensor gpooled = head_->backward(g);
        Tensor gattended = Tensor::matrix(n_tokens_, dm_);
        const double inv_n = 1.0 / static_cast<double>(n_tokens_);
        for (std::size_t t = 0; t < n_tokens_; ++t)
            for (std::size_t j = 0; j < dm_; ++j) gattended.at(t, j) = gpooled[j] * inv_n;
        Tensor gembedded = attn_->backward(gattended);

        Tensor gx_img;
        if (input_grad) gx_img = Tensor::hwc(input_size_, input_size_, 3);
        const std::size_t per_side = input_size_ / patch_;
        for (std::size_t t = 0; t < n_tokens_; ++t) {
            Tensor ge = Tensor::vector(dm_);
            for (std::size_t j = 0; j < dm_; ++j) {
                ge[j] = gembedded.at(t, j);
                gpos_.at(t, j) += gembedded.at(t, j);
            }
            // Re-run embed forward on this token so its cache matches.
            embed_->forward(token_cache_[t]);
            Tensor gtok = embed_->backward(ge);
            if (input_grad) {
                const std::size_t ty = (t / per_side) * patch_, tx = (t % per_side) * patch_;
                std::size_t idx = 0;
                for (std::size_t py = 0; py < patch_; ++py)
                    for (std::size_t px = 0; px < patch_; ++px)
                        for (std::size_t c = 0; c < 3; ++c, ++idx)
                            gx_img.at(ty + py, tx + px, c) = gtok[idx] / scale;
            }
        }
        if (input_grad) *input_grad = std::move(gx_img);
        return loss;
    }

    std::vector<Tensor*> params() override {
        std::vector<Tensor*> out = embed_->params();
        out.push_back(&pos_);
        auto a = attn_->params();
        out.insert(out.end(), a.begin(), a.end());
        auto h = head_->params();
        out.insert(out.end(), h.begin(), h.end());
        return out;
    }
    std::vector<Tensor*> grads() override {
        std::vector<Tensor*> out = embed_->grads();
        out.push_back(&gpos_);
        auto a = attn_->grads();
        out.insert(out.end(), a.begin(), a.end());
        auto h = head_->grads();
        out.insert(out.end(), h.begin(), h.end());
        return out;
    }

private:
    Tensor patchify(const Tensor& x) const {
        const std::size_t per_side = input_size_ / patch_;
        Tensor tokens = Tensor::matrix(n_tokens_, patch_ * patch_ * 3);
        for (std::size_t t = 0; t < n_tokens_; ++t) {
            const std::size_t ty = (t / per_side) * patch_, tx = (t % per_side) * patch_;
            std::size_t idx = 0;
            for (std::size_t py = 0; py < patch_; ++py)
                for (std::size_t px = 0; px < patch_; ++px)
                    for (std::size_t c = 0; c < 3; ++c, ++idx)
                        tokens.at(t, idx) = x.at(ty + py, tx + px, c);
        }
        return tokens;
    }

    std::size_t input_size_, patch_, dm_, n_tokens_;
    std::unique_ptr<nn::Dense> embed_;
    Tensor pos_, gpos_;
    std::unique_ptr<nn::SelfAttention> attn_;
    std::unique_ptr<nn::Dense> head_;
    Tensor embedded_, attended_;
    std::vector<Tensor> token_cache_;
};

// Minimal dense backbone over flat inputs; used for fast protocol-level
// experiments and tests.
inline std::unique_ptr<SequentialBackbone> make_mlp_backbone(std::size_t input_dim,
                                                             std::size_t hidden,
                                                             std::uint64_t seed,
                                                             const std::string& name = "mlp") {
    auto rng = make_rng(mix_seed(seed, 0xD1));
    auto bb = std::make_unique<SequentialBackbone>(name, input_dim, Preproc::plain);
    if (hidden > 0) {
        bb->add(std::make_unique<nn::Dense>(input_dim, hidden, rng));
        bb->add(std::make_unique<nn::Activation>(nn::Activation::kRelu));
        bb->add(std::make_unique<nn::Dense>(hidden, 1, rng));
    } else {
        bb->add(std::make_unique<nn::Dense>(input_dim, 1, rng));
    }
    return bb;
}

inline std::unique_ptr<Backbone> make_backbone(const std::string& kind, std::size_t input_size,
                                               std::uint64_t seed) {
    if (kind == "se_conv") return make_conv_backbone(input_size, seed);
    if (kind == "patch_attention")
        return std::make_unique<AttentionBackbone>(input_size, seed);
    if (kind == "wave_convnext") return make_wavelet_backbone(input_size, seed);
    throw invalid_config("unknown backbone kind: " + kind);
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

struct Preprocessor {
    Preproc kind = Preproc::plain;
    std::size_t input_size = 32;
    NormalizationStats stats = NormalizationStats::imagenet();
    bool augment_in_training = false;
    AugmentConfig aug;

    Tensor eval(const Image& img) const {
        Image sized{resize_bilinear(img.pixels, input_size, input_size), img.id};
        if (kind == Preproc::wavelet) sized = wavelet_feature_image(sized, input_size);
        return normalize(sized, stats);
    }

    Tensor train(const Image& img, std::uint64_t sample_seed) const {
        if (!augment_in_training) return eval(img);
        AugmentConfig cfg = aug;
        cfg.output_size = input_size;
        Image augmented = augment(img, cfg, sample_seed);
        if (kind == Preproc::wavelet) augmented = wavelet_feature_image(augmented, input_size);
        return normalize(augmented, stats);
    }

    static Preprocessor for_backbone(const Backbone& bb) {
        Preprocessor p;
        p.kind = bb.preprocessor();
        p.input_size = bb.input_size();
        return p;
    }
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct LabeledTensor {
    Tensor x;
    int label = 0;
};

struct EpochStats {
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

struct TrainOptions {
    double lr = 1e-4;
    std::size_t batch_size = 32;
    std::uint64_t shuffle_seed = 0;
    // Optional teacher for hard distillation (2-logit heads only).
    Backbone* teacher = nullptr;
};

// One full pass with Adam over shuffled mini-batches. Deterministic given
// the shuffle seed; `opt` carries optimizer state across epochs.
inline EpochStats train_epoch(Backbone& bb, const std::vector<LabeledTensor>& data,
                              nn::Adam& opt, const TrainOptions& to) {
    if (data.empty()) throw invalid_input("train_epoch: empty dataset");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(to.shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);

    EpochStats stats;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += to.batch_size) {
        const std::size_t end = std::min(order.size(), start + to.batch_size);
        const double scale = 1.0 / static_cast<double>(end - start);
        opt.zero_gradients();
        for (std::size_t i = start; i < end; ++i) {
            const LabeledTensor& s = data[order[i]];
            std::vector<double> teacher_logits;
            const std::vector<double>* tl = nullptr;
            if (to.teacher && bb.head_arity() == 2) {
                teacher_logits = to.teacher->logits(s.x);
                if (teacher_logits.size() == 1) {
                    // Map a sigmoid-head teacher onto 2-class logits.
                    teacher_logits = {0.0, teacher_logits[0]};
                }
                tl = &teacher_logits;
            }
            const double loss = bb.backprop(s.x, s.label, scale, nullptr, tl);
            stats.mean_loss += loss;
            if ((bb.last_proba >= 0.5 ? 1 : 0) == s.label) ++correct;
        }
        opt.step();
    }
    stats.mean_loss /= static_cast<double>(data.size());
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return stats;
}

inline double evaluate_accuracy(Backbone& bb, const std::vector<LabeledTensor>& data,
                                double threshold = 0.5) {
    std::size_t correct = 0;
    for (const LabeledTensor& s : data)
        if ((bb.predict_proba(s.x) >= threshold ? 1 : 0) == s.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace dfd
