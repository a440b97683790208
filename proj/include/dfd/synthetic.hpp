#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dfd/image.hpp"

namespace dfd {

// Seeded generator for the bundled two-class texture dataset: textured
// ellipses ("real") vs the same imagery with a high-frequency perturbation
// injected ("fake"). The perturbation amplitude ranges control how much the
// classes overlap.
struct SyntheticConfig {
    std::size_t size = 32;
    double real_amp_min = 0.25;
    double real_amp_max = 0.60;
    double fake_amp_min = 0.25;
    double fake_amp_max = 0.60;
    double noise_std = 0.02;
    // When set, the high-frequency component is oriented by class: reals get
    // a horizontal grain (horizontal-detail energy) and fakes the diagonal
    // checkerboard (diagonal-detail energy). The cue then survives per-band
    // renormalization, which would erase a pure amplitude difference.
    bool class_orientation = true;

    // Cleanly separable classes; any capable backbone should exceed 95%.
    static SyntheticConfig easy() { return SyntheticConfig{}; }

    // Same checkerboard in both classes with heavily overlapping amplitude
    // ranges; the Bayes boundary sits inside the overlap so class priors
    // visibly shift a trained decision rule.
    static SyntheticConfig overlapping() {
        SyntheticConfig c;
        c.class_orientation = false;
        c.real_amp_min = 0.0;
        c.real_amp_max = 0.22;
        c.fake_amp_min = 0.10;
        c.fake_amp_max = 0.40;
        return c;
    }
};

inline Image synth_image(int label, std::uint64_t seed, const SyntheticConfig& cfg) {
    auto rng = make_rng(mix_seed(seed, label == 1 ? 0xFA4E : 0x4EA1));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t n = cfg.size;

    // Low-frequency background texture.
    const double fx = 1.0 + 2.0 * uni(rng), fy = 1.0 + 2.0 * uni(rng);
    const double px = uni(rng) * 2.0 * M_PI, py = uni(rng) * 2.0 * M_PI;
    double base[3], tint[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = 0.25 + 0.4 * uni(rng);
        tint[c] = 0.15 + 0.25 * uni(rng);
    }

    // Ellipse geometry.
    const double cx = n * (0.35 + 0.3 * uni(rng)), cy = n * (0.35 + 0.3 * uni(rng));
    const double ax = n * (0.18 + 0.17 * uni(rng)), ay = n * (0.18 + 0.17 * uni(rng));
    const double theta = uni(rng) * M_PI;
    const double ct = std::cos(theta), st = std::sin(theta);

    // High-frequency perturbation amplitude drawn from the class range.
    const double amp_min = label == 1 ? cfg.fake_amp_min : cfg.real_amp_min;
    const double amp_max = label == 1 ? cfg.fake_amp_max : cfg.real_amp_max;
    const double amp = amp_min + uni(rng) * (amp_max - amp_min);
    const double hf_phase = uni(rng) * 2.0 * M_PI;

    Tensor px_t = Tensor::hwc(n, n, 3);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            const double u = static_cast<double>(x) / n, v = static_cast<double>(y) / n;
            const double tex =
                0.5 * std::sin(2.0 * M_PI * fx * u + px) * std::sin(2.0 * M_PI * fy * v + py);
            const double dx = (x - cx), dy = (y - cy);
            const double ex = (dx * ct + dy * st) / ax, ey = (-dx * st + dy * ct) / ay;
            const bool inside = ex * ex + ey * ey <= 1.0;
            // High-frequency component at the Nyquist rate, confined to the
            // ellipse. At integer pixels the sine factors collapse to an
            // alternating-sign pattern: a checkerboard (or horizontal stripes
            // for reals when class orientation is enabled) with per-image
            // magnitude jitter. Confinement matters: a full-frame pattern
            // yields a constant detail band, which any per-band
            // renormalization would cancel out.
            const double mag = std::sin(hf_phase) * std::sin(hf_phase) + 0.5;
            const bool stripes = cfg.class_orientation && label == 0;
            const int parity = static_cast<int>(stripes ? y : x + y) % 2;
            const double hf = inside ? amp * 0.5 * (parity == 0 ? mag : -mag) : 0.0;
            for (int c = 0; c < 3; ++c) {
                double val = base[c] + tint[c] * tex + (inside ? 0.18 : 0.0) + hf +
                             cfg.noise_std * gauss(rng);
                px_t.at(y, x, c) = std::max(0.0, std::min(1.0, val));
            }
        }
    }
    const std::string prefix = label == 1 ? "fake_" : "real_";
    return Image{std::move(px_t), prefix + std::to_string(seed)};
}

struct LabeledImage {
    Image image;
    int label = 0;
};

inline std::vector<LabeledImage> synth_dataset(std::size_t n_real, std::size_t n_fake,
                                               std::uint64_t seed,
                                               const SyntheticConfig& cfg) {
    std::vector<LabeledImage> out;
    out.reserve(n_real + n_fake);
    for (std::size_t i = 0; i < n_real; ++i)
        out.push_back({synth_image(0, mix_seed(seed, i), cfg), 0});
    for (std::size_t i = 0; i < n_fake; ++i)
        out.push_back({synth_image(1, mix_seed(seed, 1000000 + i), cfg), 1});
    return out;
}

}  // namespace dfd
