#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "dfd/image.hpp"

namespace dfd {

struct AugmentConfig {
    double hflip_prob = 0.5;
    double rotation_max_deg = 10.0;
    double jitter_strength = 0.2;
    double crop_scale_min = 0.8;
    double crop_scale_max = 1.2;
    std::size_t output_size = 224;

    void validate() const {
        if (hflip_prob < 0.0 || hflip_prob > 1.0)
            throw invalid_config("augment: hflip_prob must be in [0,1]");
        if (rotation_max_deg < 0.0) throw invalid_config("augment: rotation_max_deg < 0");
        if (jitter_strength < 0.0) throw invalid_config("augment: jitter_strength < 0");
        if (crop_scale_min <= 0.0 || crop_scale_max <= 0.0 || crop_scale_min > crop_scale_max)
            throw invalid_config("augment: bad crop scale bounds");
        if (output_size == 0) throw invalid_config("augment: output_size must be positive");
    }
};

namespace detail {

inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    v = mx;
    const double d = mx - mn;
    s = mx == 0.0 ? 0.0 : d / mx;
    if (d == 0.0) {
        h = 0.0;
    } else if (mx == r) {
        h = std::fmod((g - b) / d, 6.0) / 6.0;
    } else if (mx == g) {
        h = ((b - r) / d + 2.0) / 6.0;
    } else {
        h = ((r - g) / d + 4.0) / 6.0;
    }
    if (h < 0.0) h += 1.0;
}

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double hh = h * 6.0;
    const int i = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

inline double clamp01(double v) { return std::max(0.0, std::min(1.0, v)); }

// Samples (y, x) with clamp-to-edge replication.
inline double sample_clamped(const Tensor& src, double fy, double fx, std::size_t ch) {
    const std::size_t h = src.dim(0), w = src.dim(1);
    fy = std::max(0.0, std::min(fy, static_cast<double>(h - 1)));
    fx = std::max(0.0, std::min(fx, static_cast<double>(w - 1)));
    const std::size_t y0 = static_cast<std::size_t>(fy), x0 = static_cast<std::size_t>(fx);
    const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double wy = fy - y0, wx = fx - x0;
    const double top = src.at(y0, x0, ch) * (1 - wx) + src.at(y0, x1, ch) * wx;
    const double bot = src.at(y1, x0, ch) * (1 - wx) + src.at(y1, x1, ch) * wx;
    return top * (1 - wy) + bot * wy;
}

}  // namespace detail

// Applies, in order: horizontal flip, rotation (edge-replicated corners),
// color jitter (brightness/contrast in linear RGB, saturation/hue in HSV),
// random resized crop to output_size. Deterministic given rng_seed; the
// identity configuration is a pixel-exact no-op for matching sizes.
inline Image augment(const Image& img, const AugmentConfig& cfg, std::uint64_t rng_seed) {
    cfg.validate();
    std::mt19937_64 rng = make_rng(rng_seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    // Fixed draw order keeps results comparable across configurations.
    const double u_flip = uni(rng);
    const double u_angle = uni(rng);
    const double u_bright = uni(rng);
    const double u_contrast = uni(rng);
    const double u_sat = uni(rng);
    const double u_hue = uni(rng);
    const double u_scale = uni(rng);
    const double u_px = uni(rng);
    const double u_py = uni(rng);

    Tensor cur = img.pixels;
    const std::size_t c = cur.dim(2);

    if (u_flip < cfg.hflip_prob) {
        Tensor flipped = cur;
        const std::size_t h = cur.dim(0), w = cur.dim(1);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                for (std::size_t ch = 0; ch < c; ++ch)
                    flipped.at(y, x, ch) = cur.at(y, w - 1 - x, ch);
        cur = std::move(flipped);
    }

    const double angle_deg = u_angle * cfg.rotation_max_deg;
    if (angle_deg != 0.0) {
        const double a = angle_deg * M_PI / 180.0;
        const double ca = std::cos(a), sa = std::sin(a);
        const std::size_t h = cur.dim(0), w = cur.dim(1);
        const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
        Tensor rot = Tensor::hwc(h, w, c);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const double dy = y - cy, dx = x - cx;
                const double sy = cy + (ca * dy - sa * dx);
                const double sx = cx + (sa * dy + ca * dx);
                for (std::size_t ch = 0; ch < c; ++ch)
                    rot.at(y, x, ch) = detail::sample_clamped(cur, sy, sx, ch);
            }
        }
        cur = std::move(rot);
    }

    if (cfg.jitter_strength > 0.0 && c == 3) {
        const double js = cfg.jitter_strength;
        const double fb = 1.0 - js + 2.0 * js * u_bright;
        const double fc = 1.0 - js + 2.0 * js * u_contrast;
        const double fs = 1.0 - js + 2.0 * js * u_sat;
        const double dh = (u_hue - 0.5) * js;  // +- js/2 of the hue range

        double mean = 0.0;
        for (std::size_t y = 0; y < cur.dim(0); ++y)
            for (std::size_t x = 0; x < cur.dim(1); ++x)
                mean += 0.299 * cur.at(y, x, 0) + 0.587 * cur.at(y, x, 1) +
                        0.114 * cur.at(y, x, 2);
        mean /= static_cast<double>(cur.dim(0) * cur.dim(1));

        for (std::size_t y = 0; y < cur.dim(0); ++y) {
            for (std::size_t x = 0; x < cur.dim(1); ++x) {
                double r = cur.at(y, x, 0), g = cur.at(y, x, 1), b = cur.at(y, x, 2);
                r *= fb; g *= fb; b *= fb;
                r = (r - mean) * fc + mean;
                g = (g - mean) * fc + mean;
                b = (b - mean) * fc + mean;
                r = detail::clamp01(r); g = detail::clamp01(g); b = detail::clamp01(b);
                double hh, ss, vv;
                detail::rgb_to_hsv(r, g, b, hh, ss, vv);
                ss = detail::clamp01(ss * fs);
                hh = hh + dh;
                hh -= std::floor(hh);
                detail::hsv_to_rgb(hh, ss, vv, r, g, b);
                cur.at(y, x, 0) = detail::clamp01(r);
                cur.at(y, x, 1) = detail::clamp01(g);
                cur.at(y, x, 2) = detail::clamp01(b);
            }
        }
    }

    // Random resized crop: aspect-preserving window of relative area `scale`,
    // positioned uniformly (windows larger than the image sample with edge
    // replication), then resized to output_size.
    {
        const double scale =
            cfg.crop_scale_min + u_scale * (cfg.crop_scale_max - cfg.crop_scale_min);
        const std::size_t h = cur.dim(0), w = cur.dim(1);
        const double side = std::sqrt(scale);
        const double win_h = side * h, win_w = side * w;
        const double slack_y = h - win_h, slack_x = w - win_w;
        const double y0 = std::min(slack_y, 0.0) / 2.0 + u_py * std::max(slack_y, 0.0);
        const double x0 = std::min(slack_x, 0.0) / 2.0 + u_px * std::max(slack_x, 0.0);
        if (scale == 1.0 && cfg.output_size == h && cfg.output_size == w) {
            // Exact identity path.
        } else {
            Tensor out = Tensor::hwc(cfg.output_size, cfg.output_size, c);
            const double sy = win_h / cfg.output_size;
            const double sx = win_w / cfg.output_size;
            for (std::size_t y = 0; y < cfg.output_size; ++y) {
                const double fy = y0 + (y + 0.5) * sy - 0.5;
                for (std::size_t x = 0; x < cfg.output_size; ++x) {
                    const double fx = x0 + (x + 0.5) * sx - 0.5;
                    for (std::size_t ch = 0; ch < c; ++ch)
                        out.at(y, x, ch) = detail::sample_clamped(cur, fy, fx, ch);
                }
            }
            cur = std::move(out);
        }
    }

    return Image{std::move(cur), img.id};
}

}  // namespace dfd
