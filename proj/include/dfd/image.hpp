#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dfd/common.hpp"
#include "dfd/tensor.hpp"

namespace dfd {

// Channel-last raster in [0,1] before normalization. Pixel data lives in a
// HxWxC tensor; `id` identifies the source sample through the pipeline.
struct Image {
    Tensor pixels;  // H x W x C
    std::string id;

    std::size_t height() const { return pixels.dim(0); }
    std::size_t width() const { return pixels.dim(1); }
    std::size_t channels() const { return pixels.dim(2); }
};

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> std;

    // Conventional ImageNet per-channel statistics; configurable.
    static NormalizationStats imagenet() {
        return {{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
    }
};

// Half-pixel-center bilinear resampling. Identity sizes reproduce the
// input exactly.
inline Tensor resize_bilinear(const Tensor& src, std::size_t out_h, std::size_t out_w) {
    if (src.rank() != 3) throw invalid_input("resize_bilinear: expected HxWxC tensor");
    const std::size_t h = src.dim(0), w = src.dim(1), c = src.dim(2);
    if (h == 0 || w == 0) throw invalid_input("resize_bilinear: empty input");
    if (out_h == 0 || out_w == 0) throw invalid_input("resize_bilinear: empty output");
    if (out_h == h && out_w == w) return src;
    Tensor dst = Tensor::hwc(out_h, out_w, c);
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::max(0.0, std::min(fy, static_cast<double>(h - 1)));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (std::size_t x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::max(0.0, std::min(fx, static_cast<double>(w - 1)));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double top = src.at(y0, x0, ch) * (1 - wx) + src.at(y0, x1, ch) * wx;
                const double bot = src.at(y1, x0, ch) * (1 - wx) + src.at(y1, x1, ch) * wx;
                dst.at(y, x, ch) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return dst;
}

// out[c] = (in[c] - mean[c]) / std[c]
inline Tensor normalize(const Image& img, const NormalizationStats& stats) {
    const std::size_t c = img.channels();
    if (stats.mean.size() != c || stats.std.size() != c)
        throw invalid_input("normalize: stats length does not match channel count");
    for (double s : stats.std)
        if (s <= 0.0) throw invalid_input("normalize: std must be strictly positive");
    Tensor out = img.pixels;
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                out.at(y, x, ch) = (out.at(y, x, ch) - stats.mean[ch]) / stats.std[ch];
    return out;
}

inline Tensor denormalize(const Tensor& t, const NormalizationStats& stats) {
    Tensor out = t;
    const std::size_t c = t.dim(2);
    for (std::size_t y = 0; y < t.dim(0); ++y)
        for (std::size_t x = 0; x < t.dim(1); ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                out.at(y, x, ch) = t.at(y, x, ch) * stats.std[ch] + stats.mean[ch];
    return out;
}

}  // namespace dfd
