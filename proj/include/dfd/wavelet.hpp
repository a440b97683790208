#pragma once

#include <cmath>
#include <vector>

#include "dfd/image.hpp"
#include "dfd/tensor.hpp"

namespace dfd {

// One decomposition level of one channel. A holds the low-frequency
// approximation; H, V, D the horizontal, vertical, and diagonal details.
struct Subbands {
    Tensor A, H, V, D;
};

struct SubbandSet {
    std::vector<Subbands> channels;
};

namespace detail {
inline const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

// Duplicates the last row/column when a dimension is odd so pairing is
// always possible; the inverse side crops.
inline Tensor pad_to_even(const Tensor& m) {
    const std::size_t r = m.dim(0), c = m.dim(1);
    if (r % 2 == 0 && c % 2 == 0) return m;
    const std::size_t pr = r + (r % 2), pc = c + (c % 2);
    Tensor out = Tensor::matrix(pr, pc);
    for (std::size_t i = 0; i < pr; ++i)
        for (std::size_t j = 0; j < pc; ++j)
            out.at(i, j) = m.at(std::min(i, r - 1), std::min(j, c - 1));
    return out;
}
}  // namespace detail

// Single-level 2D Haar DWT via separable filtering: low = (a+b)/sqrt(2),
// high = (b-a)/sqrt(2), applied along rows first, then columns.
// Sub-band labeling: A = LL, V = low-rows/high-cols, H = high-rows/low-cols,
// D = HH.
inline Subbands dwt2_haar(const Tensor& channel) {
    if (channel.rank() != 2 || channel.size() == 0)
        throw invalid_input("dwt2_haar: input must be a non-empty matrix");
    const Tensor m = detail::pad_to_even(channel);
    const std::size_t rows = m.dim(0), cols = m.dim(1);
    const std::size_t hc = cols / 2, hr = rows / 2;

    // Row pass: filter along each row, downsample columns.
    Tensor low_row = Tensor::matrix(rows, hc);
    Tensor high_row = Tensor::matrix(rows, hc);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < hc; ++j) {
            const double a = m.at(i, 2 * j), b = m.at(i, 2 * j + 1);
            low_row.at(i, j) = (a + b) * detail::kInvSqrt2;
            high_row.at(i, j) = (b - a) * detail::kInvSqrt2;
        }
    }

    // Column pass: filter along each column, downsample rows.
    Subbands sb{Tensor::matrix(hr, hc), Tensor::matrix(hr, hc), Tensor::matrix(hr, hc),
                Tensor::matrix(hr, hc)};
    for (std::size_t i = 0; i < hr; ++i) {
        for (std::size_t j = 0; j < hc; ++j) {
            const double l0 = low_row.at(2 * i, j), l1 = low_row.at(2 * i + 1, j);
            const double h0 = high_row.at(2 * i, j), h1 = high_row.at(2 * i + 1, j);
            sb.A.at(i, j) = (l0 + l1) * detail::kInvSqrt2;
            sb.V.at(i, j) = (l1 - l0) * detail::kInvSqrt2;
            sb.H.at(i, j) = (h0 + h1) * detail::kInvSqrt2;
            sb.D.at(i, j) = (h1 - h0) * detail::kInvSqrt2;
        }
    }
    return sb;
}

// Exact inverse of dwt2_haar for even-shaped originals.
inline Tensor idwt2_haar(const Tensor& A, const Tensor& H, const Tensor& V,
                         const Tensor& D) {
    if (!(A.same_shape(H) && A.same_shape(V) && A.same_shape(D)))
        throw invalid_input("idwt2_haar: sub-band shape mismatch");
    if (A.rank() != 2 || A.size() == 0)
        throw invalid_input("idwt2_haar: sub-bands must be non-empty matrices");
    const std::size_t hr = A.dim(0), hc = A.dim(1);
    Tensor low_row = Tensor::matrix(2 * hr, hc);
    Tensor high_row = Tensor::matrix(2 * hr, hc);
    for (std::size_t i = 0; i < hr; ++i) {
        for (std::size_t j = 0; j < hc; ++j) {
            low_row.at(2 * i, j) = (A.at(i, j) - V.at(i, j)) * detail::kInvSqrt2;
            low_row.at(2 * i + 1, j) = (A.at(i, j) + V.at(i, j)) * detail::kInvSqrt2;
            high_row.at(2 * i, j) = (H.at(i, j) - D.at(i, j)) * detail::kInvSqrt2;
            high_row.at(2 * i + 1, j) = (H.at(i, j) + D.at(i, j)) * detail::kInvSqrt2;
        }
    }
    Tensor out = Tensor::matrix(2 * hr, 2 * hc);
    for (std::size_t i = 0; i < 2 * hr; ++i) {
        for (std::size_t j = 0; j < hc; ++j) {
            out.at(i, 2 * j) = (low_row.at(i, j) - high_row.at(i, j)) * detail::kInvSqrt2;
            out.at(i, 2 * j + 1) = (low_row.at(i, j) + high_row.at(i, j)) * detail::kInvSqrt2;
        }
    }
    return out;
}

inline Subbands dwt2_haar(const Image& img, std::size_t channel) {
    Tensor m = Tensor::matrix(img.height(), img.width());
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x) m.at(y, x) = img.pixels.at(y, x, channel);
    return dwt2_haar(m);
}

inline SubbandSet decompose(const Image& img) {
    SubbandSet set;
    for (std::size_t c = 0; c < img.channels(); ++c) set.channels.push_back(dwt2_haar(img, c));
    return set;
}

namespace detail {
// Per-sub-band min-max scaling to 8-bit; a flat band (min == max) maps to 0.
inline void scale_to_u8(const Tensor& band, Tensor& tile, std::size_t row_off,
                        std::size_t col_off, std::size_t ch) {
    double lo = band[0], hi = band[0];
    for (std::size_t i = 0; i < band.size(); ++i) {
        lo = std::min(lo, band[i]);
        hi = std::max(hi, band[i]);
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < band.dim(0); ++i) {
        for (std::size_t j = 0; j < band.dim(1); ++j) {
            double v = 0.0;
            if (span > 0.0)
                v = std::floor((band.at(i, j) - lo) / span * 255.0 + 0.5);
            tile.at(row_off + i, col_off + j, ch) = v;
        }
    }
}
}  // namespace detail

// Builds the tiled quadrant feature image (A|H over V|D), scales each
// sub-band independently to [0,255], resizes to target_size, and re-expresses
// in [0,1] for downstream normalization.
inline Image wavelet_feature_image(const Image& img, std::size_t target_size) {
    if (img.channels() != 3)
        throw invalid_input("wavelet_feature_image: expected a 3-channel image");
    const SubbandSet set = decompose(img);
    const std::size_t hr = set.channels[0].A.dim(0), hc = set.channels[0].A.dim(1);
    Tensor tile = Tensor::hwc(2 * hr, 2 * hc, 3);
    for (std::size_t c = 0; c < 3; ++c) {
        detail::scale_to_u8(set.channels[c].A, tile, 0, 0, c);
        detail::scale_to_u8(set.channels[c].H, tile, 0, hc, c);
        detail::scale_to_u8(set.channels[c].V, tile, hr, 0, c);
        detail::scale_to_u8(set.channels[c].D, tile, hr, hc, c);
    }
    Tensor resized = resize_bilinear(tile, target_size, target_size);
    for (std::size_t i = 0; i < resized.size(); ++i) resized[i] /= 255.0;
    return Image{std::move(resized), img.id};
}

// Spatial extent after an s-stride patchify stem, e.g. 296 -> 74 at stride 4.
inline std::size_t patchify_output_extent(std::size_t input_extent, std::size_t stride) {
    if (stride == 0) throw invalid_config("patchify_output_extent: zero stride");
    return input_extent / stride;
}

}  // namespace dfd
