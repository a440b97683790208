#pragma once

#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <string>

#include "dfd/image.hpp"

namespace dfd {

// Decodes a PNG/JPEG file, converts to RGB floats in [0,1], and resizes to
// target_size x target_size with bilinear interpolation.
inline Image load_image(const std::filesystem::path& path, std::size_t target_size) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw decode_error("failed to decode image: " + path.string());
    if (bgr.rows == 0 || bgr.cols == 0)
        throw invalid_input("zero-dimension image: " + path.string());
    Tensor px = Tensor::hwc(bgr.rows, bgr.cols, 3);
    for (int y = 0; y < bgr.rows; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            px.at(y, x, 0) = row[x][2] / 255.0;
            px.at(y, x, 1) = row[x][1] / 255.0;
            px.at(y, x, 2) = row[x][0] / 255.0;
        }
    }
    Image img{std::move(px), path.stem().string()};
    if (img.height() != target_size || img.width() != target_size)
        img.pixels = resize_bilinear(img.pixels, target_size, target_size);
    return img;
}

inline void save_png(const Image& img, const std::filesystem::path& path) {
    const int h = static_cast<int>(img.height()), w = static_cast<int>(img.width());
    cv::Mat bgr(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < w; ++x) {
            auto q = [&](std::size_t c) {
                double v = img.channels() == 3 ? img.pixels.at(y, x, c) : img.pixels.at(y, x, 0);
                return static_cast<unsigned char>(
                    std::lround(std::max(0.0, std::min(1.0, v)) * 255.0));
            };
            row[x] = cv::Vec3b(q(2), q(1), q(0));
        }
    }
    if (!cv::imwrite(path.string(), bgr))
        throw io_error("failed to write image: " + path.string());
}

}  // namespace dfd
