#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dfd/wavelet.hpp"

using namespace dfd;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Tensor m = Tensor::matrix(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = uni(rng);
    return m;
}

}  // namespace

TEST_CASE("haar dwt hand-computed 2x2 case") {
    Tensor m = Tensor::matrix(2, 2);
    m.at(0, 0) = 1.0; m.at(0, 1) = 2.0;
    m.at(1, 0) = 3.0; m.at(1, 1) = 4.0;
    const Subbands sb = dwt2_haar(m);
    CHECK(sb.A.at(0, 0) == Catch::Approx(5.0).margin(1e-12));
    CHECK(sb.V.at(0, 0) == Catch::Approx(2.0).margin(1e-12));
    CHECK(sb.H.at(0, 0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(sb.D.at(0, 0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("haar dwt conserves energy and reconstructs exactly") {
    auto rng = make_rng(42);
    std::uniform_int_distribution<std::size_t> dim(1, 16);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t r = 2 * dim(rng), c = 2 * dim(rng);
        const Tensor m = random_matrix(r, c, rng);
        const Subbands sb = dwt2_haar(m);
        const double e_in = m.sum_squares();
        const double e_out = sb.A.sum_squares() + sb.H.sum_squares() + sb.V.sum_squares() +
                             sb.D.sum_squares();
        REQUIRE(std::abs(e_in - e_out) <= 1e-8 * std::max(e_in, 1.0));
        const Tensor rec = idwt2_haar(sb.A, sb.H, sb.V, sb.D);
        REQUIRE(rec.same_shape(m));
        double max_err = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i)
            max_err = std::max(max_err, std::abs(rec[i] - m[i]));
        REQUIRE(max_err <= 1e-10);
    }
}

TEST_CASE("haar dwt is linear") {
    auto rng = make_rng(7);
    const Tensor a = random_matrix(8, 8, rng);
    const Tensor b = random_matrix(8, 8, rng);
    Tensor sum = a;
    sum += b;
    const Subbands sa = dwt2_haar(a), sb = dwt2_haar(b), ss = dwt2_haar(sum);
    for (std::size_t i = 0; i < ss.A.size(); ++i) {
        CHECK(ss.A[i] == Catch::Approx(sa.A[i] + sb.A[i]).margin(1e-12));
        CHECK(ss.D[i] == Catch::Approx(sa.D[i] + sb.D[i]).margin(1e-12));
    }
}

TEST_CASE("transposing the input swaps H and V") {
    auto rng = make_rng(11);
    const Tensor m = random_matrix(6, 6, rng);
    Tensor mt = Tensor::matrix(6, 6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) mt.at(i, j) = m.at(j, i);
    const Subbands s = dwt2_haar(m), st = dwt2_haar(mt);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(st.A.at(i, j) == Catch::Approx(s.A.at(j, i)).margin(1e-12));
            CHECK(st.H.at(i, j) == Catch::Approx(s.V.at(j, i)).margin(1e-12));
            CHECK(st.V.at(i, j) == Catch::Approx(s.H.at(j, i)).margin(1e-12));
            CHECK(st.D.at(i, j) == Catch::Approx(s.D.at(j, i)).margin(1e-12));
        }
}

TEST_CASE("odd dimensions are padded by edge duplication") {
    Tensor m = Tensor::matrix(3, 3);
    for (std::size_t i = 0; i < 9; ++i) m[i] = static_cast<double>(i);
    const Subbands sb = dwt2_haar(m);
    CHECK(sb.A.dim(0) == 2);
    CHECK(sb.A.dim(1) == 2);
    // Bottom-right block is the padded constant corner: A = 2*m(2,2), details 0.
    CHECK(sb.A.at(1, 1) == Catch::Approx(2.0 * m.at(2, 2)).margin(1e-12));
    CHECK(sb.D.at(1, 1) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("constant input concentrates all energy in A") {
    Tensor m = Tensor::matrix(4, 4, 3.0);
    const Subbands sb = dwt2_haar(m);
    for (std::size_t i = 0; i < sb.A.size(); ++i) {
        CHECK(sb.A[i] == Catch::Approx(6.0).margin(1e-12));
        CHECK(sb.H[i] == Catch::Approx(0.0).margin(1e-12));
        CHECK(sb.V[i] == Catch::Approx(0.0).margin(1e-12));
        CHECK(sb.D[i] == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("dwt rejects bad input") {
    CHECK_THROWS_AS(dwt2_haar(Tensor::vector(4)), invalid_input);
    CHECK_THROWS_AS(idwt2_haar(Tensor::matrix(2, 2), Tensor::matrix(2, 2),
                               Tensor::matrix(2, 2), Tensor::matrix(2, 3)),
                    invalid_input);
}

TEST_CASE("wavelet feature image tiles quadrants and scales per band") {
    // Gradient image: known sub-band extremes per quadrant.
    Image img{Tensor::hwc(4, 4, 3), "t"};
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                img.pixels.at(y, x, c) = static_cast<double>(y * 4 + x) / 16.0;
    const Image feat = wavelet_feature_image(img, 4);
    CHECK(feat.height() == 4);
    CHECK(feat.width() == 4);
    CHECK(feat.id == "t");
    for (std::size_t i = 0; i < feat.pixels.size(); ++i) {
        CHECK(feat.pixels[i] >= 0.0);
        CHECK(feat.pixels[i] <= 1.0);
    }
    // The horizontal-gradient detail band is constant, so it min-max maps to 0.
    const SubbandSet sbs = decompose(img);
    double lo = sbs.channels[0].H[0], hi = sbs.channels[0].H[0];
    for (std::size_t i = 0; i < sbs.channels[0].H.size(); ++i) {
        lo = std::min(lo, sbs.channels[0].H[i]);
        hi = std::max(hi, sbs.channels[0].H[i]);
    }
    REQUIRE(lo == hi);
    CHECK(feat.pixels.at(0, 2, 0) == 0.0);  // H quadrant, top-right
}

TEST_CASE("wavelet feature image is deterministic") {
    auto rng = make_rng(99);
    Image img{Tensor::hwc(32, 32, 3), "d"};
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = uni(rng);
    const Image a = wavelet_feature_image(img, 296);
    const Image b = wavelet_feature_image(img, 296);
    REQUIRE(a.pixels.raw() == b.pixels.raw());
    CHECK(a.height() == 296);
}

TEST_CASE("patchify extent") {
    CHECK(patchify_output_extent(296, 4) == 74);
    CHECK(patchify_output_extent(32, 4) == 8);
    CHECK_THROWS_AS(patchify_output_extent(296, 0), invalid_config);
}
