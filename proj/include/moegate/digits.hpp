#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "moegate/data.hpp"
#include "moegate/rng.hpp"

namespace moegate {

// Handwritten-digit-style corpus rendered from 8x8 glyph bitmaps under random
// affine jitter with supersampled bilinear resampling. Stands in for MNIST in
// offline environments; the output goes through the same IDX files and loader
// as the real thing.

namespace digit_detail {

// Rows top to bottom, bit j = pixel column j (LSB leftmost).
inline constexpr std::array<std::array<std::uint8_t, 8>, 10> kGlyphs = {{
    {0x3E, 0x63, 0x73, 0x7B, 0x6F, 0x67, 0x3E, 0x00},  // 0
    {0x0C, 0x0E, 0x0C, 0x0C, 0x0C, 0x0C, 0x3F, 0x00},  // 1
    {0x1E, 0x33, 0x30, 0x1C, 0x06, 0x33, 0x3F, 0x00},  // 2
    {0x1E, 0x33, 0x30, 0x1C, 0x30, 0x33, 0x1E, 0x00},  // 3
    {0x38, 0x3C, 0x36, 0x33, 0x7F, 0x30, 0x78, 0x00},  // 4
    {0x3F, 0x03, 0x1F, 0x30, 0x30, 0x33, 0x1E, 0x00},  // 5
    {0x1C, 0x06, 0x03, 0x1F, 0x33, 0x33, 0x1E, 0x00},  // 6
    {0x3F, 0x33, 0x30, 0x18, 0x0C, 0x0C, 0x0C, 0x00},  // 7
    {0x1E, 0x33, 0x33, 0x1E, 0x33, 0x33, 0x1E, 0x00},  // 8
    {0x1E, 0x33, 0x33, 0x3E, 0x30, 0x18, 0x0E, 0x00},  // 9
}};

inline double glyph_at(int digit, double u, double v) {
    // Bilinear sample of the binary glyph; outside the 8x8 box reads 0.
    const int u0 = static_cast<int>(std::floor(u));
    const int v0 = static_cast<int>(std::floor(v));
    const double fu = u - u0, fv = v - v0;
    auto bit = [digit](int x, int y) -> double {
        if (x < 0 || x >= 8 || y < 0 || y >= 8) return 0.0;
        return (kGlyphs[static_cast<std::size_t>(digit)][static_cast<std::size_t>(y)] >> x) & 1 ? 1.0 : 0.0;
    };
    return bit(u0, v0) * (1 - fu) * (1 - fv) + bit(u0 + 1, v0) * fu * (1 - fv) +
           bit(u0, v0 + 1) * (1 - fu) * fv + bit(u0 + 1, v0 + 1) * fu * fv;
}

struct Jitter {
    double cos_t, sin_t, shear, inv_scale, cx, cy, intensity;
};

inline void render(int digit, const Jitter& j, std::uint8_t* out) {
    // Inverse-map each output pixel (2x2 supersampled) into glyph space.
    for (int y = 0; y < kImageSide; ++y) {
        for (int x = 0; x < kImageSide; ++x) {
            double acc = 0.0;
            for (int sy = 0; sy < 2; ++sy) {
                for (int sx = 0; sx < 2; ++sx) {
                    const double ox = x + 0.25 + 0.5 * sx - j.cx;
                    const double oy = y + 0.25 + 0.5 * sy - j.cy;
                    // inverse rotation, then inverse shear, then inverse scale
                    const double rx = j.cos_t * ox + j.sin_t * oy;
                    const double ry = -j.sin_t * ox + j.cos_t * oy;
                    const double hx = rx - j.shear * ry;
                    const double u = hx * j.inv_scale + 3.5;
                    const double v = ry * j.inv_scale + 3.5;
                    acc += glyph_at(digit, u, v);
                }
            }
            const double value = j.intensity * acc * 0.25;
            out[static_cast<std::size_t>(y) * kImageSide + x] =
                static_cast<std::uint8_t>(std::lround(255.0 * std::min(1.0, value)));
        }
    }
}

}  // namespace digit_detail

inline Dataset gen_digit_samples(int count, std::uint64_t seed) {
    Rng rng(seed, fnv1a(std::string("digits")));
    Dataset out;
    out.pixels.reserve(static_cast<std::size_t>(count) * kImagePixels);
    std::array<std::uint8_t, kImagePixels> img{};
    for (int i = 0; i < count; ++i) {
        const int digit = rng.uniform_int(10);
        const double theta = rng.uniform(-0.30, 0.30);
        digit_detail::Jitter j;
        j.cos_t = std::cos(theta);
        j.sin_t = std::sin(theta);
        j.shear = rng.uniform(-0.25, 0.25);
        j.inv_scale = 1.0 / rng.uniform(2.0, 2.7);
        j.cx = 13.5 + rng.uniform(-2.5, 2.5);
        j.cy = 13.5 + rng.uniform(-2.5, 2.5);
        j.intensity = rng.uniform(0.65, 1.0);
        digit_detail::render(digit, j, img.data());
        out.append(img.data(), static_cast<std::uint8_t>(digit), SampleType::digit);
    }
    return out;
}

}  // namespace moegate
