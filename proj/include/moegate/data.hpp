#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "moegate/common.hpp"
#include "moegate/rng.hpp"
#include "moegate/tensor.hpp"

namespace moegate {

inline constexpr int kImageSide = 28;
inline constexpr int kImagePixels = kImageSide * kImageSide;

enum class SampleType : std::uint8_t { digit = 0, squares = 1 };

// Column layout: one contiguous pixel block plus parallel label/type arrays.
// Pixels are stored as bytes; batches normalize to [0,1] on materialization.
// The type tag is a meta-label for analysis only and never reaches a batch.
struct Dataset {
    std::vector<std::uint8_t> pixels;  // count * 784
    std::vector<std::uint8_t> labels;  // 0..9
    std::vector<std::uint8_t> types;   // SampleType

    int count() const { return static_cast<int>(labels.size()); }

    const std::uint8_t* image(int i) const { return pixels.data() + static_cast<std::size_t>(i) * kImagePixels; }

    void append(const std::uint8_t* img, std::uint8_t label, SampleType type) {
        pixels.insert(pixels.end(), img, img + kImagePixels);
        labels.push_back(label);
        types.push_back(static_cast<std::uint8_t>(type));
    }
};

// Model-facing view of a set of samples: images and labels only.
template <typename T>
struct Batch {
    Tensor<T> images;  // [B,1,28,28], values in [0,1]
    std::vector<int> labels;
};

template <typename T>
Batch<T> make_batch(const Dataset& data, const std::vector<int>& indices, int begin, int end) {
    const int b = end - begin;
    Tensor<T> images({b, 1, kImageSide, kImageSide});
    std::vector<int> labels(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        const int at = indices[static_cast<std::size_t>(begin + i)];
        const std::uint8_t* src = data.image(at);
        T* dst = images.data() + static_cast<std::size_t>(i) * kImagePixels;
        for (int p = 0; p < kImagePixels; ++p) dst[p] = static_cast<T>(src[p]) * static_cast<T>(1.0 / 255.0);
        labels[static_cast<std::size_t>(i)] = data.labels[static_cast<std::size_t>(at)];
    }
    return {std::move(images), std::move(labels)};
}

struct DatasetSplit {
    std::vector<int> train, val, test;
    std::uint64_t seed = 0;
};

// Contiguous 80/10/10 ranges over an already shuffled order.
inline DatasetSplit make_split(int count, std::uint64_t seed) {
    DatasetSplit s;
    s.seed = seed;
    const int n_train = count * 8 / 10;
    const int n_val = count / 10;
    for (int i = 0; i < n_train; ++i) s.train.push_back(i);
    for (int i = n_train; i < n_train + n_val; ++i) s.val.push_back(i);
    for (int i = n_train + n_val; i < count; ++i) s.test.push_back(i);
    return s;
}

// ---------------------------------------------------------------------------
// IDX files (big-endian), the standard MNIST container.

namespace idx {

inline constexpr std::uint32_t kImagesMagic = 0x00000803;
inline constexpr std::uint32_t kLabelsMagic = 0x00000801;

inline std::uint32_t read_u32_be(const std::vector<std::uint8_t>& buf, std::size_t at, const std::string& path) {
    if (at + 4 > buf.size())
        throw FormatError(path + ": truncated at offset " + std::to_string(at));
    return (static_cast<std::uint32_t>(buf[at]) << 24) | (static_cast<std::uint32_t>(buf[at + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[at + 2]) << 8) | static_cast<std::uint32_t>(buf[at + 3]);
}

inline void write_u32_be(std::ofstream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                           static_cast<char>(v)};
    os.write(bytes, 4);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw FormatError("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace idx

inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = idx::read_file(images_path);
    const auto lab = idx::read_file(labels_path);

    const std::uint32_t img_magic = idx::read_u32_be(img, 0, images_path);
    if (img_magic != idx::kImagesMagic) {
        char hex[16];
        std::snprintf(hex, sizeof hex, "0x%08x", img_magic);
        throw FormatError(images_path + ": bad magic " + hex + " at offset 0 (expected 0x00000803)");
    }
    const std::uint32_t lab_magic = idx::read_u32_be(lab, 0, labels_path);
    if (lab_magic != idx::kLabelsMagic) {
        char hex[16];
        std::snprintf(hex, sizeof hex, "0x%08x", lab_magic);
        throw FormatError(labels_path + ": bad magic " + hex + " at offset 0 (expected 0x00000801)");
    }
    const std::uint32_t n_images = idx::read_u32_be(img, 4, images_path);
    const std::uint32_t rows = idx::read_u32_be(img, 8, images_path);
    const std::uint32_t cols = idx::read_u32_be(img, 12, images_path);
    if (rows != kImageSide || cols != kImageSide)
        throw FormatError(images_path + ": expected 28x28 images, got " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    const std::uint32_t n_labels = idx::read_u32_be(lab, 4, labels_path);
    if (n_images != n_labels)
        throw FormatError("count mismatch: " + images_path + " holds " + std::to_string(n_images) + " images but " +
                          labels_path + " holds " + std::to_string(n_labels) + " labels");
    const std::size_t need_img = 16 + static_cast<std::size_t>(n_images) * kImagePixels;
    if (img.size() < need_img)
        throw FormatError(images_path + ": truncated at offset " + std::to_string(img.size()) + " (need " +
                          std::to_string(need_img) + " bytes)");
    const std::size_t need_lab = 8 + n_labels;
    if (lab.size() < need_lab)
        throw FormatError(labels_path + ": truncated at offset " + std::to_string(lab.size()) + " (need " +
                          std::to_string(need_lab) + " bytes)");

    Dataset out;
    out.pixels.assign(img.begin() + 16, img.begin() + static_cast<std::ptrdiff_t>(need_img));
    out.labels.reserve(n_labels);
    out.types.assign(n_labels, static_cast<std::uint8_t>(SampleType::digit));
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        const std::uint8_t l = lab[8 + i];
        if (l > 9)
            throw FormatError(labels_path + ": label " + std::to_string(l) + " out of range at offset " +
                              std::to_string(8 + i));
        out.labels.push_back(l);
    }
    return out;
}

inline void write_idx_files(const Dataset& data, const std::string& images_path, const std::string& labels_path) {
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("cannot write " + images_path);
    idx::write_u32_be(img, idx::kImagesMagic);
    idx::write_u32_be(img, static_cast<std::uint32_t>(data.count()));
    idx::write_u32_be(img, kImageSide);
    idx::write_u32_be(img, kImageSide);
    img.write(reinterpret_cast<const char*>(data.pixels.data()), static_cast<std::streamsize>(data.pixels.size()));

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("cannot write " + labels_path);
    idx::write_u32_be(lab, idx::kLabelsMagic);
    idx::write_u32_be(lab, static_cast<std::uint32_t>(data.count()));
    lab.write(reinterpret_cast<const char*>(data.labels.data()), static_cast<std::streamsize>(data.labels.size()));
}

// ---------------------------------------------------------------------------
// Number-of-squares synthesis: n in [0,9] non-overlapping filled white
// squares, side in [3,7] px, at least one empty pixel between any two, so the
// connected-component count always equals the label.

namespace squares_detail {

struct Rect {
    int x, y, side;
};

inline bool too_close(const Rect& a, const Rect& b) {
    // Overlap test on 1px-inflated extents: rejects pairs without a full
    // empty row or column between them.
    return a.x < b.x + b.side + 1 && b.x < a.x + a.side + 1 && a.y < b.y + b.side + 1 && b.y < a.y + a.side + 1;
}

}  // namespace squares_detail

inline Dataset gen_squares(int count, std::uint64_t seed) {
    Rng rng(seed, fnv1a(std::string("squares")));
    Dataset out;
    out.pixels.reserve(static_cast<std::size_t>(count) * kImagePixels);
    std::array<std::uint8_t, kImagePixels> img{};
    for (int i = 0; i < count; ++i) {
        const int n = rng.uniform_int(10);
        std::vector<squares_detail::Rect> placed;
        for (;;) {
            placed.clear();
            int rejections = 0;
            bool ok = true;
            while (static_cast<int>(placed.size()) < n) {
                const int side = rng.uniform_int(3, 7);
                const int x = rng.uniform_int(kImageSide - side + 1);
                const int y = rng.uniform_int(kImageSide - side + 1);
                const squares_detail::Rect cand{x, y, side};
                bool clash = false;
                for (const auto& r : placed)
                    if (squares_detail::too_close(cand, r)) {
                        clash = true;
                        break;
                    }
                if (!clash) {
                    placed.push_back(cand);
                } else if (++rejections >= 1000) {
                    ok = false;
                    break;
                }
            }
            if (ok) break;  // else regenerate the whole sample with fresh draws
        }
        img.fill(0);
        for (const auto& r : placed)
            for (int yy = r.y; yy < r.y + r.side; ++yy)
                for (int xx = r.x; xx < r.x + r.side; ++xx)
                    img[static_cast<std::size_t>(yy) * kImageSide + xx] = 255;
        out.append(img.data(), static_cast<std::uint8_t>(n), SampleType::squares);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mixed dataset: digits + squares, shuffled, 80/10/10 split.

inline std::pair<Dataset, DatasetSplit> build_mixed_dataset(const Dataset& digits, const Dataset& squares,
                                                            std::uint64_t seed) {
    if (digits.count() != squares.count())
        throw ConfigError("mixed dataset needs equally sized halves, got " + std::to_string(digits.count()) +
                          " digits and " + std::to_string(squares.count()) + " squares");
    const int total = digits.count() + squares.count();
    std::vector<int> perm(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng(seed, fnv1a(std::string("mixed-shuffle")));
    rng.shuffle(perm.begin(), perm.end());

    Dataset out;
    out.pixels.reserve(static_cast<std::size_t>(total) * kImagePixels);
    for (int i = 0; i < total; ++i) {
        const int at = perm[static_cast<std::size_t>(i)];
        const Dataset& src = at < digits.count() ? digits : squares;
        const int local = at < digits.count() ? at : at - digits.count();
        out.append(src.image(local), src.labels[static_cast<std::size_t>(local)],
                   static_cast<SampleType>(src.types[static_cast<std::size_t>(local)]));
    }
    return {std::move(out), make_split(total, seed)};
}

// ---------------------------------------------------------------------------
// MIXN container: little-endian {magic "MIXN", version u32, count u32}, then
// per sample {label u8, type u8, 784 pixel bytes}.

namespace mixn {

inline constexpr std::uint32_t kVersion = 1;

inline void write_u32_le(std::ofstream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                           static_cast<char>(v >> 24)};
    os.write(bytes, 4);
}

inline std::uint32_t read_u32_le(const std::vector<std::uint8_t>& buf, std::size_t at, const std::string& path) {
    if (at + 4 > buf.size())
        throw FormatError(path + ": truncated at offset " + std::to_string(at));
    return static_cast<std::uint32_t>(buf[at]) | (static_cast<std::uint32_t>(buf[at + 1]) << 8) |
           (static_cast<std::uint32_t>(buf[at + 2]) << 16) | (static_cast<std::uint32_t>(buf[at + 3]) << 24);
}

}  // namespace mixn

inline void save_mixn(const std::string& path, const Dataset& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot write " + path);
    os.write("MIXN", 4);
    mixn::write_u32_le(os, mixn::kVersion);
    mixn::write_u32_le(os, static_cast<std::uint32_t>(data.count()));
    for (int i = 0; i < data.count(); ++i) {
        os.put(static_cast<char>(data.labels[static_cast<std::size_t>(i)]));
        os.put(static_cast<char>(data.types[static_cast<std::size_t>(i)]));
        os.write(reinterpret_cast<const char*>(data.image(i)), kImagePixels);
    }
    if (!os) throw FormatError("write failed for " + path);
}

inline Dataset load_mixn(const std::string& path) {
    const auto buf = idx::read_file(path);
    if (buf.size() < 12 || buf[0] != 'M' || buf[1] != 'I' || buf[2] != 'X' || buf[3] != 'N')
        throw FormatError(path + ": bad magic at offset 0 (expected \"MIXN\")");
    const std::uint32_t version = mixn::read_u32_le(buf, 4, path);
    if (version != mixn::kVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version));
    const std::uint32_t count = mixn::read_u32_le(buf, 8, path);
    const std::size_t need = 12 + static_cast<std::size_t>(count) * (2 + kImagePixels);
    if (buf.size() < need)
        throw FormatError(path + ": truncated at offset " + std::to_string(buf.size()) + " (need " +
                          std::to_string(need) + " bytes)");
    Dataset out;
    out.pixels.reserve(static_cast<std::size_t>(count) * kImagePixels);
    std::size_t at = 12;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint8_t label = buf[at++];
        const std::uint8_t type = buf[at];
        ++at;
        if (label > 9)
            throw FormatError(path + ": label " + std::to_string(label) + " out of range at offset " +
                              std::to_string(at - 2));
        out.append(buf.data() + at, label, static_cast<SampleType>(type));
        at += kImagePixels;
    }
    return out;
}

}  // namespace moegate
