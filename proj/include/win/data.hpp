#pragma once

// Grayscale image ingestion, patch extraction, augmentation and batching.
//
// Two formats: binary PGM (P5, 8-bit) as the canonical byte-stable format,
// and 8-bit PNG for convenience (libpng). Color PNG input is converted with
// the 0.299/0.587/0.114 luma weights. Pixels live in [0,1] internally.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "win/errors.hpp"
#include "win/noise.hpp"
#include "win/rng.hpp"
#include "win/tensor.hpp"

namespace win {

struct Image {
    std::int64_t h = 0;
    std::int64_t w = 0;
    std::vector<double> pixels;  // row-major, [0,1]
    std::string source_path;

    double at(std::int64_t y, std::int64_t x) const { return pixels[y * w + x]; }
    double& at(std::int64_t y, std::int64_t x) { return pixels[y * w + x]; }

    Tensor4 to_tensor() const { return Tensor4(Shape{1, 1, h, w}, pixels); }

    static Image from_tensor(const Tensor4& t, std::string path = {}) {
        const Shape s = t.shape();
        if (s.n != 1 || s.c != 1) {
            throw std::invalid_argument("Image::from_tensor: expected a (1,1,h,w) tensor");
        }
        Image img;
        img.h = s.h;
        img.w = s.w;
        img.pixels.assign(t.data(), t.data() + t.size());
        img.source_path = std::move(path);
        return img;
    }
};

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& token) {
    token.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {  // comment runs to end of line
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c)) {
        token.push_back(static_cast<char>(c));
        c = in.get();
    }
    return token.empty() ? EOF : 0;
}

inline long pgm_int_token(std::istream& in, const std::string& path) {
    std::string tok;
    if (pgm_next_token(in, tok) == EOF) throw IoError(path + ": truncated PGM header");
    try {
        std::size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError(path + ": bad PGM header token '" + tok + "'");
    }
}

}  // namespace detail

inline Image load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != 'P' || m1 != '5') throw IoError(path + ": not a binary PGM (P5)");
    const long w = detail::pgm_int_token(in, path);
    const long h = detail::pgm_int_token(in, path);
    const long maxval = detail::pgm_int_token(in, path);
    if (w < 1 || h < 1) throw IoError(path + ": bad PGM dimensions");
    if (maxval > 255) throw IoError(path + ": unsupported bit depth (maxval " +
                                    std::to_string(maxval) + ")");
    if (maxval < 1) throw IoError(path + ": bad PGM maxval");
    // header tokens are followed by exactly one whitespace byte (already
    // consumed by the token reader), then raster data
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw IoError(path + ": truncated PGM raster");
    }
    Image img;
    img.h = h;
    img.w = w;
    img.source_path = path;
    img.pixels.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / 255.0;
    return img;
}

inline std::vector<unsigned char> quantize_bytes(const Image& img) {
    std::vector<unsigned char> bytes(img.pixels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::clamp(img.pixels[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    return bytes;
}

inline void save_pgm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "P5\n" << img.w << " " << img.h << "\n255\n";
    const std::vector<unsigned char> bytes = quantize_bytes(img);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path + ": write failed");
}

inline Image load_png(const std::string& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw IoError(path + ": " + png.message);
    }
    if (png.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&png);
        throw IoError(path + ": unsupported bit depth (16-bit PNG)");
    }
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw IoError(path + ": " + msg);
    }
    Image img;
    img.h = png.height;
    img.w = png.width;
    img.source_path = path;
    img.pixels.resize(static_cast<std::size_t>(img.h) * static_cast<std::size_t>(img.w));
    if (color) {
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            const double r = buffer[3 * i], g = buffer[3 * i + 1], b = buffer[3 * i + 2];
            img.pixels[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
        }
    } else {
        for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = buffer[i] / 255.0;
    }
    return img;
}

inline void save_png(const Image& img, const std::string& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.w);
    png.height = static_cast<png_uint_32>(img.h);
    png.format = PNG_FORMAT_GRAY;
    const std::vector<unsigned char> bytes = quantize_bytes(img);
    if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        throw IoError(path + ": " + png.message);
    }
}

inline bool has_extension(const std::filesystem::path& p, const char* ext) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ext;
}

// Dispatch on file extension.
inline Image load_image(const std::string& path) {
    const std::filesystem::path p(path);
    if (has_extension(p, ".pgm")) return load_pgm(path);
    if (has_extension(p, ".png")) return load_png(path);
    throw IoError(path + ": unsupported image format (expect .pgm or .png)");
}

inline void save_image(const Image& img, const std::string& path) {
    const std::filesystem::path p(path);
    if (has_extension(p, ".pgm")) return save_pgm(img, path);
    if (has_extension(p, ".png")) return save_png(img, path);
    throw IoError(path + ": unsupported image format (expect .pgm or .png)");
}

// A dataset is a directory of images, ordered lexicographically by filename.
inline std::vector<std::string> list_images(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError(dir + ": not a directory");
    std::vector<std::string> paths;
    for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        if (has_extension(e.path(), ".pgm") || has_extension(e.path(), ".png")) {
            paths.push_back(e.path().string());
        }
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

inline std::vector<Image> load_dataset(const std::string& dir) {
    std::vector<Image> images;
    for (const std::string& p : list_images(dir)) images.push_back(load_image(p));
    return images;
}

struct Patch {
    Tensor4 tensor;  // (1,1,P,P)
    std::size_t source_index = 0;
    std::int64_t row = 0;
    std::int64_t col = 0;
};

struct PatchSet {
    std::vector<Patch> patches;
    std::int64_t patch_size = 0;
    std::int64_t stride = 0;
};

// Grid positions 0, stride, 2*stride, ... while position+P fits; count is
// (floor((h-P)/stride)+1) * (floor((w-P)/stride)+1).
inline void extract_patches_into(PatchSet& set, const Image& img, std::int64_t patch_size,
                                 std::int64_t stride, std::size_t source_index) {
    if (patch_size < 1 || stride < 1) {
        throw std::invalid_argument("extract_patches: patch size and stride must be >= 1");
    }
    if (img.h < patch_size || img.w < patch_size) {
        throw std::invalid_argument("extract_patches: image " + std::to_string(img.w) + "x" +
                                    std::to_string(img.h) + " smaller than patch " +
                                    std::to_string(patch_size));
    }
    for (std::int64_t row = 0; row + patch_size <= img.h; row += stride) {
        for (std::int64_t col = 0; col + patch_size <= img.w; col += stride) {
            Patch p;
            p.tensor = Tensor4(Shape{1, 1, patch_size, patch_size});
            for (std::int64_t y = 0; y < patch_size; ++y) {
                for (std::int64_t x = 0; x < patch_size; ++x) {
                    p.tensor.at(0, 0, y, x) = img.at(row + y, col + x);
                }
            }
            p.source_index = source_index;
            p.row = row;
            p.col = col;
            set.patches.push_back(std::move(p));
        }
    }
}

inline PatchSet extract_patches(const Image& img, std::int64_t patch_size, std::int64_t stride) {
    PatchSet set;
    set.patch_size = patch_size;
    set.stride = stride;
    extract_patches_into(set, img, patch_size, stride, 0);
    return set;
}

inline PatchSet extract_patches(const std::vector<Image>& images, std::int64_t patch_size,
                                std::int64_t stride) {
    PatchSet set;
    set.patch_size = patch_size;
    set.stride = stride;
    for (std::size_t i = 0; i < images.size(); ++i) {
        extract_patches_into(set, images[i], patch_size, stride, i);
    }
    return set;
}

inline Image rotate90(const Image& img) {  // clockwise
    Image out;
    out.h = img.w;
    out.w = img.h;
    out.source_path = img.source_path;
    out.pixels.resize(img.pixels.size());
    for (std::int64_t y = 0; y < out.h; ++y) {
        for (std::int64_t x = 0; x < out.w; ++x) out.at(y, x) = img.at(img.h - 1 - x, y);
    }
    return out;
}

inline Image hflip(const Image& img) {
    Image out = img;
    for (std::int64_t y = 0; y < img.h; ++y) {
        for (std::int64_t x = 0; x < img.w; ++x) out.at(y, x) = img.at(y, img.w - 1 - x);
    }
    return out;
}

// The 8 dihedral variants: 4 rotations x {identity, horizontal flip}.
// No deduplication, even for symmetric inputs.
inline std::vector<Image> augment(const Image& img) {
    std::vector<Image> out;
    Image cur = img;
    for (int r = 0; r < 4; ++r) {
        out.push_back(cur);
        out.push_back(hflip(cur));
        cur = rotate90(cur);
    }
    return out;
}

struct Batch {
    Tensor4 y;                  // corrupted patches (N,1,P,P)
    Tensor4 x;                  // clean patches
    std::vector<double> sigmas; // per-patch sigma (byte scale)
    double sigma_mean = 0.0;
};

// Deterministic shuffle + corrupt + stack. The final partial batch is
// emitted. Each clean patch is paired with its corrupted version; sigma is
// drawn per patch in range mode.
class BatchStream {
public:
    BatchStream(const PatchSet& set, NoiseSampler& sampler, std::int64_t batch_size,
                std::uint64_t shuffle_seed)
        : set_(set), sampler_(sampler), batch_size_(batch_size) {
        if (set.patches.empty()) throw std::invalid_argument("BatchStream: empty patch set");
        if (batch_size < 1) throw std::invalid_argument("BatchStream: batch_size must be >= 1");
        order_.resize(set.patches.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        Rng rng(shuffle_seed, streams::shuffle);
        for (std::size_t i = order_.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i));
            std::swap(order_[i - 1], order_[j]);
        }
    }

    bool next(Batch& batch) {
        if (pos_ >= order_.size()) return false;
        const std::size_t n =
            std::min(static_cast<std::size_t>(batch_size_), order_.size() - pos_);
        const std::int64_t p = set_.patch_size;
        batch.y = Tensor4(Shape{static_cast<std::int64_t>(n), 1, p, p});
        batch.x = Tensor4(Shape{static_cast<std::int64_t>(n), 1, p, p});
        batch.sigmas.assign(n, 0.0);
        double sigma_acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Patch& patch = set_.patches[order_[pos_ + i]];
            auto [noisy, sigma] = sampler_.corrupt(patch.tensor);
            batch.sigmas[i] = sigma;
            sigma_acc += sigma;
            const std::size_t count = static_cast<std::size_t>(p * p);
            std::copy_n(patch.tensor.data(), count,
                        batch.x.data() + batch.x.index(static_cast<std::int64_t>(i), 0, 0, 0));
            std::copy_n(noisy.data(), count,
                        batch.y.data() + batch.y.index(static_cast<std::int64_t>(i), 0, 0, 0));
        }
        batch.sigma_mean = sigma_acc / static_cast<double>(n);
        pos_ += n;
        return true;
    }

private:
    const PatchSet& set_;
    NoiseSampler& sampler_;
    std::int64_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

}  // namespace win
