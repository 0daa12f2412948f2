#include "nbb/image.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "nbb/block_map.hpp"
#include "nbb/dispatch.hpp"

namespace nbb {

namespace {

void check_dims(std::int64_t w, std::int64_t h) {
    if (w < 1 || h < 1) {
        throw std::invalid_argument("image dimensions must be positive");
    }
}

// Rasters put row 0 at the top; embedded/orthotope y grows upward.
std::int64_t flip(std::int64_t y, std::int64_t height) { return height - 1 - y; }

}  // namespace

GrayImage::GrayImage(std::int64_t w, std::int64_t h, std::uint8_t fill)
    : width(w), height(h) {
    check_dims(w, h);
    pixels.assign(static_cast<std::size_t>(w * h), fill);
}

std::uint8_t& GrayImage::at(std::int64_t x, std::int64_t y) {
    return pixels[static_cast<std::size_t>(y * width + x)];
}

std::uint8_t GrayImage::at(std::int64_t x, std::int64_t y) const {
    return pixels[static_cast<std::size_t>(y * width + x)];
}

BitImage::BitImage(std::int64_t w, std::int64_t h) : width(w), height(h) {
    check_dims(w, h);
    bits.assign(static_cast<std::size_t>(w * h), 0);
}

std::uint8_t& BitImage::at(std::int64_t x, std::int64_t y) {
    return bits[static_cast<std::size_t>(y * width + x)];
}

std::uint8_t BitImage::at(std::int64_t x, std::int64_t y) const {
    return bits[static_cast<std::size_t>(y * width + x)];
}

std::uint64_t BitImage::count_set() const {
    return std::accumulate(bits.begin(), bits.end(), std::uint64_t{0});
}

BitImage render_membership(const FractalSpec& spec, int level) {
    const std::int64_t n = spec.side_length(level);
    const MemberMask mask(spec, level);
    BitImage image(n, n);
    for (std::int64_t y = 0; y < n; ++y) {
        for (std::int64_t x = 0; x < n; ++x) {
            image.at(x, flip(y, n)) = mask.test(x, y) ? 1 : 0;
        }
    }
    return image;
}

GrayImage render_packing(const FractalSpec& spec, int level) {
    const auto [w, h] = spec.orthotope_dims(level);
    const int k = spec.replica_count();
    GrayImage image(w, h);
    for (std::int64_t oy = 0; oy < h; ++oy) {
        for (std::int64_t ox = 0; ox < w; ++ox) {
            const int replica =
                level == 0 ? 0 : beta_index(spec, {ox, oy}, level);
            image.at(ox, flip(oy, h)) =
                static_cast<std::uint8_t>(replica * 255 / (k - 1));
        }
    }
    return image;
}

GrayImage render_mapping(const FractalSpec& spec, int level) {
    constexpr std::uint8_t kEven = 64;
    constexpr std::uint8_t kOdd = 160;
    const auto [w, h] = spec.orthotope_dims(level);
    const std::int64_t n = spec.side_length(level);
    GrayImage image(w + 1 + n, std::max(h, n), 255);
    for (std::int64_t oy = 0; oy < h; ++oy) {
        for (std::int64_t ox = 0; ox < w; ++ox) {
            const std::uint8_t shade = (ox + oy) % 2 == 0 ? kEven : kOdd;
            image.at(ox, flip(oy, h)) = shade;
            const auto p = lambda_map(spec, level, {ox, oy});
            image.at(w + 1 + p.x, flip(p.y, n)) = shade;
        }
    }
    return image;
}

GrayImage grid_snapshot(const Grid& grid) {
    const std::int64_t n = grid.side();
    GrayImage image(n, n);
    const std::int64_t top =
        *std::max_element(grid.values().begin(), grid.values().end());
    if (top <= 0) {
        return image;
    }
    for (std::int64_t y = 0; y < n; ++y) {
        for (std::int64_t x = 0; x < n; ++x) {
            const std::int64_t v = grid.at(x, y);
            if (v > 0) {
                image.at(x, flip(y, n)) = static_cast<std::uint8_t>(
                    std::max<std::int64_t>(1, v * 255 / top));
            }
        }
    }
    return image;
}

void write_pbm(std::ostream& out, const BitImage& image) {
    out << "P4\n" << image.width << " " << image.height << "\n";
    const std::int64_t row_bytes = (image.width + 7) / 8;
    std::vector<char> row(static_cast<std::size_t>(row_bytes));
    for (std::int64_t y = 0; y < image.height; ++y) {
        std::fill(row.begin(), row.end(), 0);
        for (std::int64_t x = 0; x < image.width; ++x) {
            if (image.at(x, y)) {
                row[static_cast<std::size_t>(x / 8)] |=
                    static_cast<char>(0x80u >> (x % 8));
            }
        }
        out.write(row.data(), row_bytes);
    }
    if (!out) {
        throw std::runtime_error("pbm: write failed");
    }
}

void write_pgm(std::ostream& out, const GrayImage& image) {
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) {
        throw std::runtime_error("pgm: write failed");
    }
}

namespace {

std::ofstream open_binary(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    return out;
}

}  // namespace

void write_pbm_file(const std::string& path, const BitImage& image) {
    auto out = open_binary(path);
    write_pbm(out, image);
}

void write_pgm_file(const std::string& path, const GrayImage& image) {
    auto out = open_binary(path);
    write_pgm(out, image);
}

}  // namespace nbb
