#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nbb/fractal.hpp"

namespace nbb {

// Row-major 8-bit rasters, y increasing downward (matching PBM/PGM row order).
struct GrayImage {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage(std::int64_t w, std::int64_t h, std::uint8_t fill = 0);
    std::uint8_t& at(std::int64_t x, std::int64_t y);
    std::uint8_t at(std::int64_t x, std::int64_t y) const;
    bool operator==(const GrayImage&) const = default;
};

struct BitImage {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<std::uint8_t> bits;  // one byte per cell, 0 or 1

    BitImage(std::int64_t w, std::int64_t h);
    std::uint8_t& at(std::int64_t x, std::int64_t y);
    std::uint8_t at(std::int64_t x, std::int64_t y) const;
    std::uint64_t count_set() const;
    bool operator==(const BitImage&) const = default;
};

// Membership raster of the embedded fractal: set bit = member cell.
BitImage render_membership(const FractalSpec& spec, int level);

// Orthotope raster shaded by each cell's top-level replica id, i.e. the
// digit that picks among the k coarsest copies of the fractal.
GrayImage render_packing(const FractalSpec& spec, int level);

// Orthotope and embedded rasters side by side, both shaded by the parity of
// the orthotope coordinate; a carried-over checkerboard shows the bijection.
GrayImage render_mapping(const FractalSpec& spec, int level);

class Grid;

// Snapshot of a workload grid, row 0 at the top. Zero cells are black; the
// rest scale linearly so the grid maximum lands on 255, clamped to at least 1
// so small values stay visible.
GrayImage grid_snapshot(const Grid& grid);

void write_pbm(std::ostream& out, const BitImage& image);
void write_pgm(std::ostream& out, const GrayImage& image);
void write_pbm_file(const std::string& path, const BitImage& image);
void write_pgm_file(const std::string& path, const GrayImage& image);

}  // namespace nbb
