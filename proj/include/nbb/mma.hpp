// Matrix-multiply-accumulate encodings of the block map: the offset sums are
// packed into 16x16 fragments so one D = A*B + C evaluation yields block (or
// thread) coordinates. Plain double arithmetic stands in for tensor cores;
// the point is the encoding, not the hardware.
#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "nbb/block_map.hpp"
#include "nbb/fractal.hpp"

namespace nbb {

inline constexpr int kFragmentDim = 16;

// One MMA fragment. Entries outside an encoding's filled pattern stay zero.
struct Fragment {
    std::array<double, kFragmentDim * kFragmentDim> cells{};

    double& at(int i, int j) { return cells[static_cast<std::size_t>(i) * kFragmentDim + j]; }
    double at(int i, int j) const { return cells[static_cast<std::size_t>(i) * kFragmentDim + j]; }

    bool operator==(const Fragment&) const = default;
};

// D = A*B + C, exact over integer-valued inputs.
Fragment mma_eval(const Fragment& a, const Fragment& b, const Fragment& c);

// Variant 1: one block coordinate per evaluation. A row 0 carries the scale
// powers s^0..s^(r_b-1); B column 0 the per-level tau_x, column 1 tau_y.
// D[0][0], D[0][1] come out as lambda(omega).
struct Variant1Encoding {
    Fragment a;
    Fragment b;
};
Variant1Encoding encode_variant1(const FractalSpec& spec, int level, OrthotopeCoord omega);

// Variant 2: up to eight sub-block coordinates per evaluation; pair i lands
// in D row 0, columns 2i and 2i+1. Coordinates outside the sub-block
// orthotope are accepted but flagged inactive (their columns stay zero).
struct Variant2Encoding {
    Fragment a;
    Fragment b;
    std::array<bool, 8> active{};
    int count = 0;
};
Variant2Encoding encode_variant2(const FractalSpec& spec, int level,
                                 std::span<const OrthotopeCoord> omegas);

// Sub-block launch cover for variant 2: the sub-block orthotope rounded up to
// even dimensions so sub-blocks batch in 2x2 groups; surplus slots are
// inactive. The inactive share vanishes as the level grows.
struct Variant2LaunchShape {
    std::int64_t sub_w = 1;    // sub-block orthotope width
    std::int64_t sub_h = 1;    // and height
    std::int64_t slots = 1;    // launched sub-block slots (even-rounded cover)
    std::int64_t inactive = 0; // slots outside the orthotope
};
Variant2LaunchShape variant2_launch_shape(const FractalSpec& spec, int level);

// Variant 3: whole-block encoding at rho = 16; every fragment cell is one
// thread. A repeats the power row scaled by rho, Bx/By carry the per-level
// tau as constant rows, Cx/Cy hold each thread's intra-block offset. Then
// Dx[i][j] = rho*lambda_x + i and Dy[i][j] = rho*lambda_y + j give thread
// (tx=i, ty=j)'s global cell; activity is still the membership test's call.
struct Variant3Encoding {
    Fragment a;
    Fragment bx;
    Fragment cx;
    Fragment by;
    Fragment cy;
};
Variant3Encoding encode_variant3(const FractalSpec& spec, const BlockGeometry& geom,
                                 OrthotopeCoord omega);

}  // namespace nbb
