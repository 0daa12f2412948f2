// Block-space thread map for NBB fractals: the lambda map, its inverse,
// intra-block mapping strategies and the compact-storage codec.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "nbb/fractal.hpp"

namespace nbb {

// One scale level's contribution to the map: replica selector, its step-box
// offset and the scaled offset in embedded space.
struct LevelOffset {
    int mu = 0;            // scale level in [1, r_b]
    int beta = 0;          // replica index in [0, k)
    ReplicaOffset tau;     // step-box offset of that replica
    EmbeddedCoord delta;   // tau * s^(mu-1)
};

// Replica selector for level mu: odd levels consume base-k digits of omega.x,
// even levels digits of omega.y.
int beta_index(const FractalSpec& spec, OrthotopeCoord omega, int mu);

// beta, tau and delta for one level of the descent.
LevelOffset level_offset(const FractalSpec& spec, OrthotopeCoord omega, int mu);

// Maps an orthotope block coordinate to its embedded fractal cell at the given
// level by summing per-level offsets. Bijective onto the member set.
// Throws std::out_of_range for omega outside the packing orthotope.
EmbeddedCoord lambda_map(const FractalSpec& spec, int level, OrthotopeCoord omega);

// Inverse of lambda_map, by recursive descent through the replica chain.
// Throws std::domain_error when p is not a member cell.
OrthotopeCoord lambda_inverse(const FractalSpec& spec, int level, EmbeddedCoord p);

// Closed-form replacement for the Sierpinski offset table:
// h(beta) = (beta/2, beta - beta/2). Valid for beta in {0, 1, 2}.
ReplicaOffset sierpinski_arith_hash(int beta);

// How threads inside a mapped block find their own cell.
enum class IntraBlockStrategy {
    FurtherUnrolling,   // re-apply the map in thread-local space
    SharedLookupTable,  // rho x rho table of precomputed local cells
    BoundingSubBoxes,   // identity offset plus a membership test
};

const char* to_string(IntraBlockStrategy strategy);
IntraBlockStrategy strategy_from_string(std::string_view name);

// Geometry of one launch: full embedding side n = s^r split into blocks of
// edge rho, leaving a block-space fractal of side n_b = n / rho.
struct BlockGeometry {
    std::int64_t n = 1;    // embedding side, s^r
    std::int64_t n_b = 1;  // block-space side, n / rho
    int r = 0;             // full-space scale level
    int r_b = 0;           // block-space scale level, log_s(n_b)
    int r_t = 0;           // intra-block scale level, log_s(rho)
    int rho = 1;           // block edge in threads

    // Validates that rho divides n and n_b is a power of s.
    static BlockGeometry create(const FractalSpec& spec, int r, int rho);
};

// Per-thread local cells inside one block, identical for every block of a
// launch. Inactive entries mark spare threads.
class LocalCellTable {
public:
    LocalCellTable(const FractalSpec& spec, int rho);

    int rho() const { return rho_; }
    const std::optional<EmbeddedCoord>& at(std::int64_t tx, std::int64_t ty) const {
        return cells_[static_cast<std::size_t>(ty) * rho_ + tx];
    }

private:
    int rho_ = 1;
    std::vector<std::optional<EmbeddedCoord>> cells_;
};

// Full-space cell of thread t inside block omega, or nullopt when the thread
// is a spare. t must satisfy 0 <= t < rho on both axes.
std::optional<EmbeddedCoord> map_thread(const FractalSpec& spec, const BlockGeometry& geom,
                                        OrthotopeCoord omega, EmbeddedCoord t,
                                        IntraBlockStrategy strategy);

// Dense k^level-cell representation of an embedded grid, laid out row-major
// over the packing orthotope with x fastest.
class CompactGrid {
public:
    CompactGrid(const FractalSpec& spec, int level);

    int level() const { return level_; }
    std::int64_t width() const { return width_; }
    std::int64_t height() const { return height_; }
    std::uint64_t size() const { return values_.size(); }

    std::int64_t& at(OrthotopeCoord omega) {
        return values_[static_cast<std::size_t>(omega.y) * width_ + omega.x];
    }
    std::int64_t at(OrthotopeCoord omega) const {
        return values_[static_cast<std::size_t>(omega.y) * width_ + omega.x];
    }

    const std::vector<std::int64_t>& values() const { return values_; }
    std::vector<std::int64_t>& values() { return values_; }

private:
    int level_ = 0;
    std::int64_t width_ = 1;
    std::int64_t height_ = 1;
    std::vector<std::int64_t> values_;
};

// Packs the member cells of an embedded row-major grid (side s^level) into a
// compact grid via the inverse map. Throws std::invalid_argument on a shape
// mismatch.
CompactGrid compact_store(const FractalSpec& spec, int level,
                          const std::vector<std::int64_t>& embedded);

// Unpacks a compact grid back into an embedded row-major grid; non-member
// cells receive empty_value.
std::vector<std::int64_t> compact_load(const FractalSpec& spec, const CompactGrid& compact,
                                       std::int64_t empty_value = 0);

// Binary serialization: 16-byte header (magic "NBBC", then k, s, level as
// little-endian u32), followed by the cell values as little-endian i64 in
// orthotope row-major order.
void write_compact(std::ostream& out, const FractalSpec& spec, const CompactGrid& grid);
CompactGrid read_compact(std::istream& in, const FractalSpec& spec);

}  // namespace nbb
