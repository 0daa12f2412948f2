// Fractal descriptors for the non-overlapping bottom-up box (NBB) family,
// with ground-truth membership / enumeration oracles.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nbb {

// Thrown when a request exceeds a configured memory/size budget.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Coordinate in the n x n embedding grid (x right, y down).
struct EmbeddedCoord {
    std::int64_t x = 0;
    std::int64_t y = 0;
    auto operator<=>(const EmbeddedCoord&) const = default;
};

// Block coordinate in the rectangular parallel index space.
struct OrthotopeCoord {
    std::int64_t x = 0;
    std::int64_t y = 0;
    auto operator<=>(const OrthotopeCoord&) const = default;
};

// Which cell of the s x s step box a replica occupies.
struct ReplicaOffset {
    int x = 0;
    int y = 0;
    auto operator<=>(const ReplicaOffset&) const = default;
};

// base^exp with overflow detection; throws std::overflow_error instead of wrapping.
std::uint64_t checked_pow(std::uint64_t base, int exp);

// Scale level r such that n == s^r; rejects n that is not an exact power of s.
int level_for_size(std::int64_t n, int scale_factor);

// Default cell budget for enumeration-style oracles (2^24 cells).
inline constexpr std::uint64_t kEnumerateBudget = std::uint64_t{1} << 24;

// An NBB fractal: k translated replicas of the previous scale level placed in
// an s-times larger box, replica cells pairwise distinct.
class FractalSpec {
public:
    FractalSpec(std::string name, int replica_count, int scale_factor,
                std::vector<ReplicaOffset> offsets);

    static FractalSpec sierpinski();  // k=3, s=2
    static FractalSpec vicsek();      // k=5, s=3
    static FractalSpec carpet();      // k=8, s=3

    // Resolves one of the shipped spec names above; throws std::invalid_argument.
    static FractalSpec builtin(std::string_view name);
    static const std::vector<std::string>& builtin_names();

    // Plain-text config: lines `name=`, `k=`, `s=`, then k lines `offset=x,y`.
    static FractalSpec from_stream(std::istream& in);
    static FractalSpec from_file(const std::string& path);

    const std::string& name() const { return name_; }
    int replica_count() const { return k_; }
    int scale_factor() const { return s_; }
    const std::vector<ReplicaOffset>& offsets() const { return offsets_; }

    // Replica index occupying step-box cell (cx, cy), or -1 if the cell is empty.
    int replica_at(int cx, int cy) const {
        return cell_to_replica_[static_cast<std::size_t>(cy) * s_ + cx];
    }

    std::int64_t side_length(int level) const;          // s^level
    std::uint64_t volume(int level) const;               // k^level
    double hausdorff() const;                             // log(k)/log(s)

    // Dimensions (k^ceil(level/2), k^floor(level/2)) of the packing orthotope.
    std::pair<std::int64_t, std::int64_t> orthotope_dims(int level) const;

    // Ground-truth membership by recursive descent through the replica chain.
    bool is_member(EmbeddedCoord p, int level) const;

    // All member cells at the given level, sorted by (x, y). Cardinality k^level.
    std::vector<EmbeddedCoord> enumerate(int level,
                                         std::uint64_t max_cells = kEnumerateBudget) const;

    bool operator==(const FractalSpec&) const = default;

private:
    std::string name_;
    int k_ = 0;
    int s_ = 0;
    std::vector<ReplicaOffset> offsets_;
    std::vector<std::int16_t> cell_to_replica_;  // s*s cells -> replica index or -1
};

// Byte-per-cell membership bitmap of one embedding; O(1) clipped queries.
class MemberMask {
public:
    MemberMask(const FractalSpec& spec, int level,
               std::uint64_t max_cells = kEnumerateBudget);

    std::int64_t side() const { return side_; }
    std::uint64_t count() const { return count_; }

    // False outside the embedding; D14-style dead boundary.
    bool test(std::int64_t x, std::int64_t y) const {
        return x >= 0 && y >= 0 && x < side_ && y < side_ &&
               bits_[static_cast<std::size_t>(y) * side_ + x] != 0;
    }

    const std::vector<std::uint8_t>& bytes() const { return bits_; }

private:
    std::int64_t side_ = 0;
    std::uint64_t count_ = 0;
    std::vector<std::uint8_t> bits_;
};

}  // namespace nbb
