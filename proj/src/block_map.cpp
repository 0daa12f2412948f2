#include "nbb/block_map.hpp"

#include <cstring>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace nbb {
namespace {

std::int64_t ipow(int base, int exp) {
    const std::uint64_t v = checked_pow(static_cast<std::uint64_t>(base), exp);
    if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw std::overflow_error("power overflows int64");
    }
    return static_cast<std::int64_t>(v);
}

// Linearized further-unrolling: thread (tx, ty) gets rank ty*rho + tx; the
// first k^{r_t} ranks cover the local orthotope row-major, the rest are spare.
std::optional<EmbeddedCoord> unrolled_local_cell(const FractalSpec& spec, int r_t, int rho,
                                                 EmbeddedCoord t) {
    const std::uint64_t members = checked_pow(static_cast<std::uint64_t>(spec.replica_count()), r_t);
    const std::uint64_t rank = static_cast<std::uint64_t>(t.y) * rho + static_cast<std::uint64_t>(t.x);
    if (rank >= members) {
        return std::nullopt;
    }
    const auto [w, h] = spec.orthotope_dims(r_t);
    (void)h;
    const OrthotopeCoord local{static_cast<std::int64_t>(rank % static_cast<std::uint64_t>(w)),
                               static_cast<std::int64_t>(rank / static_cast<std::uint64_t>(w))};
    return lambda_map(spec, r_t, local);
}

// map_thread is a pure view of the lookup-table strategy, so the tables it
// implies are kept in a small process-wide cache instead of being rebuilt per
// call. Real launches hold their own LocalCellTable.
const LocalCellTable& cached_table(const FractalSpec& spec, int rho) {
    static std::mutex mutex;
    static std::vector<std::pair<std::pair<FractalSpec, int>, LocalCellTable>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    for (const auto& entry : cache) {
        if (entry.first.second == rho && entry.first.first == spec) {
            return entry.second;
        }
    }
    cache.emplace_back(std::make_pair(spec, rho), LocalCellTable(spec, rho));
    return cache.back().second;
}

}  // namespace

int beta_index(const FractalSpec& spec, OrthotopeCoord omega, int mu) {
    if (mu < 1) {
        throw std::out_of_range("beta: level index " + std::to_string(mu) + " must be >= 1");
    }
    const int k = spec.replica_count();
    const std::int64_t value = (mu % 2 == 1) ? omega.x : omega.y;
    const std::int64_t divisor = ipow(k, (mu + 1) / 2 - 1);
    return static_cast<int>((value / divisor) % k);
}

LevelOffset level_offset(const FractalSpec& spec, OrthotopeCoord omega, int mu) {
    LevelOffset lo;
    lo.mu = mu;
    lo.beta = beta_index(spec, omega, mu);
    lo.tau = spec.offsets()[static_cast<std::size_t>(lo.beta)];
    const std::int64_t scale = ipow(spec.scale_factor(), mu - 1);
    lo.delta = {lo.tau.x * scale, lo.tau.y * scale};
    return lo;
}

EmbeddedCoord lambda_map(const FractalSpec& spec, int level, OrthotopeCoord omega) {
    if (level < 0) {
        throw std::invalid_argument("lambda: negative level");
    }
    const auto [w, h] = spec.orthotope_dims(level);
    if (omega.x < 0 || omega.y < 0 || omega.x >= w || omega.y >= h) {
        throw std::out_of_range("lambda: omega (" + std::to_string(omega.x) + "," +
                                std::to_string(omega.y) + ") outside the " + std::to_string(w) +
                                "x" + std::to_string(h) + " orthotope");
    }
    const int k = spec.replica_count();
    const int s = spec.scale_factor();
    // Consume base-k digits of omega.x on odd levels and of omega.y on even
    // ones; each digit picks the replica whose offset, scaled by s^(mu-1),
    // contributes to the embedded position.
    std::int64_t dx = omega.x;
    std::int64_t dy = omega.y;
    std::int64_t scale = 1;
    EmbeddedCoord p;
    for (int mu = 1; mu <= level; ++mu) {
        int beta;
        if (mu % 2 == 1) {
            beta = static_cast<int>(dx % k);
            dx /= k;
        } else {
            beta = static_cast<int>(dy % k);
            dy /= k;
        }
        const ReplicaOffset tau = spec.offsets()[static_cast<std::size_t>(beta)];
        p.x += tau.x * scale;
        p.y += tau.y * scale;
        scale *= s;
    }
    return p;
}

OrthotopeCoord lambda_inverse(const FractalSpec& spec, int level, EmbeddedCoord p) {
    if (level < 0) {
        throw std::invalid_argument("lambda_inverse: negative level");
    }
    const std::int64_t n = spec.side_length(level);
    if (p.x < 0 || p.y < 0 || p.x >= n || p.y >= n) {
        throw std::out_of_range("lambda_inverse: (" + std::to_string(p.x) + "," +
                                std::to_string(p.y) + ") outside " + std::to_string(n) + "^2");
    }
    const int k = spec.replica_count();
    const int s = spec.scale_factor();
    std::int64_t x = p.x;
    std::int64_t y = p.y;
    std::int64_t scale = n / s;
    OrthotopeCoord omega;
    for (int mu = level; mu >= 1; --mu) {
        const int cx = static_cast<int>(x / scale);
        const int cy = static_cast<int>(y / scale);
        const int beta = spec.replica_at(cx, cy);
        if (beta < 0) {
            throw std::domain_error("lambda_inverse: (" + std::to_string(p.x) + "," +
                                    std::to_string(p.y) + ") is not a member cell at level " +
                                    std::to_string(level));
        }
        const std::int64_t digit_scale = ipow(k, (mu + 1) / 2 - 1);
        if (mu % 2 == 1) {
            omega.x += beta * digit_scale;
        } else {
            omega.y += beta * digit_scale;
        }
        x -= cx * scale;
        y -= cy * scale;
        scale /= s;
    }
    return omega;
}

ReplicaOffset sierpinski_arith_hash(int beta) {
    if (beta < 0 || beta > 2) {
        throw std::domain_error("arith hash: beta " + std::to_string(beta) + " outside {0,1,2}");
    }
    return {beta / 2, beta - beta / 2};
}

const char* to_string(IntraBlockStrategy strategy) {
    switch (strategy) {
        case IntraBlockStrategy::FurtherUnrolling: return "unroll";
        case IntraBlockStrategy::SharedLookupTable: return "lut";
        case IntraBlockStrategy::BoundingSubBoxes: return "subbox";
    }
    throw std::invalid_argument("unknown strategy");
}

IntraBlockStrategy strategy_from_string(std::string_view name) {
    if (name == "unroll") return IntraBlockStrategy::FurtherUnrolling;
    if (name == "lut") return IntraBlockStrategy::SharedLookupTable;
    if (name == "subbox") return IntraBlockStrategy::BoundingSubBoxes;
    throw std::invalid_argument("unknown strategy '" + std::string(name) +
                                "' (expected unroll, lut or subbox)");
}

BlockGeometry BlockGeometry::create(const FractalSpec& spec, int r, int rho) {
    if (r < 0) {
        throw std::invalid_argument("block geometry: negative level");
    }
    if (rho < 1) {
        throw std::invalid_argument("block geometry: rho must be positive");
    }
    BlockGeometry g;
    g.r = r;
    g.rho = rho;
    g.n = spec.side_length(r);
    // rho = s^{r_t} keeps the block space an NBB fractal; level_for_size
    // rejects every other block edge.
    g.r_t = level_for_size(rho, spec.scale_factor());
    if (g.r_t > r) {
        throw std::invalid_argument("block geometry: rho " + std::to_string(rho) +
                                    " exceeds the embedding side " + std::to_string(g.n));
    }
    g.r_b = r - g.r_t;
    g.n_b = g.n / rho;
    return g;
}

LocalCellTable::LocalCellTable(const FractalSpec& spec, int rho) : rho_(rho) {
    const int r_t = level_for_size(rho, spec.scale_factor());
    cells_.resize(static_cast<std::size_t>(rho) * static_cast<std::size_t>(rho));
    for (std::int64_t ty = 0; ty < rho; ++ty) {
        for (std::int64_t tx = 0; tx < rho; ++tx) {
            cells_[static_cast<std::size_t>(ty) * rho + tx] =
                unrolled_local_cell(spec, r_t, rho, {tx, ty});
        }
    }
}

std::optional<EmbeddedCoord> map_thread(const FractalSpec& spec, const BlockGeometry& geom,
                                        OrthotopeCoord omega, EmbeddedCoord t,
                                        IntraBlockStrategy strategy) {
    if (t.x < 0 || t.y < 0 || t.x >= geom.rho || t.y >= geom.rho) {
        throw std::out_of_range("map_thread: thread (" + std::to_string(t.x) + "," +
                                std::to_string(t.y) + ") outside the " + std::to_string(geom.rho) +
                                "^2 block");
    }
    const EmbeddedCoord origin = lambda_map(spec, geom.r_b, omega);
    std::optional<EmbeddedCoord> local;
    switch (strategy) {
        case IntraBlockStrategy::BoundingSubBoxes:
            if (!spec.is_member(t, geom.r_t)) {
                return std::nullopt;
            }
            local = t;
            break;
        case IntraBlockStrategy::FurtherUnrolling:
            local = unrolled_local_cell(spec, geom.r_t, geom.rho, t);
            break;
        case IntraBlockStrategy::SharedLookupTable:
            local = cached_table(spec, geom.rho).at(t.x, t.y);
            break;
    }
    if (!local) {
        return std::nullopt;
    }
    return EmbeddedCoord{origin.x * geom.rho + local->x, origin.y * geom.rho + local->y};
}

CompactGrid::CompactGrid(const FractalSpec& spec, int level) : level_(level) {
    const auto [w, h] = spec.orthotope_dims(level);
    width_ = w;
    height_ = h;
    values_.assign(static_cast<std::size_t>(spec.volume(level)), 0);
}

CompactGrid compact_store(const FractalSpec& spec, int level,
                          const std::vector<std::int64_t>& embedded) {
    const std::int64_t n = spec.side_length(level);
    const auto expected = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
    if (embedded.size() != expected) {
        throw std::invalid_argument("compact_store: embedded grid holds " +
                                    std::to_string(embedded.size()) + " cells, expected " +
                                    std::to_string(expected));
    }
    CompactGrid grid(spec, level);
    for (std::int64_t oy = 0; oy < grid.height(); ++oy) {
        for (std::int64_t ox = 0; ox < grid.width(); ++ox) {
            const EmbeddedCoord p = lambda_map(spec, level, {ox, oy});
            grid.at({ox, oy}) = embedded[static_cast<std::size_t>(p.y) * n + p.x];
        }
    }
    return grid;
}

std::vector<std::int64_t> compact_load(const FractalSpec& spec, const CompactGrid& compact,
                                       std::int64_t empty_value) {
    const auto [w, h] = spec.orthotope_dims(compact.level());
    if (compact.width() != w || compact.height() != h ||
        compact.size() != static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h)) {
        throw std::invalid_argument("compact_load: grid shape does not match spec '" +
                                    spec.name() + "' at level " + std::to_string(compact.level()));
    }
    const std::int64_t n = spec.side_length(compact.level());
    std::vector<std::int64_t> embedded(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                                       empty_value);
    for (std::int64_t oy = 0; oy < h; ++oy) {
        for (std::int64_t ox = 0; ox < w; ++ox) {
            const EmbeddedCoord p = lambda_map(spec, compact.level(), {ox, oy});
            embedded[static_cast<std::size_t>(p.y) * n + p.x] = compact.at({ox, oy});
        }
    }
    return embedded;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                           static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    out.write(bytes, 4);
}

void put_i64(std::ostream& out, std::int64_t value) {
    auto v = static_cast<std::uint64_t>(value);
    char bytes[8];
    for (int i = 0; i < 8; ++i) {
        bytes[i] = static_cast<char>(v >> (8 * i));
    }
    out.write(bytes, 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw std::invalid_argument("compact file: truncated header");
    }
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

std::int64_t get_i64(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
        throw std::invalid_argument("compact file: truncated payload");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    return static_cast<std::int64_t>(v);
}

constexpr char kMagic[4] = {'N', 'B', 'B', 'C'};

}  // namespace

void write_compact(std::ostream& out, const FractalSpec& spec, const CompactGrid& grid) {
    out.write(kMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(spec.replica_count()));
    put_u32(out, static_cast<std::uint32_t>(spec.scale_factor()));
    put_u32(out, static_cast<std::uint32_t>(grid.level()));
    for (const std::int64_t value : grid.values()) {
        put_i64(out, value);
    }
    if (!out) {
        throw std::runtime_error("compact file: write failed");
    }
}

CompactGrid read_compact(std::istream& in, const FractalSpec& spec) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::invalid_argument("compact file: bad magic");
    }
    const std::uint32_t k = get_u32(in);
    const std::uint32_t s = get_u32(in);
    const std::uint32_t level = get_u32(in);
    if (k != static_cast<std::uint32_t>(spec.replica_count()) ||
        s != static_cast<std::uint32_t>(spec.scale_factor())) {
        throw std::invalid_argument("compact file: header (k=" + std::to_string(k) + ", s=" +
                                    std::to_string(s) + ") does not match spec '" + spec.name() +
                                    "'");
    }
    if (level > 64) {
        throw std::invalid_argument("compact file: implausible level " + std::to_string(level));
    }
    CompactGrid grid(spec, static_cast<int>(level));
    for (auto& value : grid.values()) {
        value = get_i64(in);
    }
    return grid;
}

}  // namespace nbb
