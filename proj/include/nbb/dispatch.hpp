// Virtual dispatch engine: launches grids of thread blocks over either the
// bounding-box embedding or the packed lambda orthotope, runs the three
// reference workloads, and keeps exact work counters so the two mappings can
// be compared by arithmetic instead of wall clocks.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nbb/block_map.hpp"
#include "nbb/fractal.hpp"

namespace nbb {

enum class MapMode { BoundingBox, Lambda };
enum class LambdaBackend { Direct, MmaV1, MmaV2, MmaV3 };

const char* to_string(MapMode mode);
MapMode mode_from_string(std::string_view name);
const char* to_string(LambdaBackend backend);
LambdaBackend backend_from_string(std::string_view name);

struct DispatchConfig {
    FractalSpec spec = FractalSpec::sierpinski();
    int r = 0;
    int rho = 1;  // block edge, one of 1,2,4,8,16,32
    MapMode mode = MapMode::Lambda;
    IntraBlockStrategy strategy = IntraBlockStrategy::BoundingSubBoxes;
    LambdaBackend backend = LambdaBackend::Direct;
    int workers = 1;
    bool timing = false;  // leave micros at 0 unless asked; keeps output reproducible
    std::uint64_t max_cells = kEnumerateBudget;  // membership raster budget

    // Throws std::invalid_argument on any unsupported combination.
    void validate() const;
};

// Exact per-launch counters. threads_active + threads_wasted always equals
// threads_launched; map_ops counts beta/hash/delta evaluations (one per map
// level, plus one per membership predicate and the one-time lookup-table
// build).
struct WorkReport {
    std::string spec_name;
    int r = 0;
    int rho = 1;
    MapMode mode = MapMode::Lambda;
    IntraBlockStrategy strategy = IntraBlockStrategy::BoundingSubBoxes;
    LambdaBackend backend = LambdaBackend::Direct;
    std::uint64_t blocks_launched = 0;
    std::uint64_t threads_launched = 0;
    std::uint64_t threads_active = 0;
    std::uint64_t threads_wasted = 0;
    std::uint64_t map_ops = 0;
    std::uint64_t micros = 0;  // informational only
    int map_levels = 0;        // levels resolved per block origin (0 in bb mode)

    static std::string csv_header();
    std::string csv_row() const;
};

// Dense embedded grid of 64-bit cells; non-member cells stay at the empty
// value and are never written by workloads.
class Grid {
public:
    Grid(const FractalSpec& spec, int r);

    int level() const { return r_; }
    std::int64_t side() const { return n_; }
    std::uint64_t generation() const { return generation_; }
    void bump_generation() { ++generation_; }

    std::int64_t& at(std::int64_t x, std::int64_t y) {
        return values_[static_cast<std::size_t>(y) * n_ + x];
    }
    std::int64_t at(std::int64_t x, std::int64_t y) const {
        return values_[static_cast<std::size_t>(y) * n_ + x];
    }

    const std::vector<std::int64_t>& values() const { return values_; }
    std::vector<std::int64_t>& values() { return values_; }

    bool operator==(const Grid& other) const {
        return r_ == other.r_ && n_ == other.n_ && values_ == other.values_;
    }

private:
    int r_ = 0;
    std::int64_t n_ = 1;
    std::uint64_t generation_ = 0;
    std::vector<std::int64_t> values_;
};

// Seeds member cells with rng() % modulus in row-major order, leaving
// non-members at zero. Mode-independent, so both mappings start equal.
Grid random_member_grid(const FractalSpec& spec, int r, std::uint64_t seed,
                        std::uint64_t modulus, std::uint64_t max_cells = kEnumerateBudget);

// Active threads receive their block's launch ordinal and their cell.
using Kernel = std::function<void(std::uint64_t block_ordinal, EmbeddedCoord cell)>;

// Enumerates every block of the configured orthotope, resolves each thread's
// cell and activity, invokes the kernel on active threads and returns the
// counters. Blocks are distributed over config.workers; results are identical
// for any worker count. A throwing kernel surfaces as std::runtime_error with
// the block and thread coordinates attached.
WorkReport launch(const DispatchConfig& config, const Kernel& kernel);

// How many blocks (or variant-2 sub-block slots) the config will launch.
std::uint64_t launch_block_count(const DispatchConfig& config);

// Workload 1: write the constant 1 to every member cell of a zeroed grid.
struct SingleWriteResult {
    Grid grid;
    WorkReport report;
};
SingleWriteResult run_single_write(const DispatchConfig& config);

// Workload 2: sum the member cells via per-block partials combined in a fixed
// tree order, exact for integer values.
struct ReductionResult {
    std::int64_t value = 0;
    WorkReport report;
};
ReductionResult run_reduction(const DispatchConfig& config, const Grid& grid);

// Life-like rule on the fractal-restricted Moore neighborhood: birth/survive
// masks index live-neighbor counts; non-member neighbors are skipped and the
// outside of the embedding is dead.
struct CaRule {
    std::uint16_t birth = 1u << 3;                  // B3
    std::uint16_t survive = (1u << 2) | (1u << 3);  // S23
};

// One double-buffered step per launch; returns the final state and one report
// per step.
struct CaResult {
    Grid grid;
    std::vector<WorkReport> reports;
};
CaResult run_ca(const DispatchConfig& config, const Grid& initial, int steps,
                CaRule rule = CaRule{});

// threads_BB / threads_lambda for two launches of the same (spec, r, rho).
// The weighted form charges each lambda thread its r_b map levels.
double work_quotient(const WorkReport& bounding_box, const WorkReport& lambda,
                     bool weighted = false);

}  // namespace nbb
