#include "nbb/dispatch.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "nbb/mma.hpp"

namespace nbb {

const char* to_string(MapMode mode) {
    switch (mode) {
        case MapMode::BoundingBox: return "bb";
        case MapMode::Lambda: return "lambda";
    }
    throw std::invalid_argument("unknown map mode");
}

MapMode mode_from_string(std::string_view name) {
    if (name == "bb") return MapMode::BoundingBox;
    if (name == "lambda") return MapMode::Lambda;
    throw std::invalid_argument("unknown mode '" + std::string(name) + "' (expected bb or lambda)");
}

const char* to_string(LambdaBackend backend) {
    switch (backend) {
        case LambdaBackend::Direct: return "direct";
        case LambdaBackend::MmaV1: return "mma1";
        case LambdaBackend::MmaV2: return "mma2";
        case LambdaBackend::MmaV3: return "mma3";
    }
    throw std::invalid_argument("unknown backend");
}

LambdaBackend backend_from_string(std::string_view name) {
    if (name == "direct") return LambdaBackend::Direct;
    if (name == "mma1") return LambdaBackend::MmaV1;
    if (name == "mma2") return LambdaBackend::MmaV2;
    if (name == "mma3") return LambdaBackend::MmaV3;
    throw std::invalid_argument("unknown backend '" + std::string(name) +
                                "' (expected direct, mma1, mma2 or mma3)");
}

void DispatchConfig::validate() const {
    static constexpr int kAllowedRho[] = {1, 2, 4, 8, 16, 32};
    if (std::find(std::begin(kAllowedRho), std::end(kAllowedRho), rho) == std::end(kAllowedRho)) {
        throw std::invalid_argument("rho " + std::to_string(rho) +
                                    " is not one of 1, 2, 4, 8, 16, 32");
    }
    if (r < 0) {
        throw std::invalid_argument("negative scale level");
    }
    if (workers < 1) {
        throw std::invalid_argument("workers must be >= 1");
    }
    const std::int64_t n = spec.side_length(r);
    if (n % rho != 0) {
        throw std::invalid_argument("rho " + std::to_string(rho) + " does not divide n = " +
                                    std::to_string(n));
    }
    if (mode == MapMode::BoundingBox) {
        if (backend != LambdaBackend::Direct) {
            throw std::invalid_argument("lambda backends apply to lambda mode only");
        }
        return;
    }
    const BlockGeometry geom = BlockGeometry::create(spec, r, rho);
    switch (backend) {
        case LambdaBackend::Direct:
            break;
        case LambdaBackend::MmaV1:
            if (geom.r_b > kFragmentDim) {
                throw std::invalid_argument("variant 1 encodes at most 16 levels, r_b = " +
                                            std::to_string(geom.r_b));
            }
            break;
        case LambdaBackend::MmaV2: {
            if (rho < 2) {
                throw std::invalid_argument("variant 2 needs sub-blocks of edge rho/2 >= 1");
            }
            int sub_rt = 0;
            try {
                sub_rt = level_for_size(rho / 2, spec.scale_factor());
            } catch (const std::invalid_argument&) {
                throw std::invalid_argument("variant 2 sub-block edge " + std::to_string(rho / 2) +
                                            " is not a power of s = " +
                                            std::to_string(spec.scale_factor()));
            }
            if (r - sub_rt > kFragmentDim) {
                throw std::invalid_argument("variant 2 encodes at most 16 levels");
            }
            break;
        }
        case LambdaBackend::MmaV3:
            if (rho != kFragmentDim) {
                throw std::invalid_argument("variant 3 runs at rho = 16 only, got " +
                                            std::to_string(rho));
            }
            if (strategy != IntraBlockStrategy::BoundingSubBoxes) {
                throw std::invalid_argument(
                    "variant 3 emits sub-box thread coordinates; use the subbox strategy");
            }
            if (geom.r_b > kFragmentDim) {
                throw std::invalid_argument("variant 3 encodes at most 16 levels");
            }
            break;
    }
}

std::string WorkReport::csv_header() {
    return "# spec,r,rho,mode,strategy,backend,blocks,threads,active,wasted,map_ops,micros";
}

std::string WorkReport::csv_row() const {
    std::ostringstream out;
    out << spec_name << ',' << r << ',' << rho << ',' << to_string(mode) << ','
        << to_string(strategy) << ',' << to_string(backend) << ',' << blocks_launched << ','
        << threads_launched << ',' << threads_active << ',' << threads_wasted << ',' << map_ops
        << ',' << micros;
    return out.str();
}

Grid::Grid(const FractalSpec& spec, int r) : r_(r), n_(spec.side_length(r)) {
    values_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), 0);
}

Grid random_member_grid(const FractalSpec& spec, int r, std::uint64_t seed,
                        std::uint64_t modulus, std::uint64_t max_cells) {
    if (modulus == 0) {
        throw std::invalid_argument("random_member_grid: modulus must be positive");
    }
    Grid grid(spec, r);
    const MemberMask mask(spec, r, max_cells);
    std::mt19937_64 rng(seed);
    for (std::int64_t y = 0; y < grid.side(); ++y) {
        for (std::int64_t x = 0; x < grid.side(); ++x) {
            if (mask.test(x, y)) {
                grid.at(x, y) = static_cast<std::int64_t>(rng() % modulus);
            }
        }
    }
    return grid;
}

namespace {

struct LaunchPlan {
    std::int64_t gw = 1;      // launch grid width in blocks (or sub-block slots)
    std::int64_t gh = 1;
    int edge = 1;             // thread-block edge
    int map_level = 0;        // levels consumed per block origin
    int local_level = 0;      // intra-block fractal level
    std::int64_t local_w = 1;         // local orthotope width (unrolling)
    std::uint64_t local_members = 1;  // k^local_level
    std::int64_t sub_w = -1;          // variant-2 in-range bounds, -1 when unused
    std::int64_t sub_h = -1;
};

LaunchPlan make_plan(const DispatchConfig& config) {
    LaunchPlan plan;
    if (config.mode == MapMode::BoundingBox) {
        const std::int64_t n = config.spec.side_length(config.r);
        plan.gw = plan.gh = n / config.rho;
        plan.edge = config.rho;
        return plan;
    }
    const BlockGeometry geom = BlockGeometry::create(config.spec, config.r, config.rho);
    if (config.backend == LambdaBackend::MmaV2) {
        const int sub_rt = level_for_size(config.rho / 2, config.spec.scale_factor());
        const int r_sb = config.r - sub_rt;
        const auto shape = variant2_launch_shape(config.spec, r_sb);
        plan.gw = (shape.sub_w + 1) / 2 * 2;
        plan.gh = (shape.sub_h + 1) / 2 * 2;
        plan.sub_w = shape.sub_w;
        plan.sub_h = shape.sub_h;
        plan.edge = config.rho / 2;
        plan.map_level = r_sb;
        plan.local_level = sub_rt;
    } else {
        const auto [w, h] = config.spec.orthotope_dims(geom.r_b);
        plan.gw = w;
        plan.gh = h;
        plan.edge = config.rho;
        plan.map_level = geom.r_b;
        plan.local_level = geom.r_t;
    }
    plan.local_w = config.spec.orthotope_dims(plan.local_level).first;
    plan.local_members =
        checked_pow(static_cast<std::uint64_t>(config.spec.replica_count()), plan.local_level);
    return plan;
}

struct Tally {
    std::uint64_t blocks = 0;
    std::uint64_t launched = 0;
    std::uint64_t active = 0;
    std::uint64_t wasted = 0;
    std::uint64_t map_ops = 0;
    std::uint64_t fail_ordinal = std::numeric_limits<std::uint64_t>::max();
    std::string fail_message;
};

WorkReport launch_impl(const DispatchConfig& config, const Kernel& kernel,
                       const MemberMask* shared_mask) {
    config.validate();
    const LaunchPlan plan = make_plan(config);
    const FractalSpec& spec = config.spec;

    // Strategy helpers built once per launch.
    std::optional<MemberMask> own_bb_mask;
    const MemberMask* bb_mask = shared_mask;
    if (config.mode == MapMode::BoundingBox && bb_mask == nullptr) {
        own_bb_mask.emplace(spec, config.r, config.max_cells);
        bb_mask = &*own_bb_mask;
    }
    std::optional<MemberMask> local_mask;
    std::optional<LocalCellTable> table;
    std::uint64_t table_build_ops = 0;
    if (config.mode == MapMode::Lambda) {
        switch (config.strategy) {
            case IntraBlockStrategy::BoundingSubBoxes:
                local_mask.emplace(spec, plan.local_level);
                break;
            case IntraBlockStrategy::SharedLookupTable:
                table.emplace(spec, plan.edge);
                table_build_ops =
                    plan.local_members * static_cast<std::uint64_t>(plan.local_level);
                break;
            case IntraBlockStrategy::FurtherUnrolling:
                break;
        }
    }

    const std::uint64_t total_blocks =
        static_cast<std::uint64_t>(plan.gw) * static_cast<std::uint64_t>(plan.gh);
    const int worker_count = static_cast<int>(
        std::min<std::uint64_t>(static_cast<std::uint64_t>(config.workers), total_blocks));
    const int workers = std::max(worker_count, 1);

    std::optional<BlockGeometry> v3_geom;
    if (config.mode == MapMode::Lambda && config.backend == LambdaBackend::MmaV3) {
        v3_geom = BlockGeometry::create(spec, config.r, config.rho);
    }

    std::vector<Tally> tallies(static_cast<std::size_t>(workers));
    std::atomic<bool> abort{false};

    auto run_range = [&](std::uint64_t begin, std::uint64_t end, Tally& tally) {
        const int edge = plan.edge;
        Fragment v2_pairs;      // cached variant-2 result row
        std::uint64_t v2_group = std::numeric_limits<std::uint64_t>::max();
        for (std::uint64_t ordinal = begin; ordinal < end; ++ordinal) {
            if (abort.load(std::memory_order_relaxed)) {
                return;
            }
            const std::int64_t gx = static_cast<std::int64_t>(ordinal % plan.gw);
            const std::int64_t gy = static_cast<std::int64_t>(ordinal / plan.gw);
            ++tally.blocks;
            tally.launched += static_cast<std::uint64_t>(edge) * edge;

            auto fail = [&](std::int64_t tx, std::int64_t ty, const char* what) {
                if (ordinal < tally.fail_ordinal) {
                    tally.fail_ordinal = ordinal;
                    tally.fail_message = "kernel failed in block (" + std::to_string(gx) + "," +
                                         std::to_string(gy) + ") at thread (" +
                                         std::to_string(tx) + "," + std::to_string(ty) +
                                         "): " + what;
                }
                abort.store(true, std::memory_order_relaxed);
            };

            if (config.mode == MapMode::BoundingBox) {
                const std::int64_t bx = gx * edge;
                const std::int64_t by = gy * edge;
                for (std::int64_t ty = 0; ty < edge; ++ty) {
                    for (std::int64_t tx = 0; tx < edge; ++tx) {
                        ++tally.map_ops;  // membership predicate
                        const std::int64_t cx = bx + tx;
                        const std::int64_t cy = by + ty;
                        if (bb_mask->test(cx, cy)) {
                            ++tally.active;
                            try {
                                kernel(ordinal, {cx, cy});
                            } catch (const std::exception& e) {
                                fail(tx, ty, e.what());
                                return;
                            }
                        } else {
                            ++tally.wasted;
                        }
                    }
                }
                continue;
            }

            // Lambda mode: resolve the block origin through the backend.
            EmbeddedCoord origin;
            const Fragment* dx = nullptr;
            const Fragment* dy = nullptr;
            Fragment v3_dx, v3_dy;
            switch (config.backend) {
                case LambdaBackend::Direct:
                    origin = lambda_map(spec, plan.map_level, {gx, gy});
                    tally.map_ops += static_cast<std::uint64_t>(plan.map_level);
                    break;
                case LambdaBackend::MmaV1: {
                    const auto enc = encode_variant1(spec, plan.map_level, {gx, gy});
                    const Fragment d = mma_eval(enc.a, enc.b, Fragment{});
                    origin = {static_cast<std::int64_t>(d.at(0, 0)),
                              static_cast<std::int64_t>(d.at(0, 1))};
                    tally.map_ops += static_cast<std::uint64_t>(plan.map_level);
                    break;
                }
                case LambdaBackend::MmaV2: {
                    if (gx >= plan.sub_w || gy >= plan.sub_h) {
                        // Padding slot of the even-rounded cover: all spare.
                        tally.wasted += static_cast<std::uint64_t>(edge) * edge;
                        continue;
                    }
                    const std::uint64_t group = ordinal / 8;
                    if (group != v2_group) {
                        std::vector<OrthotopeCoord> coords;
                        const std::uint64_t first = group * 8;
                        const std::uint64_t last = std::min(first + 8, total_blocks);
                        for (std::uint64_t o = first; o < last; ++o) {
                            coords.push_back({static_cast<std::int64_t>(o % plan.gw),
                                              static_cast<std::int64_t>(o / plan.gw)});
                        }
                        const auto enc = encode_variant2(spec, plan.map_level, coords);
                        v2_pairs = mma_eval(enc.a, enc.b, Fragment{});
                        v2_group = group;
                    }
                    const int slot = static_cast<int>(ordinal % 8);
                    origin = {static_cast<std::int64_t>(v2_pairs.at(0, 2 * slot)),
                              static_cast<std::int64_t>(v2_pairs.at(0, 2 * slot + 1))};
                    tally.map_ops += static_cast<std::uint64_t>(plan.map_level);
                    break;
                }
                case LambdaBackend::MmaV3: {
                    const auto enc = encode_variant3(spec, *v3_geom, {gx, gy});
                    v3_dx = mma_eval(enc.a, enc.bx, enc.cx);
                    v3_dy = mma_eval(enc.a, enc.by, enc.cy);
                    dx = &v3_dx;
                    dy = &v3_dy;
                    tally.map_ops += static_cast<std::uint64_t>(plan.map_level);
                    break;
                }
            }
            origin = {origin.x * edge, origin.y * edge};

            for (std::int64_t ty = 0; ty < edge; ++ty) {
                for (std::int64_t tx = 0; tx < edge; ++tx) {
                    std::optional<EmbeddedCoord> cell;
                    switch (config.strategy) {
                        case IntraBlockStrategy::BoundingSubBoxes:
                            ++tally.map_ops;  // local membership predicate
                            if (local_mask->test(tx, ty)) {
                                if (dx != nullptr) {
                                    cell = EmbeddedCoord{
                                        static_cast<std::int64_t>(
                                            dx->at(static_cast<int>(tx), static_cast<int>(ty))),
                                        static_cast<std::int64_t>(
                                            dy->at(static_cast<int>(tx), static_cast<int>(ty)))};
                                } else {
                                    cell = EmbeddedCoord{origin.x + tx, origin.y + ty};
                                }
                            }
                            break;
                        case IntraBlockStrategy::FurtherUnrolling: {
                            const std::uint64_t rank =
                                static_cast<std::uint64_t>(ty) * static_cast<std::uint64_t>(edge) +
                                static_cast<std::uint64_t>(tx);
                            if (rank < plan.local_members) {
                                const OrthotopeCoord local{
                                    static_cast<std::int64_t>(rank %
                                                              static_cast<std::uint64_t>(plan.local_w)),
                                    static_cast<std::int64_t>(rank /
                                                              static_cast<std::uint64_t>(plan.local_w))};
                                const auto t = lambda_map(spec, plan.local_level, local);
                                tally.map_ops += static_cast<std::uint64_t>(plan.local_level);
                                cell = EmbeddedCoord{origin.x + t.x, origin.y + t.y};
                            }
                            break;
                        }
                        case IntraBlockStrategy::SharedLookupTable: {
                            const auto& entry = table->at(tx, ty);
                            if (entry) {
                                cell = EmbeddedCoord{origin.x + entry->x, origin.y + entry->y};
                            }
                            break;
                        }
                    }
                    if (cell) {
                        ++tally.active;
                        try {
                            kernel(ordinal, *cell);
                        } catch (const std::exception& e) {
                            fail(tx, ty, e.what());
                            return;
                        }
                    } else {
                        ++tally.wasted;
                    }
                }
            }
        }
    };

    const auto started = std::chrono::steady_clock::now();
    if (workers == 1) {
        run_range(0, total_blocks, tallies[0]);
    } else {
        const std::uint64_t chunk =
            (total_blocks + static_cast<std::uint64_t>(workers) - 1) /
            static_cast<std::uint64_t>(workers);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            const std::uint64_t begin = chunk * static_cast<std::uint64_t>(w);
            const std::uint64_t end = std::min(begin + chunk, total_blocks);
            pool.emplace_back(run_range, begin, end, std::ref(tallies[static_cast<std::size_t>(w)]));
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    const auto elapsed = std::chrono::steady_clock::now() - started;

    const Tally* failure = nullptr;
    for (const auto& tally : tallies) {
        if (tally.fail_ordinal != std::numeric_limits<std::uint64_t>::max() &&
            (failure == nullptr || tally.fail_ordinal < failure->fail_ordinal)) {
            failure = &tally;
        }
    }
    if (failure != nullptr) {
        throw std::runtime_error(failure->fail_message);
    }

    WorkReport report;
    report.spec_name = spec.name();
    report.r = config.r;
    report.rho = config.rho;
    report.mode = config.mode;
    report.strategy = config.strategy;
    report.backend = config.backend;
    report.map_levels = (config.mode == MapMode::Lambda) ? plan.map_level : 0;
    report.map_ops = table_build_ops;
    for (const auto& tally : tallies) {
        report.blocks_launched += tally.blocks;
        report.threads_launched += tally.launched;
        report.threads_active += tally.active;
        report.threads_wasted += tally.wasted;
        report.map_ops += tally.map_ops;
    }
    if (config.timing) {
        report.micros = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::microseconds>(elapsed).count());
    }
    return report;
}

}  // namespace

WorkReport launch(const DispatchConfig& config, const Kernel& kernel) {
    return launch_impl(config, kernel, nullptr);
}

std::uint64_t launch_block_count(const DispatchConfig& config) {
    config.validate();
    const LaunchPlan plan = make_plan(config);
    return static_cast<std::uint64_t>(plan.gw) * static_cast<std::uint64_t>(plan.gh);
}

SingleWriteResult run_single_write(const DispatchConfig& config) {
    SingleWriteResult result{Grid(config.spec, config.r), {}};
    Grid& grid = result.grid;
    result.report = launch(config, [&grid](std::uint64_t, EmbeddedCoord cell) {
        grid.at(cell.x, cell.y) = 1;
    });
    return result;
}

ReductionResult run_reduction(const DispatchConfig& config, const Grid& grid) {
    config.validate();
    if (grid.level() != config.r) {
        throw std::invalid_argument("reduction: grid level " + std::to_string(grid.level()) +
                                    " does not match the configured r = " + std::to_string(config.r));
    }
    std::vector<std::int64_t> partials(launch_block_count(config), 0);
    ReductionResult result;
    result.report = launch(config, [&partials, &grid](std::uint64_t block, EmbeddedCoord cell) {
        partials[block] += grid.at(cell.x, cell.y);
    });
    // Fixed pairwise tree, independent of block scheduling.
    std::size_t len = partials.size();
    while (len > 1) {
        const std::size_t half = len / 2;
        for (std::size_t i = 0; i < half; ++i) {
            partials[i] = partials[2 * i] + partials[2 * i + 1];
        }
        if (len % 2 != 0) {
            partials[half] = partials[len - 1];
        }
        len = half + len % 2;
    }
    result.value = partials.empty() ? 0 : partials[0];
    return result;
}

CaResult run_ca(const DispatchConfig& config, const Grid& initial, int steps, CaRule rule) {
    config.validate();
    if (initial.level() != config.r) {
        throw std::invalid_argument("ca: grid level does not match the configured r");
    }
    if (steps < 0) {
        throw std::invalid_argument("ca: negative step count");
    }
    const MemberMask mask(config.spec, config.r, config.max_cells);
    CaResult result{initial, {}};
    Grid next(config.spec, config.r);
    for (int step = 0; step < steps; ++step) {
        const Grid& src = result.grid;
        std::fill(next.values().begin(), next.values().end(), 0);
        auto report = launch_impl(
            config,
            [&](std::uint64_t, EmbeddedCoord cell) {
                int live = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) {
                            continue;
                        }
                        const std::int64_t nx = cell.x + dx;
                        const std::int64_t ny = cell.y + dy;
                        if (mask.test(nx, ny) && src.at(nx, ny) != 0) {
                            ++live;
                        }
                    }
                }
                const std::uint16_t bit = static_cast<std::uint16_t>(1u << live);
                const bool alive = src.at(cell.x, cell.y) != 0;
                next.at(cell.x, cell.y) = ((alive ? rule.survive : rule.birth) & bit) ? 1 : 0;
            },
            config.mode == MapMode::BoundingBox ? &mask : nullptr);
        result.reports.push_back(std::move(report));
        std::swap(result.grid.values(), next.values());
        result.grid.bump_generation();
    }
    return result;
}

double work_quotient(const WorkReport& bounding_box, const WorkReport& lambda, bool weighted) {
    if (bounding_box.mode != MapMode::BoundingBox || lambda.mode != MapMode::Lambda) {
        throw std::invalid_argument("work_quotient takes one bb report and one lambda report");
    }
    if (bounding_box.spec_name != lambda.spec_name || bounding_box.r != lambda.r ||
        bounding_box.rho != lambda.rho) {
        throw std::invalid_argument("work_quotient: the reports describe different launches");
    }
    double denom = static_cast<double>(lambda.threads_launched);
    if (weighted) {
        denom *= static_cast<double>(std::max(lambda.map_levels, 1));
    }
    return static_cast<double>(bounding_box.threads_launched) / denom;
}

}  // namespace nbb
