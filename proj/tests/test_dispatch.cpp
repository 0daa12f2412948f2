#include "nbb/dispatch.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "doctest.h"

using namespace nbb;

namespace {

DispatchConfig make_config(const FractalSpec& spec, int r, int rho, MapMode mode,
                           IntraBlockStrategy strategy = IntraBlockStrategy::BoundingSubBoxes,
                           LambdaBackend backend = LambdaBackend::Direct, int workers = 1) {
    DispatchConfig config;
    config.spec = spec;
    config.r = r;
    config.rho = rho;
    config.mode = mode;
    config.strategy = strategy;
    config.backend = backend;
    config.workers = workers;
    return config;
}

std::int64_t oracle_sum(const FractalSpec& spec, const Grid& grid) {
    const MemberMask mask(spec, grid.level());
    std::int64_t sum = 0;
    for (std::int64_t y = 0; y < grid.side(); ++y) {
        for (std::int64_t x = 0; x < grid.side(); ++x) {
            if (mask.test(x, y)) {
                sum += grid.at(x, y);
            }
        }
    }
    return sum;
}

// Dense masked automaton, evolved cell-by-cell without any dispatch engine.
Grid oracle_ca_step(const FractalSpec& spec, const Grid& src, CaRule rule) {
    const MemberMask mask(spec, src.level());
    Grid dst(spec, src.level());
    for (std::int64_t y = 0; y < src.side(); ++y) {
        for (std::int64_t x = 0; x < src.side(); ++x) {
            if (!mask.test(x, y)) {
                continue;
            }
            int live = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if ((dx != 0 || dy != 0) && mask.test(x + dx, y + dy) &&
                        src.at(x + dx, y + dy) != 0) {
                        ++live;
                    }
                }
            }
            const auto bit = static_cast<std::uint16_t>(1u << live);
            dst.at(x, y) = ((src.at(x, y) != 0 ? rule.survive : rule.birth) & bit) ? 1 : 0;
        }
    }
    return dst;
}

}  // namespace

TEST_SUITE("sim-harness") {

TEST_CASE("config validation rejects unsupported combinations") {
    const auto gasket = FractalSpec::sierpinski();
    CHECK_NOTHROW(make_config(gasket, 4, 4, MapMode::Lambda).validate());
    CHECK_THROWS_AS(make_config(gasket, 4, 3, MapMode::Lambda).validate(), std::invalid_argument);
    CHECK_THROWS_AS(make_config(gasket, 4, 64, MapMode::Lambda).validate(), std::invalid_argument);
    CHECK_THROWS_AS(make_config(gasket, 2, 8, MapMode::Lambda).validate(), std::invalid_argument);
    CHECK_THROWS_AS(make_config(gasket, -1, 1, MapMode::Lambda).validate(), std::invalid_argument);

    auto bb_mma = make_config(gasket, 4, 2, MapMode::BoundingBox);
    bb_mma.backend = LambdaBackend::MmaV1;
    CHECK_THROWS_AS(bb_mma.validate(), std::invalid_argument);

    CHECK_THROWS_AS(
        make_config(gasket, 5, 8, MapMode::Lambda, IntraBlockStrategy::BoundingSubBoxes,
                    LambdaBackend::MmaV3)
            .validate(),
        std::invalid_argument);
    CHECK_THROWS_AS(
        make_config(gasket, 5, 16, MapMode::Lambda, IntraBlockStrategy::FurtherUnrolling,
                    LambdaBackend::MmaV3)
            .validate(),
        std::invalid_argument);
    CHECK_NOTHROW(
        make_config(gasket, 5, 16, MapMode::Lambda, IntraBlockStrategy::BoundingSubBoxes,
                    LambdaBackend::MmaV3)
            .validate());
    CHECK_NOTHROW(
        make_config(gasket, 4, 2, MapMode::Lambda, IntraBlockStrategy::BoundingSubBoxes,
                    LambdaBackend::MmaV2)
            .validate());

    const auto vicsek = FractalSpec::vicsek();
    CHECK_NOTHROW(make_config(vicsek, 3, 1, MapMode::Lambda).validate());
    CHECK_THROWS_AS(make_config(vicsek, 3, 2, MapMode::Lambda).validate(), std::invalid_argument);

    auto bad_workers = make_config(gasket, 2, 1, MapMode::Lambda);
    bad_workers.workers = 0;
    CHECK_THROWS_AS(bad_workers.validate(), std::invalid_argument);
}

TEST_CASE("launch counters match the worked examples") {
    const auto gasket = FractalSpec::sierpinski();

    const auto bb = run_single_write(make_config(gasket, 4, 1, MapMode::BoundingBox));
    CHECK(bb.report.blocks_launched == 256);
    CHECK(bb.report.threads_launched == 256);
    CHECK(bb.report.threads_active == 81);
    CHECK(bb.report.threads_wasted == 175);

    const auto lam = run_single_write(make_config(gasket, 4, 1, MapMode::Lambda));
    CHECK(lam.report.blocks_launched == 81);
    CHECK(lam.report.threads_launched == 81);
    CHECK(lam.report.threads_active == 81);
    CHECK(lam.report.threads_wasted == 0);
    CHECK(lam.grid == bb.grid);

    for (const auto mode : {MapMode::BoundingBox, MapMode::Lambda}) {
        const auto tiny = run_single_write(make_config(gasket, 0, 1, mode));
        CHECK(tiny.report.threads_launched == 1);
        CHECK(tiny.report.threads_active == 1);
        CHECK(tiny.grid.at(0, 0) == 1);
    }
}

TEST_CASE("thread totals follow the two orthotopes") {
    const auto gasket = FractalSpec::sierpinski();
    for (int r = 2; r <= 6; ++r) {
        for (const int rho : {1, 2, 4}) {
            if (gasket.side_length(r) % rho != 0) {
                continue;
            }
            const auto bb = run_single_write(make_config(gasket, r, rho, MapMode::BoundingBox));
            const auto n = static_cast<std::uint64_t>(gasket.side_length(r));
            CHECK(bb.report.threads_launched == n * n);
            CHECK(bb.report.threads_active == gasket.volume(r));
            CHECK(bb.report.threads_active + bb.report.threads_wasted ==
                  bb.report.threads_launched);

            for (const auto strategy :
                 {IntraBlockStrategy::BoundingSubBoxes, IntraBlockStrategy::FurtherUnrolling,
                  IntraBlockStrategy::SharedLookupTable}) {
                const auto lam =
                    run_single_write(make_config(gasket, r, rho, MapMode::Lambda, strategy));
                const auto geom = BlockGeometry::create(gasket, r, rho);
                CHECK(lam.report.threads_launched ==
                      static_cast<std::uint64_t>(rho) * static_cast<std::uint64_t>(rho) *
                          gasket.volume(geom.r_b));
                CHECK(lam.report.threads_active == gasket.volume(r));
                CHECK(lam.report.threads_active + lam.report.threads_wasted ==
                      lam.report.threads_launched);
            }
        }
    }
}

TEST_CASE("single write fills exactly the member cells") {
    const auto vicsek = FractalSpec::vicsek();
    const auto result = run_single_write(make_config(vicsek, 2, 1, MapMode::Lambda));
    std::set<std::pair<std::int64_t, std::int64_t>> expected;
    for (const auto& p : vicsek.enumerate(2)) {
        expected.emplace(p.x, p.y);
    }
    for (std::int64_t y = 0; y < result.grid.side(); ++y) {
        for (std::int64_t x = 0; x < result.grid.side(); ++x) {
            CHECK(result.grid.at(x, y) == (expected.count({x, y}) ? 1 : 0));
        }
    }
    const auto& vals = result.grid.values();
    CHECK(std::accumulate(vals.begin(), vals.end(), std::int64_t{0}) ==
          static_cast<std::int64_t>(vicsek.volume(2)));
}

TEST_CASE("reduction matches the sequential oracle") {
    const auto gasket = FractalSpec::sierpinski();

    Grid ones(gasket, 3);
    for (const auto& p : gasket.enumerate(3)) {
        ones.at(p.x, p.y) = 1;
    }
    CHECK(run_reduction(make_config(gasket, 3, 1, MapMode::Lambda), ones).value == 27);

    Grid single(gasket, 0);
    single.at(0, 0) = 41;
    CHECK(run_reduction(make_config(gasket, 0, 1, MapMode::BoundingBox), single).value == 41);

    const auto grid = random_member_grid(gasket, 5, 99, 1000);
    const std::int64_t expected = oracle_sum(gasket, grid);
    for (const int rho : {1, 4}) {
        CHECK(run_reduction(make_config(gasket, 5, rho, MapMode::BoundingBox), grid).value ==
              expected);
        for (const auto strategy :
             {IntraBlockStrategy::BoundingSubBoxes, IntraBlockStrategy::FurtherUnrolling,
              IntraBlockStrategy::SharedLookupTable}) {
            CHECK(run_reduction(make_config(gasket, 5, rho, MapMode::Lambda, strategy), grid)
                      .value == expected);
        }
    }

    Grid wrong(gasket, 2);
    CHECK_THROWS_AS(run_reduction(make_config(gasket, 3, 1, MapMode::Lambda), wrong),
                    std::invalid_argument);
}

TEST_CASE("cellular automaton follows the masked oracle") {
    const auto gasket = FractalSpec::sierpinski();
    const auto config = make_config(gasket, 5, 1, MapMode::Lambda);

    const Grid dead(gasket, 5);
    const auto still = run_ca(config, dead, 3);
    CHECK(still.grid == dead);
    CHECK(still.grid.generation() == 3);
    CHECK(still.reports.size() == 3);

    Grid lonely(gasket, 5);
    lonely.at(0, 0) = 1;
    CHECK(run_ca(config, lonely, 1).grid == dead);

    auto seeded = random_member_grid(gasket, 5, 1234, 2);
    Grid expected = seeded;
    for (int step = 0; step < 10; ++step) {
        expected = oracle_ca_step(gasket, expected, CaRule{});
    }
    const auto evolved = run_ca(config, seeded, 10);
    CHECK(evolved.grid == expected);

    // Same trajectory through the bounding-box dispatch.
    const auto bb = run_ca(make_config(gasket, 5, 1, MapMode::BoundingBox), seeded, 10);
    CHECK(bb.grid == expected);

    // Non-member cells stay dead through every step.
    const MemberMask mask(gasket, 5);
    for (std::int64_t y = 0; y < evolved.grid.side(); ++y) {
        for (std::int64_t x = 0; x < evolved.grid.side(); ++x) {
            if (!mask.test(x, y)) {
                CHECK(evolved.grid.at(x, y) == 0);
            }
        }
    }
}

TEST_CASE("variant-2 launches cover the padded sub-block grid") {
    const auto gasket = FractalSpec::sierpinski();
    const auto c =
        make_config(gasket, 4, 2, MapMode::Lambda, IntraBlockStrategy::BoundingSubBoxes,
                    LambdaBackend::MmaV2);
    const auto result = run_single_write(c);
    CHECK(result.report.blocks_launched == 100);  // 9x9 orthotope rounded to 10x10
    CHECK(result.report.threads_launched == 100);
    CHECK(result.report.threads_active == 81);
    CHECK(result.report.threads_wasted == 19);
    CHECK(result.grid == run_single_write(make_config(gasket, 4, 2, MapMode::Lambda)).grid);

    const auto c4 =
        make_config(gasket, 4, 4, MapMode::Lambda, IntraBlockStrategy::FurtherUnrolling,
                    LambdaBackend::MmaV2);
    const auto r4 = run_single_write(c4);
    CHECK(r4.report.blocks_launched == 40);  // 9x3 orthotope rounded to 10x4
    CHECK(r4.report.threads_launched == 160);
    CHECK(r4.report.threads_active == 81);
    CHECK(r4.grid == result.grid);
}

TEST_CASE("mma backends reproduce the direct grids") {
    const auto gasket = FractalSpec::sierpinski();
    const auto grid = random_member_grid(gasket, 6, 5, 100);
    const auto direct =
        run_reduction(make_config(gasket, 6, 4, MapMode::Lambda), grid).value;
    CHECK(run_reduction(make_config(gasket, 6, 4, MapMode::Lambda,
                                    IntraBlockStrategy::BoundingSubBoxes, LambdaBackend::MmaV1),
                        grid)
              .value == direct);
    CHECK(run_reduction(make_config(gasket, 6, 4, MapMode::Lambda,
                                    IntraBlockStrategy::BoundingSubBoxes, LambdaBackend::MmaV2),
                        grid)
              .value == direct);
    CHECK(run_reduction(make_config(gasket, 6, 16, MapMode::Lambda,
                                    IntraBlockStrategy::BoundingSubBoxes, LambdaBackend::MmaV3),
                        grid)
              .value == direct);
}

TEST_CASE("work quotient reproduces the closed form") {
    const auto gasket = FractalSpec::sierpinski();
    const auto at = [&](int r) {
        const auto bb = run_single_write(make_config(gasket, r, 1, MapMode::BoundingBox)).report;
        const auto lam = run_single_write(make_config(gasket, r, 1, MapMode::Lambda)).report;
        return std::pair{bb, lam};
    };

    const auto [bb8, lam8] = at(8);
    CHECK(work_quotient(bb8, lam8) == doctest::Approx(65536.0 / 6561.0));
    CHECK(work_quotient(bb8, lam8) == doctest::Approx(9.99).epsilon(0.001));
    // Weighted form charges each lambda thread its r_b map levels.
    CHECK(work_quotient(bb8, lam8, true) == doctest::Approx(65536.0 / 6561.0 / 8.0));

    const auto [bb0, lam0] = at(0);
    CHECK(work_quotient(bb0, lam0) == 1.0);
    CHECK(work_quotient(bb0, lam0, true) == 1.0);

    double previous = 0.0;
    for (int r = 2; r <= 8; ++r) {
        const auto [bb, lam] = at(r);
        const double q = work_quotient(bb, lam);
        const double n = static_cast<double>(gasket.side_length(r));
        CHECK(q == doctest::Approx(std::pow(n, 2.0 - gasket.hausdorff())).epsilon(1e-9));
        CHECK(q > previous);
        previous = q;
    }

    CHECK_THROWS_AS(work_quotient(lam8, bb8), std::invalid_argument);
    const auto [bb6, lam6] = at(6);
    CHECK_THROWS_AS(work_quotient(bb8, lam6), std::invalid_argument);
}

TEST_CASE("worker count never changes the results") {
    const auto gasket = FractalSpec::sierpinski();
    const auto grid = random_member_grid(gasket, 5, 21, 50);
    for (const auto mode : {MapMode::BoundingBox, MapMode::Lambda}) {
        const auto solo_cfg = make_config(gasket, 5, 2, mode);
        auto multi_cfg = solo_cfg;
        multi_cfg.workers = 5;

        const auto solo = run_single_write(solo_cfg);
        const auto multi = run_single_write(multi_cfg);
        CHECK(solo.grid == multi.grid);
        CHECK(solo.report.csv_row() == multi.report.csv_row());

        CHECK(run_reduction(solo_cfg, grid).value == run_reduction(multi_cfg, grid).value);

        const auto seeded = random_member_grid(gasket, 5, 8, 2);
        CHECK(run_ca(solo_cfg, seeded, 4).grid == run_ca(multi_cfg, seeded, 4).grid);
    }
}

TEST_CASE("csv rows freeze the accounting") {
    const auto gasket = FractalSpec::sierpinski();
    CHECK(WorkReport::csv_header() ==
          "# spec,r,rho,mode,strategy,backend,blocks,threads,active,wasted,map_ops,micros");

    const auto bb = run_single_write(make_config(gasket, 4, 1, MapMode::BoundingBox)).report;
    CHECK(bb.csv_row() == "sierpinski,4,1,bb,subbox,direct,256,256,81,175,256,0");

    // 81 blocks resolve 4 levels each, plus one level-0 membership test per thread.
    const auto lam = run_single_write(make_config(gasket, 4, 1, MapMode::Lambda)).report;
    CHECK(lam.csv_row() == "sierpinski,4,1,lambda,subbox,direct,81,81,81,0,405,0");

    // Lookup tables front-load k^{r_t} * r_t build operations, lookups are free.
    const auto lut = run_single_write(make_config(gasket, 4, 4, MapMode::Lambda,
                                                  IntraBlockStrategy::SharedLookupTable))
                         .report;
    CHECK(lut.map_ops == 9 * 2 + 9 * 2);  // table build + 9 block origins at r_b = 2
    CHECK(lut.map_levels == 2);
}

TEST_CASE("kernel failures carry block and thread coordinates") {
    const auto gasket = FractalSpec::sierpinski();
    const auto config = make_config(gasket, 2, 2, MapMode::Lambda);
    CHECK_THROWS_WITH_AS(
        launch(config,
               [](std::uint64_t, EmbeddedCoord cell) {
                   if (cell.x == 0 && cell.y == 3) {
                       throw std::runtime_error("boom");
                   }
               }),
        doctest::Contains("boom"), std::runtime_error);
    try {
        launch(config, [](std::uint64_t, EmbeddedCoord) { throw std::runtime_error("bad"); });
        FAIL("expected a kernel failure");
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        CHECK(what.find("block (0,0)") != std::string::npos);
        CHECK(what.find("thread (") != std::string::npos);
    }
}

TEST_CASE("seeded grids are reproducible and member-only") {
    const auto carpet = FractalSpec::carpet();
    const auto a = random_member_grid(carpet, 2, 7, 10);
    const auto b = random_member_grid(carpet, 2, 7, 10);
    CHECK(a == b);
    const auto c = random_member_grid(carpet, 2, 8, 10);
    CHECK(a.values() != c.values());

    const MemberMask mask(carpet, 2);
    for (std::int64_t y = 0; y < a.side(); ++y) {
        for (std::int64_t x = 0; x < a.side(); ++x) {
            if (!mask.test(x, y)) {
                CHECK(a.at(x, y) == 0);
            } else {
                CHECK(a.at(x, y) < 10);
            }
        }
    }
    CHECK_THROWS_AS(random_member_grid(carpet, 2, 7, 0), std::invalid_argument);
}

TEST_CASE("block counts expose the launch shape") {
    const auto gasket = FractalSpec::sierpinski();
    CHECK(launch_block_count(make_config(gasket, 4, 1, MapMode::BoundingBox)) == 256);
    CHECK(launch_block_count(make_config(gasket, 4, 1, MapMode::Lambda)) == 81);
    CHECK(launch_block_count(make_config(gasket, 4, 2, MapMode::Lambda,
                                         IntraBlockStrategy::BoundingSubBoxes,
                                         LambdaBackend::MmaV2)) == 100);
}

}  // TEST_SUITE
