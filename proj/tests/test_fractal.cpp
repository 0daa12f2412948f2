#include "nbb/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"

using namespace nbb;

namespace {

std::set<std::pair<std::int64_t, std::int64_t>> cell_set(const std::vector<EmbeddedCoord>& cells) {
    std::set<std::pair<std::int64_t, std::int64_t>> out;
    for (const auto& c : cells) {
        out.emplace(c.x, c.y);
    }
    return out;
}

// Independent Sierpinski oracle: with the lower-left numbering the gasket is
// exactly the cells with x & (n-1-y) == 0.
bool sierpinski_bit_test(std::int64_t x, std::int64_t y, std::int64_t n) {
    return (x & (n - 1 - y)) == 0;
}

}  // namespace

TEST_SUITE("fractal-core") {

TEST_CASE("builtin descriptors carry the canonical tables") {
    const auto gasket = FractalSpec::sierpinski();
    CHECK(gasket.name() == "sierpinski");
    CHECK(gasket.replica_count() == 3);
    CHECK(gasket.scale_factor() == 2);
    REQUIRE(gasket.offsets().size() == 3);
    CHECK(gasket.offsets()[0] == ReplicaOffset{0, 0});
    CHECK(gasket.offsets()[1] == ReplicaOffset{0, 1});
    CHECK(gasket.offsets()[2] == ReplicaOffset{1, 1});

    const auto vicsek = FractalSpec::vicsek();
    CHECK(vicsek.replica_count() == 5);
    CHECK(vicsek.scale_factor() == 3);
    CHECK(vicsek.offsets()[0] == ReplicaOffset{1, 1});

    const auto carpet = FractalSpec::carpet();
    CHECK(carpet.replica_count() == 8);
    CHECK(carpet.scale_factor() == 3);
    CHECK(carpet.replica_at(1, 1) == -1);  // the hole
    for (int i = 0; i < 8; ++i) {
        const auto o = carpet.offsets()[static_cast<std::size_t>(i)];
        CHECK(carpet.replica_at(o.x, o.y) == i);
    }

    CHECK(FractalSpec::builtin("vicsek") == vicsek);
    CHECK_THROWS_AS(FractalSpec::builtin("menger"), std::invalid_argument);
}

TEST_CASE("spec validation rejects malformed descriptors") {
    CHECK_THROWS_AS(FractalSpec("x", 1, 2, {{0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(FractalSpec("x", 2, 1, {{0, 0}, {0, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(FractalSpec("x", 5, 2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}}),
                    std::invalid_argument);  // k > s^2
    CHECK_THROWS_AS(FractalSpec("x", 3, 2, {{0, 0}, {0, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(FractalSpec("x", 2, 2, {{0, 0}, {2, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(FractalSpec("x", 2, 2, {{0, 0}, {0, -1}}), std::invalid_argument);
    CHECK_THROWS_AS(FractalSpec("x", 2, 2, {{1, 1}, {1, 1}}), std::invalid_argument);
}

TEST_CASE("sizes, volumes and packing dims follow the powers") {
    const auto gasket = FractalSpec::sierpinski();
    CHECK(gasket.side_length(0) == 1);
    CHECK(gasket.side_length(3) == 8);
    CHECK(gasket.volume(0) == 1);
    CHECK(gasket.volume(2) == 9);
    CHECK(gasket.volume(8) == 6561);
    CHECK(gasket.orthotope_dims(0) == std::pair<std::int64_t, std::int64_t>{1, 1});
    CHECK(gasket.orthotope_dims(1) == std::pair<std::int64_t, std::int64_t>{3, 1});
    CHECK(gasket.orthotope_dims(2) == std::pair<std::int64_t, std::int64_t>{3, 3});
    CHECK(gasket.orthotope_dims(3) == std::pair<std::int64_t, std::int64_t>{9, 3});

    for (const auto& name : FractalSpec::builtin_names()) {
        const auto spec = FractalSpec::builtin(name);
        for (int r = 0; r <= 8; ++r) {
            const auto [w, h] = spec.orthotope_dims(r);
            CHECK(static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h) == spec.volume(r));
        }
    }
}

TEST_CASE("hausdorff dimension matches the known values") {
    CHECK(FractalSpec::sierpinski().hausdorff() == doctest::Approx(1.585).epsilon(0.001));
    CHECK(FractalSpec::carpet().hausdorff() == doctest::Approx(1.893).epsilon(0.001));
    CHECK(FractalSpec::vicsek().hausdorff() ==
          doctest::Approx(std::log(5.0) / std::log(3.0)).epsilon(1e-12));
    const FractalSpec full("square", 4, 2, {{0, 0}, {1, 0}, {0, 1}, {1, 1}});
    CHECK(full.hausdorff() == 2.0);
}

TEST_CASE("volume equals n^hausdorff rounded") {
    for (const auto& name : FractalSpec::builtin_names()) {
        const auto spec = FractalSpec::builtin(name);
        for (int r = 0; r <= 8; ++r) {
            const double n = static_cast<double>(spec.side_length(r));
            const auto predicted =
                static_cast<std::uint64_t>(std::llround(std::pow(n, spec.hausdorff())));
            CHECK(predicted == spec.volume(r));
        }
    }
}

TEST_CASE("enumerate reproduces the hand-built sets") {
    const auto gasket = FractalSpec::sierpinski();
    CHECK(cell_set(gasket.enumerate(0)) ==
          std::set<std::pair<std::int64_t, std::int64_t>>{{0, 0}});
    CHECK(cell_set(gasket.enumerate(1)) ==
          std::set<std::pair<std::int64_t, std::int64_t>>{{0, 0}, {0, 1}, {1, 1}});
    CHECK(cell_set(gasket.enumerate(2)) ==
          std::set<std::pair<std::int64_t, std::int64_t>>{
              {0, 0}, {0, 1}, {1, 1}, {0, 2}, {0, 3}, {1, 3}, {2, 2}, {2, 3}, {3, 3}});

    CHECK(cell_set(FractalSpec::vicsek().enumerate(1)) ==
          std::set<std::pair<std::int64_t, std::int64_t>>{{1, 1}, {1, 0}, {1, 2}, {0, 1}, {2, 1}});

    auto carpet_cells = cell_set(FractalSpec::carpet().enumerate(1));
    CHECK(carpet_cells.size() == 8);
    CHECK(carpet_cells.count({1, 1}) == 0);

    // Deterministic order: sorted by (x, y).
    const auto cells = gasket.enumerate(3);
    CHECK(std::is_sorted(cells.begin(), cells.end()));
}

TEST_CASE("enumerate cardinality equals the volume") {
    const int caps[] = {10, 5, 5};
    int i = 0;
    for (const auto& name : FractalSpec::builtin_names()) {
        const auto spec = FractalSpec::builtin(name);
        for (int r = 0; r <= caps[i]; ++r) {
            CHECK(spec.enumerate(r).size() == spec.volume(r));
        }
        ++i;
    }
}

TEST_CASE("each replica of level r+1 is a translated copy of level r") {
    for (const auto& name : FractalSpec::builtin_names()) {
        const auto spec = FractalSpec::builtin(name);
        const int r = 2;
        const auto base = spec.enumerate(r);
        const auto next = cell_set(spec.enumerate(r + 1));
        const std::int64_t scale = spec.side_length(r);
        std::size_t covered = 0;
        for (const auto& offset : spec.offsets()) {
            for (const auto& c : base) {
                CHECK(next.count({c.x + offset.x * scale, c.y + offset.y * scale}) == 1);
                ++covered;
            }
        }
        CHECK(covered == next.size());
    }
}

TEST_CASE("is_member agrees with enumeration over the whole box") {
    for (const auto& name : FractalSpec::builtin_names()) {
        const auto spec = FractalSpec::builtin(name);
        for (int r = 0; r <= 4; ++r) {
            if (spec.volume(r) > 100000) {
                break;
            }
            const auto members = cell_set(spec.enumerate(r));
            const std::int64_t n = spec.side_length(r);
            for (std::int64_t y = 0; y < n; ++y) {
                for (std::int64_t x = 0; x < n; ++x) {
                    const bool expected = members.count({x, y}) == 1;
                    if (spec.is_member({x, y}, r) != expected) {
                        FAIL(name << ": membership mismatch at (" << x << "," << y << ") r=" << r);
                    }
                }
            }
        }
    }
}

TEST_CASE("sierpinski membership equals the bit test") {
    const auto gasket = FractalSpec::sierpinski();
    CHECK(gasket.is_member({0, 0}, 5));
    CHECK_FALSE(gasket.is_member({1, 0}, 2));
    CHECK(gasket.is_member({2, 3}, 2));
    for (int r = 0; r <= 8; ++r) {
        const std::int64_t n = gasket.side_length(r);
        for (std::int64_t y = 0; y < n; ++y) {
            for (std::int64_t x = 0; x < n; ++x) {
                if (gasket.is_member({x, y}, r) != sierpinski_bit_test(x, y, n)) {
                    FAIL("bit test mismatch at (" << x << "," << y << ") r=" << r);
                }
            }
        }
    }
}

TEST_CASE("is_member rejects coordinates outside the embedding") {
    const auto gasket = FractalSpec::sierpinski();
    CHECK_THROWS_AS(gasket.is_member({-1, 0}, 2), std::out_of_range);
    CHECK_THROWS_AS(gasket.is_member({0, 4}, 2), std::out_of_range);
}

TEST_CASE("checked_pow guards against overflow") {
    CHECK(checked_pow(2, 0) == 1);
    CHECK(checked_pow(0, 0) == 1);
    CHECK(checked_pow(0, 5) == 0);
    CHECK(checked_pow(2, 63) == (std::uint64_t{1} << 63));
    CHECK_THROWS_AS(checked_pow(2, 64), std::overflow_error);
    CHECK_THROWS_AS(checked_pow(3, 60), std::overflow_error);
    CHECK_THROWS_AS(checked_pow(2, -1), std::invalid_argument);
    const auto gasket = FractalSpec::sierpinski();
    CHECK_THROWS_AS(gasket.volume(80), std::overflow_error);
    CHECK_THROWS_AS(gasket.side_length(64), std::overflow_error);
}

TEST_CASE("level_for_size accepts exact powers only") {
    CHECK(level_for_size(1, 2) == 0);
    CHECK(level_for_size(8, 2) == 3);
    CHECK(level_for_size(9, 3) == 2);
    CHECK_THROWS_AS(level_for_size(6, 2), std::invalid_argument);
    CHECK_THROWS_AS(level_for_size(0, 2), std::invalid_argument);
    CHECK_THROWS_AS(level_for_size(4, 1), std::invalid_argument);
}

TEST_CASE("enumerate respects the cell budget") {
    const auto gasket = FractalSpec::sierpinski();
    CHECK_THROWS_AS(gasket.enumerate(4, 10), ResourceError);
    CHECK(gasket.enumerate(2, 9).size() == 9);
}

TEST_CASE("config files parse into specs") {
    std::istringstream good(
        "# demo spec\n"
        "name = demo\n"
        "k = 3\n"
        "s = 2\n"
        "\n"
        "offset = 0,0\n"
        "offset = 0,1\n"
        "offset = 1,1\n");
    const auto spec = FractalSpec::from_stream(good);
    CHECK(spec.name() == "demo");
    CHECK(spec.replica_count() == 3);
    CHECK(spec.scale_factor() == 2);
    CHECK(spec.offsets() == FractalSpec::sierpinski().offsets());

    std::istringstream missing("name = x\nk = 3\ns = 2\noffset = 0,0\n");
    CHECK_THROWS_AS(FractalSpec::from_stream(missing), std::invalid_argument);
    std::istringstream junk("name = x\nwat\n");
    CHECK_THROWS_WITH_AS(FractalSpec::from_stream(junk),
                         doctest::Contains("line 2"), std::invalid_argument);
    std::istringstream bad_offset("name = x\nk = 2\ns = 2\noffset = 0;0\noffset = 1,1\n");
    CHECK_THROWS_AS(FractalSpec::from_stream(bad_offset), std::invalid_argument);
    CHECK_THROWS_AS(FractalSpec::from_file("/nonexistent/spec.conf"), std::invalid_argument);
}

TEST_CASE("member mask mirrors is_member and clips outside") {
    const auto vicsek = FractalSpec::vicsek();
    const MemberMask mask(vicsek, 2);
    CHECK(mask.side() == 9);
    CHECK(mask.count() == 25);
    for (std::int64_t y = 0; y < mask.side(); ++y) {
        for (std::int64_t x = 0; x < mask.side(); ++x) {
            CHECK(mask.test(x, y) == vicsek.is_member({x, y}, 2));
        }
    }
    CHECK_FALSE(mask.test(-1, 0));
    CHECK_FALSE(mask.test(0, 9));
}

}  // TEST_SUITE
