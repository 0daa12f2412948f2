#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nbb/block_map.hpp"
#include "nbb/dispatch.hpp"
#include "nbb/fractal.hpp"
#include "nbb/image.hpp"
#include "nbb/mma.hpp"

namespace {

using namespace nbb;

struct Plan {
    std::string spec_token = "sierpinski";
    std::string workload = "sw";
    int rmin = 0;
    int rmax = 6;
    std::vector<int> rho_list{1};
    bool rho_given = false;
    std::string mode = "both";
    std::string strategy = "subbox";
    std::string backend = "direct";
    int reps = 1;
    std::uint64_t seed = 1;
    std::string out = "-";
    int workers = 1;
    bool timing = false;
    int steps = 4;
    std::uint64_t max_cells = std::uint64_t{1} << 24;
    // render
    int r = 1;
    std::string what = "fractal";
};

FractalSpec resolve_spec(const std::string& token) {
    const auto& names = FractalSpec::builtin_names();
    if (std::find(names.begin(), names.end(), token) != names.end()) {
        return FractalSpec::builtin(token);
    }
    return FractalSpec::from_file(token);
}

std::uint64_t embedded_cells(const FractalSpec& spec, int r) {
    const auto n = checked_pow(static_cast<std::uint64_t>(spec.scale_factor()), r);
    if (n > (std::uint64_t{1} << 31)) {
        return std::numeric_limits<std::uint64_t>::max();
    }
    return n * n;
}

void require_cells(const FractalSpec& spec, int r, std::uint64_t max_cells) {
    const auto cells = embedded_cells(spec, r);
    if (cells > max_cells) {
        throw ResourceError("r=" + std::to_string(r) + " needs " + std::to_string(cells) +
                            " embedded cells, above the --max-cells budget of " +
                            std::to_string(max_cells));
    }
}

void expect(bool ok, const std::string& message) {
    if (!ok) {
        throw std::runtime_error(message);
    }
}

// ---------------------------------------------------------------------------
// verify

class VerifyRun {
public:
    VerifyRun(FractalSpec spec, const Plan& plan) : spec_(std::move(spec)), plan_(plan) {}

    int run(std::ostream& out);

private:
    void check(std::ostream& out, const std::string& name,
               std::initializer_list<const char*> ops, const std::function<std::string()>& body);

    // Largest r <= rmax whose block orthotope (k^r cells) fits the budget.
    int block_cap(std::uint64_t budget) const;
    // Largest r <= min(rmax, hard) whose embedded grid fits --max-cells.
    int embed_cap(int hard) const;

    FractalSpec spec_;
    const Plan& plan_;
    std::set<std::string> covered_;
    int total_ = 0;
    int failures_ = 0;
};

int VerifyRun::block_cap(std::uint64_t budget) const {
    budget = std::min(budget, plan_.max_cells);
    const auto k = static_cast<std::uint64_t>(spec_.replica_count());
    int r = 0;
    while (r < plan_.rmax) {
        std::uint64_t next = 0;
        try {
            next = checked_pow(k, r + 1);
        } catch (const std::overflow_error&) {
            break;
        }
        if (next > budget) {
            break;
        }
        ++r;
    }
    return r;
}

int VerifyRun::embed_cap(int hard) const {
    const int limit = std::min(plan_.rmax, hard);
    int r = 0;
    while (r < limit && embedded_cells(spec_, r + 1) <= plan_.max_cells) {
        ++r;
    }
    return r;
}

void VerifyRun::check(std::ostream& out, const std::string& name,
                      std::initializer_list<const char*> ops,
                      const std::function<std::string()>& body) {
    ++total_;
    for (const char* op : ops) {
        covered_.insert(op);
    }
    try {
        const std::string note = body();
        out << "pass  " << name;
        if (!note.empty()) {
            out << " (" << note << ")";
        }
        out << "\n";
    } catch (const ResourceError&) {
        throw;  // clean abort, the caller reports the budget
    } catch (const std::bad_alloc&) {
        throw;
    } catch (const std::exception& e) {
        out << "FAIL  " << name << ": " << e.what() << "\n";
        ++failures_;
    }
}

int VerifyRun::run(std::ostream& out) {
    out << "verify spec=" << spec_.name() << " rmax=" << plan_.rmax << " seed=" << plan_.seed
        << "\n";
    require_cells(spec_, 0, plan_.max_cells);

    const int k = spec_.replica_count();
    const int s = spec_.scale_factor();
    const int rb = block_cap(plan_.max_cells);
    const int re = embed_cap(8);

    check(out, "scaling tables", {"volume", "hausdorff", "orthotope_dims"}, [&] {
        for (int r = 0; r <= plan_.rmax; ++r) {
            const auto v = spec_.volume(r);
            const double n = static_cast<double>(spec_.side_length(r));
            expect(v == static_cast<std::uint64_t>(std::llround(std::pow(n, spec_.hausdorff()))),
                   "volume != n^H at r=" + std::to_string(r));
            const auto [w, h] = spec_.orthotope_dims(r);
            expect(static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h) == v,
                   "orthotope area != volume at r=" + std::to_string(r));
            expect(w == static_cast<std::int64_t>(
                            checked_pow(static_cast<std::uint64_t>(k), (r + 1) / 2)) &&
                       h == static_cast<std::int64_t>(
                                checked_pow(static_cast<std::uint64_t>(k), r / 2)),
                   "orthotope dims off at r=" + std::to_string(r));
        }
        return "r<=" + std::to_string(plan_.rmax);
    });

    check(out, "bijectivity", {"lambda_map", "enumerate", "is_member", "volume"}, [&] {
        for (int r = 0; r <= rb; ++r) {
            const auto [w, h] = spec_.orthotope_dims(r);
            const std::int64_t n = spec_.side_length(r);
            std::vector<std::int64_t> keys;
            keys.reserve(spec_.volume(r));
            for (std::int64_t oy = 0; oy < h; ++oy) {
                for (std::int64_t ox = 0; ox < w; ++ox) {
                    const auto p = lambda_map(spec_, r, {ox, oy});
                    expect(spec_.is_member(p, r),
                           "lambda image leaves the fractal at r=" + std::to_string(r));
                    keys.push_back(p.x * n + p.y);
                }
            }
            std::sort(keys.begin(), keys.end());
            expect(std::adjacent_find(keys.begin(), keys.end()) == keys.end(),
                   "lambda collision at r=" + std::to_string(r));
            expect(keys.size() == spec_.volume(r),
                   "image cardinality != volume at r=" + std::to_string(r));
            if (r <= re) {
                const auto pts = spec_.enumerate(r, plan_.max_cells);
                expect(pts.size() == keys.size(),
                       "enumeration cardinality off at r=" + std::to_string(r));
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    expect(pts[i].x * n + pts[i].y == keys[i],
                           "image != enumeration at r=" + std::to_string(r));
                }
            }
        }
        return "block r<=" + std::to_string(rb) + ", dense r<=" + std::to_string(re);
    });

    const int ri = block_cap(std::uint64_t{1} << 22);
    check(out, "inverse round-trip", {"lambda_map", "lambda_inverse"}, [&] {
        for (int r = 0; r <= ri; ++r) {
            const auto [w, h] = spec_.orthotope_dims(r);
            for (std::int64_t oy = 0; oy < h; ++oy) {
                for (std::int64_t ox = 0; ox < w; ++ox) {
                    const OrthotopeCoord omega{ox, oy};
                    expect(lambda_inverse(spec_, r, lambda_map(spec_, r, omega)) == omega,
                           "inverse(lambda) != id at r=" + std::to_string(r));
                }
            }
        }
        for (int r = 0; r <= re; ++r) {
            for (const auto& p : spec_.enumerate(r, plan_.max_cells)) {
                expect(lambda_map(spec_, r, lambda_inverse(spec_, r, p)) == p,
                       "lambda(inverse) != id at r=" + std::to_string(r));
            }
        }
        return "block r<=" + std::to_string(ri) + ", dense r<=" + std::to_string(re);
    });

    const int rd = block_cap(std::uint64_t{1} << 16);
    check(out, "digit recomposition", {"beta_index", "lambda_map"}, [&] {
        for (int r = 0; r <= rd; ++r) {
            const auto [w, h] = spec_.orthotope_dims(r);
            for (std::int64_t oy = 0; oy < h; ++oy) {
                for (std::int64_t ox = 0; ox < w; ++ox) {
                    EmbeddedCoord sum{0, 0};
                    for (int mu = 1; mu <= r; ++mu) {
                        const auto tau = spec_.offsets()[static_cast<std::size_t>(
                            beta_index(spec_, {ox, oy}, mu))];
                        const auto scale = spec_.side_length(mu - 1);
                        sum.x += tau.x * scale;
                        sum.y += tau.y * scale;
                    }
                    expect(sum == lambda_map(spec_, r, {ox, oy}),
                           "digit sum != lambda at r=" + std::to_string(r));
                }
            }
        }
        return "r<=" + std::to_string(rd);
    });

    check(out, "arithmetic hash", {"sierpinski_arith_hash"}, [&] {
        const auto gasket = FractalSpec::sierpinski();
        for (int beta = 0; beta < 3; ++beta) {
            expect(sierpinski_arith_hash(beta) == gasket.offsets()[static_cast<std::size_t>(beta)],
                   "hash differs from the offset table at beta=" + std::to_string(beta));
        }
        return "";
    });

    check(out, "strategy agreement", {"map_thread"}, [&] {
        std::vector<int> candidates = plan_.rho_given ? plan_.rho_list
                                                      : std::vector<int>{1, s, s * s};
        int tested = 0;
        std::string note = "rho";
        for (const int rho : candidates) {
            int r_t = 0;
            try {
                r_t = level_for_size(rho, s);
            } catch (const std::invalid_argument&) {
                continue;  // not a power of s, no sub-box geometry
            }
            const int r = std::min(plan_.rmax, r_t + 2);
            if (r < r_t) {
                continue;
            }
            const auto geom = BlockGeometry::create(spec_, r, rho);
            const auto [wb, hb] = spec_.orthotope_dims(geom.r_b);
            for (std::int64_t oy = 0; oy < hb; ++oy) {
                for (std::int64_t ox = 0; ox < wb; ++ox) {
                    const OrthotopeCoord omega{ox, oy};
                    std::vector<EmbeddedCoord> box, fu;
                    for (std::int64_t ty = 0; ty < rho; ++ty) {
                        for (std::int64_t tx = 0; tx < rho; ++tx) {
                            const auto a = map_thread(spec_, geom, omega, {tx, ty},
                                                      IntraBlockStrategy::BoundingSubBoxes);
                            const auto b = map_thread(spec_, geom, omega, {tx, ty},
                                                      IntraBlockStrategy::FurtherUnrolling);
                            const auto c = map_thread(spec_, geom, omega, {tx, ty},
                                                      IntraBlockStrategy::SharedLookupTable);
                            expect(b == c, "unroll and lut disagree pointwise");
                            if (a) box.push_back(*a);
                            if (b) fu.push_back(*b);
                        }
                    }
                    std::sort(box.begin(), box.end());
                    std::sort(fu.begin(), fu.end());
                    expect(box == fu, "strategies cover different cells");
                    expect(box.size() == spec_.volume(geom.r_t),
                           "active thread count != k^{r_t}");
                }
            }
            ++tested;
            note += " " + std::to_string(rho);
        }
        expect(tested > 0, "no admissible rho");
        return note;
    });

    const int rv = std::min(block_cap(std::uint64_t{1} << 16), 8);
    check(out, "mma equivalence",
          {"encode_variant1", "encode_variant2", "encode_variant3", "mma_eval"}, [&] {
              const Fragment zero{};
              for (int r = 0; r <= rv; ++r) {
                  const auto [w, h] = spec_.orthotope_dims(r);
                  std::vector<OrthotopeCoord> batch;
                  const auto flush = [&] {
                      if (batch.empty()) {
                          return;
                      }
                      const auto enc = encode_variant2(spec_, r, batch);
                      const auto d = mma_eval(enc.a, enc.b, zero);
                      for (std::size_t i = 0; i < batch.size(); ++i) {
                          expect(enc.active[i], "in-range coordinate flagged inactive");
                          const auto p = lambda_map(spec_, r, batch[i]);
                          expect(d.at(0, 2 * static_cast<int>(i)) ==
                                         static_cast<double>(p.x) &&
                                     d.at(0, 2 * static_cast<int>(i) + 1) ==
                                         static_cast<double>(p.y),
                                 "variant 2 pair != lambda at r=" + std::to_string(r));
                      }
                      batch.clear();
                  };
                  for (std::int64_t oy = 0; oy < h; ++oy) {
                      for (std::int64_t ox = 0; ox < w; ++ox) {
                          const OrthotopeCoord omega{ox, oy};
                          const auto enc = encode_variant1(spec_, r, omega);
                          const auto d = mma_eval(enc.a, enc.b, zero);
                          const auto p = lambda_map(spec_, r, omega);
                          expect(d.at(0, 0) == static_cast<double>(p.x) &&
                                     d.at(0, 1) == static_cast<double>(p.y),
                                 "variant 1 != lambda at r=" + std::to_string(r));
                          batch.push_back(omega);
                          if (batch.size() == 8) {
                              flush();
                          }
                      }
                  }
                  flush();
              }
              {
                  const int r = std::min(rv, 2);
                  const auto [w, h] = spec_.orthotope_dims(r);
                  const std::vector<OrthotopeCoord> outside{{w, h}};
                  const auto enc = encode_variant2(spec_, r, outside);
                  expect(!enc.active[0], "out-of-orthotope coordinate kept active");
              }
              {
                  const bool own = s == 2 && plan_.rmax >= 4;
                  const auto v3spec = own ? spec_ : FractalSpec::sierpinski();
                  const int r3 = own ? std::min(plan_.rmax, 6) : 4;
                  const auto geom = BlockGeometry::create(v3spec, r3, kFragmentDim);
                  const auto [w3, h3] = v3spec.orthotope_dims(geom.r_b);
                  for (std::int64_t oy = 0; oy < h3; ++oy) {
                      for (std::int64_t ox = 0; ox < w3; ++ox) {
                          const OrthotopeCoord omega{ox, oy};
                          const auto enc = encode_variant3(v3spec, geom, omega);
                          const auto dx = mma_eval(enc.a, enc.bx, enc.cx);
                          const auto dy = mma_eval(enc.a, enc.by, enc.cy);
                          const auto origin = lambda_map(v3spec, geom.r_b, omega);
                          for (int ty = 0; ty < kFragmentDim; ++ty) {
                              for (int tx = 0; tx < kFragmentDim; ++tx) {
                                  expect(dx.at(tx, ty) ==
                                                 static_cast<double>(kFragmentDim * origin.x +
                                                                     tx) &&
                                             dy.at(tx, ty) ==
                                                 static_cast<double>(kFragmentDim * origin.y +
                                                                     ty),
                                         "variant 3 cell off at r=" + std::to_string(r3));
                                  const auto cell =
                                      map_thread(v3spec, geom, omega, {tx, ty},
                                                 IntraBlockStrategy::BoundingSubBoxes);
                                  if (cell) {
                                      expect(cell->x == static_cast<std::int64_t>(
                                                            dx.at(tx, ty)) &&
                                                 cell->y == static_cast<std::int64_t>(
                                                                dy.at(tx, ty)),
                                             "variant 3 disagrees with map_thread");
                                  }
                              }
                          }
                      }
                  }
              }
              return "r<=" + std::to_string(rv);
          });

    const int rm = embed_cap(6);
    check(out, "mode equivalence",
          {"launch", "run_single_write", "run_reduction", "run_ca", "work_quotient"}, [&] {
              const auto make = [&](int r, int rho, MapMode mode, IntraBlockStrategy strategy,
                                    LambdaBackend backend) {
                  DispatchConfig config;
                  config.spec = spec_;
                  config.r = r;
                  config.rho = rho;
                  config.mode = mode;
                  config.strategy = strategy;
                  config.backend = backend;
                  config.workers = plan_.workers;
                  return config;
              };
              std::set<int> levels{std::max(rm - 2, 0), rm};
              int combos = 0;
              for (const int r : levels) {
                  const auto rd_grid = random_member_grid(spec_, r, plan_.seed + r, 100);
                  const auto ca_grid = random_member_grid(spec_, r, plan_.seed + 1000 + r, 2);

                  const auto bb = make(r, 1, MapMode::BoundingBox,
                                       IntraBlockStrategy::BoundingSubBoxes,
                                       LambdaBackend::Direct);
                  const auto bb_sw = run_single_write(bb);
                  const auto bb_rd = run_reduction(bb, rd_grid);
                  const auto bb_ca = run_ca(bb, ca_grid, 3);

                  std::int64_t plain = 0;
                  for (const auto& p : spec_.enumerate(r, plan_.max_cells)) {
                      plain += rd_grid.at(p.x, p.y);
                  }
                  expect(bb_rd.value == plain, "reduction != sequential sum at r=" +
                                                   std::to_string(r));

                  std::uint64_t visits = 0;
                  auto count_cfg = make(r, 1, MapMode::Lambda,
                                        IntraBlockStrategy::BoundingSubBoxes,
                                        LambdaBackend::Direct);
                  count_cfg.workers = 1;
                  launch(count_cfg, [&](std::uint64_t, EmbeddedCoord) { ++visits; });
                  expect(visits == spec_.volume(r), "launch visits != volume");

                  const auto lam_sw = run_single_write(count_cfg);
                  expect(lam_sw.grid == bb_sw.grid, "lambda grid != bb grid at rho=1");
                  const double q = work_quotient(bb_sw.report, lam_sw.report);
                  const double closed = static_cast<double>(embedded_cells(spec_, r)) /
                                        static_cast<double>(spec_.volume(r));
                  expect(std::abs(q - closed) < 1e-9, "work quotient off the closed form");

                  const std::vector<int> rhos =
                      plan_.rho_given ? plan_.rho_list : std::vector<int>{1, 2, 4, 16};
                  for (const int rho : rhos) {
                      for (const auto strategy : {IntraBlockStrategy::BoundingSubBoxes,
                                                  IntraBlockStrategy::FurtherUnrolling,
                                                  IntraBlockStrategy::SharedLookupTable}) {
                          for (const auto backend :
                               {LambdaBackend::Direct, LambdaBackend::MmaV1,
                                LambdaBackend::MmaV2, LambdaBackend::MmaV3}) {
                              auto config = make(r, rho, MapMode::Lambda, strategy, backend);
                              try {
                                  config.validate();
                              } catch (const std::invalid_argument&) {
                                  continue;
                              }
                              expect(run_single_write(config).grid == bb_sw.grid,
                                     "single write differs at rho=" + std::to_string(rho));
                              expect(run_reduction(config, rd_grid).value == bb_rd.value,
                                     "reduction differs at rho=" + std::to_string(rho));
                              expect(run_ca(config, ca_grid, 3).grid == bb_ca.grid,
                                     "automaton differs at rho=" + std::to_string(rho));
                              ++combos;
                          }
                      }
                  }
              }
              expect(combos > 0, "no admissible lambda configuration");
              return "r<=" + std::to_string(rm) + ", " + std::to_string(combos) + " combos";
          });

    check(out, "compact round-trip", {"compact_store", "compact_load"}, [&] {
        const int r = rm;
        const std::int64_t n = spec_.side_length(r);
        std::mt19937_64 rng(plan_.seed);
        std::vector<std::int64_t> dense(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                                        0);
        for (const auto& p : spec_.enumerate(r, plan_.max_cells)) {
            dense[static_cast<std::size_t>(p.y * n + p.x)] =
                static_cast<std::int64_t>(rng() % 1000) + 1;
        }
        const auto compact = compact_store(spec_, r, dense);
        expect(compact.values().size() == spec_.volume(r), "compact size != volume");
        expect(compact_load(spec_, compact, 0) == dense, "round-trip changed the grid");

        std::stringstream buffer;
        write_compact(buffer, spec_, compact);
        const auto reread = read_compact(buffer, spec_);
        expect(reread.values() == compact.values() && reread.level() == compact.level(),
               "serialized round-trip changed the grid");
        return "r=" + std::to_string(r);
    });

    out << "ops:";
    for (const auto& op : covered_) {
        out << ' ' << op;
    }
    out << "\n";
    if (failures_ == 0) {
        out << "verify: all " << total_ << " checks passed\n";
        return 0;
    }
    out << "verify: " << failures_ << " of " << total_ << " checks failed\n";
    return 1;
}

int cmd_verify(const Plan& plan) {
    VerifyRun run(resolve_spec(plan.spec_token), plan);
    return run.run(std::cout);
}

// ---------------------------------------------------------------------------
// bench

int cmd_bench(const Plan& plan) {
    const auto spec = resolve_spec(plan.spec_token);
    if (plan.rmin > plan.rmax) {
        throw std::invalid_argument("empty scale range: rmin > rmax");
    }

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (plan.out != "-") {
        file.open(plan.out, std::ios::binary);
        if (!file) {
            throw std::runtime_error("cannot open '" + plan.out + "' for writing");
        }
        out = &file;
    }

    std::vector<MapMode> modes;
    if (plan.mode == "bb" || plan.mode == "both") {
        modes.push_back(MapMode::BoundingBox);
    }
    if (plan.mode == "lambda" || plan.mode == "both") {
        modes.push_back(MapMode::Lambda);
    }

    *out << WorkReport::csv_header() << ",workload,quotient\n";
    for (int r = plan.rmin; r <= plan.rmax; ++r) {
        require_cells(spec, r, plan.max_cells);
        std::optional<Grid> rd_grid, ca_grid;
        if (plan.workload == "rd") {
            rd_grid = random_member_grid(spec, r, plan.seed + static_cast<std::uint64_t>(r), 100,
                                         plan.max_cells);
        } else if (plan.workload == "ca") {
            ca_grid = random_member_grid(spec, r, plan.seed + static_cast<std::uint64_t>(r), 2,
                                         plan.max_cells);
        }
        for (const int rho : plan.rho_list) {
            for (const MapMode mode : modes) {
                DispatchConfig config;
                config.spec = spec;
                config.r = r;
                config.rho = rho;
                config.mode = mode;
                config.strategy = strategy_from_string(plan.strategy);
                config.backend = mode == MapMode::BoundingBox
                                     ? LambdaBackend::Direct
                                     : backend_from_string(plan.backend);
                config.workers = plan.workers;
                config.timing = plan.timing;
                config.max_cells = plan.max_cells;
                try {
                    config.validate();
                } catch (const std::invalid_argument& e) {
                    std::cerr << "skip r=" << r << " rho=" << rho << " mode=" << to_string(mode)
                              << ": " << e.what() << "\n";
                    continue;
                }

                const auto run_once = [&]() -> WorkReport {
                    if (plan.workload == "sw") {
                        return run_single_write(config).report;
                    }
                    if (plan.workload == "rd") {
                        return run_reduction(config, *rd_grid).report;
                    }
                    auto result = run_ca(config, *ca_grid, plan.steps);
                    WorkReport first = result.reports.front();
                    std::uint64_t total = 0;
                    for (const auto& step : result.reports) {
                        total += step.micros;
                    }
                    first.micros = total / result.reports.size();  // counters are per step
                    return first;
                };

                WorkReport row = run_once();
                std::uint64_t micros_total = row.micros;
                for (int rep = 1; rep < plan.reps; ++rep) {
                    micros_total += run_once().micros;
                }
                row.micros = micros_total / static_cast<std::uint64_t>(plan.reps);

                const double quotient = static_cast<double>(embedded_cells(spec, r)) /
                                        static_cast<double>(row.threads_launched);
                std::ostringstream formatted;
                formatted << quotient;
                *out << row.csv_row() << ',' << plan.workload << ',' << formatted.str() << "\n";
            }
        }
    }

    out->flush();
    if (!*out) {
        throw std::runtime_error("write failed: '" + plan.out + "'");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// render

int cmd_render(const Plan& plan) {
    const auto spec = resolve_spec(plan.spec_token);
    require_cells(spec, plan.r, plan.max_cells);

    std::string path = plan.out;
    if (path.empty() || path == "-") {
        path = spec.name() + "_" + plan.what + "_r" + std::to_string(plan.r) +
               (plan.what == "fractal" ? ".pbm" : ".pgm");
    }
    if (plan.what == "fractal") {
        const auto image = render_membership(spec, plan.r);
        write_pbm_file(path, image);
        std::cout << "wrote " << path << " (" << image.width << "x" << image.height << ", "
                  << image.count_set() << " set)\n";
    } else if (plan.what == "packing") {
        const auto image = render_packing(spec, plan.r);
        write_pgm_file(path, image);
        std::cout << "wrote " << path << " (" << image.width << "x" << image.height << ")\n";
    } else {
        const auto image = render_mapping(spec, plan.r);
        write_pgm_file(path, image);
        std::cout << "wrote " << path << " (" << image.width << "x" << image.height << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"block-space thread maps for NBB fractals"};
    app.require_subcommand(1);
    Plan plan;

    auto* verify = app.add_subcommand("verify", "run the oracle suite against a spec");
    verify->add_option("--spec", plan.spec_token, "builtin name or spec file")
        ->capture_default_str();
    verify->add_option("--rmax", plan.rmax, "top scale level")
        ->check(CLI::Range(0, 12))
        ->capture_default_str();
    auto* verify_rho = verify->add_option("--rho", plan.rho_list, "block edges to exercise")
                           ->delimiter(',');
    verify->add_option("--seed", plan.seed, "rng seed")->capture_default_str();
    verify->add_option("--workers", plan.workers, "dispatch worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    verify->add_option("--max-cells", plan.max_cells, "embedded cell budget")
        ->capture_default_str();

    auto* bench = app.add_subcommand("bench", "sweep launches and emit CSV");
    bench->add_option("--spec", plan.spec_token, "builtin name or spec file")
        ->capture_default_str();
    bench->add_option("--workload", plan.workload, "kernel body")
        ->check(CLI::IsMember({"sw", "rd", "ca"}))
        ->capture_default_str();
    bench->add_option("--rmin", plan.rmin, "first scale level")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    bench->add_option("--rmax", plan.rmax, "last scale level")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    auto* bench_rho = bench->add_option("--rho", plan.rho_list, "block edges to sweep")
                          ->delimiter(',');
    bench->add_option("--mode", plan.mode, "map modes to launch")
        ->check(CLI::IsMember({"bb", "lambda", "both"}))
        ->capture_default_str();
    bench->add_option("--strategy", plan.strategy, "intra-block strategy")
        ->check(CLI::IsMember({"unroll", "lut", "subbox"}))
        ->capture_default_str();
    bench->add_option("--backend", plan.backend, "lambda origin backend")
        ->check(CLI::IsMember({"direct", "mma1", "mma2", "mma3"}))
        ->capture_default_str();
    bench->add_option("--reps", plan.reps, "repetitions per row")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench->add_option("--seed", plan.seed, "rng seed")->capture_default_str();
    bench->add_option("--out", plan.out, "CSV path, - for stdout")->capture_default_str();
    bench->add_option("--workers", plan.workers, "dispatch worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench->add_flag("--timing", plan.timing, "record wall-clock micros");
    bench->add_option("--steps", plan.steps, "automaton steps per launch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench->add_option("--max-cells", plan.max_cells, "embedded cell budget")
        ->capture_default_str();

    auto* render = app.add_subcommand("render", "write PBM/PGM images");
    render->add_option("--spec", plan.spec_token, "builtin name or spec file")
        ->capture_default_str();
    render->add_option("--r", plan.r, "scale level")
        ->check(CLI::NonNegativeNumber)
        ->required();
    render->add_option("--what", plan.what, "image kind")
        ->check(CLI::IsMember({"fractal", "packing", "mapping"}))
        ->required();
    render->add_option("--out", plan.out, "output path")->capture_default_str();
    render->add_option("--max-cells", plan.max_cells, "embedded cell budget")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        plan.rho_given = verify_rho->count() > 0 || bench_rho->count() > 0;
        if (verify->parsed()) {
            return cmd_verify(plan);
        }
        if (bench->parsed()) {
            return cmd_bench(plan);
        }
        return cmd_render(plan);
    } catch (const std::bad_alloc&) {
        std::cerr << "resource limit: out of memory\n";
        return 3;
    } catch (const ResourceError& e) {
        std::cerr << "resource limit: " << e.what() << "\n";
        return 3;
    } catch (const std::logic_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
