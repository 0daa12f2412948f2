#include "nbb/mma.hpp"

#include <stdexcept>
#include <string>

namespace nbb {
namespace {

void check_capacity(int level) {
    if (level > kFragmentDim) {
        throw ResourceError("mma encoding: level " + std::to_string(level) +
                            " exceeds the fragment capacity of " + std::to_string(kFragmentDim));
    }
}

}  // namespace

Fragment mma_eval(const Fragment& a, const Fragment& b, const Fragment& c) {
    Fragment d = c;
    for (int i = 0; i < kFragmentDim; ++i) {
        for (int m = 0; m < kFragmentDim; ++m) {
            const double av = a.at(i, m);
            if (av == 0.0) {
                continue;
            }
            for (int j = 0; j < kFragmentDim; ++j) {
                d.at(i, j) += av * b.at(m, j);
            }
        }
    }
    return d;
}

Variant1Encoding encode_variant1(const FractalSpec& spec, int level, OrthotopeCoord omega) {
    check_capacity(level);
    lambda_map(spec, level, omega);  // reject omega outside the orthotope
    Variant1Encoding enc;
    double power = 1.0;
    for (int mu = 1; mu <= level; ++mu) {
        enc.a.at(0, mu - 1) = power;
        power *= spec.scale_factor();
        const auto lo = level_offset(spec, omega, mu);
        enc.b.at(mu - 1, 0) = lo.tau.x;
        enc.b.at(mu - 1, 1) = lo.tau.y;
    }
    return enc;
}

Variant2Encoding encode_variant2(const FractalSpec& spec, int level,
                                 std::span<const OrthotopeCoord> omegas) {
    check_capacity(level);
    if (omegas.size() > 8) {
        throw ResourceError("variant 2 packs at most 8 coordinate pairs, got " +
                            std::to_string(omegas.size()));
    }
    Variant2Encoding enc;
    enc.count = static_cast<int>(omegas.size());
    const auto [w, h] = spec.orthotope_dims(level);
    double power = 1.0;
    for (int mu = 1; mu <= level; ++mu) {
        enc.a.at(0, mu - 1) = power;
        power *= spec.scale_factor();
    }
    for (int i = 0; i < enc.count; ++i) {
        const OrthotopeCoord omega = omegas[static_cast<std::size_t>(i)];
        if (omega.x < 0 || omega.y < 0 || omega.x >= w || omega.y >= h) {
            continue;  // surplus slot of the even-rounded cover
        }
        enc.active[static_cast<std::size_t>(i)] = true;
        for (int mu = 1; mu <= level; ++mu) {
            const auto lo = level_offset(spec, omega, mu);
            enc.b.at(mu - 1, 2 * i) = lo.tau.x;
            enc.b.at(mu - 1, 2 * i + 1) = lo.tau.y;
        }
    }
    return enc;
}

Variant2LaunchShape variant2_launch_shape(const FractalSpec& spec, int level) {
    Variant2LaunchShape shape;
    const auto [w, h] = spec.orthotope_dims(level);
    shape.sub_w = w;
    shape.sub_h = h;
    const std::int64_t even_w = (w + 1) / 2 * 2;
    const std::int64_t even_h = (h + 1) / 2 * 2;
    shape.slots = even_w * even_h;
    shape.inactive = shape.slots - w * h;
    return shape;
}

Variant3Encoding encode_variant3(const FractalSpec& spec, const BlockGeometry& geom,
                                 OrthotopeCoord omega) {
    if (geom.rho != kFragmentDim) {
        throw std::invalid_argument("variant 3 needs rho = 16, got " + std::to_string(geom.rho));
    }
    check_capacity(geom.r_b);
    lambda_map(spec, geom.r_b, omega);  // reject omega outside the orthotope
    Variant3Encoding enc;
    double power = geom.rho;  // A carries rho * s^(mu-1) so A*B yields rho * lambda
    for (int mu = 1; mu <= geom.r_b; ++mu) {
        for (int i = 0; i < kFragmentDim; ++i) {
            enc.a.at(i, mu - 1) = power;
        }
        power *= spec.scale_factor();
        const auto lo = level_offset(spec, omega, mu);
        for (int j = 0; j < kFragmentDim; ++j) {
            enc.bx.at(mu - 1, j) = lo.tau.x;
            enc.by.at(mu - 1, j) = lo.tau.y;
        }
    }
    for (int i = 0; i < kFragmentDim; ++i) {
        for (int j = 0; j < kFragmentDim; ++j) {
            enc.cx.at(i, j) = i;  // thread (tx=i, ty=j) offsets, sub-box convention
            enc.cy.at(i, j) = j;
        }
    }
    return enc;
}

}  // namespace nbb
