#include "nbb/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

namespace nbb {

std::uint64_t checked_pow(std::uint64_t base, int exp) {
    if (exp < 0) {
        throw std::invalid_argument("checked_pow: negative exponent");
    }
    std::uint64_t result = 1;
    for (int i = 0; i < exp; ++i) {
        if (base != 0 && result > std::numeric_limits<std::uint64_t>::max() / base) {
            throw std::overflow_error("checked_pow: " + std::to_string(base) + "^" +
                                      std::to_string(exp) + " overflows 64 bits");
        }
        result *= base;
    }
    return result;
}

int level_for_size(std::int64_t n, int scale_factor) {
    if (scale_factor < 2) {
        throw std::invalid_argument("level_for_size: scale factor must be >= 2");
    }
    if (n < 1) {
        throw std::invalid_argument("level_for_size: side length must be >= 1");
    }
    int level = 0;
    std::int64_t v = n;
    while (v > 1) {
        if (v % scale_factor != 0) {
            throw std::invalid_argument("level_for_size: " + std::to_string(n) +
                                        " is not a power of " + std::to_string(scale_factor));
        }
        v /= scale_factor;
        ++level;
    }
    return level;
}

FractalSpec::FractalSpec(std::string name, int replica_count, int scale_factor,
                         std::vector<ReplicaOffset> offsets)
    : name_(std::move(name)), k_(replica_count), s_(scale_factor), offsets_(std::move(offsets)) {
    if (k_ < 2) {
        throw std::invalid_argument("FractalSpec: replica count must be >= 2");
    }
    if (s_ < 2) {
        throw std::invalid_argument("FractalSpec: scale factor must be >= 2");
    }
    if (static_cast<std::int64_t>(k_) > static_cast<std::int64_t>(s_) * s_) {
        throw std::invalid_argument("FractalSpec: more replicas than step-box cells (k > s^2)");
    }
    if (offsets_.size() != static_cast<std::size_t>(k_)) {
        throw std::invalid_argument("FractalSpec: expected exactly " + std::to_string(k_) +
                                    " replica offsets, got " + std::to_string(offsets_.size()));
    }
    cell_to_replica_.assign(static_cast<std::size_t>(s_) * s_, -1);
    for (int i = 0; i < k_; ++i) {
        const ReplicaOffset o = offsets_[static_cast<std::size_t>(i)];
        if (o.x < 0 || o.y < 0 || o.x >= s_ || o.y >= s_) {
            throw std::invalid_argument("FractalSpec: replica offset (" + std::to_string(o.x) +
                                        "," + std::to_string(o.y) + ") outside [0," +
                                        std::to_string(s_ - 1) + "]");
        }
        std::int16_t& slot = cell_to_replica_[static_cast<std::size_t>(o.y) * s_ + o.x];
        if (slot != -1) {
            throw std::invalid_argument("FractalSpec: replica offsets overlap at (" +
                                        std::to_string(o.x) + "," + std::to_string(o.y) + ")");
        }
        slot = static_cast<std::int16_t>(i);
    }
}

FractalSpec FractalSpec::sierpinski() {
    return FractalSpec("sierpinski", 3, 2, {{0, 0}, {0, 1}, {1, 1}});
}

FractalSpec FractalSpec::vicsek() {
    return FractalSpec("vicsek", 5, 3, {{1, 1}, {1, 0}, {1, 2}, {0, 1}, {2, 1}});
}

FractalSpec FractalSpec::carpet() {
    return FractalSpec("carpet", 8, 3,
                       {{0, 0}, {1, 0}, {2, 0}, {0, 1}, {2, 1}, {0, 2}, {1, 2}, {2, 2}});
}

const std::vector<std::string>& FractalSpec::builtin_names() {
    static const std::vector<std::string> names = {"sierpinski", "vicsek", "carpet"};
    return names;
}

FractalSpec FractalSpec::builtin(std::string_view name) {
    if (name == "sierpinski") return sierpinski();
    if (name == "vicsek") return vicsek();
    if (name == "carpet") return carpet();
    throw std::invalid_argument("unknown builtin fractal '" + std::string(name) + "'");
}

FractalSpec FractalSpec::from_stream(std::istream& in) {
    std::string name;
    int k = -1;
    int s = -1;
    std::vector<ReplicaOffset> offsets;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("spec line " + std::to_string(line_no) +
                                        ": expected key=value, got '" + line + "'");
        }
        std::string key = line.substr(first, eq - first);
        key.erase(key.find_last_not_of(" \t") + 1);
        std::string value = line.substr(eq + 1);
        if (const auto end = value.find_last_not_of(" \t\r"); end != std::string::npos) {
            value.erase(end + 1);
        }
        value.erase(0, value.find_first_not_of(" \t"));
        if (key == "name") {
            name = value;
        } else if (key == "k") {
            k = std::stoi(value);
        } else if (key == "s") {
            s = std::stoi(value);
        } else if (key == "offset") {
            std::istringstream pair(value);
            int x = 0;
            int y = 0;
            char comma = 0;
            if (!(pair >> x >> comma >> y) || comma != ',') {
                throw std::invalid_argument("spec line " + std::to_string(line_no) +
                                            ": offset must be 'x,y', got '" + value + "'");
            }
            offsets.push_back({x, y});
        } else {
            throw std::invalid_argument("spec line " + std::to_string(line_no) +
                                        ": unknown key '" + key + "'");
        }
    }
    if (name.empty() || k < 0 || s < 0) {
        throw std::invalid_argument("spec: missing required key (name, k, s)");
    }
    return FractalSpec(std::move(name), k, s, std::move(offsets));
}

FractalSpec FractalSpec::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open fractal spec file '" + path + "'");
    }
    return from_stream(in);
}

std::int64_t FractalSpec::side_length(int level) const {
    const std::uint64_t n = checked_pow(static_cast<std::uint64_t>(s_), level);
    if (n > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw std::overflow_error("side_length overflows int64");
    }
    return static_cast<std::int64_t>(n);
}

std::uint64_t FractalSpec::volume(int level) const {
    return checked_pow(static_cast<std::uint64_t>(k_), level);
}

double FractalSpec::hausdorff() const {
    return std::log(static_cast<double>(k_)) / std::log(static_cast<double>(s_));
}

std::pair<std::int64_t, std::int64_t> FractalSpec::orthotope_dims(int level) const {
    if (level < 0) {
        throw std::invalid_argument("orthotope_dims: negative level");
    }
    const std::uint64_t w = checked_pow(static_cast<std::uint64_t>(k_), (level + 1) / 2);
    const std::uint64_t h = checked_pow(static_cast<std::uint64_t>(k_), level / 2);
    const auto max = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
    if (w > max || h > max) {
        throw std::overflow_error("orthotope_dims overflows int64");
    }
    return {static_cast<std::int64_t>(w), static_cast<std::int64_t>(h)};
}

bool FractalSpec::is_member(EmbeddedCoord p, int level) const {
    const std::int64_t n = side_length(level);
    if (p.x < 0 || p.y < 0 || p.x >= n || p.y >= n) {
        throw std::out_of_range("is_member: (" + std::to_string(p.x) + "," +
                                std::to_string(p.y) + ") outside " + std::to_string(n) + "^2");
    }
    std::int64_t x = p.x;
    std::int64_t y = p.y;
    std::int64_t scale = n / s_;
    for (int mu = level; mu >= 1; --mu) {
        const int cx = static_cast<int>(x / scale);
        const int cy = static_cast<int>(y / scale);
        if (replica_at(cx, cy) < 0) {
            return false;
        }
        x -= cx * scale;
        y -= cy * scale;
        scale /= s_;
    }
    return true;
}

std::vector<EmbeddedCoord> FractalSpec::enumerate(int level, std::uint64_t max_cells) const {
    const std::uint64_t total = volume(level);
    if (total > max_cells) {
        throw ResourceError("enumerate: " + std::to_string(total) +
                            " cells exceed the budget of " + std::to_string(max_cells));
    }
    std::vector<EmbeddedCoord> cells;
    cells.reserve(total);
    cells.push_back({0, 0});
    std::int64_t scale = 1;
    for (int mu = 1; mu <= level; ++mu) {
        const std::size_t prev = cells.size();
        for (int i = 1; i < k_; ++i) {
            const std::int64_t dx = static_cast<std::int64_t>(offsets_[i].x) * scale;
            const std::int64_t dy = static_cast<std::int64_t>(offsets_[i].y) * scale;
            for (std::size_t j = 0; j < prev; ++j) {
                cells.push_back({cells[j].x + dx, cells[j].y + dy});
            }
        }
        const std::int64_t dx0 = static_cast<std::int64_t>(offsets_[0].x) * scale;
        const std::int64_t dy0 = static_cast<std::int64_t>(offsets_[0].y) * scale;
        if (dx0 != 0 || dy0 != 0) {
            for (std::size_t j = 0; j < prev; ++j) {
                cells[j].x += dx0;
                cells[j].y += dy0;
            }
        }
        scale *= s_;
    }
    std::sort(cells.begin(), cells.end());
    return cells;
}

MemberMask::MemberMask(const FractalSpec& spec, int level, std::uint64_t max_cells) {
    side_ = spec.side_length(level);
    const std::uint64_t area = static_cast<std::uint64_t>(side_) * side_;
    if (area > max_cells) {
        throw ResourceError("MemberMask: embedding of " + std::to_string(area) +
                            " cells exceeds the budget of " + std::to_string(max_cells));
    }
    bits_.assign(area, 0);
    const auto cells = spec.enumerate(level, max_cells);
    for (const EmbeddedCoord& c : cells) {
        bits_[static_cast<std::size_t>(c.y) * side_ + c.x] = 1;
    }
    count_ = cells.size();
}

}  // namespace nbb
