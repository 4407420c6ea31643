#include "wss/core/ops.hpp"

#include "wss/util/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace wss {

IntensityVolume normalize_intensity(const IntensityVolume& volume) {
    volume.validate();
    IntensityVolume out = volume;
    for (auto& ch : out.channels) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (double v : ch) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi == lo) {
            std::fill(ch.begin(), ch.end(), 0.0);
            continue;
        }
        const double inv = 1.0 / (hi - lo);
        for (double& v : ch) v = (v - lo) * inv;
    }
    return out;
}

namespace {

// Output voxel centre mapped into source voxel bins, clamped to the grid.
inline int map_index(int i, double target_spacing, double source_spacing, int source_n) {
    const int j = static_cast<int>(std::floor((i + 0.5) * target_spacing / source_spacing));
    return std::clamp(j, 0, source_n - 1);
}

template <typename T>
std::vector<T> resample_field(const std::vector<T>& src, const GridSpec& from,
                              const GridSpec& to_spacing_grid, T fill) {
    // Step 1: resample to target spacing (dims follow from physical extent).
    GridSpec mid = from;
    mid.sx = to_spacing_grid.sx;
    mid.sy = to_spacing_grid.sy;
    mid.sz = to_spacing_grid.sz;
    mid.nx = std::max(1, static_cast<int>(std::round(from.nx * from.sx / mid.sx)));
    mid.ny = std::max(1, static_cast<int>(std::round(from.ny * from.sy / mid.sy)));
    mid.nz = std::max(1, static_cast<int>(std::round(from.nz * from.sz / mid.sz)));

    std::vector<T> midv(static_cast<size_t>(mid.voxels()));
    for (int z = 0; z < mid.nz; ++z) {
        const int zz = map_index(z, mid.sz, from.sz, from.nz);
        for (int y = 0; y < mid.ny; ++y) {
            const int yy = map_index(y, mid.sy, from.sy, from.ny);
            for (int x = 0; x < mid.nx; ++x) {
                const int xx = map_index(x, mid.sx, from.sx, from.nx);
                midv[static_cast<size_t>(mid.index(x, y, z))] =
                    src[static_cast<size_t>(from.index(xx, yy, zz))];
            }
        }
    }

    // Step 2: centre crop / zero-pad to target dims.
    const GridSpec& tg = to_spacing_grid;
    std::vector<T> out(static_cast<size_t>(tg.voxels()), fill);
    const int offx = (mid.nx - tg.nx) / 2;
    const int offy = (mid.ny - tg.ny) / 2;
    const int offz = (mid.nz - tg.nz) / 2;
    for (int z = 0; z < tg.nz; ++z) {
        const int zz = z + offz;
        if (zz < 0 || zz >= mid.nz) continue;
        for (int y = 0; y < tg.ny; ++y) {
            const int yy = y + offy;
            if (yy < 0 || yy >= mid.ny) continue;
            for (int x = 0; x < tg.nx; ++x) {
                const int xx = x + offx;
                if (xx < 0 || xx >= mid.nx) continue;
                out[static_cast<size_t>(tg.index(x, y, z))] =
                    midv[static_cast<size_t>(mid.index(xx, yy, zz))];
            }
        }
    }
    return out;
}

} // namespace

IntensityVolume resample_pad_crop(const IntensityVolume& volume, const GridSpec& target) {
    volume.grid.validate();
    target.validate();
    IntensityVolume out(target, volume.channel_names);
    for (size_t c = 0; c < volume.channels.size(); ++c)
        out.channels[c] = resample_field(volume.channels[c], volume.grid, target, 0.0);
    return out;
}

LabelVolume resample_pad_crop(const LabelVolume& volume, const GridSpec& target) {
    volume.grid.validate();
    target.validate();
    LabelVolume out(target);
    out.labels = resample_field(volume.labels, volume.grid, target, kBackground);
    return out;
}

std::vector<std::vector<int64_t>> connected_components(const BinaryMask& mask,
                                                       Connectivity connectivity) {
    const GridSpec& g = mask.grid;
    const int64_t n = g.voxels();
    std::vector<uint8_t> visited(static_cast<size_t>(n), 0);
    std::vector<std::vector<int64_t>> comps;
    std::vector<int64_t> stack;

    std::array<std::array<int, 3>, 26> offsets{};
    int noff = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0) continue;
                if (connectivity == Connectivity::kFace &&
                    std::abs(dx) + std::abs(dy) + std::abs(dz) != 1)
                    continue;
                offsets[static_cast<size_t>(noff++)] = {dx, dy, dz};
            }

    for (int64_t seed = 0; seed < n; ++seed) {
        if (!mask.values[static_cast<size_t>(seed)] || visited[static_cast<size_t>(seed)])
            continue;
        std::vector<int64_t> comp;
        stack.clear();
        stack.push_back(seed);
        visited[static_cast<size_t>(seed)] = 1;
        while (!stack.empty()) {
            const int64_t cur = stack.back();
            stack.pop_back();
            comp.push_back(cur);
            const auto c = g.coords(cur);
            for (int k = 0; k < noff; ++k) {
                const int x = c[0] + offsets[static_cast<size_t>(k)][0];
                const int y = c[1] + offsets[static_cast<size_t>(k)][1];
                const int z = c[2] + offsets[static_cast<size_t>(k)][2];
                if (!g.contains(x, y, z)) continue;
                const int64_t j = g.index(x, y, z);
                if (mask.values[static_cast<size_t>(j)] && !visited[static_cast<size_t>(j)]) {
                    visited[static_cast<size_t>(j)] = 1;
                    stack.push_back(j);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }

    auto key = [&](const std::vector<int64_t>& comp) {
        int mz = g.nz, my = g.ny, mx = g.nx;
        for (int64_t v : comp) {
            const auto c = g.coords(v);
            mz = std::min(mz, c[2]);
            my = std::min(my, c[1]);
            mx = std::min(mx, c[0]);
        }
        return std::array<int, 3>{mz, my, mx};
    };
    std::stable_sort(comps.begin(), comps.end(),
                     [&](const auto& a, const auto& b) { return key(a) < key(b); });
    return comps;
}

double iou(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
    if (a.empty() && b.empty()) return 0.0;
    size_t i = 0, j = 0, inter = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j])
            ++i;
        else if (a[i] > b[j])
            ++j;
        else {
            ++inter;
            ++i;
            ++j;
        }
    }
    const size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask binary_erode(const BinaryMask& mask, StructuringElement element) {
    const GridSpec& g = mask.grid;
    BinaryMask out(g);
#pragma omp parallel for collapse(2) schedule(static) if (g.voxels() > 65536)
    for (int z = 0; z < g.nz; ++z) {
        for (int y = 0; y < g.ny; ++y) {
            for (int x = 0; x < g.nx; ++x) {
                const size_t i = static_cast<size_t>(g.index(x, y, z));
                bool keep = mask.values[i] != 0;
                for (int dy = -1; keep && dy <= 1; ++dy) {
                    for (int dx = -1; keep && dx <= 1; ++dx) {
                        if (element == StructuringElement::kCross && dx != 0 && dy != 0) continue;
                        const int xx = x + dx, yy = y + dy;
                        if (!g.contains(xx, yy, z) ||
                            !mask.values[static_cast<size_t>(g.index(xx, yy, z))])
                            keep = false;
                    }
                }
                out.values[i] = keep ? 1 : 0;
            }
        }
    }
    return out;
}

} // namespace wss
