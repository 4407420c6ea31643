#include "wss/reference/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wss::reference {

std::vector<double> distance_transform_bruteforce(const BinaryMask& mask) {
    const GridSpec& g = mask.grid;
    std::vector<double> out(static_cast<size_t>(g.voxels()), 0.0);
    for (int z = 0; z < g.nz; ++z) {
        for (int y = 0; y < g.ny; ++y) {
            for (int x = 0; x < g.nx; ++x) {
                const size_t i = static_cast<size_t>(g.index(x, y, z));
                if (!mask.values[i]) continue;
                // Nearest virtual zero outside the grid lies straight along
                // an axis. The z border only exists for 3D grids.
                double best = std::min(std::min(x + 1, g.nx - x), std::min(y + 1, g.ny - y));
                if (g.nz > 1) best = std::min(best, static_cast<double>(std::min(z + 1, g.nz - z)));
                double best2 = best * best;
                for (int zz = 0; zz < g.nz; ++zz)
                    for (int yy = 0; yy < g.ny; ++yy)
                        for (int xx = 0; xx < g.nx; ++xx) {
                            if (mask.values[static_cast<size_t>(g.index(xx, yy, zz))]) continue;
                            const double dx = xx - x, dy = yy - y, dz = zz - z;
                            const double d2 = dx * dx + dy * dy + dz * dz;
                            if (d2 < best2) best2 = d2;
                        }
                out[i] = std::sqrt(best2);
            }
        }
    }
    return out;
}

BinaryMask binary_erode_bruteforce(const BinaryMask& mask, StructuringElement element) {
    const GridSpec& g = mask.grid;
    BinaryMask out(g);
    for (int z = 0; z < g.nz; ++z) {
        for (int y = 0; y < g.ny; ++y) {
            for (int x = 0; x < g.nx; ++x) {
                bool keep = mask.values[static_cast<size_t>(g.index(x, y, z))] != 0;
                for (int dy = -1; keep && dy <= 1; ++dy) {
                    for (int dx = -1; keep && dx <= 1; ++dx) {
                        if (element == StructuringElement::kCross && dx != 0 && dy != 0) continue;
                        const int xx = x + dx, yy = y + dy;
                        if (!g.contains(xx, yy, z) ||
                            !mask.values[static_cast<size_t>(g.index(xx, yy, z))])
                            keep = false;
                    }
                }
                out.values[static_cast<size_t>(g.index(x, y, z))] = keep ? 1 : 0;
            }
        }
    }
    return out;
}

std::vector<std::vector<int64_t>> connected_components_fixpoint(const BinaryMask& mask,
                                                                Connectivity connectivity) {
    const GridSpec& g = mask.grid;
    const int64_t n = g.voxels();
    // Every true voxel starts as its own label; repeatedly take the min
    // label over the neighbourhood until nothing changes.
    std::vector<int64_t> label(static_cast<size_t>(n), -1);
    for (int64_t i = 0; i < n; ++i)
        if (mask.values[static_cast<size_t>(i)]) label[static_cast<size_t>(i)] = i;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int z = 0; z < g.nz; ++z)
            for (int y = 0; y < g.ny; ++y)
                for (int x = 0; x < g.nx; ++x) {
                    const size_t i = static_cast<size_t>(g.index(x, y, z));
                    if (label[i] < 0) continue;
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (dx == 0 && dy == 0 && dz == 0) continue;
                                if (connectivity == Connectivity::kFace &&
                                    std::abs(dx) + std::abs(dy) + std::abs(dz) != 1)
                                    continue;
                                const int xx = x + dx, yy = y + dy, zz = z + dz;
                                if (!g.contains(xx, yy, zz)) continue;
                                const size_t j = static_cast<size_t>(g.index(xx, yy, zz));
                                if (label[j] >= 0 && label[j] < label[i]) {
                                    label[i] = label[j];
                                    changed = true;
                                }
                            }
                }
    }
    std::vector<int64_t> roots;
    std::vector<std::vector<int64_t>> comps;
    for (int64_t i = 0; i < n; ++i) {
        const int64_t l = label[static_cast<size_t>(i)];
        if (l < 0) continue;
        auto it = std::find(roots.begin(), roots.end(), l);
        size_t ci;
        if (it == roots.end()) {
            roots.push_back(l);
            comps.emplace_back();
            ci = comps.size() - 1;
        } else {
            ci = static_cast<size_t>(it - roots.begin());
        }
        comps[ci].push_back(i);
    }
    auto key = [&](const std::vector<int64_t>& comp) {
        int mz = g.nz, my = g.ny, mx = g.nx;
        for (int64_t v : comp) {
            auto c = g.coords(v);
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

void conv_forward_naive(const ConvShape& s, const double* in, const double* w,
                        const double* b, double* out) {
    const int oz_n = s.out_z(), oy_n = s.out_y(), ox_n = s.out_x();
    const int pz = s.kz / 2, py = s.ky / 2, px = s.kx / 2;
    auto in_at = [&](int c, int z, int y, int x) -> double {
        if (z < 0 || z >= s.in_z || y < 0 || y >= s.in_y || x < 0 || x >= s.in_x) return 0.0;
        return in[((1LL * c * s.in_z + z) * s.in_y + y) * s.in_x + x];
    };
    for (int oc = 0; oc < s.out_c; ++oc)
        for (int oz = 0; oz < oz_n; ++oz)
            for (int oy = 0; oy < oy_n; ++oy)
                for (int ox = 0; ox < ox_n; ++ox) {
                    double acc = b[oc];
                    for (int ic = 0; ic < s.in_c; ++ic)
                        for (int dz = 0; dz < s.kz; ++dz)
                            for (int dy = 0; dy < s.ky; ++dy)
                                for (int dx = 0; dx < s.kx; ++dx)
                                    acc += in_at(ic, oz * s.sz + dz - pz, oy * s.sy + dy - py,
                                                 ox * s.sx + dx - px) *
                                           w[((1LL * oc * s.in_c + ic) * s.kz + dz) * s.ky * s.kx +
                                             1LL * dy * s.kx + dx];
                    out[((1LL * oc * oz_n + oz) * oy_n + oy) * ox_n + ox] = acc;
                }
}

void conv_backward_naive(const ConvShape& s, const double* in, const double* grad_out,
                         const double* w, double* grad_in, double* grad_w, double* grad_b) {
    const int oz_n = s.out_z(), oy_n = s.out_y(), ox_n = s.out_x();
    const int pz = s.kz / 2, py = s.ky / 2, px = s.kx / 2;
    std::fill(grad_in, grad_in + s.in_count(), 0.0);
    std::fill(grad_w, grad_w + s.weight_count(), 0.0);
    std::fill(grad_b, grad_b + s.out_c, 0.0);
    for (int oc = 0; oc < s.out_c; ++oc)
        for (int oz = 0; oz < oz_n; ++oz)
            for (int oy = 0; oy < oy_n; ++oy)
                for (int ox = 0; ox < ox_n; ++ox) {
                    const double go =
                        grad_out[((1LL * oc * oz_n + oz) * oy_n + oy) * ox_n + ox];
                    grad_b[oc] += go;
                    for (int ic = 0; ic < s.in_c; ++ic)
                        for (int dz = 0; dz < s.kz; ++dz)
                            for (int dy = 0; dy < s.ky; ++dy)
                                for (int dx = 0; dx < s.kx; ++dx) {
                                    const int iz = oz * s.sz + dz - pz;
                                    const int iy = oy * s.sy + dy - py;
                                    const int ix = ox * s.sx + dx - px;
                                    if (iz < 0 || iz >= s.in_z || iy < 0 || iy >= s.in_y ||
                                        ix < 0 || ix >= s.in_x)
                                        continue;
                                    const long long ii =
                                        ((1LL * ic * s.in_z + iz) * s.in_y + iy) * s.in_x + ix;
                                    const long long wi =
                                        ((1LL * oc * s.in_c + ic) * s.kz + dz) * s.ky * s.kx +
                                        1LL * dy * s.kx + dx;
                                    grad_in[ii] += go * w[wi];
                                    grad_w[wi] += go * in[ii];
                                }
                }
}

double sum_naive(const double* data, long long n) {
    double s = 0.0;
    for (long long i = 0; i < n; ++i) s += data[i];
    return s;
}

} // namespace wss::reference
