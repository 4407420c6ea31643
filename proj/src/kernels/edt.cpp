#include "wss/kernels/edt.hpp"

#include <cmath>
#include <limits>

namespace wss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance lower envelope (Felzenszwalb-Huttenlocher).
// f and d have length n; v/zbuf are scratch of length n and n+1.
void edt_1d(const double* f, double* d, int n, int* v, double* zbuf) {
    int k = 0;
    v[0] = 0;
    zbuf[0] = -kInf;
    zbuf[1] = kInf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (f[v[0]] == kInf && k == 0) {
            v[0] = q;
            continue;
        }
        double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= zbuf[k]) {
            --k;
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        zbuf[k] = s;
        zbuf[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (zbuf[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

} // namespace

std::vector<double> distance_transform(const BinaryMask& mask) {
    const GridSpec& g = mask.grid;
    // Pad one voxel of background on every side so the virtual border
    // participates as a zero.
    const int px = g.nx + 2, py = g.ny + 2, pz = g.nz + 2;
    const int64_t pvox = static_cast<int64_t>(px) * py * pz;
    std::vector<double> dist(static_cast<size_t>(pvox), 0.0);
    auto pidx = [&](int x, int y, int z) {
        return (static_cast<int64_t>(z) * py + y) * px + x;
    };
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x)
                if (mask.values[static_cast<size_t>(g.index(x, y, z))])
                    dist[static_cast<size_t>(pidx(x + 1, y + 1, z + 1))] = kInf;

    // Pass along x.
#pragma omp parallel if (pz * py > 8)
    {
        std::vector<double> f(static_cast<size_t>(px)), d(static_cast<size_t>(px));
        std::vector<int> v(static_cast<size_t>(px));
        std::vector<double> zb(static_cast<size_t>(px) + 1);
#pragma omp for collapse(2) schedule(static)
        for (int z = 0; z < pz; ++z) {
            for (int y = 0; y < py; ++y) {
                double* row = dist.data() + pidx(0, y, z);
                edt_1d(row, d.data(), px, v.data(), zb.data());
                for (int x = 0; x < px; ++x) row[x] = d[static_cast<size_t>(x)];
            }
        }
        (void)f;
    }

    // Pass along y.
#pragma omp parallel if (pz * px > 8)
    {
        std::vector<double> f(static_cast<size_t>(py)), d(static_cast<size_t>(py));
        std::vector<int> v(static_cast<size_t>(py));
        std::vector<double> zb(static_cast<size_t>(py) + 1);
#pragma omp for collapse(2) schedule(static)
        for (int z = 0; z < pz; ++z) {
            for (int x = 0; x < px; ++x) {
                for (int y = 0; y < py; ++y) f[static_cast<size_t>(y)] = dist[static_cast<size_t>(pidx(x, y, z))];
                edt_1d(f.data(), d.data(), py, v.data(), zb.data());
                for (int y = 0; y < py; ++y) dist[static_cast<size_t>(pidx(x, y, z))] = d[static_cast<size_t>(y)];
            }
        }
    }

    // Pass along z (skipped for single-slice grids).
    if (pz > 3) {
#pragma omp parallel if (py * px > 8)
        {
            std::vector<double> f(static_cast<size_t>(pz)), d(static_cast<size_t>(pz));
            std::vector<int> v(static_cast<size_t>(pz));
            std::vector<double> zb(static_cast<size_t>(pz) + 1);
#pragma omp for collapse(2) schedule(static)
            for (int y = 0; y < py; ++y) {
                for (int x = 0; x < px; ++x) {
                    for (int z = 0; z < pz; ++z) f[static_cast<size_t>(z)] = dist[static_cast<size_t>(pidx(x, y, z))];
                    edt_1d(f.data(), d.data(), pz, v.data(), zb.data());
                    for (int z = 0; z < pz; ++z) dist[static_cast<size_t>(pidx(x, y, z))] = d[static_cast<size_t>(z)];
                }
            }
        }
    }

    std::vector<double> out(static_cast<size_t>(g.voxels()), 0.0);
#pragma omp parallel for schedule(static) if (g.voxels() > 4096)
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                const size_t i = static_cast<size_t>(g.index(x, y, z));
                if (mask.values[i])
                    out[i] = std::sqrt(dist[static_cast<size_t>(pidx(x + 1, y + 1, z + 1))]);
            }
    return out;
}

} // namespace wss
