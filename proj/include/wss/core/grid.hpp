#pragma once

#include <array>
#include <cstdint>

namespace wss {

// Image domain: voxel counts per axis and voxel spacing in millimetres.
// Linear voxel index is x-fastest: idx = (z * ny + y) * nx + x.
struct GridSpec {
    int nx = 96;
    int ny = 96;
    int nz = 20;
    double sx = 1.0;
    double sy = 1.0;
    double sz = 3.0;

    int64_t voxels() const { return static_cast<int64_t>(nx) * ny * nz; }

    int64_t index(int x, int y, int z) const {
        return (static_cast<int64_t>(z) * ny + y) * nx + x;
    }

    std::array<int, 3> coords(int64_t idx) const {
        const int x = static_cast<int>(idx % nx);
        const int y = static_cast<int>((idx / nx) % ny);
        const int z = static_cast<int>(idx / (static_cast<int64_t>(nx) * ny));
        return {x, y, z};
    }

    bool contains(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
    }

    bool operator==(const GridSpec&) const = default;

    void validate() const;
};

} // namespace wss
