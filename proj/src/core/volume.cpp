#include "wss/core/volume.hpp"

#include "wss/util/error.hpp"

#include <cmath>

namespace wss {

void GridSpec::validate() const {
    require(nx >= 1 && ny >= 1 && nz >= 1, "grid dims must be >= 1");
    require(sx > 0 && sy > 0 && sz > 0, "grid spacing must be > 0");
}

IntensityVolume::IntensityVolume(const GridSpec& g, std::vector<std::string> names)
    : grid(g), channel_names(std::move(names)) {
    channels.assign(channel_names.size(),
                    std::vector<double>(static_cast<size_t>(g.voxels()), 0.0));
}

void IntensityVolume::validate() const {
    grid.validate();
    require(channels.size() == channel_names.size(), "channel name/data mismatch");
    for (const auto& ch : channels) {
        require(ch.size() == static_cast<size_t>(grid.voxels()), "channel size mismatch");
        for (double v : ch) require(std::isfinite(v), "non-finite intensity value");
    }
}

void LabelVolume::validate() const {
    grid.validate();
    require(labels.size() == static_cast<size_t>(grid.voxels()), "label size mismatch");
    for (uint8_t l : labels) require(l < kNumClasses, "class id out of range");
}

int64_t AnnotationMask::annotated_count() const {
    int64_t n = 0;
    for (uint8_t l : labels) n += l != kUnlabeled;
    return n;
}

int64_t BinaryMask::count() const {
    int64_t n = 0;
    for (uint8_t v : values) n += v != 0;
    return n;
}

BinaryMask class_mask(const LabelVolume& labels, uint8_t class_id) {
    BinaryMask mask(labels.grid);
    for (size_t i = 0; i < labels.labels.size(); ++i)
        mask.values[i] = labels.labels[i] == class_id ? 1 : 0;
    return mask;
}

BinaryMask slice_mask(const BinaryMask& mask, int z) {
    GridSpec g2 = mask.grid;
    g2.nz = 1;
    BinaryMask out(g2);
    const int64_t plane = static_cast<int64_t>(mask.grid.nx) * mask.grid.ny;
    const auto* src = mask.values.data() + z * plane;
    std::copy(src, src + plane, out.values.begin());
    return out;
}

} // namespace wss
