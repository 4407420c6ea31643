#include "wss/annotate/scribble.hpp"

#include "wss/kernels/edt.hpp"
#include "wss/util/error.hpp"

#include <algorithm>
#include <cmath>

namespace wss {

void ScribbleConfig::validate() const {
    require(max_radius_mm > 0.0, "max scribble radius must be positive");
    require(erosion_target_fraction > 0.0 && erosion_target_fraction <= 1.0,
            "erosion target fraction must be in (0,1]");
    require(background_fraction >= 0.0 && background_fraction <= 1.0,
            "background fraction must be in [0,1]");
}

namespace {

double in_plane_spacing(const GridSpec& g) {
    require(std::abs(g.sx - g.sy) < 1e-9, "scribbles need isotropic in-plane spacing");
    return g.sx;
}

int max_radius_voxels(const BinaryMask& slice, const ScribbleConfig& config) {
    return static_cast<int>(std::floor(config.max_radius_mm / in_plane_spacing(slice.grid) + 1e-9));
}

// Rasterized circle: voxel centres within r voxels of (cx, cy), clipped to
// the grid. When `inside` is set, every voxel must lie in that mask.
bool rasterize_circle(const BinaryMask* inside, const GridSpec& g, int cx, int cy, int r,
                      BinaryMask& out) {
    for (int y = std::max(0, cy - r); y <= std::min(g.ny - 1, cy + r); ++y) {
        for (int x = std::max(0, cx - r); x <= std::min(g.nx - 1, cx + r); ++x) {
            const int dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy > r * r) continue;
            if (inside && !inside->values[static_cast<size_t>(g.index(x, y, 0))]) return false;
            out.values[static_cast<size_t>(g.index(x, y, 0))] = 1;
        }
    }
    return true;
}

// Largest circle at a fixed centre that stays inside the mask, starting
// from r_start; falls back to the single centre voxel.
BinaryMask fitted_circle(const BinaryMask& slice, int cx, int cy, int r_start) {
    for (int r = r_start; r >= 1; --r) {
        BinaryMask out(slice.grid);
        if (rasterize_circle(&slice, slice.grid, cx, cy, r, out)) return out;
    }
    BinaryMask out(slice.grid);
    out.values[static_cast<size_t>(slice.grid.index(cx, cy, 0))] = 1;
    return out;
}

std::vector<int64_t> true_voxels(const BinaryMask& mask) {
    std::vector<int64_t> out;
    for (size_t i = 0; i < mask.values.size(); ++i)
        if (mask.values[i]) out.push_back(static_cast<int64_t>(i));
    return out;
}

} // namespace

BinaryMask scribble_random_valid(const BinaryMask& lesion_slice, const ScribbleConfig& config,
                                 Rng& rng) {
    require(lesion_slice.grid.nz == 1, "scribbles operate on single slices");
    const auto voxels = true_voxels(lesion_slice);
    if (voxels.empty()) return BinaryMask(lesion_slice.grid);
    const int64_t pick = voxels[static_cast<size_t>(rng.uniform_int(voxels.size()))];
    const auto c = lesion_slice.grid.coords(pick);
    return fitted_circle(lesion_slice, c[0], c[1], max_radius_voxels(lesion_slice, config));
}

BinaryMask scribble_center_distmap(const BinaryMask& lesion_slice,
                                   const ScribbleConfig& config) {
    require(lesion_slice.grid.nz == 1, "scribbles operate on single slices");
    if (lesion_slice.count() == 0) return BinaryMask(lesion_slice.grid);
    const auto dist = distance_transform(lesion_slice);
    // First maximum in index order = smallest (y, x).
    size_t best = 0;
    for (size_t i = 1; i < dist.size(); ++i)
        if (dist[i] > dist[best]) best = i;
    const auto c = lesion_slice.grid.coords(static_cast<int64_t>(best));
    const int r_start = std::min(max_radius_voxels(lesion_slice, config),
                                 static_cast<int>(std::floor(dist[best])));
    return fitted_circle(lesion_slice, c[0], c[1], r_start);
}

BinaryMask scribble_random_distmap(const BinaryMask& lesion_slice, const ScribbleConfig& config,
                                   Rng& rng) {
    require(lesion_slice.grid.nz == 1, "scribbles operate on single slices");
    const auto voxels = true_voxels(lesion_slice);
    if (voxels.empty()) return BinaryMask(lesion_slice.grid);
    const auto dist = distance_transform(lesion_slice);
    std::vector<double> cumulative(voxels.size());
    double total = 0.0;
    for (size_t i = 0; i < voxels.size(); ++i) {
        total += dist[static_cast<size_t>(voxels[i])];
        cumulative[i] = total;
    }
    const double u = rng.uniform() * total;
    const size_t k = static_cast<size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const auto c = lesion_slice.grid.coords(voxels[std::min(k, voxels.size() - 1)]);
    BinaryMask out(lesion_slice.grid);
    rasterize_circle(nullptr, lesion_slice.grid, c[0], c[1],
                     max_radius_voxels(lesion_slice, config), out);
    return out;
}

namespace {

BinaryMask largest_component(const BinaryMask& mask) {
    auto comps = connected_components(mask, Connectivity::kFull);
    if (comps.size() <= 1) return mask;
    size_t best = 0;
    for (size_t i = 1; i < comps.size(); ++i)
        if (comps[i].size() > comps[best].size()) best = i;
    BinaryMask out(mask.grid);
    for (int64_t v : comps[best]) out.values[static_cast<size_t>(v)] = 1;
    return out;
}

} // namespace

BinaryMask scribble_erosion(const BinaryMask& lesion_slice, const ScribbleConfig& config) {
    require(lesion_slice.grid.nz == 1, "scribbles operate on single slices");
    config.validate();
    const int64_t area0 = lesion_slice.count();
    if (area0 == 0) return BinaryMask(lesion_slice.grid);
    const double target = config.erosion_target_fraction * static_cast<double>(area0);
    BinaryMask cur = largest_component(lesion_slice);
    while (static_cast<double>(cur.count()) > target) {
        BinaryMask next = binary_erode(cur, config.erosion_element);
        if (next.count() == 0) break;
        cur = largest_component(next);
    }
    return cur;
}

namespace {

BinaryMask dilate_in_plane(const BinaryMask& mask, int iterations) {
    const GridSpec& g = mask.grid;
    BinaryMask cur = mask;
    for (int it = 0; it < iterations; ++it) {
        BinaryMask next = cur;
        for (int z = 0; z < g.nz; ++z)
            for (int y = 0; y < g.ny; ++y)
                for (int x = 0; x < g.nx; ++x) {
                    if (cur.values[static_cast<size_t>(g.index(x, y, z))]) continue;
                    bool hit = false;
                    for (int dy = -1; !hit && dy <= 1; ++dy)
                        for (int dx = -1; !hit && dx <= 1; ++dx) {
                            const int xx = x + dx, yy = y + dy;
                            if (g.contains(xx, yy, z) &&
                                cur.values[static_cast<size_t>(g.index(xx, yy, z))])
                                hit = true;
                        }
                    if (hit) next.values[static_cast<size_t>(g.index(x, y, z))] = 1;
                }
        cur = std::move(next);
    }
    return cur;
}

void paint(AnnotationMask& annotation, const BinaryMask& scribble, int z, uint8_t class_id) {
    const GridSpec& g = annotation.grid;
    const int64_t plane = static_cast<int64_t>(g.nx) * g.ny;
    for (int64_t p = 0; p < plane; ++p) {
        if (!scribble.values[static_cast<size_t>(p)]) continue;
        auto& slot = annotation.labels[static_cast<size_t>(z * plane + p)];
        // First writer wins: lesion scribbles are painted before prostate.
        if (slot == kUnlabeled) slot = class_id;
    }
}

} // namespace

AnnotationMask annotate_case(const LabelVolume& truth, const ScribbleConfig& config,
                             uint64_t case_seed) {
    config.validate();
    const GridSpec& g = truth.grid;
    AnnotationMask annotation(g);
    Rng rng(case_seed);

    const BinaryMask lesions = class_mask(truth, kLesion);
    const BinaryMask prostate = class_mask(truth, kProstate);

    for (int z = 0; z < g.nz; ++z) {
        const BinaryMask lesion_slice = slice_mask(lesions, z);
        for (const auto& comp : connected_components(lesion_slice, Connectivity::kFull)) {
            BinaryMask single(lesion_slice.grid);
            for (int64_t v : comp) single.values[static_cast<size_t>(v)] = 1;
            BinaryMask scribble;
            switch (config.strategy) {
            case ScribbleStrategy::kRandomValid:
                scribble = scribble_random_valid(single, config, rng);
                break;
            case ScribbleStrategy::kCenterDistmap:
                scribble = scribble_center_distmap(single, config);
                break;
            case ScribbleStrategy::kRandomDistmap:
                scribble = scribble_random_distmap(single, config, rng);
                break;
            case ScribbleStrategy::kErosion:
                scribble = scribble_erosion(single, config);
                break;
            }
            paint(annotation, scribble, z, kLesion);
        }

        // One circle per slice for the gland, always random valid.
        const BinaryMask prostate_slice = slice_mask(prostate, z);
        if (prostate_slice.count() > 0) {
            ScribbleConfig pc = config;
            pc.strategy = ScribbleStrategy::kRandomValid;
            paint(annotation, scribble_random_valid(prostate_slice, pc, rng), z, kProstate);
        }
    }

    if (config.background_fraction > 0.0) {
        BinaryMask gland(g);
        for (size_t i = 0; i < truth.labels.size(); ++i)
            gland.values[i] = truth.labels[i] != kBackground ? 1 : 0;
        const BinaryMask excluded = dilate_in_plane(gland, 2);
        for (size_t i = 0; i < excluded.values.size(); ++i) {
            if (excluded.values[i]) continue;
            if (rng.uniform() < config.background_fraction && annotation.labels[i] == kUnlabeled)
                annotation.labels[i] = kBackground;
        }
    }
    return annotation;
}

CoverageCounts coverage_counts(const AnnotationMask& annotation, const LabelVolume& truth,
                               uint8_t class_id) {
    require(annotation.grid == truth.grid, "annotation grid must match ground truth");
    CoverageCounts out;
    for (size_t i = 0; i < truth.labels.size(); ++i) {
        if (truth.labels[i] != class_id) continue;
        ++out.total;
        out.annotated += annotation.labels[i] == class_id;
    }
    return out;
}

std::optional<double> coverage_fraction(const AnnotationMask& annotation,
                                        const LabelVolume& truth, uint8_t class_id) {
    const CoverageCounts c = coverage_counts(annotation, truth, class_id);
    if (c.total == 0) return std::nullopt;
    return static_cast<double>(c.annotated) / static_cast<double>(c.total);
}

} // namespace wss
