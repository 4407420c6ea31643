#include "wss/synth/phantom.hpp"

#include "wss/core/ops.hpp"
#include "wss/util/error.hpp"

#include <algorithm>
#include <cmath>

namespace wss {

void PhantomConfig::validate() const {
    grid.validate();
    require(case_count >= 1, "phantom corpus needs at least one case");
    require(positive_fraction >= 0.0 && positive_fraction <= 1.0,
            "positive fraction must be in [0,1]");
    require(min_lesions >= 1 && max_lesions >= min_lesions, "invalid lesion count range");
    require(lesion_volume_min > 0 && lesion_volume_max >= lesion_volume_min,
            "invalid lesion volume range");
    require(prostate_volume_min > 0 && prostate_volume_max >= prostate_volume_min,
            "invalid prostate volume range");
    require(noise_sigma >= 0.0, "noise sigma must be non-negative");
}

namespace {

// Low-frequency value noise in [-1, 1]: random lattice, trilinear interp.
class ValueNoise {
public:
    ValueNoise(const GridSpec& g, int lattice_step, Rng& rng) : step_(lattice_step) {
        nx_ = g.nx / step_ + 2;
        ny_ = g.ny / step_ + 2;
        nz_ = g.nz / step_ + 2;
        values_.resize(static_cast<size_t>(nx_) * ny_ * nz_);
        for (auto& v : values_) v = 2.0 * rng.uniform() - 1.0;
    }

    double at(int x, int y, int z) const {
        const double fx = static_cast<double>(x) / step_;
        const double fy = static_cast<double>(y) / step_;
        const double fz = static_cast<double>(z) / step_;
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy),
                  z0 = static_cast<int>(fz);
        const double tx = fx - x0, ty = fy - y0, tz = fz - z0;
        double acc = 0.0;
        for (int dz = 0; dz <= 1; ++dz)
            for (int dy = 0; dy <= 1; ++dy)
                for (int dx = 0; dx <= 1; ++dx) {
                    const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) *
                                     (dz ? tz : 1.0 - tz);
                    acc += w * lattice(x0 + dx, y0 + dy, z0 + dz);
                }
        return acc;
    }

private:
    double lattice(int x, int y, int z) const {
        return values_[(static_cast<size_t>(z) * ny_ + y) * nx_ + x];
    }

    int step_, nx_ = 0, ny_ = 0, nz_ = 0;
    std::vector<double> values_;
};

struct Ellipsoid {
    double cx, cy, cz;
    double ax, ay, az; // semi-axes in voxels

    double r2(int x, int y, int z) const {
        const double dx = (x - cx) / ax, dy = (y - cy) / ay, dz = (z - cz) / az;
        return dx * dx + dy * dy + dz * dz;
    }
};

// Semi-axes for a target voxel volume with mild random anisotropy; az is
// squashed because the axial spacing is coarser.
Ellipsoid sample_ellipsoid(double cx, double cy, double cz, double volume, Rng& rng,
                           double qz_lo, double qz_hi) {
    const double qy = 0.8 + 0.4 * rng.uniform();
    const double qz = qz_lo + (qz_hi - qz_lo) * rng.uniform();
    const double a = std::cbrt(3.0 * volume / (4.0 * M_PI * qy * qz));
    return {cx, cy, cz, a, a * qy, a * qz};
}

BinaryMask dilate26(const BinaryMask& mask) {
    const GridSpec& g = mask.grid;
    BinaryMask out = mask;
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                if (mask.values[static_cast<size_t>(g.index(x, y, z))]) continue;
                bool hit = false;
                for (int dz = -1; !hit && dz <= 1; ++dz)
                    for (int dy = -1; !hit && dy <= 1; ++dy)
                        for (int dx = -1; !hit && dx <= 1; ++dx) {
                            const int xx = x + dx, yy = y + dy, zz = z + dz;
                            if (g.contains(xx, yy, zz) &&
                                mask.values[static_cast<size_t>(g.index(xx, yy, zz))])
                                hit = true;
                        }
                if (hit) out.values[static_cast<size_t>(g.index(x, y, z))] = 1;
            }
    return out;
}

std::vector<int64_t> component_containing(const BinaryMask& mask, int64_t seed_voxel) {
    for (auto& comp : connected_components(mask, Connectivity::kFull))
        if (std::binary_search(comp.begin(), comp.end(), seed_voxel)) return comp;
    return {};
}

} // namespace

PhantomCase generate_case(const PhantomConfig& config, int case_index) {
    config.validate();
    const GridSpec& g = config.grid;
    Rng rng(derive_seed(config.seed, "phantom", static_cast<uint64_t>(case_index)));

    PhantomCase out;
    out.labels = LabelVolume(g);
    out.positive = rng.uniform() < config.positive_fraction;

    // Gland: ellipsoid near the volume centre, clamped to fit.
    const double cx = g.nx * (0.5 + 0.06 * (rng.uniform() - 0.5));
    const double cy = g.ny * (0.5 + 0.06 * (rng.uniform() - 0.5));
    const double cz = g.nz * (0.5 + 0.10 * (rng.uniform() - 0.5));
    const double pvol = config.prostate_volume_min +
                        (config.prostate_volume_max - config.prostate_volume_min) * rng.uniform();
    Ellipsoid gland = sample_ellipsoid(cx, cy, cz, pvol, rng, 0.30, 0.45);
    gland.ax = std::min(gland.ax, 0.45 * g.nx);
    gland.ay = std::min(gland.ay, 0.45 * g.ny);
    gland.az = std::min(gland.az, 0.45 * g.nz);

    std::vector<int64_t> prostate_voxels;
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x)
                if (gland.r2(x, y, z) <= 1.0) {
                    out.labels.labels[static_cast<size_t>(g.index(x, y, z))] = kProstate;
                    prostate_voxels.push_back(g.index(x, y, z));
                }
    require(!prostate_voxels.empty(), "degenerate prostate");

    // Lesions: noise-warped ellipsoidal blobs inside the gland, separated
    // from each other by at least one voxel.
    const int wanted =
        out.positive
            ? config.min_lesions +
                  static_cast<int>(rng.uniform_int(
                      static_cast<uint64_t>(config.max_lesions - config.min_lesions + 1)))
            : 0;
    BinaryMask forbidden(g);
    for (int li = 0; li < wanted; ++li) {
        const double target =
            std::exp(std::log(config.lesion_volume_min) +
                     (std::log(config.lesion_volume_max) - std::log(config.lesion_volume_min)) *
                         rng.uniform());
        require(target <= static_cast<double>(prostate_voxels.size()),
                "infeasible config: lesion larger than the prostate");
        const double lo = std::max(0.9 * target, config.lesion_volume_min);
        const double hi = std::min(1.1 * target, config.lesion_volume_max);

        bool placed = false;
        for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
            const int64_t centre =
                prostate_voxels[static_cast<size_t>(rng.uniform_int(prostate_voxels.size()))];
            const auto cc = g.coords(centre);
            if (forbidden.values[static_cast<size_t>(centre)] ||
                out.labels.labels[static_cast<size_t>(centre)] != kProstate)
                continue;
            const Ellipsoid shape =
                sample_ellipsoid(cc[0], cc[1], cc[2], target, rng, 0.25, 0.50);
            const ValueNoise noise(g, 4, rng);

            auto blob_count = [&](double s, BinaryMask* fill) -> int64_t {
                int64_t n = 0;
                const int rx = static_cast<int>(shape.ax * 2) + 2;
                const int ry = static_cast<int>(shape.ay * 2) + 2;
                const int rz = static_cast<int>(shape.az * 2) + 2;
                for (int z = std::max(0, cc[2] - rz); z <= std::min(g.nz - 1, cc[2] + rz); ++z)
                    for (int y = std::max(0, cc[1] - ry); y <= std::min(g.ny - 1, cc[1] + ry); ++y)
                        for (int x = std::max(0, cc[0] - rx); x <= std::min(g.nx - 1, cc[0] + rx);
                             ++x) {
                            const size_t i = static_cast<size_t>(g.index(x, y, z));
                            if (out.labels.labels[i] != kProstate || forbidden.values[i])
                                continue;
                            const double f =
                                shape.r2(x, y, z) * (1.0 + 0.35 * noise.at(x, y, z));
                            if (f <= s) {
                                ++n;
                                if (fill) fill->values[i] = 1;
                            }
                        }
                return n;
            };

            // The thresholded set grows monotonically with s; bisect the
            // voxel count into [lo, hi].
            double s_lo = 0.0, s_hi = 4.0;
            for (int it = 0; it < 48; ++it) {
                const double s = 0.5 * (s_lo + s_hi);
                const int64_t n = blob_count(s, nullptr);
                if (static_cast<double>(n) < lo)
                    s_lo = s;
                else if (static_cast<double>(n) > hi)
                    s_hi = s;
                else {
                    s_lo = s_hi = s;
                    break;
                }
            }
            const double s = 0.5 * (s_lo + s_hi);
            BinaryMask blob(g);
            const int64_t n = blob_count(s, &blob);
            if (static_cast<double>(n) < lo || static_cast<double>(n) > hi) continue;
            const auto comp = component_containing(blob, centre);
            if (static_cast<double>(comp.size()) < lo || static_cast<double>(comp.size()) > hi)
                continue;

            BinaryMask lesion(g);
            for (int64_t v : comp) {
                lesion.values[static_cast<size_t>(v)] = 1;
                out.labels.labels[static_cast<size_t>(v)] = kLesion;
            }
            const BinaryMask guard = dilate26(lesion);
            for (size_t i = 0; i < forbidden.values.size(); ++i)
                forbidden.values[i] |= guard.values[i];
            placed = true;
        }
        if (placed) out.lesion_count += 1;
    }
    // A positive case must carry at least one lesion.
    require(!out.positive || out.lesion_count >= 1, "failed to place any lesion");

    // Channels: class means, light spatial smoothing, additive noise.
    out.image = IntensityVolume(g, {"t2w", "adc"});
    std::vector<double> mean_field(static_cast<size_t>(g.voxels()));
    for (int c = 0; c < 2; ++c) {
        const auto& means = config.class_means[static_cast<size_t>(c)];
        for (size_t i = 0; i < mean_field.size(); ++i)
            mean_field[i] = means[out.labels.labels[i]];
        // One 3x3x3 box pass to soften class borders.
        auto& dst = out.image.channels[static_cast<size_t>(c)];
        for (int z = 0; z < g.nz; ++z)
            for (int y = 0; y < g.ny; ++y)
                for (int x = 0; x < g.nx; ++x) {
                    double acc = 0.0;
                    int cnt = 0;
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                const int xx = x + dx, yy = y + dy, zz = z + dz;
                                if (!g.contains(xx, yy, zz)) continue;
                                acc += mean_field[static_cast<size_t>(g.index(xx, yy, zz))];
                                ++cnt;
                            }
                    dst[static_cast<size_t>(g.index(x, y, z))] = acc / cnt;
                }
        for (auto& v : dst) v += config.noise_sigma * rng.normal();
    }
    out.image = normalize_intensity(out.image);
    return out;
}

IntensityVolume apply_domain_shift(const IntensityVolume& volume, const DomainShift& shift,
                                   const LabelVolume* labels, Rng& rng) {
    require(shift.gamma > 0.0, "gamma must be positive");
    if (shift.identity()) return volume;
    require(shift.lesion_contrast_scale == 1.0 || labels != nullptr,
            "lesion contrast rescale needs a label volume");

    IntensityVolume out = volume;
    for (size_t c = 0; c < out.channels.size(); ++c) {
        auto& ch = out.channels[c];
        if (shift.gamma != 1.0)
            for (auto& v : ch) v = std::pow(std::max(v, 0.0), shift.gamma);
        if (shift.extra_noise_sigma > 0.0)
            for (auto& v : ch) v += shift.extra_noise_sigma * rng.normal();
        if (shift.lesion_contrast_scale != 1.0) {
            double prostate_mean = 0.0;
            int64_t n = 0;
            for (size_t i = 0; i < ch.size(); ++i)
                if (labels->labels[i] == kProstate) {
                    prostate_mean += ch[i];
                    ++n;
                }
            if (n > 0) {
                prostate_mean /= static_cast<double>(n);
                for (size_t i = 0; i < ch.size(); ++i)
                    if (labels->labels[i] == kLesion)
                        ch[i] = prostate_mean + shift.lesion_contrast_scale * (ch[i] - prostate_mean);
            }
        }
    }
    return normalize_intensity(out);
}

} // namespace wss
