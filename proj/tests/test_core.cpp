#include <doctest.h>

#include "wss/core/container.hpp"
#include "wss/core/ops.hpp"
#include "wss/kernels/edt.hpp"
#include "wss/reference/reference.hpp"
#include "wss/util/error.hpp"
#include "wss/util/rng.hpp"

#include <cmath>
#include <filesystem>
#include <set>

using namespace wss;

namespace {

IntensityVolume tiny_volume(const std::vector<double>& values) {
    GridSpec g{static_cast<int>(values.size()), 1, 1, 1.0, 1.0, 1.0};
    IntensityVolume v(g, {"ch"});
    v.channels[0] = values;
    return v;
}

BinaryMask random_mask(const GridSpec& g, double density, Rng& rng) {
    BinaryMask m(g);
    for (auto& v : m.values) v = rng.uniform() < density ? 1 : 0;
    return m;
}

} // namespace

TEST_CASE("normalize_intensity examples") {
    CHECK(normalize_intensity(tiny_volume({2, 4, 6})).channels[0] ==
          std::vector<double>{0.0, 0.5, 1.0});
    CHECK(normalize_intensity(tiny_volume({5, 5, 5})).channels[0] ==
          std::vector<double>{0.0, 0.0, 0.0});
    CHECK(normalize_intensity(tiny_volume({0, 0.25, 1})).channels[0] ==
          std::vector<double>{0.0, 0.25, 1.0});
}

TEST_CASE("normalize_intensity rejects non-finite input") {
    CHECK_THROWS_AS(normalize_intensity(tiny_volume({1.0, std::nan("")})), ValidationError);
}

TEST_CASE("normalize_intensity is idempotent") {
    Rng rng(7);
    GridSpec g{8, 6, 2, 1, 1, 3};
    IntensityVolume v(g, {"a", "b"});
    for (auto& ch : v.channels)
        for (auto& x : ch) x = 10.0 * rng.uniform() - 4.0;
    const IntensityVolume once = normalize_intensity(v);
    const IntensityVolume twice = normalize_intensity(once);
    for (size_t c = 0; c < once.channels.size(); ++c)
        for (size_t i = 0; i < once.channels[c].size(); ++i)
            CHECK(once.channels[c][i] == doctest::Approx(twice.channels[c][i]).epsilon(1e-12));
}

TEST_CASE("resample_pad_crop identity") {
    Rng rng(3);
    GridSpec g{10, 8, 4, 1, 1, 3};
    IntensityVolume v(g, {"ch"});
    for (auto& x : v.channels[0]) x = rng.uniform();
    const IntensityVolume out = resample_pad_crop(v, g);
    CHECK(out.channels[0] == v.channels[0]);
}

TEST_CASE("resample_pad_crop zero-pads symmetric borders") {
    GridSpec src{4, 4, 2, 1, 1, 3};
    IntensityVolume v(src, {"ch"});
    std::fill(v.channels[0].begin(), v.channels[0].end(), 1.0);
    GridSpec dst{8, 8, 2, 1, 1, 3};
    const IntensityVolume out = resample_pad_crop(v, dst);
    // 2 voxels of padding on each side in x and y.
    CHECK(out.channels[0][static_cast<size_t>(dst.index(1, 4, 0))] == 0.0);
    CHECK(out.channels[0][static_cast<size_t>(dst.index(2, 4, 0))] == 1.0);
    CHECK(out.channels[0][static_cast<size_t>(dst.index(5, 4, 0))] == 1.0);
    CHECK(out.channels[0][static_cast<size_t>(dst.index(6, 4, 0))] == 0.0);
    double sum = 0.0;
    for (double x : out.channels[0]) sum += x;
    CHECK(sum == 4.0 * 4.0 * 2.0);
}

TEST_CASE("resample_pad_crop decimates a finer source") {
    // Source at 0.5mm, target at 1mm: every second voxel is kept. The
    // oracle maps each output centre directly into the source grid.
    GridSpec src{16, 1, 1, 0.5, 1, 1};
    IntensityVolume v(src, {"ch"});
    for (int i = 0; i < 16; ++i) v.channels[0][static_cast<size_t>(i)] = i;
    GridSpec dst{8, 1, 1, 1.0, 1, 1};
    const IntensityVolume out = resample_pad_crop(v, dst);
    for (int i = 0; i < 8; ++i) {
        const int j = static_cast<int>(std::floor((i + 0.5) * 1.0 / 0.5));
        CHECK(out.channels[0][static_cast<size_t>(i)] == v.channels[0][static_cast<size_t>(j)]);
    }
}

TEST_CASE("connected_components examples") {
    GridSpec g{4, 4, 1, 1, 1, 1};
    BinaryMask m(g);
    m.values[static_cast<size_t>(g.index(1, 1, 0))] = 1;
    CHECK(connected_components(m, Connectivity::kFull).size() == 1);
    CHECK(connected_components(m, Connectivity::kFull)[0].size() == 1);

    // Two voxels sharing only a diagonal.
    m.values[static_cast<size_t>(g.index(2, 2, 0))] = 1;
    CHECK(connected_components(m, Connectivity::kFull).size() == 1);
    CHECK(connected_components(m, Connectivity::kFace).size() == 2);
}

TEST_CASE("connected_components matches the fixpoint oracle") {
    Rng rng(11);
    GridSpec g{8, 8, 3, 1, 1, 3};
    for (int trial = 0; trial < 20; ++trial) {
        const BinaryMask m = random_mask(g, 0.35, rng);
        for (auto connectivity : {Connectivity::kFace, Connectivity::kFull}) {
            const auto got = connected_components(m, connectivity);
            const auto want = reference::connected_components_fixpoint(m, connectivity);
            REQUIRE(got.size() == want.size());
            for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
        }
    }
}

TEST_CASE("connected_components output is a partition") {
    Rng rng(13);
    GridSpec g{10, 9, 2, 1, 1, 3};
    const BinaryMask m = random_mask(g, 0.4, rng);
    const auto comps = connected_components(m, Connectivity::kFull);
    std::set<int64_t> seen;
    int64_t total = 0;
    for (const auto& comp : comps)
        for (int64_t v : comp) {
            CHECK(seen.insert(v).second);
            ++total;
        }
    CHECK(total == m.count());
    for (int64_t v : seen) CHECK(m.values[static_cast<size_t>(v)] == 1);
}

TEST_CASE("iou examples and properties") {
    const std::vector<int64_t> a{1, 2}, b{2, 9}, c{5, 6};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, c) == 0.0);
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(iou({}, {}) == 0.0);
    CHECK(iou(a, b) == iou(b, a));
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        std::vector<int64_t> u, v;
        for (int64_t i = 0; i < 30; ++i) {
            if (rng.uniform() < 0.3) u.push_back(i);
            if (rng.uniform() < 0.3) v.push_back(i);
        }
        const double ov = iou(u, v);
        CHECK(ov >= 0.0);
        CHECK(ov <= 1.0);
        CHECK(ov == iou(v, u));
        if (!u.empty() && ov == 1.0) CHECK(u == v);
    }
}

TEST_CASE("distance_transform examples") {
    GridSpec g{7, 7, 1, 1, 1, 1};
    BinaryMask m(g);
    m.values[static_cast<size_t>(g.index(3, 3, 0))] = 1;
    auto d = distance_transform(m);
    CHECK(d[static_cast<size_t>(g.index(3, 3, 0))] == 1.0);
    CHECK(d[static_cast<size_t>(g.index(0, 0, 0))] == 0.0);

    // 3x3 solid block: centre is two steps from the nearest zero.
    BinaryMask block(g);
    for (int y = 2; y <= 4; ++y)
        for (int x = 2; x <= 4; ++x) block.values[static_cast<size_t>(g.index(x, y, 0))] = 1;
    d = distance_transform(block);
    CHECK(d[static_cast<size_t>(g.index(3, 3, 0))] == 2.0);
}

TEST_CASE("distance_transform all-true mask uses the virtual border") {
    GridSpec g{5, 4, 1, 1, 1, 1};
    BinaryMask m(g);
    std::fill(m.values.begin(), m.values.end(), 1);
    const auto d = distance_transform(m);
    CHECK(d[static_cast<size_t>(g.index(0, 0, 0))] == 1.0);
    CHECK(d[static_cast<size_t>(g.index(2, 1, 0))] == 2.0);
}

TEST_CASE("distance_transform matches brute force on random masks") {
    Rng rng(17);
    GridSpec g2{16, 16, 1, 1, 1, 1};
    for (int t = 0; t < 10; ++t) {
        const BinaryMask m = random_mask(g2, 0.55, rng);
        const auto got = distance_transform(m);
        const auto want = reference::distance_transform_bruteforce(m);
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
    GridSpec g3{7, 6, 4, 1, 1, 1};
    for (int t = 0; t < 5; ++t) {
        const BinaryMask m = random_mask(g3, 0.6, rng);
        const auto got = distance_transform(m);
        const auto want = reference::distance_transform_bruteforce(m);
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("distance_transform is zero exactly off-mask") {
    Rng rng(23);
    GridSpec g{12, 10, 1, 1, 1, 1};
    const BinaryMask m = random_mask(g, 0.5, rng);
    const auto d = distance_transform(m);
    for (size_t i = 0; i < d.size(); ++i) {
        if (m.values[i])
            CHECK(d[i] > 0.0);
        else
            CHECK(d[i] == 0.0);
    }
}

TEST_CASE("binary_erode examples") {
    GridSpec g{7, 7, 1, 1, 1, 1};
    BinaryMask single(g);
    single.values[static_cast<size_t>(g.index(3, 3, 0))] = 1;
    CHECK(binary_erode(single, StructuringElement::kSquare).count() == 0);

    BinaryMask square(g);
    for (int y = 2; y <= 4; ++y)
        for (int x = 2; x <= 4; ++x) square.values[static_cast<size_t>(g.index(x, y, 0))] = 1;
    const BinaryMask eroded = binary_erode(square, StructuringElement::kSquare);
    CHECK(eroded.count() == 1);
    CHECK(eroded.values[static_cast<size_t>(g.index(3, 3, 0))] == 1);
}

TEST_CASE("binary_erode matches brute force and never adds voxels") {
    Rng rng(29);
    GridSpec g{14, 11, 1, 1, 1, 1};
    for (int t = 0; t < 10; ++t) {
        const BinaryMask m = random_mask(g, 0.65, rng);
        for (auto el : {StructuringElement::kCross, StructuringElement::kSquare}) {
            const BinaryMask got = binary_erode(m, el);
            const BinaryMask want = reference::binary_erode_bruteforce(m, el);
            CHECK(got.values == want.values);
            for (size_t i = 0; i < got.values.size(); ++i)
                if (got.values[i]) CHECK(m.values[i] == 1);
        }
    }
}

TEST_CASE("volume container round-trips") {
    const auto dir = std::filesystem::temp_directory_path() / "wss_container_test";
    std::filesystem::create_directories(dir);
    Rng rng(31);

    GridSpec g{6, 5, 3, 1, 1, 3};
    IntensityVolume v(g, {"t2w", "adc"});
    for (auto& ch : v.channels)
        for (auto& x : ch) x = static_cast<float>(rng.uniform()); // f32-representable
    const std::string ipath = (dir / "img.vol").string();
    write_volume(ipath, v);
    const IntensityVolume iv = read_intensity_volume(ipath);
    CHECK(iv.grid == g);
    CHECK(iv.channel_names == v.channel_names);
    CHECK(iv.channels == v.channels);

    LabelVolume l(g);
    for (auto& x : l.labels) x = static_cast<uint8_t>(rng.uniform_int(3));
    const std::string lpath = (dir / "lab.vol").string();
    write_volume(lpath, l);
    CHECK(read_label_volume(lpath).labels == l.labels);

    CHECK_THROWS_AS(read_intensity_volume(lpath), ValidationError);
    std::filesystem::remove_all(dir);
}
