#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "goldendie/dataset.hpp"
#include "goldendie/pnm.hpp"
#include "goldendie/rng.hpp"

using namespace goldendie;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("goldendie_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RasterImage random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    RasterImage img(h, w);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

BinaryMask random_mask(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    BinaryMask m(h, w);
    for (auto& v : m.v) v = rng.uniform() < 0.5 ? 1 : -1;
    return m;
}

} // namespace

TEST_CASE("ppm save/load is a fixed point at 8-bit precision") {
    const auto dir = temp_dir("ppm");
    const RasterImage img = random_image(23, 31, 7);
    save_ppm(dir / "a.ppm", img);
    const RasterImage once = load_ppm(dir / "a.ppm");
    save_ppm(dir / "b.ppm", once);
    const RasterImage twice = load_ppm(dir / "b.ppm");
    REQUIRE(once.same_shape(twice));
    CHECK(once.data == twice.data);
    for (double v : once.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("bitmask round-trip is exact and 0/1 file encoding is an involution") {
    const auto dir = temp_dir("pbm");
    const BinaryMask m = random_mask(17, 41, 3);
    save_bitmask(dir / "m.pbm", m);
    const BinaryMask back = load_bitmask(dir / "m.pbm");
    CHECK(back.v == m.v);
    save_bitmask(dir / "m2.pbm", back);
    std::ifstream a(dir / "m.pbm", std::ios::binary), b(dir / "m2.pbm", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("quantized image round-trip is exact") {
    const auto dir = temp_dir("pgm");
    Rng rng(5);
    QuantizedImage q(19, 27);
    for (auto& v : q.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 63));
    save_pgm8(dir / "q.pgm", q);
    const QuantizedImage back = load_pgm8(dir / "q.pgm");
    CHECK(back.data == q.data);
}

TEST_CASE("16-bit score raster round-trip is exact") {
    const auto dir = temp_dir("pgm16");
    Rng rng(11);
    std::vector<std::uint16_t> data(13 * 9);
    for (auto& v : data) v = static_cast<std::uint16_t>(rng.uniform_int(0, 65535));
    save_pgm16(dir / "s.pgm", 13, 9, data);
    int h = 0, w = 0;
    CHECK(load_pgm16(dir / "s.pgm", h, w) == data);
    CHECK(h == 13);
    CHECK(w == 9);
}

TEST_CASE("gray layers must be strictly binary") {
    const auto dir = temp_dir("graylayer");
    std::ofstream out(dir / "bad.pgm", std::ios::binary);
    out << "P5\n2 2\n255\n";
    const unsigned char px[4] = {0, 255, 0, 128};
    out.write(reinterpret_cast<const char*>(px), 4);
    out.close();
    CHECK_THROWS_AS(load_bitmask(dir / "bad.pgm"), ContractError);

    std::ofstream ok(dir / "ok.pgm", std::ios::binary);
    ok << "P5\n2 2\n255\n";
    const unsigned char px2[4] = {0, 255, 255, 0};
    ok.write(reinterpret_cast<const char*>(px2), 4);
    ok.close();
    const BinaryMask m = load_bitmask(dir / "ok.pgm");
    CHECK(m.at(0, 0) == -1);
    CHECK(m.at(0, 1) == 1);
}

TEST_CASE("extract_patch") {
    const RasterImage img = random_image(16, 16, 1);

    SUBCASE("full-raster region is the identity") {
        const RasterImage p = extract_patch(img, {0, 0, 16, 16});
        CHECK(p.data == img.data);
    }
    SUBCASE("1x1 region picks the source pixel") {
        const RasterImage p = extract_patch(img, {0, 0, 1, 1});
        for (int c = 0; c < 3; ++c) CHECK(p.at(0, 0, c) == img.at(0, 0, c));
    }
    SUBCASE("values are copied verbatim") {
        const RasterImage p = extract_patch(img, {3, 5, 7, 9});
        for (int y = 0; y < 9; ++y)
            for (int x = 0; x < 7; ++x)
                for (int c = 0; c < 3; ++c) CHECK(p.at(y, x, c) == img.at(5 + y, 3 + x, c));
    }
    SUBCASE("regions crossing the edge are rejected") {
        CHECK_THROWS_AS(extract_patch(img, {10, 0, 7, 4}), ContractError);
        CHECK_THROWS_AS(extract_patch(img, {-1, 0, 4, 4}), ContractError);
    }
}

TEST_CASE("split_patches tiles, splits and reproduces") {
    const PatchSplit s = split_patches(640, 640, 64, 0.7, 1);
    CHECK(s.train.size() == 70);
    CHECK(s.val.size() == 30);

    std::set<std::pair<int, int>> seen;
    auto collect = [&seen](const std::vector<PatchRegion>& rs) {
        for (const auto& r : rs) {
            CHECK(r.w == 64);
            CHECK(r.h == 64);
            CHECK(r.x0 % 64 == 0);
            CHECK(r.y0 % 64 == 0);
            CHECK(seen.emplace(r.x0, r.y0).second); // disjoint
        }
    };
    collect(s.train);
    collect(s.val);
    CHECK(seen.size() == 100); // union tiles the raster

    const PatchSplit again = split_patches(640, 640, 64, 0.7, 1);
    for (std::size_t i = 0; i < s.train.size(); ++i) {
        CHECK(again.train[i].x0 == s.train[i].x0);
        CHECK(again.train[i].y0 == s.train[i].y0);
    }
    const PatchSplit other = split_patches(640, 640, 64, 0.7, 2);
    bool same = true;
    for (std::size_t i = 0; i < s.train.size(); ++i)
        same = same && other.train[i].x0 == s.train[i].x0 && other.train[i].y0 == s.train[i].y0;
    CHECK_FALSE(same);

    CHECK_THROWS_AS(split_patches(32, 32, 64, 0.7, 1), ContractError);

    // partial edge tiles are dropped
    const PatchSplit odd = split_patches(130, 200, 64, 0.5, 9);
    CHECK(odd.train.size() + odd.val.size() == 2 * 3);
}

namespace {

fs::path write_small_dataset(const fs::path& dir, int layers, bool with_labels,
                             int mismatched_layer = -1) {
    fs::create_directories(dir / "layers");
    const RasterImage photo = random_image(40, 40, 21);
    save_ppm(dir / "photo.ppm", photo);
    DatasetManifest m;
    m.name = "toy";
    m.photo = "photo.ppm";
    for (int l = 0; l < layers; ++l) {
        const int h = l == mismatched_layer ? 39 : 40;
        const std::string rel = "layers/layer_" + std::to_string(l) + ".pbm";
        save_bitmask(dir / rel, random_mask(h, 40, 100 + l));
        m.layers.push_back(rel);
    }
    if (with_labels) {
        save_bitmask(dir / "labels.pbm", random_mask(40, 40, 55));
        m.labels = "labels.pbm";
    }
    m.split_seed = 3;
    m.split_fraction = 0.7;
    m.save(dir / "manifest.json");
    return dir / "manifest.json";
}

} // namespace

TEST_CASE("load_dataset assembles a consistent bundle") {
    const auto dir = temp_dir("dataset");
    const auto manifest = write_small_dataset(dir, 5, true);
    const DatasetBundle b = load_dataset(manifest);
    CHECK(b.cad.layer_count == 5);
    CHECK(b.photo.height == 40);
    CHECK(b.labels.has_value());
    for (const auto v : b.cad.data) CHECK((v == 1 || v == -1));
}

TEST_CASE("load_dataset without labels yields none") {
    const auto dir = temp_dir("dataset_nolabel");
    const DatasetBundle b = load_dataset(write_small_dataset(dir, 3, false));
    CHECK_FALSE(b.labels.has_value());
}

TEST_CASE("load_dataset reports the offending layer on dimension mismatch") {
    const auto dir = temp_dir("dataset_mismatch");
    const auto manifest = write_small_dataset(dir, 3, false, 1);
    try {
        load_dataset(manifest);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("layer_1") != std::string::npos);
    }
}

TEST_CASE("load_dataset propagates missing files") {
    const auto dir = temp_dir("dataset_missing");
    const auto manifest = write_small_dataset(dir, 2, false);
    fs::remove(dir / "layers/layer_1.pbm");
    CHECK_THROWS_AS(load_dataset(manifest), IoError);
}

TEST_CASE("manifest rejects unknown keys") {
    const auto dir = temp_dir("manifest_unknown");
    std::ofstream out(dir / "manifest.json");
    out << R"({"name":"x","photo":"p.ppm","layers":["l.pbm"],"frobnicate":1})";
    out.close();
    CHECK_THROWS_AS(DatasetManifest::load(dir / "manifest.json"), ConfigError);
}

TEST_CASE("rng distributions are reproducible and sane") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng rng(7);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));

    std::int64_t total = 0;
    for (int i = 0; i < 2000; ++i) total += rng.poisson(10.0);
    CHECK(static_cast<double>(total) / 2000.0 == doctest::Approx(10.0).epsilon(0.05));

    double g = 0.0, g2 = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = rng.gaussian();
        g += x;
        g2 += x * x;
    }
    CHECK(g / 20000.0 == doctest::Approx(0.0).epsilon(0.05));
    CHECK(g2 / 20000.0 == doctest::Approx(1.0).epsilon(0.05));
}
