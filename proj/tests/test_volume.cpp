#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "awnet/volume.hpp"
#include "test_helpers.hpp"

using namespace awnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const auto dir = fs::temp_directory_path() / "awnet_test_volume";
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("normalize rescales by min and max") {
    Volume v(Dims{1, 1, 3});
    v.data = {2.0f, 4.0f, 6.0f};
    const Volume out = normalize(v);
    CHECK(out.data[0] == doctest::Approx(0.0));
    CHECK(out.data[1] == doctest::Approx(0.5));
    CHECK(out.data[2] == doctest::Approx(1.0));
    CHECK(out.dims == v.dims);
}

TEST_CASE("normalize maps constant volumes to zeros") {
    Volume v(Dims{1, 3, 1}, 5.0f);
    const Volume out = normalize(v);
    for (float x : out.data)
        CHECK(x == 0.0f);
}

TEST_CASE("normalize is the identity on volumes already spanning [0,1]") {
    Volume v(Dims{1, 2, 2});
    v.data = {0.0f, 0.25f, 0.75f, 1.0f};
    CHECK(normalize(v) == v);
}

TEST_CASE("normalize is idempotent on non-constant volumes") {
    const Volume v = testutil::random_volume(Dims{3, 4, 5}, 11);
    const Volume once = normalize(v);
    CHECK(normalize(once) == once);
}

TEST_CASE("phantom voxel at an ellipsoid center takes its intensity and label") {
    PhantomSpec spec;
    spec.dims = Dims{9, 9, 9};
    spec.background_intensity = 0.1;
    spec.ellipsoids.push_back({4, 4, 4, 2, 2, 2, 0.8, 3});
    auto [vol, labels] = generate_phantom(spec);
    CHECK(vol.at(4, 4, 4) == doctest::Approx(0.8));
    CHECK(labels.at(4, 4, 4) == 3);
    CHECK(vol.at(0, 0, 0) == doctest::Approx(0.1));
    CHECK(labels.at(0, 0, 0) == 0);
}

TEST_CASE("phantom with no ellipsoids is uniform background") {
    PhantomSpec spec;
    spec.dims = Dims{2, 3, 4};
    spec.background_intensity = 0.4;
    auto [vol, labels] = generate_phantom(spec);
    for (float x : vol.data)
        CHECK(x == doctest::Approx(0.4));
    for (auto l : labels.labels)
        CHECK(l == 0);
}

TEST_CASE("phantom generation is deterministic in the seed") {
    PhantomSpec spec;
    spec.dims = Dims{8, 8, 8};
    spec.background_intensity = 0.2;
    spec.ellipsoids.push_back({4, 4, 4, 3, 2, 2, 0.7, 1});
    spec.noise_sigma = 0.05;
    spec.seed = 42;
    auto [v1, l1] = generate_phantom(spec);
    auto [v2, l2] = generate_phantom(spec);
    CHECK(v1 == v2);
    CHECK(l1 == l2);
}

TEST_CASE("phantom volume and label map share dims") {
    PhantomSpec spec;
    spec.dims = Dims{5, 6, 7};
    spec.ellipsoids.push_back({2, 3, 3, 1.5, 2, 2, 0.9, 1});
    auto [vol, labels] = generate_phantom(spec);
    CHECK(vol.dims == labels.dims);
}

TEST_CASE("noiseless phantom has at most ellipsoids+1 distinct intensities") {
    PhantomSpec spec;
    spec.dims = Dims{10, 10, 10};
    spec.background_intensity = 0.15;
    spec.ellipsoids.push_back({3, 3, 3, 2, 2, 2, 0.5, 1});
    spec.ellipsoids.push_back({6, 6, 6, 2.5, 2, 2, 0.9, 2});
    auto [vol, labels] = generate_phantom(spec);
    std::set<float> values(vol.data.begin(), vol.data.end());
    CHECK(values.size() <= spec.ellipsoids.size() + 1);
}

TEST_CASE("overlapping ellipsoids: the later entry wins") {
    PhantomSpec spec;
    spec.dims = Dims{7, 7, 7};
    spec.ellipsoids.push_back({3, 3, 3, 2, 2, 2, 0.5, 1});
    spec.ellipsoids.push_back({3, 3, 3, 1, 1, 1, 0.9, 2});
    auto [vol, labels] = generate_phantom(spec);
    CHECK(labels.at(3, 3, 3) == 2);
    CHECK(vol.at(3, 3, 3) == doctest::Approx(0.9));
    CHECK(labels.at(3, 3, 1) == 1); // outside the inner ellipsoid
}

TEST_CASE("phantom rejects zero dims and bad ellipsoids") {
    PhantomSpec spec;
    spec.dims = Dims{0, 4, 4};
    CHECK_THROWS_AS(generate_phantom(spec), invalid_argument_error);

    spec.dims = Dims{4, 4, 4};
    spec.ellipsoids.push_back({1, 1, 1, 0.0, 1, 1, 0.5, 1});
    CHECK_THROWS_AS(generate_phantom(spec), invalid_argument_error);

    spec.ellipsoids.clear();
    spec.ellipsoids.push_back({1, 1, 1, 1, 1, 1, 0.5, 1});
    spec.ellipsoids.push_back({2, 2, 2, 1, 1, 1, 0.6, 1}); // duplicate label
    CHECK_THROWS_AS(generate_phantom(spec), invalid_argument_error);
}

TEST_CASE("volume save/load round trip is bit-exact") {
    const auto dir = scratch_dir();
    const Volume v = testutil::random_volume(Dims{3, 5, 2}, 7);
    save_volume(v, dir / "roundtrip.vol3");
    CHECK(load_volume(dir / "roundtrip.vol3") == v);
}

TEST_CASE("label map save/load round trip is bit-exact") {
    const auto dir = scratch_dir();
    const LabelMap m = testutil::random_labels(Dims{4, 3, 3}, 5, 13);
    save_labels(m, dir / "roundtrip.lbl3");
    CHECK(load_labels(dir / "roundtrip.lbl3") == m);
}

TEST_CASE("volume loader reports the failure modes distinctly") {
    const auto dir = scratch_dir();

    SUBCASE("wrong magic") {
        std::ofstream out(dir / "bad_magic.vol3", std::ios::binary);
        out << "XXXX" << std::string(12 + 8, '\0');
        out.close();
        try {
            load_volume(dir / "bad_magic.vol3");
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind() == io_error::kind::bad_magic);
        }
    }

    SUBCASE("short header") {
        std::ofstream out(dir / "short.vol3", std::ios::binary);
        out << "V3F1" << std::string(4, '\0');
        out.close();
        try {
            load_volume(dir / "short.vol3");
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind() == io_error::kind::bad_header);
        }
    }

    SUBCASE("truncated payload: 2x2x2 dims but 7 floats") {
        Volume v(Dims{2, 2, 2}, 1.0f);
        save_volume(v, dir / "trunc.vol3");
        fs::resize_file(dir / "trunc.vol3", 16 + 7 * 4);
        try {
            load_volume(dir / "trunc.vol3");
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind() == io_error::kind::truncated);
        }
    }

    SUBCASE("trailing bytes") {
        Volume v(Dims{2, 2, 2}, 1.0f);
        save_volume(v, dir / "trail.vol3");
        std::ofstream out(dir / "trail.vol3", std::ios::binary | std::ios::app);
        out << "zz";
        out.close();
        try {
            load_volume(dir / "trail.vol3");
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind() == io_error::kind::trailing_data);
        }
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_volume(dir / "does_not_exist.vol3"), io_error);
    }

    SUBCASE("zero dimension in header") {
        std::string buf = "V3F1";
        buf += std::string(12, '\0'); // D = H = W = 0
        std::ofstream out(dir / "zerodim.vol3", std::ios::binary);
        out << buf;
        out.close();
        try {
            load_volume(dir / "zerodim.vol3");
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind() == io_error::kind::bad_header);
        }
    }
}
