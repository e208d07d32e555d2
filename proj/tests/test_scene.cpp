#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "ndtwin/errors.hpp"
#include "ndtwin/scene.hpp"

using namespace ndtwin;

TEST_CASE("empty scene derives wavelength from carrier") {
    const Scene s = test::empty_scene(60e9);
    CHECK(s.patches.empty());
    CHECK(s.wavelength() == doctest::Approx(4.9965e-3).epsilon(1e-4));
    CHECK(s.wavelength() == doctest::Approx(kSpeedOfLight / 60e9).epsilon(1e-15));
}

TEST_CASE("a box is twelve triangles") {
    const Scene s = test::scene_of(test::box_object("b", "concrete", 0, 0, 0, 2, 2, 2));
    CHECK(s.patches.size() == 12);
    for (const auto& p : s.patches) CHECK(p.tri.area() > 0.0);
}

TEST_CASE("undefined material is a validation error naming the material") {
    const std::string text = R"({"carrier_frequency_hz":60e9,
        "materials":[{"name":"concrete","eps_r_real":5.24}],
        "objects":[{"id":"w","material":"glass","mesh":{"box":{"center":[0,0,0],"size":[1,1,1]}}}]})";
    CHECK_THROWS_WITH_AS(scene_from_json(text), doctest::Contains("glass"), ValidationError);
}

TEST_CASE("malformed json is a parse error") {
    CHECK_THROWS_AS(scene_from_json("{\"carrier_frequency_hz\": 60e9,"), ParseError);
    CHECK_THROWS_AS(load_scene("/nonexistent/scene.json"), ParseError);
}

TEST_CASE("degenerate triangles are rejected") {
    const std::string text = R"({"carrier_frequency_hz":60e9,
        "materials":[{"name":"m","eps_r_real":2}],
        "objects":[{"id":"flat","material":"m","mesh":{"tris":[[[0,0,0],[1,0,0],[2,0,0]]]}}]})";
    CHECK_THROWS_WITH_AS(scene_from_json(text), doctest::Contains("flat"), ValidationError);
}

TEST_CASE("material invariants") {
    CHECK_THROWS_AS(
        scene_from_json(
            R"({"carrier_frequency_hz":60e9,"materials":[{"name":"x","eps_r_real":0.5}]})"),
        ValidationError);
    CHECK_THROWS_AS(
        scene_from_json(
            R"({"carrier_frequency_hz":60e9,"materials":[{"name":"x","eps_r_real":2,"scattering":1.5}]})"),
        ValidationError);
}

static std::string template_block() {
    return R"({"carrier_frequency_hz":60e9,"materials":)" + test::material_block() +
           R"(,"objects":[],"vehicle_templates":[{"name":"car","size":[4.0,2.0,1.5],"antenna_offset":[0,0,1.8]}]})";
}

TEST_CASE("assemble with zero entities is the identity") {
    const Scene base = scene_from_json(template_block());
    const Scene out = assemble_scene(base, {}, {});
    REQUIRE(out.patches.size() == base.patches.size());
    CHECK(out.antennas.empty());
}

TEST_CASE("assemble translates template vertices by the pose position") {
    const Scene base = scene_from_json(template_block());
    const Vec3 pos(10.0, -3.0, 0.5);
    const Scene out =
        assemble_scene(base, {{"v", Pose(pos, 0.0)}}, {{"v", "car"}});
    REQUIRE(out.patches.size() == 12);
    Aabb box;
    for (const auto& p : out.patches) {
        box.grow(p.tri.v0);
        box.grow(p.tri.v1);
        box.grow(p.tri.v2);
    }
    CHECK((box.lo - (pos + Vec3(-2.0, -1.0, 0.0))).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((box.hi - (pos + Vec3(2.0, 1.0, 1.5))).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((out.antennas.at("v") - (pos + Vec3(0, 0, 1.8))).norm() < 1e-12);
}

TEST_CASE("assemble at yaw pi/2 maps template x onto world y") {
    // Hand-derived: corner (x, y) -> (-y, x), so local (+2, +1) -> (-1, +2).
    const Scene base = scene_from_json(template_block());
    const Scene out = assemble_scene(base, {{"v", Pose(Vec3::Zero(), kPi / 2)}}, {{"v", "car"}});
    bool found = false;
    const Vec3 expect(-1.0, 2.0, 0.0);
    for (const auto& p : out.patches) {
        for (const Vec3* v : {&p.tri.v0, &p.tri.v1, &p.tri.v2}) {
            if ((*v - expect).norm() < 1e-12) found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("assemble rejects unknown template names") {
    const Scene base = scene_from_json(template_block());
    CHECK_THROWS_WITH_AS(assemble_scene(base, {{"v", Pose()}}, {{"v", "tank"}}),
                         doctest::Contains("tank"), ValidationError);
}

TEST_CASE("assemble is pure: identical patch lists byte for byte") {
    const Scene base = scene_from_json(template_block());
    const std::map<std::string, Pose> poses{{"v", Pose(Vec3(1, 2, 0), 0.3)}};
    const std::map<std::string, std::string> tpl{{"v", "car"}};
    const Scene a = assemble_scene(base, poses, tpl);
    const Scene b = assemble_scene(base, poses, tpl);
    REQUIRE(a.patches.size() == b.patches.size());
    for (std::size_t i = 0; i < a.patches.size(); ++i) {
        CHECK(std::memcmp(a.patches[i].tri.v0.data(), b.patches[i].tri.v0.data(),
                          3 * sizeof(double)) == 0);
        CHECK(std::memcmp(a.patches[i].tri.v1.data(), b.patches[i].tri.v1.data(),
                          3 * sizeof(double)) == 0);
        CHECK(std::memcmp(a.patches[i].tri.v2.data(), b.patches[i].tri.v2.data(),
                          3 * sizeof(double)) == 0);
    }
}

TEST_CASE("first_hit: empty scene misses") {
    const Scene s = test::empty_scene();
    CHECK(!s.first_hit(Vec3::Zero(), Vec3::UnitX(), 100.0));
}

TEST_CASE("first_hit: perpendicular unit square 5 m away") {
    const std::string tris =
        R"({"id":"sq","material":"metal","mesh":{"tris":[
            [[5,-0.5,-0.5],[5,0.5,-0.5],[5,0.5,0.5]],
            [[5,-0.5,-0.5],[5,0.5,0.5],[5,-0.5,0.5]]]}})";
    const Scene s = test::scene_of(tris);
    const auto hit = s.first_hit(Vec3::Zero(), Vec3::UnitX(), 100.0);
    REQUIRE(hit.has_value());
    CHECK(hit->distance == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("first_hit: edge grazing is inclusive and repeatable") {
    // Ray along +x strikes exactly the v0-v1 edge of the triangle (v = 0).
    const std::string tris =
        R"({"id":"t","material":"metal","mesh":{"tris":[[[4,-1,0],[4,1,0],[4,1,2]]]}})";
    const Scene s = test::scene_of(tris);
    const auto first = s.first_hit(Vec3::Zero(), Vec3::UnitX(), 100.0);
    REQUIRE(first.has_value());
    CHECK(first->distance == doctest::Approx(4.0).epsilon(1e-12));
    for (int i = 0; i < 100; ++i) {
        const auto again = s.first_hit(Vec3::Zero(), Vec3::UnitX(), 100.0);
        REQUIRE(again.has_value());
        CHECK(again->distance == first->distance);
        CHECK(again->patch_index == first->patch_index);
    }
}

TEST_CASE("segment_clear basics") {
    const Scene empty = test::empty_scene();
    CHECK(empty.segment_clear(Vec3::Zero(), Vec3(10, 0, 0)));

    const Scene wall = test::scene_of(test::box_object("w", "concrete", 5, 0, 0, 1, 4, 4));
    CHECK(!wall.segment_clear(Vec3::Zero(), Vec3(10, 0, 0)));

    // Wall strictly behind b; brute-force all-patch oracle for comparison.
    const Vec3 a(0, 0, 0), b(3, 0, 0);
    bool oracle_blocked = false;
    const double len = (b - a).norm();
    for (const auto& p : wall.patches) {
        if (auto t = ray_triangle(a, (b - a) / len, p.tri);
            t && *t > kGeomEps && *t < len - kGeomEps) {
            oracle_blocked = true;
        }
    }
    CHECK(!oracle_blocked);
    CHECK(wall.segment_clear(a, b));
}

TEST_CASE("segment_clear symmetry on random scenes") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Scene s = test::random_box_scene(100 + trial, 8);
        for (int i = 0; i < 50; ++i) {
            const Vec3 a(test::uniform(rng, -20, 20), test::uniform(rng, -20, 20),
                         test::uniform(rng, 0, 8));
            const Vec3 b(test::uniform(rng, -20, 20), test::uniform(rng, -20, 20),
                         test::uniform(rng, 0, 8));
            CHECK(s.segment_clear(a, b) == s.segment_clear(b, a));
        }
    }
}

TEST_CASE("rigid translation leaves queries unchanged") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        std::mt19937_64 gen(500 + trial);
        const Vec3 shift(test::uniform(rng, -100, 100), test::uniform(rng, -100, 100),
                         test::uniform(rng, -100, 100));
        Scene s = test::random_box_scene(200 + trial, 6);
        Scene moved = s;
        for (auto& p : moved.patches) {
            p.tri.v0 += shift;
            p.tri.v1 += shift;
            p.tri.v2 += shift;
        }
        moved.finalize();
        for (int i = 0; i < 40; ++i) {
            const Vec3 a(test::uniform(gen, -20, 20), test::uniform(gen, -20, 20),
                         test::uniform(gen, 0, 8));
            const Vec3 b(test::uniform(gen, -20, 20), test::uniform(gen, -20, 20),
                         test::uniform(gen, 0, 8));
            CHECK(s.segment_clear(a, b) == moved.segment_clear(a + shift, b + shift));
            Vec3 dir = (b - a).normalized();
            const auto h0 = s.first_hit(a, dir, 100.0);
            const auto h1 = moved.first_hit(a + shift, dir, 100.0);
            CHECK(h0.has_value() == h1.has_value());
            if (h0 && h1) CHECK(h0->distance == doctest::Approx(h1->distance).epsilon(1e-9));
            if (h0) {
                CHECK(h0->distance >= kGeomEps);
                CHECK(h0->distance <= 100.0);
            }
        }
    }
}

TEST_CASE("scene hash is stable and sensitive") {
    const Scene a = test::random_box_scene(1, 4);
    const Scene b = test::random_box_scene(1, 4);
    const Scene c = test::random_box_scene(2, 4);
    CHECK(scene_hash(a) == scene_hash(b));
    CHECK(scene_hash(a) != scene_hash(c));
}
