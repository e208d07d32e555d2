// Shared test utilities: deterministic RNG and scene builders.
#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>

#include "ndtwin/scene.hpp"

namespace test {

inline double uniform01(std::mt19937_64& rng) {
    return std::ldexp(static_cast<double>(rng() >> 11), -53);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline std::string material_block() {
    return R"([
        {"name":"concrete","eps_r_real":5.24,"eps_r_imag":-0.46,"scattering":0.3},
        {"name":"wood","eps_r_real":1.99,"eps_r_imag":-0.21,"scattering":0.4},
        {"name":"metal","pec":true}
    ])";
}

inline std::string box_object(const std::string& id, const std::string& mat, double cx, double cy,
                              double cz, double sx, double sy, double sz, double yaw = 0.0) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  R"({"id":"%s","material":"%s","mesh":{"box":{"center":[%.17g,%.17g,%.17g],"size":[%.17g,%.17g,%.17g],"yaw":%.17g}}})",
                  id.c_str(), mat.c_str(), cx, cy, cz, sx, sy, sz, yaw);
    return buf;
}

inline ndtwin::Scene scene_of(const std::string& objects_json, double freq_hz = 60e9) {
    std::string text = "{\"carrier_frequency_hz\":" + std::to_string(freq_hz) +
                       ",\"materials\":" + material_block() + ",\"objects\":[" + objects_json +
                       "]}";
    return ndtwin::scene_from_json(text);
}

inline ndtwin::Scene empty_scene(double freq_hz = 60e9) { return scene_of("", freq_hz); }

/// Ground quad at z=0 spanning [-half, half]^2 with the given material.
inline std::string ground_object(const std::string& mat, double half = 1000.0) {
    char buf[512];
    std::snprintf(
        buf, sizeof buf,
        R"({"id":"ground","material":"%s","mesh":{"tris":[[[%g,%g,0],[%g,%g,0],[%g,%g,0]],[[%g,%g,0],[%g,%g,0],[%g,%g,0]]]}})",
        mat.c_str(), -half, -half, half, -half, half, half, -half, -half, half, half, -half, half);
    return buf;
}

/// A handful of random boxes floating around the origin; deterministic per seed.
inline ndtwin::Scene random_box_scene(std::uint64_t seed, int n_boxes) {
    std::mt19937_64 rng(seed);
    std::string objects;
    const char* mats[] = {"concrete", "wood", "metal"};
    for (int i = 0; i < n_boxes; ++i) {
        if (i) objects += ",";
        objects += box_object("box" + std::to_string(i), mats[rng() % 3],
                              uniform(rng, -15, 15), uniform(rng, -15, 15), uniform(rng, 0, 6),
                              uniform(rng, 0.5, 4), uniform(rng, 0.5, 4), uniform(rng, 0.5, 4),
                              uniform(rng, -3, 3));
    }
    return scene_of(objects);
}

}  // namespace test
