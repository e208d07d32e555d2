#include "ndtwin/scene.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ndtwin/errors.hpp"

namespace ndtwin {

using nlohmann::json;

std::optional<std::uint32_t> Scene::material_index(const std::string& name) const {
    for (std::uint32_t i = 0; i < materials.size(); ++i) {
        if (materials[i].name == name) return i;
    }
    return std::nullopt;
}

void Scene::finalize() {
    std::vector<Triangle> tris;
    tris.reserve(patches.size());
    for (const auto& p : patches) tris.push_back(p.tri);
    bvh_ = Bvh(tris);
}

std::optional<Scene::HitRecord> Scene::first_hit(const Vec3& origin, const Vec3& direction,
                                                 double max_range, double t_min) const {
    auto hit = bvh_.first_hit(origin, direction, t_min, max_range);
    if (!hit) return std::nullopt;
    return HitRecord{hit->tri_index, hit->point, hit->t};
}

bool Scene::segment_clear(const Vec3& a, const Vec3& b) const {
    const double len = (b - a).norm();
    if (len <= 2.0 * kGeomEps) return true;
    const Vec3 dir = (b - a) / len;
    return !bvh_.any_hit(a, dir, kGeomEps, len - kGeomEps);
}

std::vector<Scene::HitRecord> Scene::segment_hits(const Vec3& a, const Vec3& b) const {
    std::vector<HitRecord> out;
    const double len = (b - a).norm();
    if (len <= 2.0 * kGeomEps) return out;
    const Vec3 dir = (b - a) / len;
    double t_min = kGeomEps;
    while (auto hit = bvh_.first_hit(a, dir, t_min, len - kGeomEps)) {
        out.push_back(HitRecord{hit->tri_index, hit->point, hit->t});
        t_min = hit->t + kGeomEps;
    }
    return out;
}

namespace {

Vec3 parse_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) {
        throw ParseError(where + ": expected an array of 3 numbers");
    }
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

void append_box(std::vector<SurfacePatch>& patches, const Vec3& center, const Vec3& size,
                double yaw, std::uint32_t material_id, const std::string& object_id) {
    const Vec3 h = size / 2.0;
    // Corners in the local frame, then yaw-rotated about +z and translated.
    std::array<Vec3, 8> c;
    int idx = 0;
    for (int sz = -1; sz <= 1; sz += 2)
        for (int sy = -1; sy <= 1; sy += 2)
            for (int sx = -1; sx <= 1; sx += 2) c[idx++] = Vec3(sx * h.x(), sy * h.y(), sz * h.z());
    const double cy = std::cos(yaw), sy_ = std::sin(yaw);
    for (auto& v : c) {
        v = Vec3(cy * v.x() - sy_ * v.y(), sy_ * v.x() + cy * v.y(), v.z()) + center;
    }
    // 6 faces, outward winding; corner order: bit0 = +x, bit1 = +y, bit2 = +z.
    static constexpr int faces[6][4] = {
        {0, 2, 3, 1},  // -z
        {4, 5, 7, 6},  // +z
        {0, 1, 5, 4},  // -y
        {2, 6, 7, 3},  // +y
        {0, 4, 6, 2},  // -x
        {1, 3, 7, 5},  // +x
    };
    for (const auto& f : faces) {
        patches.push_back({Triangle{c[f[0]], c[f[1]], c[f[2]]}, material_id, object_id});
        patches.push_back({Triangle{c[f[0]], c[f[2]], c[f[3]]}, material_id, object_id});
    }
}

void validate_patches(const Scene& scene) {
    for (const auto& p : scene.patches) {
        if (!(p.tri.area() > 0.0)) {
            throw ValidationError("degenerate triangle (area 0) in object \"" + p.object_id +
                                  "\"");
        }
    }
}

}  // namespace

Scene scene_from_json(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    Scene scene;
    try {
        scene.carrier_frequency_hz = j.at("carrier_frequency_hz").get<double>();
        if (!(scene.carrier_frequency_hz > 0.0)) {
            throw ValidationError(origin + ": carrier_frequency_hz must be > 0");
        }
        for (const auto& jm : j.value("materials", json::array())) {
            Material m;
            m.name = jm.at("name").get<std::string>();
            m.is_perfect_conductor = jm.value("pec", false);
            m.eps_r_real = jm.value("eps_r_real", 1.0);
            m.eps_r_imag = jm.value("eps_r_imag", 0.0);
            m.scattering_coefficient = jm.value("scattering", 0.0);
            if (!m.is_perfect_conductor && m.eps_r_real < 1.0) {
                throw ValidationError("material \"" + m.name + "\": eps_r_real must be >= 1");
            }
            if (m.scattering_coefficient < 0.0 || m.scattering_coefficient > 1.0) {
                throw ValidationError("material \"" + m.name + "\": scattering must be in [0,1]");
            }
            if (scene.material_index(m.name)) {
                throw ValidationError("duplicate material \"" + m.name + "\"");
            }
            scene.materials.push_back(m);
        }
        for (const auto& jo : j.value("objects", json::array())) {
            const std::string id = jo.at("id").get<std::string>();
            const std::string mat_name = jo.at("material").get<std::string>();
            const auto mat = scene.material_index(mat_name);
            if (!mat) {
                throw ValidationError("object \"" + id + "\" references undefined material \"" +
                                      mat_name + "\"");
            }
            const json& mesh = jo.at("mesh");
            if (mesh.contains("box")) {
                const json& b = mesh.at("box");
                const Vec3 center = parse_vec3(b.at("center"), "object \"" + id + "\" box center");
                const Vec3 size = parse_vec3(b.at("size"), "object \"" + id + "\" box size");
                if (!(size.minCoeff() > 0.0)) {
                    throw ValidationError("object \"" + id + "\": box size must be positive");
                }
                append_box(scene.patches, center, size, b.value("yaw", 0.0), *mat, id);
            } else if (mesh.contains("tris")) {
                for (const auto& jt : mesh.at("tris")) {
                    if (!jt.is_array() || jt.size() != 3) {
                        throw ParseError("object \"" + id + "\": each tri needs 3 vertices");
                    }
                    Triangle t{parse_vec3(jt[0], id), parse_vec3(jt[1], id), parse_vec3(jt[2], id)};
                    scene.patches.push_back({t, *mat, id});
                }
            } else {
                throw ParseError("object \"" + id + "\": mesh must contain \"box\" or \"tris\"");
            }
        }
        for (const auto& jt : j.value("vehicle_templates", json::array())) {
            VehicleTemplate t;
            t.name = jt.at("name").get<std::string>();
            t.size = parse_vec3(jt.at("size"), "template \"" + t.name + "\" size");
            t.antenna_offset =
                parse_vec3(jt.at("antenna_offset"), "template \"" + t.name + "\" antenna_offset");
            t.material = jt.value("material", std::string("metal"));
            if (!(t.size.minCoeff() > 0.0)) {
                throw ValidationError("template \"" + t.name + "\": size must be positive");
            }
            if (scene.vehicle_templates.count(t.name)) {
                throw ValidationError("duplicate vehicle template \"" + t.name + "\"");
            }
            scene.vehicle_templates[t.name] = t;
        }
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    validate_patches(scene);
    scene.finalize();
    return scene;
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scene file \"" + path + "\"");
    std::stringstream ss;
    ss << in.rdbuf();
    return scene_from_json(ss.str(), path);
}

Scene assemble_scene(const Scene& static_scene, const std::map<std::string, Pose>& poses,
                     const std::map<std::string, std::string>& templates) {
    Scene scene = static_scene;
    scene.antennas.clear();
    for (const auto& [entity, pose] : poses) {
        const auto it = templates.find(entity);
        if (it == templates.end()) {
            scene.antennas[entity] = pose.position;  // bare antenna
            continue;
        }
        const auto tpl_it = scene.vehicle_templates.find(it->second);
        if (tpl_it == scene.vehicle_templates.end()) {
            throw ValidationError("unknown vehicle template \"" + it->second + "\" for entity \"" +
                                  entity + "\"");
        }
        const VehicleTemplate& tpl = tpl_it->second;
        auto mat = scene.material_index(tpl.material);
        if (!mat) {
            if (tpl.material != "metal") {
                throw ValidationError("template \"" + tpl.name + "\" references undefined material \"" +
                                      tpl.material + "\"");
            }
            Material metal;
            metal.name = "metal";
            metal.is_perfect_conductor = true;
            scene.materials.push_back(metal);
            mat = static_cast<std::uint32_t>(scene.materials.size() - 1);
        }
        const Vec3 center = pose.position + Vec3(0, 0, tpl.size.z() / 2.0);
        append_box(scene.patches, center, tpl.size, pose.yaw, *mat, entity);
        const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
        const Vec3& o = tpl.antenna_offset;
        scene.antennas[entity] =
            pose.position + Vec3(cy * o.x() - sy * o.y(), sy * o.x() + cy * o.y(), o.z());
    }
    scene.finalize();
    return scene;
}

std::uint64_t scene_hash(const Scene& scene) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    auto mix_d = [&](double v) { mix(&v, sizeof v); };
    mix_d(scene.carrier_frequency_hz);
    for (const auto& m : scene.materials) {
        mix(m.name.data(), m.name.size());
        mix_d(m.eps_r_real);
        mix_d(m.eps_r_imag);
        mix_d(m.is_perfect_conductor ? 1.0 : 0.0);
        mix_d(m.scattering_coefficient);
    }
    for (const auto& p : scene.patches) {
        for (const Vec3* v : {&p.tri.v0, &p.tri.v1, &p.tri.v2}) {
            mix_d(v->x());
            mix_d(v->y());
            mix_d(v->z());
        }
        std::uint32_t mid = p.material_id;
        mix(&mid, sizeof mid);
    }
    return h;
}

}  // namespace ndtwin
