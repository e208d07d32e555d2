// Static geometry, vehicle instancing, and ray/visibility queries.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ndtwin/geometry.hpp"
#include "ndtwin/material.hpp"

namespace ndtwin {

/// One triangle of scene geometry with its material and owning object.
struct SurfacePatch {
    Triangle tri;
    std::uint32_t material_id = 0;
    std::string object_id;
};

/// Axis-aligned box template instanced at vehicle poses. The antenna offset
/// is in the template frame (x forward, z up, origin at the box center's
/// ground projection).
struct VehicleTemplate {
    std::string name;
    Vec3 size = Vec3::Zero();           // length (x), width (y), height (z)
    Vec3 antenna_offset = Vec3::Zero();
    std::string material = "metal";
};

class Scene {
  public:
    double carrier_frequency_hz = 0.0;
    std::vector<Material> materials;
    std::vector<SurfacePatch> patches;
    std::map<std::string, VehicleTemplate> vehicle_templates;
    /// Entity antenna positions, filled by assemble_scene.
    std::map<std::string, Vec3> antennas;

    double wavelength() const { return kSpeedOfLight / carrier_frequency_hz; }

    const Material& material_of(const SurfacePatch& p) const { return materials[p.material_id]; }
    std::optional<std::uint32_t> material_index(const std::string& name) const;

    /// Rebuild the acceleration structure; must be called after any change to
    /// patches. The scene is immutable (and shareable across threads) once
    /// finalized.
    void finalize();

    struct HitRecord {
        std::size_t patch_index;
        Vec3 point;
        double distance;
    };

    /// Nearest patch intersection with distance in (t_min, max_range).
    /// Callers pass t_min >= kGeomEps; the default is the self-intersection
    /// guard.
    std::optional<HitRecord> first_hit(const Vec3& origin, const Vec3& direction,
                                       double max_range, double t_min = kGeomEps) const;

    /// True iff the open segment (a, b) intersects no patch, with kGeomEps
    /// guards at both endpoints.
    bool segment_clear(const Vec3& a, const Vec3& b) const;

    /// All patch crossings strictly inside the segment, ordered by distance
    /// from a. Used for transmission accounting.
    std::vector<HitRecord> segment_hits(const Vec3& a, const Vec3& b) const;

  private:
    Bvh bvh_;
};

/// Parse and validate a scene JSON document.
Scene scene_from_json(const std::string& text, const std::string& origin = "<json>");

/// Load a scene file (see README for the schema).
Scene load_scene(const std::string& path);

/// Static scene plus one instanced, yaw-rotated, translated vehicle box per
/// entity in `templates`; entities present in `poses` but absent from
/// `templates` contribute a bare antenna at their pose position. Antenna
/// positions land in Scene::antennas. Throws ValidationError for an unknown
/// template name.
Scene assemble_scene(const Scene& static_scene, const std::map<std::string, Pose>& poses,
                     const std::map<std::string, std::string>& templates);

/// FNV-1a digest of geometry, materials, and carrier frequency; stable across
/// runs for identical scenes.
std::uint64_t scene_hash(const Scene& scene);

}  // namespace ndtwin
