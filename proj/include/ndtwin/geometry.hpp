// Ray/triangle intersection kernel and a small BVH over triangle soups.
#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "ndtwin/core.hpp"

namespace ndtwin {

/// Vehicle or entity pose: 3D position plus yaw about +z, yaw in (-pi, pi].
struct Pose {
    Vec3 position = Vec3::Zero();
    double yaw = 0.0;

    Pose() = default;
    Pose(const Vec3& p, double psi) : position(p), yaw(wrap_angle(psi)) {}
};

struct Triangle {
    Vec3 v0, v1, v2;

    Vec3 normal() const { return (v1 - v0).cross(v2 - v0).normalized(); }
    double area() const { return 0.5 * (v1 - v0).cross(v2 - v0).norm(); }
    Vec3 centroid() const { return (v0 + v1 + v2) / 3.0; }
};

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void grow(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void grow(const Aabb& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
};

/// Moller-Trumbore with inclusive edge/vertex rule: u >= 0, v >= 0, u+v <= 1.
/// Rays parallel to the triangle plane (|det| < 1e-12) miss. Returns the ray
/// parameter t, or nullopt.
std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Triangle& tri);

/// Binary BVH (median split on the longest centroid axis, leaf <= 4).
/// Built once over an immutable triangle array; traversal is re-entrant.
class Bvh {
  public:
    Bvh() = default;
    explicit Bvh(const std::vector<Triangle>& tris);

    struct Hit {
        std::size_t tri_index;
        double t;
        Vec3 point;
    };

    /// Nearest hit with t in (t_min, t_max), or nullopt.
    std::optional<Hit> first_hit(const Vec3& origin, const Vec3& dir, double t_min,
                                 double t_max) const;

    /// True if any triangle intersects with t in (t_min, t_max).
    bool any_hit(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const;

    bool empty() const { return tris_.empty(); }

  private:
    struct Node {
        Aabb box;
        int left = -1;    // internal: child indices; leaf: left == -1
        int right = -1;
        std::uint32_t first = 0;  // leaf: range into order_
        std::uint32_t count = 0;
    };

    int build(std::uint32_t first, std::uint32_t count, const std::vector<Vec3>& centroids);

    std::vector<Triangle> tris_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace ndtwin
