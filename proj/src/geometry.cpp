#include "ndtwin/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace ndtwin {

std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Triangle& tri) {
    const Vec3 e1 = tri.v1 - tri.v0;
    const Vec3 e2 = tri.v2 - tri.v0;
    const Vec3 pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    if (std::abs(det) < 1e-12) return std::nullopt;
    const double inv_det = 1.0 / det;
    const Vec3 tvec = origin - tri.v0;
    const double u = tvec.dot(pvec) * inv_det;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Vec3 qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv_det;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    return e2.dot(qvec) * inv_det;
}

namespace {

// Slab test against [t_lo, t_hi]; inv_dir may contain infinities (axis-parallel rays).
inline bool aabb_hit(const Aabb& b, const Vec3& origin, const Vec3& inv_dir, double t_lo,
                     double t_hi) {
    for (int a = 0; a < 3; ++a) {
        double t0 = (b.lo[a] - origin[a]) * inv_dir[a];
        double t1 = (b.hi[a] - origin[a]) * inv_dir[a];
        if (t0 > t1) std::swap(t0, t1);
        if (std::isnan(t0) || std::isnan(t1)) continue;  // origin on slab, dir parallel
        t_lo = std::max(t_lo, t0);
        t_hi = std::min(t_hi, t1);
        if (t_lo > t_hi) return false;
    }
    return true;
}

}  // namespace

Bvh::Bvh(const std::vector<Triangle>& tris) : tris_(tris) {
    if (tris_.empty()) return;
    order_.resize(tris_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    std::vector<Vec3> centroids(tris_.size());
    for (std::size_t i = 0; i < tris_.size(); ++i) centroids[i] = tris_[i].centroid();
    nodes_.reserve(2 * tris_.size());
    root_ = build(0, static_cast<std::uint32_t>(tris_.size()), centroids);
}

int Bvh::build(std::uint32_t first, std::uint32_t count, const std::vector<Vec3>& centroids) {
    Node node;
    for (std::uint32_t i = first; i < first + count; ++i) {
        const Triangle& t = tris_[order_[i]];
        node.box.grow(t.v0);
        node.box.grow(t.v1);
        node.box.grow(t.v2);
    }
    if (count <= 4) {
        node.first = first;
        node.count = count;
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size()) - 1;
    }
    Aabb cbox;
    for (std::uint32_t i = first; i < first + count; ++i) cbox.grow(centroids[order_[i]]);
    const Vec3 ext = cbox.hi - cbox.lo;
    int axis = 0;
    if (ext[1] > ext[axis]) axis = 1;
    if (ext[2] > ext[axis]) axis = 2;

    const std::uint32_t mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](std::uint32_t a, std::uint32_t b) {
                         return centroids[a][axis] < centroids[b][axis];
                     });

    const int left = build(first, mid - first, centroids);
    const int right = build(mid, first + count - mid, centroids);
    node.left = left;
    node.right = right;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
}

std::optional<Bvh::Hit> Bvh::first_hit(const Vec3& origin, const Vec3& dir, double t_min,
                                       double t_max) const {
    if (root_ < 0) return std::nullopt;
    const Vec3 inv_dir = dir.cwiseInverse();
    std::optional<Hit> best;
    double closest = t_max;
    std::array<int, 64> stack;
    int top = 0;
    stack[top++] = root_;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!aabb_hit(node.box, origin, inv_dir, t_min, closest)) continue;
        if (node.left < 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                const std::uint32_t ti = order_[i];
                if (auto t = ray_triangle(origin, dir, tris_[ti]); t && *t > t_min && *t <= closest) {
                    closest = *t;
                    best = Hit{ti, *t, origin + *t * dir};
                }
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return best;
}

bool Bvh::any_hit(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
    if (root_ < 0) return false;
    const Vec3 inv_dir = dir.cwiseInverse();
    std::array<int, 64> stack;
    int top = 0;
    stack[top++] = root_;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!aabb_hit(node.box, origin, inv_dir, t_min, t_max)) continue;
        if (node.left < 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                if (auto t = ray_triangle(origin, dir, tris_[order_[i]]);
                    t && *t > t_min && *t <= t_max) {
                    return true;
                }
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return false;
}

}  // namespace ndtwin
