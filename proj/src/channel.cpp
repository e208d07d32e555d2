#include "ndtwin/channel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

#include "ndtwin/errors.hpp"

namespace ndtwin {

const char* to_string(InteractionKind k) {
    switch (k) {
        case InteractionKind::specular: return "specular";
        case InteractionKind::diffuse: return "diffuse";
        case InteractionKind::transmission: return "transmission";
        case InteractionKind::diffraction: return "diffraction";
    }
    return "?";
}

int effective_rays(const DetailIndexConfig& di, double cap) {
    const double n = std::min(di.rays_per_source, cap);
    return std::max(1, static_cast<int>(n));
}

// ---------------------------------------------------------------------------
// Launch lattice and receiver capture
// ---------------------------------------------------------------------------

namespace {

std::vector<Vec3> fibonacci_directions(int n, bool jitter, std::uint64_t seed) {
    std::vector<Vec3> dirs;
    dirs.reserve(n);
    constexpr double golden = 1.6180339887498948;
    std::mt19937_64 rng(seed);
    auto uniform = [&rng]() { return std::ldexp(static_cast<double>(rng() >> 11), -53); };
    for (int i = 0; i < n; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / n;
        double phi = 2.0 * kPi * std::fmod(i / golden, 1.0);
        if (jitter) {
            z += (uniform() - 0.5) * (2.0 / n);
            z = std::clamp(z, -1.0, 1.0);
            phi += (uniform() - 0.5) * (2.0 * kPi / n);
        }
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        dirs.emplace_back(rho * std::cos(phi), rho * std::sin(phi), z);
    }
    return dirs;
}

// Capture sphere whose radius grows with the unfolded path length so that the
// expected number of captured duplicates stays O(1); exact refinement plus
// dedup collapses them.
struct CaptureSphere {
    Vec3 rx;
    double half_spacing;  // capture_scale * 0.5 * sqrt(4 pi / N)

    bool test(const Vec3& p, const Vec3& dir, double seg_len, double cum_len) const {
        const double t = std::clamp(dir.dot(rx - p), 0.0, seg_len);
        const double miss = (rx - (p + t * dir)).norm();
        const double radius = std::max(0.01, (cum_len + t) * half_spacing);
        return miss <= radius;
    }
};

// ---------------------------------------------------------------------------
// Candidate accumulation (thread-mergeable, order-independent)
// ---------------------------------------------------------------------------

using Signature = std::vector<std::uint32_t>;  // ordered specular patch indices

struct DiffuseCandidate {
    double length = 0.0;
    std::vector<Vec3> points;  // chain hits including the scatter point
    Signature patches;         // chain patches including the scatter patch
};

// Shorter path wins; ties broken lexicographically on the scatter point so
// the representative is independent of ray enumeration order.
bool better_diffuse(const DiffuseCandidate& a, const DiffuseCandidate& b) {
    if (a.length != b.length) return a.length < b.length;
    const Vec3& pa = a.points.back();
    const Vec3& pb = b.points.back();
    return std::lexicographical_compare(pa.data(), pa.data() + 3, pb.data(), pb.data() + 3);
}

struct SearchAccumulator {
    std::set<Signature> specular;
    std::map<Signature, DiffuseCandidate> diffuse;

    void add_diffuse(Signature key, DiffuseCandidate cand) {
        auto [it, inserted] = diffuse.try_emplace(std::move(key), std::move(cand));
        if (!inserted && better_diffuse(cand, it->second)) it->second = std::move(cand);
    }

    void merge(SearchAccumulator&& other) {
        specular.merge(other.specular);
        for (auto& [key, cand] : other.diffuse) add_diffuse(key, std::move(cand));
    }
};

void walk_ray(const Scene& scene, const Vec3& tx, const Vec3& rx, Vec3 dir,
              const DetailIndexConfig& di, const EngineOptions& opts, const CaptureSphere& capture,
              SearchAccumulator& acc) {
    Vec3 p = tx;
    double cum = 0.0;
    Signature sig;
    std::vector<Vec3> chain_pts;
    const int n_int = di.max_interactions;
    while (true) {
        const auto hit = scene.first_hit(p, dir, opts.max_range);
        const double seg_len = hit ? hit->distance : opts.max_range;
        if (!sig.empty() && capture.test(p, dir, seg_len, cum)) acc.specular.insert(sig);
        if (!hit) return;
        if (static_cast<int>(sig.size()) >= n_int) return;

        const SurfacePatch& patch = scene.patches[hit->patch_index];
        const Material& mat = scene.material_of(patch);
        Vec3 normal = patch.tri.normal();
        if (normal.dot(dir) > 0.0) normal = -normal;

        if (di.enable_diffuse && mat.scattering_coefficient > 0.0) {
            const Vec3 to_rx = rx - hit->point;
            if (normal.dot(to_rx) > 0.0 && scene.segment_clear(hit->point, rx)) {
                DiffuseCandidate cand;
                cand.length = cum + hit->distance + to_rx.norm();
                cand.points = chain_pts;
                cand.points.push_back(hit->point);
                cand.patches = sig;
                cand.patches.push_back(static_cast<std::uint32_t>(hit->patch_index));
                Signature key = cand.patches;
                acc.add_diffuse(std::move(key), std::move(cand));
            }
        }

        if (di.enable_refraction && static_cast<int>(sig.size()) + 1 <= n_int) {
            // Straight-through probe: transmissions only, used to discover
            // signatures whose unfolded line crosses walls. Exact crossings
            // are recomputed during refinement.
            Vec3 pp = hit->point;
            double pcum = cum + hit->distance;
            int used = static_cast<int>(sig.size()) + 1;
            while (true) {
                const auto h2 = scene.first_hit(pp, dir, opts.max_range);
                const double l2 = h2 ? h2->distance : opts.max_range;
                if (!sig.empty() && capture.test(pp, dir, l2, pcum)) acc.specular.insert(sig);
                if (!h2) break;
                if (++used > n_int) break;
                pcum += h2->distance;
                pp = h2->point;
            }
        }

        if (!di.enable_specular) return;
        cum += hit->distance;
        p = hit->point;
        dir = (dir - 2.0 * dir.dot(normal) * normal).normalized();
        chain_pts.push_back(hit->point);
        sig.push_back(static_cast<std::uint32_t>(hit->patch_index));
    }
}

// ---------------------------------------------------------------------------
// Exact geometry: image-method refinement of specular signatures
// ---------------------------------------------------------------------------

struct PathGeometry {
    std::vector<Vec3> points;  // tx, interaction points..., rx
    std::vector<InteractionKind> kinds;
    std::vector<std::uint32_t> patches;
    double nu = 0.0;  // knife-edge parameter (diffraction paths only)
    double length = 0.0;

    void compute_length() {
        length = 0.0;
        for (std::size_t i = 0; i + 1 < points.size(); ++i) {
            length += (points[i + 1] - points[i]).norm();
        }
    }
};

Vec3 mirror_point(const Vec3& p, const Vec3& plane_point, const Vec3& plane_normal) {
    return p - 2.0 * (p - plane_point).dot(plane_normal) * plane_normal;
}

bool inside_triangle(const Triangle& tri, const Vec3& q) {
    const Vec3 e1 = tri.v1 - tri.v0;
    const Vec3 e2 = tri.v2 - tri.v0;
    const Vec3 d = q - tri.v0;
    const double a = e1.dot(e1), b = e1.dot(e2), c = e2.dot(e2);
    const double det = a * c - b * b;
    if (det <= 0.0) return false;
    const double u = (c * e1.dot(d) - b * e2.dot(d)) / det;
    const double v = (a * e2.dot(d) - b * e1.dot(d)) / det;
    return u >= -1e-9 && v >= -1e-9 && u + v <= 1.0 + 1e-9;
}

// Interleave transmission crossings of each segment into the kind/patch
// sequence; fails when refraction is disabled, a crossing is conductive, or
// the interaction budget is exceeded.
bool collect_crossings(const Scene& scene, const std::vector<Vec3>& pts,
                       const std::vector<InteractionKind>& kinds,
                       const std::vector<std::uint32_t>& patches, bool enable_refraction,
                       int max_interactions, PathGeometry& out) {
    out.points.clear();
    out.kinds.clear();
    out.patches.clear();
    out.points.push_back(pts.front());
    int total = static_cast<int>(kinds.size());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        for (const auto& hit : scene.segment_hits(pts[i], pts[i + 1])) {
            if (!enable_refraction) return false;
            const SurfacePatch& patch = scene.patches[hit.patch_index];
            if (scene.material_of(patch).is_perfect_conductor) return false;
            if (++total > max_interactions) return false;
            out.points.push_back(hit.point);
            out.kinds.push_back(InteractionKind::transmission);
            out.patches.push_back(static_cast<std::uint32_t>(hit.patch_index));
        }
        if (i + 1 < pts.size() - 1) {
            out.points.push_back(pts[i + 1]);
            out.kinds.push_back(kinds[i]);
            out.patches.push_back(patches[i]);
        }
    }
    out.points.push_back(pts.back());
    out.compute_length();
    return true;
}

std::optional<PathGeometry> refine_specular(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                            const Signature& sig, bool enable_refraction,
                                            int max_interactions) {
    const std::size_t k = sig.size();
    std::vector<Vec3> plane_p(k), plane_n(k);
    for (std::size_t m = 0; m < k; ++m) {
        const Triangle& tri = scene.patches[sig[m]].tri;
        plane_p[m] = tri.v0;
        plane_n[m] = tri.normal();
    }
    std::vector<Vec3> images(k + 1);
    images[0] = tx;
    for (std::size_t m = 0; m < k; ++m) {
        images[m + 1] = mirror_point(images[m], plane_p[m], plane_n[m]);
    }
    std::vector<Vec3> q(k + 2);
    q[k + 1] = rx;
    for (std::size_t m = k; m >= 1; --m) {
        const Vec3& src = images[m];
        const Vec3& dst = q[m + 1];
        const Vec3 seg = dst - src;
        const double denom = seg.dot(plane_n[m - 1]);
        if (std::abs(denom) < 1e-12) return std::nullopt;
        const double t = (plane_p[m - 1] - src).dot(plane_n[m - 1]) / denom;
        if (t <= 1e-9 || t >= 1.0 - 1e-9) return std::nullopt;
        q[m] = src + t * seg;
        if (!inside_triangle(scene.patches[sig[m - 1]].tri, q[m])) return std::nullopt;
    }
    q[0] = tx;

    std::vector<InteractionKind> kinds(k, InteractionKind::specular);
    std::vector<std::uint32_t> patches(sig.begin(), sig.end());
    PathGeometry geom;
    if (!collect_crossings(scene, q, kinds, patches, enable_refraction, max_interactions, geom)) {
        return std::nullopt;
    }
    return geom;
}

// ---------------------------------------------------------------------------
// Jones matrices along an exact path
// ---------------------------------------------------------------------------

struct PolBasis {
    Vec3 e1, e2;
};

Mat2 basis_change(const PolBasis& from, const PolBasis& to) {
    Mat2 r;
    r << to.e1.dot(from.e1), to.e1.dot(from.e2), to.e2.dot(from.e1), to.e2.dot(from.e2);
    return r;
}

PolBasis spherical_pol_basis(const Vec3& dir) {
    PolBasis b;
    spherical_basis(dir, b.e1, b.e2);
    return b;
}

// Builds the interaction list with folded basis rotations; the ordered
// product of the Jones matrices maps the departure spherical basis onto the
// arrival one.
std::vector<Interaction> build_interactions(const Scene& scene, const PathGeometry& geom) {
    const std::size_t n = geom.kinds.size();
    std::vector<Interaction> out;
    out.reserve(n);
    if (n == 0) return out;

    std::vector<Vec3> seg_dir(n + 1);
    for (std::size_t i = 0; i + 1 < geom.points.size(); ++i) {
        seg_dir[i] = (geom.points[i + 1] - geom.points[i]).normalized();
    }
    PolBasis ref = spherical_pol_basis(seg_dir[0]);

    for (std::size_t l = 0; l < n; ++l) {
        const Vec3& k_in = seg_dir[l];
        const Vec3& k_out = seg_dir[l + 1];
        const SurfacePatch& patch = scene.patches[geom.patches[l]];
        const Material& mat = scene.material_of(patch);

        Mat2c jones;
        PolBasis next_ref;
        if (geom.kinds[l] == InteractionKind::specular ||
            geom.kinds[l] == InteractionKind::transmission) {
            Vec3 normal = patch.tri.normal();
            if (normal.dot(k_in) > 0.0) normal = -normal;
            const double cos_i = std::clamp(-k_in.dot(normal), 0.0, 1.0);
            Vec3 s_hat = k_in.cross(normal);
            if (s_hat.norm() < 1e-9) {
                s_hat = ref.e1;  // normal incidence: incidence plane degenerate
            } else {
                s_hat.normalize();
            }
            const Vec3 p_in = k_in.cross(s_hat);
            const Vec3 p_out = k_out.cross(s_hat);
            const Mat2 r_in = basis_change(ref, PolBasis{s_hat, p_in});
            Mat2c coeff = Mat2c::Zero();
            if (geom.kinds[l] == InteractionKind::specular) {
                const FresnelReflection fr = fresnel_reflection(mat, cos_i);
                // Energy split with the diffuse lobe.
                const double spec_frac =
                    std::sqrt(std::max(0.0, 1.0 - mat.scattering_coefficient *
                                                      mat.scattering_coefficient));
                coeff(0, 0) = fr.r_s * spec_frac;
                coeff(1, 1) = fr.r_p * spec_frac;
            } else {
                const FresnelTransmission ft = fresnel_transmission(mat, cos_i);
                coeff(0, 0) = ft.t_s;
                coeff(1, 1) = ft.t_p;
            }
            next_ref = PolBasis{s_hat, p_out};
            jones = coeff * r_in.cast<Complex>();
        } else {
            // Diffuse / diffraction: scalar amplitude times the projection
            // between the transverse planes (singular values <= 1).
            Complex amp;
            if (geom.kinds[l] == InteractionKind::diffuse) {
                Vec3 normal = patch.tri.normal();
                if (normal.dot(k_in) > 0.0) normal = -normal;
                const double cos_i = std::clamp(-k_in.dot(normal), 0.0, 1.0);
                const double cos_s = std::clamp(k_out.dot(normal), 0.0, 1.0);
                amp = mat.scattering_coefficient * std::sqrt(cos_i * cos_s);
            } else {
                amp = knife_edge_loss(geom.nu);
            }
            next_ref = spherical_pol_basis(k_out);
            Mat2 proj;
            proj << next_ref.e1.dot(ref.e1), next_ref.e1.dot(ref.e2), next_ref.e2.dot(ref.e1),
                next_ref.e2.dot(ref.e2);
            jones = amp * proj.cast<Complex>();
        }

        if (l == n - 1) {
            const PolBasis arrival = spherical_pol_basis(-seg_dir[n]);
            jones = basis_change(next_ref, arrival).cast<Complex>() * jones;
        }

        Interaction inter;
        inter.kind = geom.kinds[l];
        inter.point = geom.points[l + 1];
        inter.patch = geom.patches[l];
        inter.jones = jones;
        out.push_back(inter);
        ref = next_ref;
    }
    return out;
}

PropagationPath make_path(const Scene& scene, const PathGeometry& geom) {
    PropagationPath path;
    path.length = geom.length;
    path.delay = geom.length / kSpeedOfLight;
    path.dep_dir = (geom.points[1] - geom.points[0]).normalized();
    const std::size_t last = geom.points.size() - 1;
    path.arr_dir = (geom.points[last - 1] - geom.points[last]).normalized();
    path.theta_t = std::acos(std::clamp(path.dep_dir.z(), -1.0, 1.0));
    path.phi_t = std::atan2(path.dep_dir.y(), path.dep_dir.x());
    path.theta_r = std::acos(std::clamp(path.arr_dir.z(), -1.0, 1.0));
    path.phi_r = std::atan2(path.arr_dir.y(), path.arr_dir.x());
    path.interactions = build_interactions(scene, geom);
    return path;
}

// Knife-edge candidate: the visible patch-edge point with the smallest
// detour over the blocked TX-RX segment.
std::optional<PathGeometry> knife_edge_search(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                              int edge_samples) {
    const double d_direct = (rx - tx).norm();
    double best_detour = std::numeric_limits<double>::infinity();
    Vec3 best_point = Vec3::Zero();
    std::uint32_t best_patch = 0;
    for (std::uint32_t pi = 0; pi < scene.patches.size(); ++pi) {
        const Triangle& tri = scene.patches[pi].tri;
        const Vec3* verts[3] = {&tri.v0, &tri.v1, &tri.v2};
        for (int e = 0; e < 3; ++e) {
            const Vec3& va = *verts[e];
            const Vec3& vb = *verts[(e + 1) % 3];
            for (int s = 0; s < edge_samples; ++s) {
                const Vec3 pt = va + ((s + 0.5) / edge_samples) * (vb - va);
                if (!scene.segment_clear(tx, pt) || !scene.segment_clear(pt, rx)) continue;
                const double detour = (pt - tx).norm() + (rx - pt).norm() - d_direct;
                if (detour >= best_detour) continue;
                best_detour = detour;
                best_point = pt;
                best_patch = pi;
            }
        }
    }
    if (!std::isfinite(best_detour)) return std::nullopt;
    PathGeometry geom;
    geom.points = {tx, best_point, rx};
    geom.kinds = {InteractionKind::diffraction};
    geom.patches = {best_patch};
    geom.compute_length();
    const double lambda = scene.wavelength();
    geom.nu = 2.0 * std::sqrt(std::max(0.0, best_detour) / lambda);
    return geom;
}

bool points_match(const PropagationPath& a, const PropagationPath& b) {
    if (a.interactions.size() != b.interactions.size()) return false;
    for (std::size_t i = 0; i < a.interactions.size(); ++i) {
        if ((a.interactions[i].point - b.interactions[i].point).norm() > 1e-6) return false;
    }
    return true;
}

bool canonical_less(const PropagationPath& a, const PropagationPath& b) {
    if (a.delay != b.delay) return a.delay < b.delay;
    if (a.interactions.size() != b.interactions.size()) {
        return a.interactions.size() < b.interactions.size();
    }
    for (std::size_t i = 0; i < a.interactions.size(); ++i) {
        const Vec3& pa = a.interactions[i].point;
        const Vec3& pb = b.interactions[i].point;
        for (int c = 0; c < 3; ++c) {
            if (pa[c] != pb[c]) return pa[c] < pb[c];
        }
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

Complex knife_edge_loss(double nu) {
    if (nu < 0.0) return Complex(1.0, 0.0);
    double c, s;
    if (nu < 6.0) {
        // Simpson quadrature of cos/sin(pi t^2 / 2) on [0, nu].
        const int n = 2 * std::max(256, static_cast<int>(256 * nu));
        const double h = nu / n;
        double cs = 0.0, ss = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double t = i * h;
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            const double arg = 0.5 * kPi * t * t;
            cs += w * std::cos(arg);
            ss += w * std::sin(arg);
        }
        c = cs * h / 3.0;
        s = ss * h / 3.0;
    } else {
        const double arg = 0.5 * kPi * nu * nu;
        c = 0.5 + std::sin(arg) / (kPi * nu);
        s = 0.5 - std::cos(arg) / (kPi * nu);
    }
    const Complex half(0.5, 0.5);
    return half * (Complex(0.5, -0.5) - Complex(c, -s));
}

std::vector<PropagationPath> shoot_and_bounce(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                              const DetailIndexConfig& di, std::uint64_t seed,
                                              const EngineOptions& opts) {
    if ((tx - rx).norm() < 1e-9) throw ValidationError("shoot_and_bounce: tx == rx");

    const bool los_clear = scene.segment_clear(tx, rx);
    std::vector<PathGeometry> geoms;

    if (di.enable_los && los_clear) {
        PathGeometry geom;
        geom.points = {tx, rx};
        geom.compute_length();
        geoms.push_back(std::move(geom));
    }

    const bool need_rays = di.enable_specular || di.enable_diffuse || di.enable_refraction;
    SearchAccumulator acc;
    int n_rays = 0;
    if (need_rays && !scene.patches.empty()) {
        n_rays = effective_rays(di, opts.rays_cap);
        const auto dirs = fibonacci_directions(n_rays, opts.jitter, seed);
        const CaptureSphere capture{rx,
                                    opts.capture_scale * 0.5 * std::sqrt(4.0 * kPi / n_rays)};
        const int n_threads = std::max(1, opts.threads);
        if (n_threads == 1) {
            for (const auto& d : dirs) walk_ray(scene, tx, rx, d, di, opts, capture, acc);
        } else {
            std::vector<SearchAccumulator> partial(n_threads);
            std::vector<std::thread> workers;
            const std::size_t chunk = (dirs.size() + n_threads - 1) / n_threads;
            for (int w = 0; w < n_threads; ++w) {
                workers.emplace_back([&, w]() {
                    const std::size_t lo = w * chunk;
                    const std::size_t hi = std::min(dirs.size(), lo + chunk);
                    for (std::size_t i = lo; i < hi; ++i) {
                        walk_ray(scene, tx, rx, dirs[i], di, opts, capture, partial[w]);
                    }
                });
            }
            for (auto& t : workers) t.join();
            for (auto& p : partial) acc.merge(std::move(p));
        }
    }

    // Exact specular (+transmission) geometry from discovered signatures.
    for (const auto& sig : acc.specular) {
        if (auto geom = refine_specular(scene, tx, rx, sig, di.enable_refraction,
                                        di.max_interactions)) {
            geoms.push_back(std::move(*geom));
        }
    }

    // Pure transmission path: the straight line through walls.
    if (di.enable_refraction && !los_clear) {
        PathGeometry geom;
        if (collect_crossings(scene, {tx, rx}, {}, {}, true, di.max_interactions, geom) &&
            !geom.kinds.empty()) {
            geoms.push_back(std::move(geom));
        }
    }

    // Representative diffuse connections (SBR geometry, not refined).
    for (const auto& [key, cand] : acc.diffuse) {
        PathGeometry geom;
        geom.points.reserve(cand.points.size() + 2);
        geom.points.push_back(tx);
        geom.points.insert(geom.points.end(), cand.points.begin(), cand.points.end());
        geom.points.push_back(rx);
        geom.kinds.assign(cand.patches.size(), InteractionKind::specular);
        geom.kinds.back() = InteractionKind::diffuse;
        geom.patches.assign(cand.patches.begin(), cand.patches.end());
        geom.compute_length();
        geoms.push_back(std::move(geom));
    }

    if (di.enable_diffraction && !los_clear) {
        if (auto geom = knife_edge_search(scene, tx, rx, opts.edge_samples)) {
            geoms.push_back(std::move(*geom));
        }
    }

    std::vector<PropagationPath> paths;
    paths.reserve(geoms.size());
    for (const auto& geom : geoms) paths.push_back(make_path(scene, geom));

    std::sort(paths.begin(), paths.end(), canonical_less);
    std::vector<PropagationPath> unique_paths;
    for (auto& p : paths) {
        if (!unique_paths.empty() && points_match(unique_paths.back(), p)) continue;
        unique_paths.push_back(std::move(p));
    }
    return unique_paths;
}

Mat2c eval_path_matrix(const PropagationPath& path, double lambda) {
    Mat2c prod = Mat2c::Identity();
    for (const auto& inter : path.interactions) prod = inter.jones * prod;
    const double amp = lambda / (4.0 * kPi * path.length);
    const double phase = -2.0 * kPi * path.length / lambda;
    return amp * std::exp(Complex(0.0, phase)) * prod;
}

Complex eval_path_gain(const PropagationPath& path, double lambda, const AntennaPattern& tx,
                       const AntennaPattern& rx) {
    const Vec2c c_t = tx.pattern(path.dep_dir);
    const Vec2c c_r = rx.pattern(path.arr_dir);
    const Mat2c a = eval_path_matrix(path, lambda);
    return (c_r.adjoint() * a * c_t)(0);
}

std::vector<ChannelTap> build_cir(const std::vector<PropagationPath>& paths) {
    std::vector<ChannelTap> taps;
    taps.reserve(paths.size());
    for (const auto& p : paths) taps.push_back({p.delay, p.gain});
    std::sort(taps.begin(), taps.end(), [](const ChannelTap& a, const ChannelTap& b) {
        if (a.delay != b.delay) return a.delay < b.delay;
        if (a.gain.real() != b.gain.real()) return a.gain.real() < b.gain.real();
        return a.gain.imag() < b.gain.imag();
    });
    return taps;
}

double rssi_from_paths(const std::vector<PropagationPath>& paths, double tx_power_dbm,
                       RssiMode mode) {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    if (paths.empty()) return neg_inf;
    if (mode == RssiMode::coherent) {
        Complex sum(0.0, 0.0);
        for (const auto& p : paths) sum += p.gain;
        const double mag = std::abs(sum);
        if (mag <= 0.0) return neg_inf;
        return tx_power_dbm + db20(mag);
    }
    double power = 0.0;
    for (const auto& p : paths) power += std::norm(p.gain);
    if (power <= 0.0) return neg_inf;
    return tx_power_dbm + db10(power);
}

double rms_delay_spread(const std::vector<PropagationPath>& paths) {
    double wsum = 0.0, mean = 0.0;
    for (const auto& p : paths) {
        const double w = std::norm(p.gain);
        wsum += w;
        mean += w * p.delay;
    }
    if (wsum <= 0.0) return 0.0;
    mean /= wsum;
    double var = 0.0;
    for (const auto& p : paths) var += std::norm(p.gain) * (p.delay - mean) * (p.delay - mean);
    return std::sqrt(var / wsum);
}

PredictLinksResult predict_links(const Scene& scene, const std::vector<LinkKey>& links,
                                 const DetailIndexConfig& di, double tx_power_dbm,
                                 std::uint64_t seed, const EngineOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    PredictLinksResult result;
    const double lambda = scene.wavelength();
    for (const auto& [a, b] : links) {
        const auto ia = scene.antennas.find(a);
        const auto ib = scene.antennas.find(b);
        if (ia == scene.antennas.end()) {
            throw ValidationError("link endpoint \"" + a + "\" has no antenna in the scene");
        }
        if (ib == scene.antennas.end()) {
            throw ValidationError("link endpoint \"" + b + "\" has no antenna in the scene");
        }
        ChannelRealization real;
        real.a = a;
        real.b = b;
        real.tx_power_dbm = tx_power_dbm;
        real.paths = shoot_and_bounce(scene, ia->second, ib->second, di, seed, opts);
        for (auto& p : real.paths) {
            p.a = a;
            p.b = b;
            p.gain = eval_path_gain(p, lambda, opts.tx_pattern, opts.rx_pattern);
        }
        real.los = scene.segment_clear(ia->second, ib->second);
        real.rssi_dbm = rssi_from_paths(real.paths, tx_power_dbm, opts.mode);
        real.delay_spread_s = rms_delay_spread(real.paths);
        result.links.emplace(LinkKey{a, b}, std::move(real));
    }
    const auto t1 = std::chrono::steady_clock::now();
    result.tau_rt_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return result;
}

double apply_bias_correction(double predicted_rssi_dbm, const std::vector<double>& residuals,
                             double alpha) {
    if (residuals.empty()) return predicted_rssi_dbm;
    double ewma = residuals.front();
    for (std::size_t i = 1; i < residuals.size(); ++i) {
        ewma = alpha * residuals[i] + (1.0 - alpha) * ewma;
    }
    return predicted_rssi_dbm + ewma;
}

std::string channel_record_json(const ChannelRealization& c, int di_level, double tau_rt_ms,
                                RssiMode mode) {
    nlohmann::json j;
    j["link"] = {c.a, c.b};
    if (std::isfinite(c.rssi_dbm)) {
        j["rssi_dbm"] = c.rssi_dbm;
    } else {
        j["rssi_dbm"] = nullptr;
        j["no_power"] = true;
    }
    j["los"] = c.los;
    j["n_paths"] = c.paths.size();
    j["delay_spread_s"] = c.delay_spread_s;
    j["di"] = di_level;
    j["tau_rt_ms"] = tau_rt_ms;
    j["mode"] = to_string(mode);
    return j.dump();
}

std::string paths_csv(const std::vector<PropagationPath>& paths) {
    std::string out = "d_p_m,tau_p_s,n_interactions,abs_g,arg_g_rad\n";
    char line[160];
    for (const auto& p : paths) {
        std::snprintf(line, sizeof line, "%.9g,%.12g,%zu,%.9g,%.9g\n", p.length, p.delay,
                      p.interactions.size(), std::abs(p.gain), std::arg(p.gain));
        out += line;
    }
    return out;
}

}  // namespace ndtwin
