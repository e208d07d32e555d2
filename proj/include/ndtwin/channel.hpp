// Deterministic ray-based channel prediction at a configurable Detail Index.
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ndtwin/antenna.hpp"
#include "ndtwin/detail_index.hpp"
#include "ndtwin/paths.hpp"
#include "ndtwin/scene.hpp"

namespace ndtwin {

enum class RssiMode { coherent, incoherent };

inline const char* to_string(RssiMode m) {
    return m == RssiMode::coherent ? "coherent" : "incoherent";
}

/// Engine knobs that are not part of the Detail Index abstraction.
struct EngineOptions {
    double rays_cap = 1e6;       // effective launch cap on the nominal ray count
    double capture_scale = 2.0;  // receiver capture radius, in units of d*spacing/2
    double max_range = 2000.0;   // meters a ray may travel per segment
    int edge_samples = 32;       // knife-edge candidates per patch edge
    int threads = 1;             // SBR worker threads; results are thread-count independent
    bool jitter = false;         // seeded jitter of the launch lattice
    RssiMode mode = RssiMode::coherent;
    AntennaPattern tx_pattern;   // isotropic vertical by default
    AntennaPattern rx_pattern;
};

/// Effective number of launched rays for a config under a cap.
int effective_rays(const DetailIndexConfig& di, double cap);

/// SBR path search plus image-method refinement: returns the deduplicated,
/// geometrically validated path set for one TX-RX pair. Deterministic for a
/// fixed (scene, positions, di, seed, options). Gains are left at zero; use
/// eval_path_gain.
std::vector<PropagationPath> shoot_and_bounce(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                              const DetailIndexConfig& di, std::uint64_t seed,
                                              const EngineOptions& opts = {});

/// Propagation matrix A_p = (lambda / (4 pi d_p)) e^{-j 2 pi d_p / lambda}
/// times the ordered product of the interaction matrices (first interaction
/// applied first).
Mat2c eval_path_matrix(const PropagationPath& path, double lambda);

/// Scalar path gain g_p = c_R^H A_p c_T.
Complex eval_path_gain(const PropagationPath& path, double lambda, const AntennaPattern& tx,
                       const AntennaPattern& rx);

struct ChannelTap {
    double delay;
    Complex gain;
};

/// CIR taps, one per path, sorted by delay ascending; no merging.
std::vector<ChannelTap> build_cir(const std::vector<PropagationPath>& paths);

/// Narrowband RSSI reduction over path gains. Coherent: tx_power_dbm +
/// 20 log10 |sum g_p|; incoherent: tx_power_dbm + 10 log10 sum |g_p|^2.
/// -inf for an empty (or fully cancelled) path set.
double rssi_from_paths(const std::vector<PropagationPath>& paths, double tx_power_dbm,
                       RssiMode mode);

/// RMS delay spread weighted by |g_p|^2; 0 for single-path or empty channels.
double rms_delay_spread(const std::vector<PropagationPath>& paths);

struct ChannelRealization {
    std::string a, b;
    std::vector<PropagationPath> paths;  // sorted by delay
    double rssi_dbm = -std::numeric_limits<double>::infinity();
    bool los = false;
    double delay_spread_s = 0.0;
    double tx_power_dbm = 0.0;
};

using LinkKey = std::pair<std::string, std::string>;

struct PredictLinksResult {
    std::map<LinkKey, ChannelRealization> links;
    double tau_rt_ms = 0.0;  // wall clock for the whole call
};

/// Per-link channel prediction over an assembled scene. Link endpoints must
/// have antennas in the scene (ValidationError otherwise).
PredictLinksResult predict_links(const Scene& scene, const std::vector<LinkKey>& links,
                                 const DetailIndexConfig& di, double tx_power_dbm,
                                 std::uint64_t seed, const EngineOptions& opts = {});

/// Predicted value plus the EWMA of (measured - predicted) residuals, oldest
/// first; identity on an empty history.
double apply_bias_correction(double predicted_rssi_dbm, const std::vector<double>& residuals,
                             double alpha = 0.3);

/// Per-call JSON result record (see README for the schema).
std::string channel_record_json(const ChannelRealization& c, int di_level, double tau_rt_ms,
                                RssiMode mode);

/// CSV dump of a path list: d_p, tau_p, n_interactions, |g_p|, arg g_p.
std::string paths_csv(const std::vector<PropagationPath>& paths);

/// Knife-edge loss factor F(nu) (complex, |F| <= 0.5 for nu >= 0).
Complex knife_edge_loss(double nu);

}  // namespace ndtwin
