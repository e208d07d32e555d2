// Per-vehicle constant-velocity Kalman filtering and horizon propagation.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ndtwin/core.hpp"
#include "ndtwin/geometry.hpp"

namespace ndtwin {

/// Planar kinematic state; heading is derived from velocity above a speed
/// floor and held otherwise.
struct KinematicState {
    Vec2 position = Vec2::Zero();
    Vec2 velocity = Vec2::Zero();
    double heading = 0.0;  // rad, in (-pi, pi]
};

/// State mean (px, py, vx, vy) and covariance, tagged with its time.
struct KalmanBelief {
    Vec4 mean = Vec4::Zero();
    Mat4 covariance = Mat4::Identity();
    double timestamp = 0.0;  // seconds
};

/// Linear state-space model. F is the constant-velocity transition for the
/// sampling interval dt; B u is a control hook (zero by default); M measures
/// position.
struct KalmanModel {
    double dt = 0.1;
    Mat4 transition = Mat4::Identity();                              // F
    Mat4 control = Mat4::Zero();                                     // B
    Vec4 control_input = Vec4::Zero();                               // u
    Eigen::Matrix<double, 2, 4> measurement;                         // M
    Mat4 process_noise = Mat4::Zero();                               // Q
    Mat2 measurement_noise = Mat2::Identity();                       // R
    double speed_floor = 0.05;                                       // m/s, heading hold below
    double condition_guard = 1e12;  // max condition number of the innovation covariance

    /// CV model with the default noise parameters (Q = diag(0.01, 0.01, 0.5,
    /// 0.5), R = diag(0.04, 0.04)).
    static KalmanModel constant_velocity(double dt = 0.1);

    /// F for an arbitrary step length (used for off-grid measurement fusion).
    static Mat4 cv_transition(double dt);
};

struct Measurement {
    std::string source;
    double timestamp = 0.0;
    Vec2 position = Vec2::Zero();
    std::optional<Vec2> velocity;  // fused only when present and modeled
    std::optional<double> yaw;     // seeds the held heading on first contact
};

/// Time update: mean' = F mean + B u, P' = F P F^T + Q (re-symmetrized).
KalmanBelief kf_predict(const KalmanBelief& belief, const KalmanModel& model);

/// Measurement update (Joseph form). Returns nullopt when the innovation
/// covariance is numerically singular (condition guard); the caller keeps the
/// prediction.
std::optional<KalmanBelief> kf_update(const KalmanBelief& predicted, const Vec2& z,
                                      const KalmanModel& model);

/// h-step horizon propagation: mean = F^h mean, covariance = F^h P (F^h)^T +
/// sum_{i<h} F^i Q (F^i)^T. The belief timestamp advances by h steps of dt.
KalmanBelief kf_horizon(const KalmanBelief& belief, const KalmanModel& model, int h_steps);

/// Heading from velocity when speed exceeds the floor, else the held value.
double derive_heading(const Vec2& velocity, double held_heading, double speed_floor);

struct TrackedEntity {
    KalmanBelief belief;
    double held_heading = 0.0;
    bool initialized = false;
};

struct PredictedPose {
    Pose pose;          // z = 0 plane; callers add mount height via templates
    Mat4 covariance;
    Vec2 velocity;
};

/// Pure batch step over a snapshot of beliefs: fuse this cycle's measurements
/// (timestamp order per entity), propagate silent entities open-loop by one
/// dt, then horizon-propagate everyone by round(horizon_s / dt) steps.
/// Returns predicted poses and the updated beliefs.
std::pair<std::map<std::string, PredictedPose>, std::map<std::string, TrackedEntity>> predict_all(
    const std::map<std::string, TrackedEntity>& beliefs, const std::vector<Measurement>& batch,
    double horizon_s, const KalmanModel& model);

/// Belief snapshot as JSON (state dump for the CLI).
std::string belief_json(const std::string& entity, const TrackedEntity& e);

}  // namespace ndtwin
