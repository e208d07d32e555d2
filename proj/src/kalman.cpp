#include "ndtwin/kalman.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace ndtwin {

Mat4 KalmanModel::cv_transition(double dt) {
    Mat4 f = Mat4::Identity();
    f(0, 2) = dt;
    f(1, 3) = dt;
    return f;
}

KalmanModel KalmanModel::constant_velocity(double dt) {
    KalmanModel m;
    m.dt = dt;
    m.transition = cv_transition(dt);
    m.measurement.setZero();
    m.measurement(0, 0) = 1.0;
    m.measurement(1, 1) = 1.0;
    m.process_noise = Vec4(0.01, 0.01, 0.5, 0.5).asDiagonal();
    m.measurement_noise = Vec2(0.04, 0.04).asDiagonal();
    return m;
}

namespace {

Mat4 symmetrize(const Mat4& p) { return 0.5 * (p + p.transpose()); }

}  // namespace

KalmanBelief kf_predict(const KalmanBelief& belief, const KalmanModel& model) {
    KalmanBelief out;
    out.mean = model.transition * belief.mean + model.control * model.control_input;
    out.covariance = symmetrize(model.transition * belief.covariance * model.transition.transpose() +
                                model.process_noise);
    out.timestamp = belief.timestamp + model.dt;
    return out;
}

std::optional<KalmanBelief> kf_update(const KalmanBelief& predicted, const Vec2& z,
                                      const KalmanModel& model) {
    const auto& m = model.measurement;
    const Mat2 s = m * predicted.covariance * m.transpose() + model.measurement_noise;
    const Eigen::SelfAdjointEigenSolver<Mat2> eig(s);
    const double lo = eig.eigenvalues()(0);
    const double hi = eig.eigenvalues()(1);
    if (!(lo > 0.0) || hi / lo > model.condition_guard) return std::nullopt;

    const Eigen::Matrix<double, 4, 2> gain = predicted.covariance * m.transpose() * s.inverse();
    KalmanBelief out;
    out.mean = predicted.mean + gain * (z - m * predicted.mean);
    const Mat4 ikm = Mat4::Identity() - gain * m;
    // Joseph form keeps the covariance PSD under roundoff.
    out.covariance = symmetrize(ikm * predicted.covariance * ikm.transpose() +
                                gain * model.measurement_noise * gain.transpose());
    out.timestamp = predicted.timestamp;
    return out;
}

KalmanBelief kf_horizon(const KalmanBelief& belief, const KalmanModel& model, int h_steps) {
    KalmanBelief out = belief;
    for (int i = 0; i < h_steps; ++i) {
        out.mean = model.transition * out.mean;
        out.covariance =
            symmetrize(model.transition * out.covariance * model.transition.transpose() +
                       model.process_noise);
    }
    out.timestamp = belief.timestamp + h_steps * model.dt;
    return out;
}

double derive_heading(const Vec2& velocity, double held_heading, double speed_floor) {
    if (velocity.norm() > speed_floor) return std::atan2(velocity.y(), velocity.x());
    return held_heading;
}

std::pair<std::map<std::string, PredictedPose>, std::map<std::string, TrackedEntity>> predict_all(
    const std::map<std::string, TrackedEntity>& beliefs, const std::vector<Measurement>& batch,
    double horizon_s, const KalmanModel& model) {
    std::map<std::string, TrackedEntity> updated = beliefs;

    std::map<std::string, std::vector<Measurement>> by_entity;
    for (const auto& meas : batch) by_entity[meas.source].push_back(meas);
    for (auto& [id, list] : by_entity) {
        std::stable_sort(list.begin(), list.end(),
                         [](const Measurement& a, const Measurement& b) {
                             return a.timestamp < b.timestamp;
                         });
    }

    for (auto& [id, entity] : updated) {
        const auto it = by_entity.find(id);
        if (it == by_entity.end()) {
            if (entity.initialized) entity.belief = kf_predict(entity.belief, model);
            continue;
        }
        for (const auto& meas : it->second) {
            if (!entity.initialized) {
                entity.belief.mean << meas.position.x(), meas.position.y(), 0.0, 0.0;
                entity.belief.covariance = Vec4(0.04, 0.04, 25.0, 25.0).asDiagonal();
                entity.belief.timestamp = meas.timestamp;
                if (meas.yaw) entity.held_heading = wrap_angle(*meas.yaw);
                entity.initialized = true;
                continue;
            }
            if (meas.timestamp < entity.belief.timestamp) continue;  // stale, caller counts
            KalmanModel step = model;
            step.dt = meas.timestamp - entity.belief.timestamp;
            step.transition = KalmanModel::cv_transition(step.dt);
            step.process_noise = model.process_noise * (model.dt > 0 ? step.dt / model.dt : 1.0);
            const KalmanBelief pred = kf_predict(entity.belief, step);
            if (auto post = kf_update(pred, meas.position, model)) {
                entity.belief = *post;
            } else {
                entity.belief = pred;  // degraded update: keep the prediction
            }
        }
    }

    // New entities seen for the first time in this batch.
    for (const auto& [id, list] : by_entity) {
        if (updated.count(id)) continue;
        TrackedEntity e;
        e.belief.mean << list.back().position.x(), list.back().position.y(), 0.0, 0.0;
        e.belief.covariance = Vec4(0.04, 0.04, 25.0, 25.0).asDiagonal();
        e.belief.timestamp = list.back().timestamp;
        if (list.back().yaw) e.held_heading = wrap_angle(*list.back().yaw);
        e.initialized = true;
        updated[id] = e;
    }

    const int h_steps = static_cast<int>(std::lround(horizon_s / model.dt));
    std::map<std::string, PredictedPose> poses;
    for (auto& [id, entity] : updated) {
        if (!entity.initialized) continue;
        const KalmanBelief ahead = kf_horizon(entity.belief, model, h_steps);
        PredictedPose pp;
        pp.velocity = ahead.mean.tail<2>();
        entity.held_heading =
            derive_heading(pp.velocity, entity.held_heading, model.speed_floor);
        pp.pose = Pose(Vec3(ahead.mean(0), ahead.mean(1), 0.0), entity.held_heading);
        pp.covariance = ahead.covariance;
        poses[id] = pp;
    }
    return {std::move(poses), std::move(updated)};
}

std::string belief_json(const std::string& entity, const TrackedEntity& e) {
    nlohmann::json j;
    j["entity_id"] = entity;
    j["t_s"] = e.belief.timestamp;
    j["mean"] = {e.belief.mean(0), e.belief.mean(1), e.belief.mean(2), e.belief.mean(3)};
    auto& p = j["covariance"] = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) {
        p.push_back({e.belief.covariance(r, 0), e.belief.covariance(r, 1),
                     e.belief.covariance(r, 2), e.belief.covariance(r, 3)});
    }
    j["heading"] = e.held_heading;
    return j.dump();
}

}  // namespace ndtwin
