#include "ap/fov.hpp"

#include <cmath>

#include "ap/common.hpp"
#include "ap/erf.hpp"

namespace ap {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
}

void FieldOfView::validate() const {
    AP_CHECK(radius > 0.0, "FieldOfView radius must be positive");
    AP_CHECK(kappa > 0.0, "FieldOfView kappa must be positive");
}

BodyFramePoint body_frame(const Eigen::Vector2d& position, const Eigen::Vector2d& point) {
    return BodyFramePoint{point - position};
}

BodyFramePoint body_frame(const RobotPose& pose, const Eigen::Vector2d& point) {
    AP_CHECK(pose.heading == 0.0, "rotated body frames are not supported yet");
    return body_frame(pose.position, point);
}

double signed_distance(const BodyFramePoint& q, const FieldOfView& fov) {
    return q.q.norm() - fov.radius;
}

double probit(double x, double kappa) {
    AP_CHECK(kappa > 0.0, "probit smoothing factor must be positive");
    // (1 + erf(t)) / 2 written as erfc(-t) / 2, which keeps full relative
    // accuracy where the result is tiny.
    return 0.5 * ap::erfc(2.0 - x / (kSqrt2 * kappa));
}

double soft_visibility_weight(const BodyFramePoint& q, const FieldOfView& fov) {
    // 1 - probit(d) = erfc(d / (sqrt(2) kappa) - 2) / 2; the complementary
    // form keeps relative accuracy in the far-outside tail.
    const double d = signed_distance(q, fov);
    return 0.5 * ap::erfc(d / (kSqrt2 * fov.kappa) - 2.0);
}

std::vector<int> hard_visible_set(const Eigen::Vector2d& position,
                                  std::span<const Eigen::Vector2d> points,
                                  const FieldOfView& fov) {
    std::vector<int> visible;
    for (int j = 0; j < static_cast<int>(points.size()); ++j) {
        if (signed_distance(body_frame(position, points[j]), fov) <= 0.0) {
            visible.push_back(j);
        }
    }
    return visible;
}

}  // namespace ap
