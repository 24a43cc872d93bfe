#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace ap {

// Circular sensing footprint fixed in the robot body frame, with the probit
// smoothing factor used for the differentiable visibility weight.
struct FieldOfView {
    double radius = 2.0;
    double kappa = 0.5;

    void validate() const;
};

// A world point expressed in the robot body frame.
struct BodyFramePoint {
    Eigen::Vector2d q;
};

// Planar robot pose. Heading is reserved for future pose states; the current
// sensor model is position-only and rejects nonzero headings.
struct RobotPose {
    Eigen::Vector2d position{0.0, 0.0};
    double heading = 0.0;
};

// Body-frame coordinates of a world point: q = p - position. No rotation is
// applied in v1 (the pose overload requires heading == 0).
BodyFramePoint body_frame(const Eigen::Vector2d& position, const Eigen::Vector2d& point);
BodyFramePoint body_frame(const RobotPose& pose, const Eigen::Vector2d& point);

// Signed distance to the FoV boundary: |q| - radius. Negative inside,
// positive outside, zero on the boundary.
double signed_distance(const BodyFramePoint& q, const FieldOfView& fov);

// Gaussian-CDF-shaped squashing with offset: probit(x) = (1 + erf(x/(sqrt(2)
// kappa) - 2)) / 2. Monotone nondecreasing, limits 0 and 1.
double probit(double x, double kappa);

// Smoothed visibility weight 1 - probit(signed_distance). In [0, 1] and
// decreasing in the distance from the FoV.
double soft_visibility_weight(const BodyFramePoint& q, const FieldOfView& fov);

// Indices of the points whose body-frame coordinates lie in the closed FoV
// (signed distance <= 0; boundary points count as visible).
std::vector<int> hard_visible_set(const Eigen::Vector2d& position,
                                  std::span<const Eigen::Vector2d> points,
                                  const FieldOfView& fov);

}  // namespace ap
