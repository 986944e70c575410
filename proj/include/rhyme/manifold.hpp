#pragma once

// Origin-anchored maps on the Poincare ball of curvature -c (radius 1/sqrt(c))
// and on the unit sphere, with vector-Jacobian products for every map.
//
// All maps are radial: they act on the norm of their argument and preserve its
// direction. Below kNormEps the maps pass their argument through unchanged.

#include <Eigen/Core>

namespace rhyme::manifold {

using Vec = Eigen::VectorXd;

inline constexpr double kNormEps = 1e-12;
inline constexpr double kDefaultCMin = 1e-4;
inline constexpr double kDefaultMargin = 1e-5;
inline constexpr double kDefaultShrink = 1.0 - 1e-3;
/// Largest sqrt(c)*|x| the exponential map will produce.
inline constexpr double kMaxBallRadius = 1.0 - 1e-12;

/// Positive curvature c = c_min + softplus(rho), trained through rho.
class Curvature {
public:
  explicit Curvature(double rho, double c_min = kDefaultCMin);
  static Curvature from_value(double c, double c_min = kDefaultCMin);

  double rho() const noexcept { return rho_; }
  double c_min() const noexcept { return c_min_; }
  double value() const noexcept { return c_; }
  /// dc/drho = sigmoid(rho).
  double dvalue_drho() const noexcept;

private:
  double rho_;
  double c_min_;
  double c_;
};

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

/// tanh(sqrt(c)|v|) v / (sqrt(c)|v|). Throws InvalidArgument on non-finite input.
Vec exp_map(const Vec &v, double c);

/// artanh(sqrt(c)|x|) x / (sqrt(c)|x|). Throws DomainError when x is not
/// strictly inside the ball.
Vec log_map(const Vec &x, double c);

/// Rescales x onto the sphere of radius (1 - margin)/sqrt(c) when it lies
/// outside it; otherwise returns x unchanged.
Vec project_to_ball(const Vec &x, double c, double margin = kDefaultMargin);

/// u / |u|. Throws DegenerateInput when |u| < kNormEps.
Vec sphere_normalize(const Vec &u);

/// x / (1 + sqrt(1 - |x|^2)), scaled by shrink/sqrt(c) and projected into the
/// ball. Unit-norm inputs map to radius shrink/sqrt(c).
Vec stereographic_to_ball(const Vec &x, double c, double shrink = kDefaultShrink,
                          double margin = kDefaultMargin);

/// exp(alpha log(x_h) + (1 - alpha) log(y_s)), projected into the ball.
Vec barycentric_fuse(const Vec &x_h, const Vec &y_s, double alpha, double c,
                     double margin = kDefaultMargin);

// Vector-Jacobian products. Each takes the forward inputs and the cotangent of
// the forward output, and returns the cotangents of the inputs. The curvature
// cotangent is with respect to c; chain through Curvature::dvalue_drho for rho.

struct PointCotangent {
  Vec point;
  double c = 0.0;
};

struct FuseCotangent {
  Vec x_h;
  Vec y_s;
  double alpha = 0.0;
  double c = 0.0;
};

PointCotangent exp_map_vjp(const Vec &v, double c, const Vec &grad_out);
PointCotangent log_map_vjp(const Vec &x, double c, const Vec &grad_out);
PointCotangent project_to_ball_vjp(const Vec &x, double c, const Vec &grad_out,
                                   double margin = kDefaultMargin);
Vec sphere_normalize_vjp(const Vec &u, const Vec &grad_out);
/// On the unit sphere the radial derivative is unbounded; there the returned
/// point cotangent is the tangential (sphere-constrained) part.
PointCotangent stereographic_to_ball_vjp(const Vec &x, double c, const Vec &grad_out,
                                         double shrink = kDefaultShrink,
                                         double margin = kDefaultMargin);
FuseCotangent barycentric_fuse_vjp(const Vec &x_h, const Vec &y_s, double alpha, double c,
                                   const Vec &grad_out, double margin = kDefaultMargin);

} // namespace rhyme::manifold
