#include "rhyme/manifold.hpp"

#include <algorithm>
#include <cmath>

#include "rhyme/error.hpp"

namespace rhyme::manifold {

namespace {

using Real = long double;

// Norms are accumulated in extended precision; near the ball boundary the
// artanh in log_map amplifies any error in |x| by 1/(1 - c|x|^2).
Real norm_ld(const Vec &v) {
  Real sum = 0.0L;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Real e = v[i];
    sum += e * e;
  }
  return std::sqrt(sum);
}

void require_finite(const Vec &v, const char *what) {
  if (!v.allFinite()) {
    throw InvalidArgument(std::string(what) + ": non-finite input");
  }
}

void require_curvature(double c, const char *what) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw InvalidArgument(std::string(what) + ": curvature must be positive and finite");
  }
}

// Tanh capped so that the image stays strictly inside the ball.
struct ExpScalars {
  Real s;      // sqrt(c)
  Real n;      // |v|
  Real t;      // capped tanh(s n)
  bool capped;
};

ExpScalars exp_scalars(const Vec &v, double c) {
  ExpScalars e{};
  e.s = std::sqrt(static_cast<Real>(c));
  e.n = norm_ld(v);
  const Real t = std::tanh(e.s * e.n);
  e.capped = t > static_cast<Real>(kMaxBallRadius);
  e.t = e.capped ? static_cast<Real>(kMaxBallRadius) : t;
  return e;
}

// Cotangent of a radial map x = phi(n) v/n given phi/n and phi'(n).
Vec radial_vjp(const Vec &v, Real n, Real phi_over_n, Real dphi_dn, const Vec &g) {
  const Vec dir = v / static_cast<double>(n);
  const double radial = dir.dot(g);
  return static_cast<double>(phi_over_n) * g +
         static_cast<double>((dphi_dn - phi_over_n) * radial) * dir;
}

} // namespace

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Curvature::Curvature(double rho, double c_min) : rho_(rho), c_min_(c_min), c_(c_min + softplus(rho)) {
  if (!std::isfinite(rho) || !(c_min > 0.0)) {
    throw InvalidArgument("Curvature: rho must be finite and c_min positive");
  }
}

Curvature Curvature::from_value(double c, double c_min) {
  if (!(c > c_min) || !std::isfinite(c)) {
    throw InvalidArgument("Curvature: c must exceed c_min");
  }
  // inverse softplus
  const double excess = c - c_min;
  const double rho = excess > 30.0 ? excess + std::log(-std::expm1(-excess)) : std::log(std::expm1(excess));
  return Curvature(rho, c_min);
}

double Curvature::dvalue_drho() const noexcept { return sigmoid(rho_); }

Vec exp_map(const Vec &v, double c) {
  require_finite(v, "exp_map");
  require_curvature(c, "exp_map");
  const ExpScalars e = exp_scalars(v, c);
  if (e.n < kNormEps) {
    return v;
  }
  const Real scale = e.t / (e.s * e.n);
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[i] = static_cast<double>(scale * static_cast<Real>(v[i]));
  }
  return out;
}

Vec log_map(const Vec &x, double c) {
  require_finite(x, "log_map");
  require_curvature(c, "log_map");
  const Real m = norm_ld(x);
  if (m < kNormEps) {
    return x;
  }
  const Real s = std::sqrt(static_cast<Real>(c));
  const Real a = s * m;
  if (!(a < 1.0L)) {
    throw DomainError("log_map: point lies on or outside the ball boundary");
  }
  const Real scale = std::atanh(a) / a;
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out[i] = static_cast<double>(scale * static_cast<Real>(x[i]));
  }
  return out;
}

Vec project_to_ball(const Vec &x, double c, double margin) {
  require_curvature(c, "project_to_ball");
  const double s = std::sqrt(c);
  const double m = x.norm();
  const double limit = (1.0 - margin) / s;
  if (m <= limit) {
    return x;
  }
  return x * (limit / m);
}

namespace {

// sqrt(1 - |x|^2), snapped to 0 for unit vectors. Rounding in |x|^2 of a
// normalized vector would otherwise show up as ~1e-8 jitter in the map.
double sphere_gap(double q) {
  constexpr double kOnSphere = 1e-12;
  const double r = 1.0 - q;
  return r < kOnSphere ? 0.0 : std::sqrt(r);
}

} // namespace

Vec sphere_normalize(const Vec &u) {
  require_finite(u, "sphere_normalize");
  const double n = u.norm();
  if (n < kNormEps) {
    throw DegenerateInput("sphere_normalize: input norm below threshold");
  }
  return u / n;
}

Vec stereographic_to_ball(const Vec &x, double c, double shrink, double margin) {
  require_finite(x, "stereographic_to_ball");
  require_curvature(c, "stereographic_to_ball");
  const double q = x.squaredNorm();
  if (std::sqrt(q) > 1.0 + 1e-9) {
    throw DomainError("stereographic_to_ball: input norm exceeds 1");
  }
  const double w = sphere_gap(q);
  const Vec y = x * (shrink / (std::sqrt(c) * (1.0 + w)));
  return project_to_ball(y, c, margin);
}

Vec barycentric_fuse(const Vec &x_h, const Vec &y_s, double alpha, double c, double margin) {
  if (x_h.size() != y_s.size()) {
    throw InvalidArgument("barycentric_fuse: dimension mismatch");
  }
  const Vec tangent = alpha * log_map(x_h, c) + (1.0 - alpha) * log_map(y_s, c);
  return project_to_ball(exp_map(tangent, c), c, margin);
}

PointCotangent exp_map_vjp(const Vec &v, double c, const Vec &grad_out) {
  require_finite(v, "exp_map_vjp");
  require_curvature(c, "exp_map_vjp");
  const ExpScalars e = exp_scalars(v, c);
  if (e.n < kNormEps) {
    return {grad_out, 0.0};
  }
  const Real a = e.s * e.n;
  const Real phi_over_n = e.t / a;
  const Real dphi_dn = e.capped ? 0.0L : 1.0L - e.t * e.t;
  const Real dphi_ds = e.capped ? -e.t / (e.s * e.s) : (a * (1.0L - e.t * e.t) - e.t) / (e.s * e.s);
  const double radial = v.dot(grad_out) / static_cast<double>(e.n);
  return {radial_vjp(v, e.n, phi_over_n, dphi_dn, grad_out),
          static_cast<double>(radial * dphi_ds / (2.0L * e.s))};
}

PointCotangent log_map_vjp(const Vec &x, double c, const Vec &grad_out) {
  require_finite(x, "log_map_vjp");
  require_curvature(c, "log_map_vjp");
  const Real m = norm_ld(x);
  if (m < kNormEps) {
    return {grad_out, 0.0};
  }
  const Real s = std::sqrt(static_cast<Real>(c));
  const Real a = s * m;
  if (!(a < 1.0L)) {
    throw DomainError("log_map_vjp: point lies on or outside the ball boundary");
  }
  const Real artanh = std::atanh(a);
  const Real inv_gap = 1.0L / ((1.0L - a) * (1.0L + a));
  const Real phi_over_n = artanh / a;
  const Real dpsi_ds = (a * inv_gap - artanh) / (s * s);
  const double radial = x.dot(grad_out) / static_cast<double>(m);
  return {radial_vjp(x, m, phi_over_n, inv_gap, grad_out),
          static_cast<double>(radial * dpsi_ds / (2.0L * s))};
}

PointCotangent project_to_ball_vjp(const Vec &x, double c, const Vec &grad_out, double margin) {
  require_curvature(c, "project_to_ball_vjp");
  const double s = std::sqrt(c);
  const double m = x.norm();
  const double limit = (1.0 - margin) / s;
  if (m <= limit) {
    return {grad_out, 0.0};
  }
  const Vec dir = x / m;
  const double radial = dir.dot(grad_out);
  Vec grad_x = (limit / m) * (grad_out - radial * dir);
  // d(limit)/dc = -limit / (2c)
  return {std::move(grad_x), -radial * limit / (2.0 * c)};
}

Vec sphere_normalize_vjp(const Vec &u, const Vec &grad_out) {
  const double n = u.norm();
  if (n < kNormEps) {
    throw DegenerateInput("sphere_normalize_vjp: input norm below threshold");
  }
  const Vec dir = u / n;
  return (grad_out - dir.dot(grad_out) * dir) / n;
}

PointCotangent stereographic_to_ball_vjp(const Vec &x, double c, const Vec &grad_out, double shrink,
                                         double margin) {
  require_finite(x, "stereographic_to_ball_vjp");
  require_curvature(c, "stereographic_to_ball_vjp");
  const double q = x.squaredNorm();
  if (std::sqrt(q) > 1.0 + 1e-9) {
    throw DomainError("stereographic_to_ball_vjp: input norm exceeds 1");
  }
  const double w = sphere_gap(q);
  const double h = 1.0 / (1.0 + w);
  const double s = std::sqrt(c);
  const double k = shrink / s;

  const Vec y0 = x * h;
  const Vec y1 = y0 * k;
  const PointCotangent proj = project_to_ball_vjp(y1, c, grad_out, margin);

  // y1 = (shrink / sqrt(c)) y0
  const Vec g0 = k * proj.point;
  const double grad_c = proj.c - 0.5 * k / c * y0.dot(proj.point);

  Vec grad_x;
  if (w == 0.0) {
    const double n = std::sqrt(q);
    if (n < kNormEps) {
      grad_x = h * g0;
    } else {
      const Vec dir = x / n;
      grad_x = h * (g0 - dir.dot(g0) * dir);
    }
  } else {
    const double dh_dq = h * h / (2.0 * w);
    grad_x = h * g0 + (2.0 * dh_dq * x.dot(g0)) * x;
  }
  return {std::move(grad_x), grad_c};
}

FuseCotangent barycentric_fuse_vjp(const Vec &x_h, const Vec &y_s, double alpha, double c,
                                   const Vec &grad_out, double margin) {
  if (x_h.size() != y_s.size()) {
    throw InvalidArgument("barycentric_fuse_vjp: dimension mismatch");
  }
  const Vec a = log_map(x_h, c);
  const Vec b = log_map(y_s, c);
  const Vec tangent = alpha * a + (1.0 - alpha) * b;
  const Vec z0 = exp_map(tangent, c);

  const PointCotangent proj = project_to_ball_vjp(z0, c, grad_out, margin);
  const PointCotangent ex = exp_map_vjp(tangent, c, proj.point);
  const PointCotangent la = log_map_vjp(x_h, c, alpha * ex.point);
  const PointCotangent lb = log_map_vjp(y_s, c, (1.0 - alpha) * ex.point);

  FuseCotangent out;
  out.x_h = la.point;
  out.y_s = lb.point;
  out.alpha = ex.point.dot(a - b);
  out.c = proj.c + ex.c + la.c + lb.c;
  return out;
}

} // namespace rhyme::manifold
