#pragma once

#include <memory>

#include "tapeq/network.hpp"

namespace tapeq {

/// Terms of the quadratic-type model minimised at each UMT step:
///   V(x, center) + <linear, x> + h_weight * h(x) + mu_weight * V(x, mu_anchor).
struct ModelTerms {
  Vector center;
  Vector linear;
  double h_weight = 0.0;
  double mu_weight = 0.0;
  Vector mu_anchor;  // ignored when mu_weight == 0
};

/// Prox-function, Bregman divergence, feasible set and composite term.
/// d(center) = 0 and grad d(center) = 0.
class ProxSetup {
 public:
  virtual ~ProxSetup() = default;

  virtual const Vector& center() const = 0;
  /// sup 2 V(x, y) / ||x - y||^2 over the set (1 for the Euclidean setup).
  virtual double omega() const = 0;
  /// Squared norm of x - y in the norm d is 1-strongly convex in.
  virtual double distance_sq(const Vector& x, const Vector& y) const = 0;
  /// Dual norm of a gradient.
  virtual double dual_norm(const Vector& g) const = 0;
  virtual double bregman(const Vector& x, const Vector& z) const = 0;
  /// Gradient in x of V(x, z).
  virtual Vector bregman_grad(const Vector& x, const Vector& z) const = 0;

  /// Composite term h (0 when the setup has none). +inf outside the set.
  virtual double composite(const Vector& x) const = 0;

  /// argmin over the set of the model described by `terms`.
  virtual Vector minimize_model(const ModelTerms& terms) const = 0;
  /// Anchor such that wa V(x, a) + wb V(x, b) = (wa + wb) V(x, anchor) + const.
  virtual Vector merge_anchor(const Vector& a, double wa, const Vector& b, double wb) const = 0;
  /// Projection onto the feasible set.
  virtual Vector project(const Vector& x) const = 0;

  /// Mirr_z(v) = argmin <v, x> + V(x, z) + h_weight * h(x).
  Vector mirror_step(const Vector& z, const Vector& v, double h_weight = 0.0) const {
    return minimize_model({z, v, h_weight, 0.0, {}});
  }

  /// Same set and composite with the prox-function re-centred at y0.
  virtual std::unique_ptr<ProxSetup> recentered(const Vector& y0) const = 0;
};

/// Euclidean prox d(x) = ||x - y0||^2 / 2 on a box lower <= x <= upper
/// (entries may be infinite), with composite h(x) = <c, x - offset>
/// restricted to the box.
class EuclideanBox : public ProxSetup {
 public:
  EuclideanBox(Vector y0, Vector lower, Vector upper, Vector composite_slope = {}, Vector composite_offset = {});
  static EuclideanBox unconstrained(const Vector& y0);

  const Vector& center() const override { return y0_; }
  double omega() const override { return 1.0; }
  double distance_sq(const Vector& x, const Vector& y) const override { return (x - y).squaredNorm(); }
  double dual_norm(const Vector& g) const override { return g.norm(); }
  double bregman(const Vector& x, const Vector& z) const override { return 0.5 * (x - z).squaredNorm(); }
  Vector bregman_grad(const Vector& x, const Vector& z) const override { return x - z; }
  double composite(const Vector& x) const override;
  Vector minimize_model(const ModelTerms& terms) const override;
  Vector merge_anchor(const Vector& a, double wa, const Vector& b, double wb) const override;
  Vector project(const Vector& x) const override;
  std::unique_ptr<ProxSetup> recentered(const Vector& y0) const override;

  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

 private:
  Vector y0_, lower_, upper_, slope_, offset_;
};

/// Entropy prox on the simplex {x >= 0, sum x = mass}:
/// V(x, z) = sum x ln(x / z) (for mass 1; scaled accordingly otherwise),
/// composite h(x) = weight * sum x ln x.
class EntropySimplex : public ProxSetup {
 public:
  explicit EntropySimplex(Vector y0, double composite_weight = 0.0);
  static EntropySimplex uniform(int n, double mass = 1.0, double composite_weight = 0.0);

  const Vector& center() const override { return y0_; }
  double omega() const override { return 1.0; }
  double distance_sq(const Vector& x, const Vector& y) const override;
  double dual_norm(const Vector& g) const override;
  double bregman(const Vector& x, const Vector& z) const override;
  Vector bregman_grad(const Vector& x, const Vector& z) const override;
  double composite(const Vector& x) const override;
  Vector minimize_model(const ModelTerms& terms) const override;
  Vector merge_anchor(const Vector& a, double wa, const Vector& b, double wb) const override;
  Vector project(const Vector& x) const override;
  std::unique_ptr<ProxSetup> recentered(const Vector& y0) const override;

  double mass() const { return mass_; }

 private:
  Vector y0_;
  double mass_;
  double weight_;
};

/// Numerically stable softmax scaled to `mass`.
Vector softmax(const Vector& z, double mass = 1.0);
/// ln sum exp(z), max-shifted.
double log_sum_exp(const Vector& z);

}  // namespace tapeq
