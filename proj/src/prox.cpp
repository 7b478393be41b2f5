#include "tapeq/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tapeq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double log_sum_exp(const Vector& z) {
  const double m = z.maxCoeff();
  if (!std::isfinite(m)) return m;
  long double s = 0.0L;
  for (double v : z) s += std::exp(v - m);
  return m + static_cast<double>(std::log(s));
}

Vector softmax(const Vector& z, double mass) {
  const double m = z.maxCoeff();
  Vector out(z.size());
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += out[i] = std::exp(z[i] - m);
  return out * (mass / static_cast<double>(s));
}

// ---------------------------------------------------------------------------

EuclideanBox::EuclideanBox(Vector y0, Vector lower, Vector upper, Vector composite_slope, Vector composite_offset)
    : y0_(std::move(y0)),
      lower_(std::move(lower)),
      upper_(std::move(upper)),
      slope_(std::move(composite_slope)),
      offset_(std::move(composite_offset)) {
  const auto n = y0_.size();
  if (lower_.size() != n || upper_.size() != n) throw DomainError("box bounds do not match the dimension");
  if (slope_.size() != 0 && slope_.size() != n) throw DomainError("composite slope does not match the dimension");
  if (slope_.size() != 0 && offset_.size() == 0) offset_ = Vector::Zero(n);
  if ((lower_.array() > upper_.array()).any()) throw DomainError("empty box");
}

EuclideanBox EuclideanBox::unconstrained(const Vector& y0) {
  const auto n = y0.size();
  return EuclideanBox(y0, Vector::Constant(n, -kInf), Vector::Constant(n, kInf));
}

double EuclideanBox::composite(const Vector& x) const {
  if ((x.array() < lower_.array()).any() || (x.array() > upper_.array()).any()) return kInf;
  if (slope_.size() == 0) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (slope_[i] != 0.0) s += slope_[i] * (x[i] - offset_[i]);
  return s;
}

Vector EuclideanBox::minimize_model(const ModelTerms& t) const {
  Vector z = t.center - t.linear;
  if (slope_.size() != 0 && t.h_weight != 0.0) z -= t.h_weight * slope_;
  if (t.mu_weight != 0.0) z = (z + t.mu_weight * t.mu_anchor) / (1.0 + t.mu_weight);
  return project(z);
}

Vector EuclideanBox::merge_anchor(const Vector& a, double wa, const Vector& b, double wb) const {
  if (wa == 0.0) return b;
  return (wa * a + wb * b) / (wa + wb);
}

Vector EuclideanBox::project(const Vector& x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

std::unique_ptr<ProxSetup> EuclideanBox::recentered(const Vector& y0) const {
  return std::make_unique<EuclideanBox>(y0, lower_, upper_, slope_, offset_);
}

// ---------------------------------------------------------------------------

EntropySimplex::EntropySimplex(Vector y0, double composite_weight)
    : y0_(std::move(y0)), mass_(y0_.sum()), weight_(composite_weight) {
  if (y0_.size() == 0 || (y0_.array() <= 0.0).any()) throw DomainError("simplex centre must be strictly positive");
  if (composite_weight < 0.0) throw DomainError("entropy composite weight must be >= 0");
}

EntropySimplex EntropySimplex::uniform(int n, double mass, double composite_weight) {
  return EntropySimplex(Vector::Constant(n, mass / n), composite_weight);
}

double EntropySimplex::distance_sq(const Vector& x, const Vector& y) const {
  const double d = (x - y).lpNorm<1>();
  return d * d;
}

double EntropySimplex::dual_norm(const Vector& g) const { return g.lpNorm<Eigen::Infinity>(); }

double EntropySimplex::bregman(const Vector& x, const Vector& z) const {
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] > 0.0) s += x[i] * std::log(x[i] / z[i]) - x[i] + z[i];
  return mass_ * static_cast<double>(s);
}

Vector EntropySimplex::bregman_grad(const Vector& x, const Vector& z) const {
  return mass_ * (x.array().log() - z.array().log()).matrix();
}

double EntropySimplex::composite(const Vector& x) const {
  if ((x.array() < 0.0).any()) return kInf;
  if (weight_ == 0.0) return 0.0;
  long double s = 0.0L;
  for (double v : x)
    if (v > 0.0) s += v * std::log(v);
  return weight_ * static_cast<double>(s);
}

Vector EntropySimplex::minimize_model(const ModelTerms& t) const {
  const double m = mass_;
  Vector z = m * t.center.array().log().matrix() - t.linear;
  double denom = m + t.h_weight * weight_;
  if (t.mu_weight != 0.0) {
    z += t.mu_weight * m * t.mu_anchor.array().log().matrix();
    denom += t.mu_weight * m;
  }
  return softmax(z / denom, mass_);
}

Vector EntropySimplex::merge_anchor(const Vector& a, double wa, const Vector& b, double wb) const {
  if (wa == 0.0) return b;
  return ((wa * a.array().log() + wb * b.array().log()) / (wa + wb)).exp().matrix();
}

Vector EntropySimplex::project(const Vector& x) const {
  // Euclidean projection onto {x >= 0, sum x = mass} by sorting.
  std::vector<double> v(x.data(), x.data() + x.size());
  std::sort(v.begin(), v.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    cum += v[i];
    const double cand = (cum - mass_) / static_cast<double>(i + 1);
    if (v[i] - cand > 0.0) theta = cand;
  }
  return (x.array() - theta).cwiseMax(0.0).matrix();
}

std::unique_ptr<ProxSetup> EntropySimplex::recentered(const Vector& y0) const {
  return std::make_unique<EntropySimplex>(y0, weight_);
}

}  // namespace tapeq
