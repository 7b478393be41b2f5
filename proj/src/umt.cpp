#include "tapeq/umt.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace tapeq {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::stop_rule: return "stop_rule";
    case Termination::max_iter: return "max_iter";
    case Termination::infeasible: return "infeasibility_suspected";
  }
  return "unknown";
}

double umt_alpha(double A, double L, double mu_tilde) {
  const double b = 1.0 + A * mu_tilde;
  return (b + std::sqrt(b * b + 4.0 * L * A * b)) / (2.0 * L);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr long kMaxBatch = 1L << 24;

UmtResult run_umt(const SmoothOracle& f, const ProxSetup& prox, const UmtOptions& o, Rng* rng) {
  if (!(o.eps > 0.0)) throw DomainError("eps must be positive");
  if (o.mu < 0.0) throw DomainError("mu must be >= 0");
  if (!(o.L0 > 0.0)) throw DomainError("L0 must be positive");

  UmtResult res;
  SolverReport& rep = res.report;
  const double mu_t = o.mu / prox.omega();
  const Vector& y0 = prox.center();
  long batch = 0;

  auto at_model_point = [&](const Vector& y, double A_next, double alpha, double L) {
    if (!rng) {
      ++rep.value_calls;
      ++rep.grad_calls;
      return f.value_grad(y);
    }
    const double raw = std::ceil(8.0 * *f.variance * A_next / (L * alpha * o.eps));
    batch = raw >= static_cast<double>(kMaxBatch) ? kMaxBatch : std::max(1L, static_cast<long>(raw));
    OracleValue out;
    out.value = f.value(y);
    ++rep.value_calls;
    if (f.sample_batch) {
      out.grad = f.sample_batch(y, batch, *rng);
    } else {
      out.grad = f.sample_grad(y, *rng);
      for (long i = 1; i < batch; ++i) out.grad += f.sample_grad(y, *rng);
      out.grad /= static_cast<double>(batch);
    }
    rep.grad_calls += batch;
    return out;
  };
  auto value_at = [&](const Vector& x) {
    ++rep.value_calls;
    return f.value(x);
  };
  auto exit_test = [&](const OracleValue& fy, const Vector& y, const Vector& x, double L, double slack, double fx) {
    return fy.value + fy.grad.dot(x - y) + 0.5 * L * prox.distance_sq(x, y) + slack * o.eps >= fx;
  };
  auto check_ceiling = [&](double L) {
    if (L > o.L_ceiling)
      throw DivergedOracle(fmt::format("line-search L = {:g} exceeds the ceiling {:g}; the oracle is inconsistent",
                                       L, o.L_ceiling));
  };

  // Model phi_k(x) = V(x, y0) + c + <s, x> + A h(x) + mw V(x, anchor).
  double L = o.L0;
  double A = 0.0, c = 0.0, mw = 0.0;
  Vector s, anchor, x, u;
  OracleValue fy;

  auto model_value = [&](const Vector& at) {
    return prox.bregman(at, y0) + c + s.dot(at) + A * prox.composite(at);
  };
  auto record = [&](int k, const Vector& y, double alpha, double fx) -> bool {
    const double F = fx + prox.composite(x);
    double gap = kNaN;
    if (o.radius_sq && mu_t == 0.0) gap = F - (model_value(u) - *o.radius_sq) / A;
    rep.iterations = k;
    rep.final_value = F;
    rep.value_trace.push_back(F);
    rep.L_trace.push_back(L);
    rep.alpha_trace.push_back(alpha);
    rep.A_trace.push_back(A);
    rep.gap_trace.push_back(gap);
    if (rng) rep.batch_trace.push_back(batch);
    const UmtStep step{k, x, y, u, alpha, A, L, fy.value, fy.grad, F, gap};
    if (o.observe) o.observe(step);
    if (!std::isnan(gap) && gap <= o.eps) {
      rep.termination = Termination::converged;
      return true;
    }
    if (o.stop && o.stop(step)) {
      rep.termination = Termination::stop_rule;
      return true;
    }
    return false;
  };

  // Initial step: x0 = u0 = argmin phi_0, with its own line search on L.
  double alpha = 0.0, fx = 0.0;
  if (!rng) fy = at_model_point(y0, 0.0, 1.0, L);
  for (;;) {
    alpha = 1.0 / L;
    if (rng) fy = at_model_point(y0, alpha, alpha, L);
    u = prox.minimize_model({y0, alpha * fy.grad, alpha, alpha * mu_t, y0});
    fx = value_at(u);
    if (exit_test(fy, y0, u, L, 0.5, fx)) break;
    L *= 2.0;
    check_ceiling(L);
  }
  A = alpha;
  s = alpha * fy.grad;
  c = alpha * (fy.value - fy.grad.dot(y0));
  mw = alpha * mu_t;
  anchor = y0;
  x = u;
  if (record(0, y0, alpha, fx)) {
    res.x = x;
    return res;
  }

  Vector y, u_new, x_new;
  for (int k = 1; k < o.max_iter; ++k) {
    L /= 2.0;
    for (;;) {
      alpha = umt_alpha(A, L, mu_t);
      const double A_next = A + alpha;
      y = (alpha * u + A * x) / A_next;
      fy = at_model_point(y, A_next, alpha, L);
      const double mw_next = mw + alpha * mu_t;
      const Vector anchor_next = mu_t > 0.0 ? prox.merge_anchor(anchor, mw, y, alpha * mu_t) : anchor;
      u_new = prox.minimize_model({y0, s + alpha * fy.grad, A_next, mw_next, anchor_next});
      x_new = (alpha * u_new + A * x) / A_next;
      fx = value_at(x_new);
      if (exit_test(fy, y, x_new, L, alpha / (2.0 * A_next), fx)) {
        s += alpha * fy.grad;
        c += alpha * (fy.value - fy.grad.dot(y));
        A = A_next;
        mw = mw_next;
        anchor = anchor_next;
        break;
      }
      L *= 2.0;
      check_ceiling(L);
    }
    u = u_new;
    x = x_new;
    if (record(k, y, alpha, fx)) {
      res.x = x;
      return res;
    }
  }
  rep.termination = Termination::max_iter;
  res.x = x;
  return res;
}

}  // namespace

UmtResult umt_minimize(const SmoothOracle& f, const ProxSetup& prox, const UmtOptions& opts) {
  if (!f.value || !f.value_grad) throw DomainError("oracle needs value and value_grad");
  return run_umt(f, prox, opts, nullptr);
}

UmtResult umt_stochastic(const SmoothOracle& f, const ProxSetup& prox, const UmtOptions& opts, std::uint64_t seed) {
  if (!f.variance) throw DomainError("stochastic UMT needs the variance bound D of the gradient samples");
  if (*f.variance < 0.0) throw DomainError("variance bound must be >= 0");
  if (!f.value || !f.sample_grad) throw DomainError("oracle needs value and sample_grad");
  Rng rng(seed);
  return run_umt(f, prox, opts, &rng);
}

}  // namespace tapeq
