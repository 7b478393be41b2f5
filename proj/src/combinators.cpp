#include "tapeq/combinators.hpp"

#include <cmath>
#include <memory>

namespace tapeq {

int restart_run_length(double L, double omega, double mu) {
  return static_cast<int>(std::ceil(std::sqrt(16.0 * L * omega / mu)));
}

UmtResult restart_umt(const SmoothOracle& f, const ProxSetup& prox, const RestartOptions& opts) {
  if (!(opts.mu > 0.0)) throw DomainError("restarts need a strongly convex objective (mu > 0)");
  if (!(opts.L > 0.0)) throw DomainError("restarts need the Lipschitz constant L > 0");
  if (opts.restarts < 0) throw DomainError("negative restart count");

  UmtOptions inner = opts.inner;
  inner.mu = 0.0;
  inner.radius_sq.reset();
  inner.max_iter = restart_run_length(opts.L, prox.omega(), opts.mu) + 1;

  std::unique_ptr<ProxSetup> current = prox.recentered(prox.center());
  UmtResult total;
  for (int run = 0; run <= opts.restarts; ++run) {
    auto r = umt_minimize(f, *current, inner);
    auto& rep = total.report;
    rep.iterations += r.report.iterations;
    rep.value_calls += r.report.value_calls;
    rep.grad_calls += r.report.grad_calls;
    rep.final_value = r.report.final_value;
    rep.termination = r.report.termination;
    rep.value_trace.insert(rep.value_trace.end(), r.report.value_trace.begin(), r.report.value_trace.end());
    rep.L_trace.insert(rep.L_trace.end(), r.report.L_trace.begin(), r.report.L_trace.end());
    rep.alpha_trace.insert(rep.alpha_trace.end(), r.report.alpha_trace.begin(), r.report.alpha_trace.end());
    rep.A_trace.insert(rep.A_trace.end(), r.report.A_trace.begin(), r.report.A_trace.end());
    rep.gap_trace.insert(rep.gap_trace.end(), r.report.gap_trace.begin(), r.report.gap_trace.end());
    rep.restart_values.push_back(r.report.final_value);
    total.x = r.x;
    current = current->recentered(r.x);
  }
  return total;
}

Regularized regularize(const SmoothOracle& f, const ProxSetup& prox, double eps, double R2) {
  if (!(R2 > 0.0)) throw DomainError("regularize needs R2 > 0");
  if (!(eps > 0.0)) throw DomainError("regularize needs eps > 0");
  Regularized out;
  out.mu = eps / (2.0 * R2);
  out.inner_eps = eps / 2.0;
  const double mu = out.mu;
  const Vector y0 = prox.center();
  const ProxSetup* p = &prox;
  out.oracle.delta = f.delta;
  out.oracle.variance = f.variance;
  out.oracle.value = [f, p, y0, mu](const Vector& x) { return f.value(x) + mu * p->bregman(x, y0); };
  out.oracle.value_grad = [f, p, y0, mu](const Vector& x) {
    auto r = f.value_grad(x);
    r.value += mu * p->bregman(x, y0);
    r.grad += mu * p->bregman_grad(x, y0);
    return r;
  };
  if (f.sample_grad) {
    out.oracle.sample_grad = [f, p, y0, mu](const Vector& x, Rng& rng) {
      return Vector(f.sample_grad(x, rng) + mu * p->bregman_grad(x, y0));
    };
  }
  return out;
}

}  // namespace tapeq
