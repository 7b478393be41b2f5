#include "tapeq/mirror_descent.hpp"

#include <cmath>

namespace tapeq {

int mirror_descent_budget(double M_g, double R2, double eps) {
  return static_cast<int>(std::ceil(2.0 * M_g * M_g * R2 / (eps * eps))) + 1;
}

MdResult mirror_descent_constrained(const ConstrainedProblem& problem, const ProxSetup& prox, const MdOptions& opts) {
  if (!(opts.eps > 0.0)) throw DomainError("eps must be positive");
  if (!(opts.M_f > 0.0)) throw DomainError("M_f must be positive");
  if (!problem.f_subgrad) throw DomainError("mirror descent needs a subgradient of f");
  if (opts.N < 1) throw DomainError("mirror descent needs N >= 1");
  const bool constrained = static_cast<bool>(problem.g);
  if (constrained && !problem.g_subgrad) throw DomainError("constraint given without a subgradient");
  const double M_g = constrained ? opts.M_g : opts.M_f;
  if (!(M_g > 0.0)) throw DomainError("M_g must be positive");

  MdResult res;
  res.h_f = opts.eps / (opts.M_f * M_g);
  res.h_g = opts.eps / (M_g * M_g);
  res.steps.reserve(opts.N);
  Rng rng(opts.seed);

  Vector x = prox.center();
  Vector sum = Vector::Zero(x.size());
  bool stopped = false;
  int k = 0;
  for (; k < opts.N && !stopped; ++k) {
    const bool productive = !constrained || problem.g(x) <= opts.eps;
    if (opts.observe) opts.observe(k, x, productive);
    if (productive) {
      sum += x;
      ++res.productive;
      res.steps.push_back(res.h_f);
      x = prox.mirror_step(x, res.h_f * problem.f_subgrad(x, rng));
    } else {
      ++res.nonproductive;
      res.steps.push_back(res.h_g);
      x = prox.mirror_step(x, res.h_g * problem.g_subgrad(x, rng));
    }
    ++res.report.grad_calls;
    if (constrained) ++res.report.value_calls;
    stopped = opts.stop && opts.stop(k);
  }
  res.report.iterations = k;
  if (res.productive == 0) {
    res.report.termination = Termination::infeasible;
    res.x_bar = x;
  } else {
    res.report.termination = stopped ? Termination::stop_rule : Termination::max_iter;
    res.x_bar = sum / res.productive;
  }
  return res;
}

}  // namespace tapeq
