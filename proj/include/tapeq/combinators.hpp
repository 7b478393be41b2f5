#pragma once

#include "tapeq/umt.hpp"

namespace tapeq {

struct RestartOptions {
  double mu = 0.0;    // strong convexity of F in the prox norm, > 0
  double L = 0.0;     // Lipschitz constant of grad f, > 0
  int restarts = 0;   // runs after the first one
  UmtOptions inner;   // eps and L0 are used; mu is forced to 0
};

/// Restarted UMT: runs of ceil(sqrt(16 L omega / mu)) iterations, each
/// started from the previous output with the prox-function re-centred there.
/// report.restart_values holds F after every run.
UmtResult restart_umt(const SmoothOracle& f, const ProxSetup& prox, const RestartOptions& opts);

/// Inner iteration budget of one restart run.
int restart_run_length(double L, double omega, double mu);

/// F^mu = F + mu V(., y0) with mu = eps / (2 R2). An eps/2 solution of the
/// regularised problem is an eps solution of the original one. The returned
/// oracle refers to `prox`, which must outlive it.
struct Regularized {
  SmoothOracle oracle;
  double mu = 0.0;
  double inner_eps = 0.0;
};

Regularized regularize(const SmoothOracle& f, const ProxSetup& prox, double eps, double R2);

}  // namespace tapeq
