#pragma once

#include "schoolnet/rng.hpp"

namespace schoolnet {

/// Negative binomial in the (mean, size) parameterization used by glm.nb:
/// Var = mean + mean^2 / size.
double negbin_log_pmf(int y, double mean, double size);

/// P(Y <= c).
double negbin_cdf(int c, double mean, double size);

/// P(Y > c), computed without cancellation when the tail is small.
double negbin_upper_tail(int c, double mean, double size);

/// Gamma-Poisson draw. Mean 0 returns 0; sizes beyond 1e8 draw Poisson.
int sample_negbin(double mean, double size, Rng& rng);

}  // namespace schoolnet
