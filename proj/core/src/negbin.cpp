#include "schoolnet/negbin.hpp"

#include <cmath>
#include <random>

namespace schoolnet {

double negbin_log_pmf(int y, double mean, double size) {
    if (y < 0) return -INFINITY;
    if (mean <= 0.0) return y == 0 ? 0.0 : -INFINITY;
    const double log_p_size = std::log(size / (size + mean));
    const double log_p_mean = std::log(mean / (size + mean));
    return std::lgamma(y + size) - std::lgamma(size) - std::lgamma(y + 1.0) + size * log_p_size +
           y * log_p_mean;
}

double negbin_cdf(int c, double mean, double size) {
    if (c < 0) return 0.0;
    double total = 0.0;
    for (int y = 0; y <= c; ++y) total += std::exp(negbin_log_pmf(y, mean, size));
    return std::min(total, 1.0);
}

double negbin_upper_tail(int c, double mean, double size) {
    if (c < 0) return 1.0;
    const double lower = negbin_cdf(c, mean, size);
    if (lower < 0.9) return 1.0 - lower;
    // Sum the tail directly until terms vanish.
    double tail = 0.0;
    for (int y = c + 1;; ++y) {
        const double term = std::exp(negbin_log_pmf(y, mean, size));
        tail += term;
        if (y > mean && term < tail * 1e-17) break;
        if (y > c + 100000) break;
    }
    return tail;
}

int sample_negbin(double mean, double size, Rng& rng) {
    if (mean <= 0.0) return 0;
    double lambda = mean;
    if (size < 1e8) lambda = std::gamma_distribution<double>(size, mean / size)(rng);
    if (lambda <= 0.0) return 0;
    return std::poisson_distribution<int>(lambda)(rng);
}

}  // namespace schoolnet
