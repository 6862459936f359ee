#include "schoolnet/degree_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include "json.hpp"

#include "schoolnet/negbin.hpp"

namespace schoolnet {

namespace {

constexpr double kMinDispersion = 1e-4;
constexpr double kMaxDispersion = 1e8;
constexpr double kZ975 = 1.959963984540054;

using boost::math::digamma;
using boost::math::trigamma;

/// d/d(size) of the NB log pmf.
double dlogf_dsize(int y, double mu, double size) {
    return digamma(y + size) - digamma(size) + std::log(size / (size + mu)) + (mu - y) / (size + mu);
}

double d2logf_dsize2(int y, double mu, double size) {
    return trigamma(y + size) - trigamma(size) + 1.0 / size - 1.0 / (size + mu) -
           (mu - y) / ((size + mu) * (size + mu));
}

struct BreakData {
    std::vector<int> friends;
    std::vector<int> counts;
};

BreakData break_data(const SurveySample& survey) {
    BreakData d;
    for (const auto& r : survey.records()) {
        d.friends.push_back(r.n_close_friends);
        d.counts.push_back(r.break_contacts);
    }
    return d;
}

/// Newton steps on the regression coefficients with the dispersion fixed.
/// Returns the Fisher information at the final iterate.
std::array<double, 3> update_coefficients(const BreakData& d, double& b0, double& b1, double size) {
    std::array<double, 3> info{};
    for (int iter = 0; iter < 50; ++iter) {
        double u0 = 0, u1 = 0, i00 = 0, i01 = 0, i11 = 0;
        for (std::size_t k = 0; k < d.counts.size(); ++k) {
            const double x = d.friends[k];
            const double mu = std::exp(b0 + b1 * x);
            const double w = mu * size / (size + mu);
            const double r = (d.counts[k] - mu) * size / (size + mu);
            u0 += r;
            u1 += r * x;
            i00 += w;
            i01 += w * x;
            i11 += w * x * x;
        }
        info = {i00, i01, i11};
        const double det = i00 * i11 - i01 * i01;
        if (!(det > 0)) throw FitError("degenerate design in break model", std::hypot(u0, u1));
        const double s0 = (i11 * u0 - i01 * u1) / det;
        const double s1 = (-i01 * u0 + i00 * u1) / det;
        const std::span<const int> fr(d.friends), ct(d.counts);
        const double before = break_log_likelihood(fr, ct, b0, b1, size);
        double step = 1.0;
        double n0 = b0 + s0, n1 = b1 + s1;
        while (step > 1e-6 && !(break_log_likelihood(fr, ct, n0, n1, size) >= before - 1e-12)) {
            step *= 0.5;
            n0 = b0 + step * s0;
            n1 = b1 + step * s1;
        }
        b0 = n0;
        b1 = n1;
        if (std::abs(step * s0) + std::abs(step * s1) < 1e-12) break;
    }
    return info;
}

/// Profile maximization of the dispersion (Newton in log-size).
double update_dispersion(const BreakData& d, double b0, double b1, double size) {
    const std::span<const int> fr(d.friends), ct(d.counts);
    double t = std::log(size);
    for (int iter = 0; iter < 100; ++iter) {
        const double s = std::exp(t);
        double g = 0, h = 0;
        for (std::size_t k = 0; k < d.counts.size(); ++k) {
            const double mu = std::exp(b0 + b1 * d.friends[k]);
            g += dlogf_dsize(d.counts[k], mu, s);
            h += d2logf_dsize2(d.counts[k], mu, s);
        }
        const double gt = s * g;
        const double ht = s * g + s * s * h;
        double step = ht < 0 ? -gt / ht : (gt > 0 ? 1.0 : -1.0);
        step = std::clamp(step, -2.0, 2.0);
        const double before = break_log_likelihood(fr, ct, b0, b1, s);
        double next = std::clamp(t + step, std::log(kMinDispersion), std::log(kMaxDispersion));
        while (std::abs(next - t) > 1e-14 &&
               !(break_log_likelihood(fr, ct, b0, b1, std::exp(next)) >= before - 1e-12))
            next = t + 0.5 * (next - t);
        if (std::abs(next - t) < 1e-10) {
            t = next;
            break;
        }
        t = next;
    }
    return std::exp(t);
}

std::vector<int> lunch_counts(const SurveySample& survey) {
    std::vector<int> out;
    out.reserve(survey.size());
    for (const auto& r : survey.records()) out.push_back(r.lunch_contacts);
    return out;
}

/// Score of the censored log-likelihood in (log mean, log size).
std::array<double, 2> censored_gradient(std::span<const int> counts, int cutoff, double mu, double size) {
    double ga = 0, gb = 0;
    std::size_t censored = 0;
    for (int y : counts) {
        if (y > cutoff) {
            ++censored;
            continue;
        }
        ga += size * (y - mu) / (size + mu);
        gb += size * dlogf_dsize(y, mu, size);
    }
    if (censored > 0) {
        double fa = 0, fb = 0;
        for (int y = 0; y <= cutoff; ++y) {
            const double f = std::exp(negbin_log_pmf(y, mu, size));
            fa += f * size * (y - mu) / (size + mu);
            fb += f * size * dlogf_dsize(y, mu, size);
        }
        const double tail = negbin_upper_tail(cutoff, mu, size);
        ga -= static_cast<double>(censored) * fa / tail;
        gb -= static_cast<double>(censored) * fb / tail;
    }
    return {ga, gb};
}

}  // namespace

double NegBinRegressionFit::mean(int n_friends) const { return std::exp(intercept + log_ratio * n_friends); }

double ClassNeighborModel::mean_neighbors() const {
    double m = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) m += support[i] * probabilities[i];
    return m;
}

DegreeParams DegreeParams::defaults() {
    DegreeParams p;
    p.break_fit.intercept = std::log(4.5);
    p.break_fit.log_ratio = std::log(1.03);
    p.break_fit.dispersion = 2.0;
    p.break_fit.ci_ratio = {1.01, 1.04};
    p.lunch_fit.mean = 10.8;
    p.lunch_fit.dispersion = 1.5;
    p.lunch_fit.cutoff = 30;
    return p;
}

double DegreeParams::expected_daily_units(int n_friends, const ClassNeighborModel& classes) const {
    const double lunch_units = lunch_fit.mean * (1.0 + kMaxLunchDurationUnits) / 2.0;
    return kBreaksPerDay * break_fit.mean(n_friends) + lunch_units +
           classes.classes_per_day * classes.mean_neighbors() * kUnitsPerClass;
}

std::string to_json(const DegreeParams& p) {
    nlohmann::ordered_json j;
    j["intercept"] = p.break_fit.intercept;
    j["log_ratio"] = p.break_fit.log_ratio;
    j["dispersion"] = p.break_fit.dispersion;
    j["lunch_mean"] = p.lunch_fit.mean;
    j["lunch_dispersion"] = p.lunch_fit.dispersion;
    j["cutoff"] = p.lunch_fit.cutoff;
    j["ratio_ci"] = {p.break_fit.ci_ratio.lo, p.break_fit.ci_ratio.hi};
    return j.dump(2);
}

DegreeParams degree_params_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    DegreeParams p;
    p.break_fit.intercept = j.at("intercept").get<double>();
    p.break_fit.log_ratio = j.at("log_ratio").get<double>();
    p.break_fit.dispersion = j.at("dispersion").get<double>();
    p.lunch_fit.mean = j.at("lunch_mean").get<double>();
    p.lunch_fit.dispersion = j.at("lunch_dispersion").get<double>();
    p.lunch_fit.cutoff = j.at("cutoff").get<int>();
    if (j.contains("ratio_ci")) p.break_fit.ci_ratio = {j["ratio_ci"][0].get<double>(), j["ratio_ci"][1].get<double>()};
    if (!(p.break_fit.dispersion > 0 && p.lunch_fit.dispersion > 0 && p.lunch_fit.mean > 0 &&
          p.lunch_fit.cutoff >= 1))
        throw std::invalid_argument("degree parameters out of range");
    return p;
}

DegreeParams load_degree_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open parameter file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return degree_params_from_json(ss.str());
}

double break_log_likelihood(std::span<const int> friends, std::span<const int> counts, double intercept,
                            double log_ratio, double dispersion) {
    double ll = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k)
        ll += negbin_log_pmf(counts[k], std::exp(intercept + log_ratio * friends[k]), dispersion);
    return ll;
}

std::array<double, 3> break_gradient(std::span<const int> friends, std::span<const int> counts,
                                     double intercept, double log_ratio, double dispersion) {
    std::array<double, 3> g{};
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double x = friends[k];
        const double mu = std::exp(intercept + log_ratio * x);
        const double r = (counts[k] - mu) * dispersion / (dispersion + mu);
        g[0] += r;
        g[1] += r * x;
        g[2] += dlogf_dsize(counts[k], mu, dispersion);
    }
    return g;
}

NegBinRegressionFit fit_break_model(const SurveySample& survey, const FitOptions& options) {
    if (survey.size() < 10) throw FitError("break model needs at least 10 records", 0.0);
    const auto d = break_data(survey);
    const auto [mn, mx] = std::minmax_element(d.friends.begin(), d.friends.end());
    if (*mn == *mx) throw FitError("degenerate design: friend counts are all identical", 0.0);
    const double ybar =
        std::accumulate(d.counts.begin(), d.counts.end(), 0.0) / static_cast<double>(d.counts.size());
    if (ybar <= 0.0) throw FitError("degenerate response: all break counts are zero", 0.0);

    double var = 0.0;
    for (int y : d.counts) var += (y - ybar) * (y - ybar);
    var /= static_cast<double>(d.counts.size() - 1);
    double size = var > ybar ? std::clamp(ybar * ybar / (var - ybar), kMinDispersion, kMaxDispersion) : 1e6;
    double b0 = std::log(ybar), b1 = 0.0;

    const std::span<const int> fr(d.friends), ct(d.counts);
    double ll = -INFINITY;
    std::array<double, 3> info{};
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        info = update_coefficients(d, b0, b1, size);
        size = update_dispersion(d, b0, b1, size);
        const double next = break_log_likelihood(fr, ct, b0, b1, size);
        const bool done = std::abs(next - ll) < options.loglik_tolerance;
        ll = next;
        if (done) break;
    }
    info = update_coefficients(d, b0, b1, size);
    const auto g = break_gradient(fr, ct, b0, b1, size);
    // The dispersion may sit on its upper bound for under-dispersed data; its
    // score component vanishes there only asymptotically.
    const double g_size = size >= kMaxDispersion * 0.999 ? 0.0 : g[2];
    const double gnorm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g_size * g_size);
    if (iter >= options.max_iterations || !(gnorm < options.gradient_tolerance))
        throw FitError("break model did not converge (gradient norm " + std::to_string(gnorm) + ")", gnorm);

    NegBinRegressionFit fit;
    fit.intercept = b0;
    fit.log_ratio = b1;
    fit.dispersion = size;
    const double det = info[0] * info[2] - info[1] * info[1];
    fit.se_log_ratio = std::sqrt(info[0] / det);
    fit.ci_ratio = {std::exp(b1 - kZ975 * fit.se_log_ratio), std::exp(b1 + kZ975 * fit.se_log_ratio)};
    fit.log_likelihood = break_log_likelihood(fr, ct, b0, b1, size);
    fit.iterations = iter + 1;
    fit.gradient_norm = gnorm;
    return fit;
}

double censored_log_likelihood(std::span<const int> counts, int cutoff, double mean, double dispersion) {
    double ll = 0.0;
    std::size_t censored = 0;
    for (int y : counts) {
        if (y > cutoff)
            ++censored;
        else
            ll += negbin_log_pmf(y, mean, dispersion);
    }
    if (censored > 0) ll += static_cast<double>(censored) * std::log(negbin_upper_tail(cutoff, mean, dispersion));
    return ll;
}

CensoredNegBinFit fit_lunch_model(const SurveySample& survey, int cutoff, const FitOptions& options) {
    if (cutoff < 1) throw FitError("lunch cutoff must be at least 1", 0.0);
    if (survey.size() < 10) throw FitError("lunch model needs at least 10 records", 0.0);
    const auto counts = lunch_counts(survey);
    const auto n_censored = std::count_if(counts.begin(), counts.end(), [&](int y) { return y > cutoff; });
    if (static_cast<std::size_t>(n_censored) == counts.size())
        throw FitError("all lunch observations are censored", 0.0);

    double sum = 0.0, sq = 0.0;
    for (int y : counts) {
        const double v = std::min(y, cutoff + 1);
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(counts.size());
    const double mean0 = std::max(sum / n, 0.05);
    const double var0 = sq / n - mean0 * mean0;
    double a = std::log(mean0);
    double b = std::log(var0 > mean0 ? std::clamp(mean0 * mean0 / (var0 - mean0), 0.01, 1e6) : 100.0);
    const double b_max = std::log(kMaxDispersion), b_min = std::log(kMinDispersion);

    auto loglik = [&](double aa, double bb) { return censored_log_likelihood(counts, cutoff, std::exp(aa), std::exp(bb)); };
    auto grad = [&](double aa, double bb) { return censored_gradient(counts, cutoff, std::exp(aa), std::exp(bb)); };

    double ll = loglik(a, b);
    int iter = 0;
    std::array<double, 2> g = grad(a, b);
    for (; iter < options.max_iterations; ++iter) {
        // Newton with a finite-difference Hessian of the analytic score.
        const double h = 1e-5;
        auto ga_p = grad(a + h, b), ga_m = grad(a - h, b);
        auto gb_p = grad(a, b + h), gb_m = grad(a, b - h);
        const double haa = (ga_p[0] - ga_m[0]) / (2 * h);
        const double hbb = (gb_p[1] - gb_m[1]) / (2 * h);
        const double hab = 0.5 * ((ga_p[1] - ga_m[1]) + (gb_p[0] - gb_m[0])) / (2 * h);
        const double det = haa * hbb - hab * hab;
        double sa, sb;
        if (haa < 0 && det > 0) {
            sa = -(hbb * g[0] - hab * g[1]) / det;
            sb = -(-hab * g[0] + haa * g[1]) / det;
        } else {
            const double scale = 1.0 / (1.0 + std::hypot(g[0], g[1]));
            sa = g[0] * scale;
            sb = g[1] * scale;
        }
        const double len = std::hypot(sa, sb);
        if (len > 2.0) {
            sa *= 2.0 / len;
            sb *= 2.0 / len;
        }
        double step = 1.0;
        double na = a + sa, nb = std::clamp(b + sb, b_min, b_max);
        double nll = loglik(na, nb);
        while (step > 1e-10 && !(nll >= ll - 1e-12)) {
            step *= 0.5;
            na = a + step * sa;
            nb = std::clamp(b + step * sb, b_min, b_max);
            nll = loglik(na, nb);
        }
        const double improvement = nll - ll;
        a = na;
        b = nb;
        ll = nll;
        g = grad(a, b);
        const double gb_eff = b >= b_max - 1e-9 ? 0.0 : g[1];
        if (improvement < options.loglik_tolerance && std::hypot(g[0], gb_eff) < 1e-6 * std::max(1.0, n)) break;
    }
    const double gb_eff = b >= b_max - 1e-9 ? 0.0 : g[1];
    const double gnorm = std::hypot(g[0], gb_eff);
    if (iter >= options.max_iterations)
        throw FitError("lunch model did not converge (gradient norm " + std::to_string(gnorm) + ")", gnorm);

    CensoredNegBinFit fit;
    fit.mean = std::exp(a);
    fit.dispersion = std::exp(b);
    fit.cutoff = cutoff;
    fit.log_likelihood = ll;
    fit.iterations = iter + 1;
    return fit;
}

int sample_break_degree(const NegBinRegressionFit& fit, int n_friends, Rng& rng) {
    return sample_negbin(fit.mean(n_friends), fit.dispersion, rng);
}

int sample_daily_break_units(const NegBinRegressionFit& fit, int n_friends, Rng& rng) {
    int total = 0;
    for (int b = 0; b < kBreaksPerDay; ++b) total += sample_break_degree(fit, n_friends, rng);
    return total;
}

LunchDraw sample_lunch_units(const CensoredNegBinFit& fit, Rng& rng) {
    LunchDraw draw;
    draw.partners = sample_negbin(fit.mean, fit.dispersion, rng);
    std::uniform_int_distribution<int> duration(1, kMaxLunchDurationUnits);
    for (int p = 0; p < draw.partners; ++p) draw.units += duration(rng);
    return draw;
}

std::vector<ClassNeighborDraw> sample_class_neighbor_degrees(const ClassNeighborModel& model, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("class neighbor sampling needs n >= 1");
    std::discrete_distribution<int> pick(model.probabilities.begin(), model.probabilities.end());
    std::vector<ClassNeighborDraw> out(static_cast<std::size_t>(n));
    for (auto& student : out)
        for (int c = 0; c < kClassesPerDay; ++c)
            student[static_cast<std::size_t>(c)] =
                c < model.classes_per_day ? model.support[static_cast<std::size_t>(pick(rng))] : 0;
    return out;
}

std::vector<int> DegreeRealization::break_lunch_units() const {
    std::vector<int> out(break_units.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = break_units[i] + lunch_units[i];
    return out;
}

DegreeRealization sample_break_lunch_degrees(const DegreeParams& params, std::span<const int> friend_counts,
                                             Rng& rng) {
    DegreeRealization r;
    r.break_units.resize(friend_counts.size());
    r.lunch_units.resize(friend_counts.size());
    for (std::size_t i = 0; i < friend_counts.size(); ++i) {
        r.break_units[i] = sample_daily_break_units(params.break_fit, friend_counts[i], rng);
        r.lunch_units[i] = sample_lunch_units(params.lunch_fit, rng).units;
    }
    return r;
}

}  // namespace schoolnet
