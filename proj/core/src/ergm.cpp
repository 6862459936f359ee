#include "schoolnet/ergm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace schoolnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::array<std::string_view, term::count> kNames{
    "edges",
    "sociality.grade_8",
    "sociality.grade_9",
    "sociality.grade_10",
    "sociality.grade_11",
    "sociality.grade_12",
    "sociality.black",
    "sociality.hispanic",
    "sociality.asian",
    "sociality.mixed",
    "sociality.race_missing",
    "sociality.male",
    "mixing.school",
    "mixing.male",
    "mixing.female",
    "mixing.grade_7",
    "mixing.grade_8",
    "mixing.grade_9",
    "mixing.grade_10",
    "mixing.grade_11",
    "mixing.grade_12",
    "mixing.white",
    "mixing.black",
    "mixing.hispanic",
    "mixing.asian",
    "mixing.mixed",
    "mixing.race_missing",
};

constexpr int kTypeCount = kGradeCount * kRaceCount * 2 * 2;

int type_of(const Student& s) {
    return ((s.grade_index() * kRaceCount + static_cast<int>(s.race)) * 2 + static_cast<int>(s.sex)) * 2 +
           static_cast<int>(s.school);
}

double logistic(double x) {
    if (x == -kInf) return 0.0;
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

nlohmann::json number_to_json(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    return v;
}

double number_from_json(const nlohmann::json& j, std::string_view key) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "-Inf") return -kInf;
        if (s == "Inf") return kInf;
        if (s == "NaN") return kNaN;
    }
    throw std::invalid_argument("coefficient " + std::string(key) + " is not a number");
}

}  // namespace

std::string_view term_name(int k) {
    if (k < 0 || k >= term::count) throw std::out_of_range("term index out of range");
    return kNames[static_cast<std::size_t>(k)];
}

int term_index(std::string_view name) {
    for (int k = 0; k < term::count; ++k)
        if (kNames[static_cast<std::size_t>(k)] == name) return k;
    throw std::invalid_argument("unknown term '" + std::string(name) + "'");
}

ErgmCoefficients ErgmCoefficients::defaults() {
    ErgmCoefficients c;
    c.theta = {-10.91, 0.54, 0.24, 0.57, 0.45, -0.01, 0.12, 0.81, -0.19, 0.71, 0.58, 0.3, 1.73, 1.05,
               1.18,   2.3,  1.51, 1.88, 1.17, 1.61,  2.71, 1.03, 3.19,  -0.5, 2.94, -0.58, -kInf};
    return c;
}

std::string to_json(const ErgmCoefficients& coef) {
    nlohmann::ordered_json j;
    j["edges"] = number_to_json(coef[term::edges]);
    for (int k = 1; k < term::count; ++k) {
        const auto name = term_name(k);
        const auto dot = name.find('.');
        j[std::string(name.substr(0, dot))][std::string(name.substr(dot + 1))] = number_to_json(coef[k]);
    }
    return j.dump(2) + "\n";
}

ErgmCoefficients ergm_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("coefficient document must be an object");
    ErgmCoefficients c;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "edges") {
            c[term::edges] = number_from_json(it.value(), "edges");
        } else if (it.key() == "sociality" || it.key() == "mixing") {
            for (auto inner = it.value().begin(); inner != it.value().end(); ++inner) {
                const auto name = it.key() + "." + inner.key();
                c[term_index(name)] = number_from_json(inner.value(), name);
            }
        } else {
            throw std::invalid_argument("unknown coefficient group '" + it.key() + "'");
        }
    }
    for (int k = 0; k < term::count; ++k)
        if (c[k] == -kInf && k < term::school_match)
            throw std::invalid_argument(std::string(term_name(k)) + ": -Inf is only allowed for mixing terms");
    return c;
}

ErgmCoefficients load_ergm(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ergm_from_json(ss.str());
}

std::array<double, term::count> dyad_statistics(const Student& a, const Student& b) {
    std::array<double, term::count> x{};
    x[term::edges] = 1.0;
    for (const Student* s : {&a, &b}) {
        if (s->grade_index() > 0) x[static_cast<std::size_t>(term::grade_sociality + s->grade_index() - 1)] += 1.0;
        if (s->race != Race::white) x[static_cast<std::size_t>(term::race_sociality + static_cast<int>(s->race) - 1)] += 1.0;
        if (s->sex == Sex::male) x[term::male_sociality] += 1.0;
    }
    if (a.school == b.school) x[term::school_match] = 1.0;
    if (a.sex == b.sex) x[a.sex == Sex::male ? term::male_match : term::female_match] = 1.0;
    if (a.grade == b.grade) x[static_cast<std::size_t>(term::grade_match + a.grade_index())] = 1.0;
    if (a.race == b.race) x[static_cast<std::size_t>(term::race_match + static_cast<int>(a.race))] = 1.0;
    return x;
}

double dyad_logit(const Student& a, const Student& b, const ErgmCoefficients& coef) {
    const auto x = dyad_statistics(a, b);
    double eta = 0.0;
    for (int k = 0; k < term::count; ++k)
        if (x[static_cast<std::size_t>(k)] != 0.0) eta += coef[k] * x[static_cast<std::size_t>(k)];
    return eta;
}

double dyad_probability(const Student& a, const Student& b, const ErgmCoefficients& coef) {
    return logistic(dyad_logit(a, b, coef));
}

FriendshipNetwork simulate_friendship(const Roster& roster, const ErgmCoefficients& coef, Rng& rng) {
    const int n = static_cast<int>(roster.size());
    if (n < 2) throw std::invalid_argument("friendship simulation needs n >= 2");
    // Probabilities depend only on the endpoint types.
    std::vector<double> prob(static_cast<std::size_t>(kTypeCount * kTypeCount), -1.0);
    std::vector<int> type(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) type[static_cast<std::size_t>(i)] = type_of(roster[static_cast<std::size_t>(i)]);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        const auto ti = static_cast<std::size_t>(type[static_cast<std::size_t>(i)]) * kTypeCount;
        for (int j = i + 1; j < n; ++j) {
            double& p = prob[ti + static_cast<std::size_t>(type[static_cast<std::size_t>(j)])];
            if (p < 0.0) p = dyad_probability(roster[static_cast<std::size_t>(i)], roster[static_cast<std::size_t>(j)], coef);
            if (uniform01(rng) < p) edges.emplace_back(i, j);
        }
    }
    return FriendshipNetwork(n, std::move(edges));
}

std::vector<DyadCell> dyad_cells(const Roster& roster, const FriendshipNetwork* network) {
    const int n = static_cast<int>(roster.size());
    if (network && network->n() != n) throw std::invalid_argument("network and roster sizes differ");
    std::vector<std::int64_t> count(kTypeCount, 0);
    std::vector<int> example(kTypeCount, -1);
    for (int i = 0; i < n; ++i) {
        const int t = type_of(roster[static_cast<std::size_t>(i)]);
        ++count[static_cast<std::size_t>(t)];
        if (example[static_cast<std::size_t>(t)] < 0) example[static_cast<std::size_t>(t)] = i;
    }
    std::vector<int> index(static_cast<std::size_t>(kTypeCount * kTypeCount), -1);
    std::vector<DyadCell> cells;
    for (int a = 0; a < kTypeCount; ++a)
        for (int b = a; b < kTypeCount; ++b) {
            const auto na = count[static_cast<std::size_t>(a)];
            const auto nb = count[static_cast<std::size_t>(b)];
            const std::int64_t dyads = a == b ? na * (na - 1) / 2 : na * nb;
            if (dyads == 0) continue;
            index[static_cast<std::size_t>(a * kTypeCount + b)] = static_cast<int>(cells.size());
            cells.push_back({a, b, dyads, 0, roster[static_cast<std::size_t>(example[static_cast<std::size_t>(a)])],
                             roster[static_cast<std::size_t>(example[static_cast<std::size_t>(b)])]});
        }
    if (network) {
        for (auto [i, j] : network->edges()) {
            int a = type_of(roster[static_cast<std::size_t>(i)]);
            int b = type_of(roster[static_cast<std::size_t>(j)]);
            if (a > b) std::swap(a, b);
            ++cells[static_cast<std::size_t>(index[static_cast<std::size_t>(a * kTypeCount + b)])].edges;
        }
    }
    return cells;
}

double expected_mean_degree(const Roster& roster, const ErgmCoefficients& coef) {
    double total = 0.0;
    for (const auto& c : dyad_cells(roster))
        total += static_cast<double>(c.dyads) * dyad_probability(c.example_a, c.example_b, coef);
    return 2.0 * total / static_cast<double>(roster.size());
}

ErgmCoefficients calibrate_edges(const Roster& roster, const ErgmCoefficients& coef, double target_mean_degree) {
    const auto cells = dyad_cells(roster);
    std::vector<double> offset;
    std::vector<double> weight;
    for (const auto& c : cells) {
        const double eta = dyad_logit(c.example_a, c.example_b, coef) - coef[term::edges];
        if (eta == -kInf) continue;
        offset.push_back(eta);
        weight.push_back(static_cast<double>(c.dyads));
    }
    const double n = static_cast<double>(roster.size());
    const double max_degree = 2.0 * std::accumulate(weight.begin(), weight.end(), 0.0) / n;
    if (!(target_mean_degree > 0.0) || target_mean_degree >= max_degree)
        throw std::invalid_argument("target mean degree outside the attainable range (0, " + std::to_string(max_degree) + ")");
    auto mean_degree = [&](double edges) {
        double total = 0.0;
        for (std::size_t k = 0; k < offset.size(); ++k) total += weight[k] * logistic(edges + offset[k]);
        return 2.0 * total / n;
    };
    double lo = -100.0, hi = 100.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_degree(mid) < target_mean_degree ? lo : hi) = mid;
    }
    ErgmCoefficients out = coef;
    out[term::edges] = 0.5 * (lo + hi);
    return out;
}

ErgmFit fit_ergm(const FriendshipNetwork& network, const Roster& roster, int max_iterations) {
    const auto cells = dyad_cells(roster, &network);
    std::int64_t total_edges = 0, total_dyads = 0;
    for (const auto& c : cells) {
        total_edges += c.edges;
        total_dyads += c.dyads;
    }
    if (total_edges == 0) throw ErgmFitError("network has no edges");
    if (total_edges == total_dyads) throw ErgmFitError("network is complete");

    const auto rows = static_cast<Eigen::Index>(cells.size());
    Eigen::MatrixXd x(rows, term::count);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto s = dyad_statistics(cells[static_cast<std::size_t>(r)].example_a, cells[static_cast<std::size_t>(r)].example_b);
        for (int k = 0; k < term::count; ++k) x(r, k) = s[static_cast<std::size_t>(k)];
    }

    ErgmFit fit;
    fit.status.fill(TermStatus::estimated);
    std::vector<bool> excluded(cells.size(), false);
    for (int k = term::school_match; k < term::count; ++k) {
        std::int64_t dyads = 0, edges = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            if (x(r, k) != 0.0) {
                dyads += cells[static_cast<std::size_t>(r)].dyads;
                edges += cells[static_cast<std::size_t>(r)].edges;
            }
        if (dyads == 0) {
            fit.status[static_cast<std::size_t>(k)] = TermStatus::not_identified;
        } else if (edges == 0) {
            fit.status[static_cast<std::size_t>(k)] = TermStatus::negative_infinity;
            for (Eigen::Index r = 0; r < rows; ++r)
                if (x(r, k) != 0.0) excluded[static_cast<std::size_t>(r)] = true;
        } else if (edges == dyads) {
            throw ErgmFitError("separation in term " + std::string(term_name(k)) + ": every matched dyad is an edge");
        }
    }

    std::vector<Eigen::Index> used_rows;
    for (Eigen::Index r = 0; r < rows; ++r)
        if (!excluded[static_cast<std::size_t>(r)]) used_rows.push_back(r);
    const auto m = static_cast<Eigen::Index>(used_rows.size());
    Eigen::VectorXd y(m), d(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto& c = cells[static_cast<std::size_t>(used_rows[static_cast<std::size_t>(r)])];
        y(r) = static_cast<double>(c.edges);
        d(r) = static_cast<double>(c.dyads);
    }
    if (y.sum() == 0.0) throw ErgmFitError("no edges outside -Inf matching levels");

    // Greedy rank test in term order on the dyad-weighted design.
    std::vector<int> kept;
    const Eigen::VectorXd sqrt_d = d.cwiseSqrt();
    for (int k = 0; k < term::count; ++k) {
        if (fit.status[static_cast<std::size_t>(k)] != TermStatus::estimated) continue;
        Eigen::MatrixXd trial(m, static_cast<Eigen::Index>(kept.size()) + 1);
        for (std::size_t c = 0; c <= kept.size(); ++c) {
            const int col = c < kept.size() ? kept[c] : k;
            for (Eigen::Index r = 0; r < m; ++r) trial(r, static_cast<Eigen::Index>(c)) = x(used_rows[static_cast<std::size_t>(r)], col) * sqrt_d(r);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
        qr.setThreshold(1e-10);
        if (qr.rank() == trial.cols())
            kept.push_back(k);
        else
            fit.status[static_cast<std::size_t>(k)] = TermStatus::not_identified;
    }

    const auto p = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd xk(m, p);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < p; ++c) xk(r, c) = x(used_rows[static_cast<std::size_t>(r)], kept[static_cast<std::size_t>(c)]);

    // Columns with no edges (or no non-edges) anywhere they are nonzero diverge.
    for (Eigen::Index c = 1; c < p; ++c) {
        const double on_edges = (xk.col(c).array() * y.array()).sum();
        const double on_non_edges = (xk.col(c).array() * (d - y).array()).sum();
        if (on_edges == 0.0 || on_non_edges == 0.0)
            throw ErgmFitError("separation in term " + std::string(term_name(kept[static_cast<std::size_t>(c)])));
    }

    auto log_likelihood = [&](const Eigen::VectorXd& beta) {
        const Eigen::VectorXd eta = xk * beta;
        double ll = 0.0;
        for (Eigen::Index r = 0; r < m; ++r) ll += y(r) * eta(r) - d(r) * softplus(eta(r));
        return ll;
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    const double density = y.sum() / d.sum();
    beta(0) = std::log(density / (1.0 - density));
    double ll = log_likelihood(beta);
    Eigen::MatrixXd hessian(p, p);
    bool converged = false;
    for (fit.iterations = 1; fit.iterations <= max_iterations; ++fit.iterations) {
        const Eigen::VectorXd eta = xk * beta;
        Eigen::VectorXd resid(m), w(m);
        for (Eigen::Index r = 0; r < m; ++r) {
            const double mu = logistic(eta(r));
            resid(r) = y(r) - d(r) * mu;
            w(r) = d(r) * mu * (1.0 - mu);
        }
        const Eigen::VectorXd grad = xk.transpose() * resid;
        hessian = xk.transpose() * w.asDiagonal() * xk;
        const Eigen::VectorXd step = hessian.ldlt().solve(grad);
        double t = 1.0;
        Eigen::VectorXd next = beta + step;
        double next_ll = log_likelihood(next);
        while (next_ll < ll - 1e-12 * std::abs(ll) && t > 1e-10) {
            t *= 0.5;
            next = beta + t * step;
            next_ll = log_likelihood(next);
        }
        const double change = (next - beta).cwiseAbs().maxCoeff();
        const double gain = next_ll - ll;
        beta = next;
        ll = next_ll;
        if (change < 1e-9 || (gain >= 0 && gain < 1e-12 * std::max(1.0, std::abs(ll)))) {
            converged = true;
            break;
        }
    }
    if (!converged) throw ErgmFitError("logistic regression did not converge");
    for (Eigen::Index c = 0; c < p; ++c)
        if (std::abs(beta(c)) > 30.0)
            throw ErgmFitError("separation in term " + std::string(term_name(kept[static_cast<std::size_t>(c)])));

    {
        const Eigen::VectorXd eta = xk * beta;
        Eigen::VectorXd w(m);
        for (Eigen::Index r = 0; r < m; ++r) {
            const double mu = logistic(eta(r));
            w(r) = d(r) * mu * (1.0 - mu);
        }
        hessian = xk.transpose() * w.asDiagonal() * xk;
    }
    const Eigen::MatrixXd covariance = hessian.inverse();
    for (int k = 0; k < term::count; ++k) {
        switch (fit.status[static_cast<std::size_t>(k)]) {
            case TermStatus::negative_infinity: fit.coef[k] = -kInf; break;
            case TermStatus::not_identified: fit.coef[k] = kNaN; break;
            case TermStatus::estimated: break;
        }
    }
    for (Eigen::Index c = 0; c < p; ++c) {
        const int k = kept[static_cast<std::size_t>(c)];
        fit.coef[k] = beta(c);
        fit.standard_error[static_cast<std::size_t>(k)] = std::sqrt(covariance(c, c));
    }
    fit.log_likelihood = ll;
    return fit;
}

ErgmCoefficients identified_coefficients(const Roster& roster, const ErgmCoefficients& truth, const ErgmFit& fit) {
    std::vector<int> kept;
    for (int k = 0; k < term::count; ++k)
        if (fit.estimated(k)) kept.push_back(k);
    std::vector<std::pair<std::array<double, term::count>, double>> rows;
    std::vector<double> weights;
    for (const auto& c : dyad_cells(roster)) {
        const auto s = dyad_statistics(c.example_a, c.example_b);
        const double eta = dyad_logit(c.example_a, c.example_b, truth);
        bool skip = !std::isfinite(eta);
        for (int k = 0; k < term::count; ++k)
            if (fit.status[static_cast<std::size_t>(k)] == TermStatus::negative_infinity && s[static_cast<std::size_t>(k)] != 0.0) skip = true;
        if (skip) continue;
        rows.emplace_back(s, eta);
        weights.push_back(std::sqrt(static_cast<double>(c.dyads)));
    }
    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kept.size()));
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < kept.size(); ++c)
            a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].first[static_cast<std::size_t>(kept[c])] * weights[r];
        b(static_cast<Eigen::Index>(r)) = rows[r].second * weights[r];
    }
    const Eigen::VectorXd beta = a.colPivHouseholderQr().solve(b);
    ErgmCoefficients out;
    for (int k = 0; k < term::count; ++k) out[k] = fit.coef[k];
    for (std::size_t c = 0; c < kept.size(); ++c) out[kept[c]] = beta(static_cast<Eigen::Index>(c));
    return out;
}

}  // namespace schoolnet
