#include "schoolnet/epidemic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace schoolnet {

namespace {

void check_pmf(std::span<const double> pmf, const char* what) {
    double total = 0.0;
    for (double p : pmf) {
        if (!(p >= 0.0)) throw std::invalid_argument(std::string(what) + " has a negative entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + " does not sum to 1");
}

template <std::size_t N>
int draw_index(const std::array<double, N>& pmf, Rng& rng) {
    double u = uniform01(rng);
    for (std::size_t k = 0; k + 1 < N; ++k) {
        if (u < pmf[k]) return static_cast<int>(k);
        u -= pmf[k];
    }
    return static_cast<int>(N - 1);
}

}  // namespace

void NaturalHistoryParams::validate() const {
    check_pmf(incubation_pmf, "incubation pmf");
    check_pmf(withdrawal_pmf, "withdrawal pmf");
    if (symptomatic_prob < 0.0 || symptomatic_prob > 1.0) throw std::invalid_argument("symptomatic probability outside [0,1]");
    if (symptomatic_multiplier < 0.0) throw std::invalid_argument("negative symptomatic multiplier");
    if (mean_unit_transmission < 0.0 || mean_unit_transmission >= 1.0)
        throw std::invalid_argument("mean unit transmission outside [0,1)");
}

std::vector<ViralLoadCurve> default_viral_load_curves() {
    struct Shape {
        int peak;
        double rise;
        double decay;
    };
    constexpr std::array<Shape, 6> shapes{{{1, 0.0, 0.9}, {1, 0.0, 0.6}, {2, 1.2, 0.9}, {2, 0.8, 0.6}, {3, 1.0, 0.9}, {3, 0.6, 0.6}}};
    std::vector<ViralLoadCurve> curves;
    for (const auto& s : shapes) {
        ViralLoadCurve c{};
        for (int d = 1; d <= kInfectiousDays; ++d)
            c[static_cast<std::size_t>(d - 1)] = d < s.peak ? std::exp(-s.rise * (s.peak - d)) : std::exp(-s.decay * (d - s.peak));
        const double mean = std::accumulate(c.begin(), c.end(), 0.0) / kInfectiousDays;
        for (double& v : c) v /= mean;
        curves.push_back(c);
    }
    return curves;
}

std::vector<ViralLoadCurve> parse_viral_load_curves(std::istream& in) {
    std::vector<ViralLoadCurve> curves;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::vector<double> values;
        double v;
        while (ss >> v) values.push_back(v);
        if (!ss.eof()) throw std::runtime_error("line " + std::to_string(line_no) + ": not a number");
        if (values.empty()) continue;
        if (values.size() != kInfectiousDays)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 6 loads, got " + std::to_string(values.size()));
        ViralLoadCurve c{};
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (!(values[k] >= 0.0)) throw std::runtime_error("line " + std::to_string(line_no) + ": negative load");
            c[k] = values[k];
        }
        if (std::all_of(c.begin(), c.end(), [](double x) { return x == 0.0; }))
            throw std::runtime_error("line " + std::to_string(line_no) + ": all-zero curve");
        curves.push_back(c);
    }
    if (curves.empty()) throw std::runtime_error("no viral load curves");
    return curves;
}

std::vector<ViralLoadCurve> load_viral_load_curves(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return parse_viral_load_curves(in);
}

void write_viral_load_curves(std::ostream& out, std::span<const ViralLoadCurve> curves) {
    const auto flags = out.flags();
    const auto precision = out.precision();
    out << std::setprecision(17);
    for (const auto& c : curves) {
        for (std::size_t k = 0; k < c.size(); ++k) out << (k ? " " : "") << c[k];
        out << '\n';
    }
    out.flags(flags);
    out.precision(precision);
}

PersonCourse sample_course(const NaturalHistoryParams& params, int curve_count, int day, Rng& rng,
                           double symptomatic_factor) {
    PersonCourse c;
    c.infection_day = day;
    c.incubation = 1 + draw_index(params.incubation_pmf, rng);
    c.symptomatic = uniform01(rng) < params.symptomatic_prob * symptomatic_factor;
    c.curve_index = std::uniform_int_distribution<int>(0, curve_count - 1)(rng);
    if (c.symptomatic) {
        const int w = draw_index(params.withdrawal_pmf, rng);
        c.withdrawal_day = w < 3 ? w + 1 : kNeverWithdraw;
    }
    return c;
}

double calibrate_scale(const NaturalHistoryParams& params, std::span<const ViralLoadCurve> curves) {
    if (curves.empty()) throw std::invalid_argument("no viral load curves");
    double total = 0.0;
    for (const auto& c : curves) total += std::accumulate(c.begin(), c.end(), 0.0);
    const double mean_load = total / static_cast<double>(curves.size() * kInfectiousDays);
    if (mean_load <= 0.0) throw std::invalid_argument("mean viral load is zero");
    const double mean_multiplier =
        params.symptomatic_prob * params.symptomatic_multiplier + (1.0 - params.symptomatic_prob);
    return params.mean_unit_transmission / (mean_load * mean_multiplier);
}

double infectiousness(const PersonCourse& course, int day, std::span<const ViralLoadCurve> curves, double scale,
                      double symptomatic_multiplier, bool treated, double ave_i) {
    const int k = day - course.onset_day();
    if (k < 0 || k >= kInfectiousDays) return 0.0;
    double p = scale * curves[static_cast<std::size_t>(course.curve_index)][static_cast<std::size_t>(k)];
    if (course.symptomatic) p *= symptomatic_multiplier;
    if (treated) p *= 1.0 - ave_i;
    return std::clamp(p, 0.0, 1.0);
}

std::string_view to_string(InterventionKind k) {
    switch (k) {
        case InterventionKind::none: return "none";
        case InterventionKind::tap: return "tap";
        case InterventionKind::grade_closure: return "grade_closure";
    }
    return "unknown";
}

InterventionKind parse_intervention(std::string_view s) {
    if (s == "none") return InterventionKind::none;
    if (s == "tap") return InterventionKind::tap;
    if (s == "grade_closure") return InterventionKind::grade_closure;
    throw std::invalid_argument("unknown intervention '" + std::string(s) + "'");
}

void InterventionConfig::validate() const {
    for (double e : {ave_s, ave_i, ave_p})
        if (e < 0.0 || e >= 1.0) throw std::invalid_argument("antiviral efficacy outside [0,1)");
    if (treatment_days < 0 || prophylaxis_days < 0) throw std::invalid_argument("negative antiviral course");
    if (!(reporting_fraction > 0.0 && reporting_fraction <= 1.0)) throw std::invalid_argument("reporting fraction outside (0,1]");
}

EpidemicState::EpidemicState(int n)
    : status(static_cast<std::size_t>(n), Status::susceptible),
      course(static_cast<std::size_t>(n)),
      withdrawn(static_cast<std::size_t>(n), 0),
      treatment_left(static_cast<std::size_t>(n), 0),
      prophylaxis_left(static_cast<std::size_t>(n), 0),
      pathogenicity_applied(static_cast<std::size_t>(n), 0),
      log_escape(static_cast<std::size_t>(n), 0.0) {}

std::optional<int> peak_day(std::span<const int> counts, int first_day) {
    const auto it = std::max_element(counts.begin(), counts.end());
    if (it == counts.end() || *it == 0) return std::nullopt;
    return first_day + static_cast<int>(it - counts.begin());
}

void write_trajectory_csv(std::ostream& out, std::span<const DayRecord> trajectory) {
    out << "day,susceptible,latent,infectious,immune,withdrawn,new_infections\n";
    for (const auto& r : trajectory)
        out << r.day << ',' << r.susceptible << ',' << r.latent << ',' << r.infectious << ',' << r.immune << ','
            << r.withdrawn << ',' << r.new_infections << '\n';
}

EpidemicModel::EpidemicModel(const Roster& roster, NaturalHistoryParams params, std::vector<ViralLoadCurve> curves,
                             InterventionConfig intervention)
    : params_(params), curves_(std::move(curves)), intervention_(intervention) {
    params_.validate();
    intervention_.validate();
    grade_.reserve(roster.size());
    for (const auto& s : roster.students()) grade_.push_back(s.grade_index());
    scale_ = calibrate_scale(params_, curves_);
}

void EpidemicModel::infect(EpidemicState& state, int student, int day, Rng& rng) const {
    const auto j = static_cast<std::size_t>(student);
    if (state.status[j] != Status::susceptible) throw std::logic_error("infecting a non-susceptible student");
    double factor = 1.0;
    if (state.prophylaxis_left[j] > 0 || state.treatment_left[j] > 0) {
        factor = 1.0 - intervention_.ave_p;
        state.pathogenicity_applied[j] = 1;
    }
    state.course[j] = sample_course(params_, static_cast<int>(curves_.size()), day, rng, factor);
    state.status[j] = Status::latent;
    ++state.latent;
    ++state.cumulative;
    ++state.new_today;
}

double EpidemicModel::unit_probability(const EpidemicState& state, int i, int day) const {
    const auto k = static_cast<std::size_t>(i);
    if (state.status[k] != Status::infectious || state.withdrawn[k] || state.closed[static_cast<std::size_t>(grade_[k])])
        return 0.0;
    return infectiousness(state.course[k], day, curves_, scale_, params_.symptomatic_multiplier,
                          state.treatment_left[k] > 0, intervention_.ave_i);
}

namespace {

/// Accumulates log escape probabilities into state.log_escape / state.touched.
void accumulate_exposure(const EpidemicModel& model, EpidemicState& state, const ContactNetwork& network, int day,
                         std::span<const int> grade, double ave_s) {
    const int n = state.n();
    for (int i = 0; i < n; ++i) {
        if (state.status[static_cast<std::size_t>(i)] != Status::infectious) continue;
        const double p = model.unit_probability(state, i, day);
        if (p <= 0.0) continue;
        const double log_q = std::log1p(-p);
        const double log_q_prophylaxed = std::log1p(-p * (1.0 - ave_s));
        for (const auto& c : network.contacts(i)) {
            const auto j = static_cast<std::size_t>(c.node);
            if (state.status[j] != Status::susceptible || state.closed[static_cast<std::size_t>(grade[j])]) continue;
            if (state.log_escape[j] == 0.0) state.touched.push_back(c.node);
            state.log_escape[j] += c.units * (state.prophylaxis_left[j] > 0 ? log_q_prophylaxed : log_q);
        }
    }
    std::sort(state.touched.begin(), state.touched.end());
    state.touched.erase(std::unique(state.touched.begin(), state.touched.end()), state.touched.end());
}

}  // namespace

std::vector<std::pair<int, double>> EpidemicModel::infection_probabilities(const EpidemicState& state,
                                                                           const ContactNetwork& network, int day) const {
    EpidemicState scratch = state;
    scratch.touched.clear();
    std::fill(scratch.log_escape.begin(), scratch.log_escape.end(), 0.0);
    accumulate_exposure(*this, scratch, network, day, grade_, intervention_.ave_s);
    std::vector<std::pair<int, double>> out;
    for (int j : scratch.touched) out.emplace_back(j, -std::expm1(scratch.log_escape[static_cast<std::size_t>(j)]));
    return out;
}

std::vector<int> EpidemicModel::transmission_step(EpidemicState& state, const ContactNetwork& network, int day,
                                                  Rng& rng) const {
    if (network.n() != n()) throw std::invalid_argument("network does not match roster");
    state.touched.clear();
    accumulate_exposure(*this, state, network, day, grade_, intervention_.ave_s);
    std::vector<int> infected;
    for (int j : state.touched) {
        double& le = state.log_escape[static_cast<std::size_t>(j)];
        const double prob = -std::expm1(le);
        le = 0.0;
        if (uniform01(rng) < prob) {
            infect(state, j, day, rng);
            infected.push_back(j);
        }
    }
    state.touched.clear();
    return infected;
}

void EpidemicModel::apply_tap(EpidemicState& state, std::span<const int> onsets, const ContactNetwork& onset_network,
                              Rng& rng) const {
    const double keep_symptoms = 1.0 - intervention_.ave_p;
    for (int s : onsets) {
        state.treatment_left[static_cast<std::size_t>(s)] = intervention_.treatment_days;
        for (const auto& c : onset_network.contacts(s)) {
            if (intervention_.reporting_fraction < 1.0 && uniform01(rng) >= intervention_.reporting_fraction) continue;
            const auto j = static_cast<std::size_t>(c.node);
            state.prophylaxis_left[j] = intervention_.prophylaxis_days;
            if (state.status[j] == Status::latent && !state.pathogenicity_applied[j]) {
                state.pathogenicity_applied[j] = 1;
                auto& course = state.course[j];
                if (course.symptomatic && uniform01(rng) >= keep_symptoms) {
                    course.symptomatic = false;
                    course.withdrawal_day = kNeverWithdraw;
                }
            }
        }
    }
}

void EpidemicModel::apply_grade_closure(EpidemicState& state, std::span<const int> onsets) const {
    for (int s : onsets) state.closed[static_cast<std::size_t>(grade_[static_cast<std::size_t>(s)])] = true;
}

void EpidemicModel::transitions(EpidemicState& state) const {
    const int t = state.day;
    state.onsets_yesterday.swap(state.onsets_today);
    state.onsets_today.clear();
    const int n = state.n();
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        auto& st = state.status[k];
        if (st == Status::latent && t >= state.course[k].onset_day()) {
            st = Status::infectious;
            --state.latent;
            ++state.infectious;
            if (state.course[k].symptomatic) state.onsets_today.push_back(i);
        }
        if (st == Status::infectious) {
            const auto& c = state.course[k];
            if (t >= c.immune_day()) {
                st = Status::immune;
                --state.infectious;
                ++state.immune;
                state.withdrawn[k] = 0;
            } else if (c.symptomatic && c.withdrawal_day != kNeverWithdraw && t >= c.onset_day() + c.withdrawal_day - 1) {
                state.withdrawn[k] = 1;
            }
        }
    }
}

void EpidemicModel::advance_day(EpidemicState& state, const DayNetworkSource& plan, Rng& rng) const {
    const int t = state.day;
    state.new_today = 0;
    transitions(state);
    if (!state.onsets_yesterday.empty()) {
        if (intervention_.kind == InterventionKind::tap)
            apply_tap(state, state.onsets_yesterday, *plan.network(t - 1), rng);
        else if (intervention_.kind == InterventionKind::grade_closure)
            apply_grade_closure(state, state.onsets_yesterday);
    }
    if (state.infectious > 0) transmission_step(state, *plan.network(t), t, rng);
    int withdrawn = 0;
    for (int i = 0; i < state.n(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (state.treatment_left[k] > 0) --state.treatment_left[k];
        if (state.prophylaxis_left[k] > 0) --state.prophylaxis_left[k];
        withdrawn += state.withdrawn[k];
    }
    const int susceptible = state.n() - state.latent - state.infectious - state.immune;
    state.trajectory.push_back({t, susceptible, state.latent, state.infectious, state.immune, withdrawn, state.new_today});
    state.day = t + 1;
}

OutbreakResult EpidemicModel::run(const DayNetworkSource& plan, std::uint64_t seed) const {
    Rng rng(seed);
    const int index_case = std::uniform_int_distribution<int>(0, n() - 1)(rng);
    return run_from(plan, index_case, rng);
}

OutbreakResult EpidemicModel::run_from(const DayNetworkSource& plan, int index_case, Rng& rng) const {
    if (plan.n() != n()) throw std::invalid_argument("plan does not match roster");
    EpidemicState state(n());
    infect(state, index_case, 0, rng);
    state.new_today = 0;
    do {
        advance_day(state, plan, rng);
    } while (state.active() > 0);
    OutbreakResult result;
    result.trajectory = std::move(state.trajectory);
    result.summary.final_size = static_cast<int>(state.cumulative);
    result.summary.epidemic = result.summary.final_size > kEpidemicThreshold;
    std::vector<int> counts;
    counts.reserve(result.trajectory.size());
    for (const auto& r : result.trajectory) counts.push_back(r.infectious);
    result.summary.peak_date = peak_day(counts, result.trajectory.front().day);
    return result;
}

}  // namespace schoolnet
