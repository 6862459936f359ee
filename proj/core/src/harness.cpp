#include "schoolnet/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"
#include "schoolnet/parallel.hpp"

namespace schoolnet {

using nlohmann::ordered_json;

void ScenarioSpec::validate() const {
    intervention.validate();
    if (replicates < 1) throw std::invalid_argument("replicates must be at least 1");
    if (bootstrap_replicates < 1) throw std::invalid_argument("bootstrap replicates must be at least 1");
    if (season_length < 1) throw std::invalid_argument("season length must be positive");
    for (double p : p_grid)
        if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("grid value outside (0,1)");
}

std::string ScenarioSpec::intervention_label() const {
    std::string label(to_string(intervention.kind));
    if (intervention.kind == InterventionKind::tap && intervention.reporting_fraction < 1.0) {
        std::ostringstream ss;
        ss << label << '_' << intervention.reporting_fraction;
        label = ss.str();
    }
    return label;
}

namespace {

ordered_json spec_to_json(const ScenarioSpec& s) {
    ordered_json j;
    j["name"] = s.name;
    j["variant"] = std::string(to_string(s.variant));
    ordered_json iv;
    iv["kind"] = std::string(to_string(s.intervention.kind));
    iv["ave_s"] = s.intervention.ave_s;
    iv["ave_i"] = s.intervention.ave_i;
    iv["ave_p"] = s.intervention.ave_p;
    iv["treatment_days"] = s.intervention.treatment_days;
    iv["prophylaxis_days"] = s.intervention.prophylaxis_days;
    iv["reporting_fraction"] = s.intervention.reporting_fraction;
    j["intervention"] = iv;
    j["p_grid"] = s.p_grid;
    j["replicates"] = s.replicates;
    j["bootstrap_replicates"] = s.bootstrap_replicates;
    j["season_length"] = s.season_length;
    j["seed"] = s.seed;
    return j;
}

ScenarioSpec spec_from_json(const nlohmann::json& j) {
    ScenarioSpec s;
    s.name = j.value("name", std::string{});
    s.variant = parse_variant(j.value("variant", std::string("static")));
    if (j.contains("intervention")) {
        const auto& iv = j.at("intervention");
        if (iv.is_string()) {
            s.intervention.kind = parse_intervention(iv.get<std::string>());
        } else {
            s.intervention.kind = parse_intervention(iv.value("kind", std::string("none")));
            s.intervention.ave_s = iv.value("ave_s", s.intervention.ave_s);
            s.intervention.ave_i = iv.value("ave_i", s.intervention.ave_i);
            s.intervention.ave_p = iv.value("ave_p", s.intervention.ave_p);
            s.intervention.treatment_days = iv.value("treatment_days", s.intervention.treatment_days);
            s.intervention.prophylaxis_days = iv.value("prophylaxis_days", s.intervention.prophylaxis_days);
            s.intervention.reporting_fraction = iv.value("reporting_fraction", s.intervention.reporting_fraction);
        }
    }
    s.p_grid = j.at("p_grid").get<std::vector<double>>();
    s.replicates = j.value("replicates", s.replicates);
    s.bootstrap_replicates = j.value("bootstrap_replicates", s.bootstrap_replicates);
    s.season_length = j.value("season_length", s.season_length);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

/// Calls `visit(picks)` once per nested resample; picks are (replicate, draw) pairs.
template <class Visit>
void nested_resamples(const std::vector<std::vector<OutcomeDraw>>& draws, Rng& rng, Visit&& visit) {
    std::vector<std::size_t> buckets;
    for (std::size_t b = 0; b < draws.size(); ++b)
        if (!draws[b].empty()) buckets.push_back(b);
    if (buckets.empty()) return;
    std::vector<std::pair<std::size_t, std::size_t>> picks;
    std::uniform_int_distribution<std::size_t> pick_bucket(0, buckets.size() - 1);
    for (int k = 0; k < kIntervalResamples; ++k) {
        picks.clear();
        for (std::size_t i = 0; i < buckets.size(); ++i) {
            const std::size_t b = buckets[pick_bucket(rng)];
            std::uniform_int_distribution<std::size_t> pick_draw(0, draws[b].size() - 1);
            for (std::size_t r = 0; r < draws[b].size(); ++r) picks.emplace_back(b, pick_draw(rng));
        }
        visit(picks);
    }
}

struct Means {
    double p_epidemic = 0.0;
    double final_size = 0.0;
    std::optional<double> peak;
};

template <class Picks>
Means means_of(const std::vector<std::vector<OutcomeDraw>>& draws, const Picks& picks) {
    double epi = 0.0, size = 0.0, peak = 0.0;
    std::size_t count = 0;
    for (auto [b, r] : picks) {
        const auto& d = draws[b][r];
        ++count;
        size += d.final_size;
        if (d.epidemic) {
            epi += 1.0;
            peak += d.peak_date;
        }
    }
    Means m;
    if (count == 0) return m;
    m.p_epidemic = epi / static_cast<double>(count);
    m.final_size = size / static_cast<double>(count);
    if (epi > 0.0) m.peak = peak / epi;
    return m;
}

Means point_means(const std::vector<std::vector<OutcomeDraw>>& draws) {
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t b = 0; b < draws.size(); ++b)
        for (std::size_t r = 0; r < draws[b].size(); ++r) all.emplace_back(b, r);
    return means_of(draws, all);
}

/// Type-7 quantile of sorted values.
double quantile(const std::vector<double>& sorted, double q) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Estimate make_estimate(std::optional<double> point, std::vector<double> samples) {
    Estimate e;
    if (!point) return e;
    e.defined = true;
    e.mean = *point;
    if (samples.empty()) {
        e.lo = e.hi = e.mean;
        return e;
    }
    std::sort(samples.begin(), samples.end());
    e.lo = std::min(quantile(samples, 0.025), e.mean);
    e.hi = std::max(quantile(samples, 0.975), e.mean);
    return e;
}

ordered_json estimate_to_json(const Estimate& e) {
    if (!e.defined) return nullptr;
    return ordered_json{{"mean", e.mean}, {"lo", e.lo}, {"hi", e.hi}};
}

Estimate estimate_from_json(const nlohmann::json& j) {
    Estimate e;
    if (j.is_null()) return e;
    e.defined = true;
    e.mean = j.at("mean").get<double>();
    e.lo = j.at("lo").get<double>();
    e.hi = j.at("hi").get<double>();
    return e;
}

}  // namespace

std::string to_json(const ScenarioSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

ScenarioSpec scenario_from_json(const std::string& text) { return spec_from_json(nlohmann::json::parse(text)); }

std::vector<ScenarioSpec> load_scenarios(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const auto j = nlohmann::json::parse(in);
    std::vector<ScenarioSpec> out;
    if (j.contains("scenarios")) {
        for (const auto& s : j.at("scenarios")) out.push_back(spec_from_json(s));
    } else {
        out.push_back(spec_from_json(j));
    }
    return out;
}

ExperimentInputs build_inputs(const InputOptions& options, std::uint64_t seed) {
    ExperimentInputs in;
    if (options.roster_path) {
        in.roster = load_roster(*options.roster_path);
    } else {
        RosterWeights weights;
        weights.sister_fraction = options.sister_fraction;
        auto rng = make_rng(seed, {stream::roster});
        in.roster = generate_synthetic_roster(options.roster_size, weights, rng);
    }
    if (options.survey_path) {
        in.survey = preprocess_survey(load_survey(*options.survey_path));
    } else {
        auto rng = make_rng(seed, {stream::survey});
        in.survey = preprocess_survey(generate_synthetic_survey({}, options.survey_size, rng));
    }
    if (options.curves_path) in.curves = load_viral_load_curves(*options.curves_path);
    const int n = static_cast<int>(in.roster.size());
    if (options.friendship_path) {
        std::ifstream f(*options.friendship_path);
        if (!f) throw std::runtime_error("cannot open " + options.friendship_path->string());
        in.friendship = read_friendship(f, n);
    } else {
        auto coef = options.coefficients_path ? load_ergm(*options.coefficients_path) : ErgmCoefficients::defaults();
        const double target = options.target_mean_degree.value_or(in.survey.mean_close_friends());
        if (target > 0.0) coef = calibrate_edges(in.roster, coef, target);
        auto rng = make_rng(seed, {stream::friendship});
        in.friendship = simulate_friendship(in.roster, coef, rng);
    }
    return in;
}

void summarize(GridPointResult& point, std::uint64_t seed) {
    point.runs = 0;
    point.epidemics = 0;
    for (const auto& bucket : point.draws)
        for (const auto& d : bucket) {
            ++point.runs;
            point.epidemics += d.epidemic;
        }
    if (point.runs == 0) {
        point.p_epidemic = point.final_size = point.peak_date = {};
        return;
    }
    const auto m = point_means(point.draws);
    std::vector<double> p, size, peak;
    auto rng = make_rng(seed);
    nested_resamples(point.draws, rng, [&](const auto& picks) {
        const auto r = means_of(point.draws, picks);
        p.push_back(r.p_epidemic);
        size.push_back(r.final_size);
        if (r.peak) peak.push_back(*r.peak);
    });
    point.p_epidemic = make_estimate(m.p_epidemic, std::move(p));
    point.final_size = make_estimate(m.final_size, std::move(size));
    point.peak_date = make_estimate(m.peak, std::move(peak));
}

std::vector<ScenarioResult> run_experiments(const std::vector<ScenarioSpec>& specs, const ExperimentInputs& inputs,
                                            unsigned threads) {
    std::vector<ScenarioResult> results(specs.size());
    for (std::size_t s = 0; s < specs.size(); ++s) {
        specs[s].validate();
        results[s].spec = specs[s];
        const int B = specs[s].bootstrap_replicates;
        for (double p : specs[s].p_grid) {
            GridPointResult point;
            point.p_bar = p;
            point.draws.resize(static_cast<std::size_t>(B));
            for (int b = 0; b < B; ++b)
                point.draws[static_cast<std::size_t>(b)].resize(
                    static_cast<std::size_t>(specs[s].replicates / B + (b < specs[s].replicates % B ? 1 : 0)));
            results[s].points.push_back(std::move(point));
        }
    }

    // Scenarios sharing (seed, bootstrap replicates) share fitted parameters.
    std::map<std::pair<std::uint64_t, int>, std::vector<std::size_t>> groups;
    for (std::size_t s = 0; s < specs.size(); ++s) groups[{specs[s].seed, specs[s].bootstrap_replicates}].push_back(s);

    for (const auto& [key, members] : groups) {
        const auto [seed, B] = key;
        for (int b = 0; b < B; ++b) {
            std::optional<PlanParameters> params;
            std::string param_error;
            try {
                auto rng = make_rng(seed, {stream::bootstrap, static_cast<std::uint64_t>(b)});
                params = estimate_plan_parameters(inputs.survey, rng, B > 1);
            } catch (const std::exception& e) {
                param_error = std::string("bootstrap replicate ") + std::to_string(b) + ": " + e.what();
            }
            std::map<std::pair<Variant, int>, std::shared_ptr<const SeasonPlan>> plans;
            for (std::size_t s : members) {
                auto& result = results[s];
                const auto& spec = specs[s];
                if (result.failure) continue;
                if (!params) {
                    result.failure = param_error;
                    continue;
                }
                std::shared_ptr<const SeasonPlan> plan;
                try {
                    auto& slot = plans[{spec.variant, spec.season_length}];
                    if (!slot) {
                        PlanOptions options;
                        options.variant = spec.variant;
                        options.season_length = spec.season_length;
                        options.class_model = inputs.class_model;
                        options.random_mixing = inputs.random_mixing;
                        slot = std::make_shared<const SeasonPlan>(inputs.roster, inputs.friendship, *params, options,
                                                                  derive_seed(seed, {stream::plan, static_cast<std::uint64_t>(b)}));
                    }
                    plan = slot;
                    std::vector<EpidemicModel> models;
                    for (double p : spec.p_grid) {
                        auto nh = inputs.natural_history;
                        nh.mean_unit_transmission = p;
                        models.emplace_back(inputs.roster, nh, inputs.curves, spec.intervention);
                    }
                    std::vector<std::pair<std::size_t, std::size_t>> work;
                    for (std::size_t g = 0; g < spec.p_grid.size(); ++g)
                        for (std::size_t r = 0; r < result.points[g].draws[static_cast<std::size_t>(b)].size(); ++r)
                            work.emplace_back(g, r);
                    parallel_for(work.size(), threads, [&](std::size_t w) {
                        const auto [g, r] = work[w];
                        const auto out = models[g].run(
                            *plan, derive_seed(seed, {stream::outbreak, g, static_cast<std::uint64_t>(b), r}));
                        auto& d = result.points[g].draws[static_cast<std::size_t>(b)][r];
                        d.epidemic = out.summary.epidemic;
                        d.final_size = out.summary.final_size;
                        d.peak_date = out.summary.peak_date.value_or(-1);
                    });
                } catch (const std::exception& e) {
                    result.failure = std::string("bootstrap replicate ") + std::to_string(b) + ": " + e.what();
                }
            }
        }
    }

    for (auto& result : results) {
        if (result.failure) continue;
        for (std::size_t g = 0; g < result.points.size(); ++g)
            summarize(result.points[g], derive_seed(result.spec.seed, {stream::interval, g}));
    }
    return results;
}

ScenarioResult run_experiment(const ScenarioSpec& spec, const ExperimentInputs& inputs, unsigned threads) {
    return std::move(run_experiments({spec}, inputs, threads).front());
}

std::vector<DeltaPoint> compare_scenarios(const ScenarioResult& a, const ScenarioResult& b) {
    if (a.points.size() != b.points.size()) throw std::invalid_argument("grid mismatch");
    std::vector<DeltaPoint> out;
    for (std::size_t g = 0; g < a.points.size(); ++g) {
        const auto& pa = a.points[g];
        const auto& pb = b.points[g];
        if (pa.p_bar != pb.p_bar) throw std::invalid_argument("grid mismatch");
        if (pa.draws.size() != pb.draws.size()) throw std::invalid_argument("bootstrap layouts differ");
        for (std::size_t k = 0; k < pa.draws.size(); ++k)
            if (pa.draws[k].size() != pb.draws[k].size()) throw std::invalid_argument("replicate layouts differ");
        DeltaPoint d;
        d.p_bar = pa.p_bar;
        const auto ma = point_means(pa.draws);
        const auto mb = point_means(pb.draws);
        std::vector<double> dp, ds, dk;
        auto rng = make_rng(a.spec.seed, {stream::interval, g, 1});
        nested_resamples(pa.draws, rng, [&](const auto& picks) {
            const auto ra = means_of(pa.draws, picks);
            const auto rb = means_of(pb.draws, picks);
            dp.push_back(ra.p_epidemic - rb.p_epidemic);
            ds.push_back(ra.final_size - rb.final_size);
            if (ra.peak && rb.peak) dk.push_back(*rb.peak - *ra.peak);
        });
        const bool any = !pa.draws.empty() && std::any_of(pa.draws.begin(), pa.draws.end(), [](const auto& v) { return !v.empty(); });
        if (any) {
            d.p_epidemic_reduction = make_estimate(ma.p_epidemic - mb.p_epidemic, std::move(dp));
            d.final_size_reduction = make_estimate(ma.final_size - mb.final_size, std::move(ds));
        }
        if (ma.peak && mb.peak) d.peak_shift = make_estimate(*mb.peak - *ma.peak, std::move(dk));
        out.push_back(d);
    }
    return out;
}

void write_results_csv(std::ostream& out, const std::vector<ScenarioResult>& results) {
    out << "p_bar,variant,intervention,p_epidemic,p_epidemic_lo,p_epidemic_hi,final_size_mean,final_size_lo,"
           "final_size_hi,peak_date_mean,peak_date_lo,peak_date_hi\n";
    auto cells = [&](const Estimate& e) {
        if (!e.defined) return std::string(",,");
        return format_double(e.mean) + "," + format_double(e.lo) + "," + format_double(e.hi);
    };
    for (const auto& r : results) {
        if (r.failure) continue;
        for (const auto& p : r.points)
            out << format_double(p.p_bar) << ',' << to_string(r.spec.variant) << ',' << r.spec.intervention_label() << ','
                << cells(p.p_epidemic) << ',' << cells(p.final_size) << ',' << cells(p.peak_date) << '\n';
    }
}

void write_results_json(std::ostream& out, const std::vector<ScenarioResult>& results) {
    ordered_json j;
    j["interval_method"] =
        "nested percentile bootstrap of the mean: bootstrap replicates resampled, then outbreaks within each; "
        "2.5 and 97.5 percentiles of 1000 resamples";
    j["peak_date"] = "mean earliest day of maximum infectious count, conditional on an epidemic";
    j["scenarios"] = ordered_json::array();
    for (const auto& r : results) {
        ordered_json s;
        s["spec"] = spec_to_json(r.spec);
        s["failure"] = r.failure ? ordered_json(*r.failure) : ordered_json(nullptr);
        s["points"] = ordered_json::array();
        for (const auto& p : r.points) {
            ordered_json pj;
            pj["p_bar"] = p.p_bar;
            pj["runs"] = p.runs;
            pj["epidemics"] = p.epidemics;
            pj["p_epidemic"] = estimate_to_json(p.p_epidemic);
            pj["final_size"] = estimate_to_json(p.final_size);
            pj["peak_date"] = estimate_to_json(p.peak_date);
            ordered_json draws = ordered_json::array();
            for (const auto& bucket : p.draws) {
                ordered_json bj = ordered_json::array();
                for (const auto& d : bucket) bj.push_back({d.epidemic ? 1 : 0, d.final_size, d.peak_date});
                draws.push_back(std::move(bj));
            }
            pj["draws"] = std::move(draws);
            s["points"].push_back(std::move(pj));
        }
        j["scenarios"].push_back(std::move(s));
    }
    out << j.dump() << '\n';
}

std::vector<ScenarioResult> read_results_json(std::istream& in) {
    const auto j = nlohmann::json::parse(in);
    std::vector<ScenarioResult> out;
    for (const auto& s : j.at("scenarios")) {
        ScenarioResult r;
        r.spec = spec_from_json(s.at("spec"));
        if (!s.at("failure").is_null()) r.failure = s.at("failure").get<std::string>();
        for (const auto& pj : s.at("points")) {
            GridPointResult p;
            p.p_bar = pj.at("p_bar").get<double>();
            p.runs = pj.at("runs").get<int>();
            p.epidemics = pj.at("epidemics").get<int>();
            p.p_epidemic = estimate_from_json(pj.at("p_epidemic"));
            p.final_size = estimate_from_json(pj.at("final_size"));
            p.peak_date = estimate_from_json(pj.at("peak_date"));
            for (const auto& bj : pj.at("draws")) {
                std::vector<OutcomeDraw> bucket;
                for (const auto& d : bj) bucket.push_back({d.at(0).get<int>() != 0, d.at(1).get<int>(), d.at(2).get<int>()});
                p.draws.push_back(std::move(bucket));
            }
            r.points.push_back(std::move(p));
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_deltas_csv(std::ostream& out, const std::vector<DeltaPoint>& deltas) {
    out << "p_bar,p_epidemic_reduction,p_epidemic_reduction_lo,p_epidemic_reduction_hi,final_size_reduction,"
           "final_size_reduction_lo,final_size_reduction_hi,peak_shift,peak_shift_lo,peak_shift_hi\n";
    auto cells = [&](const Estimate& e) {
        if (!e.defined) return std::string(",,");
        return format_double(e.mean) + "," + format_double(e.lo) + "," + format_double(e.hi);
    };
    for (const auto& d : deltas)
        out << format_double(d.p_bar) << ',' << cells(d.p_epidemic_reduction) << ',' << cells(d.final_size_reduction)
            << ',' << cells(d.peak_shift) << '\n';
}

void emit_results(const std::vector<ScenarioResult>& results, OutputFormat format, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    if (format == OutputFormat::csv)
        write_results_csv(out, results);
    else
        write_results_json(out, results);
    if (!out) throw std::runtime_error("error writing " + path.string());
}

}  // namespace schoolnet
