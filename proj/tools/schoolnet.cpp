#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "schoolnet/contact_network.hpp"
#include "schoolnet/degree_model.hpp"
#include "schoolnet/epidemic.hpp"
#include "schoolnet/ergm.hpp"
#include "schoolnet/harness.hpp"
#include "schoolnet/population.hpp"
#include "schoolnet/season_plan.hpp"

using namespace schoolnet;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out = "-";
};

/// Writes to --out, or stdout for "-".
class Output {
  public:
    explicit Output(const std::string& path) {
        if (path != "-") {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw std::runtime_error("cannot write " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }
    void finish() {
        stream().flush();
        if (!stream()) throw std::runtime_error("write failed");
    }

  private:
    std::unique_ptr<std::ofstream> file_;
};

struct InputFlags {
    InputOptions options;
    std::string roster, survey, coefficients, curves, friendship;
    double target_degree = 0.0;
    bool target_set = false;

    void add(CLI::App* app, bool with_friendship = true) {
        app->add_option("--roster", roster, "Roster CSV (id,grade,sex,race,school); synthesized when omitted")
            ->check(CLI::ExistingFile);
        app->add_option("--survey", survey, "Survey CSV; synthesized when omitted")->check(CLI::ExistingFile);
        app->add_option("--coefficients", coefficients, "Friendship model coefficients JSON (default: bundled)")
            ->check(CLI::ExistingFile);
        app->add_option("--curves", curves, "Viral load curves, six loads per line")->check(CLI::ExistingFile);
        if (with_friendship)
            app->add_option("--friendship", friendship, "Friendship edge list; simulated when omitted")
                ->check(CLI::ExistingFile);
        app->add_option("--n", options.roster_size, "Synthetic roster size")->check(CLI::PositiveNumber);
        app->add_option("--survey-size", options.survey_size, "Synthetic survey size")->check(CLI::NonNegativeNumber);
        app->add_option("--sister-fraction", options.sister_fraction, "Share of synthetic students at the sister school")
            ->check(CLI::Range(0.0, 1.0));
        app->add_option_function<double>(
               "--target-degree", [this](double v) { target_degree = v, target_set = true; },
               "Mean friendship degree the edges term is shifted to; <= 0 keeps it (default: survey mean close friends)");
    }

    InputOptions resolve() const {
        InputOptions o = options;
        if (!roster.empty()) o.roster_path = roster;
        if (!survey.empty()) o.survey_path = survey;
        if (!coefficients.empty()) o.coefficients_path = coefficients;
        if (!curves.empty()) o.curves_path = curves;
        if (!friendship.empty()) o.friendship_path = friendship;
        if (target_set) o.target_mean_degree = target_degree;
        return o;
    }
};

void run_fit(const Globals& g, const std::string& survey_path, int cutoff) {
    const auto survey = preprocess_survey(load_survey(survey_path));
    DegreeParams params;
    params.break_fit = fit_break_model(survey);
    params.lunch_fit = fit_lunch_model(survey, cutoff);
    Output out(g.out);
    out.stream() << to_json(params);
    out.finish();
    const auto& b = params.break_fit;
    std::cerr << std::setprecision(4) << "break: mean at 0 friends " << b.mean(0) << ", ratio " << std::exp(b.log_ratio)
              << " [" << b.ci_ratio.lo << ", " << b.ci_ratio.hi << "], dispersion " << b.dispersion << '\n'
              << "lunch: mean " << params.lunch_fit.mean << ", dispersion " << params.lunch_fit.dispersion << '\n'
              << "X: " << survey.mean_pct_to_friends().value_or(0.0) << '\n';
}

void run_fit_ergm(const Globals& g, const std::string& roster_path, const std::string& friendship_path) {
    const auto roster = load_roster(roster_path);
    std::ifstream f(friendship_path);
    if (!f) throw std::runtime_error("cannot open " + friendship_path);
    const auto network = read_friendship(f, static_cast<int>(roster.size()));
    const auto fit = fit_ergm(network, roster);
    Output out(g.out);
    out.stream() << to_json(fit.coef);
    out.finish();
    for (int k = 0; k < term::count; ++k) {
        std::cerr << std::left << std::setw(22) << term_name(k) << ' ';
        switch (fit.status[static_cast<std::size_t>(k)]) {
            case TermStatus::estimated:
                std::cerr << std::fixed << std::setprecision(3) << fit.coef[k] << " (" << *fit.standard_error[static_cast<std::size_t>(k)] << ")\n";
                break;
            case TermStatus::negative_infinity: std::cerr << "-Inf\n"; break;
            case TermStatus::not_identified: std::cerr << "not identified\n"; break;
        }
    }
}

void run_synth_roster(const Globals& g, int n, double sister_fraction) {
    RosterWeights weights;
    weights.sister_fraction = sister_fraction;
    auto rng = make_rng(g.seed, {stream::roster});
    Output out(g.out);
    write_roster(out.stream(), generate_synthetic_roster(n, weights, rng));
    out.finish();
}

void run_synth_survey(const Globals& g, int n) {
    auto rng = make_rng(g.seed, {stream::survey});
    Output out(g.out);
    write_survey(out.stream(), generate_synthetic_survey({}, n, rng));
    out.finish();
}

void run_synth_friendship(const Globals& g, const InputFlags& flags) {
    const auto inputs = build_inputs(flags.resolve(), g.seed);
    Output out(g.out);
    write_friendship(out.stream(), inputs.friendship);
    out.finish();
    std::cerr << "n " << inputs.friendship.n() << ", edges " << inputs.friendship.edge_count() << ", mean degree "
              << inputs.friendship.mean_degree() << '\n';
}

void run_synth_contacts(const Globals& g, const InputFlags& flags, const std::string& variant, int day, bool resample) {
    const auto inputs = build_inputs(flags.resolve(), g.seed);
    PlanOptions options;
    options.variant = parse_variant(variant);
    options.class_model = inputs.class_model;
    options.random_mixing = inputs.random_mixing;
    auto rng = make_rng(g.seed, {stream::bootstrap, 0});
    const auto params = estimate_plan_parameters(inputs.survey, rng, resample);
    const SeasonPlan plan(inputs.roster, inputs.friendship, params, options, derive_seed(g.seed, {stream::plan, 0}));
    const auto net = plan.network(day);
    Output out(g.out);
    write_contact_network(out.stream(), *net, day);
    out.finish();
    std::cerr << "dyads " << net->dyad_count() << ", units per student "
              << 2.0 * static_cast<double>(net->total_units()) / net->n() << ", clamped dyads " << plan.clamped_dyads()
              << '\n';
}

void run_simulate(const Globals& g, const InputFlags& flags, const std::string& variant, const std::string& intervention,
                  double p, int index_case, int season_length) {
    const auto inputs = build_inputs(flags.resolve(), g.seed);
    PlanOptions options;
    options.variant = parse_variant(variant);
    options.season_length = season_length;
    options.class_model = inputs.class_model;
    options.random_mixing = inputs.random_mixing;
    auto rng = make_rng(g.seed, {stream::bootstrap, 0});
    const auto params = estimate_plan_parameters(inputs.survey, rng, false);
    const SeasonPlan plan(inputs.roster, inputs.friendship, params, options, derive_seed(g.seed, {stream::plan, 0}));
    auto nh = inputs.natural_history;
    nh.mean_unit_transmission = p;
    InterventionConfig iv;
    iv.kind = parse_intervention(intervention);
    const EpidemicModel model(inputs.roster, nh, inputs.curves, iv);
    OutbreakResult result;
    if (index_case < 0) {
        result = model.run(plan, derive_seed(g.seed, {stream::outbreak}));
    } else {
        if (index_case >= model.n()) throw std::invalid_argument("index case out of range");
        auto orng = make_rng(g.seed, {stream::outbreak});
        result = model.run_from(plan, index_case, orng);
    }
    Output out(g.out);
    write_trajectory_csv(out.stream(), result.trajectory);
    out.finish();
    std::cerr << "final size " << result.summary.final_size << (result.summary.epidemic ? " (epidemic)" : "")
              << ", peak day " << (result.summary.peak_date ? std::to_string(*result.summary.peak_date) : "none")
              << '\n';
}

void run_experiment_cmd(const Globals& g, const InputFlags& flags, const std::string& scenarios, const std::string& format,
                        bool override_seed) {
    auto specs = load_scenarios(scenarios);
    if (override_seed)
        for (auto& s : specs) s.seed = g.seed;
    const auto inputs = build_inputs(flags.resolve(), g.seed);
    const auto results = run_experiments(specs, inputs, g.threads);
    for (const auto& r : results)
        if (r.failure) std::cerr << "scenario '" << r.spec.name << "' failed: " << *r.failure << '\n';
    Output out(g.out);
    if (format == "json")
        write_results_json(out.stream(), results);
    else
        write_results_csv(out.stream(), results);
    out.finish();
}

void run_compare(const Globals& g, const std::string& results_path, const std::string& a, const std::string& b) {
    std::ifstream in(results_path);
    if (!in) throw std::runtime_error("cannot open " + results_path);
    const auto results = read_results_json(in);
    auto find = [&](const std::string& name) -> const ScenarioResult& {
        for (const auto& r : results)
            if (r.spec.name == name) {
                if (r.failure) throw std::runtime_error("scenario '" + name + "' failed: " + *r.failure);
                return r;
            }
        throw std::invalid_argument("no scenario named '" + name + "'");
    };
    Output out(g.out);
    write_deltas_csv(out.stream(), compare_scenarios(find(a), find(b)));
    out.finish();
}

void run_bootstrap(const Globals& g, const InputFlags& flags, int replicates) {
    const auto inputs = build_inputs(flags.resolve(), g.seed);
    Output out(g.out);
    auto& os = out.stream();
    os << "replicate,break_mean0,break_ratio,break_dispersion,lunch_mean,lunch_dispersion,friend_fraction,"
          "mean_daily_units\n";
    const auto friends = inputs.friendship.degrees();
    os << std::setprecision(8);
    for (int b = 0; b < replicates; ++b) {
        auto rng = make_rng(g.seed, {stream::bootstrap, static_cast<std::uint64_t>(b)});
        try {
            const auto p = estimate_plan_parameters(inputs.survey, rng, replicates > 1);
            double units = 0.0;
            for (int f : friends) units += p.degrees.expected_daily_units(f, inputs.class_model);
            units /= static_cast<double>(friends.size());
            const auto& bf = p.degrees.break_fit;
            os << b << ',' << bf.mean(0) << ',' << std::exp(bf.log_ratio) << ',' << bf.dispersion << ','
               << p.degrees.lunch_fit.mean << ',' << p.degrees.lunch_fit.dispersion << ',' << p.friend_fraction << ','
               << units << '\n';
        } catch (const std::exception& e) {
            std::cerr << "replicate " << b << ": " << e.what() << '\n';
            os << b << ",,,,,,,\n";
        }
    }
    out.finish();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"School contact network and influenza outbreak simulator"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)")->capture_default_str();
    app.add_option("--out", g.out, "Output file, - for stdout")->capture_default_str();

    std::string survey_path;
    int cutoff = 30;
    auto* fit = app.add_subcommand("fit", "Fit break and lunch degree models to a survey; writes parameter JSON");
    fit->add_option("--survey", survey_path, "Survey CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--cutoff", cutoff, "Lunch censoring cutoff")->capture_default_str()->check(CLI::PositiveNumber);

    std::string roster_path, friendship_path;
    auto* fit_ergm_cmd = app.add_subcommand("fit-ergm", "Fit the friendship model to an observed network");
    fit_ergm_cmd->add_option("--roster", roster_path, "Roster CSV")->required()->check(CLI::ExistingFile);
    fit_ergm_cmd->add_option("--friendship", friendship_path, "Friendship edge list")->required()->check(CLI::ExistingFile);

    int roster_n = 1074;
    double sister = 0.0;
    auto* synth_roster = app.add_subcommand("synth-roster", "Write a synthetic roster CSV");
    synth_roster->add_option("--n", roster_n, "Students")->capture_default_str()->check(CLI::PositiveNumber);
    synth_roster->add_option("--sister-fraction", sister, "Share at the sister school")->check(CLI::Range(0.0, 1.0));

    int survey_n = 362;
    auto* synth_survey = app.add_subcommand("synth-survey", "Write a synthetic contact survey CSV");
    synth_survey->add_option("--n", survey_n, "Respondents")->capture_default_str()->check(CLI::NonNegativeNumber);

    InputFlags friendship_flags;
    auto* synth_friendship = app.add_subcommand("synth-friendship", "Simulate a friendship network; writes an edge list");
    friendship_flags.add(synth_friendship, false);

    InputFlags contact_flags;
    std::string contact_variant = "static";
    int contact_day = 0;
    bool contact_resample = false;
    auto* synth_contacts = app.add_subcommand("synth-contacts", "Generate one day's contact network");
    contact_flags.add(synth_contacts);
    synth_contacts->add_option("--variant", contact_variant, "static, dynamic, friendship_only or random_mixing")
        ->capture_default_str();
    synth_contacts->add_option("--day", contact_day, "Day of the season")->check(CLI::NonNegativeNumber);
    synth_contacts->add_flag("--resample", contact_resample, "Refit degree models on a bootstrap resample first");

    InputFlags sim_flags;
    std::string sim_variant = "static", sim_intervention = "none";
    double sim_p = 0.004;
    int sim_index = -1, sim_season = 200;
    auto* simulate = app.add_subcommand("simulate", "Run one outbreak; writes the daily trajectory CSV");
    sim_flags.add(simulate);
    simulate->add_option("--variant", sim_variant, "Contact network variant")->capture_default_str();
    simulate->add_option("--intervention", sim_intervention, "none, tap or grade_closure")->capture_default_str();
    simulate->add_option("--p", sim_p, "Mean per-unit transmission probability")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--index", sim_index, "Index case (default: uniformly random)");
    simulate->add_option("--season-length", sim_season, "Days before the dynamic plan wraps")->check(CLI::PositiveNumber);

    InputFlags exp_flags;
    std::string scenarios, format = "csv";
    bool spec_seed = false;
    auto* experiment = app.add_subcommand("experiment", "Run scenario grids from a JSON spec");
    exp_flags.add(experiment);
    experiment->add_option("scenarios", scenarios, "ScenarioSpec JSON (one spec or {\"scenarios\": [...]})")
        ->required()
        ->check(CLI::ExistingFile);
    experiment->add_option("--format", format, "csv or json")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
    experiment->add_flag("--seed-from-cli", spec_seed, "Replace each scenario's seed with --seed");

    std::string results_path, name_a, name_b;
    auto* compare = app.add_subcommand("compare", "Paired deltas (a - b) between two scenarios of a JSON result file");
    compare->add_option("results", results_path, "Results JSON from experiment --format json")
        ->required()
        ->check(CLI::ExistingFile);
    compare->add_option("a", name_a, "Baseline scenario name")->required();
    compare->add_option("b", name_b, "Comparison scenario name")->required();

    InputFlags boot_flags;
    int boot_replicates = 20;
    auto* bootstrap = app.add_subcommand("bootstrap", "Refit contact parameters on survey resamples; writes one row per replicate");
    boot_flags.add(bootstrap);
    bootstrap->add_option("--replicates", boot_replicates, "Resamples (1 = full survey)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) run_fit(g, survey_path, cutoff);
        else if (*fit_ergm_cmd) run_fit_ergm(g, roster_path, friendship_path);
        else if (*synth_roster) run_synth_roster(g, roster_n, sister);
        else if (*synth_survey) run_synth_survey(g, survey_n);
        else if (*synth_friendship) run_synth_friendship(g, friendship_flags);
        else if (*synth_contacts) run_synth_contacts(g, contact_flags, contact_variant, contact_day, contact_resample);
        else if (*simulate) run_simulate(g, sim_flags, sim_variant, sim_intervention, sim_p, sim_index, sim_season);
        else if (*experiment) run_experiment_cmd(g, exp_flags, scenarios, format, spec_seed);
        else if (*compare) run_compare(g, results_path, name_a, name_b);
        else if (*bootstrap) run_bootstrap(g, boot_flags, boot_replicates);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
