#include "schoolnet/population.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "schoolnet/negbin.hpp"

namespace schoolnet {

namespace {

constexpr std::array<std::string_view, kRaceCount> kRaceNames{"white", "black", "hispanic",
                                                              "asian", "mixed", "missing"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

template <class T>
T parse_number(std::string_view field, std::size_t line_no, std::string_view column) {
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        std::ostringstream msg;
        msg << "line " << line_no << ": cannot parse " << column << " '" << field << "'";
        throw ParseError(msg.str());
    }
    return value;
}

/// Reads a header row and returns, for each required column, its position.
template <std::size_t N>
std::array<std::size_t, N> read_header(std::istream& in, const std::array<std::string_view, N>& columns,
                                       std::string_view what) {
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw ParseError("empty " + std::string(what));
    auto fields = split_csv(line);
    std::array<std::size_t, N> index{};
    for (std::size_t c = 0; c < N; ++c) {
        auto it = std::find(fields.begin(), fields.end(), columns[c]);
        if (it == fields.end())
            throw ParseError("line 1: missing column '" + std::string(columns[c]) + "'");
        index[c] = static_cast<std::size_t>(it - fields.begin());
    }
    return index;
}

std::optional<double> mean_pct(const std::vector<SurveyRecord>& records) {
    if (records.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& r : records) sum += r.pct_to_friends;
    return sum / static_cast<double>(records.size());
}

}  // namespace

std::string_view to_string(Sex s) { return s == Sex::male ? "male" : "female"; }
std::string_view to_string(Race r) { return kRaceNames[static_cast<std::size_t>(r)]; }
std::string_view to_string(School s) { return s == School::main ? "main" : "sister"; }
std::string_view to_string(NeighborMix m) {
    switch (m) {
        case NeighborMix::mostly_friends: return "mostly_friends";
        case NeighborMix::mostly_nonfriends: return "mostly_nonfriends";
        case NeighborMix::mix: return "mix";
    }
    return "mix";
}

Sex parse_sex(std::string_view s) {
    auto v = lower(s);
    if (v == "male" || v == "m") return Sex::male;
    if (v == "female" || v == "f") return Sex::female;
    throw ParseError("unknown sex '" + std::string(s) + "'");
}

Race parse_race(std::string_view s) {
    auto v = lower(s);
    for (std::size_t i = 0; i < kRaceNames.size(); ++i)
        if (v == kRaceNames[i]) return static_cast<Race>(i);
    return Race::missing;
}

School parse_school(std::string_view s) {
    auto v = lower(s);
    if (v == "main") return School::main;
    if (v == "sister") return School::sister;
    throw ParseError("unknown school '" + std::string(s) + "'");
}

NeighborMix parse_neighbor_mix(std::string_view s) {
    auto v = lower(s);
    if (v == "mostly_friends") return NeighborMix::mostly_friends;
    if (v == "mostly_nonfriends") return NeighborMix::mostly_nonfriends;
    if (v == "mix") return NeighborMix::mix;
    throw ParseError("unknown neighbor_mix '" + std::string(s) + "'");
}

Roster::Roster(std::vector<Student> students) : students_(std::move(students)) {
    if (students_.size() < 2) throw ValidationError("roster needs at least 2 students");
    for (std::size_t i = 0; i < students_.size(); ++i) {
        if (students_[i].grade < kMinGrade || students_[i].grade > kMaxGrade)
            throw ValidationError("student " + std::to_string(students_[i].id) + ": grade " +
                                  std::to_string(students_[i].grade) + " outside 7..12");
        students_[i].id = static_cast<int>(i);
    }
}

std::array<std::vector<int>, kGradeCount> Roster::by_grade() const {
    std::array<std::vector<int>, kGradeCount> groups;
    for (const auto& s : students_) groups[static_cast<std::size_t>(s.grade_index())].push_back(s.id);
    return groups;
}

Roster parse_roster(std::istream& in) {
    static constexpr std::array<std::string_view, 5> columns{"id", "grade", "sex", "race", "school"};
    const auto col = read_header(in, columns, "roster");
    std::vector<Student> students;
    std::vector<int> ids;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() < columns.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        Student s;
        s.id = parse_number<int>(fields[col[0]], line_no, "id");
        s.grade = parse_number<int>(fields[col[1]], line_no, "grade");
        if (s.grade < kMinGrade || s.grade > kMaxGrade)
            throw ValidationError("line " + std::to_string(line_no) + ": grade " + std::to_string(s.grade) +
                                  " outside 7..12");
        try {
            s.sex = parse_sex(fields[col[2]]);
            s.race = parse_race(fields[col[3]]);
            s.school = parse_school(fields[col[4]]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        ids.push_back(s.id);
        students.push_back(s);
    }
    if (students.empty()) throw ParseError("empty roster");
    auto sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ValidationError("duplicate student id in roster");
    // Store in id order so external ids map monotonically onto dense ids.
    std::vector<std::size_t> order(students.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return students[a].id < students[b].id; });
    std::vector<Student> ordered;
    ordered.reserve(students.size());
    for (auto i : order) ordered.push_back(students[i]);
    return Roster(std::move(ordered));
}

Roster load_roster(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open roster file " + path.string());
    return parse_roster(in);
}

void write_roster(std::ostream& out, const Roster& roster) {
    out << "id,grade,sex,race,school\n";
    for (const auto& s : roster.students())
        out << s.id << ',' << s.grade << ',' << to_string(s.sex) << ',' << to_string(s.race) << ','
            << to_string(s.school) << '\n';
}

Roster generate_synthetic_roster(int n, const RosterWeights& weights, Rng& rng) {
    if (n < 2) throw ValidationError("synthetic roster needs n >= 2");
    auto check = [](auto const& w, const char* what) {
        double total = 0.0;
        for (double x : w) {
            if (x < 0.0) throw ValidationError(std::string(what) + " weights must be nonnegative");
            total += x;
        }
        if (total <= 0.0) throw ValidationError(std::string(what) + " weights are all zero");
    };
    check(weights.grade, "grade");
    check(weights.race, "race");
    if (weights.male_fraction < 0.0 || weights.male_fraction > 1.0)
        throw ValidationError("male fraction outside [0,1]");
    if (weights.sister_fraction < 0.0 || weights.sister_fraction > 1.0)
        throw ValidationError("sister-school fraction outside [0,1]");

    std::discrete_distribution<int> grade(weights.grade.begin(), weights.grade.end());
    std::discrete_distribution<int> race(weights.race.begin(), weights.race.end());
    std::bernoulli_distribution male(weights.male_fraction);
    std::bernoulli_distribution sister(weights.sister_fraction);
    std::vector<Student> students(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& s = students[static_cast<std::size_t>(i)];
        s.id = i;
        s.grade = kMinGrade + grade(rng);
        s.sex = male(rng) ? Sex::male : Sex::female;
        s.race = static_cast<Race>(race(rng));
        s.school = sister(rng) ? School::sister : School::main;
    }
    return Roster(std::move(students));
}

SurveySample::SurveySample(std::vector<SurveyRecord> records)
    : records_(std::move(records)), mean_pct_(mean_pct(records_)) {
    for (const auto& r : records_) {
        if (r.break_contacts < 0 || r.lunch_contacts < 0 || r.n_close_friends < 0)
            throw ValidationError("survey counts must be nonnegative");
        if (!(r.pct_to_friends >= 0.0 && r.pct_to_friends <= 1.0))
            throw ValidationError("pct_to_friends outside [0,1]");
    }
}

double SurveySample::mean_close_friends() const {
    if (records_.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : records_) sum += r.n_close_friends;
    return sum / static_cast<double>(records_.size());
}

SurveySample parse_survey(std::istream& in) {
    static constexpr std::array<std::string_view, 5> columns{
        "break_contacts", "lunch_contacts", "n_close_friends", "pct_to_friends", "neighbor_mix"};
    auto col = read_header(in, columns, "survey");
    std::vector<SurveyRecord> records;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() < columns.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        SurveyRecord r;
        r.break_contacts = parse_number<int>(fields[col[0]], line_no, "break_contacts");
        r.lunch_contacts = parse_number<int>(fields[col[1]], line_no, "lunch_contacts");
        r.n_close_friends = parse_number<int>(fields[col[2]], line_no, "n_close_friends");
        r.pct_to_friends = parse_number<double>(fields[col[3]], line_no, "pct_to_friends");
        try {
            r.neighbor_mix = parse_neighbor_mix(fields[col[4]]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (r.break_contacts < 0 || r.lunch_contacts < 0 || r.n_close_friends < 0 ||
            !(r.pct_to_friends >= 0.0 && r.pct_to_friends <= 1.0))
            throw ValidationError("line " + std::to_string(line_no) + ": value out of range");
        records.push_back(r);
    }
    return SurveySample(std::move(records));
}

SurveySample load_survey(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open survey file " + path.string());
    return parse_survey(in);
}

void write_survey(std::ostream& out, const SurveySample& survey) {
    out << "break_contacts,lunch_contacts,n_close_friends,pct_to_friends,neighbor_mix\n";
    for (const auto& r : survey.records()) {
        out << r.break_contacts << ',' << r.lunch_contacts << ',' << r.n_close_friends << ',';
        std::array<char, 32> buf{};
        auto res = std::to_chars(buf.data(), buf.data() + buf.size(), r.pct_to_friends);
        out.write(buf.data(), res.ptr - buf.data());
        out << ',' << to_string(r.neighbor_mix) << '\n';
    }
}

SurveySample preprocess_survey(const SurveySample& raw) {
    std::vector<SurveyRecord> kept;
    kept.reserve(raw.size());
    for (auto r : raw.records()) {
        if (r.n_close_friends > kMaxCloseFriends) continue;
        r.break_contacts = std::min(r.break_contacts, kBreakContactCap);
        kept.push_back(r);
    }
    if (kept.empty()) throw ValidationError("empty survey after preprocessing");
    return SurveySample(std::move(kept));
}

SurveySample bootstrap_resample(const SurveySample& survey, Rng& rng) {
    if (survey.empty()) throw ValidationError("cannot resample an empty survey");
    auto records = survey.records();
    std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
    std::vector<SurveyRecord> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out.push_back(records[pick(rng)]);
    return SurveySample(std::move(out));
}

SurveySample generate_synthetic_survey(const SyntheticSurveyParams& p, int n, Rng& rng) {
    if (!(p.break_mean0 > 0 && p.break_ratio > 0 && p.lunch_mean > 0 && p.friends_mean > 0))
        throw ValidationError("synthetic survey means must be positive");
    if (!(p.break_dispersion > 0 && p.lunch_dispersion > 0 && p.friends_dispersion > 0))
        throw ValidationError("synthetic survey dispersions must be positive");
    if (!(p.pct_to_friends_mean > 0 && p.pct_to_friends_mean < 1))
        throw ValidationError("pct_to_friends mean must lie in (0,1)");
    if (n < 0) throw ValidationError("survey size must be nonnegative");

    const double a = p.pct_to_friends_mean * p.pct_to_friends_concentration;
    const double b = (1.0 - p.pct_to_friends_mean) * p.pct_to_friends_concentration;
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    std::discrete_distribution<int> mix(p.neighbor_mix_weights.begin(), p.neighbor_mix_weights.end());

    std::vector<SurveyRecord> records(static_cast<std::size_t>(n));
    for (auto& r : records) {
        r.n_close_friends = sample_negbin(p.friends_mean, p.friends_dispersion, rng);
        const double mean = p.break_mean0 * std::pow(p.break_ratio, r.n_close_friends);
        r.break_contacts = sample_negbin(mean, p.break_dispersion, rng);
        r.lunch_contacts = sample_negbin(p.lunch_mean, p.lunch_dispersion, rng);
        const double x = ga(rng), y = gb(rng);
        r.pct_to_friends = x + y > 0 ? x / (x + y) : p.pct_to_friends_mean;
        r.neighbor_mix = static_cast<NeighborMix>(mix(rng));
    }
    return SurveySample(std::move(records));
}

}  // namespace schoolnet
