#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "schoolnet/graph.hpp"
#include "schoolnet/population.hpp"
#include "schoolnet/season_plan.hpp"

namespace schoolnet::fixtures {

/// The same contact network every day.
class FixedPlan final : public DayNetworkSource {
  public:
    explicit FixedPlan(ContactNetwork net) : net_(std::make_shared<const ContactNetwork>(std::move(net))) {}
    int n() const override { return net_->n(); }
    std::shared_ptr<const ContactNetwork> network(int) const override { return net_; }

  private:
    std::shared_ptr<const ContactNetwork> net_;
};

inline Roster single_grade_roster(int n, int grade = 9) {
    std::vector<Student> students;
    for (int i = 0; i < n; ++i) students.push_back({i, grade, i % 2 ? Sex::male : Sex::female, Race::white, School::main});
    return Roster(std::move(students));
}

}  // namespace schoolnet::fixtures
