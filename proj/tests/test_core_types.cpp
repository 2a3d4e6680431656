#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "alloceval/types.hpp"
#include "test_support.hpp"

using namespace alloceval;
using testsupport::Rec;
using testsupport::make_dataset;

namespace {

RctRecord record_with(std::vector<double> rewards) {
    RctRecord rec;
    rec.reward_path = std::move(rewards);
    return rec;
}

RctDataset small_valid() {
    return make_dataset({{0.1, 1, {1, 0}}, {0.9, 0, {0, 1}}},
                        {{0.2, 0, {1, 1}}, {0.8, 0, {0, 0}}}, 0.5);
}

}  // namespace

TEST_CASE("total_reward sums the full path") {
    CHECK(total_reward(record_with({1, 1, 0, 1})) == 3.0);
    CHECK(total_reward(record_with({0, 0, 0})) == 0.0);
}

TEST_CASE("total_reward truncation takes a prefix") {
    CHECK(total_reward(record_with({1, 1, 0, 1}), 2) == 2.0);
    CHECK(total_reward(record_with({0, 0, 0}), 1) == 0.0);
    CHECK(total_reward(record_with({1, 1, 0, 1}), 4) == 3.0);
}

TEST_CASE("total_reward rejects out-of-range truncation") {
    CHECK_THROWS_AS(total_reward(record_with({1, 0}), 0), std::out_of_range);
    CHECK_THROWS_AS(total_reward(record_with({1, 0}), 3), std::out_of_range);
}

TEST_CASE("budget arithmetic") {
    RctDataset data = small_valid();
    CHECK(data.n() == 2);
    CHECK(data.per_round_budget() == 1);
    CHECK(data.budget() == 1);
    data = make_dataset({{0.1, 1, {1}}, {0.2, 2, {0}}, {0.3, 0, {0}}, {0.4, 0, {1}}},
                        {{0.1, 0, {0}}, {0.2, 0, {1}}, {0.3, 0, {0}}, {0.4, 0, {1}}}, 0.25, 2);
    CHECK(data.per_round_budget() == 1);
    CHECK(data.budget() == 2);
}

TEST_CASE("validate accepts a well-formed dataset") {
    CHECK_NOTHROW(small_valid().validate());
}

TEST_CASE("validate rejects arm size mismatch") {
    RctDataset data = small_valid();
    data.control_arm.pop_back();
    CHECK_THROWS_AS(data.validate(), invariant_error);
}

TEST_CASE("validate rejects bad alpha") {
    RctDataset data = small_valid();
    data.alpha = 0.0;
    CHECK_THROWS_AS(data.validate(), invariant_error);
    data.alpha = 1.2;
    CHECK_THROWS_AS(data.validate(), invariant_error);
}

TEST_CASE("validate rejects wrong per-round treated count") {
    RctDataset data = small_valid();
    data.policy_arm[1].treat_week = 1;  // two treated, budget is one
    CHECK_THROWS_AS(data.validate(), invariant_error);
    data = small_valid();
    data.policy_arm[0].treat_week = 0;  // nobody treated in round 1
    CHECK_THROWS_AS(data.validate(), invariant_error);
}

TEST_CASE("validate rejects treated control agents") {
    RctDataset data = small_valid();
    data.control_arm[0].treat_week = 1;
    CHECK_THROWS_AS(data.validate(), invariant_error);
}

TEST_CASE("validate rejects reward path length mismatch") {
    RctDataset data = small_valid();
    data.policy_arm[0].reward_path.push_back(1.0);
    CHECK_THROWS_AS(data.validate(), invariant_error);
}

TEST_CASE("validate binary flag controls reward domain") {
    RctDataset data = small_valid();
    data.policy_arm[0].reward_path[0] = 2.5;
    CHECK_THROWS_AS(data.validate(), invariant_error);
    CHECK_NOTHROW(data.validate(false));
}

TEST_CASE("validate rejects non-finite indices") {
    RctDataset data = small_valid();
    data.policy_arm[0].index = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(data.validate(), invariant_error);
}

TEST_CASE("validate rejects excess rounds") {
    RctDataset data = small_valid();
    data.rounds = 3;  // 3 * ceil(0.5 * 2) > 2
    CHECK_THROWS_AS(data.validate(), invariant_error);
}

TEST_CASE("transition model row validation") {
    TransitionModel t = TransitionModel::from_good_probs(0.2, 0.8, 0.3, 0.9);
    CHECK_NOTHROW(t.validate());
    CHECK(t.to_good(0, 0) == 0.2);
    CHECK(t.to_good(1, 1) == 0.9);
    t.probs[0][0][0] = 0.5;  // row no longer sums to 1
    CHECK_THROWS_AS(t.validate(), invariant_error);
}

TEST_CASE("estimator names round-trip") {
    const EstimatorKind kinds[] = {EstimatorKind::base,
                                   EstimatorKind::subgroup,
                                   EstimatorKind::threshold,
                                   EstimatorKind::hybrid,
                                   EstimatorKind::mate_reshuffle,
                                   EstimatorKind::regression_base,
                                   EstimatorKind::regression_subgroup};
    for (EstimatorKind kind : kinds) CHECK(estimator_kind_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(estimator_kind_from_string("bogus"), config_error);
}
