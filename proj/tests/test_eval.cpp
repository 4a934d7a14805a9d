#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace badger;

namespace {

EvalSettings settings(std::size_t n = 3) {
    EvalSettings s;
    s.task_kind = TaskKind::dim_optimization;
    s.rollout.n_experts = n;
    return s;
}

}  // namespace

TEST(Baselines, ChanceNearOneThird) {
    EXPECT_NEAR(chance_baseline(3, 100000, 1), 1.0 / 3.0, 0.004);
}

TEST(Baselines, ChanceIndependentOfDimension) {
    EXPECT_NEAR(chance_baseline(1, 100000, 2), chance_baseline(6, 100000, 2), 0.005);
}

TEST(Baselines, MeanValueExamples) {
    EXPECT_EQ(mean_value_baseline(1, 1000, 3), 0.0);
    EXPECT_NEAR(mean_value_baseline(3, 100000, 3), 2.0 / 9.0, 0.003);
    EXPECT_LT(mean_value_baseline(10, 10000, 3), chance_baseline(10, 10000, 3));
    EXPECT_NEAR(mean_value_closed_form(3), 2.0 / 9.0, 1e-15);
    EXPECT_EQ(mean_value_closed_form(1), 0.0);
}

TEST(Baselines, DegenerateSamplerGivesZero) {
    const TargetSampler zero = [](Rng&) { return 0.0; };
    EXPECT_EQ(chance_baseline(4, 100, 1, zero), 0.0);
    const TargetSampler half = [](Rng&) { return 0.5; };
    EXPECT_EQ(mean_value_baseline(4, 100, 1, half), 0.0);
    EXPECT_EQ(chance_baseline(4, 100, 1, half), 0.25);
}

TEST(Baselines, Preconditions) {
    EXPECT_THROW(chance_baseline(0, 10, 1), ArgumentError);
    EXPECT_THROW(mean_value_baseline(2, 0, 1), ArgumentError);
}

TEST(Baselines, Deterministic) {
    EXPECT_EQ(chance_baseline(3, 1000, 9), chance_baseline(3, 1000, 9));
    EXPECT_NE(chance_baseline(3, 1000, 9), chance_baseline(3, 1000, 10));
}

TEST(DimensionSweep, RowsAndDeterminism) {
    const auto p = init_policy(ShapeSpec{}, 4);
    const std::vector<std::size_t> ds{1, 3, 6};
    const auto a = dimension_sweep(p, ds, 10, 5, settings());
    const auto b = dimension_sweep(p, ds, 10, 5, settings());
    EXPECT_EQ(a.key_name, "d");
    ASSERT_EQ(a.rows.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a.rows[i].key, ds[i]);
        EXPECT_EQ(a.rows[i].n_episodes, 10u);
        EXPECT_EQ(a.rows[i].mean_loss, b.rows[i].mean_loss);
        EXPECT_TRUE(std::isfinite(a.rows[i].mean_loss));
        EXPECT_GE(a.rows[i].mean_loss, 0.0);
        EXPECT_NEAR(a.rows[i].ci95, 1.96 * a.rows[i].std_error, 1e-15);
        EXPECT_EQ(a.rows[i].mean_value, mean_value_closed_form(ds[i]));
    }
    EXPECT_THROW(dimension_sweep(p, ds, 0, 5, settings()), ArgumentError);
}

TEST(DimensionSweep, ThreadCountDoesNotChangeResults) {
    const auto p = init_policy(ShapeSpec{}, 4);
    const std::vector<std::size_t> ds{2, 4};
    auto one = settings(), many = settings();
    one.threads = 1;
    many.threads = 3;
    const auto a = dimension_sweep(p, ds, 9, 5, one);
    const auto b = dimension_sweep(p, ds, 9, 5, many);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.rows[i].mean_loss, b.rows[i].mean_loss);
}

TEST(ExpertCountSweep, TrainedSizeMatchesDimensionSweep) {
    const auto p = init_policy(ShapeSpec{}, 6);
    auto s = settings(5);
    s.d = 3;
    const std::vector<std::size_t> n{5};
    const std::vector<std::size_t> d{3};
    const auto a = expert_count_sweep(p, n, 20, 8, s);
    const auto b = dimension_sweep(p, d, 20, 8, s);
    EXPECT_EQ(a.key_name, "n_experts");
    EXPECT_NEAR(a.rows[0].mean_loss, b.rows[0].mean_loss, 1e-9);
}

TEST(ExpertCountSweep, GrowsAndShrinksWithFiniteLosses) {
    const auto p = init_policy(ShapeSpec{}, 6);
    auto s = settings(5);
    const std::vector<std::size_t> n{1, 2, 10, 20, 40};
    const auto rep = expert_count_sweep(p, n, 5, 8, s);
    ASSERT_EQ(rep.rows.size(), 5u);
    for (const auto& r : rep.rows) {
        EXPECT_TRUE(std::isfinite(r.mean_loss));
        EXPECT_GE(r.mean_loss, 0.0);
    }
}

TEST(SweepEpisodes, GrownAgentsStartAsClones) {
    const auto p = init_policy(ShapeSpec{}, 6);
    const auto s = settings(3);
    const auto eps = sweep_episodes(p, s, 2, 7, 2, 1);
    for (const auto& ep : eps) {
        ASSERT_EQ(ep.initial.size(), 7u);
        for (std::size_t i = 3; i < 7; ++i) EXPECT_EQ(ep.initial[i].h, ep.initial[i % 3].h);
    }
}

TEST(EvaluateEpisodes, StepErrorsAverageOverEpisodes) {
    const auto p = init_policy(ShapeSpec{}, 2);
    const auto eps = sweep_episodes(p, settings(), 3, 3, 4, 1);
    const auto st = evaluate_episodes(p, eps, 1);
    ASSERT_EQ(st.mean_step_errors.size(), 20u);
    double last = 0.0;
    for (double l : st.losses) last += l / 4.0;
    EXPECT_NEAR(st.mean_step_errors.back(), last, 1e-15);
    EXPECT_NEAR(st.mean_loss, last, 1e-15);
    EXPECT_THROW(evaluate_episodes(p, std::span<const Episode>{}), ArgumentError);
}
