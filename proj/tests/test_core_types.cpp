#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace badger;
using badger::testing::random_policy;

namespace {

ShapeSpec tiny_shape() {
    ShapeSpec s;
    s.hidden_size = 2;
    s.message_size = 1;
    s.key_size = 1;
    s.input_size = 1;
    return s;
}

}  // namespace

// Hand count for H=2, M=1, K=1, I=1 (cell input x = 1 obs + 2 feedback + 1 msg = 4):
//   update/reset/candidate: 3 * (2*4 input + 2*2 recurrent + 2 bias) = 42
//   W_q, W_k, W_v, W_ok: 4 * 2 = 8;  w_o: 2
TEST(CoreTypes, ParameterCountMatchesHandCount) {
    EXPECT_EQ(parameter_count(tiny_shape()), 52u);
    EXPECT_EQ(flatten(init_policy(tiny_shape(), 1)).size(), 52u);
}

TEST(CoreTypes, InitPolicyIsDeterministic) {
    const ShapeSpec s;
    EXPECT_TRUE(bitwise_equal(init_policy(s, 7), init_policy(s, 7)));
}

TEST(CoreTypes, DifferentSeedsGiveDifferentPolicies) {
    const ShapeSpec s;
    EXPECT_FALSE(bitwise_equal(flatten(init_policy(s, 7)).values, flatten(init_policy(s, 8)).values));
}

TEST(CoreTypes, FreshBiasesAreZeroAtDocumentedOffsets) {
    const ShapeSpec s;
    const auto v = flatten(init_policy(s, 3));
    ASSERT_EQ(v.size() - bias_offset(s), 3 * s.hidden_size);
    for (std::size_t i = bias_offset(s); i < v.size(); ++i) EXPECT_EQ(v.values[i], 0.0) << i;
    // Everything before the biases is a weight drawn from a continuous distribution.
    for (std::size_t i = 0; i < bias_offset(s); ++i) EXPECT_NE(v.values[i], 0.0) << i;
}

TEST(CoreTypes, InitPolicyRespectsFanInScale) {
    const ShapeSpec s;
    const auto p = init_policy(s, 11);
    const double lim_x = 1.0 / std::sqrt(static_cast<double>(s.cell_input_width()));
    const double lim_h = 1.0 / std::sqrt(static_cast<double>(s.hidden_size));
    for (double v : p.w_update.data) EXPECT_LE(std::abs(v), lim_x);
    for (double v : p.u_candidate.data) EXPECT_LE(std::abs(v), lim_h);
    for (double v : p.w_out_value) EXPECT_LE(std::abs(v), lim_h);
}

TEST(CoreTypes, FlattenOrderIsDocumented) {
    const ShapeSpec s = tiny_shape();
    const auto p = random_policy(s, 5);
    const auto v = flatten(p).values;
    const std::size_t H = s.hidden_size, X = s.cell_input_width(), K = s.key_size, M = s.message_size;
    std::size_t off = 0;
    auto expect_block = [&](const std::vector<double>& block) {
        for (std::size_t i = 0; i < block.size(); ++i) EXPECT_EQ(v[off + i], block[i]);
        off += block.size();
    };
    expect_block(p.w_update.data);
    expect_block(p.w_reset.data);
    expect_block(p.w_candidate.data);
    EXPECT_EQ(off, 3 * H * X);
    expect_block(p.u_update.data);
    expect_block(p.u_reset.data);
    expect_block(p.u_candidate.data);
    expect_block(p.w_query.data);
    expect_block(p.w_key.data);
    expect_block(p.w_value.data);
    expect_block(p.w_out_key.data);
    expect_block(p.w_out_value);
    EXPECT_EQ(off, bias_offset(s));
    EXPECT_EQ(off, 3 * H * X + 3 * H * H + 3 * K * H + M * H + H);
    expect_block(p.b_update);
    expect_block(p.b_reset);
    expect_block(p.b_candidate);
    EXPECT_EQ(off, v.size());
    // Row-major: W_update(0, 1) is the second entry.
    EXPECT_EQ(v[1], p.w_update(0, 1));
}

TEST(CoreTypes, UnflattenRejectsWrongLength) {
    const ShapeSpec s;
    ParamVector v{std::vector<double>(parameter_count(s) - 1, 0.0), s};
    EXPECT_THROW(unflatten(v), ShapeError);
    v.values.resize(parameter_count(s) + 1);
    EXPECT_THROW(unflatten(v), ShapeError);
}

TEST(CoreTypes, AllZeroVectorGivesZeroProjections) {
    const ShapeSpec s;
    const auto p = unflatten(ParamVector{std::vector<double>(parameter_count(s), 0.0), s});
    std::vector<double> h(s.hidden_size, 0.7), out(s.key_size, 1.0);
    matvec(p.w_query, h, out);
    for (double v : out) EXPECT_EQ(v, 0.0);
    std::vector<double> vout(s.message_size, 1.0);
    matvec(p.w_value, h, vout);
    for (double v : vout) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(dot(p.w_out_value, h), 0.0);
}

TEST(CoreTypes, ShapeValidation) {
    ShapeSpec s;
    s.hidden_size = 0;
    EXPECT_THROW(s.validate(), ArgumentError);
    EXPECT_THROW(ExpertPolicy{s}, ArgumentError);
}

// Property: for random shapes the count formula matches the flattened length
// and flatten/unflatten is a bitwise bijection.
TEST(CoreTypesProperty, FlattenUnflattenBijectionOverRandomShapes) {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        ShapeSpec s;
        s.hidden_size = static_cast<std::size_t>(rng.uniform_int(1, 12));
        s.message_size = static_cast<std::size_t>(rng.uniform_int(1, 6));
        s.key_size = static_cast<std::size_t>(rng.uniform_int(1, 6));
        s.input_size = static_cast<std::size_t>(rng.uniform_int(1, 5));
        s.id_embedding = rng.bernoulli(0.5);
        s.id_slots = static_cast<std::size_t>(rng.uniform_int(1, 9));

        const auto p = init_policy(s, static_cast<std::uint64_t>(trial));
        const auto flat = flatten(p);
        ASSERT_EQ(flat.size(), parameter_count(s));
        EXPECT_TRUE(bitwise_equal(unflatten(flat), p));

        // Arbitrary bit patterns survive too, including signed zeros.
        ParamVector v{std::vector<double>(parameter_count(s)), s};
        for (auto& x : v.values) x = rng.normal() * 1e3;
        v.values[0] = -0.0;
        EXPECT_TRUE(bitwise_equal(flatten(unflatten(v)).values, v.values));
    }
}
