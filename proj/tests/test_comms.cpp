#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_util.hpp"

using namespace badger;
using badger::testing::random_policy;
using badger::testing::random_states;
using badger::testing::zero_policy;

namespace {

// Shape with a scalar state so values and keys can be set by hand.
ShapeSpec scalar_shape() {
    ShapeSpec s;
    s.hidden_size = 1;
    s.message_size = 1;
    s.key_size = 1;
    s.input_size = 1;
    return s;
}

std::vector<ExpertState> scalar_states(std::initializer_list<double> hs) {
    std::vector<ExpertState> out;
    for (double h : hs) out.push_back(ExpertState{{h}, out.size()});
    return out;
}

AddressSet random_addresses(std::size_t d, std::size_t K, std::uint64_t seed) {
    Rng rng(seed);
    return AddressSet::random(d, K, rng);
}

}  // namespace

TEST(CommunicationRound, SingleExpertReceivesOwnValue) {
    const ShapeSpec s;
    const auto p = random_policy(s, 1);
    Rng rng(2);
    const auto states = random_states(1, s.hidden_size, rng);
    const auto m = communication_round(p, states, Topology::attention());
    std::vector<double> v(s.message_size);
    matvec(p.w_value, states[0].h, v);
    EXPECT_TRUE(bitwise_equal(m[0], v));
}

TEST(CommunicationRound, IdenticalStatesShareValue) {
    const ShapeSpec s;
    const auto p = random_policy(s, 3);
    Rng rng(4);
    auto states = random_states(2, s.hidden_size, rng);
    states[1].h = states[0].h;
    const auto a = attention_weights(p, states);
    EXPECT_DOUBLE_EQ(a[0][0], 0.5);
    EXPECT_DOUBLE_EQ(a[1][1], 0.5);
    const auto m = communication_round(p, states, Topology::attention());
    std::vector<double> v(s.message_size);
    matvec(p.w_value, states[0].h, v);
    for (std::size_t c = 0; c < s.message_size; ++c) {
        EXPECT_NEAR(m[0][c], v[c], 1e-15);
        EXPECT_EQ(m[0][c], m[1][c]);
    }
}

// Values {0, 1, 2}: w_value = 2 with h = {0, 0.5, 1}. Oracle: softmax of
// q_i k_j with q = w_query h, k = w_key h, evaluated by hand.
TEST(CommunicationRound, ThreeScalarExpertsMatchHandEvaluation) {
    const ShapeSpec s = scalar_shape();
    ExpertPolicy p = zero_policy(s);
    p.w_value(0, 0) = 2.0;
    p.w_query(0, 0) = 1.5;
    p.w_key(0, 0) = -0.8;
    const auto states = scalar_states({0.0, 0.5, 1.0});
    const auto m = communication_round(p, states, Topology::attention());
    const double hs[3] = {0.0, 0.5, 1.0}, vs[3] = {0.0, 1.0, 2.0};
    for (int i = 0; i < 3; ++i) {
        double w[3], z = 0.0;
        for (int j = 0; j < 3; ++j) z += w[j] = std::exp(1.5 * hs[i] * -0.8 * hs[j]);
        double want = 0.0;
        for (int j = 0; j < 3; ++j) want += w[j] / z * vs[j];
        EXPECT_NEAR(m[static_cast<std::size_t>(i)][0], want, 1e-14);
        EXPECT_GE(m[static_cast<std::size_t>(i)][0], 0.0);
        EXPECT_LE(m[static_cast<std::size_t>(i)][0], 2.0);
    }
}

TEST(CommunicationRound, MaskedRoundAveragesInNeighbours) {
    const ShapeSpec s = scalar_shape();
    ExpertPolicy p = zero_policy(s);
    p.w_value(0, 0) = 1.0;
    const auto states = scalar_states({0.2, 0.4, 0.9});
    // 0 <- {0}; 1 <- {0, 1}; 2 <- {0, 1, 2}
    const auto topo = Topology::masked(TopologyKind::random_mask, 3, {1, 0, 0, 1, 1, 0, 1, 1, 1});
    const auto m = communication_round(p, states, topo);
    EXPECT_NEAR(m[0][0], 0.2, 1e-15);
    EXPECT_NEAR(m[1][0], 0.3, 1e-15);
    EXPECT_NEAR(m[2][0], 0.5, 1e-15);
}

TEST(CommunicationRound, MaskedTopologySizeMustMatch) {
    const ShapeSpec s;
    const auto p = random_policy(s, 1);
    Rng rng(1);
    const auto states = random_states(4, s.hidden_size, rng);
    EXPECT_THROW(communication_round(p, states, make_layered_adjacency(1, 1, 1)), ShapeError);
}

TEST(CommsProperty, AttentionRowsSumToOne) {
    Rng rng(8);
    const ShapeSpec s;
    for (int trial = 0; trial < 300; ++trial) {
        const auto p = random_policy(s, static_cast<std::uint64_t>(trial), 0.5);
        const auto states = random_states(static_cast<std::size_t>(rng.uniform_int(1, 12)), s.hidden_size, rng);
        for (const auto& row : attention_weights(p, states)) {
            const double sum = std::accumulate(row.begin(), row.end(), 0.0);
            EXPECT_NEAR(sum, 1.0, 1e-6);
        }
    }
}

// Each message component lies within [min_j v_j, max_j v_j] over the senders.
TEST(CommsProperty, MessagesAreConvexCombinationsOfValues) {
    Rng rng(9);
    const ShapeSpec s = badger::testing::small_shape();
    for (int trial = 0; trial < 10000; ++trial) {
        const auto p = random_policy(s, static_cast<std::uint64_t>(trial), 2.0);
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 8));
        const auto states = random_states(n, s.hidden_size, rng);
        const bool masked = trial % 2 == 1;
        const Topology topo = masked ? sample_random_topology(n, 0.4, static_cast<std::uint64_t>(trial))
                                     : Topology::attention();
        const auto msgs = communication_round(p, states, topo);
        std::vector<std::vector<double>> values(n, std::vector<double>(s.message_size));
        for (std::size_t j = 0; j < n; ++j) matvec(p.w_value, states[j].h, values[j]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < s.message_size; ++c) {
                double lo = 1e300, hi = -1e300;
                for (std::size_t j = 0; j < n; ++j) {
                    if (masked && !topo.edge(i, j)) continue;
                    lo = std::min(lo, values[j][c]);
                    hi = std::max(hi, values[j][c]);
                }
                const double tol = 1e-12 * std::max(1.0, std::abs(hi) + std::abs(lo));
                ASSERT_GE(msgs[i][c], lo - tol);
                ASSERT_LE(msgs[i][c], hi + tol);
            }
    }
}

TEST(CommsProperty, PermutationEquivariance) {
    Rng rng(10);
    const ShapeSpec s;
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_policy(s, static_cast<std::uint64_t>(trial), 0.6);
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 10));
        const auto states = random_states(n, s.hidden_size, rng);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
        std::vector<ExpertState> permuted(n);
        for (std::size_t i = 0; i < n; ++i) permuted[i] = states[perm[i]];

        const auto m = communication_round(p, states, Topology::attention());
        const auto mp = communication_round(p, permuted, Topology::attention());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < s.message_size; ++c) EXPECT_NEAR(mp[i][c], m[perm[i]][c], 1e-9);

        const auto addrs = random_addresses(static_cast<std::size_t>(rng.uniform_int(1, 6)), s.key_size, 77u + static_cast<std::uint64_t>(trial));
        const auto y = readout(p, states, addrs);
        const auto yp = readout(p, permuted, addrs);
        for (std::size_t d = 0; d < y.size(); ++d) EXPECT_NEAR(y[d], yp[d], 1e-9);
    }
}

TEST(Readout, SingleExpertOutputsItsValueEverywhere) {
    const ShapeSpec s;
    const auto p = random_policy(s, 12);
    Rng rng(13);
    const auto states = random_states(1, s.hidden_size, rng);
    const auto y = readout(p, states, random_addresses(4, s.key_size, 5));
    const double o = output_values(p, states)[0];
    for (double v : y) EXPECT_EQ(v, o);
}

TEST(Readout, IdenticalAddressesGiveIdenticalOutputs) {
    const ShapeSpec s;
    const auto p = random_policy(s, 14);
    Rng rng(15);
    const auto states = random_states(5, s.hidden_size, rng);
    auto a = random_addresses(2, s.key_size, 6).addresses();
    a.push_back(a[0]);
    const auto y = readout(p, states, AddressSet(a));
    EXPECT_EQ(y[0], y[2]);
}

// Equal keys give uniform weights: o = (0, 1) reads out 1/2; cloning the
// first expert makes it (0, 1, 0) and the readout 1/3.
TEST(Readout, CloningShiftsReadout) {
    const ShapeSpec s = scalar_shape();
    ExpertPolicy p = zero_policy(s);
    p.w_out_value[0] = 1.0;
    const auto states = scalar_states({0.0, 1.0});
    const AddressSet addr(std::vector<std::vector<double>>{{1.0}});
    EXPECT_DOUBLE_EQ(readout(p, states, addr)[0], 0.5);
    const auto grown = clone_experts(states, 3);
    EXPECT_DOUBLE_EQ(readout(p, grown, addr)[0], 1.0 / 3.0);
}

TEST(Readout, EmptyAddressSetThrows) {
    const ShapeSpec s;
    const auto p = random_policy(s, 1);
    Rng rng(1);
    EXPECT_THROW(readout(p, random_states(2, s.hidden_size, rng), AddressSet{}), ArgumentError);
}

TEST(ReadoutProperty, OutputsWithinExpertValueRange) {
    Rng rng(16);
    const ShapeSpec s;
    for (int trial = 0; trial < 500; ++trial) {
        const auto p = random_policy(s, static_cast<std::uint64_t>(trial), 1.0);
        const auto states = random_states(static_cast<std::size_t>(rng.uniform_int(1, 9)), s.hidden_size, rng);
        const auto o = output_values(p, states);
        const auto [lo, hi] = std::minmax_element(o.begin(), o.end());
        for (double y : readout(p, states, random_addresses(5, s.key_size, static_cast<std::uint64_t>(trial)))) {
            EXPECT_GE(y, *lo - 1e-12);
            EXPECT_LE(y, *hi + 1e-12);
        }
    }
}

TEST(AddressSet, AddressesAreUnitNorm) {
    const auto a = random_addresses(6, 8, 3);
    for (const auto& v : a.addresses()) EXPECT_NEAR(std::sqrt(dot(v, v)), 1.0, 1e-15);
    const AddressSet b({{3.0, 4.0}});
    EXPECT_DOUBLE_EQ(b[0][0], 0.6);
    EXPECT_DOUBLE_EQ(b[0][1], 0.8);
    EXPECT_THROW(AddressSet({{0.0, 0.0}}), ArgumentError);
}

// (1,1,1): in -> hid, hid -> hid, hid -> out, plus self-loops on in and out.
TEST(LayeredTopology, SmallestCaseHasFiveEdges) {
    const auto t = make_layered_adjacency(1, 1, 1);
    EXPECT_EQ(t.kind(), TopologyKind::hardwired_layered);
    EXPECT_EQ(t.edge_count(), 5u);
    EXPECT_TRUE(t.edge(0, 0));
    EXPECT_TRUE(t.edge(1, 0));
    EXPECT_TRUE(t.edge(1, 1));
    EXPECT_TRUE(t.edge(2, 1));
    EXPECT_TRUE(t.edge(2, 2));
    EXPECT_FALSE(t.edge(0, 1));
    EXPECT_FALSE(t.edge(2, 0));
    EXPECT_FALSE(t.edge(0, 2));
    EXPECT_FALSE(t.edge(1, 2));
}

TEST(LayeredTopology, EveryExpertHasAnInNeighbour) {
    const auto t = make_layered_adjacency(3, 4, 2);
    for (std::size_t i = 0; i < t.size(); ++i) {
        bool any = false;
        for (std::size_t j = 0; j < t.size(); ++j) any = any || t.edge(i, j);
        EXPECT_TRUE(any);
    }
    ASSERT_TRUE(t.layers().has_value());
    EXPECT_EQ((*t.layers())[0], Layer::input);
    EXPECT_EQ((*t.layers())[3], Layer::hidden);
    EXPECT_EQ((*t.layers())[8], Layer::output);
}

TEST(LayeredTopology, OutputListensToHiddenAndItself) {
    const auto t = make_layered_adjacency(2, 3, 1);
    const std::size_t out = 5;
    std::vector<std::size_t> in;
    for (std::size_t j = 0; j < 6; ++j)
        if (t.edge(out, j)) in.push_back(j);
    EXPECT_EQ(in, (std::vector<std::size_t>{2, 3, 4, 5}));
}

TEST(LayeredTopology, ZeroCountThrows) {
    EXPECT_THROW(make_layered_adjacency(0, 1, 1), ArgumentError);
    EXPECT_THROW(make_layered_adjacency(1, 0, 1), ArgumentError);
    EXPECT_THROW(make_layered_adjacency(1, 1, 0), ArgumentError);
}

TEST(RandomTopology, Examples) {
    const auto full = sample_random_topology(5, 1.0, 1);
    EXPECT_EQ(full.edge_count(), 25u);
    EXPECT_EQ(sample_random_topology(7, 0.3, 9), sample_random_topology(7, 0.3, 9));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto t = sample_random_topology(6, 0.05, seed);
        for (std::size_t i = 0; i < 6; ++i) EXPECT_TRUE(t.edge(i, i));
    }
    EXPECT_THROW(sample_random_topology(0, 0.5, 1), ArgumentError);
    EXPECT_THROW(sample_random_topology(3, 0.0, 1), ArgumentError);
}

TEST(Topology, IsolatedExpertRejectedAtConstruction) {
    EXPECT_THROW(Topology::masked(TopologyKind::random_mask, 2, {1, 0, 0, 0}), TopologyError);
    EXPECT_THROW(Topology::masked(TopologyKind::random_mask, 2, {1, 0, 1}), TopologyError);
    EXPECT_FALSE(Topology::attention().is_masked());
    EXPECT_TRUE(Topology::attention().adjacency().empty());
}

TEST(Topology, RecipeBuildsPerAgentSize) {
    TopologyRecipe r;
    EXPECT_FALSE(r.build(7, 1).is_masked());
    r.kind = TopologyKind::hardwired_layered;
    EXPECT_EQ(r.build(5, 1).size(), 5u);
    EXPECT_THROW(r.build(2, 1), ArgumentError);
    r.kind = TopologyKind::random_mask;
    EXPECT_EQ(r.build(4, 3), sample_random_topology(4, r.edge_prob, 3));
}
