#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cell.hpp"
#include "core_types.hpp"
#include "rng.hpp"

namespace badger {

enum class TopologyKind { all_to_all_attention, hardwired_layered, random_mask };
enum class Layer { input, hidden, output };

inline std::string to_string(TopologyKind k) {
    switch (k) {
        case TopologyKind::all_to_all_attention: return "all_to_all_attention";
        case TopologyKind::hardwired_layered: return "hardwired_layered";
        case TopologyKind::random_mask: return "random_mask";
    }
    return "?";
}

inline TopologyKind topology_kind_from_string(const std::string& s) {
    if (s == "all_to_all_attention") return TopologyKind::all_to_all_attention;
    if (s == "hardwired_layered") return TopologyKind::hardwired_layered;
    if (s == "random_mask") return TopologyKind::random_mask;
    throw ArgumentError("unknown topology kind '" + s + "'");
}

// Who listens to whom. adjacency[i * n + j] == true means expert i receives
// expert j's value (row = receiver).
class Topology {
public:
    static Topology attention() { return Topology{}; }

    static Topology masked(TopologyKind kind, std::size_t n, std::vector<std::uint8_t> adjacency,
                           std::vector<Layer> layers = {}) {
        if (kind == TopologyKind::all_to_all_attention)
            throw TopologyError("masked topology needs a masked kind");
        if (n == 0 || adjacency.size() != n * n) throw TopologyError("adjacency must be n x n with n >= 1");
        for (std::size_t i = 0; i < n; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < n; ++j) any = any || adjacency[i * n + j];
            if (!any) throw TopologyError("expert " + std::to_string(i) + " has no in-neighbour");
        }
        if (!layers.empty() && layers.size() != n) throw TopologyError("layer assignment must cover every expert");
        Topology t;
        t.kind_ = kind;
        t.n_ = n;
        t.adjacency_ = std::move(adjacency);
        if (!layers.empty()) t.layers_ = std::move(layers);
        return t;
    }

    TopologyKind kind() const { return kind_; }
    bool is_masked() const { return kind_ != TopologyKind::all_to_all_attention; }
    // Number of experts the mask was built for (0 for attention, which fits any n).
    std::size_t size() const { return n_; }
    bool edge(std::size_t to, std::size_t from) const { return adjacency_[to * n_ + from] != 0; }
    const std::vector<std::uint8_t>& adjacency() const { return adjacency_; }
    const std::optional<std::vector<Layer>>& layers() const { return layers_; }

    std::size_t edge_count() const {
        std::size_t c = 0;
        for (auto e : adjacency_) c += e;
        return c;
    }

    bool operator==(const Topology&) const = default;

private:
    TopologyKind kind_ = TopologyKind::all_to_all_attention;
    std::size_t n_ = 0;
    std::vector<std::uint8_t> adjacency_;
    std::optional<std::vector<Layer>> layers_;
};

// Input experts feed hidden experts, hidden experts are fully recurrent among
// themselves, hidden experts feed output experts; every expert hears itself.
inline Topology make_layered_adjacency(std::size_t n_in, std::size_t n_hidden, std::size_t n_out) {
    if (n_in == 0 || n_hidden == 0 || n_out == 0) throw ArgumentError("layered topology: every layer needs >= 1 expert");
    const std::size_t n = n_in + n_hidden + n_out;
    std::vector<std::uint8_t> adj(n * n, 0);
    std::vector<Layer> layers(n);
    const std::size_t h0 = n_in, o0 = n_in + n_hidden;
    for (std::size_t i = 0; i < n; ++i) {
        layers[i] = i < h0 ? Layer::input : i < o0 ? Layer::hidden : Layer::output;
        adj[i * n + i] = 1;
    }
    for (std::size_t h = h0; h < o0; ++h) {
        for (std::size_t i = 0; i < h0; ++i) adj[h * n + i] = 1;
        for (std::size_t g = h0; g < o0; ++g) adj[h * n + g] = 1;
        for (std::size_t o = o0; o < n; ++o) adj[o * n + h] = 1;
    }
    return Topology::masked(TopologyKind::hardwired_layered, n, std::move(adj), std::move(layers));
}

inline Topology sample_random_topology(std::size_t n, double edge_prob, std::uint64_t seed) {
    if (n == 0) throw ArgumentError("random topology: n must be >= 1");
    if (!(edge_prob > 0.0 && edge_prob <= 1.0)) throw ArgumentError("random topology: edge_prob must be in (0, 1]");
    Rng rng(derive_seed(seed, {0x70B0ull}));
    std::vector<std::uint8_t> adj(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const bool draw = rng.bernoulli(edge_prob);
            adj[i * n + j] = (i == j) || draw;
        }
    return Topology::masked(TopologyKind::random_mask, n, std::move(adj));
}

// How to build a topology for an agent of arbitrary size (expert counts vary
// across curriculum stages and sweeps).
struct TopologyRecipe {
    TopologyKind kind = TopologyKind::all_to_all_attention;
    double edge_prob = 0.5;  // random_mask only

    // hardwired_layered uses one input expert, one output expert, the rest hidden.
    Topology build(std::size_t n, std::uint64_t seed) const {
        switch (kind) {
            case TopologyKind::all_to_all_attention: return Topology::attention();
            case TopologyKind::random_mask: return sample_random_topology(n, edge_prob, seed);
            case TopologyKind::hardwired_layered:
                if (n < 3) throw ArgumentError("hardwired_layered needs >= 3 experts");
                return make_layered_adjacency(1, n - 2, 1);
        }
        throw ArgumentError("bad topology kind");
    }

    bool operator==(const TopologyRecipe&) const = default;
};

// Unit-norm key vectors, one per output dimension.
class AddressSet {
public:
    AddressSet() = default;

    // Normalizes each address to unit length.
    explicit AddressSet(std::vector<std::vector<double>> addresses) : addrs_(std::move(addresses)) {
        if (addrs_.empty()) throw ArgumentError("AddressSet: d must be >= 1");
        for (auto& a : addrs_) {
            if (a.size() != addrs_.front().size() || a.empty()) throw ShapeError("AddressSet: ragged address lengths");
            const double norm = std::sqrt(dot(a, a));
            if (!(norm > 0.0) || !std::isfinite(norm)) throw ArgumentError("AddressSet: zero or non-finite address");
            for (auto& v : a) v /= norm;
        }
    }

    // Random directions in R^K (normalized Gaussian draws).
    static AddressSet random(std::size_t d, std::size_t key_size, Rng& rng) {
        std::vector<std::vector<double>> a(d, std::vector<double>(key_size));
        for (auto& v : a) {
            do
                for (auto& c : v) c = rng.normal();
            while (dot(v, v) == 0.0);
        }
        return AddressSet(std::move(a));
    }

    std::size_t d() const { return addrs_.size(); }
    std::size_t key_size() const { return addrs_.empty() ? 0 : addrs_.front().size(); }
    std::span<const double> operator[](std::size_t i) const { return addrs_[i]; }
    const std::vector<std::vector<double>>& addresses() const { return addrs_; }

    bool operator==(const AddressSet&) const = default;

private:
    std::vector<std::vector<double>> addrs_;
};

namespace detail {

// Flat per-agent buffers so the inner loop never allocates per step.
struct AgentBuffers {
    std::size_t n = 0;
    std::vector<double> states;    // n x H
    std::vector<double> next;      // n x H
    std::vector<double> queries;   // n x K
    std::vector<double> keys;      // n x K
    std::vector<double> values;    // n x M
    std::vector<double> messages;  // n x M
    std::vector<double> out_keys;  // n x K
    std::vector<double> out_vals;  // n
    std::vector<double> scores;    // n
    std::vector<double> weights;   // n
    std::vector<double> x;         // cell input
    std::vector<double> scratch;   // 3H

    void resize(const ShapeSpec& s, std::size_t n_experts) {
        n = n_experts;
        states.assign(n * s.hidden_size, 0.0);
        next.assign(n * s.hidden_size, 0.0);
        queries.assign(n * s.key_size, 0.0);
        keys.assign(n * s.key_size, 0.0);
        values.assign(n * s.message_size, 0.0);
        messages.assign(n * s.message_size, 0.0);
        out_keys.assign(n * s.key_size, 0.0);
        out_vals.assign(n, 0.0);
        scores.assign(n, 0.0);
        weights.assign(n, 0.0);
        x.assign(s.cell_input_width(), 0.0);
        scratch.assign(3 * s.hidden_size, 0.0);
    }

    std::span<const double> state(std::size_t i, std::size_t H) const { return {states.data() + i * H, H}; }
};

// Fills b.messages from b.states. Aggregation runs over senders in index order.
inline void compute_messages(const ExpertPolicy& p, const Topology& topo, AgentBuffers& b) {
    const std::size_t n = b.n, H = p.shape.hidden_size, K = p.shape.key_size, M = p.shape.message_size;
    if (topo.is_masked() && topo.size() != n)
        throw ShapeError("communication: topology built for " + std::to_string(topo.size()) + " experts, agent has " +
                         std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto h = b.state(i, H);
        matvec(p.w_value, h, std::span<double>(b.values.data() + i * M, M));
        if (!topo.is_masked()) {
            matvec(p.w_query, h, std::span<double>(b.queries.data() + i * K, K));
            matvec(p.w_key, h, std::span<double>(b.keys.data() + i * K, K));
        }
    }
    std::fill(b.messages.begin(), b.messages.end(), 0.0);
    if (!topo.is_masked()) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(K));
        for (std::size_t i = 0; i < n; ++i) {
            const std::span<const double> q(b.queries.data() + i * K, K);
            for (std::size_t j = 0; j < n; ++j)
                b.scores[j] = dot(q, std::span<const double>(b.keys.data() + j * K, K)) * scale;
            softmax_into(std::span<const double>(b.scores.data(), n), std::span<double>(b.weights.data(), n));
            double* m = b.messages.data() + i * M;
            for (std::size_t j = 0; j < n; ++j) {
                const double* v = b.values.data() + j * M;
                for (std::size_t c = 0; c < M; ++c) m[c] += b.weights[j] * v[c];
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            double* m = b.messages.data() + i * M;
            std::size_t count = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (!topo.edge(i, j)) continue;
                ++count;
                const double* v = b.values.data() + j * M;
                for (std::size_t c = 0; c < M; ++c) m[c] += v[c];
            }
            const double inv = 1.0 / static_cast<double>(count);
            for (std::size_t c = 0; c < M; ++c) m[c] *= inv;
        }
    }
}

// y[dim] = sum_i softmax_i(addr_dim . outkey_i / sqrt K) * outval_i
inline void compute_readout(const ExpertPolicy& p, const AddressSet& addrs, AgentBuffers& b, std::span<double> y) {
    const std::size_t n = b.n, H = p.shape.hidden_size, K = p.shape.key_size;
    if (addrs.key_size() != K) throw ShapeError("readout: address length differs from key size");
    for (std::size_t i = 0; i < n; ++i) {
        const auto h = b.state(i, H);
        matvec(p.w_out_key, h, std::span<double>(b.out_keys.data() + i * K, K));
        b.out_vals[i] = dot(p.w_out_value, h);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(K));
    for (std::size_t dim = 0; dim < addrs.d(); ++dim) {
        for (std::size_t i = 0; i < n; ++i)
            b.scores[i] = dot(addrs[dim], std::span<const double>(b.out_keys.data() + i * K, K)) * scale;
        softmax_into(std::span<const double>(b.scores.data(), n), std::span<double>(b.weights.data(), n));
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += b.weights[i] * b.out_vals[i];
        y[dim] = acc;
    }
}

inline void load_states(const ShapeSpec& s, std::span<const ExpertState> states, AgentBuffers& b) {
    if (states.empty()) throw ArgumentError("need at least one expert");
    b.resize(s, states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i].h.size() != s.hidden_size) throw ShapeError("expert state size differs from hidden_size");
        std::copy(states[i].h.begin(), states[i].h.end(), b.states.begin() + i * s.hidden_size);
    }
}

}  // namespace detail

// Messages every expert receives in one exchange (one vector of length M per expert).
inline std::vector<std::vector<double>> communication_round(const ExpertPolicy& policy,
                                                            std::span<const ExpertState> states,
                                                            const Topology& topology) {
    detail::AgentBuffers b;
    detail::load_states(policy.shape, states, b);
    detail::compute_messages(policy, topology, b);
    const std::size_t M = policy.shape.message_size;
    std::vector<std::vector<double>> out(b.n);
    for (std::size_t i = 0; i < b.n; ++i) out[i].assign(b.messages.begin() + i * M, b.messages.begin() + (i + 1) * M);
    return out;
}

// Attention weights a_ij of the all-to-all exchange (row i sums to 1).
inline std::vector<std::vector<double>> attention_weights(const ExpertPolicy& policy,
                                                          std::span<const ExpertState> states) {
    detail::AgentBuffers b;
    detail::load_states(policy.shape, states, b);
    detail::compute_messages(policy, Topology::attention(), b);
    const std::size_t K = policy.shape.key_size;
    const double scale = 1.0 / std::sqrt(static_cast<double>(K));
    std::vector<std::vector<double>> a(b.n, std::vector<double>(b.n));
    for (std::size_t i = 0; i < b.n; ++i) {
        for (std::size_t j = 0; j < b.n; ++j)
            b.scores[j] = dot(std::span<const double>(b.queries.data() + i * K, K),
                              std::span<const double>(b.keys.data() + j * K, K)) * scale;
        softmax_into(std::span<const double>(b.scores.data(), b.n), a[i]);
    }
    return a;
}

// Per-expert scalar value o_i = w_o . h_i pushed to the outputs.
inline std::vector<double> output_values(const ExpertPolicy& policy, std::span<const ExpertState> states) {
    std::vector<double> o;
    o.reserve(states.size());
    for (const auto& s : states) o.push_back(dot(policy.w_out_value, s.h));
    return o;
}

inline std::vector<double> readout(const ExpertPolicy& policy, std::span<const ExpertState> states,
                                   const AddressSet& addrs) {
    if (addrs.d() == 0) throw ArgumentError("readout: d must be >= 1");
    detail::AgentBuffers b;
    detail::load_states(policy.shape, states, b);
    std::vector<double> y(addrs.d());
    detail::compute_readout(policy, addrs, b, y);
    return y;
}

}  // namespace badger
