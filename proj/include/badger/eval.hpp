#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "outer_es.hpp"
#include "parallel.hpp"
#include "rollout.hpp"

namespace badger {

using TargetSampler = std::function<double(Rng&)>;

inline double uniform_target(Rng& rng) { return rng.uniform(-1.0, 1.0); }

// Loss of the agent that outputs 0 on every dimension at every step.
// Closed form for uniform[-1,1] targets: E[t^2] = 1/3, independent of d.
inline double chance_baseline(std::size_t d, std::size_t n_samples, std::uint64_t seed,
                              const TargetSampler& sampler = uniform_target) {
    if (d < 1) throw ArgumentError("chance_baseline: d must be >= 1");
    if (n_samples < 1) throw ArgumentError("chance_baseline: need at least one sample");
    Rng rng(derive_seed(seed, {0xC4A7ull}));
    double acc = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        double sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double t = sampler(rng);
            sq += t * t;
        }
        acc += sq / static_cast<double>(d);
    }
    return acc / static_cast<double>(n_samples);
}

// Loss of the agent that outputs the cross-dimension target mean on every
// dimension. Closed form for uniform[-1,1] targets: (1/3)(1 - 1/d).
// Uses the same target stream as chance_baseline for equal seeds.
inline double mean_value_baseline(std::size_t d, std::size_t n_samples, std::uint64_t seed,
                                  const TargetSampler& sampler = uniform_target) {
    if (d < 1) throw ArgumentError("mean_value_baseline: d must be >= 1");
    if (n_samples < 1) throw ArgumentError("mean_value_baseline: need at least one sample");
    Rng rng(derive_seed(seed, {0xC4A7ull}));
    std::vector<double> t(d);
    double acc = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        double mean = 0.0;
        for (auto& v : t) {
            v = sampler(rng);
            mean += v;
        }
        mean /= static_cast<double>(d);
        double sq = 0.0;
        for (double v : t) sq += (v - mean) * (v - mean);
        acc += sq / static_cast<double>(d);
    }
    return acc / static_cast<double>(n_samples);
}

inline double chance_closed_form() { return 1.0 / 3.0; }
inline double mean_value_closed_form(std::size_t d) { return (1.0 / 3.0) * (1.0 - 1.0 / static_cast<double>(d)); }

// Aggregate over a set of episodes; reductions run in episode order.
struct EvalStats {
    std::vector<double> losses;            // per episode
    std::vector<double> mean_step_errors;  // per step, averaged over episodes
    double mean_loss = 0.0;
    double std_error = 0.0;  // standard error of mean_loss
};

inline EvalStats evaluate_episodes(const ExpertPolicy& policy, std::span<const Episode> episodes,
                                   std::size_t threads = 0) {
    if (episodes.empty()) throw ArgumentError("evaluate_episodes: no episodes");
    std::vector<std::vector<double>> errors(episodes.size());
    parallel_for(episodes.size(), threads ? threads : thread_count(), [&](std::size_t e) {
        thread_local detail::AgentBuffers buf;
        const auto& ep = episodes[e];
        errors[e] = rollout_errors(policy, ep.task, ep.config, ep.initial, buf);
    });
    EvalStats st;
    const std::size_t T = errors.front().size();
    st.mean_step_errors.assign(T, 0.0);
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const auto& ep = episodes[e];
        st.losses.push_back(episode_loss(errors[e], ep.config.loss_variant, ep.config.grace));
        for (std::size_t t = 0; t < T && t < errors[e].size(); ++t) st.mean_step_errors[t] += errors[e][t];
    }
    const double n = static_cast<double>(episodes.size());
    for (auto& v : st.mean_step_errors) v /= n;
    for (double l : st.losses) st.mean_loss += l;
    st.mean_loss /= n;
    if (episodes.size() > 1) {
        double var = 0.0;
        for (double l : st.losses) var += (l - st.mean_loss) * (l - st.mean_loss);
        var /= n - 1.0;
        st.std_error = std::sqrt(var / n);
    }
    return st;
}

// How a checkpoint is exercised at evaluation time.
struct EvalSettings {
    TaskKind task_kind = TaskKind::guessing_game;
    RolloutDefaults rollout;  // rollout.n_experts is the size the policy was trained at
    std::size_t d = 3;        // task dimension for expert-count sweeps
    std::size_t threads = 0;
};

inline std::uint64_t sweep_episode_seed(std::uint64_t seed, std::size_t d, std::size_t episode) {
    return derive_seed(seed, {0x5EEBull, d, episode});
}

struct SweepRow {
    std::size_t key = 0;  // d or n_experts
    std::size_t d = 0;
    double mean_loss = 0.0;
    double std_error = 0.0;
    double ci95 = 0.0;  // 1.96 * std_error
    std::size_t n_episodes = 0;
    double chance = 0.0;      // closed form
    double mean_value = 0.0;  // closed form at this d
    bool beats_chance() const { return mean_loss < chance; }
    bool beats_mean_value() const { return mean_loss < mean_value; }
};

struct SweepReport {
    std::string key_name;  // "d" or "n_experts"
    std::vector<SweepRow> rows;
};

inline SweepRow make_row(std::size_t key, std::size_t d, const EvalStats& st) {
    SweepRow r;
    r.key = key;
    r.d = d;
    r.mean_loss = st.mean_loss;
    r.std_error = st.std_error;
    r.ci95 = 1.96 * st.std_error;
    r.n_episodes = st.losses.size();
    r.chance = chance_closed_form();
    r.mean_value = mean_value_closed_form(d);
    return r;
}

inline std::vector<Episode> sweep_episodes(const ExpertPolicy& policy, const EvalSettings& s, std::size_t d,
                                           std::size_t n_experts, std::size_t count, std::uint64_t seed) {
    const std::size_t trained_n = s.rollout.n_experts;
    std::vector<Episode> eps;
    eps.reserve(count);
    for (std::size_t e = 0; e < count; ++e) {
        Episode ep = make_episode(s.task_kind, d, n_experts, policy.shape, s.rollout, sweep_episode_seed(seed, d, e));
        if (n_experts != trained_n) {
            // Start from the trained-size agent and grow it (or keep a prefix when shrinking).
            const auto base = init_states(trained_n, policy.shape.hidden_size, ep.config.seed);
            if (n_experts > trained_n) {
                ep.initial = clone_experts(base, n_experts);
            } else {
                ep.initial.assign(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(n_experts));
            }
        }
        eps.push_back(std::move(ep));
    }
    return eps;
}

// Loss versus task dimension with fresh random addresses per episode.
inline SweepReport dimension_sweep(const ExpertPolicy& policy, std::span<const std::size_t> d_values,
                                   std::size_t episodes_per_d, std::uint64_t seed, const EvalSettings& s) {
    if (episodes_per_d < 1) throw ArgumentError("dimension_sweep: need at least one episode per row");
    SweepReport rep{"d", {}};
    for (std::size_t d : d_values) {
        if (d < 1) throw ArgumentError("dimension_sweep: d must be >= 1");
        const auto eps = sweep_episodes(policy, s, d, s.rollout.n_experts, episodes_per_d, seed);
        rep.rows.push_back(make_row(d, d, evaluate_episodes(policy, eps, s.threads)));
    }
    return rep;
}

// Loss versus expert count at fixed d; agents are grown by cloning the
// trained-size agent's initial states.
inline SweepReport expert_count_sweep(const ExpertPolicy& policy, std::span<const std::size_t> n_values,
                                      std::size_t episodes_per_n, std::uint64_t seed, const EvalSettings& s) {
    if (episodes_per_n < 1) throw ArgumentError("expert_count_sweep: need at least one episode per row");
    SweepReport rep{"n_experts", {}};
    for (std::size_t n : n_values) {
        if (n < 1) throw ArgumentError("expert_count_sweep: expert counts must be >= 1");
        const auto eps = sweep_episodes(policy, s, s.d, n, episodes_per_n, seed);
        rep.rows.push_back(make_row(n, s.d, evaluate_episodes(policy, eps, s.threads)));
    }
    return rep;
}

}  // namespace badger
