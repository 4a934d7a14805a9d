#pragma once

// Outer loop: antithetic evolution strategies over the flattened expert
// policy, driven by a staged curriculum of task distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "checkpoint_types.hpp"
#include "core_types.hpp"
#include "parallel.hpp"
#include "rollout.hpp"
#include "tasks.hpp"

namespace badger {

struct ESConfig {
    std::size_t n_pop = 64;  // 32 antithetic pairs
    double sigma = 0.05;
    double alpha = 0.01;
    std::size_t batch_size = 50;  // episodes per fitness evaluation
    std::uint64_t generations = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_pop < 2 || n_pop % 2 != 0) throw ArgumentError("ESConfig: n_pop must be even and >= 2");
        if (!(sigma > 0.0)) throw ArgumentError("ESConfig: sigma must be > 0");
        if (!(alpha > 0.0)) throw ArgumentError("ESConfig: alpha must be > 0");
        if (batch_size < 1) throw ArgumentError("ESConfig: batch_size must be >= 1");
    }
};

struct Perturbation {
    ParamVector plus;
    ParamVector minus;
    ParamVector epsilon;
};

inline Perturbation perturb(const ParamVector& params, double sigma, std::uint64_t pair_seed) {
    if (!(sigma > 0.0)) throw ArgumentError("perturb: sigma must be > 0");
    Perturbation p{params, params, ParamVector{std::vector<double>(params.size()), params.shape}};
    Rng rng(derive_seed(pair_seed, {0xE551ull}));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double e = rng.normal();
        p.epsilon.values[i] = e;
        p.plus.values[i] = params.values[i] + sigma * e;
        p.minus.values[i] = params.values[i] - sigma * e;
    }
    return p;
}

// Centered ranks in [-0.5, 0.5]; tied entries share the mean of their ranks.
inline std::vector<double> rank_normalize(std::span<const double> fitness) {
    const std::size_t n = fitness.size();
    if (n == 0) throw ArgumentError("rank_normalize: empty input");
    std::vector<double> out(n, 0.0);
    if (n == 1) return out;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fitness[a] < fitness[b]; });
    const double denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && fitness[order[j + 1]] == fitness[order[i]]) ++j;
        // ranks i..j; twice their mean is i + j
        const double centered = (static_cast<double>(i + j) - denom) / (2.0 * denom);
        for (std::size_t k = i; k <= j; ++k) out[order[k]] = centered;
        i = j + 1;
    }
    return out;
}

// params + alpha / (n_pop * sigma) * sum_i weights_i * eps_i, where eps_i is
// the signed perturbation of member i (+eps for plus, -eps for minus).
inline ParamVector es_update(const ParamVector& params, std::span<const ParamVector> epsilons,
                             std::span<const double> weights, double alpha, double sigma) {
    if (epsilons.size() != weights.size() || epsilons.empty())
        throw ShapeError("es_update: need one weight per population member");
    for (const auto& e : epsilons)
        if (e.size() != params.size()) throw ShapeError("es_update: perturbation length mismatch");
    const double scale = alpha / (static_cast<double>(epsilons.size()) * sigma);
    std::vector<double> grad(params.size(), 0.0);
    for (std::size_t m = 0; m < epsilons.size(); ++m) {
        if (weights[m] == 0.0) continue;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += weights[m] * epsilons[m].values[i];
    }
    ParamVector out = params;
    for (std::size_t i = 0; i < grad.size(); ++i) out.values[i] += scale * grad[i];
    return out;
}

// ---------------------------------------------------------------------------
// Curriculum

enum class AddressMode { fixed_refresh, random_per_episode };

struct IntRange {
    std::size_t lo = 1;
    std::size_t hi = 1;  // inclusive

    bool operator==(const IntRange&) const = default;
    bool fixed() const { return lo == hi; }
};

struct CurriculumStage {
    std::uint64_t batch_begin = 0;
    std::uint64_t batch_end = 0;  // exclusive
    AddressMode address_mode = AddressMode::random_per_episode;
    std::uint64_t refresh_period = 2000;  // fixed_refresh: batches between address changes
    IntRange d{3, 3};
    std::optional<IntRange> n_experts;  // unset: rollout default
    double lr_scale = 1.0;

    bool operator==(const CurriculumStage&) const = default;
};

// Reference learning rates the lr_scale values are expressed against.
inline constexpr double kBaseLearningRate = 1e-4;
inline constexpr double kLoweredLearningRate = 5e-5;

// Five-stage curriculum for the attention readout, with every batch landmark divided by
// `divisor` (1 = original landmarks, 100 = desk scale):
//   [0, 10k)      d=3, fixed addresses refreshed every 2k batches, lr 1e-4
//   [10k, 50k)    d=3, random addresses per episode, lr 1e-4
//   [50k, 150k)   d=3, random addresses, lr 5e-5 (checkpoint at 150k)
//   [150k, 200k)  d=6, random addresses, lr 5e-5
//   [200k, 300k)  d in [3,6], experts in [5,40], random addresses, lr 5e-5
inline std::vector<CurriculumStage> standard_curriculum(std::uint64_t divisor = 100) {
    if (divisor < 1) throw ArgumentError("standard_curriculum: divisor must be >= 1");
    auto at = [&](std::uint64_t b) { return b / divisor; };
    const double lowered = kLoweredLearningRate / kBaseLearningRate;
    const std::uint64_t refresh = std::max<std::uint64_t>(1, at(2000));
    return {
        {at(0), at(10000), AddressMode::fixed_refresh, refresh, {3, 3}, std::nullopt, 1.0},
        {at(10000), at(50000), AddressMode::random_per_episode, refresh, {3, 3}, std::nullopt, 1.0},
        {at(50000), at(150000), AddressMode::random_per_episode, refresh, {3, 3}, std::nullopt, lowered},
        {at(150000), at(200000), AddressMode::random_per_episode, refresh, {6, 6}, std::nullopt, lowered},
        {at(200000), at(300000), AddressMode::random_per_episode, refresh, {3, 6}, IntRange{5, 40}, lowered},
    };
}

inline void validate_schedule(std::span<const CurriculumStage> schedule) {
    if (schedule.empty()) throw ScheduleError("schedule is empty");
    std::uint64_t expect = 0;
    for (const auto& s : schedule) {
        if (s.batch_begin != expect) throw ScheduleError("schedule stages must be contiguous from batch 0");
        if (s.batch_end <= s.batch_begin) throw ScheduleError("schedule stage has an empty batch range");
        if (s.d.lo < 1 || s.d.hi < s.d.lo) throw ScheduleError("schedule stage has an empty d range");
        if (s.n_experts && (s.n_experts->lo < 1 || s.n_experts->hi < s.n_experts->lo))
            throw ScheduleError("schedule stage has an empty expert-count range");
        if (s.address_mode == AddressMode::fixed_refresh && s.refresh_period < 1)
            throw ScheduleError("fixed-address stage needs refresh_period >= 1");
        if (!(s.lr_scale > 0.0)) throw ScheduleError("schedule stage lr_scale must be > 0");
        expect = s.batch_end;
    }
}

struct StagePosition {
    std::size_t index = 0;
    CurriculumStage stage;
    // Fixed-address stages: addresses are a function of this seed, which
    // changes exactly at multiples of the refresh period.
    std::optional<std::uint64_t> address_seed;
};

inline StagePosition curriculum_stage(std::uint64_t batch_index, std::span<const CurriculumStage> schedule) {
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const auto& s = schedule[i];
        if (batch_index >= s.batch_begin && batch_index < s.batch_end) {
            StagePosition pos{i, s, std::nullopt};
            if (s.address_mode == AddressMode::fixed_refresh) pos.address_seed = batch_index / s.refresh_period;
            return pos;
        }
    }
    throw ScheduleError("batch " + std::to_string(batch_index) + " is beyond the curriculum schedule");
}

// ---------------------------------------------------------------------------
// Training

// Rollout settings shared by all episodes; stages may override d and n_experts.
struct RolloutDefaults {
    std::size_t n_experts = 3;
    std::size_t steps = 20;
    std::size_t comm_rounds_per_step = 1;
    TopologyRecipe topology;
    LossVariant loss_variant = LossVariant::final_step;
    std::size_t grace = 5;
    std::size_t feedback_recipient = 0;

    bool operator==(const RolloutDefaults&) const = default;
};

// A fully specified episode: task, rollout settings and starting states.
struct Episode {
    TaskInstance task;
    RolloutConfig config;
    std::vector<ExpertState> initial;
};

inline Episode make_episode(TaskKind kind, std::size_t d, std::size_t n_experts, const ShapeSpec& shape,
                            const RolloutDefaults& rd, std::uint64_t seed,
                            const std::optional<AddressSet>& fixed_addrs = std::nullopt) {
    Episode ep;
    ep.task = sample_task(kind, d, n_experts, shape.key_size, derive_seed(seed, {1}), fixed_addrs,
                          std::min(rd.feedback_recipient, n_experts - 1));
    ep.config.n_experts = n_experts;
    ep.config.steps = rd.steps;
    ep.config.comm_rounds_per_step = rd.comm_rounds_per_step;
    ep.config.topology = rd.topology.build(n_experts, derive_seed(seed, {2}));
    ep.config.loss_variant = rd.loss_variant;
    ep.config.grace = rd.grace;
    ep.config.seed = derive_seed(seed, {3});
    ep.initial = init_states(n_experts, shape.hidden_size, ep.config.seed);
    return ep;
}

struct TrainSetup {
    ESConfig es;
    std::vector<CurriculumStage> schedule;
    ShapeSpec shape;
    TaskKind task_kind = TaskKind::guessing_game;
    RolloutDefaults rollout;
};

// The batch of episodes that every population member of generation `g` is scored on.
inline std::vector<Episode> generation_episodes(const TrainSetup& setup, std::uint64_t generation) {
    const StagePosition pos = curriculum_stage(generation, setup.schedule);
    const auto& st = pos.stage;
    std::vector<Episode> eps;
    eps.reserve(setup.es.batch_size);
    for (std::size_t e = 0; e < setup.es.batch_size; ++e) {
        const std::uint64_t ep_seed = derive_seed(setup.es.seed, {0xE91Dull, generation, e});
        Rng pick(derive_seed(ep_seed, {0}));
        const std::size_t d = static_cast<std::size_t>(pick.uniform_int(st.d.lo, st.d.hi));
        const IntRange nr = st.n_experts.value_or(IntRange{setup.rollout.n_experts, setup.rollout.n_experts});
        const std::size_t n = static_cast<std::size_t>(pick.uniform_int(nr.lo, nr.hi));
        std::optional<AddressSet> fixed;
        if (pos.address_seed) {
            Rng addr_rng(derive_seed(setup.es.seed, {0xF1DEull, *pos.address_seed, d}));
            fixed = AddressSet::random(d, setup.shape.key_size, addr_rng);
        }
        eps.push_back(make_episode(setup.task_kind, d, n, setup.shape, setup.rollout, ep_seed, fixed));
    }
    return eps;
}

// Mean episode loss of `policy` over `episodes`. Never modifies the policy.
inline double mean_episode_loss(const ExpertPolicy& policy, std::span<const Episode> episodes,
                                detail::AgentBuffers& buffers) {
    double acc = 0.0;
    for (const auto& ep : episodes) {
        const auto errs = rollout_errors(policy, ep.task, ep.config, ep.initial, buffers);
        acc += episode_loss(errs, ep.config.loss_variant, ep.config.grace);
    }
    return acc / static_cast<double>(episodes.size());
}

struct GenerationLog {
    std::uint64_t generation = 0;
    std::size_t stage = 0;
    double lr_scale = 1.0;
    double mean_loss = 0.0;  // over the population
    double min_loss = 0.0;
    double max_loss = 0.0;
};

struct TrainOptions {
    std::optional<Checkpoint> resume;  // continue from here instead of a fresh policy
    std::size_t threads = 0;          // 0: thread_count()
    // Called after every generation with the updated parameters; return false to stop early.
    std::function<bool(const GenerationLog&, const ParamVector&)> on_generation;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<GenerationLog> log;
};

inline ParamVector initial_parameters(const TrainSetup& setup) {
    return flatten(init_policy(setup.shape, derive_seed(setup.es.seed, {0x1417ull})));
}

// Runs generations [start, es.generations). Each generation draws n_pop/2
// antithetic pairs, scores every member on the same batch of episodes,
// shapes fitness by centered rank of the negated loss and takes one ES step
// scaled by the stage's lr_scale. Bit-reproducible for a fixed setup.
inline TrainResult train(const TrainSetup& setup, const TrainOptions& opts = {}) {
    setup.es.validate();
    setup.shape.validate();
    validate_schedule(setup.schedule);
    if (setup.es.generations > setup.schedule.back().batch_end)
        throw ScheduleError("train: generations run past the end of the schedule");

    TrainResult result;
    Checkpoint& ck = result.checkpoint;
    if (opts.resume) {
        ck = *opts.resume;
        if (!(ck.params.shape == setup.shape)) throw ShapeError("train: resume checkpoint has a different shape");
    } else {
        ck.params = initial_parameters(setup);
    }
    ck.es_seed = setup.es.seed;
    ck.task_kind = setup.task_kind;

    const std::size_t threads = opts.threads ? opts.threads : thread_count();
    const std::size_t n_pop = setup.es.n_pop, pairs = n_pop / 2;
    std::vector<ParamVector> eps(n_pop);
    std::vector<double> losses(n_pop);

    for (std::uint64_t g = ck.generations_completed; g < setup.es.generations; ++g) {
        const StagePosition pos = curriculum_stage(g, setup.schedule);
        const std::vector<Episode> episodes = generation_episodes(setup, g);

        parallel_for(pairs, threads, [&](std::size_t p) {
            thread_local detail::AgentBuffers buf;
            const auto pert = perturb(ck.params, setup.es.sigma, derive_seed(setup.es.seed, {0x9A12ull, g, p}));
            losses[2 * p] = mean_episode_loss(unflatten(pert.plus), episodes, buf);
            losses[2 * p + 1] = mean_episode_loss(unflatten(pert.minus), episodes, buf);
            eps[2 * p] = pert.epsilon;
            eps[2 * p + 1] = pert.epsilon;
            for (auto& v : eps[2 * p + 1].values) v = -v;
        });

        std::vector<double> neg(n_pop);
        for (std::size_t m = 0; m < n_pop; ++m) neg[m] = -losses[m];
        const auto weights = rank_normalize(neg);
        ck.params = es_update(ck.params, eps, weights, setup.es.alpha * pos.stage.lr_scale, setup.es.sigma);
        ck.generations_completed = g + 1;
        ck.schedule_stage = pos.index;

        GenerationLog row;
        row.generation = g;
        row.stage = pos.index;
        row.lr_scale = pos.stage.lr_scale;
        row.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n_pop);
        row.min_loss = *std::min_element(losses.begin(), losses.end());
        row.max_loss = *std::max_element(losses.begin(), losses.end());
        result.log.push_back(row);
        if (opts.on_generation && !opts.on_generation(row, ck.params)) break;
    }
    return result;
}

}  // namespace badger
