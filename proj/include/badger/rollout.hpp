#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cell.hpp"
#include "comms.hpp"
#include "tasks.hpp"

namespace badger {

enum class LossVariant { final_step, mean_after_grace };

inline std::string to_string(LossVariant v) {
    return v == LossVariant::final_step ? "final_step" : "mean_after_grace";
}

inline LossVariant loss_variant_from_string(const std::string& s) {
    if (s == "final_step") return LossVariant::final_step;
    if (s == "mean_after_grace") return LossVariant::mean_after_grace;
    throw ArgumentError("unknown loss variant '" + s + "'");
}

struct RolloutConfig {
    std::size_t n_experts = 3;
    std::size_t steps = 20;
    std::size_t comm_rounds_per_step = 1;
    Topology topology = Topology::attention();
    LossVariant loss_variant = LossVariant::final_step;
    std::size_t grace = 5;
    std::uint64_t seed = 0;  // expert state initialization

    void validate() const {
        if (n_experts < 1) throw ArgumentError("RolloutConfig: n_experts must be >= 1");
        if (steps < 1) throw ArgumentError("RolloutConfig: steps must be >= 1");
        if (comm_rounds_per_step < 1) throw ArgumentError("RolloutConfig: comm_rounds_per_step must be >= 1");
        if (loss_variant == LossVariant::mean_after_grace && grace >= steps)
            throw ArgumentError("RolloutConfig: grace must be < steps");
    }
};

struct StepRecord {
    std::vector<double> output;
    Feedback feedback;
    std::vector<std::vector<double>> messages;  // last exchange of the step, per expert
    std::vector<std::vector<double>> states;    // after the step, per expert
};

struct Trajectory {
    std::vector<StepRecord> steps;
    double episode_loss = 0.0;

    std::vector<double> errors() const {
        std::vector<double> e;
        e.reserve(steps.size());
        for (const auto& s : steps) e.push_back(s.feedback.error);
        return e;
    }
};

// Unique small random states break the symmetry between experts that share a policy.
inline std::vector<ExpertState> init_states(std::size_t n, std::size_t H, std::uint64_t seed) {
    if (n < 1) throw ArgumentError("init_states: n must be >= 1");
    Rng rng(derive_seed(seed, {0x57A7ull}));
    std::vector<ExpertState> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].expert_index = i;
        out[i].h.resize(H);
        for (auto& v : out[i].h) v = rng.uniform(-0.1, 0.1);
    }
    return out;
}

// Grows an agent by appending copies: new expert i copies expert (i mod n).
inline std::vector<ExpertState> clone_experts(std::span<const ExpertState> states, std::size_t target_n) {
    if (states.empty()) throw ArgumentError("clone_experts: no experts to clone");
    if (target_n < states.size()) throw ArgumentError("clone_experts: target_n below current expert count");
    std::vector<ExpertState> out;
    out.reserve(target_n);
    for (std::size_t i = 0; i < target_n; ++i) {
        out.push_back(states[i % states.size()]);
        out.back().expert_index = i;
    }
    return out;
}

inline double episode_loss(std::span<const double> errors, LossVariant variant, std::size_t grace) {
    if (errors.empty()) throw ArgumentError("episode_loss: empty error sequence");
    if (variant == LossVariant::final_step) return errors.back();
    if (grace >= errors.size()) throw ArgumentError("episode_loss: grace must be < number of steps");
    double acc = 0.0;
    for (std::size_t t = grace; t < errors.size(); ++t) acc += errors[t];
    return acc / static_cast<double>(errors.size() - grace);
}

inline double episode_loss(const Trajectory& traj, LossVariant variant, std::size_t grace) {
    const auto e = traj.errors();
    return episode_loss(e, variant, grace);
}

namespace detail {

// Runs one inner-loop episode, calling `on_step(t, y, feedback, buffers)` after
// each step. The policy is only read.
template <typename OnStep>
void run_episode(const ExpertPolicy& policy, const TaskInstance& task, const RolloutConfig& cfg,
                 std::span<const ExpertState> initial, AgentBuffers& b, OnStep&& on_step) {
    cfg.validate();
    const ShapeSpec& s = policy.shape;
    const std::size_t n = initial.size(), H = s.hidden_size, M = s.message_size;
    if (n != cfg.n_experts) throw ShapeError("inner_loop: initial states differ from n_experts");
    if (task.observation_plan.size() != n) throw ShapeError("inner_loop: task was sampled for a different expert count");
    if (task.feedback_recipient >= n) throw ShapeError("inner_loop: feedback recipient out of range");
    if (task.addrs.d() != task.d) throw ShapeError("inner_loop: address count differs from d");
    const std::size_t obs_w = s.observation_width();
    for (const auto& plan : task.observation_plan)
        if (plan.size() > obs_w) throw ShapeError("inner_loop: expert observes more components than observation slots");

    load_states(s, initial, b);
    const bool hotcold = uses_hotcold(task.kind);
    std::vector<double> y(task.d);
    Feedback last{};  // feedback from the previous step; zero before step 1
    std::optional<double> prev_error;

    for (std::size_t t = 0; t < cfg.steps; ++t) {
        for (std::size_t round = 0; round < cfg.comm_rounds_per_step; ++round) {
            compute_messages(policy, cfg.topology, b);
            for (std::size_t i = 0; i < n; ++i) {
                double* x = b.x.data();
                std::fill(x, x + obs_w, 0.0);
                const auto& plan = task.observation_plan[i];
                for (std::size_t k = 0; k < plan.size(); ++k) x[k] = task.target[plan[k]];
                const bool recipient = i == task.feedback_recipient;
                x[obs_w] = recipient ? last.error : 0.0;
                x[obs_w + 1] = recipient && hotcold ? last.hotcold : 0.0;
                double* tail = x + obs_w + ShapeSpec::feedback_channels;
                if (s.id_embedding) {
                    std::fill(tail, tail + s.id_slots, 0.0);
                    tail[initial[i].expert_index % s.id_slots] = 1.0;
                    tail += s.id_slots;
                }
                std::copy_n(b.messages.data() + i * M, M, tail);
                gru_update(policy, b.x, b.state(i, H), std::span<double>(b.next.data() + i * H, H), b.scratch);
            }
            std::swap(b.states, b.next);
        }
        compute_readout(policy, task.addrs, b, y);
        last = evaluate(task, y, prev_error);
        prev_error = last.error;
        on_step(t, std::span<const double>(y), last, b);
    }
}

}  // namespace detail

// The inner loop with explicit starting states (used after cloning).
inline Trajectory inner_loop(const ExpertPolicy& policy, const TaskInstance& task, const RolloutConfig& cfg,
                             std::span<const ExpertState> initial) {
    const std::size_t H = policy.shape.hidden_size, M = policy.shape.message_size;
    Trajectory traj;
    traj.steps.reserve(cfg.steps);
    detail::AgentBuffers b;
    detail::run_episode(policy, task, cfg, initial, b,
                        [&](std::size_t, std::span<const double> y, const Feedback& fb, const detail::AgentBuffers& buf) {
                            StepRecord rec;
                            rec.output.assign(y.begin(), y.end());
                            rec.feedback = fb;
                            rec.messages.resize(buf.n);
                            rec.states.resize(buf.n);
                            for (std::size_t i = 0; i < buf.n; ++i) {
                                rec.messages[i].assign(buf.messages.begin() + i * M, buf.messages.begin() + (i + 1) * M);
                                rec.states[i].assign(buf.states.begin() + i * H, buf.states.begin() + (i + 1) * H);
                            }
                            traj.steps.push_back(std::move(rec));
                        });
    traj.episode_loss = episode_loss(traj, cfg.loss_variant, cfg.grace);
    return traj;
}

inline Trajectory inner_loop(const ExpertPolicy& policy, const TaskInstance& task, const RolloutConfig& cfg) {
    const auto states = init_states(cfg.n_experts, policy.shape.hidden_size, cfg.seed);
    return inner_loop(policy, task, cfg, states);
}

// Per-step errors only; same arithmetic as inner_loop without the recording cost.
inline std::vector<double> rollout_errors(const ExpertPolicy& policy, const TaskInstance& task,
                                          const RolloutConfig& cfg, std::span<const ExpertState> initial,
                                          detail::AgentBuffers& buffers) {
    std::vector<double> errors(cfg.steps);
    detail::run_episode(policy, task, cfg, initial, buffers,
                        [&](std::size_t t, std::span<const double>, const Feedback& fb, const detail::AgentBuffers&) {
                            errors[t] = fb.error;
                        });
    return errors;
}

inline std::vector<double> rollout_errors(const ExpertPolicy& policy, const TaskInstance& task,
                                          const RolloutConfig& cfg) {
    detail::AgentBuffers b;
    const auto states = init_states(cfg.n_experts, policy.shape.hidden_size, cfg.seed);
    return rollout_errors(policy, task, cfg, states, b);
}

}  // namespace badger
