#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "comms.hpp"
#include "rng.hpp"

namespace badger {

enum class TaskKind { guessing_game, dim_optimization, identity_hotcold };

inline std::string to_string(TaskKind k) {
    switch (k) {
        case TaskKind::guessing_game: return "guessing_game";
        case TaskKind::dim_optimization: return "dim_optimization";
        case TaskKind::identity_hotcold: return "identity_hotcold";
    }
    return "?";
}

inline TaskKind task_kind_from_string(const std::string& s) {
    if (s == "guessing_game") return TaskKind::guessing_game;
    if (s == "dim_optimization") return TaskKind::dim_optimization;
    if (s == "identity_hotcold") return TaskKind::identity_hotcold;
    throw ArgumentError("unknown task kind '" + s + "'");
}

// Whether the step-to-step error change is fed to the recipient expert.
inline bool uses_hotcold(TaskKind k) { return k == TaskKind::identity_hotcold; }

struct TaskInstance {
    TaskKind kind = TaskKind::guessing_game;
    std::size_t d = 1;
    std::vector<double> target;  // each component in [-1, 1]
    AddressSet addrs;
    std::size_t feedback_recipient = 0;
    // Target components each expert observes (identity_hotcold only; round-robin).
    std::vector<std::vector<std::size_t>> observation_plan;
};

struct Feedback {
    double error = 0.0;
    double hotcold = 0.0;  // previous error minus current error; positive means improving
};

inline TaskInstance sample_task(TaskKind kind, std::size_t d, std::size_t n_experts, std::size_t key_size,
                                std::uint64_t seed, const std::optional<AddressSet>& fixed_addrs = std::nullopt,
                                std::size_t feedback_recipient = 0) {
    if (d < 1) throw ArgumentError("sample_task: d must be >= 1");
    if (n_experts < 1) throw ArgumentError("sample_task: n_experts must be >= 1");
    if (feedback_recipient >= n_experts) throw ArgumentError("sample_task: feedback recipient out of range");
    if (fixed_addrs && (fixed_addrs->d() != d || fixed_addrs->key_size() != key_size))
        throw ArgumentError("sample_task: fixed addresses do not match d / key size");
    TaskInstance t;
    t.kind = kind;
    t.d = d;
    t.feedback_recipient = feedback_recipient;
    Rng rng(derive_seed(seed, {0x7A5Cull}));
    t.target.resize(d);
    for (auto& v : t.target) v = rng.uniform(-1.0, 1.0);
    if (fixed_addrs) {
        t.addrs = *fixed_addrs;
    } else {
        Rng addr_rng(derive_seed(seed, {0xADD7ull}));
        t.addrs = AddressSet::random(d, key_size, addr_rng);
    }
    t.observation_plan.assign(n_experts, {});
    if (kind == TaskKind::identity_hotcold)
        for (std::size_t c = 0; c < d; ++c) t.observation_plan[c % n_experts].push_back(c);
    return t;
}

// error = mean over dimensions of (output - target)^2
inline Feedback evaluate(const TaskInstance& task, std::span<const double> output,
                         std::optional<double> prev_error = std::nullopt) {
    if (output.size() != task.d) throw ShapeError("evaluate: output length differs from task dimension");
    double acc = 0.0;
    for (std::size_t i = 0; i < task.d; ++i) {
        const double e = output[i] - task.target[i];
        acc += e * e;
    }
    Feedback fb;
    fb.error = acc / static_cast<double>(task.d);
    fb.hotcold = prev_error ? *prev_error - fb.error : 0.0;
    return fb;
}

// The error reaches only the designated recipient; everyone else sees 0.
inline std::vector<double> route_feedback(const Feedback& fb, std::size_t n_experts, std::size_t recipient) {
    if (recipient >= n_experts) throw ArgumentError("route_feedback: recipient out of range");
    std::vector<double> out(n_experts, 0.0);
    out[recipient] = fb.error;
    return out;
}

}  // namespace badger
