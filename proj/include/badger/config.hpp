#pragma once

// Run configuration: a JSON document whose key tree mirrors RunConfig.
// Unknown keys are rejected; es.seed is mandatory.
//
// {
//   "shape":    {"hidden_size": 32, "message_size": 8, "key_size": 8,
//                "input_size": 1, "id_embedding": false, "id_slots": 8},
//   "task":     {"kind": "guessing_game", "d": 1, "feedback_recipient": 0},
//   "rollout":  {"n_experts": 3, "steps": 20, "comm_rounds": 1,
//                "topology": "all_to_all_attention", "edge_prob": 0.5,
//                "loss_variant": "final_step", "grace": 5},
//   "es":       {"n_pop": 64, "sigma": 0.05, "alpha": 0.01, "batch_size": 50,
//                "generations": 5000, "seed": 1},
//   "schedule": {"kind": "single"},
//   "output_dir": "runs"
// }
//
// task.d and rollout.n_experts take an integer or an inclusive [lo, hi] pair.
// schedule.kind is "single" (one stage spanning all generations with random
// addresses, d and n from task/rollout), "curriculum" (with "divisor") or
// "stages" (with an explicit "stages" list).

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "eval.hpp"
#include "outer_es.hpp"

namespace badger {

enum class ScheduleKind { single, curriculum, stages };

struct RunConfig {
    ShapeSpec shape;
    TaskKind task_kind = TaskKind::guessing_game;
    IntRange d{1, 1};
    std::size_t feedback_recipient = 0;
    IntRange n_experts{3, 3};
    RolloutDefaults rollout;  // n_experts / feedback_recipient are filled from the fields above
    ESConfig es;
    ScheduleKind schedule_kind = ScheduleKind::single;
    std::uint64_t schedule_divisor = 100;
    std::vector<CurriculumStage> stages;  // ScheduleKind::stages
    std::string output_dir = "runs";

    std::vector<CurriculumStage> schedule() const {
        switch (schedule_kind) {
            case ScheduleKind::single: {
                CurriculumStage st;
                st.batch_begin = 0;
                st.batch_end = std::max<std::uint64_t>(es.generations, 1);
                st.address_mode = AddressMode::random_per_episode;
                st.d = d;
                if (!n_experts.fixed()) st.n_experts = n_experts;
                return {st};
            }
            case ScheduleKind::curriculum: return standard_curriculum(schedule_divisor);
            case ScheduleKind::stages: return stages;
        }
        return {};
    }

    RolloutDefaults rollout_defaults() const {
        RolloutDefaults r = rollout;
        r.n_experts = n_experts.lo;
        r.feedback_recipient = feedback_recipient;
        return r;
    }

    TrainSetup train_setup() const { return TrainSetup{es, schedule(), shape, task_kind, rollout_defaults()}; }

    EvalSettings eval_settings() const {
        EvalSettings s;
        s.task_kind = task_kind;
        s.rollout = rollout_defaults();
        s.d = d.lo;
        return s;
    }
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <typename T>
T get_or(const json& j, const char* key, const std::string& where, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
            if (!j.at(key).is_number_unsigned()) throw ConfigError(where + "." + key + ": expected a non-negative integer");
        }
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline IntRange range_or(const json& j, const char* key, const std::string& where, IntRange fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    IntRange r;
    if (v.is_number_unsigned()) {
        r.lo = r.hi = v.get<std::size_t>();
    } else if (v.is_array() && v.size() == 2 && v[0].is_number_unsigned() && v[1].is_number_unsigned()) {
        r.lo = v[0].get<std::size_t>();
        r.hi = v[1].get<std::size_t>();
    } else {
        throw ConfigError(where + "." + key + ": expected an integer or [lo, hi]");
    }
    if (r.lo < 1 || r.hi < r.lo) throw ConfigError(where + "." + key + ": empty range");
    return r;
}

inline json range_json(const IntRange& r) {
    if (r.fixed()) return r.lo;
    return json::array({r.lo, r.hi});
}

inline std::string address_mode_str(AddressMode m) {
    return m == AddressMode::fixed_refresh ? "fixed_refresh" : "random_per_episode";
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    json j;
    j["shape"] = {{"hidden_size", c.shape.hidden_size}, {"message_size", c.shape.message_size},
                  {"key_size", c.shape.key_size},       {"input_size", c.shape.input_size},
                  {"id_embedding", c.shape.id_embedding}, {"id_slots", c.shape.id_slots}};
    j["task"] = {{"kind", to_string(c.task_kind)},
                 {"d", detail::range_json(c.d)},
                 {"feedback_recipient", c.feedback_recipient}};
    j["rollout"] = {{"n_experts", detail::range_json(c.n_experts)},
                    {"steps", c.rollout.steps},
                    {"comm_rounds", c.rollout.comm_rounds_per_step},
                    {"topology", to_string(c.rollout.topology.kind)},
                    {"edge_prob", c.rollout.topology.edge_prob},
                    {"loss_variant", to_string(c.rollout.loss_variant)},
                    {"grace", c.rollout.grace}};
    j["es"] = {{"n_pop", c.es.n_pop},           {"sigma", c.es.sigma},   {"alpha", c.es.alpha},
               {"batch_size", c.es.batch_size}, {"generations", c.es.generations}, {"seed", c.es.seed}};
    switch (c.schedule_kind) {
        case ScheduleKind::single: j["schedule"] = {{"kind", "single"}}; break;
        case ScheduleKind::curriculum: j["schedule"] = {{"kind", "curriculum"}, {"divisor", c.schedule_divisor}}; break;
        case ScheduleKind::stages: {
            json stages = json::array();
            for (const auto& s : c.stages) {
                json st = {{"begin", s.batch_begin},
                           {"end", s.batch_end},
                           {"address_mode", detail::address_mode_str(s.address_mode)},
                           {"refresh_period", s.refresh_period},
                           {"d", detail::range_json(s.d)},
                           {"lr_scale", s.lr_scale}};
                if (s.n_experts) st["n_experts"] = detail::range_json(*s.n_experts);
                stages.push_back(st);
            }
            j["schedule"] = {{"kind", "stages"}, {"stages", stages}};
            break;
        }
    }
    j["output_dir"] = c.output_dir;
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    using namespace detail;
    check_keys(j, "config", {"shape", "task", "rollout", "es", "schedule", "output_dir"});
    RunConfig c;
    const json empty = json::object();

    const json& sh = j.value("shape", empty);
    check_keys(sh, "shape", {"hidden_size", "message_size", "key_size", "input_size", "id_embedding", "id_slots"});
    c.shape.hidden_size = get_or<std::size_t>(sh, "hidden_size", "shape", c.shape.hidden_size);
    c.shape.message_size = get_or<std::size_t>(sh, "message_size", "shape", c.shape.message_size);
    c.shape.key_size = get_or<std::size_t>(sh, "key_size", "shape", c.shape.key_size);
    c.shape.input_size = get_or<std::size_t>(sh, "input_size", "shape", c.shape.input_size);
    c.shape.id_embedding = get_or<bool>(sh, "id_embedding", "shape", c.shape.id_embedding);
    c.shape.id_slots = get_or<std::size_t>(sh, "id_slots", "shape", c.shape.id_slots);

    const json& tk = j.value("task", empty);
    check_keys(tk, "task", {"kind", "d", "feedback_recipient"});
    c.task_kind = task_kind_from_string(get_or<std::string>(tk, "kind", "task", to_string(c.task_kind)));
    c.d = range_or(tk, "d", "task", c.d);
    c.feedback_recipient = get_or<std::size_t>(tk, "feedback_recipient", "task", c.feedback_recipient);

    const json& ro = j.value("rollout", empty);
    check_keys(ro, "rollout", {"n_experts", "steps", "comm_rounds", "topology", "edge_prob", "loss_variant", "grace"});
    c.n_experts = range_or(ro, "n_experts", "rollout", c.n_experts);
    c.rollout.steps = get_or<std::size_t>(ro, "steps", "rollout", c.rollout.steps);
    c.rollout.comm_rounds_per_step = get_or<std::size_t>(ro, "comm_rounds", "rollout", c.rollout.comm_rounds_per_step);
    c.rollout.topology.kind =
        topology_kind_from_string(get_or<std::string>(ro, "topology", "rollout", to_string(c.rollout.topology.kind)));
    c.rollout.topology.edge_prob = get_or<double>(ro, "edge_prob", "rollout", c.rollout.topology.edge_prob);
    c.rollout.loss_variant =
        loss_variant_from_string(get_or<std::string>(ro, "loss_variant", "rollout", to_string(c.rollout.loss_variant)));
    c.rollout.grace = get_or<std::size_t>(ro, "grace", "rollout", c.rollout.grace);

    if (!j.contains("es")) throw ConfigError("config: missing 'es' section (es.seed is required)");
    const json& es = j.at("es");
    check_keys(es, "es", {"n_pop", "sigma", "alpha", "batch_size", "generations", "seed"});
    if (!es.contains("seed")) throw ConfigError("es.seed is required");
    c.es.n_pop = get_or<std::size_t>(es, "n_pop", "es", c.es.n_pop);
    c.es.sigma = get_or<double>(es, "sigma", "es", c.es.sigma);
    c.es.alpha = get_or<double>(es, "alpha", "es", c.es.alpha);
    c.es.batch_size = get_or<std::size_t>(es, "batch_size", "es", c.es.batch_size);
    c.es.generations = get_or<std::uint64_t>(es, "generations", "es", c.es.generations);
    c.es.seed = get_or<std::uint64_t>(es, "seed", "es", 0);

    const json& sc = j.value("schedule", json{{"kind", "single"}});
    check_keys(sc, "schedule", {"kind", "divisor", "stages"});
    const auto kind = get_or<std::string>(sc, "kind", "schedule", "single");
    if (kind == "single") {
        c.schedule_kind = ScheduleKind::single;
    } else if (kind == "curriculum") {
        c.schedule_kind = ScheduleKind::curriculum;
        c.schedule_divisor = get_or<std::uint64_t>(sc, "divisor", "schedule", c.schedule_divisor);
    } else if (kind == "stages") {
        c.schedule_kind = ScheduleKind::stages;
        if (!sc.contains("stages") || !sc.at("stages").is_array()) throw ConfigError("schedule.stages: expected a list");
        for (const auto& st : sc.at("stages")) {
            check_keys(st, "schedule.stages[]", {"begin", "end", "address_mode", "refresh_period", "d", "n_experts", "lr_scale"});
            CurriculumStage s;
            s.batch_begin = get_or<std::uint64_t>(st, "begin", "stage", 0);
            s.batch_end = get_or<std::uint64_t>(st, "end", "stage", 0);
            const auto mode = get_or<std::string>(st, "address_mode", "stage", "random_per_episode");
            if (mode == "fixed_refresh") s.address_mode = AddressMode::fixed_refresh;
            else if (mode == "random_per_episode") s.address_mode = AddressMode::random_per_episode;
            else throw ConfigError("stage.address_mode: unknown mode '" + mode + "'");
            s.refresh_period = get_or<std::uint64_t>(st, "refresh_period", "stage", s.refresh_period);
            s.d = range_or(st, "d", "stage", s.d);
            if (st.contains("n_experts")) s.n_experts = range_or(st, "n_experts", "stage", IntRange{});
            s.lr_scale = get_or<double>(st, "lr_scale", "stage", s.lr_scale);
            c.stages.push_back(s);
        }
    } else {
        throw ConfigError("schedule.kind: unknown kind '" + kind + "'");
    }
    c.output_dir = get_or<std::string>(j, "output_dir", "config", c.output_dir);

    // Surface invalid combinations now rather than mid-training.
    try {
        c.shape.validate();
        c.es.validate();
        const auto sched = c.schedule();
        validate_schedule(sched);
        if (c.es.generations > sched.back().batch_end)
            throw ConfigError("es.generations exceeds the schedule's last batch");
        if (c.feedback_recipient >= c.n_experts.lo) throw ConfigError("task.feedback_recipient must be < n_experts");
        RolloutConfig probe;
        probe.steps = c.rollout.steps;
        probe.comm_rounds_per_step = c.rollout.comm_rounds_per_step;
        probe.loss_variant = c.rollout.loss_variant;
        probe.grace = c.rollout.grace;
        probe.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return c;
}

inline RunConfig parse_run_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        return run_config_from_json(j);
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
}

// Canonical form: keys sorted, every default spelled out.
inline std::string canonical_config(const RunConfig& c) { return to_json(c).dump(); }

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

// "<16 hex digits of the canonical-config hash>-s<seed>"
inline std::string run_directory_name(const RunConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config(c))));
    return std::string(buf) + "-s" + std::to_string(c.es.seed);
}

}  // namespace badger
