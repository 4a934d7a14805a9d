#pragma once

#include <cstdint>
#include <string>

#include "core_types.hpp"
#include "tasks.hpp"

namespace badger {

inline constexpr long long kCheckpointFormatVersion = 1;

// Everything needed to resume or evaluate a trained policy. ES keeps no
// optimizer state beyond the parameters, so this is a complete resume point.
struct Checkpoint {
    long long format_version = kCheckpointFormatVersion;
    ParamVector params;
    std::uint64_t generations_completed = 0;
    std::size_t schedule_stage = 0;
    std::uint64_t es_seed = 0;
    TaskKind task_kind = TaskKind::guessing_game;
    std::string created;  // ISO-8601 UTC; not part of the identity of a checkpoint

    ExpertPolicy policy() const { return unflatten(params); }
};

}  // namespace badger
