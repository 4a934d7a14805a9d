#pragma once

#include "cell.hpp"
#include "checkpoint.hpp"
#include "comms.hpp"
#include "config.hpp"
#include "core_types.hpp"
#include "eval.hpp"
#include "export.hpp"
#include "outer_es.hpp"
#include "rollout.hpp"
#include "tasks.hpp"
