#pragma once

#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "trace.hpp"

namespace agentsim {

struct RunResult {
    Trace trace;
    std::optional<std::string> protocol_error;  // set when the run aborted mid-way
};

// Deterministic event loop over workload, scheduler, and executor. Throws on
// validation errors; protocol errors abort but preserve the trace so far.
RunResult run_simulation_capture(const RunConfig& cfg);

// Convenience wrapper that rethrows protocol errors.
Trace run_simulation(const RunConfig& cfg);

struct ReplayReport {
    int mismatches = 0;
    std::vector<std::string> notes;

    std::string to_json() const;
};

// Anti-bug oracle: independently recomputes interval summaries, TPOT values,
// controller transitions, token accounting, phase order, and event ordering
// from the raw events, reporting every disagreement with the recorded values.
ReplayReport replay_check(const Trace& trace);

}  // namespace agentsim
