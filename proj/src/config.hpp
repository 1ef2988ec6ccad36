#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "metrics.hpp"
#include "profile.hpp"
#include "scheduler.hpp"
#include "workload.hpp"

namespace agentsim {

struct ExecutorConfig {
    int total_slots = 0;              // derived from the profile grid
    double rebind_overhead_ms = 0.05; // per context switch
    int resume_chunk_tokens = 16;     // admitted-resume tokens per decode step
    int prefill_chunk_tokens = 256;   // Q_P tile size for chunked execution modes
};

// Fully resolved run configuration. Parsing fills defaults (calibrated SLO,
// derived controller constants, R_g*) so serializing and reloading the
// resolved form reproduces the run exactly.
struct RunConfig {
    ProfileBundle profile;
    WorkloadConfig workload;
    ControllerConfig controller;
    ExecutorConfig executor;
    SloConfig slo;
    PolicyConfig policy;
    std::optional<double> horizon_ms;
    std::uint64_t seed = 0;

    // Derived quantities recorded alongside.
    double r_min_tps = 0.0;
    int r_g_star_slots = 0;
    int mean_cold_tokens = 0;

    nlohmann::json to_json() const;
};

RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace agentsim
