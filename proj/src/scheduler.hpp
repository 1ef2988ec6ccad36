#pragma once

#include <deque>
#include <optional>
#include <string>

#include "workload.hpp"

namespace agentsim {

enum class PolicyKind {
    AgentServe,        // feedback controller + slot partition
    MixedFcfs,         // single engine, prefills run to completion between steps
    StaticPartition,   // fixed slot split, fixed budget, no feedback
    ChunkedPrefill,    // full GPU, prefill chunks round-robin with decode steps
    AgentServeNoSlots, // budget control active, no SM isolation (chunk time-slicing)
};

PolicyKind parse_policy(const std::string& name);
const char* policy_name(PolicyKind k);

struct ControllerConfig {
    double theta_low_ms = 0.0;   // ms per decode step
    double theta_high_ms = 0.0;
    int delta_r_slots = 1;
    int delta_b_tokens = 64;
    double delta_t_ms = 250.0;
    int b_min_tokens = 64;
    int b_max_tokens = 1024;
    int r_base_slots = 1;
    int initial_b_tokens = 256;
    int initial_r_slots = 1;
    int total_slots = 10;

    void validate() const;
};

struct ControllerState {
    int b_prefill_tokens = 0;
    int r_min_slots = 0;
    double interval_decode_time_ms = 0.0;  // ΔL accumulator
    std::int64_t interval_decode_steps = 0;  // ΔK accumulator
};

// Step-level TPOT over the closing interval: ΔL/ΔK when steps completed,
// absent when the interval saw none (no update signal). Resets accumulators.
std::optional<double> measure_tpot_step(ControllerState& state);

// One feedback update: above theta_high shrink the budget and grow the
// reservation; below theta_low the reverse; inside the band do nothing.
// Comparisons are strict and clamps saturate at the configured bounds.
ControllerState controller_update(const ControllerState& state, double tpot_ms,
                                  const ControllerConfig& cfg);

enum class QueueId { QD, QP };

// Queue placement per the orchestration rules: decode streams always merge
// into Q_D, resume prefills merge only under the budget, cold prefills are
// always routed to the dedicated prefill queue.
QueueId classify_request(const PhaseRequest& req, int b_prefill_tokens);

struct PolicyDecision {
    int decode_slots = 0;
    int prefill_slots = 0;
    bool shared = false;  // single-engine policies: both sides on the full device
    int admitted_budget_tokens = 0;
};

struct PolicyConfig {
    PolicyKind kind = PolicyKind::AgentServe;
    int static_decode_slots = 0;  // static partition split; 0 = total/2
};

// Partition decision for the coming interval.
PolicyDecision decide(const PolicyConfig& policy, const ControllerState& state,
                      const ControllerConfig& cfg);

}  // namespace agentsim
