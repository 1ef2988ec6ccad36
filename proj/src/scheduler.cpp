#include "scheduler.hpp"

#include <algorithm>

#include "error.hpp"

namespace agentsim {

PolicyKind parse_policy(const std::string& name) {
    if (name == "agentserve") return PolicyKind::AgentServe;
    if (name == "mixed_fcfs") return PolicyKind::MixedFcfs;
    if (name == "static_partition") return PolicyKind::StaticPartition;
    if (name == "chunked_prefill") return PolicyKind::ChunkedPrefill;
    if (name == "agentserve_no_slots") return PolicyKind::AgentServeNoSlots;
    throw_validation("unknown policy '" + name +
                     "' (expected agentserve, mixed_fcfs, static_partition, "
                     "chunked_prefill, or agentserve_no_slots)");
}

const char* policy_name(PolicyKind k) {
    switch (k) {
    case PolicyKind::AgentServe: return "agentserve";
    case PolicyKind::MixedFcfs: return "mixed_fcfs";
    case PolicyKind::StaticPartition: return "static_partition";
    case PolicyKind::ChunkedPrefill: return "chunked_prefill";
    case PolicyKind::AgentServeNoSlots: return "agentserve_no_slots";
    }
    return "?";
}

void ControllerConfig::validate() const {
    if (!(theta_low_ms > 0.0 && theta_low_ms < theta_high_ms)) {
        throw_validation("controller: need 0 < theta_low < theta_high, got [" +
                         std::to_string(theta_low_ms) + ", " + std::to_string(theta_high_ms) +
                         "]");
    }
    if (delta_t_ms <= 0.0) {
        throw_validation("controller: delta_t must be > 0");
    }
    if (delta_r_slots < 1 || delta_b_tokens < 1) {
        throw_validation("controller: delta_r and delta_b must be >= 1");
    }
    if (b_min_tokens < 0 || !(b_min_tokens <= initial_b_tokens && initial_b_tokens <= b_max_tokens)) {
        throw_validation("controller: need 0 <= b_min <= initial_b <= b_max");
    }
    if (r_base_slots < 1) {
        throw_validation("controller: r_base must be >= 1 slot (decode reservation "
                         "cannot be empty)");
    }
    if (!(r_base_slots <= initial_r_slots && initial_r_slots <= total_slots)) {
        throw_validation("controller: need r_base <= initial_r <= total_slots");
    }
}

std::optional<double> measure_tpot_step(ControllerState& state) {
    std::optional<double> tpot;
    if (state.interval_decode_steps > 0) {
        tpot = state.interval_decode_time_ms / static_cast<double>(state.interval_decode_steps);
    }
    state.interval_decode_time_ms = 0.0;
    state.interval_decode_steps = 0;
    return tpot;
}

ControllerState controller_update(const ControllerState& state, double tpot_ms,
                                  const ControllerConfig& cfg) {
    ControllerState next = state;
    if (tpot_ms > cfg.theta_high_ms) {
        next.b_prefill_tokens = std::max(cfg.b_min_tokens, state.b_prefill_tokens - cfg.delta_b_tokens);
        next.r_min_slots = std::min(cfg.total_slots, state.r_min_slots + cfg.delta_r_slots);
    } else if (tpot_ms < cfg.theta_low_ms) {
        next.b_prefill_tokens = std::min(cfg.b_max_tokens, state.b_prefill_tokens + cfg.delta_b_tokens);
        next.r_min_slots = std::max(cfg.r_base_slots, state.r_min_slots - cfg.delta_r_slots);
    }
    return next;
}

QueueId classify_request(const PhaseRequest& req, int b_prefill_tokens) {
    switch (req.kind) {
    case RequestKind::DecodeStream:
        return QueueId::QD;
    case RequestKind::ResumePrefill:
        return req.length_tokens <= b_prefill_tokens ? QueueId::QD : QueueId::QP;
    case RequestKind::ColdPrefill:
        // Cold prefills are uncached long prompts; they never merge with
        // decodes regardless of length.
        return QueueId::QP;
    }
    return QueueId::QP;
}

PolicyDecision decide(const PolicyConfig& policy, const ControllerState& state,
                      const ControllerConfig& cfg) {
    PolicyDecision d;
    d.admitted_budget_tokens = state.b_prefill_tokens;
    switch (policy.kind) {
    case PolicyKind::AgentServe:
        d.decode_slots = state.r_min_slots;
        d.prefill_slots = cfg.total_slots - state.r_min_slots;
        break;
    case PolicyKind::StaticPartition: {
        int split = policy.static_decode_slots > 0 ? policy.static_decode_slots
                                                   : cfg.total_slots / 2;
        d.decode_slots = split;
        d.prefill_slots = cfg.total_slots - split;
        break;
    }
    case PolicyKind::MixedFcfs:
    case PolicyKind::ChunkedPrefill:
    case PolicyKind::AgentServeNoSlots:
        d.decode_slots = cfg.total_slots;
        d.prefill_slots = cfg.total_slots;
        d.shared = true;
        break;
    }
    if (d.decode_slots < 1) {
        throw_validation(std::string(policy_name(policy.kind)) +
                         ": decode partition would be empty");
    }
    return d;
}

}  // namespace agentsim
