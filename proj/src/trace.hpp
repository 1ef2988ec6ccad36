#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scheduler.hpp"
#include "workload.hpp"

namespace agentsim {

enum class EventKind {
    SessionArrival,
    RequestIssued,
    PrefillCompleted,
    DecodeStepCompleted,
    DecodeStreamCompleted,
    ToolReturned,
    ControlTick,
    Rebind,
};

const char* event_kind_name(EventKind k);

// One closed span of prefill execution at a fixed rate. Segments never cross
// control-interval boundaries; tokens = rate * (t1 - t0) / 1000 exactly as
// accumulated by the engine.
struct Segment {
    double t0_ms = 0.0;
    double t1_ms = 0.0;
    double rate_tps = 0.0;
    int sms = 0;
    double tokens = 0.0;
    int interval_idx = 0;
};

// Per control interval: the controller's accumulators, the binding in force,
// and the prefill work ledger the verification layer consumes.
struct IntervalSummary {
    int index = 0;
    double t0_ms = 0.0;
    double t1_ms = 0.0;
    double decode_time_ms = 0.0;      // ΔL: sum of step spans closing here
    std::int64_t decode_steps = 0;    // ΔK
    double tpot_ms = -1.0;            // ΔL/ΔK at close; -1 when ΔK = 0
    int b_prefill = 0;                // controller state after the closing update
    int r_min = 0;
    int decode_slots = 0;             // binding during the interval
    int prefill_slots = 0;
    bool shared = false;
    double cold_tokens_pctx = 0.0;    // prefill-side processed tokens by kind
    double resume_tokens_pctx = 0.0;
    double resume_tokens_dctx = 0.0;  // admitted-resume tokens inside decode steps
    double cold_busy_ms = 0.0;        // prefill-side busy time by kind
    double resume_busy_ms = 0.0;
    double starved_ms = 0.0;          // prefill side idle with Q_P empty
    double rebind_overhead_ms = 0.0;
    bool partial = false;             // trailing interval without a closing tick
};

struct TraceEvent {
    EventKind kind = EventKind::SessionArrival;
    double t_ms = 0.0;
    std::uint64_t seq = 0;
    std::uint32_t session = 0;

    // RequestIssued
    RequestKind req_kind = RequestKind::ColdPrefill;
    int length_tokens = 0;
    QueueId queue = QueueId::QP;
    int budget_at_issue = 0;

    // PrefillCompleted
    double start_ms = 0.0;
    std::string ctx;  // "prefill" | "decode" | "shared"
    int committed_prefix = 0;
    std::vector<Segment> segments;

    // DecodeStepCompleted: span = t - anchor; start..t is the compute window
    double step_start_ms = 0.0;
    double anchor_ms = 0.0;
    int batch = 0;
    int exec_sms = 0;
    std::vector<std::uint32_t> emit;  // sessions emitting one token at t
    std::int64_t chunk_session = -1;
    int chunk_tokens = 0;

    // DecodeStreamCompleted
    int stream_tokens = 0;

    // ToolReturned
    int round = -1;

    // ControlTick
    IntervalSummary summary;

    // Rebind
    int from_level = 0;
    int to_level = 0;
    double overhead_ms = 0.0;
};

struct SessionRecord {
    std::uint32_t id = 0;
    double arrival_ms = 0.0;
    int cold_len = 0;
    int rounds = 0;
    std::vector<int> decode_lens;
    std::vector<int> resume_lens;
    std::vector<double> tool_delays_ms;
    bool done = false;
    bool truncated = false;
    double done_ms = -1.0;
};

// Append-only run record. Every metric and bound verification is recomputed
// from this; it embeds the fully resolved config so downstream commands need
// no side channel.
struct Trace {
    int schema_version = 1;
    nlohmann::json resolved_config;
    std::string policy;
    std::uint64_t seed = 0;
    std::uint64_t workload_hash = 0;
    std::vector<SessionRecord> sessions;
    std::vector<TraceEvent> events;
    std::optional<IntervalSummary> partial_interval;
    // Horizon-truncated prefill job mid-flight, kept so interval accounting
    // stays recomputable. Shaped like a PrefillCompleted record.
    std::optional<TraceEvent> inflight_prefill;
    double end_ms = 0.0;
    bool truncated = false;

    // Complete-interval summaries from tick events, plus the trailing partial
    // one when present.
    std::vector<IntervalSummary> intervals() const;

    std::string to_jsonl() const;
    static Trace parse_jsonl(const std::string& text);

    void save(const std::string& path) const;
    static Trace load(const std::string& path);
};

}  // namespace agentsim
