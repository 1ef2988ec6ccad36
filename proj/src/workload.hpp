#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rng.hpp"

namespace agentsim {

// Token length range with a target mean, as reported min-max(avg) in the
// workload tables. Sampling uses a truncated geometric-like law fitted so
// the support is [min, max] and the expected value equals mean.
struct TokenDistribution {
    int min_tokens = 1;
    int max_tokens = 1;
    int mean_tokens = 1;

    void validate(const std::string& what) const;
};

// Sampler with the ratio parameter solved by bisection at construction.
class LengthSampler {
public:
    explicit LengthSampler(const TokenDistribution& dist);

    int sample(Rng& rng) const;
    const TokenDistribution& dist() const { return dist_; }

private:
    TokenDistribution dist_;
    std::vector<double> cdf_;  // over offsets 0..(max-min); empty when degenerate
};

struct ToolDelaySpec {
    enum class Kind { Fixed, Uniform };
    Kind kind = Kind::Fixed;
    double fixed_ms = 100.0;
    double min_ms = 0.0;
    double max_ms = 0.0;

    double sample(Rng& rng) const;
};

struct ParadigmSpec {
    std::string name;  // "react" or "plan_and_execute"
    TokenDistribution cold;
    TokenDistribution resume;
    TokenDistribution decode;
    int steps_per_session = 1;  // (decode, tool, resume) rounds; a final decode follows
    ToolDelaySpec tool_delay;

    void validate() const;
};

// Built-in paradigm table. Decode lengths differ per model column; resume
// and cold rows are shared across models.
ParadigmSpec builtin_paradigm(const std::string& paradigm, const std::string& model);

enum class SessionPhase {
    AwaitingColdPrefill,
    Decoding,
    AwaitingTool,
    AwaitingResumePrefill,
    Done,
};

const char* session_phase_name(SessionPhase p);

enum class RequestKind { ColdPrefill, ResumePrefill, DecodeStream };

const char* request_kind_name(RequestKind k);

struct PhaseRequest {
    std::uint32_t session_id = 0;
    RequestKind kind = RequestKind::ColdPrefill;
    int length_tokens = 0;
    double issue_time_ms = 0.0;
};

// One agent session with every phase length pre-sampled, so a run is fully
// reproducible and policies can share byte-identical request streams.
struct SessionState {
    std::uint32_t session_id = 0;
    SessionPhase phase = SessionPhase::AwaitingColdPrefill;
    int cached_prefix = 0;
    int rounds_total = 0;      // = steps_per_session
    int decodes_completed = 0; // session is Done after rounds_total + 1 decodes
    double arrival_time_ms = 0.0;

    // Pre-sampled plan.
    int cold_len = 0;
    std::vector<int> decode_lens;   // rounds_total + 1 entries
    std::vector<int> resume_lens;   // rounds_total entries
    std::vector<double> tool_delays_ms;  // rounds_total entries
};

enum class CompletionKind { ColdPrefillDone, DecodeStreamDone, ToolDone, ResumePrefillDone };

struct CompletionEvent {
    CompletionKind kind = CompletionKind::ColdPrefillDone;
    double time_ms = 0.0;
    int emitted_tokens = 0;  // decode completions: tokens produced by the stream
};

struct WorkloadConfig {
    std::string paradigm = "react";
    std::string model = "qwen2.5-7b";
    int concurrency = 3;
    double stagger_ms = 500.0;
    std::optional<TokenDistribution> cold_override;
    std::optional<TokenDistribution> resume_override;
    std::optional<TokenDistribution> decode_override;
    std::optional<int> steps_override;
    std::optional<ToolDelaySpec> tool_delay_override;

    ParadigmSpec resolve_paradigm() const;
};

// Deterministic: same (config, seed) yields byte-identical session plans.
std::vector<SessionState> generate_sessions(const WorkloadConfig& cfg, std::uint64_t seed);

// FNV-1a hash over the pre-sampled plans; policies sharing a workload must
// agree on this value.
std::uint64_t stream_hash(const std::vector<SessionState>& sessions);

// Advances the session state machine on a completion event. Returns the next
// request to issue, if the transition emits one:
//   cold / resume done -> DecodeStream issued immediately,
//   decode done        -> nothing (tool call starts), or Done after the last,
//   tool done          -> ResumePrefill issued.
// Mismatched events are protocol errors.
std::optional<PhaseRequest> next_phase(SessionState& session, const CompletionEvent& ev);

// Delay to apply after the given decode round completes.
double tool_delay_for_round(const SessionState& session, int round_index);

}  // namespace agentsim
