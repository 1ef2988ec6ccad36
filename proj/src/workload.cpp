#include "workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "error.hpp"

namespace agentsim {

void TokenDistribution::validate(const std::string& what) const {
    if (min_tokens < 1) {
        throw_validation(what + ": min_tokens must be >= 1");
    }
    if (!(min_tokens <= mean_tokens && mean_tokens <= max_tokens)) {
        throw_validation(what + ": need min <= mean <= max, got " + std::to_string(min_tokens) +
                         " <= " + std::to_string(mean_tokens) + " <= " +
                         std::to_string(max_tokens));
    }
}

namespace {

// Mean of the truncated geometric law P(X = k) ~ q^k over k in 0..span.
// Increasing in q; q = 1 is the uniform limit with mean span/2. Ratios above
// one are evaluated through the mirrored law (weights q^k mirror to (1/q)^k
// under k -> span-k) so the weights never overflow.
double trunc_geom_mean(double q, int span) {
    if (std::fabs(q - 1.0) < 1e-12) {
        return span / 2.0;
    }
    if (q > 1.0) {
        return span - trunc_geom_mean(1.0 / q, span);
    }
    double num = 0.0;
    double den = 0.0;
    double w = 1.0;
    for (int k = 0; k <= span; ++k) {
        num += k * w;
        den += w;
        w *= q;
    }
    return num / den;
}

// Solve for q such that the truncated geometric mean hits target. The
// law skews toward min for target < span/2 (the common case for token
// lengths) and toward max otherwise.
double solve_ratio(double target, int span) {
    double lo = 1e-9;
    double hi = 1.0;
    if (target > span / 2.0) {
        lo = 1.0;
        hi = 1.0;
        while (trunc_geom_mean(hi, span) < target && hi < 1e12) {
            hi *= 2.0;
        }
    }
    for (int iter = 0; iter < 200; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (trunc_geom_mean(mid, span) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

LengthSampler::LengthSampler(const TokenDistribution& dist) : dist_(dist) {
    dist_.validate("token distribution");
    int span = dist_.max_tokens - dist_.min_tokens;
    if (span == 0) {
        return;  // degenerate: always min
    }
    double target = static_cast<double>(dist_.mean_tokens - dist_.min_tokens);
    double q;
    if (target <= 0.0) {
        q = 1e-9;  // mass collapses onto min
    } else if (target >= span) {
        q = 1e12;
    } else {
        q = solve_ratio(target, span);
    }
    cdf_.resize(static_cast<std::size_t>(span) + 1);
    double acc = 0.0;
    double w = 1.0;
    for (int k = 0; k <= span; ++k) {
        acc += w;
        cdf_[static_cast<std::size_t>(k)] = acc;
        if (q > 1.0 && w > 1e280) {
            // Renormalize on the fly to avoid overflow for strongly
            // max-skewed fits; relative weights are what matters.
            for (int j = 0; j <= k; ++j) cdf_[static_cast<std::size_t>(j)] /= w;
            acc /= w;
            w = 1.0;
        }
        w *= q;
    }
    for (auto& c : cdf_) {
        c /= acc;
    }
}

int LengthSampler::sample(Rng& rng) const {
    if (cdf_.empty()) {
        return dist_.min_tokens;
    }
    double u = rng.next_double();
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
    if (k >= cdf_.size()) {
        k = cdf_.size() - 1;
    }
    return dist_.min_tokens + static_cast<int>(k);
}

double ToolDelaySpec::sample(Rng& rng) const {
    if (kind == Kind::Fixed) {
        return fixed_ms;
    }
    return rng.uniform(min_ms, max_ms);
}

void ParadigmSpec::validate() const {
    cold.validate(name + ".cold");
    resume.validate(name + ".resume");
    decode.validate(name + ".decode");
    if (steps_per_session < 1) {
        throw_validation(name + ": steps_per_session must be >= 1");
    }
    if (tool_delay.kind == ToolDelaySpec::Kind::Uniform &&
        !(tool_delay.min_ms <= tool_delay.max_ms && tool_delay.min_ms >= 0.0)) {
        throw_validation(name + ": tool_delay uniform range invalid");
    }
    if (tool_delay.kind == ToolDelaySpec::Kind::Fixed && tool_delay.fixed_ms < 0.0) {
        throw_validation(name + ": tool_delay must be >= 0");
    }
}

ParadigmSpec builtin_paradigm(const std::string& paradigm, const std::string& model) {
    ParadigmSpec spec;
    spec.tool_delay = ToolDelaySpec{};                  // deterministic 100 ms
    spec.cold = TokenDistribution{2500, 3500, 3000};    // shared across models
    if (paradigm == "react") {
        spec.name = "react";
        spec.resume = TokenDistribution{30, 127, 56};
        spec.steps_per_session = 4;
        if (model == "qwen2.5-3b") {
            spec.decode = TokenDistribution{27, 99, 37};
        } else if (model == "qwen2.5-7b") {
            spec.decode = TokenDistribution{21, 127, 45};
        } else if (model == "llama3-8b") {
            spec.decode = TokenDistribution{32, 101, 38};
        } else {
            throw_validation("unknown model '" + model +
                             "' (expected qwen2.5-3b, qwen2.5-7b, or llama3-8b)");
        }
    } else if (paradigm == "plan_and_execute") {
        spec.name = "plan_and_execute";
        spec.resume = TokenDistribution{125, 421, 251};
        spec.steps_per_session = 2;
        if (model == "qwen2.5-3b") {
            spec.decode = TokenDistribution{41, 125, 55};
        } else if (model == "qwen2.5-7b") {
            spec.decode = TokenDistribution{33, 141, 62};
        } else if (model == "llama3-8b") {
            spec.decode = TokenDistribution{22, 116, 64};
        } else {
            throw_validation("unknown model '" + model +
                             "' (expected qwen2.5-3b, qwen2.5-7b, or llama3-8b)");
        }
    } else {
        throw_validation("unknown paradigm '" + paradigm +
                         "' (expected react or plan_and_execute)");
    }
    return spec;
}

const char* session_phase_name(SessionPhase p) {
    switch (p) {
    case SessionPhase::AwaitingColdPrefill: return "awaiting_cold_prefill";
    case SessionPhase::Decoding: return "decoding";
    case SessionPhase::AwaitingTool: return "awaiting_tool";
    case SessionPhase::AwaitingResumePrefill: return "awaiting_resume_prefill";
    case SessionPhase::Done: return "done";
    }
    return "?";
}

const char* request_kind_name(RequestKind k) {
    switch (k) {
    case RequestKind::ColdPrefill: return "cold";
    case RequestKind::ResumePrefill: return "resume";
    case RequestKind::DecodeStream: return "decode";
    }
    return "?";
}

ParadigmSpec WorkloadConfig::resolve_paradigm() const {
    ParadigmSpec spec = builtin_paradigm(paradigm, model);
    if (cold_override) spec.cold = *cold_override;
    if (resume_override) spec.resume = *resume_override;
    if (decode_override) spec.decode = *decode_override;
    if (steps_override) spec.steps_per_session = *steps_override;
    if (tool_delay_override) spec.tool_delay = *tool_delay_override;
    spec.validate();
    return spec;
}

std::vector<SessionState> generate_sessions(const WorkloadConfig& cfg, std::uint64_t seed) {
    if (cfg.concurrency < 1) {
        throw_validation("workload.concurrency must be >= 1");
    }
    if (cfg.stagger_ms < 0.0) {
        throw_validation("workload.stagger_ms must be >= 0");
    }
    ParadigmSpec spec = cfg.resolve_paradigm();
    LengthSampler cold_sampler(spec.cold);
    LengthSampler resume_sampler(spec.resume);
    LengthSampler decode_sampler(spec.decode);

    std::vector<SessionState> sessions;
    sessions.reserve(static_cast<std::size_t>(cfg.concurrency));
    Rng stagger_rng = Rng::substream(seed, "stagger");
    for (int i = 0; i < cfg.concurrency; ++i) {
        SessionState s;
        s.session_id = static_cast<std::uint32_t>(i);
        s.rounds_total = spec.steps_per_session;
        s.arrival_time_ms = stagger_rng.uniform(0.0, cfg.stagger_ms);

        Rng rng = Rng::substream(seed, "workload/session/" + std::to_string(i));
        s.cold_len = cold_sampler.sample(rng);
        for (int r = 0; r < spec.steps_per_session + 1; ++r) {
            s.decode_lens.push_back(decode_sampler.sample(rng));
        }
        for (int r = 0; r < spec.steps_per_session; ++r) {
            s.resume_lens.push_back(resume_sampler.sample(rng));
            s.tool_delays_ms.push_back(spec.tool_delay.sample(rng));
        }
        sessions.push_back(std::move(s));
    }
    return sessions;
}

std::uint64_t stream_hash(const std::vector<SessionState>& sessions) {
    std::uint64_t h = Rng::kFnvOffset;
    auto mix_u64 = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= Rng::kFnvPrime;
        }
    };
    auto mix_double = [&](double d) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(d));
        std::memcpy(&bits, &d, sizeof(bits));
        mix_u64(bits);
    };
    for (const auto& s : sessions) {
        mix_u64(s.session_id);
        mix_double(s.arrival_time_ms);
        mix_u64(static_cast<std::uint64_t>(s.cold_len));
        mix_u64(static_cast<std::uint64_t>(s.rounds_total));
        for (int v : s.decode_lens) mix_u64(static_cast<std::uint64_t>(v));
        for (int v : s.resume_lens) mix_u64(static_cast<std::uint64_t>(v));
        for (double v : s.tool_delays_ms) mix_double(v);
    }
    return h;
}

namespace {

[[noreturn]] void phase_mismatch(const SessionState& s, const CompletionEvent& ev) {
    throw_protocol("session " + std::to_string(s.session_id) + " in phase " +
                   session_phase_name(s.phase) + " received mismatched completion event kind " +
                   std::to_string(static_cast<int>(ev.kind)));
}

}  // namespace

std::optional<PhaseRequest> next_phase(SessionState& session, const CompletionEvent& ev) {
    switch (session.phase) {
    case SessionPhase::AwaitingColdPrefill: {
        if (ev.kind != CompletionKind::ColdPrefillDone) phase_mismatch(session, ev);
        session.cached_prefix = session.cold_len;
        session.phase = SessionPhase::Decoding;
        return PhaseRequest{session.session_id, RequestKind::DecodeStream,
                            session.decode_lens[0], ev.time_ms};
    }
    case SessionPhase::Decoding: {
        if (ev.kind != CompletionKind::DecodeStreamDone) phase_mismatch(session, ev);
        session.cached_prefix += ev.emitted_tokens;
        session.decodes_completed += 1;
        if (session.decodes_completed > session.rounds_total) {
            session.phase = SessionPhase::Done;
            return std::nullopt;
        }
        session.phase = SessionPhase::AwaitingTool;
        return std::nullopt;  // resume request is issued when the tool returns
    }
    case SessionPhase::AwaitingTool: {
        if (ev.kind != CompletionKind::ToolDone) phase_mismatch(session, ev);
        session.phase = SessionPhase::AwaitingResumePrefill;
        int round = session.decodes_completed - 1;
        return PhaseRequest{session.session_id, RequestKind::ResumePrefill,
                            session.resume_lens[static_cast<std::size_t>(round)], ev.time_ms};
    }
    case SessionPhase::AwaitingResumePrefill: {
        if (ev.kind != CompletionKind::ResumePrefillDone) phase_mismatch(session, ev);
        int round = session.decodes_completed - 1;
        session.cached_prefix += session.resume_lens[static_cast<std::size_t>(round)];
        session.phase = SessionPhase::Decoding;
        return PhaseRequest{
            session.session_id, RequestKind::DecodeStream,
            session.decode_lens[static_cast<std::size_t>(session.decodes_completed)],
            ev.time_ms};
    }
    case SessionPhase::Done:
        phase_mismatch(session, ev);
    }
    return std::nullopt;
}

double tool_delay_for_round(const SessionState& session, int round_index) {
    if (round_index < 0 || round_index >= session.rounds_total) {
        throw_protocol("tool delay requested for out-of-range round " +
                       std::to_string(round_index));
    }
    return session.tool_delays_ms[static_cast<std::size_t>(round_index)];
}

}  // namespace agentsim
