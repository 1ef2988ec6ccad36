#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include "engine.hpp"
#include "error.hpp"
#include "executor.hpp"

namespace agentsim {

using nlohmann::json;

namespace {

struct IntervalRecompute {
    double dl = 0.0;
    std::int64_t dk = 0;
    double cold_tok = 0.0;
    double res_tok_p = 0.0;
    double res_tok_d = 0.0;
    double cold_busy = 0.0;
    double res_busy = 0.0;
};

struct SessionWalk {
    std::vector<RequestKind> issued;
    int cold_count = 0;
    std::vector<int> stream_tokens;  // completed decode streams, in order
    int expected_prefix = 0;
    int emitted = 0;
    bool prefix_ok = true;
};

// The request-kind sequence of a full session is Cold (Decode Resume)* Decode;
// a truncated session may stop at any prefix of it.
bool phase_order_ok(const std::vector<RequestKind>& seq, bool complete, int rounds) {
    if (seq.empty()) {
        return !complete;
    }
    if (seq[0] != RequestKind::ColdPrefill) {
        return false;
    }
    for (std::size_t i = 1; i < seq.size(); ++i) {
        RequestKind expect = (i % 2 == 1) ? RequestKind::DecodeStream : RequestKind::ResumePrefill;
        if (seq[i] != expect) {
            return false;
        }
    }
    if (complete) {
        return static_cast<int>(seq.size()) == 2 * rounds + 2;
    }
    return static_cast<int>(seq.size()) <= 2 * rounds + 2;
}

// Serialized burst classes at equal timestamps: completion bursts, then the
// control tick (with its rebind), then tool returns and arrivals. Request
// issues ride inside the burst of whatever event caused them.
int burst_class(EventKind k) {
    switch (k) {
    case EventKind::PrefillCompleted:
    case EventKind::DecodeStepCompleted:
    case EventKind::DecodeStreamCompleted:
        return 0;
    case EventKind::ControlTick:
    case EventKind::Rebind:
        return 1;
    case EventKind::ToolReturned:
    case EventKind::SessionArrival:
        return 2;
    case EventKind::RequestIssued:
        return -1;  // exempt
    }
    return -1;
}

}  // namespace

std::string ReplayReport::to_json() const {
    json j;
    j["schema"] = "agentsim-replay-v1";
    j["mismatches"] = mismatches;
    j["notes"] = notes;
    return j.dump(2) + "\n";
}

ReplayReport replay_check(const Trace& trace) {
    ReplayReport rep;
    auto flag = [&rep](const std::string& note) {
        rep.mismatches += 1;
        rep.notes.push_back(note);
    };

    RunConfig cfg = run_config_from_json(trace.resolved_config);
    const ProfileBundle& bundle = cfg.profile;
    const double dt = cfg.controller.delta_t_ms;
    const bool controller_on =
        trace.policy == "agentserve" || trace.policy == "agentserve_no_slots";

    // Ordering: monotone clock, dense sequence numbers, burst classes at ties.
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        const auto& e = trace.events[i];
        if (e.seq != i) {
            flag("event " + std::to_string(i) + ": sequence number out of order");
            break;
        }
        if (i > 0) {
            const auto& p = trace.events[i - 1];
            if (e.t_ms < p.t_ms) {
                flag("event " + std::to_string(i) + ": clock moved backwards");
            } else if (e.t_ms == p.t_ms) {
                int a = burst_class(p.kind), b = burst_class(e.kind);
                if (a >= 0 && b >= 0 && b < a) {
                    flag("event " + std::to_string(i) + ": tie order violated (" +
                         std::string(event_kind_name(p.kind)) + " before " +
                         event_kind_name(e.kind) + ")");
                }
            }
        }
    }

    // Pass 1: rebuild per-interval accumulators. Decode-side quantities key on
    // the tick cursor (steps complete inside the interval being accumulated);
    // prefill segments carry their interval index explicitly.
    std::map<int, IntervalRecompute> recompute;
    std::vector<SessionWalk> walk(trace.sessions.size());
    int cursor = 0;
    auto add_segments = [&recompute, &flag](const TraceEvent& e) {
        if (e.ctx == "decode") {
            return;  // chunk tokens are counted from the step events instead
        }
        double seg_tokens = 0.0;
        for (const auto& sg : e.segments) {
            double tokens = sg.rate_tps * (sg.t1_ms - sg.t0_ms) / 1000.0;
            if (std::fabs(tokens - sg.tokens) > 1e-6) {
                flag("prefill segment tokens inconsistent with rate * duration at t=" +
                     std::to_string(sg.t0_ms));
            }
            seg_tokens += sg.tokens;
            auto& r = recompute[sg.interval_idx];
            if (e.req_kind == RequestKind::ColdPrefill) {
                r.cold_tok += sg.tokens;
                r.cold_busy += sg.t1_ms - sg.t0_ms;
            } else {
                r.res_tok_p += sg.tokens;
                r.res_busy += sg.t1_ms - sg.t0_ms;
            }
        }
        if (std::fabs(seg_tokens - e.length_tokens) > 1e-6) {
            flag("prefill for session " + std::to_string(e.session) +
                 ": processed tokens != request length");
        }
    };

    for (const auto& e : trace.events) {
        switch (e.kind) {
        case EventKind::RequestIssued: {
            if (e.session < walk.size()) {
                walk[e.session].issued.push_back(e.req_kind);
                if (e.req_kind == RequestKind::ColdPrefill) {
                    walk[e.session].cold_count += 1;
                }
            }
            PhaseRequest req{e.session, e.req_kind, e.length_tokens, e.t_ms};
            if (classify_request(req, e.budget_at_issue) != e.queue) {
                flag("issue at t=" + std::to_string(e.t_ms) +
                     ": queue placement disagrees with classification rule");
            }
            if (e.queue == QueueId::QD && e.req_kind == RequestKind::ColdPrefill) {
                flag("cold prefill found in Q_D");
            }
            break;
        }
        case EventKind::DecodeStepCompleted: {
            auto& r = recompute[cursor];
            if (e.batch > 0) {
                r.dl += e.t_ms - e.anchor_ms;
                r.dk += 1;
            }
            if (e.batch != static_cast<int>(e.emit.size())) {
                flag("step at t=" + std::to_string(e.t_ms) + ": batch != emissions");
            }
            if (e.batch > 0 || e.chunk_tokens > 0) {
                double dur = decode_step_duration_ms(bundle, e.exec_sms, e.batch, e.chunk_tokens);
                if (std::fabs((e.t_ms - e.step_start_ms) - dur) > 1e-6) {
                    flag("step at t=" + std::to_string(e.t_ms) +
                         ": duration inconsistent with profile rates");
                }
            }
            if (e.chunk_tokens > 0) {
                r.res_tok_d += e.chunk_tokens;
            }
            for (std::uint32_t s : e.emit) {
                if (s < walk.size()) walk[s].emitted += 1;
            }
            break;
        }
        case EventKind::DecodeStreamCompleted:
            if (e.session < walk.size()) {
                auto& w = walk[e.session];
                w.stream_tokens.push_back(e.stream_tokens);
                w.expected_prefix += e.stream_tokens;
            }
            break;
        case EventKind::PrefillCompleted:
            add_segments(e);
            if (e.session < walk.size()) {
                auto& w = walk[e.session];
                w.expected_prefix += e.length_tokens;
                if (e.committed_prefix != w.expected_prefix) {
                    w.prefix_ok = false;
                }
            }
            break;
        case EventKind::ControlTick:
            cursor += 1;
            break;
        default:
            break;
        }
    }
    if (trace.inflight_prefill) {
        for (const auto& sg : trace.inflight_prefill->segments) {
            auto& r = recompute[sg.interval_idx];
            if (trace.inflight_prefill->req_kind == RequestKind::ColdPrefill) {
                r.cold_tok += sg.tokens;
                r.cold_busy += sg.t1_ms - sg.t0_ms;
            } else {
                r.res_tok_p += sg.tokens;
                r.res_busy += sg.t1_ms - sg.t0_ms;
            }
        }
    }

    // Pass 2: walk the ticks in order, replaying the controller.
    ControllerState ctrl;
    ctrl.b_prefill_tokens = cfg.controller.initial_b_tokens;
    ctrl.r_min_slots = cfg.controller.initial_r_slots;
    int tick_count = 0;
    auto check_interval = [&](const IntervalSummary& s, int idx) {
        const auto& r = recompute[idx];
        if (s.decode_time_ms != r.dl) {
            flag("interval " + std::to_string(s.index) + ": decode time " +
                 std::to_string(s.decode_time_ms) + " != recomputed " + std::to_string(r.dl));
        }
        if (s.decode_steps != r.dk) {
            flag("interval " + std::to_string(s.index) + ": decode steps mismatch");
        }
        double tpot = r.dk > 0 ? r.dl / static_cast<double>(r.dk) : -1.0;
        if (s.tpot_ms != tpot) {
            flag("interval " + std::to_string(s.index) + ": TPOT " + std::to_string(s.tpot_ms) +
                 " != recomputed " + std::to_string(tpot));
        }
        if (s.cold_tokens_pctx != r.cold_tok || s.resume_tokens_pctx != r.res_tok_p ||
            s.resume_tokens_dctx != r.res_tok_d) {
            flag("interval " + std::to_string(s.index) + ": prefill token ledger mismatch");
        }
        if (s.cold_busy_ms != r.cold_busy || s.resume_busy_ms != r.res_busy) {
            flag("interval " + std::to_string(s.index) + ": prefill busy-time mismatch");
        }
        if (!s.shared && s.decode_slots + s.prefill_slots != bundle.total_slots()) {
            flag("interval " + std::to_string(s.index) + ": partition not complementary");
        }
        return tpot;
    };
    for (const auto& e : trace.events) {
        if (e.kind != EventKind::ControlTick) continue;
        const IntervalSummary& s = e.summary;
        if (s.index != tick_count) {
            flag("tick at t=" + std::to_string(e.t_ms) + ": interval index mismatch");
        }
        if (std::fabs(e.t_ms - (s.index + 1) * dt) > 1e-9) {
            flag("tick " + std::to_string(s.index) + ": not on the delta_t cadence");
        }
        double tpot = check_interval(s, tick_count);
        if (controller_on && tpot >= 0.0) {
            ctrl = controller_update(ctrl, tpot, cfg.controller);
        }
        if (s.b_prefill != ctrl.b_prefill_tokens || s.r_min != ctrl.r_min_slots) {
            flag("interval " + std::to_string(s.index) +
                 ": controller state diverges from replayed updates");
        }
        tick_count += 1;
    }
    if (trace.partial_interval) {
        check_interval(*trace.partial_interval, tick_count);
    }

    // Control cadence over the whole run.
    auto expected_ticks = static_cast<std::int64_t>(std::floor(trace.end_ms / dt));
    if (std::llabs(expected_ticks - tick_count) > 1) {
        flag("control cadence: " + std::to_string(tick_count) + " ticks over " +
             std::to_string(trace.end_ms) + " ms (delta_t " + std::to_string(dt) + ")");
    }

    // Per-session conservation and phase order.
    for (std::size_t i = 0; i < trace.sessions.size(); ++i) {
        const auto& rec = trace.sessions[i];
        const auto& w = walk[i];
        if (!phase_order_ok(w.issued, rec.done, rec.rounds)) {
            flag("session " + std::to_string(rec.id) +
                 ": request order violates Cold (Decode Resume)* Decode");
        }
        if (rec.done && w.cold_count != 1) {
            flag("session " + std::to_string(rec.id) + ": expected exactly one cold prefill");
        }
        int planned = 0;
        for (std::size_t k = 0; k < w.stream_tokens.size(); ++k) {
            if (k < rec.decode_lens.size()) {
                planned += rec.decode_lens[k];
                if (w.stream_tokens[k] != rec.decode_lens[k]) {
                    flag("session " + std::to_string(rec.id) + ": decode stream " +
                         std::to_string(k) + " emitted " + std::to_string(w.stream_tokens[k]) +
                         " tokens, plan says " + std::to_string(rec.decode_lens[k]));
                }
            }
        }
        if (rec.done) {
            int total_planned = 0;
            for (int v : rec.decode_lens) total_planned += v;
            if (w.emitted != total_planned) {
                flag("session " + std::to_string(rec.id) + ": emitted " +
                     std::to_string(w.emitted) + " tokens, plan says " +
                     std::to_string(total_planned));
            }
        } else if (w.emitted < planned) {
            flag("session " + std::to_string(rec.id) + ": emissions behind completed streams");
        }
        if (!w.prefix_ok) {
            flag("session " + std::to_string(rec.id) + ": committed KV prefix diverges");
        }
    }

    return rep;
}

}  // namespace agentsim
