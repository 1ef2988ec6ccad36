#include "engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include "error.hpp"
#include "executor.hpp"

namespace agentsim {

namespace {

constexpr std::uint64_t kMaxEvents = 100'000'000;
constexpr double kMaxSimTimeMs = 1e10;

enum class ExecMode {
    Partitioned,        // agentserve, static_partition: two contexts
    SingleSerial,       // mixed_fcfs: prefills run whole between decode steps
    SingleInterleaved,  // chunked_prefill, agentserve_no_slots: chunk round-robin
};

ExecMode exec_mode(PolicyKind k) {
    switch (k) {
    case PolicyKind::AgentServe:
    case PolicyKind::StaticPartition:
        return ExecMode::Partitioned;
    case PolicyKind::MixedFcfs:
        return ExecMode::SingleSerial;
    case PolicyKind::ChunkedPrefill:
    case PolicyKind::AgentServeNoSlots:
        return ExecMode::SingleInterleaved;
    }
    return ExecMode::Partitioned;
}

bool controller_active(PolicyKind k) {
    return k == PolicyKind::AgentServe || k == PolicyKind::AgentServeNoSlots;
}

bool merging_active(PolicyKind k) {
    return k == PolicyKind::AgentServe || k == PolicyKind::StaticPartition ||
           k == PolicyKind::AgentServeNoSlots;
}

struct Pending {
    double t = 0.0;
    int prio = 0;
    std::uint64_t id = 0;
    enum class Type { PrefillDone, StepDone, Tick, ToolDone, Arrival } type = Type::Arrival;
    std::uint32_t session = 0;
    std::uint64_t gen = 0;  // prefill completion generation (lazy cancel)
    int round = 0;

    bool operator>(const Pending& o) const {
        if (t != o.t) return t > o.t;
        if (prio != o.prio) return prio > o.prio;
        return id > o.id;
    }
};

struct PrefillJob {
    std::uint32_t session = 0;
    RequestKind kind = RequestKind::ColdPrefill;
    int total_len = 0;
    double issue_ms = 0.0;
    double processed = 0.0;
    double started_ms = -1.0;
    std::vector<Segment> segments;
};

struct AdmittedResume {
    std::uint32_t session = 0;
    int total_len = 0;
    int remaining = 0;
    double issue_ms = 0.0;
    bool started = false;
    std::vector<Segment> segments;
};

struct Stream {
    std::uint32_t session = 0;
    int remaining = 0;
    int emitted = 0;
};

struct StepDesc {
    double start = 0.0;
    double end = 0.0;
    double anchor = 0.0;
    int sms = 0;
    std::vector<std::uint32_t> participants;
    std::int64_t chunk_session = -1;
    int chunk_tokens = 0;
    double chunk_ms = 0.0;
};

// Open prefill execution span (one rate, one binding).
struct OpenSeg {
    double t0 = 0.0;
    double rate = 0.0;
    int sms = 0;
    bool is_chunk = false;
};

class Engine {
public:
    explicit Engine(const RunConfig& cfg)
        : cfg_(cfg),
          bundle_(cfg.profile),
          mode_(exec_mode(cfg.policy.kind)),
          controller_on_(controller_active(cfg.policy.kind)),
          merging_on_(merging_active(cfg.policy.kind)),
          slots_(cfg.profile.total_slots(), cfg.executor.rebind_overhead_ms) {}

    RunResult run() {
        init();
        RunResult result;
        try {
            loop();
        } catch (const SimError& e) {
            if (e.kind() != ErrorKind::Protocol) throw;
            result.protocol_error = e.what();
        }
        finalize();
        result.trace = std::move(trace_);
        return result;
    }

private:
    // --- setup -------------------------------------------------------------

    void init() {
        sessions_ = generate_sessions(cfg_.workload, cfg_.seed);
        trace_.resolved_config = cfg_.to_json();
        trace_.policy = policy_name(cfg_.policy.kind);
        trace_.seed = cfg_.seed;
        trace_.workload_hash = stream_hash(sessions_);
        for (const auto& s : sessions_) {
            SessionRecord rec;
            rec.id = s.session_id;
            rec.arrival_ms = s.arrival_time_ms;
            rec.cold_len = s.cold_len;
            rec.rounds = s.rounds_total;
            rec.decode_lens = s.decode_lens;
            rec.resume_lens = s.resume_lens;
            rec.tool_delays_ms = s.tool_delays_ms;
            trace_.sessions.push_back(std::move(rec));
        }

        ctrl_.b_prefill_tokens = cfg_.controller.initial_b_tokens;
        ctrl_.r_min_slots = cfg_.controller.initial_r_slots;
        decision_ = decide(cfg_.policy, ctrl_, cfg_.controller);
        if (mode_ == ExecMode::Partitioned) {
            slots_.rebind(decision_.decode_slots, 0.0);  // initial binding, no charge
        }
        acct_t0_ = 0.0;
        starved_since_ = 0.0;  // Q_P is empty until the first arrival
        for (const auto& s : sessions_) {
            schedule(s.arrival_time_ms, 4, Pending::Type::Arrival, s.session_id);
        }
        schedule(cfg_.controller.delta_t_ms, 2, Pending::Type::Tick, 0);
    }

    // --- event machinery -----------------------------------------------------

    void schedule(double t, int prio, Pending::Type type, std::uint32_t session,
                  std::uint64_t gen = 0, int round = 0) {
        Pending p;
        p.t = t;
        p.prio = prio;
        p.id = next_sched_id_++;
        p.type = type;
        p.session = session;
        p.gen = gen;
        p.round = round;
        heap_.push(p);
    }

    TraceEvent make_event(EventKind kind, double t) const {
        TraceEvent e;
        e.kind = kind;
        e.t_ms = t;
        return e;
    }

    void push_event(TraceEvent e) {
        e.seq = next_seq_++;
        trace_.events.push_back(std::move(e));
    }

    void loop() {
        std::uint64_t processed = 0;
        while (!heap_.empty()) {
            if (done_count_ == sessions_.size()) {
                return;
            }
            Pending ev = heap_.top();
            if (cfg_.horizon_ms && ev.t > *cfg_.horizon_ms) {
                truncate_at(*cfg_.horizon_ms);
                return;
            }
            heap_.pop();
            if (ev.type == Pending::Type::PrefillDone && ev.gen != prefill_gen_) {
                continue;  // superseded by a rebind reschedule
            }
            now_ = ev.t;
            if (++processed > kMaxEvents || now_ > kMaxSimTimeMs) {
                throw_protocol("run exceeded the event or simulated-time guard; "
                               "likely a starved queue that can never drain");
            }
            switch (ev.type) {
            case Pending::Type::Arrival: on_arrival(ev.session); break;
            case Pending::Type::ToolDone: on_tool_done(ev.session, ev.round); break;
            case Pending::Type::PrefillDone: on_prefill_done(); break;
            case Pending::Type::StepDone: on_step_done(); break;
            case Pending::Type::Tick: on_tick(); break;
            }
        }
    }

    // --- request flow ------------------------------------------------------

    void on_arrival(std::uint32_t sid) {
        TraceEvent e = make_event(EventKind::SessionArrival, now_);
        e.session = sid;
        push_event(std::move(e));
        issue_request(PhaseRequest{sid, RequestKind::ColdPrefill, sessions_[sid].cold_len, now_});
        kick();
    }

    void on_tool_done(std::uint32_t sid, int round) {
        TraceEvent e = make_event(EventKind::ToolReturned, now_);
        e.session = sid;
        e.round = round;
        push_event(std::move(e));
        CompletionEvent ce{CompletionKind::ToolDone, now_, 0};
        auto req = next_phase(sessions_[sid], ce);
        if (!req) {
            throw_protocol("tool return produced no resume request");
        }
        issue_request(*req);
        kick();
    }

    void issue_request(const PhaseRequest& req) {
        int budget = merging_on_ ? ctrl_.b_prefill_tokens : -1;
        QueueId q = classify_request(req, budget);
        TraceEvent e = make_event(EventKind::RequestIssued, now_);
        e.session = req.session_id;
        e.req_kind = req.kind;
        e.length_tokens = req.length_tokens;
        e.queue = q;
        e.budget_at_issue = budget;
        push_event(std::move(e));
        if (q == QueueId::QP) {
            PrefillJob job;
            job.session = req.session_id;
            job.kind = req.kind;
            job.total_len = req.length_tokens;
            job.issue_ms = req.issue_time_ms;
            qp_.push_back(std::move(job));
        } else if (req.kind == RequestKind::DecodeStream) {
            pending_decode_.push_back(req);
            if (!decode_has_anchor_) {
                decode_anchor_ = std::max(now_, decode_ready_);
                decode_has_anchor_ = true;
            }
        } else {
            AdmittedResume ar;
            ar.session = req.session_id;
            ar.total_len = req.length_tokens;
            ar.remaining = req.length_tokens;
            ar.issue_ms = req.issue_time_ms;
            admitted_.push_back(std::move(ar));
        }
    }

    // --- decode side ----------------------------------------------------------

    int decode_sms() const {
        return decision_.shared ? bundle_.total_sms
                                : bundle_.slots_to_sms(slots_.decode_binding());
    }
    int prefill_sms() const {
        return decision_.shared ? bundle_.total_sms
                                : bundle_.slots_to_sms(slots_.prefill_binding());
    }

    bool decode_work_present() const {
        return !streams_.empty() || !pending_decode_.empty();
    }

    void start_step() {
        while (!pending_decode_.empty()) {
            const auto& req = pending_decode_.front();
            kv_.require_sealed(req.session_id);
            streams_.push_back(Stream{req.session_id, req.length_tokens, 0});
            pending_decode_.pop_front();
        }
        int chunk = 0;
        std::int64_t chunk_session = -1;
        if (merging_on_ && !admitted_.empty()) {
            auto& ar = admitted_.front();
            if (!ar.started) {
                ar.started = true;
                kv_.begin_write(ar.session);
            }
            chunk = std::min(cfg_.executor.resume_chunk_tokens, ar.remaining);
            chunk_session = ar.session;
        }
        int batch = static_cast<int>(streams_.size());
        if (batch == 0 && chunk == 0) {
            return;
        }
        for (const auto& st : streams_) {
            kv_.require_sealed(st.session);
        }
        int sms = decode_sms();
        double dur = decode_step_duration_ms(bundle_, sms, batch, chunk);
        double start = std::max(now_, decode_ready_);
        if (!decode_has_anchor_) {
            decode_anchor_ = start;
            decode_has_anchor_ = true;
        }
        StepDesc step;
        step.start = start;
        step.end = start + dur;
        step.anchor = decode_anchor_;
        step.sms = sms;
        for (const auto& st : streams_) step.participants.push_back(st.session);
        step.chunk_session = chunk_session;
        step.chunk_tokens = chunk;
        step.chunk_ms = chunk > 0 ? 1000.0 * chunk / bundle_.resume_rate(sms) : 0.0;
        current_step_ = step;
        step_in_flight_ = true;
        schedule(step.end, 1, Pending::Type::StepDone, 0);
    }

    void on_step_done() {
        StepDesc step = current_step_;
        step_in_flight_ = false;

        TraceEvent e = make_event(EventKind::DecodeStepCompleted, now_);
        e.step_start_ms = step.start;
        e.anchor_ms = step.anchor;
        e.batch = static_cast<int>(step.participants.size());
        e.exec_sms = step.sms;
        e.emit = step.participants;
        e.chunk_session = step.chunk_session;
        e.chunk_tokens = step.chunk_tokens;
        push_event(std::move(e));

        if (!step.participants.empty()) {
            ctrl_.interval_decode_time_ms += now_ - step.anchor;
            ctrl_.interval_decode_steps += 1;
        }

        // Admitted-resume chunk progress.
        if (step.chunk_tokens > 0) {
            auto& ar = admitted_.front();
            ar.remaining -= step.chunk_tokens;
            acct_res_tok_dctx_ += step.chunk_tokens;
            Segment sg;
            sg.t0_ms = now_ - step.chunk_ms;
            sg.t1_ms = now_;
            sg.rate_tps = bundle_.resume_rate(step.sms);
            sg.sms = step.sms;
            sg.tokens = step.chunk_tokens;
            sg.interval_idx = interval_idx_;
            ar.segments.push_back(sg);
            if (ar.remaining == 0) {
                AdmittedResume done = std::move(ar);
                admitted_.pop_front();
                complete_resume_in_decode_ctx(done);
            }
        }

        // Token emissions and stream completions.
        std::vector<Stream> still_active;
        still_active.reserve(streams_.size());
        for (auto& st : streams_) {
            st.remaining -= 1;
            st.emitted += 1;
            if (st.remaining == 0) {
                TraceEvent se = make_event(EventKind::DecodeStreamCompleted, now_);
                se.session = st.session;
                se.stream_tokens = st.emitted;
                push_event(std::move(se));
                kv_.append_decode_tokens(st.session, st.emitted);
                CompletionEvent ce{CompletionKind::DecodeStreamDone, now_, st.emitted};
                auto req = next_phase(sessions_[st.session], ce);
                if (req) {
                    throw_protocol("decode completion emitted a request directly");
                }
                if (sessions_[st.session].phase == SessionPhase::Done) {
                    mark_done(st.session);
                } else {
                    int round = sessions_[st.session].decodes_completed - 1;
                    double delay = tool_delay_for_round(sessions_[st.session], round);
                    schedule(now_ + delay, 3, Pending::Type::ToolDone, st.session, 0, round);
                }
            } else {
                still_active.push_back(st);
            }
        }
        streams_ = std::move(still_active);

        if (decode_work_present() || (merging_on_ && !admitted_.empty())) {
            decode_anchor_ = now_;
        } else {
            decode_has_anchor_ = false;
        }
        if (mode_ == ExecMode::SingleInterleaved) {
            last_unit_prefill_ = false;
        }
        kick();
    }

    void complete_resume_in_decode_ctx(AdmittedResume& ar) {
        kv_.commit(ar.session, kv_.prefix(ar.session) + ar.total_len);
        TraceEvent e = make_event(EventKind::PrefillCompleted, now_);
        e.session = ar.session;
        e.req_kind = RequestKind::ResumePrefill;
        e.length_tokens = ar.total_len;
        e.start_ms = ar.segments.empty() ? now_ : ar.segments.front().t0_ms;
        e.ctx = "decode";
        e.committed_prefix = kv_.prefix(ar.session);
        e.segments = ar.segments;
        push_event(std::move(e));
        CompletionEvent ce{CompletionKind::ResumePrefillDone, now_, 0};
        auto req = next_phase(sessions_[ar.session], ce);
        if (!req) {
            throw_protocol("resume completion emitted no decode request");
        }
        issue_request(*req);
    }

    // --- prefill side ----------------------------------------------------------

    void start_prefill_unit() {
        if (pseg_ || qp_.empty()) {
            return;
        }
        if (!decision_.shared && decision_.prefill_slots == 0) {
            return;  // partition holds no SMs; jobs wait for the next decision
        }
        PrefillJob& job = qp_.front();
        int sms = prefill_sms();
        double rate = job.kind == RequestKind::ColdPrefill ? bundle_.cold_rate(sms)
                                                           : bundle_.resume_rate(sms);
        double start = std::max(now_, prefill_ready_);
        if (job.started_ms < 0.0) {
            job.started_ms = start;
            if (job.kind == RequestKind::ResumePrefill) {
                kv_.begin_write(job.session);
            }
        }
        OpenSeg seg;
        seg.t0 = start;
        seg.rate = rate;
        seg.sms = sms;
        double remaining = static_cast<double>(job.total_len) - job.processed;
        if (mode_ == ExecMode::SingleInterleaved) {
            int chunk = std::min(cfg_.executor.prefill_chunk_tokens,
                                 std::max(1, static_cast<int>(std::lround(remaining))));
            seg.is_chunk = true;
            schedule(start + 1000.0 * chunk / rate, 0, Pending::Type::PrefillDone, job.session,
                     prefill_gen_);
            last_unit_prefill_ = true;
        } else {
            schedule(start + 1000.0 * remaining / rate, 0, Pending::Type::PrefillDone,
                     job.session, prefill_gen_);
        }
        pseg_ = seg;
    }

    // Closes the open prefill span at time t, crediting busy time and
    // processed tokens to the current interval. The span stays open from t
    // unless the caller clears it.
    void close_pseg(double t) {
        if (!pseg_ || t <= pseg_->t0) {
            return;
        }
        PrefillJob& job = qp_.front();
        Segment sg;
        sg.t0_ms = pseg_->t0;
        sg.t1_ms = t;
        sg.rate_tps = pseg_->rate;
        sg.sms = pseg_->sms;
        sg.tokens = pseg_->rate * (t - pseg_->t0) / 1000.0;
        sg.interval_idx = interval_idx_;
        job.processed += sg.tokens;
        job.segments.push_back(sg);
        if (job.kind == RequestKind::ColdPrefill) {
            acct_cold_tok_ += sg.tokens;
            acct_cold_busy_ += t - pseg_->t0;
        } else {
            acct_res_tok_pctx_ += sg.tokens;
            acct_res_busy_ += t - pseg_->t0;
        }
        pseg_->t0 = t;
    }

    void on_prefill_done() {
        if (!pseg_) {
            throw_protocol("prefill completion with no open execution span");
        }
        bool chunk_unit = pseg_->is_chunk;
        close_pseg(now_);
        pseg_.reset();
        PrefillJob& job = qp_.front();
        bool complete;
        if (chunk_unit) {
            complete = job.processed >= static_cast<double>(job.total_len) - 1e-9;
        } else {
            complete = true;
            job.processed = job.total_len;
        }
        if (complete) {
            PrefillJob done = std::move(job);
            qp_.pop_front();
            kv_.commit(done.session, kv_.prefix(done.session) + done.total_len);
            TraceEvent e = make_event(EventKind::PrefillCompleted, now_);
            e.session = done.session;
            e.req_kind = done.kind;
            e.length_tokens = done.total_len;
            e.start_ms = done.started_ms;
            e.ctx = mode_ == ExecMode::Partitioned ? "prefill" : "shared";
            e.committed_prefix = kv_.prefix(done.session);
            e.segments = done.segments;
            push_event(std::move(e));
            CompletionEvent ce{done.kind == RequestKind::ColdPrefill
                                   ? CompletionKind::ColdPrefillDone
                                   : CompletionKind::ResumePrefillDone,
                               now_, 0};
            auto req = next_phase(sessions_[done.session], ce);
            if (!req) {
                throw_protocol("prefill completion emitted no decode request");
            }
            issue_request(*req);
        }
        kick();
    }

    // --- control loop -------------------------------------------------------

    void on_tick() {
        double tick_t = now_;
        close_pseg(tick_t);

        IntervalSummary s;
        s.index = interval_idx_;
        s.t0_ms = acct_t0_;
        s.t1_ms = tick_t;
        s.decode_time_ms = ctrl_.interval_decode_time_ms;
        s.decode_steps = ctrl_.interval_decode_steps;
        s.decode_slots = decision_.decode_slots;
        s.prefill_slots = decision_.prefill_slots;
        s.shared = decision_.shared;
        s.cold_tokens_pctx = acct_cold_tok_;
        s.resume_tokens_pctx = acct_res_tok_pctx_;
        s.resume_tokens_dctx = acct_res_tok_dctx_;
        s.cold_busy_ms = acct_cold_busy_;
        s.resume_busy_ms = acct_res_busy_;
        s.rebind_overhead_ms = acct_rebind_oh_;
        flush_starvation(tick_t);
        s.starved_ms = acct_starved_;

        auto tpot = measure_tpot_step(ctrl_);
        s.tpot_ms = tpot.value_or(-1.0);
        if (controller_on_ && tpot) {
            ctrl_ = controller_update(ctrl_, *tpot, cfg_.controller);
        }
        s.b_prefill = ctrl_.b_prefill_tokens;
        s.r_min = ctrl_.r_min_slots;
        TraceEvent te = make_event(EventKind::ControlTick, tick_t);
        te.summary = s;
        push_event(std::move(te));

        interval_idx_ += 1;
        reset_acct(tick_t);

        PolicyDecision next = decide(cfg_.policy, ctrl_, cfg_.controller);
        if (mode_ == ExecMode::Partitioned && next.decode_slots != slots_.decode_binding()) {
            auto rb = slots_.rebind(next.decode_slots, tick_t);
            if (rb) {
                TraceEvent e = make_event(EventKind::Rebind, tick_t);
                e.from_level = rb->from_level;
                e.to_level = rb->to_level;
                e.overhead_ms = rb->overhead_ms;
                push_event(std::move(e));
                acct_rebind_oh_ += rb->overhead_ms;
                decode_ready_ = std::max(decode_ready_, tick_t + rb->overhead_ms);
                prefill_ready_ = std::max(prefill_ready_, tick_t + rb->overhead_ms);
                if (pseg_) {
                    // In-flight job resumes after the pause at the new rate.
                    pseg_.reset();
                    prefill_gen_ += 1;
                }
            }
        }
        decision_ = next;
        schedule(static_cast<double>(interval_idx_ + 1) * cfg_.controller.delta_t_ms, 2,
                 Pending::Type::Tick, 0);
        kick();
    }

    // --- dispatch -------------------------------------------------------------

    void kick() {
        switch (mode_) {
        case ExecMode::Partitioned:
            start_prefill_unit();
            if (!step_in_flight_) start_step();
            break;
        case ExecMode::SingleSerial:
            if (!step_in_flight_ && !pseg_) {
                if (!qp_.empty()) {
                    start_prefill_unit();
                } else {
                    start_step();
                }
            }
            break;
        case ExecMode::SingleInterleaved:
            if (!step_in_flight_ && !pseg_) {
                bool can_chunk = !qp_.empty();
                bool can_step = !pending_decode_.empty() || !streams_.empty() ||
                                (merging_on_ && !admitted_.empty());
                if (can_chunk && can_step) {
                    if (last_unit_prefill_) {
                        start_step();
                    } else {
                        start_prefill_unit();
                    }
                } else if (can_chunk) {
                    start_prefill_unit();
                } else if (can_step) {
                    start_step();
                }
            }
            break;
        }
        update_starvation();
    }

    void update_starvation() {
        bool starving = !pseg_ && qp_.empty();
        if (starving && !starved_since_) {
            starved_since_ = now_;
        } else if (!starving && starved_since_) {
            acct_starved_ += now_ - std::max(*starved_since_, acct_t0_);
            starved_since_.reset();
        }
    }

    void flush_starvation(double t) {
        if (starved_since_) {
            acct_starved_ += t - std::max(*starved_since_, acct_t0_);
            starved_since_ = t;
        }
    }

    void reset_acct(double t0) {
        acct_t0_ = t0;
        acct_cold_tok_ = acct_res_tok_pctx_ = acct_res_tok_dctx_ = 0.0;
        acct_cold_busy_ = acct_res_busy_ = 0.0;
        acct_starved_ = 0.0;
        acct_rebind_oh_ = 0.0;
    }

    void mark_done(std::uint32_t sid) {
        trace_.sessions[sid].done = true;
        trace_.sessions[sid].done_ms = now_;
        done_count_ += 1;
    }

    void truncate_at(double horizon) {
        now_ = horizon;
        trace_.truncated = true;
        for (auto& rec : trace_.sessions) {
            if (!rec.done) {
                rec.truncated = true;
            }
        }
    }

    void finalize() {
        close_pseg(now_);
        flush_starvation(now_);
        trace_.end_ms = now_;
        if (pseg_ && !qp_.empty()) {
            // Horizon truncation with a job mid-flight: preserve its partial
            // execution record so the walker can still account the intervals.
            const PrefillJob& job = qp_.front();
            TraceEvent e = make_event(EventKind::PrefillCompleted, now_);
            e.session = job.session;
            e.req_kind = job.kind;
            e.length_tokens = job.total_len;
            e.start_ms = job.started_ms;
            e.ctx = mode_ == ExecMode::Partitioned ? "prefill" : "shared";
            e.committed_prefix = -1;
            e.segments = job.segments;
            trace_.inflight_prefill = std::move(e);
        }
        if (now_ > acct_t0_) {
            IntervalSummary s;
            s.index = interval_idx_;
            s.t0_ms = acct_t0_;
            s.t1_ms = now_;
            s.decode_time_ms = ctrl_.interval_decode_time_ms;
            s.decode_steps = ctrl_.interval_decode_steps;
            s.tpot_ms = ctrl_.interval_decode_steps > 0
                            ? ctrl_.interval_decode_time_ms /
                                  static_cast<double>(ctrl_.interval_decode_steps)
                            : -1.0;
            s.b_prefill = ctrl_.b_prefill_tokens;
            s.r_min = ctrl_.r_min_slots;
            s.decode_slots = decision_.decode_slots;
            s.prefill_slots = decision_.prefill_slots;
            s.shared = decision_.shared;
            s.cold_tokens_pctx = acct_cold_tok_;
            s.resume_tokens_pctx = acct_res_tok_pctx_;
            s.resume_tokens_dctx = acct_res_tok_dctx_;
            s.cold_busy_ms = acct_cold_busy_;
            s.resume_busy_ms = acct_res_busy_;
            s.starved_ms = acct_starved_;
            s.rebind_overhead_ms = acct_rebind_oh_;
            s.partial = true;
            trace_.partial_interval = s;
        }
    }

    // --- members -------------------------------------------------------------

    const RunConfig& cfg_;
    const ProfileBundle& bundle_;
    ExecMode mode_;
    bool controller_on_;
    bool merging_on_;

    double now_ = 0.0;
    std::uint64_t next_sched_id_ = 0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> heap_;

    Trace trace_;
    std::vector<SessionState> sessions_;
    std::size_t done_count_ = 0;

    std::deque<PrefillJob> qp_;
    std::deque<PhaseRequest> pending_decode_;
    std::deque<AdmittedResume> admitted_;
    std::vector<Stream> streams_;

    bool step_in_flight_ = false;
    StepDesc current_step_;
    double decode_ready_ = 0.0;
    double decode_anchor_ = 0.0;
    bool decode_has_anchor_ = false;

    std::optional<OpenSeg> pseg_;
    std::uint64_t prefill_gen_ = 0;
    double prefill_ready_ = 0.0;
    std::optional<double> starved_since_;
    bool last_unit_prefill_ = false;

    KvCacheRegistry kv_;
    ControllerState ctrl_;
    SlotSet slots_;
    PolicyDecision decision_;
    int interval_idx_ = 0;

    double acct_t0_ = 0.0;
    double acct_cold_tok_ = 0.0;
    double acct_res_tok_pctx_ = 0.0;
    double acct_res_tok_dctx_ = 0.0;
    double acct_cold_busy_ = 0.0;
    double acct_res_busy_ = 0.0;
    double acct_starved_ = 0.0;
    double acct_rebind_oh_ = 0.0;
};

}  // namespace

RunResult run_simulation_capture(const RunConfig& cfg) {
    Engine engine(cfg);
    return engine.run();
}

Trace run_simulation(const RunConfig& cfg) {
    RunResult r = run_simulation_capture(cfg);
    if (r.protocol_error) {
        throw SimError(ErrorKind::Protocol, *r.protocol_error);
    }
    return std::move(r.trace);
}

}  // namespace agentsim
