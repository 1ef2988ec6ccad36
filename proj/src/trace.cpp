#include "trace.hpp"

#include <fstream>
#include <sstream>

#include "error.hpp"

namespace agentsim {

using nlohmann::json;

const char* event_kind_name(EventKind k) {
    switch (k) {
    case EventKind::SessionArrival: return "arrival";
    case EventKind::RequestIssued: return "issue";
    case EventKind::PrefillCompleted: return "prefill_done";
    case EventKind::DecodeStepCompleted: return "step_done";
    case EventKind::DecodeStreamCompleted: return "stream_done";
    case EventKind::ToolReturned: return "tool";
    case EventKind::ControlTick: return "tick";
    case EventKind::Rebind: return "rebind";
    }
    return "?";
}

namespace {

EventKind event_kind_from(const std::string& s) {
    if (s == "arrival") return EventKind::SessionArrival;
    if (s == "issue") return EventKind::RequestIssued;
    if (s == "prefill_done") return EventKind::PrefillCompleted;
    if (s == "step_done") return EventKind::DecodeStepCompleted;
    if (s == "stream_done") return EventKind::DecodeStreamCompleted;
    if (s == "tool") return EventKind::ToolReturned;
    if (s == "tick") return EventKind::ControlTick;
    if (s == "rebind") return EventKind::Rebind;
    throw_validation("trace: unknown event kind '" + s + "'");
}

RequestKind req_kind_from(const std::string& s) {
    if (s == "cold") return RequestKind::ColdPrefill;
    if (s == "resume") return RequestKind::ResumePrefill;
    if (s == "decode") return RequestKind::DecodeStream;
    throw_validation("trace: unknown request kind '" + s + "'");
}

json summary_to_json(const IntervalSummary& s) {
    json j;
    j["idx"] = s.index;
    j["t0"] = s.t0_ms;
    j["t1"] = s.t1_ms;
    j["dl"] = s.decode_time_ms;
    j["dk"] = s.decode_steps;
    j["tpot"] = s.tpot_ms;
    j["b"] = s.b_prefill;
    j["r"] = s.r_min;
    j["dslots"] = s.decode_slots;
    j["pslots"] = s.prefill_slots;
    j["shared"] = s.shared;
    j["cold_tok"] = s.cold_tokens_pctx;
    j["res_tok_p"] = s.resume_tokens_pctx;
    j["res_tok_d"] = s.resume_tokens_dctx;
    j["cold_busy"] = s.cold_busy_ms;
    j["res_busy"] = s.resume_busy_ms;
    j["starved"] = s.starved_ms;
    j["rebind_oh"] = s.rebind_overhead_ms;
    if (s.partial) j["partial"] = true;
    return j;
}

IntervalSummary summary_from_json(const json& j) {
    IntervalSummary s;
    s.index = j.at("idx").get<int>();
    s.t0_ms = j.at("t0").get<double>();
    s.t1_ms = j.at("t1").get<double>();
    s.decode_time_ms = j.at("dl").get<double>();
    s.decode_steps = j.at("dk").get<std::int64_t>();
    s.tpot_ms = j.at("tpot").get<double>();
    s.b_prefill = j.at("b").get<int>();
    s.r_min = j.at("r").get<int>();
    s.decode_slots = j.at("dslots").get<int>();
    s.prefill_slots = j.at("pslots").get<int>();
    s.shared = j.at("shared").get<bool>();
    s.cold_tokens_pctx = j.at("cold_tok").get<double>();
    s.resume_tokens_pctx = j.at("res_tok_p").get<double>();
    s.resume_tokens_dctx = j.at("res_tok_d").get<double>();
    s.cold_busy_ms = j.at("cold_busy").get<double>();
    s.resume_busy_ms = j.at("res_busy").get<double>();
    s.starved_ms = j.at("starved").get<double>();
    s.rebind_overhead_ms = j.at("rebind_oh").get<double>();
    s.partial = j.value("partial", false);
    return s;
}

json event_to_json(const TraceEvent& e) {
    json j;
    j["rec"] = "ev";
    j["k"] = event_kind_name(e.kind);
    j["t"] = e.t_ms;
    j["seq"] = e.seq;
    switch (e.kind) {
    case EventKind::SessionArrival:
        j["s"] = e.session;
        break;
    case EventKind::RequestIssued:
        j["s"] = e.session;
        j["req"] = request_kind_name(e.req_kind);
        j["len"] = e.length_tokens;
        j["q"] = (e.queue == QueueId::QD) ? "QD" : "QP";
        j["budget"] = e.budget_at_issue;
        break;
    case EventKind::PrefillCompleted: {
        j["s"] = e.session;
        j["req"] = request_kind_name(e.req_kind);
        j["len"] = e.length_tokens;
        j["start"] = e.start_ms;
        j["ctx"] = e.ctx;
        j["prefix"] = e.committed_prefix;
        json segs = json::array();
        for (const auto& sg : e.segments) {
            segs.push_back({sg.t0_ms, sg.t1_ms, sg.rate_tps, sg.sms, sg.tokens, sg.interval_idx});
        }
        j["segs"] = segs;
        break;
    }
    case EventKind::DecodeStepCompleted:
        j["start"] = e.step_start_ms;
        j["anchor"] = e.anchor_ms;
        j["batch"] = e.batch;
        j["sms"] = e.exec_sms;
        j["emit"] = e.emit;
        if (e.chunk_tokens > 0) {
            j["chunk_s"] = e.chunk_session;
            j["chunk"] = e.chunk_tokens;
        }
        break;
    case EventKind::DecodeStreamCompleted:
        j["s"] = e.session;
        j["tokens"] = e.stream_tokens;
        break;
    case EventKind::ToolReturned:
        j["s"] = e.session;
        j["round"] = e.round;
        break;
    case EventKind::ControlTick:
        j["summary"] = summary_to_json(e.summary);
        break;
    case EventKind::Rebind:
        j["from"] = e.from_level;
        j["to"] = e.to_level;
        j["oh"] = e.overhead_ms;
        break;
    }
    return j;
}

TraceEvent event_from_json(const json& j) {
    TraceEvent e;
    e.kind = event_kind_from(j.at("k").get<std::string>());
    e.t_ms = j.at("t").get<double>();
    e.seq = j.at("seq").get<std::uint64_t>();
    switch (e.kind) {
    case EventKind::SessionArrival:
        e.session = j.at("s").get<std::uint32_t>();
        break;
    case EventKind::RequestIssued:
        e.session = j.at("s").get<std::uint32_t>();
        e.req_kind = req_kind_from(j.at("req").get<std::string>());
        e.length_tokens = j.at("len").get<int>();
        e.queue = j.at("q").get<std::string>() == "QD" ? QueueId::QD : QueueId::QP;
        e.budget_at_issue = j.at("budget").get<int>();
        break;
    case EventKind::PrefillCompleted: {
        e.session = j.at("s").get<std::uint32_t>();
        e.req_kind = req_kind_from(j.at("req").get<std::string>());
        e.length_tokens = j.at("len").get<int>();
        e.start_ms = j.at("start").get<double>();
        e.ctx = j.at("ctx").get<std::string>();
        e.committed_prefix = j.at("prefix").get<int>();
        for (const auto& sg : j.at("segs")) {
            Segment s;
            s.t0_ms = sg.at(0).get<double>();
            s.t1_ms = sg.at(1).get<double>();
            s.rate_tps = sg.at(2).get<double>();
            s.sms = sg.at(3).get<int>();
            s.tokens = sg.at(4).get<double>();
            s.interval_idx = sg.at(5).get<int>();
            e.segments.push_back(s);
        }
        break;
    }
    case EventKind::DecodeStepCompleted:
        e.step_start_ms = j.at("start").get<double>();
        e.anchor_ms = j.at("anchor").get<double>();
        e.batch = j.at("batch").get<int>();
        e.exec_sms = j.at("sms").get<int>();
        e.emit = j.at("emit").get<std::vector<std::uint32_t>>();
        if (j.contains("chunk")) {
            e.chunk_session = j.at("chunk_s").get<std::int64_t>();
            e.chunk_tokens = j.at("chunk").get<int>();
        }
        break;
    case EventKind::DecodeStreamCompleted:
        e.session = j.at("s").get<std::uint32_t>();
        e.stream_tokens = j.at("tokens").get<int>();
        break;
    case EventKind::ToolReturned:
        e.session = j.at("s").get<std::uint32_t>();
        e.round = j.at("round").get<int>();
        break;
    case EventKind::ControlTick:
        e.summary = summary_from_json(j.at("summary"));
        break;
    case EventKind::Rebind:
        e.from_level = j.at("from").get<int>();
        e.to_level = j.at("to").get<int>();
        e.overhead_ms = j.at("oh").get<double>();
        break;
    }
    return e;
}

json session_to_json(const SessionRecord& s) {
    json j;
    j["rec"] = "session";
    j["id"] = s.id;
    j["arrival"] = s.arrival_ms;
    j["cold_len"] = s.cold_len;
    j["rounds"] = s.rounds;
    j["decode_lens"] = s.decode_lens;
    j["resume_lens"] = s.resume_lens;
    j["tool_delays"] = s.tool_delays_ms;
    j["done"] = s.done;
    j["truncated"] = s.truncated;
    j["done_ms"] = s.done_ms;
    return j;
}

SessionRecord session_from_json(const json& j) {
    SessionRecord s;
    s.id = j.at("id").get<std::uint32_t>();
    s.arrival_ms = j.at("arrival").get<double>();
    s.cold_len = j.at("cold_len").get<int>();
    s.rounds = j.at("rounds").get<int>();
    s.decode_lens = j.at("decode_lens").get<std::vector<int>>();
    s.resume_lens = j.at("resume_lens").get<std::vector<int>>();
    s.tool_delays_ms = j.at("tool_delays").get<std::vector<double>>();
    s.done = j.at("done").get<bool>();
    s.truncated = j.at("truncated").get<bool>();
    s.done_ms = j.at("done_ms").get<double>();
    return s;
}

}  // namespace

std::vector<IntervalSummary> Trace::intervals() const {
    std::vector<IntervalSummary> out;
    for (const auto& e : events) {
        if (e.kind == EventKind::ControlTick) {
            out.push_back(e.summary);
        }
    }
    if (partial_interval) {
        out.push_back(*partial_interval);
    }
    return out;
}

std::string Trace::to_jsonl() const {
    std::ostringstream out;
    json hdr;
    hdr["rec"] = "header";
    hdr["schema"] = schema_version;
    hdr["policy"] = policy;
    hdr["seed"] = seed;
    hdr["workload_hash"] = workload_hash;
    hdr["config"] = resolved_config;
    out << hdr.dump() << "\n";
    for (const auto& s : sessions) {
        out << session_to_json(s).dump() << "\n";
    }
    for (const auto& e : events) {
        out << event_to_json(e).dump() << "\n";
    }
    json ftr;
    ftr["rec"] = "footer";
    ftr["end_ms"] = end_ms;
    ftr["events"] = events.size();
    ftr["truncated"] = truncated;
    if (partial_interval) {
        ftr["partial_interval"] = summary_to_json(*partial_interval);
    }
    if (inflight_prefill) {
        ftr["inflight_prefill"] = event_to_json(*inflight_prefill);
    }
    out << ftr.dump() << "\n";
    return out.str();
}

Trace Trace::parse_jsonl(const std::string& text) {
    Trace tr;
    std::istringstream in(text);
    std::string line;
    bool have_header = false;
    bool have_footer = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw_validation("trace line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            const std::string rec = j.at("rec").get<std::string>();
            if (rec == "header") {
                tr.schema_version = j.at("schema").get<int>();
                tr.policy = j.at("policy").get<std::string>();
                tr.seed = j.at("seed").get<std::uint64_t>();
                tr.workload_hash = j.at("workload_hash").get<std::uint64_t>();
                tr.resolved_config = j.at("config");
                have_header = true;
            } else if (rec == "session") {
                tr.sessions.push_back(session_from_json(j));
            } else if (rec == "ev") {
                tr.events.push_back(event_from_json(j));
            } else if (rec == "footer") {
                tr.end_ms = j.at("end_ms").get<double>();
                tr.truncated = j.at("truncated").get<bool>();
                if (j.contains("partial_interval")) {
                    tr.partial_interval = summary_from_json(j.at("partial_interval"));
                }
                if (j.contains("inflight_prefill")) {
                    tr.inflight_prefill = event_from_json(j.at("inflight_prefill"));
                }
                have_footer = true;
            } else {
                throw_validation("trace line " + std::to_string(line_no) +
                                 ": unknown record '" + rec + "'");
            }
        } catch (const json::exception& e) {
            throw_validation("trace line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header || !have_footer) {
        throw_validation("trace is incomplete (missing header or footer)");
    }
    return tr;
}

void Trace::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw_io("cannot write trace file: " + path);
    }
    out << to_jsonl();
}

Trace Trace::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_io("cannot read trace file: " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_jsonl(ss.str());
}

}  // namespace agentsim
