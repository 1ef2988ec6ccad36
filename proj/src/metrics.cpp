#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "error.hpp"

namespace agentsim {

using nlohmann::json;

TpotStat parse_tpot_stat(const std::string& s) {
    if (s == "p95") return TpotStat::P95;
    if (s == "p50") return TpotStat::P50;
    if (s == "mean") return TpotStat::Mean;
    throw_validation("slo.tpot_stat must be one of p95, p50, mean");
}

const char* tpot_stat_name(TpotStat s) {
    switch (s) {
    case TpotStat::P95: return "p95";
    case TpotStat::P50: return "p50";
    case TpotStat::Mean: return "mean";
    }
    return "?";
}

SloConfig calibrate_slo(const ProfileBundle& bundle, double factor, int mean_cold_tokens) {
    if (factor < 1.0) {
        throw_validation("slo.factor must be >= 1");
    }
    double mu_c_full = bundle.cold_rate(bundle.total_sms);
    double mu_d_full = bundle.decode_rate(bundle.total_sms);
    double isolated_step_ms = 1000.0 / mu_d_full;
    double isolated_ttft_ms = 1000.0 * mean_cold_tokens / mu_c_full + isolated_step_ms;
    SloConfig slo;
    slo.calibration_factor = factor;
    slo.tau_ttft_ms = factor * isolated_ttft_ms;
    slo.tau_tpot_ms = factor * isolated_step_ms;
    return slo;
}

double nearest_rank_percentile(std::vector<double> samples, double p) {
    if (samples.empty()) {
        throw_no_data("percentile over empty sample set");
    }
    if (!(p > 0.0 && p <= 100.0)) {
        throw_invalid("percentile must lie in (0, 100]");
    }
    std::size_t n = samples.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    if (rank > n) rank = n;
    std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                     samples.end());
    return samples[rank - 1];
}

namespace {

struct SessionTokens {
    double first_emit_ms = -1.0;
    int emitted = 0;
    std::vector<double> gaps;
    double phase_prev_emit_ms = -1.0;  // last emission within the current decode phase
};

// Walk emissions in event order, breaking gap chains at decode-phase starts.
std::vector<SessionTokens> collect_tokens(const Trace& trace) {
    std::vector<SessionTokens> per(trace.sessions.size());
    for (const auto& e : trace.events) {
        if (e.kind == EventKind::RequestIssued && e.req_kind == RequestKind::DecodeStream) {
            if (e.session < per.size()) {
                per[e.session].phase_prev_emit_ms = -1.0;
            }
        } else if (e.kind == EventKind::DecodeStepCompleted) {
            for (std::uint32_t s : e.emit) {
                if (s >= per.size()) continue;
                auto& st = per[s];
                if (st.first_emit_ms < 0.0) st.first_emit_ms = e.t_ms;
                if (st.phase_prev_emit_ms >= 0.0) {
                    st.gaps.push_back(e.t_ms - st.phase_prev_emit_ms);
                }
                st.phase_prev_emit_ms = e.t_ms;
                st.emitted += 1;
            }
        }
    }
    return per;
}

double session_stat(const SessionMetrics& m, TpotStat stat) {
    switch (stat) {
    case TpotStat::P95: return m.tpot_p95_ms;
    case TpotStat::P50: return m.tpot_p50_ms;
    case TpotStat::Mean: return m.tpot_mean_ms;
    }
    return -1.0;
}

}  // namespace

double ttft(const Trace& trace, std::uint32_t session_id) {
    if (session_id >= trace.sessions.size()) {
        throw_invalid("unknown session " + std::to_string(session_id));
    }
    auto per = collect_tokens(trace);
    if (per[session_id].first_emit_ms < 0.0) {
        throw_no_data("session " + std::to_string(session_id) + " emitted no tokens");
    }
    return per[session_id].first_emit_ms - trace.sessions[session_id].arrival_ms;
}

std::vector<double> tpot_gaps(const Trace& trace, std::uint32_t session_id) {
    if (session_id >= trace.sessions.size()) {
        throw_invalid("unknown session " + std::to_string(session_id));
    }
    return collect_tokens(trace)[session_id].gaps;
}

std::vector<double> tpot_gaps_all(const Trace& trace) {
    std::vector<double> all;
    for (const auto& st : collect_tokens(trace)) {
        all.insert(all.end(), st.gaps.begin(), st.gaps.end());
    }
    return all;
}

std::vector<double> tpot_percentiles(const Trace& trace, const std::vector<double>& ps) {
    std::vector<double> gaps = tpot_gaps_all(trace);
    if (gaps.empty()) {
        throw_no_data("trace has no inter-token gaps");
    }
    std::vector<double> out;
    out.reserve(ps.size());
    for (double p : ps) {
        out.push_back(nearest_rank_percentile(gaps, p));
    }
    return out;
}

double throughput(const Trace& trace, double t0_ms, double t1_ms) {
    if (!(t1_ms > t0_ms)) {
        throw_invalid("throughput window must have positive length");
    }
    std::int64_t tokens = 0;
    for (const auto& e : trace.events) {
        if (e.kind == EventKind::DecodeStepCompleted && e.t_ms > t0_ms && e.t_ms <= t1_ms) {
            tokens += static_cast<std::int64_t>(e.emit.size());
        }
    }
    return 1000.0 * static_cast<double>(tokens) / (t1_ms - t0_ms);
}

MetricsSummary compute_metrics(const Trace& trace, const SloConfig& slo) {
    MetricsSummary out;
    out.slo = slo;
    auto per = collect_tokens(trace);

    std::vector<double> ttfts;
    std::vector<double> all_gaps;
    int joint = 0, ttft_only = 0, tpot_only = 0;
    for (std::size_t i = 0; i < trace.sessions.size(); ++i) {
        SessionMetrics m;
        m.session_id = trace.sessions[i].id;
        m.completed = trace.sessions[i].done;
        m.has_output = per[i].first_emit_ms >= 0.0;
        m.emitted_tokens = per[i].emitted;
        m.tpot_samples_ms = per[i].gaps;
        if (m.has_output) {
            m.ttft_ms = per[i].first_emit_ms - trace.sessions[i].arrival_ms;
            ttfts.push_back(m.ttft_ms);
        }
        if (!m.tpot_samples_ms.empty()) {
            m.tpot_p50_ms = nearest_rank_percentile(m.tpot_samples_ms, 50.0);
            m.tpot_p95_ms = nearest_rank_percentile(m.tpot_samples_ms, 95.0);
            double sum = 0.0;
            for (double g : m.tpot_samples_ms) sum += g;
            m.tpot_mean_ms = sum / static_cast<double>(m.tpot_samples_ms.size());
        }
        all_gaps.insert(all_gaps.end(), per[i].gaps.begin(), per[i].gaps.end());
        if (m.completed) {
            out.completed_sessions += 1;
            m.ttft_ok = m.has_output && m.ttft_ms <= slo.tau_ttft_ms;
            double stat = session_stat(m, slo.tpot_stat);
            m.tpot_ok = !m.tpot_samples_ms.empty() && stat <= slo.tau_tpot_ms;
            m.slo_met = m.ttft_ok && m.tpot_ok;
            if (m.ttft_ok) ttft_only += 1;
            if (m.tpot_ok) tpot_only += 1;
            if (m.slo_met) joint += 1;
        }
        out.sessions.push_back(std::move(m));
    }
    if (!ttfts.empty()) {
        out.ttft_p50_ms = nearest_rank_percentile(ttfts, 50.0);
        out.ttft_p95_ms = nearest_rank_percentile(ttfts, 95.0);
    }
    if (!all_gaps.empty()) {
        out.tpot_p50_ms = nearest_rank_percentile(all_gaps, 50.0);
        out.tpot_p95_ms = nearest_rank_percentile(all_gaps, 95.0);
    }
    if (trace.end_ms > 0.0) {
        out.throughput_tps = throughput(trace, 0.0, trace.end_ms);
    }
    if (out.completed_sessions > 0) {
        double n = static_cast<double>(out.completed_sessions);
        out.slo_attainment = joint / n;
        out.slo_attainment_ttft_only = ttft_only / n;
        out.slo_attainment_tpot_only = tpot_only / n;
    }
    return out;
}

double slo_attainment(const Trace& trace, const SloConfig& slo) {
    MetricsSummary m = compute_metrics(trace, slo);
    if (m.completed_sessions == 0) {
        throw_no_data("no completed sessions in trace");
    }
    return m.slo_attainment;
}

std::string metrics_to_json(const MetricsSummary& m, const Trace& trace) {
    json j;
    j["schema"] = "agentsim-metrics-v1";
    j["policy"] = trace.policy;
    j["seed"] = trace.seed;
    j["workload_hash"] = trace.workload_hash;
    j["end_ms"] = trace.end_ms;
    j["ttft_p50_ms"] = m.ttft_p50_ms;
    j["ttft_p95_ms"] = m.ttft_p95_ms;
    j["tpot_p50_ms"] = m.tpot_p50_ms;
    j["tpot_p95_ms"] = m.tpot_p95_ms;
    j["throughput_tps"] = m.throughput_tps;
    j["slo"] = {{"tau_ttft_ms", m.slo.tau_ttft_ms},
                {"tau_tpot_ms", m.slo.tau_tpot_ms},
                {"factor", m.slo.calibration_factor},
                {"tpot_stat", tpot_stat_name(m.slo.tpot_stat)}};
    j["slo_attainment"] = m.slo_attainment;
    j["slo_attainment_ttft_only"] = m.slo_attainment_ttft_only;
    j["slo_attainment_tpot_only"] = m.slo_attainment_tpot_only;
    j["completed_sessions"] = m.completed_sessions;
    j["sessions"] = json::array();
    for (const auto& s : m.sessions) {
        j["sessions"].push_back({{"id", s.session_id},
                                 {"completed", s.completed},
                                 {"ttft_ms", s.ttft_ms},
                                 {"tokens", s.emitted_tokens},
                                 {"tpot_p50_ms", s.tpot_p50_ms},
                                 {"tpot_p95_ms", s.tpot_p95_ms},
                                 {"tpot_mean_ms", s.tpot_mean_ms},
                                 {"slo_met", s.slo_met}});
    }
    return j.dump(2) + "\n";
}

std::string sessions_to_csv(const MetricsSummary& m, const Trace& trace) {
    std::ostringstream out;
    out << "session_id,arrival_ms,completed,truncated,ttft_ms,tokens,"
           "tpot_p50_ms,tpot_p95_ms,tpot_mean_ms,ttft_ok,tpot_ok,slo_met\n";
    for (std::size_t i = 0; i < m.sessions.size(); ++i) {
        const auto& s = m.sessions[i];
        const auto& rec = trace.sessions[i];
        out << s.session_id << ',' << rec.arrival_ms << ',' << (s.completed ? 1 : 0) << ','
            << (rec.truncated ? 1 : 0) << ',' << s.ttft_ms << ',' << s.emitted_tokens << ','
            << s.tpot_p50_ms << ',' << s.tpot_p95_ms << ',' << s.tpot_mean_ms << ','
            << (s.ttft_ok ? 1 : 0) << ',' << (s.tpot_ok ? 1 : 0) << ',' << (s.slo_met ? 1 : 0)
            << '\n';
    }
    return out.str();
}

}  // namespace agentsim
