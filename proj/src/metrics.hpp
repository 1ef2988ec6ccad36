#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "profile.hpp"
#include "trace.hpp"

namespace agentsim {

enum class TpotStat { P95, P50, Mean };

TpotStat parse_tpot_stat(const std::string& s);
const char* tpot_stat_name(TpotStat s);

struct SloConfig {
    double tau_ttft_ms = 0.0;
    double tau_tpot_ms = 0.0;
    double calibration_factor = 1.0;
    TpotStat tpot_stat = TpotStat::P95;  // per-session statistic checked against tau_tpot
};

// Thresholds anchored to isolated single-session performance on the full
// device: one mean-length cold prefill plus the first decode step for TTFT,
// one single-stream decode step for TPOT, both scaled by factor.
SloConfig calibrate_slo(const ProfileBundle& bundle, double factor, int mean_cold_tokens);

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample.
double nearest_rank_percentile(std::vector<double> samples, double p);

struct SessionMetrics {
    std::uint32_t session_id = 0;
    bool completed = false;
    bool has_output = false;
    double ttft_ms = -1.0;
    int emitted_tokens = 0;
    std::vector<double> tpot_samples_ms;  // intra-phase inter-token gaps
    double tpot_p50_ms = -1.0;
    double tpot_p95_ms = -1.0;
    double tpot_mean_ms = -1.0;
    bool ttft_ok = false;
    bool tpot_ok = false;
    bool slo_met = false;
};

struct MetricsSummary {
    std::vector<SessionMetrics> sessions;
    double ttft_p50_ms = -1.0;
    double ttft_p95_ms = -1.0;
    double tpot_p50_ms = -1.0;  // over all gaps in the trace
    double tpot_p95_ms = -1.0;
    double throughput_tps = 0.0;
    double slo_attainment = 0.0;
    double slo_attainment_ttft_only = 0.0;
    double slo_attainment_tpot_only = 0.0;
    int completed_sessions = 0;
    SloConfig slo;
};

// Time-to-first-token for one session, from arrival. Errors when the session
// emitted nothing.
double ttft(const Trace& trace, std::uint32_t session_id);

// Inter-token gaps within decode phases. Gaps spanning tool delays (decode
// end to next decode start) are excluded.
std::vector<double> tpot_gaps(const Trace& trace, std::uint32_t session_id);
std::vector<double> tpot_gaps_all(const Trace& trace);

// Nearest-rank percentiles over the gaps in scope. Errors on an empty scope.
std::vector<double> tpot_percentiles(const Trace& trace, const std::vector<double>& percentiles);

// Emitted decode tokens per second over [t0, t1]. Errors on an empty window.
double throughput(const Trace& trace, double t0_ms, double t1_ms);

// Fraction of completed sessions meeting both thresholds jointly.
double slo_attainment(const Trace& trace, const SloConfig& slo);

MetricsSummary compute_metrics(const Trace& trace, const SloConfig& slo);

std::string metrics_to_json(const MetricsSummary& m, const Trace& trace);
std::string sessions_to_csv(const MetricsSummary& m, const Trace& trace);

}  // namespace agentsim
