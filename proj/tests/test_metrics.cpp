#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "analysis.hpp"
#include "config.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "helpers.hpp"
#include "metrics.hpp"
#include "rng.hpp"

using namespace agentsim;
using nlohmann::json;
using testutil::make_bundle;

namespace {

// Trace with scripted emission timestamps: one decode phase per inner list.
Trace synthetic_trace(const std::vector<double>& arrivals,
                      const std::vector<std::vector<std::vector<double>>>& phases,
                      double end_ms) {
    Trace tr;
    tr.policy = "synthetic";
    tr.end_ms = end_ms;
    std::vector<TraceEvent> events;
    for (std::size_t s = 0; s < arrivals.size(); ++s) {
        SessionRecord rec;
        rec.id = static_cast<std::uint32_t>(s);
        rec.arrival_ms = arrivals[s];
        rec.done = true;
        tr.sessions.push_back(rec);
        for (const auto& phase : phases[s]) {
            TraceEvent issue;
            issue.kind = EventKind::RequestIssued;
            issue.t_ms = phase.empty() ? arrivals[s] : phase.front() - 1e-3;
            issue.session = static_cast<std::uint32_t>(s);
            issue.req_kind = RequestKind::DecodeStream;
            issue.queue = QueueId::QD;
            events.push_back(issue);
            for (double t : phase) {
                TraceEvent step;
                step.kind = EventKind::DecodeStepCompleted;
                step.t_ms = t;
                step.batch = 1;
                step.emit = {static_cast<std::uint32_t>(s)};
                events.push_back(step);
            }
        }
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.t_ms < b.t_ms; });
    for (std::size_t i = 0; i < events.size(); ++i) events[i].seq = i;
    tr.events = std::move(events);
    return tr;
}

}  // namespace

TEST_CASE("nearest-rank percentile fixtures") {
    std::vector<double> gaps{10, 10, 10, 10, 100};
    CHECK(nearest_rank_percentile(gaps, 50.0) == 10.0);
    CHECK(nearest_rank_percentile(gaps, 95.0) == 100.0);
    CHECK(nearest_rank_percentile(gaps, 100.0) == 100.0);
    CHECK(nearest_rank_percentile({7, 7, 7}, 50.0) == 7.0);
    CHECK(nearest_rank_percentile({7, 7, 7}, 95.0) == 7.0);
    CHECK_THROWS_AS(nearest_rank_percentile({}, 50.0), SimError);
    CHECK_THROWS_AS(nearest_rank_percentile({1.0}, 0.0), SimError);
}

TEST_CASE("nearest-rank percentiles match a full-sort oracle") {
    Rng rng = Rng::substream(31, "metrics/pct");
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng.uniform_int(200);
        std::vector<double> samples;
        samples.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            samples.push_back(rng.uniform(0.0, 500.0));
        }
        double p = rng.uniform(0.001, 100.0);
        // Oracle: sort everything, index by ceil(p/100 * n).
        std::vector<double> sorted = samples;
        std::sort(sorted.begin(), sorted.end());
        std::size_t rank =
            static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
        rank = std::max<std::size_t>(1, std::min(rank, n));
        CHECK(nearest_rank_percentile(samples, p) == sorted[rank - 1]);
        double p50 = nearest_rank_percentile(samples, 50.0);
        double p95 = nearest_rank_percentile(samples, 95.0);
        CHECK(p50 <= p95);
    }
}

TEST_CASE("ttft of an isolated session matches the closed form") {
    json cfg_json;
    std::vector<double> d(10, 50.0), c(10, 600.0), r(10, 300.0);
    cfg_json["profile"] = {{"inline", json::parse(profile_to_json(make_bundle(12, d, c, r)))}};
    cfg_json["workload"] = {{"paradigm", "react"},
                            {"concurrency", 1},
                            {"stagger_ms", 0.0},
                            {"cold", {{"min", 3000}, {"max", 3000}, {"mean", 3000}}}};
    cfg_json["policy"] = "mixed_fcfs";
    cfg_json["seed"] = 12;
    Trace tr = run_simulation(run_config_from_json(cfg_json));
    CHECK(ttft(tr, 0) == doctest::Approx(5020.0).epsilon(1e-12));
    CHECK_THROWS_AS(ttft(tr, 99), SimError);
}

TEST_CASE("a session arriving behind another cold prefill sees inflated TTFT") {
    json cfg_json;
    std::vector<double> d(10, 50.0), c(10, 600.0), r(10, 300.0);
    cfg_json["profile"] = {{"inline", json::parse(profile_to_json(make_bundle(12, d, c, r)))}};
    cfg_json["workload"] = {{"paradigm", "react"},
                            {"concurrency", 2},
                            {"stagger_ms", 100.0},
                            {"cold", {{"min", 3000}, {"max", 3000}, {"mean", 3000}}}};
    cfg_json["policy"] = "mixed_fcfs";
    cfg_json["seed"] = 3;
    Trace tr = run_simulation(run_config_from_json(cfg_json));
    // Both arrive within 100 ms; whichever queues second waits out the other
    // session's 5000 ms cold prefill before its own.
    double isolated = 5020.0;
    double later = std::max(ttft(tr, 0), ttft(tr, 1));
    CHECK(later > isolated);
    CHECK(std::min(ttft(tr, 0), ttft(tr, 1)) >= isolated - 1e-9);
}

TEST_CASE("throughput counts decode tokens over the window") {
    // One stream emitting every 20 ms for 10 s: 500 tokens -> 50 tok/s.
    std::vector<std::vector<std::vector<double>>> phases(1);
    std::vector<double> emits;
    for (int i = 1; i <= 500; ++i) emits.push_back(i * 20.0);
    phases[0].push_back(emits);
    Trace tr = synthetic_trace({0.0}, phases, 10000.0);
    CHECK(throughput(tr, 0.0, 10000.0) == doctest::Approx(50.0));
    CHECK_THROWS_AS(throughput(tr, 5.0, 5.0), SimError);

    // Disjoint half-windows: the full window is the duration-weighted mean.
    double first = throughput(tr, 0.0, 4000.0);
    double second = throughput(tr, 4000.0, 10000.0);
    double full = throughput(tr, 0.0, 10000.0);
    CHECK(full == doctest::Approx((first * 4000.0 + second * 6000.0) / 10000.0));
}

TEST_CASE("joint SLO attainment fails a session on either threshold") {
    // Four sessions; one violates only TTFT.
    std::vector<double> arrivals{0.0, 0.0, 0.0, 0.0};
    std::vector<std::vector<std::vector<double>>> phases(4);
    auto gaps10 = [](double start) {
        return std::vector<double>{start, start + 10.0, start + 20.0};
    };
    phases[0].push_back(gaps10(50.0));
    phases[1].push_back(gaps10(200.0));  // late first token
    phases[2].push_back(gaps10(50.0));
    phases[3].push_back(gaps10(50.0));
    Trace tr = synthetic_trace(arrivals, phases, 400.0);
    SloConfig slo;
    slo.tau_ttft_ms = 100.0;
    slo.tau_tpot_ms = 50.0;
    CHECK(slo_attainment(tr, slo) == doctest::Approx(0.75));

    MetricsSummary m = compute_metrics(tr, slo);
    CHECK(m.slo_attainment <= m.slo_attainment_ttft_only);
    CHECK(m.slo_attainment <= m.slo_attainment_tpot_only);
    CHECK(m.slo_attainment_tpot_only == doctest::Approx(1.0));
}

TEST_CASE("perfectly in-bounds sessions give attainment one") {
    std::vector<std::vector<std::vector<double>>> phases(2);
    phases[0].push_back({10.0, 20.0, 30.0});
    phases[1].push_back({12.0, 22.0, 32.0});
    Trace tr = synthetic_trace({0.0, 0.0}, phases, 100.0);
    SloConfig slo;
    slo.tau_ttft_ms = 1000.0;
    slo.tau_tpot_ms = 1000.0;
    CHECK(slo_attainment(tr, slo) == doctest::Approx(1.0));
}

TEST_CASE("gaps spanning tool delays are excluded from TPOT samples") {
    // Two phases separated by a long pause: the cross-phase gap must not
    // appear among the samples.
    std::vector<std::vector<std::vector<double>>> phases(1);
    phases[0].push_back({10.0, 20.0, 30.0});
    phases[0].push_back({5000.0, 5010.0});
    Trace tr = synthetic_trace({0.0}, phases, 6000.0);
    auto gaps = tpot_gaps(tr, 0);
    REQUIRE(gaps.size() == 3);  // 5 emissions, 2 phase starts
    for (double g : gaps) {
        CHECK(g == doctest::Approx(10.0));
    }
}

TEST_CASE("sample counts: emitted tokens minus one per contiguous phase") {
    json cfg_json;
    cfg_json["profile"] = {{"inline", json::parse(profile_to_json(default_profile()))}};
    cfg_json["workload"] = {{"paradigm", "react"}, {"concurrency", 1}};
    cfg_json["policy"] = "agentserve";
    cfg_json["seed"] = 77;
    Trace tr = run_simulation(run_config_from_json(cfg_json));
    MetricsSummary m = compute_metrics(tr, SloConfig{1e9, 1e9, 1.0, TpotStat::P95});
    const auto& s = m.sessions[0];
    int phases = tr.sessions[0].rounds + 1;
    CHECK(static_cast<int>(s.tpot_samples_ms.size()) == s.emitted_tokens - phases);
}

TEST_CASE("slo calibration anchors to isolated full-device performance") {
    std::vector<double> d(10, 50.0), c(10, 600.0), r(10, 300.0);
    ProfileBundle b = make_bundle(12, d, c, r);
    SloConfig one = calibrate_slo(b, 1.0, 3000);
    CHECK(one.tau_tpot_ms == doctest::Approx(20.0));
    CHECK(one.tau_ttft_ms == doctest::Approx(5020.0));

    SloConfig two = calibrate_slo(b, 2.0, 3000);
    CHECK(two.tau_tpot_ms == doctest::Approx(40.0));
    CHECK(r_min_rate(two.tau_tpot_ms) == doctest::Approx(25.0));

    CHECK_THROWS_AS(calibrate_slo(b, 0.5, 3000), SimError);
}

TEST_CASE("calibrated thresholds pass an isolated session under every policy") {
    for (const char* policy : {"agentserve", "mixed_fcfs", "static_partition",
                               "chunked_prefill", "agentserve_no_slots"}) {
        json cfg_json;
        cfg_json["profile"] = {{"inline", json::parse(profile_to_json(default_profile()))}};
        cfg_json["workload"] = {{"paradigm", "react"}, {"concurrency", 1}, {"stagger_ms", 0.0}};
        cfg_json["policy"] = policy;
        cfg_json["seed"] = 5;
        RunConfig cfg = run_config_from_json(cfg_json);
        Trace tr = run_simulation(cfg);
        CHECK(slo_attainment(tr, cfg.slo) == doctest::Approx(1.0));
    }
}

TEST_CASE("metrics are pure functions of the trace") {
    json cfg_json;
    cfg_json["profile"] = {{"inline", json::parse(profile_to_json(default_profile()))}};
    cfg_json["workload"] = {{"paradigm", "plan_and_execute"}, {"concurrency", 3}};
    cfg_json["policy"] = "agentserve";
    cfg_json["seed"] = 31;
    RunConfig cfg = run_config_from_json(cfg_json);
    Trace tr = run_simulation(cfg);
    MetricsSummary a = compute_metrics(tr, cfg.slo);
    MetricsSummary b = compute_metrics(Trace::parse_jsonl(tr.to_jsonl()), cfg.slo);
    CHECK(a.ttft_p95_ms == b.ttft_p95_ms);
    CHECK(a.tpot_p50_ms == b.tpot_p50_ms);
    CHECK(a.tpot_p95_ms == b.tpot_p95_ms);
    CHECK(a.throughput_tps == b.throughput_tps);
    CHECK(a.slo_attainment == b.slo_attainment);
    // And the serialized forms carry the same per-session table.
    CHECK(sessions_to_csv(a, tr) == sessions_to_csv(b, tr));
}
