// Acceptance suite: one criterion per test case, one PASS/FAIL line each.
// Every tolerance and workload is pinned here in code; nothing is deferred
// to runtime configuration.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "executor.hpp"
#include "helpers.hpp"
#include "metrics.hpp"
#include "rng.hpp"

using namespace agentsim;
using nlohmann::json;
using testutil::random_bundle;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[criterion %2d] %s: %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

json base_config(const std::string& policy, const std::string& paradigm, int concurrency,
                 double stagger_ms, std::uint64_t seed) {
    json cfg;
    cfg["profile"] = {{"source", "default"}};
    cfg["workload"] = {{"paradigm", paradigm},
                       {"concurrency", concurrency},
                       {"stagger_ms", stagger_ms}};
    cfg["policy"] = policy;
    cfg["seed"] = seed;
    return cfg;
}

Trace run_cfg(const json& cfg_json) {
    return run_simulation(run_config_from_json(cfg_json));
}

std::vector<double> step_spans(const Trace& tr) {
    std::vector<double> spans;
    for (const auto& e : tr.events) {
        if (e.kind == EventKind::DecodeStepCompleted && e.batch > 0) {
            spans.push_back(e.t_ms - e.anchor_ms);
        }
    }
    return spans;
}

}  // namespace

TEST_CASE("criterion 1: offline optimum equals the brute-force oracle") {
    Timer timer;
    Rng rng = Rng::substream(101, "acceptance/oracle");
    int intervals_checked = 0;
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        ProfileBundle b = random_bundle(rng, 16);
        double r_min = rng.uniform(0.5, b.decode_rate(b.total_sms));
        int star = r_g_star(b, r_min);
        int intervals = 1 + static_cast<int>(rng.uniform_int(12));
        std::vector<double> etas;
        for (int i = 0; i < intervals; ++i) etas.push_back(rng.next_double());
        double dt = rng.uniform(10.0, 1000.0);
        auto closed = offline_optimum(b, etas, star, dt);
        auto brute = brute_force_offline(b, etas, r_min, dt);
        for (std::size_t i = 0; i < closed.size(); ++i) {
            intervals_checked += 1;
            if (closed[i] != brute[i]) mismatches += 1;  // exact equality required
        }
    }
    double secs = timer.seconds();
    bool pass = mismatches == 0 && secs < 10.0;
    report(1, pass,
           std::to_string(intervals_checked) + " intervals over 1000 instances, " +
               std::to_string(mismatches) + " mismatches, " + std::to_string(secs) + " s");
    CHECK(mismatches == 0);
    CHECK(secs < 10.0);
}

TEST_CASE("criteria 2+3: instantaneous-ratio campaign with the feasibility floor") {
    Timer timer;
    int runs = 0;
    int violations = 0;
    int floor_breaks = 0;
    int assumption_fails = 0;
    int checked = 0;
    int vacuous = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        for (int conc : {3, 4, 5, 6}) {
            const char* paradigm = (seed + conc) % 2 == 0 ? "react" : "plan_and_execute";
            double stagger = (seed % 2 == 0) ? 500.0 : 20000.0;
            json cfg_json = base_config("agentserve", paradigm, conc, stagger, seed);
            RunConfig cfg = run_config_from_json(cfg_json);
            REQUIRE(cfg.controller.r_base_slots == cfg.r_g_star_slots);
            Trace tr = run_simulation(cfg);
            runs += 1;
            VerifyReport rep =
                verify_trace(tr, cfg.profile, cfg.r_min_tps, cfg.controller.r_base_slots,
                             cfg.controller.delta_t_ms, VerifyParams{});
            violations += rep.violations;
            checked += rep.checked;
            vacuous += rep.vacuous;
            if (!rep.assumptions_met) assumption_fails += 1;
            for (const auto& s : tr.intervals()) {
                if (s.decode_slots < cfg.r_g_star_slots) floor_breaks += 1;
            }
        }
    }
    double secs = timer.seconds();
    bool pass2 = violations == 0 && assumption_fails == 0 && secs < 120.0;
    report(2, pass2,
           std::to_string(runs) + " runs, " + std::to_string(checked) + " checked intervals (" +
               std::to_string(vacuous) + " vacuous), " + std::to_string(violations) +
               " bound violations, " + std::to_string(secs) + " s");
    CHECK(violations == 0);
    CHECK(assumption_fails == 0);
    CHECK(secs < 120.0);

    bool pass3 = floor_breaks == 0;
    report(3, pass3, "decode binding >= R_g* in every interval of every run (" +
                         std::to_string(floor_breaks) + " breaks)");
    CHECK(floor_breaks == 0);
}

TEST_CASE("criterion 4: linearized bound ordering and the Lipschitz step") {
    Rng rng = Rng::substream(104, "acceptance/cor2");
    int ordering_fails = 0;
    int pointwise_fails = 0;
    int profiles = 0;
    while (profiles < 1000) {
        ProfileBundle b = random_bundle(rng);
        double r_min = rng.uniform(0.5, b.decode_rate(b.total_sms));
        int star = r_g_star(b, r_min);
        int prefill_sms = b.total_sms - b.slots_to_sms(star);
        if (prefill_sms == 0) continue;
        profiles += 1;
        BoundParams p;
        p.delta_sms = rng.uniform(0.0, static_cast<double>(prefill_sms));
        p.eps_bar = rng.uniform(0.0, 0.5);
        double eta = rng.next_double();
        double exact = instantaneous_ratio_bound(b, eta, star, p);
        double linearized = linearized_ratio_bound(b, eta, star, p);
        if (linearized > exact + 1e-12 * std::max(1.0, std::fabs(exact))) {
            ordering_fails += 1;
        }
        int lo = b.grid_floor(prefill_sms - p.delta_sms);
        double lipschitz = b.lipschitz_estimate(eta, lo, prefill_sms);
        double lhs = b.mixed_prefill_rate(eta, lo);
        double rhs = b.mixed_prefill_rate(eta, prefill_sms) - lipschitz * (prefill_sms - lo);
        if (lhs < rhs - 1e-12 * std::max(1.0, std::fabs(rhs))) {
            pointwise_fails += 1;
        }
    }
    bool pass = ordering_fails == 0 && pointwise_fails == 0;
    report(4, pass, "1000 profiles: " + std::to_string(ordering_fails) + " ordering fails, " +
                        std::to_string(pointwise_fails) + " pointwise fails");
    CHECK(ordering_fails == 0);
    CHECK(pointwise_fails == 0);
}

TEST_CASE("criterion 5: rate threshold and slot-selection fixtures") {
    bool rate_ok = r_min_rate(20.0) == 50.0;
    SlotSet slots(10, 0.05);
    bool slot_ok = slots.select_slot(3.7) == 4;  // 37% target -> the 40% context
    report(5, rate_ok && slot_ok,
           std::string("tau=20ms -> ") + std::to_string(r_min_rate(20.0)) +
               " tok/s; 37% -> level " + std::to_string(slots.select_slot(3.7)));
    CHECK(rate_ok);
    CHECK(slot_ok);
}

TEST_CASE("criterion 6: directional comparison against mixed FCFS") {
    Timer timer;
    const std::uint64_t seed = 13;
    json a_cfg = base_config("agentserve", "react", 6, 20000.0, seed);
    json m_cfg = base_config("mixed_fcfs", "react", 6, 20000.0, seed);
    RunConfig a_run = run_config_from_json(a_cfg);
    RunConfig m_run = run_config_from_json(m_cfg);
    Trace a_tr = run_simulation(a_run);
    Trace m_tr = run_simulation(m_run);
    REQUIRE(a_tr.workload_hash == m_tr.workload_hash);

    MetricsSummary a = compute_metrics(a_tr, a_run.slo);
    MetricsSummary m = compute_metrics(m_tr, m_run.slo);

    bool tpot_dir = a.tpot_p95_ms < m.tpot_p95_ms;
    bool ttft_dir = a.ttft_p95_ms < m.ttft_p95_ms;
    double tpot_ratio = m.tpot_p95_ms / a.tpot_p95_ms;

    std::vector<double> spans = step_spans(m_tr);
    std::sort(spans.begin(), spans.end());
    double median = spans[spans.size() / 2];
    bool spike = spans.back() > 2.0 * median;

    bool attain_dir = a.slo_attainment >= m.slo_attainment;
    double secs = timer.seconds();
    bool pass = tpot_dir && ttft_dir && spike && attain_dir && secs < 30.0;
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "tpot p95 %.2f vs %.2f (ratio %.2fx%s), ttft p95 %.0f vs %.0f, "
                  "mixed spike %.0f/%.0f ms, attainment %.2f vs %.2f, %.1f s",
                  a.tpot_p95_ms, m.tpot_p95_ms, tpot_ratio,
                  tpot_ratio >= 1.5 ? "" : ", informational 1.5x target not met",
                  a.ttft_p95_ms, m.ttft_p95_ms, spans.back(), median, a.slo_attainment,
                  m.slo_attainment, secs);
    report(6, pass, detail);
    CHECK(tpot_dir);
    CHECK(ttft_dir);
    CHECK(spike);
    CHECK(attain_dir);
    CHECK(secs < 30.0);
}

TEST_CASE("criterion 7: ablations never beat the full policy") {
    const std::uint64_t seed = 42;
    json a_cfg = base_config("agentserve", "react", 4, 20000.0, seed);
    RunConfig a_run = run_config_from_json(a_cfg);
    Trace a_tr = run_simulation(a_run);
    MetricsSummary a = compute_metrics(a_tr, a_run.slo);

    // No-Alg: the adaptive loop removed, partition frozen at the same initial
    // allocation the full policy starts from.
    json s_cfg = base_config("static_partition", "react", 4, 20000.0, seed);
    s_cfg["static_decode_slots"] = a_run.r_g_star_slots;
    RunConfig s_run = run_config_from_json(s_cfg);
    Trace s_tr = run_simulation(s_run);
    MetricsSummary s = compute_metrics(s_tr, s_run.slo);

    // No-Green: budget control kept, SM isolation removed.
    json n_cfg = base_config("agentserve_no_slots", "react", 4, 20000.0, seed);
    RunConfig n_run = run_config_from_json(n_cfg);
    Trace n_tr = run_simulation(n_run);
    MetricsSummary n = compute_metrics(n_tr, n_run.slo);

    REQUIRE(a_tr.workload_hash == s_tr.workload_hash);
    REQUIRE(a_tr.workload_hash == n_tr.workload_hash);
    bool static_dir = s.tpot_p95_ms >= a.tpot_p95_ms;
    bool noslots_dir = n.tpot_p95_ms >= a.tpot_p95_ms;
    char detail[192];
    std::snprintf(detail, sizeof(detail),
                  "tpot p95: full %.2f, no-alg %.2f, no-green %.2f ms", a.tpot_p95_ms,
                  s.tpot_p95_ms, n.tpot_p95_ms);
    report(7, static_dir && noslots_dir, detail);
    CHECK(static_dir);
    CHECK(noslots_dir);
}

TEST_CASE("criteria 8+9+10: determinism, replay, and metric/workload conformance") {
    Timer timer;
    // Determinism at the file level.
    json det_cfg = base_config("agentserve", "react", 4, 500.0, 77);
    Trace d1 = run_cfg(det_cfg);
    Trace d2 = run_cfg(det_cfg);
    bool identical = d1.to_jsonl() == d2.to_jsonl();

    // 100 randomized runs across all policies: replay must be silent, and the
    // joint SLO attainment can never exceed either single-criterion rate.
    const char* policies[] = {"agentserve", "mixed_fcfs", "static_partition",
                              "chunked_prefill", "agentserve_no_slots"};
    Rng rng = Rng::substream(108, "acceptance/replay");
    int replay_mismatches = 0;
    int dominance_fails = 0;
    int replayed_runs = 0;
    for (int i = 0; i < 100; ++i) {
        json cfg_json = base_config(policies[i % 5], (i % 3 == 0) ? "plan_and_execute" : "react",
                                    2 + static_cast<int>(rng.uniform_int(5)),
                                    rng.uniform(0.0, 10000.0), 1000 + i);
        RunConfig cfg = run_config_from_json(cfg_json);
        Trace tr = run_simulation(cfg);
        ReplayReport rep = replay_check(tr);  // exact TPOT recount + phase order inside
        replay_mismatches += rep.mismatches;
        replayed_runs += 1;
        MetricsSummary m = compute_metrics(tr, cfg.slo);
        if (m.slo_attainment > m.slo_attainment_ttft_only + 1e-12 ||
            m.slo_attainment > m.slo_attainment_tpot_only + 1e-12) {
            dominance_fails += 1;
        }
    }
    bool pass8 = identical && replay_mismatches == 0;
    report(8, pass8,
           std::string("bit-identical reruns: ") + (identical ? "yes" : "no") + "; " +
               std::to_string(replay_mismatches) + " replay mismatches over 100 runs, " +
               std::to_string(timer.seconds()) + " s");
    CHECK(identical);
    CHECK(replay_mismatches == 0);

    // Criterion 9: nearest-rank percentile against a sort oracle, plus the
    // exact TPOT recount and dominance results gathered above.
    Rng prng = Rng::substream(109, "acceptance/pct");
    int pct_fails = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + prng.uniform_int(300);
        std::vector<double> samples;
        for (std::size_t k = 0; k < n; ++k) samples.push_back(prng.uniform(0.0, 1000.0));
        double p = prng.uniform(0.001, 100.0);
        std::vector<double> sorted = samples;
        std::sort(sorted.begin(), sorted.end());
        std::size_t rank =
            static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
        rank = std::max<std::size_t>(1, std::min(rank, n));
        if (nearest_rank_percentile(samples, p) != sorted[rank - 1]) pct_fails += 1;
    }
    bool pass9 = pct_fails == 0 && replay_mismatches == 0 && dominance_fails == 0;
    report(9, pass9,
           std::to_string(pct_fails) + " percentile fails over 1000 sets, " +
               std::to_string(dominance_fails) + " dominance fails, TPOT recount exact");
    CHECK(pct_fails == 0);
    CHECK(dominance_fails == 0);

    // Criterion 10: 10k samples per built-in distribution, mean within 5%,
    // plus the phase-order regex already enforced per run by the replayer.
    int range_fails = 0;
    int mean_fails = 0;
    for (const char* paradigm : {"react", "plan_and_execute"}) {
        for (const char* model : {"qwen2.5-3b", "qwen2.5-7b", "llama3-8b"}) {
            ParadigmSpec spec = builtin_paradigm(paradigm, model);
            for (const TokenDistribution& d : {spec.cold, spec.resume, spec.decode}) {
                LengthSampler sampler(d);
                Rng lr = Rng::substream(110, std::string(paradigm) + "/" + model);
                double sum = 0.0;
                for (int k = 0; k < 10000; ++k) {
                    int v = sampler.sample(lr);
                    if (v < d.min_tokens || v > d.max_tokens) range_fails += 1;
                    sum += v;
                }
                if (std::fabs(sum / 10000.0 - d.mean_tokens) > 0.05 * d.mean_tokens) {
                    mean_fails += 1;
                }
            }
        }
    }
    bool pass10 = range_fails == 0 && mean_fails == 0;
    report(10, pass10,
           std::to_string(range_fails) + " out-of-range samples, " + std::to_string(mean_fails) +
               " mean fails; phase order clean in " + std::to_string(replayed_runs) +
               " replayed runs");
    CHECK(range_fails == 0);
    CHECK(mean_fails == 0);
}
