#include "analysis.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "json.hpp"

namespace agentsim {

using nlohmann::json;

double r_min_rate(double tau_tpot_ms) {
    if (!(tau_tpot_ms > 0.0)) {
        throw_invalid("tau_tpot must be > 0");
    }
    return 1000.0 / tau_tpot_ms;
}

int r_g_star(const ProfileBundle& bundle, double r_min_tps) {
    if (bundle.decode_rate(bundle.total_sms) < r_min_tps) {
        throw_infeasible("decode SLO infeasible: mu_D(S) = " +
                         std::to_string(bundle.decode_rate(bundle.total_sms)) +
                         " tok/s < r_min = " + std::to_string(r_min_tps) + " tok/s");
    }
    for (int slots = 1; slots <= bundle.total_slots(); ++slots) {
        if (bundle.decode_rate(bundle.slots_to_sms(slots)) >= r_min_tps) {
            return slots;
        }
    }
    throw_infeasible("decode SLO infeasible on every grid level");
}

std::vector<double> offline_optimum(const ProfileBundle& bundle,
                                    const std::vector<double>& eta_series,
                                    int r_g_star_slots, double dt_ms) {
    if (dt_ms <= 0.0) {
        throw_invalid("dt must be > 0");
    }
    int prefill_sms = bundle.slots_to_sms(bundle.total_slots() - r_g_star_slots);
    std::vector<double> out;
    out.reserve(eta_series.size());
    for (double eta : eta_series) {
        out.push_back(bundle.mixed_prefill_rate(eta, prefill_sms) * dt_ms / 1000.0);
    }
    return out;
}

std::vector<int> feasible_decode_allocations(const ProfileBundle& bundle, double r_min_tps) {
    std::vector<int> feasible;
    for (int slots = 1; slots <= bundle.total_slots(); ++slots) {
        if (bundle.decode_rate(bundle.slots_to_sms(slots)) >= r_min_tps) {
            feasible.push_back(slots);
        }
    }
    if (feasible.empty()) {
        throw_infeasible("decode SLO infeasible: no grid allocation meets r_min");
    }
    return feasible;
}

std::vector<double> brute_force_offline(const ProfileBundle& bundle,
                                        const std::vector<double>& eta_series, double r_min_tps,
                                        double dt_ms) {
    if (dt_ms <= 0.0) {
        throw_invalid("dt must be > 0");
    }
    std::vector<int> feasible = feasible_decode_allocations(bundle, r_min_tps);
    std::vector<double> out;
    out.reserve(eta_series.size());
    for (double eta : eta_series) {
        double best = 0.0;
        for (int slots : feasible) {
            int prefill_sms = bundle.slots_to_sms(bundle.total_slots() - slots);
            best = std::max(best, bundle.mixed_prefill_rate(eta, prefill_sms) * dt_ms / 1000.0);
        }
        out.push_back(best);
    }
    return out;
}

namespace {

struct BoundPieces {
    double denom = 0.0;      // mu_P at the full offline prefill allocation
    int offline_sms = 0;     // S - R*g in SMs
    int reduced_sms = 0;     // grid floor of S - R*g - delta
    double delta_eff = 0.0;  // offline_sms - reduced_sms (>= delta)
};

BoundPieces bound_pieces(const ProfileBundle& bundle, double eta, int r_g_star_slots,
                         const BoundParams& params) {
    if (params.delta_sms < 0.0) {
        throw_invalid("delta must be >= 0");
    }
    if (!(params.eps_bar >= 0.0 && params.eps_bar < 1.0)) {
        throw_invalid("eps_bar must lie in [0, 1)");
    }
    BoundPieces p;
    p.offline_sms = bundle.slots_to_sms(bundle.total_slots() - r_g_star_slots);
    p.denom = bundle.mixed_prefill_rate(eta, p.offline_sms);
    if (!(p.denom > 0.0)) {
        throw_infeasible("degenerate capacity: mu_P(S - R_g*) = 0, bound undefined");
    }
    double reduced = static_cast<double>(p.offline_sms) - params.delta_sms;
    if (reduced < 0.0) {
        throw_invalid("delta exceeds the offline prefill allocation (S - R_g*)");
    }
    p.reduced_sms = bundle.grid_floor(reduced);
    p.delta_eff = static_cast<double>(p.offline_sms - p.reduced_sms);
    return p;
}

}  // namespace

double instantaneous_ratio_bound(const ProfileBundle& bundle, double eta, int r_g_star_slots,
                      const BoundParams& params) {
    BoundPieces p = bound_pieces(bundle, eta, r_g_star_slots, params);
    double numer = bundle.mixed_prefill_rate(eta, p.reduced_sms);
    return (1.0 - params.eps_bar) * numer / p.denom;
}

double linearized_ratio_bound(const ProfileBundle& bundle, double eta, int r_g_star_slots,
                        const BoundParams& params) {
    BoundPieces p = bound_pieces(bundle, eta, r_g_star_slots, params);
    double lipschitz = bundle.lipschitz_estimate(eta, p.reduced_sms, p.offline_sms);
    return (1.0 - params.eps_bar) * (1.0 - lipschitz * p.delta_eff / p.denom);
}

std::string VerifyReport::to_json() const {
    json j;
    j["schema"] = "agentsim-verify-v1";
    j["checked"] = checked;
    j["vacuous"] = vacuous;
    j["violations"] = violations;
    j["min_rho"] = min_rho;
    j["min_bound"] = min_bound;
    j["measured_delta_sms"] = measured_delta_sms;
    j["measured_eps"] = measured_eps;
    j["used_delta_sms"] = used_delta_sms;
    j["used_eps_bar"] = used_eps_bar;
    j["r_g_star_slots"] = r_g_star_slots;
    j["assumptions_met"] = assumptions_met;
    j["assumption_flags"] = assumption_flags;
    j["intervals"] = json::array();
    for (const auto& r : intervals) {
        j["intervals"].push_back({{"idx", r.index},
                                  {"w_a", r.w_a_tokens},
                                  {"w_star", r.w_star_tokens},
                                  {"rho", r.rho},
                                  {"bound", r.bound},
                                  {"linearized_bound", r.linearized_bound},
                                  {"eta", r.eta},
                                  {"vacuous", r.vacuous},
                                  {"satisfied", r.satisfied}});
    }
    return j.dump(2) + "\n";
}

VerifyReport verify_trace(const Trace& trace, const ProfileBundle& bundle, double r_min_tps,
                          int r_base_slots, double delta_t_ms, const VerifyParams& params) {
    VerifyReport rep;
    rep.r_g_star_slots = r_g_star(bundle, r_min_tps);

    if (trace.policy != "agentserve") {
        rep.assumptions_met = false;
        rep.assumption_flags.push_back("policy is '" + trace.policy +
                                       "', bounds apply to agentserve runs");
    }
    if (r_base_slots < rep.r_g_star_slots) {
        rep.assumptions_met = false;
        rep.assumption_flags.push_back(
            "r_base (" + std::to_string(r_base_slots) + " slots) < R_g* (" +
            std::to_string(rep.r_g_star_slots) + " slots): feasibility floor not configured");
    }

    std::vector<IntervalSummary> intervals;
    for (const auto& s : trace.intervals()) {
        if (!s.partial) {
            intervals.push_back(s);
        }
    }

    // Measured assumption quantities over complete intervals.
    for (const auto& s : intervals) {
        double overshoot =
            static_cast<double>(s.decode_slots - rep.r_g_star_slots) * bundle.granularity;
        rep.measured_delta_sms = std::max(rep.measured_delta_sms, std::max(0.0, overshoot));
        rep.measured_eps = std::max(rep.measured_eps, s.rebind_overhead_ms / delta_t_ms);
        if (s.decode_slots < rep.r_g_star_slots) {
            rep.assumptions_met = false;
            rep.assumption_flags.push_back("interval " + std::to_string(s.index) +
                                           ": decode binding below R_g* (feasibility floor violated)");
        }
    }

    BoundParams bp;
    bp.delta_sms = params.delta_sms.value_or(rep.measured_delta_sms);
    bp.eps_bar = params.eps_bar.value_or(rep.measured_eps);
    rep.used_delta_sms = bp.delta_sms;
    rep.used_eps_bar = bp.eps_bar;
    if (params.delta_sms && rep.measured_delta_sms > *params.delta_sms + 1e-9) {
        rep.assumptions_met = false;
        rep.assumption_flags.push_back("measured overshoot " +
                                       std::to_string(rep.measured_delta_sms) +
                                       " SMs exceeds the stated delta bound");
    }
    if (params.eps_bar && rep.measured_eps > *params.eps_bar + 1e-12) {
        rep.assumptions_met = false;
        rep.assumption_flags.push_back("measured rebind loss exceeds the stated eps bound");
    }

    bool first = true;
    for (const auto& s : intervals) {
        IntervalReport r;
        r.index = s.index;
        double busy = s.cold_busy_ms + s.resume_busy_ms;
        r.eta = busy > 0.0 ? s.cold_busy_ms / busy : 0.0;
        r.w_a_tokens = s.cold_tokens_pctx + s.resume_tokens_pctx + s.resume_tokens_dctx;
        double w_star =
            offline_optimum(bundle, {r.eta}, rep.r_g_star_slots, delta_t_ms).front();
        r.w_star_tokens = w_star;
        r.vacuous = (w_star <= 0.0) || (s.starved_ms > 1e-9);
        if (!r.vacuous) {
            r.rho = r.w_a_tokens / w_star;
            r.bound = instantaneous_ratio_bound(bundle, r.eta, rep.r_g_star_slots, bp);
            r.linearized_bound = linearized_ratio_bound(bundle, r.eta, rep.r_g_star_slots, bp);
            r.satisfied = r.rho >= r.bound - params.rel_tolerance * std::max(1.0, std::fabs(r.bound));
            rep.checked += 1;
            if (!r.satisfied) {
                rep.violations += 1;
            }
            if (first || r.rho < rep.min_rho) rep.min_rho = r.rho;
            if (first || r.bound < rep.min_bound) rep.min_bound = r.bound;
            first = false;
        } else {
            rep.vacuous += 1;
        }
        rep.intervals.push_back(r);
    }
    return rep;
}

}  // namespace agentsim
