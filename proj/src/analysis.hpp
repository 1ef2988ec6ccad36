#pragma once

#include <optional>
#include <string>
#include <vector>

#include "profile.hpp"
#include "trace.hpp"

namespace agentsim {

// Minimum decode rate implied by the TPOT threshold (ms/token -> tokens/s).
double r_min_rate(double tau_tpot_ms);

// Smallest grid allocation (in slots) whose decode rate meets r_min. Errors
// when even the full device cannot (SLO infeasible).
int r_g_star(const ProfileBundle& bundle, double r_min_tps);

// Per-interval offline optimum upper bound: prefill capacity of the
// constant allocation that reserves exactly r_g_star slots for decode.
std::vector<double> offline_optimum(const ProfileBundle& bundle,
                                    const std::vector<double>& eta_series,
                                    int r_g_star_slots, double dt_ms);

// Independent oracle: per interval, enumerate every decode-feasible grid
// allocation and take the best prefill service. Valid per-interval because
// the offline objective is separable across intervals.
std::vector<double> brute_force_offline(const ProfileBundle& bundle,
                                        const std::vector<double>& eta_series, double r_min_tps,
                                        double dt_ms);

// Feasible decode allocations (slots) for one instance; the smallest one is
// r_g_star, which the feasibility-floor checks assert directly.
std::vector<int> feasible_decode_allocations(const ProfileBundle& bundle, double r_min_tps);

struct BoundParams {
    double delta_sms = 0.0;  // reservation overshoot bound, in SMs
    double eps_bar = 0.0;    // relative service-loss bound, in [0, 1)
};

// Instantaneous competitive-ratio lower bound:
//   (1 - eps_bar) * mu_P(S - R*g - delta, eta) / mu_P(S - R*g, eta),
// with the reduced allocation rounded down to the grid (weakening only).
double instantaneous_ratio_bound(const ProfileBundle& bundle, double eta, int r_g_star_slots,
                      const BoundParams& params);

// Linearized relaxation via the Lipschitz estimate over the same window:
//   (1 - eps_bar) * (1 - L_P * delta_eff / mu_P(S - R*g, eta)),
// where delta_eff is delta rounded up to the grid so the two bounds stay
// ordered.
double linearized_ratio_bound(const ProfileBundle& bundle, double eta, int r_g_star_slots,
                        const BoundParams& params);

struct IntervalReport {
    int index = 0;
    double w_a_tokens = 0.0;
    double w_star_tokens = 0.0;
    double rho = 0.0;
    double bound = 0.0;
    double linearized_bound = 0.0;
    double eta = 0.0;
    bool vacuous = false;
    bool satisfied = true;
};

struct VerifyParams {
    std::optional<double> delta_sms;  // default: measured max overshoot
    std::optional<double> eps_bar;    // default: measured max rebind loss
    double rel_tolerance = 1e-9;
};

struct VerifyReport {
    std::vector<IntervalReport> intervals;
    int checked = 0;
    int vacuous = 0;
    int violations = 0;
    double min_rho = 0.0;
    double min_bound = 0.0;
    double measured_delta_sms = 0.0;
    double measured_eps = 0.0;
    double used_delta_sms = 0.0;
    double used_eps_bar = 0.0;
    int r_g_star_slots = 0;
    bool assumptions_met = true;
    std::vector<std::string> assumption_flags;

    std::string to_json() const;
};

// Recomputes W_A, W*, rho and the analytic ratio bound for every complete
// interval of an AgentServe trace. Intervals with no sustained prefill
// backlog (or zero offline capacity) are vacuous and excluded from the
// violation count. Assumption failures set flags instead of throwing.
VerifyReport verify_trace(const Trace& trace, const ProfileBundle& bundle, double r_min_tps,
                          int r_base_slots, double delta_t_ms, const VerifyParams& params);

}  // namespace agentsim
