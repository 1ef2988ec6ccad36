#pragma once

#include <string>
#include <vector>

namespace agentsim {

enum class Phase { Decode, ColdPrefill, ResumePrefill };

const char* phase_name(Phase p);

struct ProfilePoint {
    int sm_count = 0;
    double tokens_per_second = 0.0;
};

// Throughput-vs-SM-share curve for one execution phase, defined only on the
// slot grid {g, 2g, ..., S}. No interpolation: the execution layer binds
// whole slots, so off-grid queries are rejected.
struct PhaseProfile {
    Phase phase = Phase::Decode;
    std::vector<ProfilePoint> points;  // one per grid level, ascending sm_count
    int total_sms = 0;

    // Rate at an on-grid allocation; sms == 0 returns 0 (no capacity).
    double lookup(int sms, int granularity) const;
};

struct ProfileBundle {
    PhaseProfile decode;
    PhaseProfile cold;
    PhaseProfile resume;
    int granularity = 0;  // SMs per slot step
    int total_sms = 0;

    int total_slots() const { return total_sms / granularity; }
    int slots_to_sms(int slots) const { return slots * granularity; }

    double decode_rate(int sms) const { return decode.lookup(sms, granularity); }
    double cold_rate(int sms) const { return cold.lookup(sms, granularity); }
    double resume_rate(int sms) const { return resume.lookup(sms, granularity); }

    // Eq.-style mixed prefill throughput: eta*mu_C(sms) + (1-eta)*mu_R(sms).
    double mixed_prefill_rate(double eta, int sms) const;

    // Max adjacent-pair slope of the mixed curve over grid window [lo, hi],
    // in tokens/s per SM. lo == hi yields 0 (single point, flat).
    double lipschitz_estimate(double eta, int lo, int hi) const;

    // Largest grid allocation <= sms (0 if sms < granularity).
    int grid_floor(double sms) const;

    void validate() const;
};

// Parse / serialize the profile document (JSON). Validation failures carry
// the offending phase and grid point in the message.
ProfileBundle parse_profile_json(const std::string& text);
ProfileBundle load_profile_file(const std::string& path);
std::string profile_to_json(const ProfileBundle& bundle);

// Shape parameters for synthetic bundles: piecewise-linear rise to a knee
// (fraction of total SMs), flat at max_rate beyond it.
struct ProfileShape {
    int total_sms = 120;
    int granularity = 12;
    double decode_max_rate = 100.0;
    double decode_knee = 0.2;
    double cold_max_rate = 1500.0;
    double cold_knee = 0.8;
    double resume_max_rate = 800.0;
    double resume_knee = 0.4;
};

// Generated bundle for the given shape. Knees must lie in (0, 1].
ProfileBundle generate_profile(const ProfileShape& shape);

// The bundle shipped as the repo default: decode saturates early, cold
// prefill late, resume in between.
ProfileBundle default_profile();

}  // namespace agentsim
