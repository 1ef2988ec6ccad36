#pragma once

#include <vector>

#include "profile.hpp"
#include "rng.hpp"

namespace agentsim::testutil {

// Bundle over a given grid with explicit per-slot rates.
inline ProfileBundle make_bundle(int granularity, const std::vector<double>& decode,
                                 const std::vector<double>& cold,
                                 const std::vector<double>& resume) {
    ProfileBundle b;
    b.granularity = granularity;
    b.total_sms = granularity * static_cast<int>(decode.size());
    auto phase = [&](Phase ph, const std::vector<double>& rates) {
        PhaseProfile p;
        p.phase = ph;
        p.total_sms = b.total_sms;
        for (std::size_t i = 0; i < rates.size(); ++i) {
            p.points.push_back({static_cast<int>(i + 1) * granularity, rates[i]});
        }
        return p;
    };
    b.decode = phase(Phase::Decode, decode);
    b.cold = phase(Phase::ColdPrefill, cold);
    b.resume = phase(Phase::ResumePrefill, resume);
    b.validate();
    return b;
}

inline std::vector<double> random_monotone_rates(Rng& rng, int levels, double base,
                                                 double max_step) {
    std::vector<double> rates;
    double r = base + rng.uniform(0.0, max_step);
    for (int i = 0; i < levels; ++i) {
        rates.push_back(r);
        // Flat stretches included: ties and zero slopes are part of the domain.
        if (rng.next_double() < 0.3) {
            r += 0.0;
        } else {
            r += rng.uniform(0.0, max_step);
        }
    }
    return rates;
}

inline ProfileBundle random_bundle(Rng& rng, int max_levels = 16) {
    int levels = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_levels - 1)));
    int g = 1 + static_cast<int>(rng.uniform_int(16));
    return make_bundle(g, random_monotone_rates(rng, levels, 5.0, 40.0),
                       random_monotone_rates(rng, levels, 50.0, 300.0),
                       random_monotone_rates(rng, levels, 30.0, 200.0));
}

}  // namespace agentsim::testutil
