#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "helpers.hpp"
#include "profile.hpp"
#include "rng.hpp"

using namespace agentsim;
using testutil::make_bundle;
using testutil::random_bundle;

namespace {

ProfileBundle four_level_bundle() {
    // decode grid {32: 30, 64: 55, 96: 70, 128: 78}
    return make_bundle(32, {30, 55, 70, 78}, {200, 380, 520, 600}, {100, 190, 260, 300});
}

}  // namespace

TEST_CASE("lookup reads the recorded grid point") {
    ProfileBundle b = four_level_bundle();
    CHECK(b.decode_rate(64) == 55.0);
    CHECK(b.decode_rate(128) == 78.0);
    CHECK(b.decode_rate(32) == 30.0);
    CHECK_THROWS_AS(b.decode_rate(48), SimError);   // off grid
    CHECK_THROWS_AS(b.decode_rate(160), SimError);  // out of range
    CHECK_THROWS_AS(b.decode_rate(16), SimError);
    CHECK(b.decode_rate(0) == 0.0);  // zero allocation carries no capacity
}

TEST_CASE("mixed prefill rate is the eta-weighted combination") {
    ProfileBundle b = four_level_bundle();
    CHECK(b.mixed_prefill_rate(1.0, 64) == b.cold_rate(64));
    CHECK(b.mixed_prefill_rate(0.0, 64) == b.resume_rate(64));
    // mu_C = 40, mu_R = 80 at some allocation -> eta 0.5 gives 60
    ProfileBundle c = make_bundle(32, {10, 20}, {20, 40}, {40, 80});
    CHECK(c.mixed_prefill_rate(0.5, 64) == doctest::Approx(60.0));
    CHECK_THROWS_AS(b.mixed_prefill_rate(-0.1, 64), SimError);
    CHECK_THROWS_AS(b.mixed_prefill_rate(1.1, 64), SimError);
}

TEST_CASE("mixed rate stays between the two phase rates") {
    Rng rng = Rng::substream(7, "profile/eq1");
    for (int i = 0; i < 200; ++i) {
        ProfileBundle b = random_bundle(rng);
        double eta = rng.next_double();
        int slots = 1 + static_cast<int>(rng.uniform_int(b.total_slots()));
        int sms = b.slots_to_sms(slots);
        double mixed = b.mixed_prefill_rate(eta, sms);
        double lo = std::min(b.cold_rate(sms), b.resume_rate(sms));
        double hi = std::max(b.cold_rate(sms), b.resume_rate(sms));
        CHECK(mixed >= lo - 1e-12);
        CHECK(mixed <= hi + 1e-12);
    }
}

TEST_CASE("lipschitz estimate: fixtures") {
    // Flat mixed curve has zero slope.
    ProfileBundle flat = make_bundle(32, {10, 10}, {50, 50}, {70, 70});
    CHECK(flat.lipschitz_estimate(0.3, 32, 64) == 0.0);

    // Single segment {40, 55} over one 32-SM step.
    ProfileBundle one = make_bundle(32, {1, 2}, {40, 55}, {40, 55});
    CHECK(one.lipschitz_estimate(1.0, 32, 64) == doctest::Approx(15.0 / 32.0));

    CHECK_THROWS_AS(one.lipschitz_estimate(1.0, 64, 32), SimError);  // empty window
}

TEST_CASE("lipschitz estimate matches a brute-force pairwise scan") {
    Rng rng = Rng::substream(11, "profile/lipschitz");
    for (int i = 0; i < 200; ++i) {
        ProfileBundle b = random_bundle(rng);
        double eta = rng.next_double();
        int g = b.granularity;
        int lo_slots = 1 + static_cast<int>(rng.uniform_int(b.total_slots()));
        int hi_slots = 1 + static_cast<int>(rng.uniform_int(b.total_slots()));
        if (lo_slots > hi_slots) std::swap(lo_slots, hi_slots);
        int lo = lo_slots * g, hi = hi_slots * g;
        double est = b.lipschitz_estimate(eta, lo, hi);
        // Oracle: exhaustive slope over every pair of grid points in window.
        double worst = 0.0;
        for (int x = lo; x <= hi; x += g) {
            for (int y = lo; y < x; y += g) {
                worst = std::max(worst, std::fabs(b.mixed_prefill_rate(eta, x) -
                                                  b.mixed_prefill_rate(eta, y)) /
                                            (x - y));
            }
        }
        CHECK(est == doctest::Approx(worst).epsilon(1e-12));
        // Validity over the window: pairwise differences bounded by est.
        for (int x = lo; x <= hi; x += g) {
            for (int y = lo; y <= hi; y += g) {
                CHECK(std::fabs(b.mixed_prefill_rate(eta, x) - b.mixed_prefill_rate(eta, y)) <=
                      est * std::fabs(static_cast<double>(x - y)) + 1e-9);
            }
        }
    }
}

TEST_CASE("document parsing accepts monotone profiles and round-trips") {
    ProfileBundle b = four_level_bundle();
    ProfileBundle back = parse_profile_json(profile_to_json(b));
    CHECK(back.total_sms == b.total_sms);
    CHECK(back.granularity == b.granularity);
    for (int s = 1; s <= 4; ++s) {
        CHECK(back.decode_rate(32 * s) == b.decode_rate(32 * s));
        CHECK(back.cold_rate(32 * s) == b.cold_rate(32 * s));
        CHECK(back.resume_rate(32 * s) == b.resume_rate(32 * s));
    }
}

TEST_CASE("document parsing rejects a rate decrease and names the grid point") {
    std::string doc = R"({
        "total_sms": 128, "granularity": 32,
        "decode": [{"sms":32,"tokens_per_second":30},{"sms":64,"tokens_per_second":55},
                   {"sms":96,"tokens_per_second":50},{"sms":128,"tokens_per_second":78}],
        "cold_prefill": [{"sms":32,"tokens_per_second":30},{"sms":64,"tokens_per_second":55},
                   {"sms":96,"tokens_per_second":60},{"sms":128,"tokens_per_second":78}],
        "resume_prefill": [{"sms":32,"tokens_per_second":30},{"sms":64,"tokens_per_second":55},
                   {"sms":96,"tokens_per_second":60},{"sms":128,"tokens_per_second":78}]
    })";
    try {
        parse_profile_json(doc);
        FAIL("expected rejection");
    } catch (const SimError& e) {
        CHECK(e.kind() == ErrorKind::Validation);
        CHECK(std::string(e.what()).find("96") != std::string::npos);
        CHECK(std::string(e.what()).find("decode") != std::string::npos);
    }
}

TEST_CASE("document parsing rejects mismatched grids across phases") {
    std::string doc = R"({
        "total_sms": 64, "granularity": 32,
        "decode": [{"sms":32,"tokens_per_second":30},{"sms":64,"tokens_per_second":55}],
        "cold_prefill": [{"sms":64,"tokens_per_second":55}],
        "resume_prefill": [{"sms":32,"tokens_per_second":30},{"sms":64,"tokens_per_second":55}]
    })";
    CHECK_THROWS_AS(parse_profile_json(doc), SimError);
}

TEST_CASE("monotonicity is checked exhaustively at load") {
    Rng rng = Rng::substream(13, "profile/mono");
    for (int i = 0; i < 100; ++i) {
        ProfileBundle b = random_bundle(rng);
        for (int s = 2; s <= b.total_slots(); ++s) {
            CHECK(b.decode_rate(b.slots_to_sms(s)) >= b.decode_rate(b.slots_to_sms(s - 1)));
            CHECK(b.cold_rate(b.slots_to_sms(s)) >= b.cold_rate(b.slots_to_sms(s - 1)));
            CHECK(b.resume_rate(b.slots_to_sms(s)) >= b.resume_rate(b.slots_to_sms(s - 1)));
        }
    }
}

TEST_CASE("default bundle shows the measured saturation ordering") {
    ProfileBundle b = default_profile();
    int half = b.total_sms / 2;
    double decode_frac = b.decode_rate(half) / b.decode_rate(b.total_sms);
    double cold_frac = b.cold_rate(half) / b.cold_rate(b.total_sms);
    CHECK(decode_frac >= 0.9);  // decode saturates early
    CHECK(cold_frac < 0.7);     // cold prefill saturates late
    double resume_frac = b.resume_rate(half) / b.resume_rate(b.total_sms);
    CHECK(resume_frac >= cold_frac);
    // And it passes its own document validation round trip.
    CHECK_NOTHROW(parse_profile_json(profile_to_json(b)));
}

TEST_CASE("generated profiles reject bad shapes") {
    ProfileShape shape;
    shape.decode_knee = 0.0;
    CHECK_THROWS_AS(generate_profile(shape), SimError);
    shape = ProfileShape{};
    shape.total_sms = 100;
    shape.granularity = 12;  // not divisible
    CHECK_THROWS_AS(generate_profile(shape), SimError);
}

TEST_CASE("grid floor rounds down onto the grid") {
    ProfileBundle b = four_level_bundle();  // g = 32, S = 128
    CHECK(b.grid_floor(128.0) == 128);
    CHECK(b.grid_floor(127.0) == 96);
    CHECK(b.grid_floor(95.9) == 64);
    CHECK(b.grid_floor(31.9) == 0);
    CHECK(b.grid_floor(0.0) == 0);
}
