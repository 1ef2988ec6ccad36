#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "error.hpp"
#include "executor.hpp"
#include "helpers.hpp"
#include "rng.hpp"

using namespace agentsim;
using testutil::make_bundle;

TEST_CASE("nearest slot above: the 37% worked example") {
    SlotSet slots(10, 0.05);
    // 37% of a 10-level menu -> the 40% context.
    CHECK(slots.select_slot(3.7) == 4);
    CHECK(slots.select_slot(5.0) == 5);  // exact hit, no over-allocation
    CHECK(slots.select_slot(0.2) == 1);
    CHECK_THROWS_AS(slots.select_slot(10.1), SimError);
}

TEST_CASE("nearest-above selection over-reserves by less than one level") {
    SlotSet slots(10, 0.05);
    Rng rng = Rng::substream(23, "slots/over");
    for (int i = 0; i < 2000; ++i) {
        double target = rng.uniform(0.0, 10.0);
        int level = slots.select_slot(target);
        CHECK(level >= target - 1e-9);
        CHECK(level - target < 1.0 + 1e-9);
    }
}

TEST_CASE("rebinding between pre-created levels") {
    SlotSet slots(10, 0.05);
    slots.rebind(4, 0.0);
    CHECK(slots.decode_binding() == 4);
    CHECK(slots.prefill_binding() == 6);

    auto noop = slots.rebind(4, 500.0);
    CHECK(!noop.has_value());  // same level: no overhead

    auto ev = slots.rebind(5, 1000.0);
    REQUIRE(ev.has_value());
    CHECK(ev->time_ms == 1000.0);
    CHECK(ev->from_level == 4);
    CHECK(ev->to_level == 5);
    CHECK(ev->overhead_ms == doctest::Approx(0.05));
    CHECK(slots.decode_binding() + slots.prefill_binding() == 10);

    CHECK_THROWS_AS(slots.rebind(11, 0.0), SimError);
    CHECK_THROWS_AS(slots.rebind(0, 0.0), SimError);
}

TEST_CASE("kv registry enforces the read-only handoff") {
    KvCacheRegistry kv;
    CHECK(!kv.sealed(0));
    CHECK_THROWS_AS(kv.require_sealed(0), SimError);

    kv.commit(0, 3000);
    CHECK(kv.sealed(0));
    CHECK(kv.prefix(0) == 3000);
    CHECK_NOTHROW(kv.require_sealed(0));

    kv.append_decode_tokens(0, 40);
    CHECK(kv.prefix(0) == 3040);
    CHECK(kv.sealed(0));

    kv.begin_write(0);
    CHECK(!kv.sealed(0));
    CHECK_THROWS_AS(kv.require_sealed(0), SimError);
    kv.commit(0, 3096);  // resume of 56 on 3040
    CHECK(kv.prefix(0) == 3096);
    CHECK(kv.sealed(0));

    CHECK_THROWS_AS(kv.commit(0, 2999), SimError);  // shrink is a protocol error
}

TEST_CASE("decode step duration: reciprocal aggregate rate plus serialized chunk") {
    // mu_D(full) = 50 -> single stream step is 20 ms.
    ProfileBundle b1 = make_bundle(32, {25, 50}, {100, 200}, {100, 200});
    CHECK(decode_step_duration_ms(b1, 64, 1, 0) == doctest::Approx(20.0));

    // mu_D = 80 with 4 streams -> 50 ms per round.
    ProfileBundle b2 = make_bundle(32, {40, 80}, {100, 200}, {100, 200});
    CHECK(decode_step_duration_ms(b2, 64, 4, 0) == doctest::Approx(50.0));

    // Admitted chunk runs after the decode tokens at the resume rate.
    CHECK(decode_step_duration_ms(b2, 64, 4, 64) == doctest::Approx(50.0 + 1000.0 * 64 / 200.0));
    // Chunk-only unit with no active streams.
    CHECK(decode_step_duration_ms(b2, 64, 0, 64) == doctest::Approx(1000.0 * 64 / 200.0));

    CHECK_THROWS_AS(decode_step_duration_ms(b2, 64, 0, 0), SimError);
}
