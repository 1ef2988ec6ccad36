#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "profile.hpp"

namespace agentsim {

struct RebindEvent {
    double time_ms = 0.0;
    int from_level = 0;
    int to_level = 0;
    double overhead_ms = 0.0;
};

// The fixed menu of pre-established decode reservations: levels 1..total
// slots, decode and prefill bindings always complementary.
class SlotSet {
public:
    SlotSet(int total_slots, double rebind_overhead_ms);

    int total_slots() const { return total_slots_; }
    int decode_binding() const { return decode_binding_; }
    int prefill_binding() const { return total_slots_ - decode_binding_; }
    double rebind_overhead_ms() const { return rebind_overhead_ms_; }

    // Smallest bindable level >= target (nearest slot above). The target may
    // be fractional when derived from a percentage.
    int select_slot(double target_slots) const;

    // Switches the decode binding to the given level. Same level: no-op with
    // zero overhead. Otherwise returns the rebind record with the configured
    // per-switch overhead.
    std::optional<RebindEvent> rebind(int new_decode_level, double now_ms);

private:
    int total_slots_;
    int decode_binding_;
    double rebind_overhead_ms_;
};

// Session prefix registry enforcing the read-only handoff: decode steps may
// only touch sealed entries, prefixes never shrink, and a prefill seals its
// region exactly at completion.
class KvCacheRegistry {
public:
    struct Entry {
        int prefix_tokens = 0;
        bool sealed = false;
    };

    bool sealed(std::uint32_t session_id) const;
    int prefix(std::uint32_t session_id) const;

    // Marks the session's region as being written (resume prefill in flight).
    void begin_write(std::uint32_t session_id);

    // Prefill completion: prefix grows to new_prefix and the region seals.
    void commit(std::uint32_t session_id, int new_prefix);

    // Decode emission grows the cached prefix without unsealing.
    void append_decode_tokens(std::uint32_t session_id, int tokens);

    // Protocol check used by the decode executor before a step.
    void require_sealed(std::uint32_t session_id) const;

private:
    std::map<std::uint32_t, Entry> entries_;
};

// Duration of one decode step: every active stream emits one token at the
// aggregate decode rate, then the admitted resume chunk (if any) runs at the
// resume rate of the same binding, serialized after the decode tokens.
double decode_step_duration_ms(const ProfileBundle& bundle, int decode_sms, int batch_size,
                               int chunk_tokens);

}  // namespace agentsim
