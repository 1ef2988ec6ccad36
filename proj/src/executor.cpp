#include "executor.hpp"

#include <cmath>

#include "error.hpp"

namespace agentsim {

SlotSet::SlotSet(int total_slots, double rebind_overhead_ms)
    : total_slots_(total_slots),
      decode_binding_(1),
      rebind_overhead_ms_(rebind_overhead_ms) {
    if (total_slots_ < 2) {
        throw_validation("slot set needs at least 2 levels");
    }
    if (rebind_overhead_ms_ < 0.0) {
        throw_validation("rebind overhead must be >= 0");
    }
}

int SlotSet::select_slot(double target_slots) const {
    if (target_slots > static_cast<double>(total_slots_)) {
        throw_infeasible("reservation target " + std::to_string(target_slots) +
                         " slots exceeds the device (" + std::to_string(total_slots_) +
                         " slots)");
    }
    int level = static_cast<int>(std::ceil(target_slots - 1e-12));
    return std::max(level, 1);
}

std::optional<RebindEvent> SlotSet::rebind(int new_decode_level, double now_ms) {
    if (new_decode_level < 1 || new_decode_level > total_slots_) {
        throw_invalid("rebind level " + std::to_string(new_decode_level) + " not in menu");
    }
    if (new_decode_level == decode_binding_) {
        return std::nullopt;
    }
    RebindEvent ev{now_ms, decode_binding_, new_decode_level, rebind_overhead_ms_};
    decode_binding_ = new_decode_level;
    return ev;
}

bool KvCacheRegistry::sealed(std::uint32_t session_id) const {
    auto it = entries_.find(session_id);
    return it != entries_.end() && it->second.sealed;
}

int KvCacheRegistry::prefix(std::uint32_t session_id) const {
    auto it = entries_.find(session_id);
    return it == entries_.end() ? 0 : it->second.prefix_tokens;
}

void KvCacheRegistry::begin_write(std::uint32_t session_id) {
    entries_[session_id].sealed = false;
}

void KvCacheRegistry::commit(std::uint32_t session_id, int new_prefix) {
    Entry& e = entries_[session_id];
    if (new_prefix < e.prefix_tokens) {
        throw_protocol("kv commit shrinks session " + std::to_string(session_id) +
                       " prefix from " + std::to_string(e.prefix_tokens) + " to " +
                       std::to_string(new_prefix));
    }
    e.prefix_tokens = new_prefix;
    e.sealed = true;
}

void KvCacheRegistry::append_decode_tokens(std::uint32_t session_id, int tokens) {
    Entry& e = entries_[session_id];
    if (!e.sealed) {
        throw_protocol("decode append on unsealed KV entry for session " +
                       std::to_string(session_id));
    }
    e.prefix_tokens += tokens;
}

void KvCacheRegistry::require_sealed(std::uint32_t session_id) const {
    if (!sealed(session_id)) {
        throw_protocol("decode step on unsealed KV entry for session " +
                       std::to_string(session_id));
    }
}

double decode_step_duration_ms(const ProfileBundle& bundle, int decode_sms, int batch_size,
                               int chunk_tokens) {
    if (batch_size < 0 || chunk_tokens < 0 || (batch_size == 0 && chunk_tokens == 0)) {
        throw_invalid("decode step needs at least one stream or an admitted chunk");
    }
    double ms = 0.0;
    if (batch_size > 0) {
        ms += 1000.0 * batch_size / bundle.decode_rate(decode_sms);
    }
    if (chunk_tokens > 0) {
        ms += 1000.0 * chunk_tokens / bundle.resume_rate(decode_sms);
    }
    return ms;
}

}  // namespace agentsim
