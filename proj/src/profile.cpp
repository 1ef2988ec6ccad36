#include "profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "json.hpp"

namespace agentsim {

using nlohmann::json;

const char* phase_name(Phase p) {
    switch (p) {
    case Phase::Decode: return "decode";
    case Phase::ColdPrefill: return "cold_prefill";
    case Phase::ResumePrefill: return "resume_prefill";
    }
    return "?";
}

double PhaseProfile::lookup(int sms, int granularity) const {
    if (sms == 0) {
        return 0.0;
    }
    if (sms < granularity || sms > total_sms) {
        throw_invalid(std::string(phase_name(phase)) + ": allocation " +
                      std::to_string(sms) + " SMs outside grid [" +
                      std::to_string(granularity) + ", " + std::to_string(total_sms) + "]");
    }
    if (sms % granularity != 0) {
        throw_invalid(std::string(phase_name(phase)) + ": allocation " +
                      std::to_string(sms) + " SMs is not a multiple of the slot step " +
                      std::to_string(granularity));
    }
    return points[static_cast<std::size_t>(sms / granularity - 1)].tokens_per_second;
}

double ProfileBundle::mixed_prefill_rate(double eta, int sms) const {
    if (!(eta >= 0.0 && eta <= 1.0)) {
        throw_invalid("eta must lie in [0, 1], got " + std::to_string(eta));
    }
    if (sms == 0) {
        return 0.0;
    }
    return eta * cold.lookup(sms, granularity) + (1.0 - eta) * resume.lookup(sms, granularity);
}

double ProfileBundle::lipschitz_estimate(double eta, int lo, int hi) const {
    if (lo > hi) {
        throw_invalid("lipschitz_estimate: empty window [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
    }
    // Touch both endpoints so off-grid windows are rejected up front.
    mixed_prefill_rate(eta, lo);
    mixed_prefill_rate(eta, hi);
    double max_slope = 0.0;
    for (int x = std::max(lo, granularity); x + granularity <= hi; x += granularity) {
        double d = std::fabs(mixed_prefill_rate(eta, x + granularity) - mixed_prefill_rate(eta, x));
        max_slope = std::max(max_slope, d / granularity);
    }
    // lo == 0 contributes the first segment [0, g] with mu_P(0) == 0.
    if (lo == 0 && hi >= granularity) {
        max_slope = std::max(max_slope, mixed_prefill_rate(eta, granularity) / granularity);
    }
    return max_slope;
}

int ProfileBundle::grid_floor(double sms) const {
    if (sms < granularity) {
        return 0;
    }
    int level = static_cast<int>(std::floor(sms / granularity + 1e-12));
    return std::min(level, total_slots()) * granularity;
}

namespace {

void validate_phase(const PhaseProfile& p, int granularity, int total_sms) {
    const std::string name = phase_name(p.phase);
    if (p.total_sms != total_sms) {
        throw_validation(name + ": total_sms " + std::to_string(p.total_sms) +
                         " differs from bundle total_sms " + std::to_string(total_sms));
    }
    std::size_t expected = static_cast<std::size_t>(total_sms / granularity);
    if (p.points.size() != expected) {
        throw_validation(name + ": expected " + std::to_string(expected) +
                         " grid points, got " + std::to_string(p.points.size()) +
                         " (phases must share the grid {g, 2g, ..., S})");
    }
    for (std::size_t i = 0; i < p.points.size(); ++i) {
        int expected_sms = static_cast<int>(i + 1) * granularity;
        if (p.points[i].sm_count != expected_sms) {
            throw_validation(name + ": grid point " + std::to_string(i) + " has sm_count " +
                             std::to_string(p.points[i].sm_count) + ", expected " +
                             std::to_string(expected_sms));
        }
        if (!(p.points[i].tokens_per_second > 0.0)) {
            throw_validation(name + ": rate at sm_count " + std::to_string(expected_sms) +
                             " must be > 0");
        }
        if (i > 0 && p.points[i].tokens_per_second < p.points[i - 1].tokens_per_second) {
            throw_validation(name + ": rate decreases at sm_count " +
                             std::to_string(expected_sms) + " (" +
                             std::to_string(p.points[i].tokens_per_second) + " < " +
                             std::to_string(p.points[i - 1].tokens_per_second) +
                             "); rates must be non-decreasing in SMs");
        }
    }
}

}  // namespace

void ProfileBundle::validate() const {
    if (granularity <= 0) {
        throw_validation("granularity must be a positive SM count");
    }
    if (total_sms <= 0 || total_sms % granularity != 0) {
        throw_validation("total_sms (" + std::to_string(total_sms) +
                         ") must be a positive multiple of granularity (" +
                         std::to_string(granularity) + ")");
    }
    validate_phase(decode, granularity, total_sms);
    validate_phase(cold, granularity, total_sms);
    validate_phase(resume, granularity, total_sms);
}

namespace {

PhaseProfile phase_from_json(const json& arr, Phase phase, int total_sms,
                             const std::string& key) {
    if (!arr.is_array()) {
        throw_validation("profile." + key + " must be an array of {sms, tokens_per_second}");
    }
    PhaseProfile p;
    p.phase = phase;
    p.total_sms = total_sms;
    for (const auto& item : arr) {
        if (!item.contains("sms") || !item.contains("tokens_per_second")) {
            throw_validation("profile." + key +
                             ": each point needs fields sms and tokens_per_second");
        }
        p.points.push_back({item.at("sms").get<int>(),
                            item.at("tokens_per_second").get<double>()});
    }
    return p;
}

json phase_to_json(const PhaseProfile& p) {
    json arr = json::array();
    for (const auto& pt : p.points) {
        arr.push_back({{"sms", pt.sm_count}, {"tokens_per_second", pt.tokens_per_second}});
    }
    return arr;
}

}  // namespace

ProfileBundle parse_profile_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw_validation(std::string("profile document is not valid JSON: ") + e.what());
    }
    try {
        ProfileBundle b;
        b.total_sms = doc.at("total_sms").get<int>();
        b.granularity = doc.at("granularity").get<int>();
        b.decode = phase_from_json(doc.at("decode"), Phase::Decode, b.total_sms, "decode");
        b.cold = phase_from_json(doc.at("cold_prefill"), Phase::ColdPrefill, b.total_sms,
                                 "cold_prefill");
        b.resume = phase_from_json(doc.at("resume_prefill"), Phase::ResumePrefill, b.total_sms,
                                   "resume_prefill");
        b.validate();
        return b;
    } catch (const json::exception& e) {
        throw_validation(std::string("profile document malformed: ") + e.what());
    }
}

ProfileBundle load_profile_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw_io("cannot open profile file: " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_profile_json(ss.str());
}

std::string profile_to_json(const ProfileBundle& bundle) {
    json doc;
    doc["schema"] = "agentsim-profile-v1";
    doc["total_sms"] = bundle.total_sms;
    doc["granularity"] = bundle.granularity;
    doc["decode"] = phase_to_json(bundle.decode);
    doc["cold_prefill"] = phase_to_json(bundle.cold);
    doc["resume_prefill"] = phase_to_json(bundle.resume);
    return doc.dump(2) + "\n";
}

namespace {

PhaseProfile knee_curve(Phase phase, int total_sms, int granularity, double max_rate,
                        double knee) {
    PhaseProfile p;
    p.phase = phase;
    p.total_sms = total_sms;
    int slots = total_sms / granularity;
    for (int s = 1; s <= slots; ++s) {
        double share = static_cast<double>(s) / slots;
        double norm = std::min(share / knee, 1.0);
        // Round to keep the shipped document short; monotone either way.
        double rate = std::round(max_rate * norm * 1000.0) / 1000.0;
        p.points.push_back({s * granularity, rate});
    }
    return p;
}

}  // namespace

ProfileBundle generate_profile(const ProfileShape& shape) {
    if (shape.total_sms <= 0 || shape.granularity <= 0 ||
        shape.total_sms % shape.granularity != 0) {
        throw_validation("profile shape: total_sms must be a positive multiple of granularity");
    }
    for (double knee : {shape.decode_knee, shape.cold_knee, shape.resume_knee}) {
        if (!(knee > 0.0 && knee <= 1.0)) {
            throw_validation("profile shape: knees must lie in (0, 1]");
        }
    }
    if (!(shape.decode_max_rate > 0.0 && shape.cold_max_rate > 0.0 &&
          shape.resume_max_rate > 0.0)) {
        throw_validation("profile shape: max rates must be > 0");
    }
    ProfileBundle b;
    b.total_sms = shape.total_sms;
    b.granularity = shape.granularity;
    b.decode = knee_curve(Phase::Decode, shape.total_sms, shape.granularity,
                          shape.decode_max_rate, shape.decode_knee);
    b.cold = knee_curve(Phase::ColdPrefill, shape.total_sms, shape.granularity,
                        shape.cold_max_rate, shape.cold_knee);
    b.resume = knee_curve(Phase::ResumePrefill, shape.total_sms, shape.granularity,
                          shape.resume_max_rate, shape.resume_knee);
    b.validate();
    return b;
}

ProfileBundle default_profile() {
    return generate_profile(ProfileShape{});
}

}  // namespace agentsim
