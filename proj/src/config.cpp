#include "config.hpp"

#include <fstream>
#include <sstream>

#include "analysis.hpp"
#include "error.hpp"

namespace agentsim {

using nlohmann::json;

namespace {

TokenDistribution dist_from_json(const json& j, const std::string& where) {
    TokenDistribution d;
    d.min_tokens = j.at("min").get<int>();
    d.max_tokens = j.at("max").get<int>();
    d.mean_tokens = j.contains("mean") ? j.at("mean").get<int>()
                                       : (d.min_tokens + d.max_tokens) / 2;
    d.validate(where);
    return d;
}

json dist_to_json(const TokenDistribution& d) {
    return {{"min", d.min_tokens}, {"max", d.max_tokens}, {"mean", d.mean_tokens}};
}

ToolDelaySpec tool_delay_from_json(const json& j) {
    ToolDelaySpec t;
    std::string kind = j.value("kind", "fixed");
    if (kind == "fixed") {
        t.kind = ToolDelaySpec::Kind::Fixed;
        t.fixed_ms = j.value("ms", 100.0);
    } else if (kind == "uniform") {
        t.kind = ToolDelaySpec::Kind::Uniform;
        t.min_ms = j.at("min_ms").get<double>();
        t.max_ms = j.at("max_ms").get<double>();
    } else {
        throw_validation("workload.tool_delay.kind must be fixed or uniform");
    }
    return t;
}

json tool_delay_to_json(const ToolDelaySpec& t) {
    if (t.kind == ToolDelaySpec::Kind::Fixed) {
        return {{"kind", "fixed"}, {"ms", t.fixed_ms}};
    }
    return {{"kind", "uniform"}, {"min_ms", t.min_ms}, {"max_ms", t.max_ms}};
}

}  // namespace

json RunConfig::to_json() const {
    json doc;
    doc["schema"] = "agentsim-config-v1";
    doc["profile"] = {{"inline", json::parse(profile_to_json(profile))}};

    json w;
    w["paradigm"] = workload.paradigm;
    w["model"] = workload.model;
    w["concurrency"] = workload.concurrency;
    w["stagger_ms"] = workload.stagger_ms;
    if (workload.cold_override) w["cold"] = dist_to_json(*workload.cold_override);
    if (workload.resume_override) w["resume"] = dist_to_json(*workload.resume_override);
    if (workload.decode_override) w["decode"] = dist_to_json(*workload.decode_override);
    if (workload.steps_override) w["steps_per_session"] = *workload.steps_override;
    if (workload.tool_delay_override)
        w["tool_delay"] = tool_delay_to_json(*workload.tool_delay_override);
    doc["workload"] = w;

    doc["controller"] = {{"theta_low_ms", controller.theta_low_ms},
                         {"theta_high_ms", controller.theta_high_ms},
                         {"delta_r_slots", controller.delta_r_slots},
                         {"delta_b_tokens", controller.delta_b_tokens},
                         {"delta_t_ms", controller.delta_t_ms},
                         {"b_min_tokens", controller.b_min_tokens},
                         {"b_max_tokens", controller.b_max_tokens},
                         {"r_base_slots", controller.r_base_slots},
                         {"initial_b_tokens", controller.initial_b_tokens},
                         {"initial_r_slots", controller.initial_r_slots}};

    doc["executor"] = {{"total_slots", executor.total_slots},
                       {"rebind_overhead_ms", executor.rebind_overhead_ms},
                       {"resume_chunk_tokens", executor.resume_chunk_tokens},
                       {"prefill_chunk_tokens", executor.prefill_chunk_tokens}};

    doc["slo"] = {{"tau_ttft_ms", slo.tau_ttft_ms},
                  {"tau_tpot_ms", slo.tau_tpot_ms},
                  {"factor", slo.calibration_factor},
                  {"tpot_stat", tpot_stat_name(slo.tpot_stat)}};

    doc["policy"] = policy_name(policy.kind);
    if (policy.static_decode_slots > 0) {
        doc["static_decode_slots"] = policy.static_decode_slots;
    }
    if (horizon_ms) doc["horizon_ms"] = *horizon_ms;
    doc["seed"] = seed;
    doc["derived"] = {{"r_min_tps", r_min_tps},
                      {"r_g_star_slots", r_g_star_slots},
                      {"mean_cold_tokens", mean_cold_tokens}};
    return doc;
}

RunConfig run_config_from_json(const json& doc) {
    RunConfig cfg;
    try {
        // Profile: inline document, file path, or the shipped default.
        if (doc.contains("profile")) {
            const json& p = doc.at("profile");
            if (p.contains("inline")) {
                cfg.profile = parse_profile_json(p.at("inline").dump());
            } else if (p.contains("path")) {
                cfg.profile = load_profile_file(p.at("path").get<std::string>());
            } else if (p.value("source", "") == "default") {
                cfg.profile = default_profile();
            } else {
                throw_validation("config.profile needs one of: inline, path, source=default");
            }
        } else {
            cfg.profile = default_profile();
        }

        if (doc.contains("workload")) {
            const json& w = doc.at("workload");
            cfg.workload.paradigm = w.value("paradigm", std::string("react"));
            cfg.workload.model = w.value("model", std::string("qwen2.5-7b"));
            cfg.workload.concurrency = w.value("concurrency", 3);
            cfg.workload.stagger_ms = w.value("stagger_ms", 500.0);
            if (w.contains("cold")) cfg.workload.cold_override = dist_from_json(w.at("cold"), "workload.cold");
            if (w.contains("resume"))
                cfg.workload.resume_override = dist_from_json(w.at("resume"), "workload.resume");
            if (w.contains("decode"))
                cfg.workload.decode_override = dist_from_json(w.at("decode"), "workload.decode");
            if (w.contains("steps_per_session"))
                cfg.workload.steps_override = w.at("steps_per_session").get<int>();
            if (w.contains("tool_delay"))
                cfg.workload.tool_delay_override = tool_delay_from_json(w.at("tool_delay"));
        }
        ParadigmSpec spec = cfg.workload.resolve_paradigm();
        cfg.mean_cold_tokens = spec.cold.mean_tokens;

        const json ex = doc.value("executor", json::object());
        cfg.executor.total_slots = ex.value("total_slots", cfg.profile.total_slots());
        cfg.executor.rebind_overhead_ms = ex.value("rebind_overhead_ms", 0.05);
        cfg.executor.resume_chunk_tokens = ex.value("resume_chunk_tokens", 16);
        cfg.executor.prefill_chunk_tokens = ex.value("prefill_chunk_tokens", 256);
        if (cfg.executor.total_slots != cfg.profile.total_slots()) {
            throw_validation("executor.total_slots (" +
                             std::to_string(cfg.executor.total_slots) +
                             ") must match the profile grid (" +
                             std::to_string(cfg.profile.total_slots()) + " slots)");
        }
        if (cfg.executor.rebind_overhead_ms < 0.0) {
            throw_validation("executor.rebind_overhead_ms must be >= 0");
        }
        if (cfg.executor.resume_chunk_tokens < 1 || cfg.executor.prefill_chunk_tokens < 1) {
            throw_validation("executor chunk sizes must be >= 1 token");
        }

        const json sl = doc.value("slo", json::object());
        double factor = sl.value("factor", 8.0);
        SloConfig calibrated = calibrate_slo(cfg.profile, factor, cfg.mean_cold_tokens);
        cfg.slo = calibrated;
        if (sl.contains("tau_ttft_ms")) cfg.slo.tau_ttft_ms = sl.at("tau_ttft_ms").get<double>();
        if (sl.contains("tau_tpot_ms")) cfg.slo.tau_tpot_ms = sl.at("tau_tpot_ms").get<double>();
        if (!(cfg.slo.tau_ttft_ms > 0.0 && cfg.slo.tau_tpot_ms > 0.0)) {
            throw_validation("slo thresholds must be > 0");
        }
        cfg.slo.tpot_stat = parse_tpot_stat(sl.value("tpot_stat", std::string("p95")));

        cfg.r_min_tps = r_min_rate(cfg.slo.tau_tpot_ms);
        cfg.r_g_star_slots = r_g_star(cfg.profile, cfg.r_min_tps);

        const json c = doc.value("controller", json::object());
        cfg.controller.total_slots = cfg.profile.total_slots();
        cfg.controller.delta_t_ms = c.value("delta_t_ms", 250.0);
        cfg.controller.delta_r_slots = c.value("delta_r_slots", 1);
        cfg.controller.delta_b_tokens = c.value("delta_b_tokens", 64);
        cfg.controller.b_min_tokens = c.value("b_min_tokens", 64);
        cfg.controller.b_max_tokens = c.value("b_max_tokens", 1024);
        cfg.controller.initial_b_tokens = c.value("initial_b_tokens", 256);
        cfg.controller.r_base_slots = c.value("r_base_slots", cfg.r_g_star_slots);
        cfg.controller.initial_r_slots = c.value("initial_r_slots", cfg.controller.r_base_slots);
        // Threshold defaults anchor to the decode-SLO target: protect above
        // tau, relax below half of it.
        cfg.controller.theta_high_ms = c.value("theta_high_ms", cfg.slo.tau_tpot_ms);
        cfg.controller.theta_low_ms = c.value("theta_low_ms", cfg.controller.theta_high_ms / 2.0);
        cfg.controller.validate();

        cfg.policy.kind = parse_policy(doc.value("policy", std::string("agentserve")));
        cfg.policy.static_decode_slots = doc.value("static_decode_slots", 0);
        if (cfg.policy.static_decode_slots < 0 ||
            cfg.policy.static_decode_slots >= cfg.profile.total_slots()) {
            throw_validation("static_decode_slots must leave at least one prefill slot");
        }

        if (doc.contains("horizon_ms")) {
            cfg.horizon_ms = doc.at("horizon_ms").get<double>();
            if (*cfg.horizon_ms <= 0.0) {
                throw_validation("horizon_ms must be > 0");
            }
        }
        cfg.seed = doc.value("seed", static_cast<std::uint64_t>(0));
    } catch (const json::exception& e) {
        throw_validation(std::string("config malformed: ") + e.what());
    }
    return cfg;
}

RunConfig parse_run_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw_validation(std::string("config is not valid JSON: ") + e.what());
    }
    return run_config_from_json(doc);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw_io("cannot open config file: " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

}  // namespace agentsim
