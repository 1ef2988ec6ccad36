#include "agentsim.h"

#include <cstring>
#include <string>

#include "analysis.hpp"
#include "config.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "profile.hpp"

using namespace agentsim;

struct agsv_config {
    RunConfig cfg;
};

struct agsv_trace {
    Trace trace;
};

struct agsv_report {
    VerifyReport report;
};

namespace {

thread_local std::string g_last_error;

agsv_status status_from(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return AGSV_ERR_INVALID_ARGUMENT;
    case ErrorKind::Validation: return AGSV_ERR_VALIDATION;
    case ErrorKind::Protocol: return AGSV_ERR_PROTOCOL;
    case ErrorKind::Io: return AGSV_ERR_IO;
    case ErrorKind::NoData: return AGSV_ERR_NO_DATA;
    case ErrorKind::Infeasible: return AGSV_ERR_INFEASIBLE;
    }
    return AGSV_ERR_INVALID_ARGUMENT;
}

template <typename Fn>
agsv_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const SimError& e) {
        g_last_error = e.what();
        return status_from(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return AGSV_ERR_INVALID_ARGUMENT;
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

agsv_status require(bool cond, const char* what) {
    if (!cond) {
        g_last_error = what;
        return AGSV_ERR_INVALID_ARGUMENT;
    }
    return AGSV_OK;
}

SloConfig slo_from_trace(const Trace& trace) {
    RunConfig cfg = run_config_from_json(trace.resolved_config);
    return cfg.slo;
}

}  // namespace

extern "C" {

const char* agsv_status_name(agsv_status status) {
    switch (status) {
    case AGSV_OK: return "ok";
    case AGSV_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case AGSV_ERR_VALIDATION: return "validation_error";
    case AGSV_ERR_PROTOCOL: return "protocol_error";
    case AGSV_ERR_IO: return "io_error";
    case AGSV_ERR_NO_DATA: return "no_data";
    case AGSV_ERR_INFEASIBLE: return "infeasible";
    }
    return "unknown";
}

const char* agsv_last_error(void) { return g_last_error.c_str(); }

void agsv_string_free(char* s) { delete[] s; }

agsv_status agsv_config_from_file(const char* path, agsv_config** out) {
    if (agsv_status s = require(path && out, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        *out = new agsv_config{load_run_config(path)};
        return AGSV_OK;
    });
}

agsv_status agsv_config_from_json(const char* text, agsv_config** out) {
    if (agsv_status s = require(text && out, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        *out = new agsv_config{parse_run_config(text)};
        return AGSV_OK;
    });
}

agsv_status agsv_config_set_policy(agsv_config* cfg, const char* policy) {
    if (agsv_status s = require(cfg && policy, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        // Re-resolve so policy-dependent validation still applies.
        nlohmann::json doc = cfg->cfg.to_json();
        doc["policy"] = policy;
        cfg->cfg = run_config_from_json(doc);
        return AGSV_OK;
    });
}

agsv_status agsv_config_set_seed(agsv_config* cfg, uint64_t seed) {
    if (agsv_status s = require(cfg != nullptr, "null argument"); s != AGSV_OK) return s;
    cfg->cfg.seed = seed;
    return AGSV_OK;
}

agsv_status agsv_config_set_concurrency(agsv_config* cfg, int concurrency) {
    if (agsv_status s = require(cfg != nullptr, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        if (concurrency < 1) {
            throw_validation("concurrency must be >= 1");
        }
        cfg->cfg.workload.concurrency = concurrency;
        return AGSV_OK;
    });
}

agsv_status agsv_config_resolved_json(const agsv_config* cfg, char** out_json) {
    if (agsv_status s = require(cfg && out_json, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        *out_json = dup_string(cfg->cfg.to_json().dump(2) + "\n");
        return AGSV_OK;
    });
}

void agsv_config_free(agsv_config* cfg) { delete cfg; }

agsv_status agsv_simulate(const agsv_config* cfg, agsv_trace** out) {
    if (agsv_status s = require(cfg && out, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        *out = new agsv_trace{run_simulation(cfg->cfg)};
        return AGSV_OK;
    });
}

agsv_status agsv_trace_to_file(const agsv_trace* trace, const char* path) {
    if (agsv_status s = require(trace && path, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        trace->trace.save(path);
        return AGSV_OK;
    });
}

agsv_status agsv_trace_from_file(const char* path, agsv_trace** out) {
    if (agsv_status s = require(path && out, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        *out = new agsv_trace{Trace::load(path)};
        return AGSV_OK;
    });
}

agsv_status agsv_trace_replay_check(const agsv_trace* trace, char** out_report_json) {
    if (agsv_status s = require(trace != nullptr, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        ReplayReport rep = replay_check(trace->trace);
        if (out_report_json) {
            *out_report_json = dup_string(rep.to_json());
        }
        if (rep.mismatches > 0) {
            g_last_error = "replay found " + std::to_string(rep.mismatches) + " mismatches";
            return AGSV_ERR_PROTOCOL;
        }
        return AGSV_OK;
    });
}

uint64_t agsv_trace_workload_hash(const agsv_trace* trace) {
    return trace ? trace->trace.workload_hash : 0;
}

const char* agsv_trace_policy(const agsv_trace* trace) {
    return trace ? trace->trace.policy.c_str() : "";
}

void agsv_trace_free(agsv_trace* trace) { delete trace; }

agsv_status agsv_metrics_summary_json(const agsv_trace* trace, char** out_json) {
    if (agsv_status s = require(trace && out_json, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        MetricsSummary m = compute_metrics(trace->trace, slo_from_trace(trace->trace));
        *out_json = dup_string(metrics_to_json(m, trace->trace));
        return AGSV_OK;
    });
}

agsv_status agsv_metrics_sessions_csv(const agsv_trace* trace, char** out_csv) {
    if (agsv_status s = require(trace && out_csv, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        MetricsSummary m = compute_metrics(trace->trace, slo_from_trace(trace->trace));
        *out_csv = dup_string(sessions_to_csv(m, trace->trace));
        return AGSV_OK;
    });
}

agsv_status agsv_verify_trace(const agsv_trace* trace, const char* params_json,
                              agsv_report** out) {
    if (agsv_status s = require(trace && out, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        VerifyParams params;
        if (params_json && *params_json) {
            nlohmann::json p;
            try {
                p = nlohmann::json::parse(params_json);
            } catch (const nlohmann::json::parse_error& e) {
                throw_validation(std::string("params must be JSON: ") + e.what());
            }
            if (p.contains("delta_sms")) params.delta_sms = p.at("delta_sms").get<double>();
            if (p.contains("eps_bar")) params.eps_bar = p.at("eps_bar").get<double>();
        }
        RunConfig cfg = run_config_from_json(trace->trace.resolved_config);
        VerifyReport rep =
            verify_trace(trace->trace, cfg.profile, cfg.r_min_tps,
                         cfg.controller.r_base_slots, cfg.controller.delta_t_ms, params);
        *out = new agsv_report{std::move(rep)};
        return AGSV_OK;
    });
}

agsv_status agsv_report_json(const agsv_report* report, char** out_json) {
    if (agsv_status s = require(report && out_json, "null argument"); s != AGSV_OK) return s;
    return guarded([&] {
        *out_json = dup_string(report->report.to_json());
        return AGSV_OK;
    });
}

int agsv_report_violation_count(const agsv_report* report) {
    return report ? report->report.violations : -1;
}

int agsv_report_vacuous_count(const agsv_report* report) {
    return report ? report->report.vacuous : -1;
}

int agsv_report_assumptions_met(const agsv_report* report) {
    return report ? (report->report.assumptions_met ? 1 : 0) : 0;
}

void agsv_report_free(agsv_report* report) { delete report; }

agsv_status agsv_profile_generate(const char* shape_json, char** out_profile_json,
                                  char** out_warning) {
    if (agsv_status s = require(out_profile_json != nullptr, "null argument"); s != AGSV_OK)
        return s;
    return guarded([&] {
        ProfileShape shape;
        if (shape_json && *shape_json) {
            nlohmann::json p;
            try {
                p = nlohmann::json::parse(shape_json);
            } catch (const nlohmann::json::parse_error& e) {
                throw_validation(std::string("shape must be JSON: ") + e.what());
            }
            shape.total_sms = p.value("total_sms", shape.total_sms);
            shape.granularity = p.value("granularity", shape.granularity);
            shape.decode_max_rate = p.value("decode_max_rate", shape.decode_max_rate);
            shape.decode_knee = p.value("decode_knee", shape.decode_knee);
            shape.cold_max_rate = p.value("cold_max_rate", shape.cold_max_rate);
            shape.cold_knee = p.value("cold_knee", shape.cold_knee);
            shape.resume_max_rate = p.value("resume_max_rate", shape.resume_max_rate);
            shape.resume_knee = p.value("resume_knee", shape.resume_knee);
        }
        ProfileBundle bundle = generate_profile(shape);
        *out_profile_json = dup_string(profile_to_json(bundle));
        if (out_warning) {
            *out_warning = nullptr;
            if (shape.decode_knee > shape.cold_knee) {
                *out_warning = dup_string(
                    "decode saturates later than cold prefill; measured GPUs show the "
                    "opposite ordering");
            }
        }
        return AGSV_OK;
    });
}

agsv_status agsv_profile_validate(const char* profile_json) {
    if (agsv_status s = require(profile_json != nullptr, "null argument"); s != AGSV_OK)
        return s;
    return guarded([&] {
        parse_profile_json(profile_json);
        return AGSV_OK;
    });
}

}  // extern "C"
