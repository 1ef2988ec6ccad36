/*
 * agentsim — deterministic simulator for phase-aware single-GPU agent serving.
 *
 * C interface over the core library: opaque handles, status-code returns,
 * and a thread-local error message. Strings returned through char** out
 * parameters are heap-allocated; release them with agsv_string_free.
 */

#ifndef AGENTSIM_H
#define AGENTSIM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum agsv_status {
    AGSV_OK = 0,
    AGSV_ERR_INVALID_ARGUMENT = 1,
    AGSV_ERR_VALIDATION = 2,
    AGSV_ERR_PROTOCOL = 3,
    AGSV_ERR_IO = 4,
    AGSV_ERR_NO_DATA = 5,
    AGSV_ERR_INFEASIBLE = 6
} agsv_status;

typedef struct agsv_config agsv_config;
typedef struct agsv_trace agsv_trace;
typedef struct agsv_report agsv_report;

const char* agsv_status_name(agsv_status status);

/* Message describing the most recent failure on this thread. */
const char* agsv_last_error(void);

void agsv_string_free(char* s);

/* --- run configuration ------------------------------------------------- */

agsv_status agsv_config_from_file(const char* path, agsv_config** out);
agsv_status agsv_config_from_json(const char* text, agsv_config** out);
agsv_status agsv_config_set_policy(agsv_config* cfg, const char* policy);
agsv_status agsv_config_set_seed(agsv_config* cfg, uint64_t seed);
agsv_status agsv_config_set_concurrency(agsv_config* cfg, int concurrency);
agsv_status agsv_config_resolved_json(const agsv_config* cfg, char** out_json);
void agsv_config_free(agsv_config* cfg);

/* --- simulation ---------------------------------------------------------- */

agsv_status agsv_simulate(const agsv_config* cfg, agsv_trace** out);
agsv_status agsv_trace_to_file(const agsv_trace* trace, const char* path);
agsv_status agsv_trace_from_file(const char* path, agsv_trace** out);
/* AGSV_OK with zero mismatches; AGSV_ERR_PROTOCOL when the replay disagrees.
 * The report JSON is produced either way. */
agsv_status agsv_trace_replay_check(const agsv_trace* trace, char** out_report_json);
uint64_t agsv_trace_workload_hash(const agsv_trace* trace);
const char* agsv_trace_policy(const agsv_trace* trace);
void agsv_trace_free(agsv_trace* trace);

/* --- metrics ---------------------------------------------------------------- */

agsv_status agsv_metrics_summary_json(const agsv_trace* trace, char** out_json);
agsv_status agsv_metrics_sessions_csv(const agsv_trace* trace, char** out_csv);

/* --- bound verification ------------------------------------------------------ */

/* params_json: {"delta_sms": <number>, "eps_bar": <number>}, both optional;
 * omitted values default to the measured per-trace maxima. Pass "{}" or NULL
 * for all-measured. */
agsv_status agsv_verify_trace(const agsv_trace* trace, const char* params_json,
                              agsv_report** out);
agsv_status agsv_report_json(const agsv_report* report, char** out_json);
int agsv_report_violation_count(const agsv_report* report);
int agsv_report_vacuous_count(const agsv_report* report);
int agsv_report_assumptions_met(const agsv_report* report);
void agsv_report_free(agsv_report* report);

/* --- profile documents -------------------------------------------------------- */

/* shape_json keys (all optional): total_sms, granularity, decode_max_rate,
 * decode_knee, cold_max_rate, cold_knee, resume_max_rate, resume_knee.
 * out_warning (may be NULL) receives a note when the requested shape
 * contradicts the expected saturation ordering. */
agsv_status agsv_profile_generate(const char* shape_json, char** out_profile_json,
                                  char** out_warning);
agsv_status agsv_profile_validate(const char* profile_json);

#ifdef __cplusplus
}
#endif

#endif /* AGENTSIM_H */
