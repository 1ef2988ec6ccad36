// agentsim command-line front end: run single simulations, paired policy
// comparisons, bound verification, and profile generation. Talks to the core
// exclusively through the agentsim C API; output formatting stays here.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agentsim.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitProtocol = 2;
constexpr int kExitViolation = 3;
constexpr int kExitAssumptions = 4;

int exit_code_for(agsv_status s) {
    switch (s) {
    case AGSV_OK: return kExitOk;
    case AGSV_ERR_PROTOCOL: return kExitProtocol;
    default: return kExitValidation;
    }
}

[[nodiscard]] int fail(agsv_status s, const std::string& what) {
    std::cerr << "error (" << agsv_status_name(s) << "): " << what << ": " << agsv_last_error()
              << "\n";
    return exit_code_for(s);
}

std::string take_string(char* s) {
    std::string out = s ? s : "";
    agsv_string_free(s);
    return out;
}

bool write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        return false;
    }
    out << content;
    return true;
}

// Accepts either raw JSON ("{...}") or comma-separated key=value pairs.
json parse_params(const std::string& text) {
    if (text.empty()) {
        return json::object();
    }
    if (text.front() == '{') {
        return json::parse(text);
    }
    json out = json::object();
    std::stringstream ss(text);
    std::string pair;
    while (std::getline(ss, pair, ',')) {
        auto eq = pair.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("expected key=value in --params, got '" + pair + "'");
        }
        std::string key = pair.substr(0, eq);
        std::string value = pair.substr(eq + 1);
        try {
            std::size_t used = 0;
            double num = std::stod(value, &used);
            if (used == value.size()) {
                out[key] = num;
                continue;
            }
        } catch (...) {
        }
        out[key] = value;
    }
    return out;
}

struct PolicyRow {
    std::string policy;
    int concurrency = 0;
    std::uint64_t workload_hash = 0;
    json metrics;
};

int run_one(agsv_config* cfg, const std::string& policy, std::optional<int> concurrency,
            agsv_trace** out_trace) {
    if (!policy.empty()) {
        if (auto s = agsv_config_set_policy(cfg, policy.c_str()); s != AGSV_OK) {
            return fail(s, "setting policy " + policy);
        }
    }
    if (concurrency) {
        if (auto s = agsv_config_set_concurrency(cfg, *concurrency); s != AGSV_OK) {
            return fail(s, "setting concurrency");
        }
    }
    if (auto s = agsv_simulate(cfg, out_trace); s != AGSV_OK) {
        return fail(s, "simulation");
    }
    return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed) {
    agsv_config* cfg = nullptr;
    if (auto s = agsv_config_from_file(config_path.c_str(), &cfg); s != AGSV_OK) {
        return fail(s, "loading config " + config_path);
    }
    if (seed) {
        agsv_config_set_seed(cfg, *seed);
    }
    agsv_trace* trace = nullptr;
    if (auto s = agsv_simulate(cfg, &trace); s != AGSV_OK) {
        agsv_config_free(cfg);
        return fail(s, "simulation");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    int rc = kExitOk;
    if (auto s = agsv_trace_to_file(trace, (fs::path(out_dir) / "trace.jsonl").c_str());
        s != AGSV_OK) {
        rc = fail(s, "writing trace");
    }
    char* metrics_json = nullptr;
    char* sessions_csv = nullptr;
    if (rc == kExitOk) {
        if (auto s = agsv_metrics_summary_json(trace, &metrics_json); s != AGSV_OK) {
            rc = fail(s, "computing metrics");
        } else if (auto s2 = agsv_metrics_sessions_csv(trace, &sessions_csv); s2 != AGSV_OK) {
            rc = fail(s2, "rendering session table");
        }
    }
    if (rc == kExitOk) {
        std::string mj = take_string(metrics_json);
        std::string sc = take_string(sessions_csv);
        if (!write_file(fs::path(out_dir) / "metrics.json", mj) ||
            !write_file(fs::path(out_dir) / "sessions.csv", sc)) {
            rc = kExitValidation;
        } else {
            json m = json::parse(mj);
            std::cout << "policy " << m["policy"].get<std::string>() << "  ttft_p95 "
                      << m["ttft_p95_ms"] << " ms  tpot_p95 " << m["tpot_p95_ms"]
                      << " ms  throughput " << m["throughput_tps"] << " tok/s  slo "
                      << m["slo_attainment"] << "\n";
            std::cout << "artifacts written to " << out_dir << "\n";
        }
    } else {
        agsv_string_free(metrics_json);
        agsv_string_free(sessions_csv);
    }
    agsv_trace_free(trace);
    agsv_config_free(cfg);
    return rc;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir,
                const std::string& policies_arg, const std::string& sweep,
                std::optional<std::uint64_t> seed) {
    std::vector<std::string> policies;
    std::stringstream ss(policies_arg);
    std::string p;
    while (std::getline(ss, p, ',')) {
        if (!p.empty()) policies.push_back(p);
    }
    if (policies.size() < 2) {
        std::cerr << "error: compare needs at least two policies (--policies a,b)\n";
        return kExitValidation;
    }
    int lo = 0, hi = 0;
    if (std::sscanf(sweep.c_str(), "%d-%d", &lo, &hi) != 2 || lo < 1 || hi < lo) {
        std::cerr << "error: --sweep must look like 3-6\n";
        return kExitValidation;
    }

    std::vector<PolicyRow> rows;
    for (int conc = lo; conc <= hi; ++conc) {
        std::optional<std::uint64_t> base_hash;
        for (const auto& policy : policies) {
            agsv_config* cfg = nullptr;
            if (auto s = agsv_config_from_file(config_path.c_str(), &cfg); s != AGSV_OK) {
                return fail(s, "loading config " + config_path);
            }
            if (seed) {
                agsv_config_set_seed(cfg, *seed);
            }
            agsv_trace* trace = nullptr;
            int rc = run_one(cfg, policy, conc, &trace);
            if (rc != kExitOk) {
                agsv_config_free(cfg);
                return rc;
            }
            char* mj = nullptr;
            if (auto s = agsv_metrics_summary_json(trace, &mj); s != AGSV_OK) {
                agsv_trace_free(trace);
                agsv_config_free(cfg);
                return fail(s, "metrics for " + policy);
            }
            PolicyRow row;
            row.policy = policy;
            row.concurrency = conc;
            row.workload_hash = agsv_trace_workload_hash(trace);
            row.metrics = json::parse(take_string(mj));
            if (!base_hash) {
                base_hash = row.workload_hash;
            } else if (*base_hash != row.workload_hash) {
                std::cerr << "error: request streams diverged across policies at concurrency "
                          << conc << "\n";
                agsv_trace_free(trace);
                agsv_config_free(cfg);
                return kExitProtocol;
            }
            rows.push_back(std::move(row));
            agsv_trace_free(trace);
            agsv_config_free(cfg);
        }
    }

    std::ostringstream csv;
    csv << "policy,concurrency,workload_hash,ttft_p50_ms,ttft_p95_ms,tpot_p50_ms,"
           "tpot_p95_ms,throughput_tps,slo_attainment\n";
    json table = json::array();
    for (const auto& r : rows) {
        char hash_hex[32];
        std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                      static_cast<unsigned long long>(r.workload_hash));
        csv << r.policy << ',' << r.concurrency << ',' << hash_hex << ','
            << r.metrics["ttft_p50_ms"] << ',' << r.metrics["ttft_p95_ms"] << ','
            << r.metrics["tpot_p50_ms"] << ',' << r.metrics["tpot_p95_ms"] << ','
            << r.metrics["throughput_tps"] << ',' << r.metrics["slo_attainment"] << '\n';
        table.push_back({{"policy", r.policy},
                         {"concurrency", r.concurrency},
                         {"workload_hash", hash_hex},
                         {"metrics", r.metrics}});
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!write_file(fs::path(out_dir) / "comparison.csv", csv.str()) ||
        !write_file(fs::path(out_dir) / "comparison.json", table.dump(2) + "\n")) {
        return kExitValidation;
    }
    std::cout << csv.str();
    std::cout << "comparison written to " << out_dir << "\n";
    return kExitOk;
}

int cmd_verify(const std::string& trace_path, const std::string& params,
               const std::string& out_dir) {
    agsv_trace* trace = nullptr;
    if (auto s = agsv_trace_from_file(trace_path.c_str(), &trace); s != AGSV_OK) {
        return fail(s, "loading trace " + trace_path);
    }
    std::string params_json;
    try {
        params_json = parse_params(params).dump();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        agsv_trace_free(trace);
        return kExitValidation;
    }
    agsv_report* report = nullptr;
    if (auto s = agsv_verify_trace(trace, params_json.c_str(), &report); s != AGSV_OK) {
        agsv_trace_free(trace);
        return fail(s, "verification");
    }
    char* rj = nullptr;
    agsv_report_json(report, &rj);
    std::string report_json = take_string(rj);
    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        write_file(fs::path(out_dir) / "verify.json", report_json);
    }
    json rep = json::parse(report_json);
    std::cout << "intervals checked " << rep["checked"] << ", vacuous " << rep["vacuous"]
              << ", violations " << rep["violations"] << ", min rho " << rep["min_rho"]
              << ", min bound " << rep["min_bound"] << "\n";
    int rc = kExitOk;
    if (!agsv_report_assumptions_met(report)) {
        for (const auto& f : rep["assumption_flags"]) {
            std::cout << "assumption not met: " << f.get<std::string>() << "\n";
        }
        rc = kExitAssumptions;
    } else if (agsv_report_violation_count(report) > 0) {
        rc = kExitViolation;
    }
    agsv_report_free(report);
    agsv_trace_free(trace);
    return rc;
}

int cmd_profile_gen(const std::string& params, const std::string& out_file) {
    std::string shape_json;
    try {
        shape_json = parse_params(params).dump();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    char* profile = nullptr;
    char* warning = nullptr;
    if (auto s = agsv_profile_generate(shape_json.c_str(), &profile, &warning); s != AGSV_OK) {
        return fail(s, "generating profile");
    }
    std::string doc = take_string(profile);
    if (warning) {
        std::cerr << "warning: " << take_string(warning) << "\n";
    }
    if (out_file.empty() || out_file == "-") {
        std::cout << doc;
    } else if (!write_file(out_file, doc)) {
        return kExitValidation;
    } else {
        std::cout << "profile written to " << out_file << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentsim: phase-aware single-GPU agent serving simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", trace_path, params, policies, sweep = "3-6";
    std::string profile_out;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "simulate one policy and write artifacts");
    run->add_option("--config", config_path, "run-config JSON")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed, "override the config seed");

    auto* compare = app.add_subcommand("compare", "run several policies on one workload");
    compare->add_option("--config", config_path, "run-config JSON")->required();
    compare->add_option("--out", out_dir, "output directory");
    compare->add_option("--policies", policies, "comma-separated policy names")->required();
    compare->add_option("--sweep", sweep, "concurrency sweep, e.g. 3-6");
    compare->add_option("--seed", seed, "override the config seed");

    auto* verify = app.add_subcommand("verify", "check competitive-ratio bounds on a trace");
    verify->add_option("--trace", trace_path, "trace.jsonl from an agentserve run")->required();
    verify->add_option("--params", params, "delta_sms=<v>,eps_bar=<v> or JSON");
    verify->add_option("--out", out_dir, "optional report directory")->default_val("");

    auto* pgen = app.add_subcommand("profile-gen", "emit a synthetic profile document");
    pgen->add_option("--params", params, "shape overrides, key=value or JSON");
    pgen->add_option("--out", profile_out, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, out_dir, seed);
    if (compare->parsed()) return cmd_compare(config_path, out_dir, policies, sweep, seed);
    if (verify->parsed()) return cmd_verify(trace_path, params, out_dir);
    if (pgen->parsed()) return cmd_profile_gen(params, profile_out);
    return kExitValidation;
}
