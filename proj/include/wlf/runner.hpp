#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wlf/congruence.hpp"

namespace wlf {

inline constexpr const char* kVersion = "wlf 1.0.0";

enum class Outcome { pass, fail, inconclusive };
std::string to_string(Outcome o);

struct Verdict {
    Outcome outcome = Outcome::pass;
    std::string invariant;
    double worst = 0.0;  // worst observed value of the checked quantity
    double limit = 0.0;  // allowed bound for it
    std::string detail;

    static Verdict check(std::string invariant, double worst, double limit, std::string detail = {});
};

struct ScenarioResult {
    std::string scenario;
    std::map<std::string, Verdict> verdicts;
    json details = json::object();
    std::map<std::string, std::string> tables;  // file name -> CSV text
    std::vector<std::string> artifacts;
    std::vector<std::pair<std::string, double>> timing;  // stage -> seconds

    /// 0 all pass, 2 any fail, 3 inconclusive but no fail.
    int exit_code() const;
};

struct NumericBlock {
    double tol = 1e-10;
    double t_start = 0.0, t_end = 10.0;
    int grid = 0;  // uniform output samples for tables; 0 uses the solver grid
    ExtendedReal N = ExtendedReal::inf();
    std::vector<double> epsilons{0.0};
    bool fixed_step = false;
    double step = 1e-3;
};

struct OutputBlock {
    std::string directory = "wlf_out";
    bool csv = true, json = true;
};

struct RunConfig {
    json model;  // model block, absent for the suite
    std::string scenario;
    std::uint64_t seed = 0;
    NumericBlock numeric;
    OutputBlock output;
    json block = json::object();  // scenario-specific block, defaults filled in
    json echo;                    // normalized config
};

/// Strict parse: unknown keys and wrong types throw ConfigError naming the key path.
RunConfig parse_run_config(const json& j);
RunConfig load_run_config(const std::string& path);

ScenarioResult run_scenario(const RunConfig& config);

/// Deterministic summary text (no timing).
std::string summary_json(const ScenarioResult& result, const RunConfig& config);

/// Writes summary.json, timing.json and the CSV tables; returns the written paths.
std::vector<std::string> emit_report(ScenarioResult& result, const RunConfig& config);

std::uint64_t fnv1a(std::string_view text);

/// WLF_WORKERS, else the hardware concurrency.
int worker_count();

/// Runs f(0..count-1) on up to `workers` threads; the first exception is rethrown.
void parallel_for(int count, int workers, const std::function<void(int)>& f);

struct BonnetMyersRow {
    Vec direction;
    std::optional<double> first_zero;
    double bound = 0.0;
    bool satisfied = false;
    std::string note;  // "zero", "no zero", "chart exit"
};

struct BonnetMyersResult {
    double K = 0.0;
    ExtendedReal N;
    double bound = 0.0;
    double ricci_margin = 0.0;  // min over samples of Ric_N - K F^2
    std::vector<BonnetMyersRow> rows;
    Outcome outcome = Outcome::pass;
};

struct BonnetMyersOptions {
    std::vector<double> x;
    ExtendedReal N;
    double K = 0.0;
    int directions = 8;
    double spread = 0.6;
    double t_max = 0.0;  // 0: 1.2 times the bound plus 0.5
    double tol = 1e-10;
    double zero_tol = 1e-3;
    int workers = 1;
};

/// Point congruences in a fan of unit timelike directions; throws PreconditionError with a witness
/// when Ric_N >= K F^2 fails at a sample.
BonnetMyersResult bonnet_myers_sweep(const SpacetimeModel& model, const BonnetMyersOptions& options);

struct FocusingCheck {
    std::optional<Verdict> verdict;  // empty when the run does not qualify
    std::optional<double> s0;
    std::string note;
};

/// Focusing bound on one report: qualifies when theta_eps(t0) < 0 and Ric_N(eta*) >= 0 on every row.
FocusingCheck focusing_check(const CongruenceReport& report, const JacobiTensorPath& path, size_t eps_index);

struct SuiteOptions {
    int workers = 1;
    std::uint64_t seed = 0;
};

/// The full invariant battery, one verdict per family.
ScenarioResult run_suite(const SuiteOptions& options);

/// Verdict keys of run_suite in criterion order.
const std::vector<std::string>& suite_keys();

/// Round sphere of the given radius about `center` inside the slice x0 = center[0].
SurfacePatch sphere_patch(int dim, const Vec& center, double radius);

}  // namespace wlf
