#pragma once

#include "cimcs/altmin.hpp"
#include "cimcs/baselines.hpp"
#include "cimcs/instance.hpp"
#include "cimcs/mri.hpp"
#include "cimcs/sde.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cimcs {

using Json = nlohmann::json;

enum class ExperimentKind { SupportOnly, AltMin, SaCompare, Mri, Sweep };

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& name);

struct InstanceSpec {
    Index N = 500;
    double alpha = 0.6;
    double a = 0.6;
    double nu = 0.0;
    /// Optional instance file; when set, every repetition reuses it.
    std::string file;
};

struct MriSpec {
    /// "phantom" or a path to an 8-bit/16-bit binary PGM.
    std::string image = "phantom";
    Index side = 64;  // phantom size
    double sparseness = 0.212;
    double compression = 0.4;
    double gamma = 0.0001;
    std::vector<std::uint64_t> mask_seeds = {1};
    std::vector<MriMethod> methods = {MriMethod::Lasso, MriMethod::WignerOl, MriMethod::WignerCac,
                                      MriMethod::PositiveP};
    MriRunConfig run = MriRunConfig::defaults();
};

struct SweepSpec {
    /// Experiment executed at every grid point: support-only or altmin.
    ExperimentKind base = ExperimentKind::AltMin;
    /// Axis name (eta, a, alpha, nu, tau, g2) and its values, in declaration order.
    std::vector<std::pair<std::string, std::vector<double>>> axes;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::AltMin;
    std::uint64_t seed = 0;
    int repetitions = 1;
    std::string output = "out";
    int workers = 0;  // 0: unset

    InstanceSpec instance;
    Model model = Model::WignerCac;
    /// Threshold of support-only and SA runs.
    double eta = 0.05;
    SdeParams sde = SdeParams::defaults(Model::WignerCac);
    AltMinConfig altmin;
    SaSchedule sa;
    MriSpec mri;
    SweepSpec sweep;
    /// Oracle runs: N ≤ 24 instances solved exactly and compared with SA and the CIM.
    bool oracle_with_cim = true;
};

/// Parses and validates a configuration. Unknown keys, wrong types and
/// out-of-range values throw ConfigError.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field with its resolved value.
Json to_json(const ExperimentConfig& cfg);

/// SHA-1 of "blob <len>\0<content>" in hex, as git computes object ids.
std::string git_blob_sha1(std::string_view content);
/// Hash of the resolved configuration dump.
std::string config_hash(const ExperimentConfig& cfg);

/// Linear-interpolation quantile (q in [0,1]) of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q);
/// min, 25th, median, 75th, max.
std::array<double, 5> box_summary(std::vector<double> values);

/// Flag value when positive, else the environment value when it parses as a
/// positive integer, else the config value when positive, else the number of
/// logical cores.
int resolve_workers(int flag, const char* env_value, int config_value);
inline constexpr const char* kWorkersEnv = "CIMCS_WORKERS";

/// Runs task(i) for i in [0, n) on `workers` threads. Exceptions escaping a
/// task are rethrown after all threads join (first by index).
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task);

/// Instance and SDE seeds of repetition `rep`.
std::uint64_t instance_seed(std::uint64_t master, int rep);
std::uint64_t trajectory_seed(std::uint64_t master, int rep);

struct CommandResult {
    int exit_code = 0;
    std::string summary;
};

struct RunOptions {
    int workers = 1;
    std::ostream* log = nullptr;
};

CommandResult cmd_gen(const ExperimentConfig& cfg, const RunOptions& opt);
CommandResult cmd_run(const ExperimentConfig& cfg, const RunOptions& opt);
CommandResult cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opt);
CommandResult cmd_mri(const ExperimentConfig& cfg, const RunOptions& opt);
CommandResult cmd_oracle(const ExperimentConfig& cfg, const RunOptions& opt);

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailure = 1;
inline constexpr int kExitConfigError = 2;

} // namespace cimcs
