#pragma once

#include "cimcs/cdp.hpp"
#include "cimcs/instance.hpp"
#include "cimcs/qubo.hpp"
#include "cimcs/sde.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace cimcs {

enum class RInit { Zeros, Given, Lasso };

struct AltMinConfig {
    Model model = Model::WignerCac;
    int iterations = 52;
    double eta_init = 0.6;
    double eta_end = 0.18;
    int velo = 51;
    SdeParams sde;  // sde.seed is ignored; per-iteration seeds derive from `seed`
    CdpSolver cdp = CdpSolver::Cgd;
    double cdp_tol = kCdpDefaultTol;
    int cdp_max_iter = kCdpDefaultMaxIter;
    RInit r_init = RInit::Zeros;
    Vector r_given;
    double lasso_lam = 0.0003;
    std::uint64_t seed = 0;

    void validate(Index n) const;
};

/// Reference values used only for reporting.
struct GroundTruth {
    Vector x;
    Support xi;
};

struct IterationRecord {
    int i = 0;
    double eta = 0.0;
    Support sigma;
    Vector R;
    double energy = 0.0;
    double rmse = 0.0;
    double direction_cosine = 0.0;
    double hamming_loss = 0.0;
    int cdp_iterations = 0;
    double cdp_residual = 0.0;
    bool cdp_converged = false;
};

struct RunTrace {
    std::vector<IterationRecord> records;
    Support sigma;
    Vector R;
    double wall_seconds = 0.0;

    /// One row per iteration; deterministic (no timing columns).
    void write_csv(std::ostream& out) const;
    static void write_csv_header(std::ostream& out);
    static void write_csv_row(std::ostream& out, const IterationRecord& rec);
};

/// Seed of the SDE trajectory in iteration i.
std::uint64_t iteration_seed(std::uint64_t master, int i);

/// Replaces the CIM in the σ step (testing hook). Arguments: problem at η_i,
/// signal handed to the CIM, iteration index.
using SupportStep = std::function<Support(const QuboProblem&, const Vector&, int)>;
using RecordSink = std::function<void(const IterationRecord&)>;

/// Alternating minimisation: per iteration, σ from the CIM at (R, η_i), then
/// R from the CDP at fixed σ, then the threshold update. `problem` supplies
/// couplings and Zeeman term; its η is overridden by the schedule.
RunTrace run_alt_min(const QuboProblem& problem, const AltMinConfig& cfg, const GroundTruth* truth = nullptr,
                     const SupportStep& support_step = {}, const RecordSink& sink = {});

RunTrace run_alt_min(const Instance& instance, const AltMinConfig& cfg, const SupportStep& support_step = {},
                     const RecordSink& sink = {});

struct SupportTrial {
    Support sigma;
    double direction_cosine = 0.0;
};

/// Support estimation with R pinned to the true source x∘ξ, `repetitions`
/// independently seeded trajectories (seeds derive from params.seed).
std::vector<SupportTrial> run_support_only(const Instance& instance, Model model, double eta, const SdeParams& params,
                                           int repetitions);

} // namespace cimcs
