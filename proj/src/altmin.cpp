#include "cimcs/altmin.hpp"

#include "cimcs/baselines.hpp"
#include "cimcs/error.hpp"
#include "cimcs/rng.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace cimcs {

namespace {

constexpr std::uint64_t kAltMinStream = 0xA17;
constexpr std::uint64_t kSupportOnlyStream = 0x5u;

Support nonzero_pattern(const Vector& R) {
    Support s(R.size());
    for (Index r = 0; r < R.size(); ++r) s(r) = R(r) != 0.0 ? 1 : 0;
    return s;
}

} // namespace

void AltMinConfig::validate(Index n) const {
    require(iterations >= 1, "AltMinConfig: iterations must be >= 1");
    require(velo >= 1, "AltMinConfig: velo must be >= 1");
    require(std::isfinite(eta_init) && std::isfinite(eta_end) && eta_init >= eta_end && eta_end >= 0.0,
            "AltMinConfig: need eta_init >= eta_end >= 0");
    require(cdp_tol > 0.0 && cdp_max_iter >= 0, "AltMinConfig: invalid CDP tolerances");
    require(lasso_lam >= 0.0, "AltMinConfig: lasso_lam must be >= 0");
    if (r_init == RInit::Given) require(r_given.size() == n, "AltMinConfig: r_given length mismatch");
    sde.validate();
}

std::uint64_t iteration_seed(std::uint64_t master, int i) {
    return derive_seed(master, {kAltMinStream, static_cast<std::uint64_t>(i)});
}

void RunTrace::write_csv_header(std::ostream& out) {
    out << "i,eta,support_size,energy,rmse,direction_cosine,hamming_loss,cdp_iterations,cdp_residual,cdp_converged\n";
}

void RunTrace::write_csv_row(std::ostream& out, const IterationRecord& rec) {
    out << std::setprecision(17) << rec.i << ',' << rec.eta << ',' << popcount(rec.sigma) << ',' << rec.energy << ','
        << rec.rmse << ',' << rec.direction_cosine << ',' << rec.hamming_loss << ',' << rec.cdp_iterations << ','
        << rec.cdp_residual << ',' << (rec.cdp_converged ? 1 : 0) << '\n';
}

void RunTrace::write_csv(std::ostream& out) const {
    write_csv_header(out);
    for (const auto& rec : records) write_csv_row(out, rec);
}

RunTrace run_alt_min(const QuboProblem& problem, const AltMinConfig& cfg, const GroundTruth* truth,
                     const SupportStep& support_step, const RecordSink& sink) {
    const Index n = problem.size();
    cfg.validate(n);
    if (truth != nullptr) require(truth->x.size() == n && truth->xi.size() == n, "run_alt_min: truth length mismatch");
    const auto start = std::chrono::steady_clock::now();

    Vector R;
    switch (cfg.r_init) {
    case RInit::Zeros: R = Vector::Zero(n); break;
    case RInit::Given: R = cfg.r_given; break;
    case RInit::Lasso: R = lasso_ista(*problem.coupling, problem.z, cfg.lasso_lam).x; break;
    }
    Support sigma = nonzero_pattern(R);

    RunTrace trace;
    trace.records.reserve(static_cast<std::size_t>(cfg.iterations));
    for (int i = 0; i < cfg.iterations; ++i) {
        const double eta = eta_schedule(i, cfg.eta_init, cfg.eta_end, cfg.velo);
        const QuboProblem step_problem = problem.with_eta(eta);
        IterationRecord rec;
        try {
            const Vector R_cim = extend_signal(step_problem, R, sigma);
            if (support_step) {
                sigma = support_step(step_problem, R_cim, i);
                require(sigma.size() == n, "support step returned wrong length");
            } else {
                SdeParams params = cfg.sde;
                params.seed = iteration_seed(cfg.seed, i);
                sigma = cim_support_estimation(cfg.model, step_problem, R_cim, eta, params).sigma;
            }
            const CdpResult cdp = solve_signal(cfg.cdp, step_problem, sigma, R_cim, cfg.cdp_tol, cfg.cdp_max_iter);
            if (!cdp.R.allFinite()) throw InvalidArgument("CDP produced a non-finite signal");
            R = cdp.R;
            rec.cdp_iterations = cdp.iterations;
            rec.cdp_residual = cdp.residual;
            rec.cdp_converged = cdp.converged;
        } catch (const IterationFailure&) {
            throw;
        } catch (const std::exception& ex) {
            throw IterationFailure(i, ex.what());
        }
        rec.i = i;
        rec.eta = eta;
        rec.sigma = sigma;
        rec.R = R;
        rec.energy = energy(step_problem, R, sigma).energy;
        if (truth != nullptr) {
            const Metrics m = evaluate(R, sigma, truth->x, truth->xi);
            rec.rmse = m.rmse;
            rec.direction_cosine = m.direction_cosine;
            rec.hamming_loss = m.hamming_loss;
        }
        if (sink) sink(rec);
        trace.records.push_back(std::move(rec));
    }
    trace.sigma = sigma;
    trace.R = R;
    trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return trace;
}

RunTrace run_alt_min(const Instance& instance, const AltMinConfig& cfg, const SupportStep& support_step,
                     const RecordSink& sink) {
    const QuboProblem problem = build_qubo(instance.A, instance.y, cfg.eta_init);
    const GroundTruth truth{instance.x, instance.xi};
    return run_alt_min(problem, cfg, &truth, support_step, sink);
}

std::vector<SupportTrial> run_support_only(const Instance& instance, Model model, double eta, const SdeParams& params,
                                           int repetitions) {
    require(repetitions >= 0, "run_support_only: repetitions must be >= 0");
    std::vector<SupportTrial> out;
    if (repetitions == 0) return out;
    const QuboProblem problem = build_qubo(instance.A, instance.y, eta);
    const Vector source = instance.signal();
    out.reserve(static_cast<std::size_t>(repetitions));
    for (int rep = 0; rep < repetitions; ++rep) {
        SdeParams p = params;
        p.seed = derive_seed(params.seed, {kSupportOnlyStream, static_cast<std::uint64_t>(rep)});
        SupportTrial trial;
        trial.sigma = cim_support_estimation(model, problem, source, eta, p).sigma;
        trial.direction_cosine = direction_cosine(instance.xi, trial.sigma).value;
        out.push_back(std::move(trial));
    }
    return out;
}

} // namespace cimcs
