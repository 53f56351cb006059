#pragma once

#include "cimcs/qubo.hpp"
#include "cimcs/rng.hpp"
#include "cimcs/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace cimcs {

enum class Model { WignerOl, WignerCac, PositiveP };

std::string_view to_string(Model m);
/// Accepts "wigner-ol", "wigner-cac", "positive-p".
Model parse_model(std::string_view name);
inline bool is_cac(Model m) { return m != Model::WignerOl; }

struct SdeParams {
    double g2 = 1e-7;   // saturation parameter
    double j = 1.0;     // normalised out-coupling rate
    double K = 1.0;     // feedback strength (K̃ for the open-loop model)
    double beta = 1.0;  // CAC error rate
    double tau = 1.0;   // CAC target amplitude
    double p_thr = 1.0;
    double d = 0.6;     // half-width of the CAC pump ramp
    double T = 20.0;    // horizon in photon lifetimes
    int steps = 1000;
    std::uint64_t seed = 0;
    bool noise_on = true;

    double dt() const { return T / steps; }
    void validate() const;

    /// CAC: T = 20 over 1000 steps, K = 1. Open loop: T = 5 over 50 steps, K̃ = 0.25.
    static SdeParams defaults(Model m);
};

double pump_cac(double t, double p_thr, double d);
/// 1.5 (t/5)², clamped to [0, 1.5] outside 0 ≤ t ≤ 5.
double pump_ol(double t);

struct WignerOlState {
    Vector c;
    Vector s;
    double t = 0.0;
    std::size_t step = 0;

    static WignerOlState initial(Index n);
};

struct WignerCacState {
    Vector mu;
    Vector V;
    Vector e;
    Vector mu_tilde;
    double t = 0.0;
    std::size_t step = 0;

    /// μ = μ̃ = 0, V = ½, e = 1.
    static WignerCacState initial(Index n);
};

struct PositivePState {
    Vector mu;
    Vector n;
    Vector m;
    Vector e;
    Vector mu_tilde;
    double t = 0.0;
    std::size_t step = 0;

    /// μ = μ̃ = n = m = 0, e = 1.
    static PositivePState initial(Index size);
};

// One Euler-Maruyama step each. Every pulse draws its Gaussians from `rng` in
// pulse order (the open-loop model draws all in-phase increments first, then
// all quadrature ones). The CAC models share one draw ξ_r per pulse between
// the SDE noise (ξ√dt) and the homodyne readout μ̃ = μ + ξ/√(4j·dt).
// Throws IntegrationFailure when the state leaves the finite range.
void step_wigner_ol(WignerOlState& state, const QuboProblem& problem, const Vector& R, double eta,
                    const SdeParams& params, Rng& rng);
void step_wigner_cac(WignerCacState& state, const QuboProblem& problem, const Vector& R, double eta,
                     const SdeParams& params, Rng& rng);
void step_positive_p(PositivePState& state, const QuboProblem& problem, const Vector& R, double eta,
                     const SdeParams& params, Rng& rng);

/// Snapshots of one trajectory: normalised readout (g·μ̃ for CAC, c for the
/// open-loop model) and the error variable (empty for open loop).
struct SdeTrace {
    int stride = 0;
    std::vector<double> times;
    std::vector<Vector> amplitude;
    std::vector<Vector> error;

    bool empty() const { return times.empty(); }
    /// Columns t, r, amplitude, e.
    void write_csv(std::ostream& out) const;
};

struct SupportEstimate {
    Support sigma;
    SdeTrace trace;
};

/// Runs one trajectory from the model's initial state over params.T and
/// binarises the final readout (μ̃ for CAC, c for open loop).
/// trace_stride = 0 disables tracing.
SupportEstimate cim_support_estimation(Model model, const QuboProblem& problem, const Vector& R, double eta,
                                       const SdeParams& params, int trace_stride = 0);

} // namespace cimcs
