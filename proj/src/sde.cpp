#include "cimcs/sde.hpp"

#include "cimcs/error.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

namespace cimcs {

namespace {

// e_r above this is reported as a runaway instead of silently overflowing.
constexpr double kErrorCeiling = 1e300;

void check_finite(const Vector& v, const char* what, std::size_t step, double t) {
    for (Index r = 0; r < v.size(); ++r)
        if (!std::isfinite(v(r)))
            throw IntegrationFailure(std::string("non-finite ") + what, step, t, static_cast<std::size_t>(r));
}

void check_error_range(const Vector& e, std::size_t step, double t) {
    for (Index r = 0; r < e.size(); ++r)
        if (!(e(r) > 0.0) || !(e(r) < kErrorCeiling))
            throw IntegrationFailure("CAC error variable left representable range", step, t,
                                     static_cast<std::size_t>(r));
}

void draw(Rng& rng, bool on, Vector& xi) {
    if (!on) {
        xi.setZero();
        return;
    }
    for (Index r = 0; r < xi.size(); ++r) xi(r) = rng.normal();
}

// Shared by both CAC models: draws ξ, forms μ̃ and the injection term
// K·j·e_r(R_r h_r − (η²/4)√(τ/g²)). Returns the injection.
Vector cac_measure_and_inject(const Vector& mu, const Vector& e, Vector& mu_tilde, Vector& xi,
                              const QuboProblem& problem, const Vector& R, double eta, const SdeParams& p, Rng& rng) {
    const Index n = mu.size();
    const double dt = p.dt();
    xi.resize(n);
    draw(rng, p.noise_on, xi);
    mu_tilde = mu + (1.0 / std::sqrt(4.0 * p.j * dt)) * xi;

    Vector work, h;
    local_field_cac(problem, R, mu_tilde, p.tau, p.g2, work, h);
    const double offset = 0.25 * eta * eta * std::sqrt(p.tau / p.g2);
    return (p.K * p.j) * e.cwiseProduct((R.cwiseProduct(h).array() - offset).matrix());
}

void advance_error(Vector& e, const Vector& mu_tilde, const SdeParams& p) {
    const double dt = p.dt();
    for (Index r = 0; r < e.size(); ++r) e(r) *= std::exp(-p.beta * (p.g2 * mu_tilde(r) * mu_tilde(r) - p.tau) * dt);
}

} // namespace

std::string_view to_string(Model m) {
    switch (m) {
    case Model::WignerOl: return "wigner-ol";
    case Model::WignerCac: return "wigner-cac";
    case Model::PositiveP: return "positive-p";
    }
    return "unknown";
}

Model parse_model(std::string_view name) {
    if (name == "wigner-ol") return Model::WignerOl;
    if (name == "wigner-cac") return Model::WignerCac;
    if (name == "positive-p") return Model::PositiveP;
    throw InvalidArgument("unknown model '" + std::string(name) + "'");
}

void SdeParams::validate() const {
    require(std::isfinite(g2) && g2 > 0.0, "SdeParams: g2 must be positive");
    require(std::isfinite(j) && j > 0.0, "SdeParams: j must be positive");
    require(std::isfinite(K) && K >= 0.0, "SdeParams: K must be >= 0");
    require(std::isfinite(beta) && beta > 0.0, "SdeParams: beta must be positive");
    require(std::isfinite(tau) && tau > 0.0, "SdeParams: tau must be positive");
    require(std::isfinite(p_thr) && std::isfinite(d), "SdeParams: pump parameters must be finite");
    require(std::isfinite(T) && T > 0.0, "SdeParams: T must be positive");
    require(steps > 0, "SdeParams: steps must be positive");
}

SdeParams SdeParams::defaults(Model m) {
    SdeParams p;
    if (m == Model::WignerOl) {
        p.K = 0.25;
        p.T = 5.0;
        p.steps = 50;
    }
    return p;
}

double pump_cac(double t, double p_thr, double d) {
    return (p_thr - d) + 2.0 * d / (1.0 + std::exp(-(t - 4.0) / 2.0));
}

double pump_ol(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 5.0) return 1.5;
    const double u = t / 5.0;
    return 1.5 * u * u;
}

WignerOlState WignerOlState::initial(Index n) { return {Vector::Zero(n), Vector::Zero(n), 0.0, 0}; }

WignerCacState WignerCacState::initial(Index n) {
    return {Vector::Zero(n), Vector::Constant(n, 0.5), Vector::Ones(n), Vector::Zero(n), 0.0, 0};
}

PositivePState PositivePState::initial(Index size) {
    return {Vector::Zero(size), Vector::Zero(size), Vector::Zero(size), Vector::Ones(size), Vector::Zero(size), 0.0, 0};
}

void step_wigner_ol(WignerOlState& state, const QuboProblem& problem, const Vector& R, double eta,
                    const SdeParams& params, Rng& rng) {
    const Index n = problem.size();
    require(state.c.size() == n && state.s.size() == n && R.size() == n, "step_wigner_ol: length mismatch");
    const double dt = params.dt();
    const double sqdt = std::sqrt(dt);
    const double g = std::sqrt(params.g2);
    const double p = pump_ol(state.t);

    Vector w1(n), w2(n);
    draw(rng, params.noise_on, w1);
    draw(rng, params.noise_on, w2);

    Vector work, h;
    local_field_ol(problem, R, state.c, work, h);

    for (Index r = 0; r < n; ++r) {
        const double c = state.c(r);
        const double s = state.s(r);
        const double amp2 = c * c + s * s;
        const double diffusion = g * std::sqrt(amp2 + 0.5) * sqdt;
        const double inj = params.K * (std::abs(h(r)) - eta);
        state.c(r) = c + ((-1.0 + p - amp2) * c + inj) * dt + diffusion * w1(r);
        state.s(r) = s + ((-1.0 - p - amp2) * s) * dt + diffusion * w2(r);
    }
    state.t += dt;
    ++state.step;
    check_finite(state.c, "in-phase amplitude", state.step, state.t);
    check_finite(state.s, "quadrature amplitude", state.step, state.t);
}

void step_wigner_cac(WignerCacState& state, const QuboProblem& problem, const Vector& R, double eta,
                     const SdeParams& params, Rng& rng) {
    const Index n = problem.size();
    require(state.mu.size() == n && state.V.size() == n && state.e.size() == n && R.size() == n,
            "step_wigner_cac: length mismatch");
    const double dt = params.dt();
    const double sqdt = std::sqrt(dt);
    const double p = pump_cac(state.t, params.p_thr, params.d);
    const double j = params.j;
    const double g2 = params.g2;
    const double sqj = std::sqrt(j);

    Vector xi;
    const Vector inj = cac_measure_and_inject(state.mu, state.e, state.mu_tilde, xi, problem, R, eta, params, rng);

    for (Index r = 0; r < n; ++r) {
        const double mu = state.mu(r);
        const double V = state.V(r);
        const double g2mu2 = g2 * mu * mu;
        state.mu(r) = mu + (-(1.0 - p + j) * mu - g2mu2 * mu + inj(r)) * dt + sqj * (V - 0.5) * sqdt * xi(r);
        state.V(r) = V + (-2.0 * (1.0 - p + j) * V - 6.0 * g2mu2 * V + 1.0 + j + 2.0 * g2mu2 -
                          2.0 * j * (V - 0.5) * (V - 0.5)) *
                             dt;
    }
    advance_error(state.e, state.mu_tilde, params);
    state.t += dt;
    ++state.step;
    check_finite(state.mu, "mean amplitude", state.step, state.t);
    check_finite(state.V, "variance", state.step, state.t);
    check_error_range(state.e, state.step, state.t);
}

void step_positive_p(PositivePState& state, const QuboProblem& problem, const Vector& R, double eta,
                     const SdeParams& params, Rng& rng) {
    const Index size = problem.size();
    require(state.mu.size() == size && state.n.size() == size && state.m.size() == size && state.e.size() == size &&
                R.size() == size,
            "step_positive_p: length mismatch");
    const double dt = params.dt();
    const double sqdt = std::sqrt(dt);
    const double p = pump_cac(state.t, params.p_thr, params.d);
    const double j = params.j;
    const double g2 = params.g2;
    const double sqj = std::sqrt(j);

    Vector xi;
    const Vector inj = cac_measure_and_inject(state.mu, state.e, state.mu_tilde, xi, problem, R, eta, params, rng);

    for (Index r = 0; r < size; ++r) {
        const double mu = state.mu(r);
        const double n = state.n(r);
        const double m = state.m(r);
        const double mu2 = mu * mu;
        const double mn2 = (m + n) * (m + n);
        state.mu(r) = mu + (-(1.0 - p + j) * mu - g2 * mu * (mu2 + 2.0 * n + m) + inj(r)) * dt +
                      sqj * (m + n) * sqdt * xi(r);
        state.n(r) = n + (-2.0 * (1.0 + j) * n + 2.0 * p * m - 2.0 * g2 * mu2 * (2.0 * n + m) - j * mn2) * dt;
        state.m(r) = m + (-2.0 * (1.0 + j) * m + 2.0 * p * n - 2.0 * g2 * mu2 * (2.0 * m + n) + p -
                          g2 * (mu2 + m) - j * mn2) *
                             dt;
    }
    advance_error(state.e, state.mu_tilde, params);
    state.t += dt;
    ++state.step;
    check_finite(state.mu, "mean amplitude", state.step, state.t);
    check_finite(state.n, "variance n", state.step, state.t);
    check_finite(state.m, "variance m", state.step, state.t);
    check_error_range(state.e, state.step, state.t);
}

void SdeTrace::write_csv(std::ostream& out) const {
    out << "t,r,amplitude,e\n";
    out << std::setprecision(12);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const Vector& amp = amplitude[k];
        for (Index r = 0; r < amp.size(); ++r) {
            out << times[k] << ',' << r << ',' << amp(r) << ',';
            if (k < error.size()) out << error[k](r);
            out << '\n';
        }
    }
}

namespace {

template <class State, class Stepper, class Readout>
SupportEstimate integrate(State state, Stepper step, Readout readout, const SdeParams& params, int trace_stride,
                          bool has_error) {
    SupportEstimate out;
    out.trace.stride = trace_stride;
    Rng rng(params.seed);
    for (int k = 0; k < params.steps; ++k) {
        step(state, rng);
        if (trace_stride > 0 && (state.step % static_cast<std::size_t>(trace_stride) == 0)) {
            out.trace.times.push_back(state.t);
            out.trace.amplitude.push_back(readout(state));
            if constexpr (requires { state.e; }) {
                if (has_error) out.trace.error.push_back(state.e);
            }
        }
    }
    const Vector final_readout = readout(state);
    out.sigma.resize(final_readout.size());
    for (Index r = 0; r < final_readout.size(); ++r) out.sigma(r) = heaviside(final_readout(r));
    return out;
}

} // namespace

SupportEstimate cim_support_estimation(Model model, const QuboProblem& problem, const Vector& R, double eta,
                                       const SdeParams& params, int trace_stride) {
    params.validate();
    require(R.size() == problem.size(), "cim_support_estimation: R length mismatch");
    require(std::isfinite(eta) && eta >= 0.0, "cim_support_estimation: eta must be finite and >= 0");
    require(trace_stride >= 0, "cim_support_estimation: trace stride must be >= 0");
    const Index n = problem.size();
    const double g = std::sqrt(params.g2);

    switch (model) {
    case Model::WignerOl:
        return integrate(
            WignerOlState::initial(n),
            [&](WignerOlState& s, Rng& rng) { step_wigner_ol(s, problem, R, eta, params, rng); },
            [](const WignerOlState& s) { return s.c; }, params, trace_stride, false);
    case Model::WignerCac:
        return integrate(
            WignerCacState::initial(n),
            [&](WignerCacState& s, Rng& rng) { step_wigner_cac(s, problem, R, eta, params, rng); },
            [g](const WignerCacState& s) -> Vector { return g * s.mu_tilde; }, params, trace_stride, true);
    case Model::PositiveP:
        return integrate(
            PositivePState::initial(n),
            [&](PositivePState& s, Rng& rng) { step_positive_p(s, problem, R, eta, params, rng); },
            [g](const PositivePState& s) -> Vector { return g * s.mu_tilde; }, params, trace_stride, true);
    }
    throw InvalidArgument("cim_support_estimation: unknown model");
}

} // namespace cimcs
