#include "cimcs/error.hpp"
#include "cimcs/instance.hpp"
#include "cimcs/sde.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cimcs;
using namespace testutil;

namespace {

struct Frozen {
    Matrix A;
    Vector y;
    QuboProblem problem;
    Vector R;
};

Frozen frozen_n4(double eta) {
    Frozen f;
    f.A = random_matrix(3, 4, 1234, 0.6);
    f.y = random_vector(3, 1235);
    f.problem = build_qubo(f.A, f.y, eta);
    f.R = random_vector(4, 1236);
    return f;
}

double gram(const Matrix& A, Index r, Index q) {
    double g = 0.0;
    for (Index k = 0; k < A.rows(); ++k) g += A(k, r) * A(k, q);
    return g;
}

double zee(const Matrix& A, const Vector& y, Index r) {
    double z = 0.0;
    for (Index k = 0; k < A.rows(); ++k) z += A(k, r) * y(k);
    return z;
}

double sigmoid_pump(double t, double pthr, double d) { return pthr - d + 2.0 * d / (1.0 + std::exp(-(t - 4.0) / 2.0)); }

SdeParams quiet(SdeParams p) {
    p.noise_on = false;
    return p;
}

} // namespace

TEST_CASE("pump schedules") {
    CHECK(pump_cac(4.0, 1.0, 0.6) == 1.0);
    CHECK(pump_cac(-1e6, 1.0, 0.6) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(std::abs(pump_cac(20.0, 1.0, 0.4) - 1.4) < 1e-3);
    CHECK(pump_cac(20.0, 1.0, 0.4) < 1.4);
    CHECK(pump_ol(0.0) == 0.0);
    CHECK(pump_ol(5.0) == 1.5);
    CHECK(pump_ol(2.5) == 0.375);
    CHECK(pump_ol(7.0) == 1.5);
    CHECK(pump_ol(-1.0) == 0.0);
}

TEST_CASE("model names and defaults") {
    for (Model m : {Model::WignerOl, Model::WignerCac, Model::PositiveP}) CHECK(parse_model(to_string(m)) == m);
    CHECK_THROWS_AS(parse_model("quantum"), InvalidArgument);
    const SdeParams cac = SdeParams::defaults(Model::WignerCac);
    CHECK(cac.dt() == doctest::Approx(0.02));
    CHECK(cac.K == 1.0);
    CHECK(cac.beta == 1.0);
    CHECK(cac.j == 1.0);
    CHECK(cac.g2 == 1e-7);
    const SdeParams ol = SdeParams::defaults(Model::WignerOl);
    CHECK(ol.dt() == doctest::Approx(0.1));
    CHECK(ol.K == 0.25);
    SdeParams bad = cac;
    bad.steps = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cac;
    bad.g2 = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("open loop: drift at the origin is the injection alone") {
    const Frozen f = frozen_n4(0.3);
    SdeParams p = quiet(SdeParams::defaults(Model::WignerOl));
    WignerOlState st = WignerOlState::initial(4);
    st.t = 2.0;
    Rng rng(1);
    step_wigner_ol(st, f.problem, f.R, 0.3, p, rng);
    for (Index r = 0; r < 4; ++r) {
        CHECK(st.c(r) == doctest::Approx(p.K * (std::abs(f.problem.z(r)) - 0.3) * p.dt()).epsilon(1e-14));
        CHECK(st.s(r) == 0.0);
    }
}

TEST_CASE("open loop: without injection or pump the amplitude decays") {
    const Frozen f = frozen_n4(0.3);
    SdeParams p = quiet(SdeParams::defaults(Model::WignerOl));
    p.K = 0.0;
    WignerOlState st = WignerOlState::initial(4);
    st.c << 0.9, -0.5, 0.2, 1.3;
    Rng rng(1);
    for (int k = 0; k < 30; ++k) {
        const Vector before = st.c;
        st.t = 0.0; // keep p = 0
        step_wigner_ol(st, f.problem, f.R, 0.3, p, rng);
        for (Index r = 0; r < 4; ++r) {
            const double c = before(r);
            CHECK(st.c(r) == doctest::Approx(c + (-c - c * c * c) * p.dt()).epsilon(1e-14));
            CHECK(std::abs(st.c(r)) < std::abs(c));
            CHECK(st.c(r) * c > 0.0);
        }
    }
}

TEST_CASE("open loop: one step matches a scalar reference") {
    const Frozen f = frozen_n4(0.2);
    SdeParams p = SdeParams::defaults(Model::WignerOl);
    p.g2 = 0.01;
    WignerOlState st = WignerOlState::initial(4);
    st.c << 0.3, -0.2, 0.05, 0.7;
    st.s << 0.01, 0.02, -0.03, 0.0;
    st.t = 1.7;
    const WignerOlState s0 = st;
    Rng rng(99);
    step_wigner_ol(st, f.problem, f.R, 0.2, p, rng);

    Rng ref(99);
    double w1[4], w2[4];
    for (double& w : w1) w = ref.normal();
    for (double& w : w2) w = ref.normal();
    const double dt = 5.0 / 50.0;
    const double pump = 1.5 * (1.7 / 5) * (1.7 / 5);
    for (Index r = 0; r < 4; ++r) {
        double h = zee(f.A, f.y, r);
        for (Index q = 0; q < 4; ++q)
            if (q != r && s0.c(q) > 0.0) h -= gram(f.A, r, q) * f.R(q);
        const double c = s0.c(r), s = s0.s(r);
        const double a2 = c * c + s * s;
        const double diff = 0.1 * std::sqrt(a2 + 0.5) * std::sqrt(dt);
        const double c1 = c + ((-1 + pump - a2) * c + 0.25 * (std::abs(h) - 0.2)) * dt + diff * w1[r];
        const double s1 = s + ((-1 - pump - a2) * s) * dt + diff * w2[r];
        CHECK(std::abs(st.c(r) - c1) < 1e-14);
        CHECK(std::abs(st.s(r) - s1) < 1e-14);
    }
    CHECK(st.t == doctest::Approx(1.8));
    CHECK(st.step == 1);
}

TEST_CASE("wigner cac: one step matches a scalar reference") {
    const Frozen f = frozen_n4(0.1);
    SdeParams p = SdeParams::defaults(Model::WignerCac);
    p.g2 = 0.01;
    p.K = 0.7;
    p.j = 1.3;
    p.beta = 0.8;
    p.tau = 1.1;
    p.d = 0.5;
    WignerCacState st = WignerCacState::initial(4);
    st.mu << 1.0, -2.0, 0.5, 3.0;
    st.V << 0.5, 0.7, 0.4, 0.55;
    st.e << 1.0, 1.5, 0.8, 2.0;
    st.t = 3.3;
    const WignerCacState s0 = st;
    Rng rng(7);
    step_wigner_cac(st, f.problem, f.R, 0.1, p, rng);

    Rng ref(7);
    const double dt = p.T / p.steps;
    double xi[4], mt[4];
    for (Index r = 0; r < 4; ++r) {
        xi[r] = ref.normal();
        mt[r] = s0.mu(r) + std::sqrt(1.0 / (4.0 * 1.3)) * xi[r] / std::sqrt(dt);
    }
    const double S = std::sqrt(1.1 / 0.01);
    const double pump = sigmoid_pump(3.3, 1.0, 0.5);
    for (Index r = 0; r < 4; ++r) {
        double h = S * zee(f.A, f.y, r);
        for (Index q = 0; q < 4; ++q)
            if (q != r) h -= gram(f.A, r, q) * f.R(q) * 0.5 * (mt[q] + S);
        const double mu = s0.mu(r), V = s0.V(r), e = s0.e(r);
        const double inj = 0.7 * 1.3 * e * (f.R(r) * h - 0.25 * 0.01 * S);
        const double mu1 = mu + (-(1 - pump + 1.3) * mu - 0.01 * mu * mu * mu + inj) * dt +
                           std::sqrt(1.3) * (V - 0.5) * std::sqrt(dt) * xi[r];
        const double V1 = V + (-2 * (1 - pump + 1.3) * V - 6 * 0.01 * mu * mu * V + 1 + 1.3 + 2 * 0.01 * mu * mu -
                               2 * 1.3 * (V - 0.5) * (V - 0.5)) *
                                  dt;
        const double e1 = e * std::exp(-0.8 * (0.01 * mt[r] * mt[r] - 1.1) * dt);
        CHECK(std::abs(st.mu_tilde(r) - mt[r]) < 1e-14 * std::max(1.0, std::abs(mt[r])));
        CHECK(std::abs(st.mu(r) - mu1) < 1e-14 * std::max(1.0, std::abs(mu1)));
        CHECK(std::abs(st.V(r) - V1) < 1e-14);
        CHECK(std::abs(st.e(r) - e1) < 1e-14 * e1);
    }
}

TEST_CASE("positive-p: one step matches a scalar reference") {
    const Frozen f = frozen_n4(0.1);
    SdeParams p = SdeParams::defaults(Model::PositiveP);
    p.g2 = 0.02;
    p.K = 0.5;
    PositivePState st = PositivePState::initial(4);
    st.mu << 0.5, -1.0, 2.0, 0.1;
    st.n << 0.1, 0.2, 0.0, 0.05;
    st.m << 0.3, -0.1, 0.2, 0.0;
    st.e << 1.0, 0.5, 2.0, 1.2;
    st.t = 5.1;
    const PositivePState s0 = st;
    Rng rng(13);
    step_positive_p(st, f.problem, f.R, 0.1, p, rng);

    Rng ref(13);
    const double dt = p.dt();
    const double j = 1.0;
    double xi[4], mt[4];
    for (Index r = 0; r < 4; ++r) {
        xi[r] = ref.normal();
        mt[r] = s0.mu(r) + xi[r] / std::sqrt(4.0 * j * dt);
    }
    const double S = std::sqrt(1.0 / 0.02);
    const double pump = sigmoid_pump(5.1, 1.0, 0.6);
    for (Index r = 0; r < 4; ++r) {
        double h = S * zee(f.A, f.y, r);
        for (Index q = 0; q < 4; ++q)
            if (q != r) h -= gram(f.A, r, q) * f.R(q) * 0.5 * (mt[q] + S);
        const double mu = s0.mu(r), n = s0.n(r), m = s0.m(r), e = s0.e(r);
        const double inj = 0.5 * j * e * (f.R(r) * h - 0.25 * 0.01 * S);
        const double mu1 = mu + (-(1 - pump + j) * mu - 0.02 * mu * (mu * mu + 2 * n + m) + inj) * dt +
                           std::sqrt(j) * (m + n) * std::sqrt(dt) * xi[r];
        const double n1 = n + (-2 * (1 + j) * n + 2 * pump * m - 2 * 0.02 * mu * mu * (2 * n + m) -
                               j * (m + n) * (m + n)) *
                                  dt;
        const double m1 = m + (-2 * (1 + j) * m + 2 * pump * n - 2 * 0.02 * mu * mu * (2 * m + n) + pump -
                               0.02 * (mu * mu + m) - j * (m + n) * (m + n)) *
                                  dt;
        const double e1 = e * std::exp(-(0.02 * mt[r] * mt[r] - 1.0) * dt);
        CHECK(std::abs(st.mu(r) - mu1) < 1e-14 * std::max(1.0, std::abs(mu1)));
        CHECK(std::abs(st.n(r) - n1) < 1e-14);
        CHECK(std::abs(st.m(r) - m1) < 1e-14);
        CHECK(std::abs(st.e(r) - e1) < 1e-14 * e1);
    }
}

TEST_CASE("wigner cac: vacuum variance and balanced error are fixed points") {
    const Frozen f = frozen_n4(0.0);
    SdeParams p = quiet(SdeParams::defaults(Model::WignerCac));
    p.K = 0.0;
    p.p_thr = 0.0;
    p.d = 0.0;
    WignerCacState st = WignerCacState::initial(4);
    Rng rng(3);
    for (int k = 0; k < 10; ++k) step_wigner_cac(st, f.problem, f.R, 0.0, p, rng);
    for (Index r = 0; r < 4; ++r) {
        CHECK(st.V(r) == 0.5);
        CHECK(st.mu(r) == 0.0);
    }

    // μ̃² = τ/g² freezes e
    SdeParams q = quiet(SdeParams::defaults(Model::WignerCac));
    q.K = 0.0;
    WignerCacState s2 = WignerCacState::initial(4);
    s2.mu.setConstant(std::sqrt(q.tau / q.g2));
    s2.e << 1.0, 2.0, 0.5, 3.0;
    const Vector e0 = s2.e;
    step_wigner_cac(s2, f.problem, f.R, 0.0, q, rng);
    for (Index r = 0; r < 4; ++r) CHECK(std::abs(s2.e(r) - e0(r)) < 1e-12 * e0(r));
}

TEST_CASE("positive-p: vacuum fixed point and pumped source term") {
    const Frozen f = frozen_n4(0.0);
    SdeParams p = quiet(SdeParams::defaults(Model::PositiveP));
    p.K = 0.0;
    p.p_thr = 0.0;
    p.d = 0.0;
    PositivePState st = PositivePState::initial(4);
    Rng rng(3);
    for (int k = 0; k < 10; ++k) step_positive_p(st, f.problem, f.R, 0.0, p, rng);
    CHECK(st.mu.isZero(0.0));
    CHECK(st.n.isZero(0.0));
    CHECK(st.m.isZero(0.0));

    SdeParams q = p;
    q.p_thr = 0.7; // d = 0: constant pump 0.7
    PositivePState s2 = PositivePState::initial(4);
    step_positive_p(s2, f.problem, f.R, 0.0, q, rng);
    for (Index r = 0; r < 4; ++r) {
        CHECK(s2.m(r) == doctest::Approx(0.7 * q.dt()).epsilon(1e-14));
        CHECK(s2.n(r) == 0.0);
    }
}

TEST_CASE("cac error variable follows the sign of τ − g²μ̃²") {
    const Frozen f = frozen_n4(0.0);
    for (Model m : {Model::WignerCac, Model::PositiveP}) {
        SdeParams p = quiet(SdeParams::defaults(m));
        p.K = 0.0;
        const double target = std::sqrt(p.tau / p.g2);
        Vector mu(4);
        mu << 0.2 * target, 0.9 * target, 1.1 * target, 3.0 * target;
        const Vector e0 = Vector::Ones(4);
        Rng rng(1);
        Vector e1;
        if (m == Model::WignerCac) {
            WignerCacState st = WignerCacState::initial(4);
            st.mu = mu;
            step_wigner_cac(st, f.problem, f.R, 0.0, p, rng);
            e1 = st.e;
        } else {
            PositivePState st = PositivePState::initial(4);
            st.mu = mu;
            step_positive_p(st, f.problem, f.R, 0.0, p, rng);
            e1 = st.e;
        }
        CHECK(e1(0) > e0(0));
        CHECK(e1(1) > e0(1));
        CHECK(e1(2) < e0(2));
        CHECK(e1(3) < e0(3));
        CHECK((e1.array() > 0.0).all());
    }
}

TEST_CASE("noise-off reduction: both cac models agree while g²μ² is small") {
    const Frozen f = frozen_n4(0.05);
    QuboProblem weak = build_qubo(f.A, 1e-5 * f.y, 0.05);
    SdeParams p = quiet(SdeParams::defaults(Model::WignerCac));
    p.T = 1.0;
    p.steps = 50;
    WignerCacState w = WignerCacState::initial(4);
    PositivePState pp = PositivePState::initial(4);
    Rng r1(1), r2(1);
    double max_g2mu2 = 0.0;
    for (int k = 0; k < p.steps; ++k) {
        step_wigner_cac(w, weak, 0.1 * f.R, 0.0, p, r1);
        step_positive_p(pp, weak, 0.1 * f.R, 0.0, p, r2);
        max_g2mu2 = std::max(max_g2mu2, p.g2 * w.mu.cwiseAbs2().maxCoeff());
        for (Index r = 0; r < 4; ++r) CHECK(std::abs(w.mu(r) - pp.mu(r)) < 1e-6 * std::max(1.0, std::abs(w.mu(r))));
    }
    CHECK(max_g2mu2 < 1e-3);
    CHECK(w.mu.cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("support estimation: identity observation recovers the support") {
    const Index n = 64;
    const Instance base = gen_instance(n, 1.0, 0.3, 0.0, 5);
    const Vector y = base.signal();
    const QuboProblem problem = build_qubo(Matrix::Identity(n, n), y, 0.05);
    for (Model m : {Model::WignerOl, Model::WignerCac, Model::PositiveP}) {
        Index agree = 0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            SdeParams p = SdeParams::defaults(m);
            p.seed = s;
            const Support sigma = cim_support_estimation(m, problem, base.x, 0.05, p).sigma;
            for (Index r = 0; r < n; ++r) agree += sigma(r) == base.xi(r);
        }
        CHECK(static_cast<double>(agree) / (20.0 * n) >= 0.95);
    }
}

TEST_CASE("support estimation: zero data biases the cac readout to 0") {
    const Index n = 50;
    const QuboProblem problem = build_qubo(random_matrix(30, n, 8, 1.0 / std::sqrt(30.0)), Vector::Zero(30), 0.05);
    for (Model m : {Model::WignerCac, Model::PositiveP}) {
        Index ones = 0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            SdeParams p = SdeParams::defaults(m);
            p.seed = s;
            ones += popcount(cim_support_estimation(m, problem, Vector::Zero(n), 0.05, p).sigma);
        }
        CHECK(static_cast<double>(ones) / (20.0 * n) < 0.1);
    }
}

TEST_CASE("support estimation: deterministic, positive error, trace export") {
    const Instance inst = gen_instance(80, 0.6, 0.3, 0.0, 17);
    const QuboProblem problem = build_qubo(inst.A, inst.y, 0.1);
    for (Model m : {Model::WignerOl, Model::WignerCac, Model::PositiveP}) {
        SdeParams p = SdeParams::defaults(m);
        p.seed = 4;
        const SupportEstimate a = cim_support_estimation(m, problem, inst.signal(), 0.1, p, 10);
        const SupportEstimate b = cim_support_estimation(m, problem, inst.signal(), 0.1, p, 10);
        CHECK(a.sigma == b.sigma);
        REQUIRE(a.trace.times.size() == static_cast<std::size_t>(p.steps / 10));
        for (std::size_t k = 0; k < a.trace.amplitude.size(); ++k) CHECK(a.trace.amplitude[k] == b.trace.amplitude[k]);
        if (is_cac(m)) {
            REQUIRE(a.trace.error.size() == a.trace.times.size());
            for (const Vector& e : a.trace.error) CHECK((e.array() > 0.0).all());
        } else {
            CHECK(a.trace.error.empty());
        }
        std::ostringstream csv;
        a.trace.write_csv(csv);
        CHECK(csv.str().rfind("t,r,amplitude,e\n", 0) == 0);
        p.seed = 5;
        const SupportEstimate c = cim_support_estimation(m, problem, inst.signal(), 0.1, p, 10);
        CHECK(c.trace.amplitude.back() != a.trace.amplitude.back());
    }
    SdeParams p = SdeParams::defaults(Model::WignerCac);
    CHECK_THROWS_AS(cim_support_estimation(Model::WignerCac, problem, Vector::Zero(3), 0.1, p), InvalidArgument);
    CHECK_THROWS_AS(cim_support_estimation(Model::WignerCac, problem, inst.x, -0.1, p), InvalidArgument);
}

TEST_CASE("runaway dynamics surface as IntegrationFailure") {
    const Frozen f = frozen_n4(0.1);
    SdeParams p = SdeParams::defaults(Model::WignerOl);
    p.K = 1e300;
    p.noise_on = false;
    WignerOlState st = WignerOlState::initial(4);
    Rng rng(1);
    bool threw = false;
    try {
        for (int k = 0; k < 10; ++k) step_wigner_ol(st, f.problem, 1e10 * f.R, 0.1, p, rng);
    } catch (const IntegrationFailure& ex) {
        threw = true;
        CHECK(ex.step() >= 1);
    }
    CHECK(threw);
}
