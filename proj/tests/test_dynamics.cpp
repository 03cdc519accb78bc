// Copyright 2026 The nlvn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "nlvn/dynamics.hpp"
#include "reference_values.hpp"
#include "test_support.hpp"

namespace nlvn {
namespace {

using testing::diag;
using testing::mat2;
using testing::matrices_near;
using testing::pauli_x;
using testing::pauli_z;
using testing::skewed_qubit;

constexpr Complex kI{0.0, 1.0};

DensityMatrix plus_density() {
    return DensityMatrix(mat2(0.5, 0.5, 0.5, 0.5));
}

DensityMatrix bell_density() {
    ComplexMatrix m = ComplexMatrix::Zero(4, 4);
    m(0, 0) = m(0, 3) = m(3, 0) = m(3, 3) = 0.5;
    return DensityMatrix(m, {2, 2});
}

RealVector spectrum(const ComplexMatrix &m) {
    return hermitian_eig(m).eigenvalues;
}

double max_of(const std::vector<double> &v) {
    double out = 0.0;
    for (double x : v) {
        out = std::max(out, x);
    }
    return out;
}

CompositeSpec two_qubits(const ComplexMatrix &ha, const ComplexMatrix &hb, double q) {
    return CompositeSpec{{{GeneratorSpec::nonlinear(ha, q), 2}, {GeneratorSpec::nonlinear(hb, q), 2}}};
}

//------------------------------------------------------------------------------
// Generators
//------------------------------------------------------------------------------

TEST(GeneratorLinear, StateIndependent) {
    GeneratorSpec spec = GeneratorSpec::linear(pauli_z());
    EXPECT_TRUE(matrices_near(generator_linear(spec, DensityMatrix(skewed_qubit())), pauli_z(), 0.0));
    EXPECT_TRUE(matrices_near(generator_linear(spec, plus_density()), pauli_z(), 0.0));
    GeneratorSpec zero = GeneratorSpec::linear(ComplexMatrix::Zero(2, 2));
    EXPECT_TRUE(matrices_near(generator_linear(zero, plus_density()), ComplexMatrix::Zero(2, 2), 0.0));
}

TEST(GeneratorLinear, DimensionMismatch) {
    EXPECT_THROW(generator_linear(GeneratorSpec::linear(pauli_z()), DensityMatrix(identity(3) / 3.0)),
                 DimensionError);
}

TEST(GeneratorSpec, Validation) {
    EXPECT_THROW(GeneratorSpec::nonlinear(pauli_z(), 0.0), std::invalid_argument);
    EXPECT_THROW(GeneratorSpec::nonlinear(pauli_z(), -1.0), std::invalid_argument);
    EXPECT_THROW(GeneratorSpec::linear(pauli_z(), 0.0), std::invalid_argument);
    EXPECT_THROW(GeneratorSpec::linear(mat2(0, 1, 0, 0)), NotHermitianError);
}

TEST(GeneratorNonlinear, PureStateMotionIsLinear) {
    Rng rng(20);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t d = 2 + static_cast<std::size_t>(trial % 3);
        ComplexMatrix h = random_hermitian(d, rng);
        DensityMatrix psi = density_from_pure(random_pure_state(d, rng));
        for (double q : {0.5, 1.0, 2.0}) {
            Generator nonlinear(GeneratorSpec::nonlinear(h, q));
            Generator linear(GeneratorSpec::linear(h));
            EXPECT_TRUE(matrices_near(motion(nonlinear, psi.matrix()), motion(linear, psi.matrix()), 1e-12));
        }
    }
}

TEST(GeneratorNonlinear, MaximallyMixedIsStationary) {
    DensityMatrix mixed(identity(2) / 2.0);
    Generator gen(GeneratorSpec::nonlinear(pauli_z(), 1.0));
    EXPECT_TRUE(matrices_near(generator_nonlinear(GeneratorSpec::nonlinear(pauli_z(), 1.0), mixed), pauli_z(), 1e-15));
    EXPECT_TRUE(matrices_near(motion(gen, mixed.matrix()), ComplexMatrix::Zero(2, 2), 1e-15));
}

TEST(GeneratorNonlinear, SkewedQubitHandComputed) {
    DensityMatrix rho(skewed_qubit());
    GeneratorSpec spec = GeneratorSpec::nonlinear(pauli_z(), 1.0);
    EXPECT_TRUE(matrices_near(generator_nonlinear(spec, rho), diag({1.5, -0.5}), 1e-15));
    EXPECT_TRUE(matrices_near(motion(Generator(spec), rho.matrix()), mat2(0, -0.5 * kI, 0.5 * kI, 0), 1e-15));
}

TEST(GeneratorNonlinear, HermitianAndNormalizesTrace) {
    Rng rng(21);
    ComplexMatrix h = random_hermitian(3, rng);
    DensityMatrix rho = random_density(3, rng);
    GeneratorSpec spec = GeneratorSpec::nonlinear(h, 0.7);
    ComplexMatrix g = generator_nonlinear(spec, rho);
    EXPECT_LT(hermiticity_defect(g), 1e-14);
    // Scaling the state does not change the generator.
    Generator gen(spec);
    EXPECT_TRUE(matrices_near(gen(rho.matrix() * 1.001), g, 1e-12));
}

TEST(GeneratorNonlinear, RejectsCorruptedState) {
    Generator gen(GeneratorSpec::nonlinear(pauli_z(), 0.5));
    EXPECT_THROW(gen(diag({1.1, -0.1})), NegativeEigenvalueError);
}

TEST(GeneratorComposite, ProductOfPureStatesMovesLinearly) {
    Rng rng(22);
    ComplexMatrix ha = random_hermitian(2, rng);
    ComplexMatrix hb = random_hermitian(3, rng);
    CompositeSpec spec{{{GeneratorSpec::nonlinear(ha, 1.0), 2}, {GeneratorSpec::nonlinear(hb, 1.0), 3}}};
    DensityMatrix rho = product_state(density_from_pure(random_pure_state(2, rng)),
                                      density_from_pure(random_pure_state(3, rng)));
    Generator composite(spec);
    Generator linear(GeneratorSpec::linear(spec.total_hamiltonian()));
    EXPECT_TRUE(matrices_near(motion(composite, rho.matrix()), motion(linear, rho.matrix()), 1e-12));
}

TEST(GeneratorComposite, BellStateWithLocalSigmaZ) {
    CompositeSpec spec = two_qubits(pauli_z(), ComplexMatrix::Zero(2, 2), 1.0);
    ComplexMatrix g = generator_composite(spec, bell_density());
    EXPECT_TRUE(matrices_near(g, tensor_product(pauli_z(), identity(2)), 1e-15));
    // The coherence |00><11| rotates at rate 2: d/dt rho_03 = -i (1 - (-1)) / 2.
    ComplexMatrix rate = motion(Generator(spec), bell_density().matrix());
    EXPECT_NEAR(std::abs(rate(0, 3) - (-kI)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(rate(0, 0)), 0.0, 1e-15);
}

TEST(GeneratorComposite, ZeroHamiltoniansGiveZero) {
    CompositeSpec spec = two_qubits(ComplexMatrix::Zero(2, 2), ComplexMatrix::Zero(2, 2), 2.0);
    EXPECT_TRUE(matrices_near(generator_composite(spec, bell_density()), ComplexMatrix::Zero(4, 4), 0.0));
}

TEST(GeneratorComposite, StructureMismatchAndSpecValidation) {
    CompositeSpec spec = two_qubits(pauli_z(), pauli_x(), 1.0);
    EXPECT_THROW(generator_composite(spec, DensityMatrix(identity(4) / 4.0, {4, 1})), DimensionError);
    EXPECT_THROW(generator_composite(spec, DensityMatrix(identity(6) / 6.0)), DimensionError);
    CompositeSpec one{{{GeneratorSpec::linear(pauli_z()), 2}}};
    EXPECT_THROW(Generator{one}, std::invalid_argument);
    CompositeSpec wrong{{{GeneratorSpec::linear(pauli_z()), 3}, {GeneratorSpec::linear(pauli_z()), 2}}};
    EXPECT_THROW(Generator{wrong}, DimensionError);
    CompositeSpec hbars{{{GeneratorSpec::linear(pauli_z(), 1.0), 2}, {GeneratorSpec::linear(pauli_z(), 2.0), 2}}};
    EXPECT_THROW(Generator{hbars}, std::invalid_argument);
}

TEST(GeneratorComposite, ThreePartsEmbedEachFactor) {
    Rng rng(23);
    std::vector<ComplexMatrix> hs{random_hermitian(2, rng), random_hermitian(2, rng), random_hermitian(2, rng)};
    CompositeSpec spec;
    for (const auto &h : hs) {
        spec.parts.push_back({GeneratorSpec::nonlinear(h, 2.0), 2});
    }
    std::vector<DensityMatrix> factors{random_density(2, rng), random_density(2, rng), random_density(2, rng)};
    DensityMatrix rho = product_state(product_state(factors[0], factors[1]), factors[2]);
    ComplexMatrix expected = ComplexMatrix::Zero(8, 8);
    std::vector<std::size_t> dims{2, 2, 2};
    for (std::size_t k = 0; k < 3; ++k) {
        expected += embed(generator_nonlinear(spec.parts[k].spec, factors[k]), dims, k);
    }
    EXPECT_TRUE(matrices_near(generator_composite(spec, rho), expected, 1e-13));
}

//------------------------------------------------------------------------------
// Steps
//------------------------------------------------------------------------------

TEST(StepUnitaryMidpoint, ZeroGeneratorIsExactIdentity) {
    FunctionGenerator zero{[](const ComplexMatrix &m) { return ComplexMatrix::Zero(m.rows(), m.cols()); }};
    DensityMatrix rho(skewed_qubit());
    EXPECT_TRUE(matrices_near(step_unitary_midpoint(zero, rho, 0.3).matrix(), rho.matrix(), 0.0));
    EXPECT_TRUE(matrices_near(step_unitary_rk4(zero, rho, 0.3).matrix(), rho.matrix(), 0.0));
}

TEST(StepUnitaryMidpoint, ClosedFormQubit) {
    const double dt = 1e-3;
    for (double q : {0.5, 1.0, 2.0}) {
        Generator gen(GeneratorSpec::nonlinear(pauli_z(), q));
        ComplexMatrix rho = step_unitary_midpoint(gen, plus_density(), dt).matrix();
        EXPECT_LT(std::abs(rho(0, 1) - 0.5 * std::exp(-2.0 * kI * dt)), 1e-8) << "q = " << q;
    }
}

TEST(StepUnitaryMidpoint, SpectrumPreserved) {
    Rng rng(24);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t d = 2 + static_cast<std::size_t>(trial % 3);
        Generator gen(GeneratorSpec::nonlinear(random_hermitian(d, rng), 0.5 + 0.5 * (trial % 3)));
        DensityMatrix rho = random_density(d, rng);
        for (auto step : {&unitary_midpoint_step<Generator>, &unitary_rk4_step<Generator>}) {
            ComplexMatrix next = step(gen, rho.matrix(), 0.05);
            EXPECT_LT((spectrum(next) - spectrum(rho.matrix())).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(StepRk4Direct, ZeroGeneratorIsIdentity) {
    FunctionGenerator zero{[](const ComplexMatrix &m) { return ComplexMatrix::Zero(m.rows(), m.cols()); }};
    DensityMatrix rho(skewed_qubit());
    EXPECT_TRUE(matrices_near(step_rk4_direct(zero, rho, 0.3).matrix(), rho.matrix(), 1e-16));
}

TEST(StepUnitaryRk4, ClosedFormQubit) {
    const double dt = 1e-3;
    for (double q : {0.5, 1.0, 2.0}) {
        Generator gen(GeneratorSpec::nonlinear(pauli_z(), q));
        ComplexMatrix rkmk = step_unitary_rk4(gen, plus_density(), dt).matrix();
        EXPECT_LT(std::abs(rkmk(0, 1) - 0.5 * std::exp(-2.0 * kI * dt)), 1e-10) << "q = " << q;
    }
}

TEST(StepRk4Direct, ClosedFormQubitIntegerPowers) {
    // Stages of the explicit scheme leave the rank-one set by O(dt^2), which
    // the fractional powers q < 1 amplify; integer powers stay smooth.
    const double dt = 1e-3;
    for (double q : {1.0, 2.0}) {
        Generator gen(GeneratorSpec::nonlinear(pauli_z(), q));
        ComplexMatrix rho = step_rk4_direct(gen, plus_density(), dt).matrix();
        EXPECT_LT(std::abs(rho(0, 1) - 0.5 * std::exp(-2.0 * kI * dt)), 1e-10) << "q = " << q;
    }
}

TEST(StepRk4Direct, AgreesWithMidpointOnOneStep) {
    Generator gen(GeneratorSpec::nonlinear(pauli_z(), 1.0));
    DensityMatrix rho(skewed_qubit());
    DensityMatrix a = step_rk4_direct(gen, rho, 1e-3);
    DensityMatrix b = step_unitary_midpoint(gen, rho, 1e-3);
    EXPECT_LT(trace_norm_distance(a, b), 1e-8);
}

TEST(StepRk4Direct, OversizedStepIsRejected) {
    // A rank-one state leaves the PSD cone under a large explicit step.
    Generator gen(GeneratorSpec::nonlinear(pauli_x() * 20.0, 2.0));
    DensityMatrix rho(diag({1, 0}));
    EXPECT_THROW(step_rk4_direct(gen, rho, 0.5), StepError);
}

//------------------------------------------------------------------------------
// Trajectories
//------------------------------------------------------------------------------

TEST(IntegratorConfig, Validation) {
    EXPECT_THROW((IntegratorConfig{Scheme::unitary_rk4, 0.0, 1.0, 1}.validate()), std::invalid_argument);
    EXPECT_THROW((IntegratorConfig{Scheme::unitary_rk4, 2.0, 1.0, 1}.validate()), std::invalid_argument);
    EXPECT_THROW((IntegratorConfig{Scheme::unitary_rk4, 0.1, 1.0, 0}.validate()), std::invalid_argument);
    EXPECT_THROW((IntegratorConfig{Scheme::unitary_rk4, 0.1, -1.0, 1}.validate()), std::invalid_argument);
    EXPECT_NO_THROW(IntegratorConfig{}.validate());
}

TEST(Scheme, ParseRoundTrip) {
    for (Scheme s : {Scheme::unitary_midpoint, Scheme::unitary_rk4, Scheme::rk4_direct}) {
        EXPECT_EQ(parse_scheme(to_string(s)), s);
    }
    EXPECT_FALSE(parse_scheme("euler").has_value());
}

TEST(Evolve, SamplingGridAndTracks) {
    IntegratorConfig cfg{Scheme::unitary_rk4, 0.01, 1.0, 7};
    Trajectory traj = evolve(GeneratorSpec::nonlinear(pauli_z(), 2.0), DensityMatrix(skewed_qubit()), cfg);
    // t = 0, 14 full strides of 7 steps, and the final step 100.
    ASSERT_EQ(traj.size(), 16u);
    EXPECT_EQ(traj.times.front(), 0.0);
    EXPECT_NEAR(traj.times.back(), 1.0, 1e-12);
    for (std::size_t i = 1; i < traj.size(); ++i) {
        EXPECT_GT(traj.times[i], traj.times[i - 1]);
    }
    for (const char *name : {"trace", "purity", "energy", "entropy"}) {
        ASSERT_TRUE(traj.tracks.count(name)) << name;
        EXPECT_EQ(traj.tracks.at(name).size(), traj.size()) << name;
    }
    EXPECT_NEAR(traj.tracks.at("purity").front(), 0.75, 1e-15);
}

TEST(Evolve, StationaryMaximallyMixedState) {
    Rng rng(25);
    ComplexMatrix h = random_hermitian(3, rng);
    DensityMatrix rho0(identity(3) / 3.0);
    for (Scheme scheme : {Scheme::unitary_midpoint, Scheme::unitary_rk4, Scheme::rk4_direct}) {
        Trajectory traj = evolve(GeneratorSpec::nonlinear(h, 0.5), rho0, {scheme, 1e-2, 2.0, 10});
        for (const auto &s : traj.states) {
            EXPECT_TRUE(matrices_near(s.matrix(), rho0.matrix(), 1e-10));
        }
    }
}

TEST(Evolve, PureStateNonlinearMatchesLinear) {
    Rng rng(26);
    ComplexMatrix h = random_hermitian(3, rng);
    DensityMatrix psi = density_from_pure(random_pure_state(3, rng));
    IntegratorConfig cfg{Scheme::unitary_rk4, 1e-3, 10.0, 100};
    Trajectory linear = evolve(GeneratorSpec::linear(h), psi, cfg);
    for (double q : {0.5, 2.0}) {
        Trajectory nonlinear = evolve(GeneratorSpec::nonlinear(h, q), psi, cfg);
        EXPECT_LT(max_of(trajectory_distance(nonlinear, linear)), 1e-8) << "q = " << q;
    }
}

// Mixed qubit [[0.75, 0.25], [0.25, 0.25]] under sigma_z. For a qubit,
// H r + r H = H + (terms commuting with r), so q = 1 coincides with the linear
// evolution; q = 2 rescales the rotation rate and separates.
TEST(Evolve, MixedQubitAgainstFineStepReference) {
    IntegratorConfig cfg{Scheme::unitary_rk4, 1e-3, 1.0, 10};
    DensityMatrix rho0(skewed_qubit());
    Trajectory linear = evolve(GeneratorSpec::linear(pauli_z()), rho0, cfg);

    double q1 = max_of(trajectory_distance(evolve(GeneratorSpec::nonlinear(pauli_z(), 1.0), rho0, cfg), linear));
    EXPECT_NEAR(q1, reference::kMixedQubitSzQ1, 1e-10);

    double q2 = max_of(trajectory_distance(evolve(GeneratorSpec::nonlinear(pauli_z(), 2.0), rho0, cfg), linear));
    EXPECT_NEAR(q2, reference::kMixedQubitSzQ2, reference::kOracleAgreement);
    EXPECT_GT(q2, 0.01);
}

TEST(Evolve, StructurePreservedForRankDeficientFractionalPower) {
    Rng rng(27);
    ComplexMatrix h = random_hermitian(3, rng);
    DensityMatrix rho0 = random_density(3, rng, 2);
    Trajectory traj = evolve(GeneratorSpec::nonlinear(h, 0.5), rho0, {Scheme::unitary_rk4, 1e-3, 5.0, 100});
    RealVector s0 = spectrum(rho0.matrix());
    double e0 = traj.tracks.at("energy").front();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const ComplexMatrix &m = traj.states[i].matrix();
        EXPECT_LT(std::abs(m.trace().real() - 1.0), 1e-10);
        EXPECT_LT((spectrum(m) - s0).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT(std::abs(traj.tracks.at("energy")[i] - e0), 1e-8);
    }
}

TEST(Evolve, SchemesConvergeAtTheirOrders) {
    Rng rng(28);
    ComplexMatrix h = random_hermitian(3, rng);
    DensityMatrix rho0 = random_density(3, rng);
    GeneratorSpec spec = GeneratorSpec::nonlinear(h, 2.0);
    const double t = 1.0;
    DensityMatrix reference = evolve(spec, rho0, {Scheme::rk4_direct, 2e-4, t, 5000}).states.back();
    auto error = [&](Scheme scheme, double dt) {
        return trace_norm_distance(evolve(spec, rho0, {scheme, dt, t, 1000}).states.back(), reference);
    };
    double mid = error(Scheme::unitary_midpoint, 0.02) / error(Scheme::unitary_midpoint, 0.01);
    double rk4 = error(Scheme::rk4_direct, 0.02) / error(Scheme::rk4_direct, 0.01);
    double rkmk = error(Scheme::unitary_rk4, 0.02) / error(Scheme::unitary_rk4, 0.01);
    EXPECT_GE(mid, 3.5);
    EXPECT_LE(mid, 4.5);
    EXPECT_GE(rk4, 12.0);
    EXPECT_LE(rk4, 20.0);
    EXPECT_GE(rkmk, 12.0);
    EXPECT_LE(rkmk, 20.0);
}

TEST(Evolve, CompositeProductStaysProduct) {
    Rng rng(29);
    ComplexMatrix ha = random_hermitian(2, rng);
    ComplexMatrix hb = random_hermitian(2, rng);
    CompositeSpec spec = two_qubits(ha, hb, 2.0);
    DensityMatrix a = random_density(2, rng);
    DensityMatrix b = random_density(2, rng);
    IntegratorConfig cfg{Scheme::unitary_rk4, 1e-3, 2.0, 100};
    Trajectory total = evolve(spec, product_state(a, b), cfg);
    Trajectory local_a = evolve(spec.parts[0].spec, a, cfg);
    Trajectory local_b = evolve(spec.parts[1].spec, b, cfg);
    for (std::size_t i = 0; i < total.size(); ++i) {
        EXPECT_LT(trace_norm_distance(reduced_state(total.states[i], 0), local_a.states[i]), 1e-9);
        ComplexMatrix product = tensor_product(local_a.states[i].matrix(), local_b.states[i].matrix());
        EXPECT_LT(trace_norm_distance(total.states[i].matrix(), product), 1e-9);
    }
    EXPECT_EQ(total.states.back().structure(), (std::vector<std::size_t>{2, 2}));
}

TEST(Evolve, CompositeEnergyUsesTotalHamiltonian) {
    CompositeSpec spec = two_qubits(pauli_z(), pauli_x(), 2.0);
    Trajectory traj = evolve(spec, bell_density(), {Scheme::unitary_rk4, 1e-2, 0.5, 10});
    ComplexMatrix h = spec.total_hamiltonian();
    EXPECT_NEAR(traj.tracks.at("energy").back(), (h * traj.states.back().matrix()).trace().real(), 1e-14);
}

TEST(Evolve, StepFailureCarriesTime) {
    Generator gen(GeneratorSpec::nonlinear(pauli_x() * 20.0, 2.0));
    try {
        evolve(gen, DensityMatrix(diag({1, 0})), {Scheme::rk4_direct, 0.5, 2.0, 1});
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError &e) {
        EXPECT_GE(e.time(), 0.0);
        EXPECT_LT(e.time(), 2.0);
    }
}

TEST(Evolve, RejectsDimensionMismatch) {
    EXPECT_THROW(evolve(GeneratorSpec::linear(pauli_z()), DensityMatrix(identity(3) / 3.0), IntegratorConfig{}),
                 DimensionError);
}

TEST(Evolve, LinearSchemesShareTheExactPropagator) {
    // State-independent generators evolve by one cached exponential; the
    // result is the same for both unitary schemes.
    Rng rng(30);
    ComplexMatrix h = random_hermitian(2, rng);
    DensityMatrix rho0 = random_density(2, rng);
    IntegratorConfig a{Scheme::unitary_rk4, 1e-2, 1.0, 10};
    IntegratorConfig b{Scheme::unitary_midpoint, 1e-2, 1.0, 10};
    Trajectory ta = evolve(GeneratorSpec::linear(h), rho0, a);
    Trajectory tb = evolve(GeneratorSpec::linear(h), rho0, b);
    EXPECT_LT(max_of(trajectory_distance(ta, tb)), 1e-15);
    ComplexMatrix exact = conjugate(unitary_exponential(h, 1.0), rho0.matrix());
    EXPECT_TRUE(matrices_near(ta.states.back().matrix(), exact, 1e-13));
}

}  // namespace
}  // namespace nlvn
