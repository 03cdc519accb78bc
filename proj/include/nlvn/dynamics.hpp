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

#pragma once

// Generators and time integration for
//
//     i hbar d(rho)/dt = [G(rho), rho],   G(rho) = H rho^q + rho^q H,
//
// with rho^q taken on the trace-normalized state, plus the linear case
// G = H and the composite rule G = sum_k embed_k(G_k(Tr_{!k} rho)) for
// noninteracting subsystems. Every scheme except rk4_direct advances the
// state by a unitary conjugation, so spectra are conserved to round-off.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nlvn/matrix_core.hpp"
#include "nlvn/quantum_states.hpp"

namespace nlvn {

enum class GeneratorKind { linear, nonlinear };

inline std::string_view to_string(GeneratorKind kind) {
    return kind == GeneratorKind::linear ? "linear" : "nonlinear";
}

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::linear;
    double q = 1.0;  // ignored for linear generators
    ComplexMatrix hamiltonian;
    double hbar = 1.0;

    static GeneratorSpec linear(ComplexMatrix h, double hbar = 1.0) {
        GeneratorSpec s{GeneratorKind::linear, 1.0, std::move(h), hbar};
        s.validate();
        return s;
    }
    static GeneratorSpec nonlinear(ComplexMatrix h, double q, double hbar = 1.0) {
        GeneratorSpec s{GeneratorKind::nonlinear, q, std::move(h), hbar};
        s.validate();
        return s;
    }

    std::size_t dim() const {
        return nlvn::dim(hamiltonian);
    }

    void validate() const {
        require_hermitian(hamiltonian, "hamiltonian");
        if (!(q > 0.0) || !std::isfinite(q)) {
            throw std::invalid_argument("q must be > 0");
        }
        if (!(hbar > 0.0) || !std::isfinite(hbar)) {
            throw std::invalid_argument("hbar must be > 0");
        }
    }
};

struct CompositePart {
    GeneratorSpec spec;
    std::size_t dim;
};

/// Noninteracting subsystems, one local generator each.
struct CompositeSpec {
    std::vector<CompositePart> parts;

    void validate() const {
        if (parts.size() < 2) {
            throw std::invalid_argument("composite spec needs at least two parts");
        }
        for (std::size_t k = 0; k < parts.size(); ++k) {
            parts[k].spec.validate();
            if (parts[k].spec.dim() != parts[k].dim) {
                throw DimensionError("composite part " + std::to_string(k) + ": hamiltonian dim " +
                                     std::to_string(parts[k].spec.dim()) + " does not match declared dim " +
                                     std::to_string(parts[k].dim));
            }
            if (parts[k].spec.hbar != parts.front().spec.hbar) {
                throw std::invalid_argument("composite parts must share one hbar");
            }
        }
    }

    std::vector<std::size_t> dims() const {
        std::vector<std::size_t> out;
        for (const auto &p : parts) {
            out.push_back(p.dim);
        }
        return out;
    }

    std::size_t dim() const {
        return product_of(dims());
    }

    double hbar() const {
        return parts.front().spec.hbar;
    }

    /// sum_k embed_k(H_k): the noninteracting linear Hamiltonian.
    ComplexMatrix total_hamiltonian() const {
        const auto d = dims();
        ComplexMatrix h = ComplexMatrix::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
        for (std::size_t k = 0; k < parts.size(); ++k) {
            h += embed(parts[k].spec.hamiltonian, d, k);
        }
        return h;
    }

    /// Same Hamiltonians, every part switched to the linear generator.
    CompositeSpec linearized() const {
        CompositeSpec out = *this;
        for (auto &p : out.parts) {
            p.spec.kind = GeneratorKind::linear;
        }
        return out;
    }
};

/// Where a generator is evaluated. Unitary schemes only ever see genuine
/// states. The direct RK4 oracle evaluates at Runge-Kutta stage points,
/// which are Hermitian but may carry small negative eigenvalues; there the
/// matrix power is the polynomial for integer q and clips negatives for
/// fractional q.
enum class PowerDomain { state, stage };

namespace detail {

inline ComplexMatrix normalized_power(const ComplexMatrix &rho, double q, PowerDomain domain) {
    double trace = rho.trace().real();
    if (!(trace > 0.0) || !std::isfinite(trace)) {
        throw InvalidStateError("generator: state has non-positive trace " + std::to_string(trace));
    }
    ComplexMatrix normalized = rho / trace;
    if (domain == PowerDomain::state) {
        return hermitian_power(normalized, q);
    }
    EigDecomposition eig = hermitian_eig(normalized);
    const bool integer_power = q == std::floor(q);
    return spectral_map(eig, [q, integer_power](double lambda) {
        if (integer_power) {
            return std::pow(lambda, q);
        }
        return lambda > 0.0 ? std::pow(lambda, q) : 0.0;
    });
}

inline ComplexMatrix local_generator(const GeneratorSpec &spec, const ComplexMatrix &rho, PowerDomain domain) {
    if (dim(rho) != spec.dim()) {
        throw DimensionError("generator: state dim " + std::to_string(dim(rho)) + " does not match hamiltonian dim " +
                             std::to_string(spec.dim()));
    }
    if (spec.kind == GeneratorKind::linear) {
        return spec.hamiltonian;
    }
    ComplexMatrix power = normalized_power(rho, spec.q, domain);
    ComplexMatrix g = spec.hamiltonian * power;
    return g + g.adjoint();  // H P + P H for Hermitian H, P
}

inline ComplexMatrix composite_generator(const CompositeSpec &spec, const ComplexMatrix &rho, PowerDomain domain) {
    const auto dims = spec.dims();
    if (product_of(dims) != dim(rho)) {
        throw DimensionError("composite generator: state dim " + std::to_string(dim(rho)) +
                             " does not match parts product " + std::to_string(product_of(dims)));
    }
    ComplexMatrix g = ComplexMatrix::Zero(rho.rows(), rho.cols());
    for (std::size_t k = 0; k < spec.parts.size(); ++k) {
        ComplexMatrix reduced = partial_trace(rho, dims, k);
        g += embed(local_generator(spec.parts[k].spec, reduced, domain), dims, k);
    }
    return g;
}

inline void require_structure(const DensityMatrix &rho, const std::vector<std::size_t> &dims) {
    if (rho.has_structure() && rho.structure() != dims) {
        throw DimensionError("state structure does not match the composite parts");
    }
    if (product_of(dims) != rho.dim()) {
        throw DimensionError("state dim does not match the composite parts");
    }
}

}  // namespace detail

/// G = H, independent of the state.
inline ComplexMatrix generator_linear(const GeneratorSpec &spec, const DensityMatrix &rho) {
    GeneratorSpec linear = spec;
    linear.kind = GeneratorKind::linear;
    return detail::local_generator(linear, rho.matrix(), PowerDomain::state);
}

/// G = H r^q + r^q H with r = rho / Tr rho.
inline ComplexMatrix generator_nonlinear(const GeneratorSpec &spec, const DensityMatrix &rho) {
    GeneratorSpec nonlinear = spec;
    nonlinear.kind = GeneratorKind::nonlinear;
    return detail::local_generator(nonlinear, rho.matrix(), PowerDomain::state);
}

/// sum_k embed_k(G_k(Tr_{!k} rho)), each local generator on its reduced state.
inline ComplexMatrix generator_composite(const CompositeSpec &spec, const DensityMatrix &rho_total) {
    spec.validate();
    detail::require_structure(rho_total, spec.dims());
    return detail::composite_generator(spec, rho_total.matrix(), PowerDomain::state);
}

/// Type-erased right-hand side: a single-system spec or a composite spec.
class Generator {
   public:
    explicit Generator(GeneratorSpec spec) : spec_(std::move(spec)) {
        std::get<GeneratorSpec>(spec_).validate();
    }
    explicit Generator(CompositeSpec spec) : spec_(std::move(spec)) {
        std::get<CompositeSpec>(spec_).validate();
    }

    ComplexMatrix operator()(const ComplexMatrix &rho, PowerDomain domain = PowerDomain::state) const {
        if (const auto *single = std::get_if<GeneratorSpec>(&spec_)) {
            return detail::local_generator(*single, rho, domain);
        }
        return detail::composite_generator(std::get<CompositeSpec>(spec_), rho, domain);
    }

    double hbar() const {
        if (const auto *single = std::get_if<GeneratorSpec>(&spec_)) {
            return single->hbar;
        }
        return std::get<CompositeSpec>(spec_).hbar();
    }

    std::size_t dim() const {
        if (const auto *single = std::get_if<GeneratorSpec>(&spec_)) {
            return single->dim();
        }
        return std::get<CompositeSpec>(spec_).dim();
    }

    /// Subsystem dims for composites, empty otherwise.
    std::vector<std::size_t> structure() const {
        if (const auto *composite = std::get_if<CompositeSpec>(&spec_)) {
            return composite->dims();
        }
        return {};
    }

    bool state_independent() const {
        if (const auto *single = std::get_if<GeneratorSpec>(&spec_)) {
            return single->kind == GeneratorKind::linear;
        }
        for (const auto &p : std::get<CompositeSpec>(spec_).parts) {
            if (p.spec.kind != GeneratorKind::linear) {
                return false;
            }
        }
        return true;
    }

    /// Total Hamiltonian used for the energy track.
    ComplexMatrix hamiltonian() const {
        if (const auto *single = std::get_if<GeneratorSpec>(&spec_)) {
            return single->hamiltonian;
        }
        return std::get<CompositeSpec>(spec_).total_hamiltonian();
    }

    const std::variant<GeneratorSpec, CompositeSpec> &spec() const {
        return spec_;
    }

   private:
    std::variant<GeneratorSpec, CompositeSpec> spec_;
};

/// Anything the steppers can integrate: G(rho, domain) plus hbar.
template <class G>
concept GeneratorFunction = requires(const G &g, const ComplexMatrix &m) {
    { g(m, PowerDomain::state) } -> std::convertible_to<ComplexMatrix>;
    { g.hbar() } -> std::convertible_to<double>;
};

/// Adapter for ad-hoc generator callables in tests and tools.
struct FunctionGenerator {
    std::function<ComplexMatrix(const ComplexMatrix &)> fn;
    double planck = 1.0;

    ComplexMatrix operator()(const ComplexMatrix &rho, PowerDomain = PowerDomain::state) const {
        return fn(rho);
    }
    double hbar() const {
        return planck;
    }
};

class StepError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// d(rho)/dt = -i [G(rho), rho] / hbar.
template <GeneratorFunction G>
ComplexMatrix motion(const G &gen, const ComplexMatrix &rho, PowerDomain domain = PowerDomain::state) {
    const Complex factor(0.0, -1.0 / gen.hbar());
    return factor * commutator(gen(rho, domain), rho);
}

namespace detail {

/// exp(-i k) rho exp(i k) for Hermitian k.
inline ComplexMatrix conjugate_by_exponent(const ComplexMatrix &k, const ComplexMatrix &rho) {
    return symmetrize(conjugate(unitary_exponential(k, 1.0), rho));
}

}  // namespace detail

/// Exponential midpoint: predictor with the half-step propagator of G(rho),
/// corrector with the full-step propagator of G(rho_mid). Second order.
template <GeneratorFunction G>
ComplexMatrix unitary_midpoint_step(const G &gen, const ComplexMatrix &rho, double dt) {
    const double s = dt / gen.hbar();
    ComplexMatrix half = unitary_exponential(gen(rho, PowerDomain::state), 0.5 * s);
    ComplexMatrix mid = symmetrize(conjugate(half, rho));
    ComplexMatrix full = unitary_exponential(gen(mid, PowerDomain::state), s);
    return symmetrize(conjugate(full, rho));
}

/// Munthe-Kaas Runge-Kutta of order four on the unitary group. With
/// F_j = (dt/hbar) G(stage_j) the stages and the update are conjugations:
///
///   stage_2 = exp(-i F1/2)                      . rho
///   stage_3 = exp(-i (F2/2 + i/8 [F1, F2]))      . rho
///   stage_4 = exp(-i F3)                        . rho
///   rho'    = exp(-i ((F1 + 2F2 + 2F3 + F4)/6 + i/12 [F1, F4])) . rho
///
/// Every stage is isospectral with rho, so rank-deficient (including pure)
/// states never leave their orbit.
template <GeneratorFunction G>
ComplexMatrix unitary_rk4_step(const G &gen, const ComplexMatrix &rho, double dt) {
    const double s = dt / gen.hbar();
    const Complex i_unit(0.0, 1.0);
    ComplexMatrix f1 = s * gen(rho, PowerDomain::state);
    ComplexMatrix f2 = s * gen(detail::conjugate_by_exponent(0.5 * f1, rho), PowerDomain::state);
    ComplexMatrix k3 = 0.5 * f2 + (i_unit / 8.0) * commutator(f1, f2);
    ComplexMatrix f3 = s * gen(detail::conjugate_by_exponent(symmetrize(k3), rho), PowerDomain::state);
    ComplexMatrix f4 = s * gen(detail::conjugate_by_exponent(f3, rho), PowerDomain::state);
    ComplexMatrix k = (f1 + 2.0 * f2 + 2.0 * f3 + f4) / 6.0 + (i_unit / 12.0) * commutator(f1, f4);
    return detail::conjugate_by_exponent(symmetrize(k), rho);
}

/// Classical RK4 on d(rho)/dt = -i [G(rho), rho] / hbar, then symmetrized and
/// trace-renormalized. Independent of the propagator structure; used as an
/// oracle for the unitary schemes.
template <GeneratorFunction G>
ComplexMatrix rk4_direct_step(const G &gen, const ComplexMatrix &rho, double dt) {
    auto stage = [&](const ComplexMatrix &m) {
        // An oversized step lets the stage states grow without bound; the
        // powers then overflow inside motion().
        try {
            if (m.allFinite()) {
                ComplexMatrix k = motion(gen, m, PowerDomain::stage);
                if (k.allFinite()) {
                    return k;
                }
            }
        } catch (const std::invalid_argument &) {
            if (m.allFinite() && m.cwiseAbs().maxCoeff() <= 1.0 / kEigenClipTolerance) {
                throw;
            }
        }
        throw StepError("rk4_direct: stage overflowed (dt too large)");
    };
    ComplexMatrix k1 = stage(rho);
    ComplexMatrix k2 = stage(symmetrize(rho + 0.5 * dt * k1));
    ComplexMatrix k3 = stage(symmetrize(rho + 0.5 * dt * k2));
    ComplexMatrix k4 = stage(symmetrize(rho + dt * k3));
    ComplexMatrix next = symmetrize(rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    const double trace = next.trace().real();
    if (!next.allFinite() || !(std::abs(trace - 1.0) < 0.5)) {
        throw StepError("rk4_direct: step overflowed (dt too large)");
    }
    next /= trace;
    EigDecomposition eig = hermitian_eig(next);
    if (eig.eigenvalues(0) < -kEigenClipTolerance) {
        throw StepError("rk4_direct: step produced eigenvalue " + std::to_string(eig.eigenvalues(0)) +
                        " (dt too large)");
    }
    return next;
}

template <GeneratorFunction G>
DensityMatrix step_unitary_midpoint(const G &gen, const DensityMatrix &rho, double dt) {
    return DensityMatrix(unitary_midpoint_step(gen, rho.matrix(), dt), rho.structure());
}

template <GeneratorFunction G>
DensityMatrix step_unitary_rk4(const G &gen, const DensityMatrix &rho, double dt) {
    return DensityMatrix(unitary_rk4_step(gen, rho.matrix(), dt), rho.structure());
}

template <GeneratorFunction G>
DensityMatrix step_rk4_direct(const G &gen, const DensityMatrix &rho, double dt) {
    return DensityMatrix(rk4_direct_step(gen, rho.matrix(), dt), rho.structure());
}

//------------------------------------------------------------------------------
// Trajectories
//------------------------------------------------------------------------------

enum class Scheme { unitary_midpoint, unitary_rk4, rk4_direct };

inline std::string_view to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::unitary_midpoint:
            return "unitary_midpoint";
        case Scheme::unitary_rk4:
            return "unitary_rk4";
        case Scheme::rk4_direct:
            return "rk4_direct";
    }
    return "unknown";
}

inline std::optional<Scheme> parse_scheme(std::string_view name) {
    for (Scheme s : {Scheme::unitary_midpoint, Scheme::unitary_rk4, Scheme::rk4_direct}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    return std::nullopt;
}

struct IntegratorConfig {
    Scheme scheme = Scheme::unitary_rk4;
    double dt = 1e-3;
    double t_final = 10.0;
    std::size_t sample_every = 10;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw std::invalid_argument("dt must be > 0");
        }
        if (!(t_final > 0.0) || !std::isfinite(t_final)) {
            throw std::invalid_argument("t_final must be > 0");
        }
        if (dt > t_final) {
            throw std::invalid_argument("dt must be <= t_final");
        }
        if (sample_every < 1) {
            throw std::invalid_argument("sample_every must be >= 1");
        }
    }

    std::size_t steps() const {
        return static_cast<std::size_t>(std::llround(t_final / dt));
    }

    bool operator==(const IntegratorConfig &) const = default;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    std::map<std::string, std::vector<double>> tracks;  // trace, purity, energy, entropy

    std::size_t size() const {
        return times.size();
    }
};

/// A step failed; carries the start time of the failing step.
class IntegrationError : public std::runtime_error {
   public:
    IntegrationError(double time, const std::string &what)
        : std::runtime_error("integration failed at t = " + std::to_string(time) + ": " + what), time_(time) {
    }
    double time() const noexcept {
        return time_;
    }

   private:
    double time_;
};

namespace detail {

template <GeneratorFunction G>
ComplexMatrix advance(Scheme scheme, const G &gen, const ComplexMatrix &rho, double dt) {
    switch (scheme) {
        case Scheme::unitary_midpoint:
            return unitary_midpoint_step(gen, rho, dt);
        case Scheme::unitary_rk4:
            return unitary_rk4_step(gen, rho, dt);
        case Scheme::rk4_direct:
            return rk4_direct_step(gen, rho, dt);
    }
    throw std::logic_error("unknown scheme");
}

}  // namespace detail

/// Fixed-step integration from t = 0 to t_final, sampling rho0, every
/// sample_every-th step and the final step.
inline Trajectory evolve(const Generator &gen, const DensityMatrix &rho0, const IntegratorConfig &cfg) {
    cfg.validate();
    if (rho0.dim() != gen.dim()) {
        throw DimensionError("evolve: initial state dim " + std::to_string(rho0.dim()) +
                             " does not match generator dim " + std::to_string(gen.dim()));
    }
    std::vector<std::size_t> structure = gen.structure();
    if (structure.empty()) {
        structure = rho0.structure();
    } else {
        detail::require_structure(rho0, structure);
    }
    const ComplexMatrix hamiltonian = gen.hamiltonian();

    Trajectory traj;
    auto record = [&](double t, const ComplexMatrix &m) {
        try {
            DensityMatrix state(m, structure);
            traj.times.push_back(t);
            traj.tracks["trace"].push_back(state.matrix().trace().real());
            traj.tracks["purity"].push_back(purity(state));
            traj.tracks["energy"].push_back((hamiltonian * state.matrix()).trace().real());
            traj.tracks["entropy"].push_back(von_neumann_entropy(state));
            traj.states.push_back(std::move(state));
        } catch (const std::exception &e) {
            throw IntegrationError(t, e.what());
        }
    };

    // A state-independent generator has one fixed propagator, which every
    // unitary scheme reproduces exactly.
    std::optional<ComplexMatrix> fixed_propagator;
    if (gen.state_independent() && cfg.scheme != Scheme::rk4_direct) {
        fixed_propagator = unitary_exponential(hamiltonian, cfg.dt / gen.hbar());
    }

    ComplexMatrix rho = rho0.matrix();
    record(0.0, rho);
    const std::size_t steps = cfg.steps();
    for (std::size_t k = 1; k <= steps; ++k) {
        try {
            rho = fixed_propagator ? symmetrize(conjugate(*fixed_propagator, rho))
                                   : detail::advance(cfg.scheme, gen, rho, cfg.dt);
        } catch (const std::exception &e) {
            throw IntegrationError(static_cast<double>(k - 1) * cfg.dt, e.what());
        }
        if (k % cfg.sample_every == 0 || k == steps) {
            record(static_cast<double>(k) * cfg.dt, rho);
        }
    }
    return traj;
}

inline Trajectory evolve(const GeneratorSpec &spec, const DensityMatrix &rho0, const IntegratorConfig &cfg) {
    return evolve(Generator(spec), rho0, cfg);
}

inline Trajectory evolve(const CompositeSpec &spec, const DensityMatrix &rho0, const IntegratorConfig &cfg) {
    return evolve(Generator(spec), rho0, cfg);
}

/// Samplewise trace distance between two trajectories on the same grid.
inline std::vector<double> trajectory_distance(const Trajectory &a, const Trajectory &b) {
    if (a.times != b.times) {
        throw std::invalid_argument("trajectory_distance: trajectories are sampled on different grids");
    }
    std::vector<double> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.push_back(trace_norm_distance(a.states[i], b.states[i]));
    }
    return out;
}

}  // namespace nlvn
