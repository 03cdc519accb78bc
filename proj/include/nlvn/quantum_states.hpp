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

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nlvn/matrix_core.hpp"

namespace nlvn {

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-10;
inline constexpr double kWeightTolerance = 1e-12;

class InvalidStateError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Unit-norm pure state.
class StateVector {
   public:
    explicit StateVector(ComplexVector amplitudes) : amplitudes_(std::move(amplitudes)) {
        if (amplitudes_.size() == 0) {
            throw InvalidStateError("state vector must have dim >= 1");
        }
        if (!amplitudes_.allFinite()) {
            throw InvalidStateError("state vector has non-finite amplitudes");
        }
        double norm = amplitudes_.norm();
        if (std::abs(norm - 1.0) > kNormTolerance) {
            throw InvalidStateError("state vector is not normalized (norm = " + std::to_string(norm) + ")");
        }
    }

    /// Scales any nonzero vector to unit norm.
    static StateVector normalized(const ComplexVector &v) {
        double norm = v.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw InvalidStateError("cannot normalize a zero or non-finite vector");
        }
        return StateVector(v / norm);
    }

    std::size_t dim() const {
        return static_cast<std::size_t>(amplitudes_.size());
    }
    const ComplexVector &amplitudes() const {
        return amplitudes_;
    }

   private:
    ComplexVector amplitudes_;
};

/// Hermitian, PSD, unit-trace matrix, optionally tagged with subsystem dims.
/// The stored matrix is the symmetrized input.
class DensityMatrix {
   public:
    explicit DensityMatrix(const ComplexMatrix &m, std::vector<std::size_t> structure = {})
        : matrix_(symmetrize(m)), structure_(std::move(structure)) {
        require_hermitian(m, "density matrix");
        double trace = matrix_.trace().real();
        if (std::abs(trace - 1.0) > kTraceTolerance) {
            throw InvalidStateError("density matrix trace is " + std::to_string(trace) + ", expected 1");
        }
        EigDecomposition eig = hermitian_eig(matrix_);
        if (eig.eigenvalues(0) < -kEigenClipTolerance) {
            throw InvalidStateError("density matrix has negative eigenvalue " + std::to_string(eig.eigenvalues(0)));
        }
        check_structure();
    }

    std::size_t dim() const {
        return nlvn::dim(matrix_);
    }
    const ComplexMatrix &matrix() const {
        return matrix_;
    }
    const std::vector<std::size_t> &structure() const {
        return structure_;
    }
    bool has_structure() const {
        return !structure_.empty();
    }

    DensityMatrix with_structure(std::vector<std::size_t> structure) const {
        DensityMatrix out = *this;
        out.structure_ = std::move(structure);
        out.check_structure();
        return out;
    }

   private:
    void check_structure() const {
        if (!structure_.empty() && product_of(structure_) != dim()) {
            throw InvalidStateError("density matrix structure does not multiply to its dim " + std::to_string(dim()));
        }
    }

    ComplexMatrix matrix_;
    std::vector<std::size_t> structure_;
};

struct MixtureMember {
    double weight;
    StateVector state;
};

/// Probabilistic mixture {p_i, |psi_i>}.
class EnsembleMixture {
   public:
    explicit EnsembleMixture(std::vector<MixtureMember> members) : members_(std::move(members)) {
        if (members_.empty()) {
            throw InvalidStateError("mixture must have at least one member");
        }
        double total = 0.0;
        for (const auto &m : members_) {
            if (!(m.weight >= 0.0) || !std::isfinite(m.weight)) {
                throw InvalidStateError("mixture weights must be finite and >= 0");
            }
            if (m.state.dim() != members_.front().state.dim()) {
                throw InvalidStateError("mixture members must share one dim");
            }
            total += m.weight;
        }
        if (std::abs(total - 1.0) > kWeightTolerance) {
            throw InvalidStateError("mixture weights sum to " + std::to_string(total) + ", expected 1");
        }
    }

    const std::vector<MixtureMember> &members() const {
        return members_;
    }
    std::size_t dim() const {
        return members_.front().state.dim();
    }

   private:
    std::vector<MixtureMember> members_;
};

inline ComplexMatrix projector(const StateVector &psi) {
    return psi.amplitudes() * psi.amplitudes().adjoint();
}

inline DensityMatrix density_from_pure(const StateVector &psi) {
    return DensityMatrix(projector(psi));
}

inline DensityMatrix density_from_mixture(const EnsembleMixture &mix) {
    const auto d = static_cast<Eigen::Index>(mix.dim());
    ComplexMatrix rho = ComplexMatrix::Zero(d, d);
    for (const auto &m : mix.members()) {
        rho += m.weight * projector(m.state);
    }
    return DensityMatrix(rho);
}

inline double purity(const DensityMatrix &rho) {
    // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
    return rho.matrix().squaredNorm();
}

/// -sum lambda ln lambda in nats, with 0 ln 0 = 0.
inline double von_neumann_entropy(const DensityMatrix &rho) {
    EigDecomposition eig = hermitian_eig(rho.matrix());
    double s = 0.0;
    for (double lambda : eig.eigenvalues) {
        if (lambda > 0.0) {
            s -= lambda * std::log(lambda);
        }
    }
    return s > 0.0 ? s : 0.0;
}

/// Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2.
inline double fidelity(const DensityMatrix &a, const DensityMatrix &b) {
    require_same_dim(a.matrix(), b.matrix());
    ComplexMatrix root = hermitian_power(a.matrix(), 0.5);
    EigDecomposition inner = hermitian_eig(symmetrize(root * b.matrix() * root));
    double acc = 0.0;
    for (double lambda : inner.eigenvalues) {
        acc += lambda > 0.0 ? std::sqrt(lambda) : 0.0;
    }
    return std::clamp(acc * acc, 0.0, 1.0);
}

inline double trace_norm_distance(const DensityMatrix &a, const DensityMatrix &b) {
    return trace_norm_distance(a.matrix(), b.matrix());
}

inline DensityMatrix reduced_state(const DensityMatrix &rho, std::size_t keep) {
    if (!rho.has_structure()) {
        throw DimensionError("reduced_state: density matrix carries no subsystem structure");
    }
    return DensityMatrix(partial_trace(rho.matrix(), rho.structure(), keep));
}

inline DensityMatrix product_state(const DensityMatrix &a, const DensityMatrix &b) {
    std::vector<std::size_t> structure;
    auto append = [&structure](const DensityMatrix &m) {
        if (m.has_structure()) {
            structure.insert(structure.end(), m.structure().begin(), m.structure().end());
        } else {
            structure.push_back(m.dim());
        }
    };
    append(a);
    append(b);
    return DensityMatrix(tensor_product(a.matrix(), b.matrix()), std::move(structure));
}

//------------------------------------------------------------------------------
// Named states
//------------------------------------------------------------------------------

using NamedState = std::variant<StateVector, DensityMatrix>;

inline DensityMatrix as_density(const NamedState &s) {
    if (const auto *psi = std::get_if<StateVector>(&s)) {
        return density_from_pure(*psi);
    }
    return std::get<DensityMatrix>(s);
}

/// Two-qubit states carry structure {2, 2}; single-system states carry none.
inline std::vector<std::size_t> named_state_structure(std::string_view name) {
    if (name == "bell_phi_plus" || name == "partially_entangled" || name == "werner") {
        return {2, 2};
    }
    return {};
}

namespace detail {

inline double unit_interval_param(std::string_view name, std::span<const double> params) {
    if (params.size() != 1) {
        throw std::invalid_argument(std::string(name) + " takes exactly one parameter");
    }
    double p = params[0];
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::out_of_range(std::string(name) + " parameter must lie in [0, 1], got " + std::to_string(p));
    }
    return p;
}

inline void no_params(std::string_view name, std::span<const double> params) {
    if (!params.empty()) {
        throw std::invalid_argument(std::string(name) + " takes no parameters");
    }
}

}  // namespace detail

/// Canonical scenario inputs:
///   bell_phi_plus            (|00> + |11>)/sqrt 2
///   partially_entangled(p)   sqrt(p)|00> + sqrt(1-p)|11>
///   werner(p)                p |Phi+><Phi+| + (1-p) I/4
///   basis(k[, dim])          |k> in dimension dim (default 2)
///   plus                     (|0> + |1>)/sqrt 2
inline NamedState named_state(std::string_view name, std::span<const double> params = {}) {
    if (name == "bell_phi_plus") {
        detail::no_params(name, params);
        ComplexVector v = ComplexVector::Zero(4);
        v(0) = v(3) = 1.0 / std::sqrt(2.0);
        return StateVector(v);
    }
    if (name == "partially_entangled") {
        double p = detail::unit_interval_param(name, params);
        ComplexVector v = ComplexVector::Zero(4);
        v(0) = std::sqrt(p);
        v(3) = std::sqrt(1.0 - p);
        return StateVector(v);
    }
    if (name == "werner") {
        double p = detail::unit_interval_param(name, params);
        ComplexVector bell = ComplexVector::Zero(4);
        bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
        ComplexMatrix m = p * (bell * bell.adjoint()) + (1.0 - p) * identity(4) / 4.0;
        return DensityMatrix(m, {2, 2});
    }
    if (name == "basis") {
        if (params.empty() || params.size() > 2) {
            throw std::invalid_argument("basis takes (k) or (k, dim)");
        }
        double k = params[0];
        double d = params.size() == 2 ? params[1] : 2.0;
        if (d < 1.0 || d != std::floor(d) || k < 0.0 || k != std::floor(k) || k >= d) {
            throw std::out_of_range("basis index must be an integer in [0, dim)");
        }
        ComplexVector v = ComplexVector::Zero(static_cast<Eigen::Index>(d));
        v(static_cast<Eigen::Index>(k)) = 1.0;
        return StateVector(v);
    }
    if (name == "plus") {
        detail::no_params(name, params);
        ComplexVector v(2);
        v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
        return StateVector(v);
    }
    throw std::invalid_argument("unknown state name '" + std::string(name) + "'");
}

//------------------------------------------------------------------------------
// Seeded random generation
//------------------------------------------------------------------------------

using Rng = std::mt19937_64;

/// splitmix64 mix of (seed, stream): independent per-trial seeds from one
/// scenario seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline ComplexMatrix random_ginibre(std::size_t rows, std::size_t cols, Rng &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    ComplexMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            double re = normal(rng);
            double im = normal(rng);
            m(i, j) = Complex(re, im);
        }
    }
    return m;
}

/// Haar-random unit vector from normalized complex Gaussians.
inline StateVector random_pure_state(std::size_t dim, Rng &rng) {
    if (dim == 0) {
        throw std::invalid_argument("random_pure_state: dim must be >= 1");
    }
    return StateVector::normalized(random_ginibre(dim, 1, rng).col(0));
}

inline StateVector random_pure_state(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    return random_pure_state(dim, rng);
}

/// GUE sample (A + A^dagger)/2.
inline ComplexMatrix random_hermitian(std::size_t dim, Rng &rng) {
    ComplexMatrix a = random_ginibre(dim, dim, rng);
    return (a + a.adjoint()) * 0.5;
}

/// Haar unitary: QR of a Ginibre matrix with the R-diagonal phases removed.
inline ComplexMatrix random_unitary(std::size_t dim, Rng &rng) {
    ComplexMatrix z = random_ginibre(dim, dim, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(z);
    ComplexMatrix q = qr.householderQ();
    ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
        double mag = std::abs(r(i, i));
        Complex phase = mag > 0.0 ? r(i, i) / mag : Complex(1.0);
        q.col(i) *= phase;
    }
    return q;
}

/// G G^dagger / Tr with G a dim x rank Ginibre matrix (rank 0 means full).
inline DensityMatrix random_density(std::size_t dim, Rng &rng, std::size_t rank = 0) {
    std::size_t r = rank == 0 ? dim : rank;
    ComplexMatrix g = random_ginibre(dim, r, rng);
    ComplexMatrix m = g * g.adjoint();
    return DensityMatrix(m / m.trace().real());
}

/// Orthogonal ensemble from the spectral decomposition (zero eigenvalues
/// dropped).
inline EnsembleMixture eigen_mixture(const DensityMatrix &rho) {
    EigDecomposition eig = hermitian_eig(rho.matrix());
    std::vector<MixtureMember> members;
    double total = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        double lambda = clip_eigenvalue(eig.eigenvalues(i));
        if (lambda > 0.0) {
            members.push_back({lambda, StateVector::normalized(eig.eigenvectors.col(i))});
            total += lambda;
        }
    }
    for (auto &m : members) {
        m.weight /= total;
    }
    return EnsembleMixture(std::move(members));
}

/// Random nonorthogonal ensemble with density rho: a random isometry W
/// (members x rank) mixes the scaled eigenvectors sqrt(lambda_i) |e_i>.
inline EnsembleMixture random_decomposition(const DensityMatrix &rho, std::size_t members, Rng &rng) {
    EigDecomposition eig = hermitian_eig(rho.matrix());
    std::vector<ComplexVector> scaled;
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        double lambda = clip_eigenvalue(eig.eigenvalues(i));
        if (lambda > 0.0) {
            scaled.emplace_back(std::sqrt(lambda) * eig.eigenvectors.col(i));
        }
    }
    if (members < scaled.size()) {
        throw std::invalid_argument("random_decomposition: need at least rank(rho) = " +
                                    std::to_string(scaled.size()) + " members");
    }
    ComplexMatrix w = random_unitary(members, rng).leftCols(static_cast<Eigen::Index>(scaled.size()));
    std::vector<MixtureMember> out;
    double total = 0.0;
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
        ComplexVector v = ComplexVector::Zero(static_cast<Eigen::Index>(rho.dim()));
        for (std::size_t i = 0; i < scaled.size(); ++i) {
            v += w(j, static_cast<Eigen::Index>(i)) * scaled[i];
        }
        double weight = v.squaredNorm();
        if (weight > 1e-14) {
            out.push_back({weight, StateVector::normalized(v)});
            total += weight;
        }
    }
    for (auto &m : out) {
        m.weight /= total;
    }
    return EnsembleMixture(std::move(out));
}

/// Pure bipartite state whose first factor has reduced state rho_a; the
/// second factor has dim_b >= rank(rho_a) and a random local frame.
inline DensityMatrix random_purification(const DensityMatrix &rho_a, std::size_t dim_b, Rng &rng) {
    EigDecomposition eig = hermitian_eig(rho_a.matrix());
    ComplexMatrix frame = random_unitary(dim_b, rng);
    const auto da = static_cast<Eigen::Index>(rho_a.dim());
    const auto db = static_cast<Eigen::Index>(dim_b);
    ComplexVector psi = ComplexVector::Zero(da * db);
    Eigen::Index used = 0;
    for (Eigen::Index i = 0; i < da; ++i) {
        double lambda = clip_eigenvalue(eig.eigenvalues(i));
        if (lambda == 0.0) {
            continue;
        }
        if (used >= db) {
            throw std::invalid_argument("random_purification: dim_b is smaller than rank(rho_a)");
        }
        ComplexVector a = eig.eigenvectors.col(i);
        ComplexVector b = frame.col(used++);
        for (Eigen::Index x = 0; x < da; ++x) {
            psi.segment(x * db, db) += std::sqrt(lambda) * a(x) * b;
        }
    }
    StateVector state = StateVector::normalized(psi);
    return DensityMatrix(projector(state), {rho_a.dim(), dim_b});
}

}  // namespace nlvn
