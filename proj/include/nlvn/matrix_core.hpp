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

// Dense complex linear algebra for small Hermitian problems: Kronecker
// products, partial traces, Hermitian eigendecomposition, spectral matrix
// functions and unitary exponentials. Everything here is a pure function.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlvn {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Max-abs entry of m - m^dagger accepted as "Hermitian".
inline constexpr double kHermitianTolerance = 1e-10;

/// Eigenvalues in [-kEigenClipTolerance, kEigenClipTolerance] are treated as
/// exact zeros by spectral functions; anything more negative is a corrupted
/// state.
inline constexpr double kEigenClipTolerance = 1e-12;

class NotHermitianError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

class NegativeEigenvalueError : public std::domain_error {
   public:
    NegativeEigenvalueError(double eigenvalue)
        : std::domain_error("eigenvalue " + std::to_string(eigenvalue) + " is below -" +
                            std::to_string(kEigenClipTolerance) + " (corrupted state)"),
          eigenvalue_(eigenvalue) {
    }
    double eigenvalue() const noexcept {
        return eigenvalue_;
    }

   private:
    double eigenvalue_;
};

struct EigDecomposition {
    RealVector eigenvalues;      // ascending
    ComplexMatrix eigenvectors;  // columns

    ComplexMatrix recompose() const {
        return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
    }
};

inline std::size_t dim(const ComplexMatrix &m) {
    return static_cast<std::size_t>(m.rows());
}

inline bool is_finite(const ComplexMatrix &m) {
    return m.allFinite();
}

/// Throws unless m is a non-empty square matrix of finite entries.
inline void require_valid(const ComplexMatrix &m, const char *what = "matrix") {
    if (m.rows() == 0 || m.rows() != m.cols()) {
        throw DimensionError(std::string(what) + " must be square with dim >= 1, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string(what) + " has non-finite entries");
    }
}

inline void require_same_dim(const ComplexMatrix &a, const ComplexMatrix &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("dimension mismatch: " + std::to_string(a.rows()) + " vs " +
                             std::to_string(b.rows()));
    }
}

inline double hermiticity_defect(const ComplexMatrix &m) {
    if (m.size() == 0) {
        return 0.0;
    }
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline ComplexMatrix symmetrize(const ComplexMatrix &m) {
    return (m + m.adjoint()) * 0.5;
}

inline void require_hermitian(const ComplexMatrix &m, const char *what = "matrix") {
    require_valid(m, what);
    double defect = hermiticity_defect(m);
    if (defect > kHermitianTolerance) {
        throw NotHermitianError(std::string(what) + " is not Hermitian (max |m - m^dagger| = " +
                                std::to_string(defect) + ")");
    }
}

inline ComplexMatrix commutator(const ComplexMatrix &a, const ComplexMatrix &b) {
    return a * b - b * a;
}

inline ComplexMatrix identity(std::size_t d) {
    return ComplexMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
}

/// Kronecker product; block (i, j) of the result is a(i, j) * b.
inline ComplexMatrix tensor_product(const ComplexMatrix &a, const ComplexMatrix &b) {
    require_valid(a, "left factor");
    require_valid(b, "right factor");
    const Eigen::Index da = a.rows();
    const Eigen::Index db = b.rows();
    ComplexMatrix out(da * db, da * db);
    for (Eigen::Index i = 0; i < da; ++i) {
        for (Eigen::Index j = 0; j < da; ++j) {
            out.block(i * db, j * db, db, db) = a(i, j) * b;
        }
    }
    return out;
}

inline ComplexMatrix tensor_product(std::span<const ComplexMatrix> factors) {
    if (factors.empty()) {
        throw DimensionError("tensor product of zero factors");
    }
    ComplexMatrix out = factors.front();
    for (std::size_t k = 1; k < factors.size(); ++k) {
        out = tensor_product(out, factors[k]);
    }
    return out;
}

inline std::size_t product_of(std::span<const std::size_t> dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

/// Places op at subsystem `slot` with identities on every other factor.
inline ComplexMatrix embed(const ComplexMatrix &op, std::span<const std::size_t> dims, std::size_t slot) {
    if (slot >= dims.size() || dims[slot] != dim(op)) {
        throw DimensionError("embed: operator dim does not match subsystem " + std::to_string(slot));
    }
    const std::size_t left = product_of(dims.subspan(0, slot));
    const std::size_t right = product_of(dims.subspan(slot + 1));
    ComplexMatrix out = op;
    if (left > 1) {
        out = tensor_product(identity(left), out);
    }
    if (right > 1) {
        out = tensor_product(out, identity(right));
    }
    return out;
}

/// Reduced matrix on subsystem `keep`, tracing out every other factor.
inline ComplexMatrix partial_trace(const ComplexMatrix &m, std::span<const std::size_t> dims, std::size_t keep) {
    require_valid(m);
    if (dims.empty() || std::find(dims.begin(), dims.end(), std::size_t{0}) != dims.end()) {
        throw DimensionError("partial_trace: subsystem dims must be positive");
    }
    if (product_of(dims) != dim(m)) {
        throw DimensionError("partial_trace: product of subsystem dims " + std::to_string(product_of(dims)) +
                             " does not match matrix dim " + std::to_string(dim(m)));
    }
    if (keep >= dims.size()) {
        throw DimensionError("partial_trace: kept subsystem index out of range");
    }
    const auto k = static_cast<Eigen::Index>(dims[keep]);
    const auto left = static_cast<Eigen::Index>(product_of(dims.subspan(0, keep)));
    const auto right = static_cast<Eigen::Index>(product_of(dims.subspan(keep + 1)));
    ComplexMatrix out = ComplexMatrix::Zero(k, k);
    for (Eigen::Index l = 0; l < left; ++l) {
        for (Eigen::Index a = 0; a < k; ++a) {
            for (Eigen::Index b = 0; b < k; ++b) {
                const Eigen::Index row = (l * k + a) * right;
                const Eigen::Index col = (l * k + b) * right;
                Complex acc{0.0, 0.0};
                for (Eigen::Index r = 0; r < right; ++r) {
                    acc += m(row + r, col + r);
                }
                out(a, b) += acc;
            }
        }
    }
    return out;
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized first,
/// so defects up to kHermitianTolerance do not leak into the spectrum.
inline EigDecomposition hermitian_eig(const ComplexMatrix &m) {
    require_hermitian(m);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(symmetrize(m));
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("hermitian_eig: eigensolver did not converge");
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
}

/// V f(diag) V^dagger for a precomputed decomposition.
template <class F>
ComplexMatrix spectral_map(const EigDecomposition &eig, F &&f) {
    Eigen::VectorXcd mapped(eig.eigenvalues.size());
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        mapped(i) = Complex(f(eig.eigenvalues(i)));
    }
    return eig.eigenvectors * mapped.asDiagonal() * eig.eigenvectors.adjoint();
}

/// Clamps an eigenvalue into the PSD cone: values within the clip band become
/// exactly 0, values below it throw NegativeEigenvalueError.
inline double clip_eigenvalue(double lambda) {
    if (lambda < -kEigenClipTolerance) {
        throw NegativeEigenvalueError(lambda);
    }
    return lambda <= kEigenClipTolerance ? 0.0 : lambda;
}

/// m^q for Hermitian PSD m and real q > 0, with 0^q = 0.
inline ComplexMatrix hermitian_power(const ComplexMatrix &m, double q) {
    if (!(q > 0.0) || !std::isfinite(q)) {
        throw std::invalid_argument("hermitian_power: q must be a finite real > 0");
    }
    EigDecomposition eig = hermitian_eig(m);
    return spectral_map(eig, [q](double lambda) {
        double clipped = clip_eigenvalue(lambda);
        return clipped == 0.0 ? 0.0 : std::pow(clipped, q);
    });
}

/// exp(-i * s * g) for Hermitian g.
inline ComplexMatrix unitary_exponential(const ComplexMatrix &g, double s) {
    EigDecomposition eig = hermitian_eig(g);
    Eigen::VectorXcd phases(eig.eigenvalues.size());
    for (Eigen::Index i = 0; i < phases.size(); ++i) {
        phases(i) = std::polar(1.0, -s * eig.eigenvalues(i));
    }
    return eig.eigenvectors * phases.asDiagonal() * eig.eigenvectors.adjoint();
}

/// U m U^dagger.
inline ComplexMatrix conjugate(const ComplexMatrix &u, const ComplexMatrix &m) {
    return u * m * u.adjoint();
}

/// Half the trace norm of a - b.
inline double trace_norm_distance(const ComplexMatrix &a, const ComplexMatrix &b) {
    require_same_dim(a, b);
    require_hermitian(a, "left argument");
    require_hermitian(b, "right argument");
    EigDecomposition eig = hermitian_eig(a - b);
    return 0.5 * eig.eigenvalues.cwiseAbs().sum();
}

/// Frobenius norm.
inline double frobenius(const ComplexMatrix &m) {
    return m.norm();
}

}  // namespace nlvn
