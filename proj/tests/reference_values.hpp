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

// Maxima from tests/oracle/reference_runs.py (numpy RK4 on rho, dt = 1e-5,
// samples every 0.01). Raw output is kept in tests/oracle/reference_runs.out.
// Trace distances unless noted.

namespace nlvn::reference {

/// rho0 = [[0.75, 0.25], [0.25, 0.25]], H = sigma_z, t in [0, 1]: nonlinear vs
/// linear trajectory.
inline constexpr double kMixedQubitSzQ1 = 0.0;
inline constexpr double kMixedQubitSzQ2 = 0.12370197962725808;

/// Members {(1/2, |0>), (1/2, |+>)}, H = sigma_z, t in [0, 2]: max mixture
/// defect.
inline constexpr double kDefectQubitSzQ1 = 1.1527756336890508e-16;
inline constexpr double kDefectQubitSzQ2 = 0.23971276930209698;

/// Members {(1/2, |0>), (1/2, (|0>+|1>+|2>)/sqrt 3)},
/// H = [[1, .5, 0], [.5, 0, .5], [0, .5, -1]], q = 1, t in [0, 2].
inline constexpr double kDefectQutritQ1 = 0.19098766948113843;

/// rho0 = [[0.75, 0.25], [0.25, 0.25]], eigen decomposition vs
/// {(1/2, |0>), (1/2, |+>)}, H = sigma_z, distances at t = 1.
struct DecompositionDistances {
    double first_vs_second;
    double elementary_vs_first;
    double elementary_vs_second;
};
inline constexpr DecompositionDistances kDecompositionSzQ1{2.0291964471435265e-15, 2.0291964471435265e-15, 0.0};
inline constexpr DecompositionDistances kDecompositionSzQ2{3.0234473516235696e-15, 0.12370197962726001,
                                                           0.12370197962725729};

/// partially_entangled(p) composite nonlinear vs linear, t in [0, 5].
inline constexpr double kLinearityP075SxQ2 = 0.999999897090323;       // H_A = sigma_x, H_B = 0
inline constexpr double kLinearityP03SxSzQ05 = 0.999999858818127;     // H_A = sigma_x, H_B = sigma_z
inline constexpr double kLinearityP05SzQ1 = 0.0;                      // H_A = sigma_z, H_B = 0

/// A measured divergence "exceeds" a reference when it is above this
/// fraction of it; covers the difference between dt = 1e-3 and 1e-5.
inline constexpr double kThresholdFraction = 0.99;

/// Agreement between the library at dt = 1e-3 and the fine-step oracle.
inline constexpr double kOracleAgreement = 1e-6;

/// Divergences at or below this are numerical noise, not a signature. Same
/// scale as the bound used for the linear mixture defect.
inline constexpr double kNoiseFloor = 1e-9;

}  // namespace nlvn::reference
