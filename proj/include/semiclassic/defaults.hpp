#pragma once

#include <array>
#include <cstdint>

namespace semiclassic {
namespace defaults {

// Central tolerance/knob defaults. Every one of these can be overridden per
// call (and per run through the CLI config), but tests and the CLI agree on
// these values.

// Max-norm tolerance for membership checks M^T J0 M = J0 and related
// structure checks on complex structures.
inline constexpr double tol_symp = 1e-10;

// Eigenvalue-level tolerance: regularity (no eigenvalue 1), eigenvalue
// clustering, and degenerate-determinant detection.
inline constexpr double tol_eig = 1e-9;

// Trace tolerance for the SL(2,R) trichotomy boundary |Tr| = 2.
inline constexpr double tol_trace = 1e-9;

// Reassembly tolerance: exp(E) must reproduce the source matrix this well.
inline constexpr double tol_decomp = 1e-8;

// Any eigenvalue this close to 0 counts as a kernel vector (hard error at
// path endpoints and in regularized eta sums).
inline constexpr double tol_kernel = 1e-12;

// Matching tolerance when tracking eigenvalues along a path, and for the
// sign-symmetry property of truncated block spectra.
inline constexpr double tol_match = 1e-9;

// Truncation of the renormalized determinant product.
inline constexpr std::int64_t oracle_m_max = 100000;

// Mode truncation |m| <= m_range for spectra fed to eta sums.
inline constexpr int m_range = 2000;

// Path discretization for spectral flow.
inline constexpr int steps = 400;

// Maximum adaptive bisection depth when a crossing is ambiguous before
// MatchingError is raised.
inline constexpr int max_refine_depth = 48;

// Regularization exponents used for the s -> 0 extrapolation of eta.
inline constexpr std::array<double, 4> s_values = {2.0, 1.0, 0.5, 0.25};

// Pillowcase symplectic normalization: omega = c dx^dy on the plane cover
// with c = 4*pi, so the total volume of the double cover lies in 2*pi*Z and
// relative actions are well defined mod 2*pi independent of lift choices.
inline constexpr double omega_scale_factor = 2.0;  // c = omega_scale_factor * 2*pi

// Relative tolerance for the CLI's built-in oracle cross-checks.
inline constexpr double oracle_rtol = 5e-3;

}  // namespace defaults
}  // namespace semiclassic
