#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "semiclassic/cartan.hpp"
#include "semiclassic/defaults.hpp"
#include "semiclassic/errors.hpp"
#include "semiclassic/linalg.hpp"

namespace semiclassic {

// ---------------------------------------------------------------------------
// Closed-form block data
// ---------------------------------------------------------------------------

namespace detail {

inline void require_unitary_angle_regular(double h) {
  const double r = std::abs(std::remainder(h, 2.0 * kPi));
  if (r <= defaults::tol_eig) {
    throw DegenerateFixedPointError("unitary angle is a multiple of 2*pi (zero determinant)");
  }
}

}  // namespace detail

// |det D| of a single block.
inline double block_abs_det(const CartanBlock& b) {
  switch (b.kind) {
    case CartanBlockKind::Unitary: {
      detail::require_unitary_angle_regular(b.param_h);
      const double s = std::sin(0.5 * b.param_h);
      return 4.0 * s * s;
    }
    case CartanBlockKind::Hyperbolic: {
      const double s = 2.0 * std::sinh(0.5 * b.param_h);
      return s * s;
    }
    case CartanBlockKind::NegHyperbolic: {
      const double c = 2.0 * std::cosh(0.5 * b.param_h);
      return c * c;
    }
    case CartanBlockKind::ComplexQuad: {
      const Complex f = 2.0 * std::sinh(0.5 * b.param_z);
      const Complex g = 2.0 * std::sinh(0.5 * std::conj(b.param_z));
      return std::norm(f) * std::norm(g);
    }
  }
  throw ConfigError("unknown block kind");
}

// |det D| of a decomposition: blocks multiply.
inline double abs_det(const CartanDecomposition& dec) {
  double p = 1.0;
  for (const auto& b : dec.blocks) p *= block_abs_det(b);
  return p;
}

// Eta contribution of a single block: rotation blocks give 2 - 2h/pi on
// (0, 2*pi); the sign-symmetric kinds contribute nothing.
inline double block_eta(const CartanBlock& b) {
  if (b.kind == CartanBlockKind::Unitary) {
    detail::require_unitary_angle_regular(b.param_h);
    return 2.0 - 2.0 * b.param_h / kPi;
  }
  return 0.0;
}

// Tr(JE)/pi reduced to [0, 2). Assumes ker D = 0 (not detectable from the
// trace alone; callers check via block data).
inline double eta_trace_formula(const OperatorSpec& spec) {
  const Complex tr = (spec.J.entries.cast<Complex>() * spec.E).trace();
  double v = std::fmod(tr.real() / kPi, 2.0);
  if (v < 0.0) v += 2.0;
  return v;
}

// ---------------------------------------------------------------------------
// Truncated renormalized determinant product (the oracle)
// ---------------------------------------------------------------------------

namespace detail {

// Hot loop with fixed-size matrices; the dynamic fallback is identical.
template <typename MatT>
double oracle_log_product(const MatT& j, const MatT& e, std::int64_t m_max) {
  const int d = static_cast<int>(e.rows());
  const double log_two_d = d * std::log(2.0);
  MatT dm = -0.5 * j * e;
  // |det E| = 2^d |det D_0|.
  double acc = log_two_d + std::log(std::abs(dm.determinant()));
  const double log_renorm_base = std::log(4.0 * kPi * kPi);
  for (std::int64_t m = 1; m <= m_max; ++m) {
    const Complex shift(0.0, 2.0 * kPi * static_cast<double>(m));
    MatT ep = e;
    MatT en = e;
    for (int i = 0; i < d; ++i) {
      ep(i, i) += shift;
      en(i, i) -= shift;
    }
    const MatT dp = -0.5 * j * ep;
    const MatT dn = -0.5 * j * en;
    acc += log_two_d + std::log(std::abs(dp.determinant()));
    acc += log_two_d + std::log(std::abs(dn.determinant()));
    acc -= d * (log_renorm_base + 2.0 * std::log(static_cast<double>(m)));
  }
  return acc;
}

}  // namespace detail

// Truncated product prod_{|m| <= m_max} |det(E - 2*pi*i*m)| with every m >= 1
// factor pair divided by its free-operator counterpart (4*pi^2*m^2)^{2n}.
// Built from the mode operators D_m = -1/2 J (E + 2*pi*i*m), so the complex
// structure genuinely participates in the computation; converges to abs_det
// of the decomposition at rate O(1/m_max).
inline double truncated_det_oracle(const OperatorSpec& spec,
                                   std::int64_t m_max = defaults::oracle_m_max) {
  if (m_max <= 0) {
    throw ConfigError("oracle truncation must be positive");
  }
  const CMat j = spec.J.entries.cast<Complex>();
  double logp = 0.0;
  if (spec.E.rows() == 2) {
    logp = detail::oracle_log_product<Eigen::Matrix2cd>(j, spec.E, m_max);
  } else if (spec.E.rows() == 4) {
    logp = detail::oracle_log_product<Eigen::Matrix4cd>(j, spec.E, m_max);
  } else {
    logp = detail::oracle_log_product<CMat>(j, spec.E, m_max);
  }
  return std::exp(logp);
}

// ---------------------------------------------------------------------------
// Truncated spectra
// ---------------------------------------------------------------------------

struct BlockSpectrum {
  CartanBlock block;
  std::map<int, std::vector<double>> eigenvalue_family;  // mode m -> ascending eigenvalues
};

// Spectrum of D on the span of the modes |m| <= m_range, block in its
// standard frame, computed by dense diagonalization (not the closed lists,
// so the sign-symmetry and angle-family properties are substantive checks).
inline BlockSpectrum block_spectrum(const CartanBlock& b, int m_range) {
  validate_block(b);
  const std::vector<CartanBlock> one{b};
  const CMat e = standard_block_generator(one);
  const Mat j = standard_block_j(one);
  BlockSpectrum out;
  out.block = b;
  for (int m = -m_range; m <= m_range; ++m) {
    const Vec ev = hermitian_eigenvalues(mode_operator(j, e, m));
    out.eigenvalue_family[m] = std::vector<double>(ev.data(), ev.data() + ev.size());
  }
  return out;
}

struct Sl2Coefficients {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.0;
};

inline Mat sl2_generator(const Sl2Coefficients& c) {
  Mat e(2, 2);
  e << c.sigma3, c.sigma1 - c.sigma2, c.sigma1 + c.sigma2, -c.sigma3;
  return e;
}

inline OperatorSpec sl2_operator_spec(const Sl2Coefficients& c) {
  Mat j(2, 2);
  j << 0.0, -1.0, 1.0, 0.0;
  OperatorSpec spec;
  spec.n = 1;
  spec.J = ComplexStructure{j};
  spec.E = sl2_generator(c).cast<Complex>();
  return spec;
}

struct ModeEigenvalues {
  int m = 0;
  std::vector<double> values;  // ascending
};

// Closed eigenvalue family lambda_m^{+-} = (sigma2 +- sqrt(sigma1^2 + sigma3^2
// + 4 pi^2 m^2)) / 2 for |m| <= m_range.
inline std::vector<ModeEigenvalues> sl2_eigenvalues(const Sl2Coefficients& c, int m_range) {
  std::vector<ModeEigenvalues> out;
  out.reserve(2 * m_range + 1);
  const double kappa2 = c.sigma1 * c.sigma1 + c.sigma3 * c.sigma3;
  for (int m = -m_range; m <= m_range; ++m) {
    const double root = std::sqrt(kappa2 + 4.0 * kPi * kPi * m * m);
    out.push_back({m, {0.5 * (c.sigma2 - root), 0.5 * (c.sigma2 + root)}});
  }
  return out;
}

inline std::vector<double> flatten(const std::vector<ModeEigenvalues>& fam) {
  std::vector<double> out;
  for (const auto& f : fam) out.insert(out.end(), f.values.begin(), f.values.end());
  return out;
}

inline std::vector<double> flatten(const BlockSpectrum& sp) {
  std::vector<double> out;
  for (const auto& [m, vals] : sp.eigenvalue_family) out.insert(out.end(), vals.begin(), vals.end());
  return out;
}

// ---------------------------------------------------------------------------
// Regularized eta sum
// ---------------------------------------------------------------------------

// Finite-truncation estimate of eta = lim_{s->0} sum sign(lambda) |lambda|^{-s}.
//
// A plain partial sum extrapolated in s is badly biased: the spectral
// asymmetry of these operators lives in the infinite tail, and eigenvalues
// with |lambda| < 1 turn |lambda|^{-s} into a growing exponential that no
// low-order polynomial fit can follow. So the estimator
//   1. handles every eigenvalue below max(1, spacing) exactly (sign sum,
//      the s -> 0 limit of its own contribution),
//   2. adds, for each s, the analytic continuation of the missing tail,
//      modeled as a shifted lattice: pairs at +-(offset + spacing * k)
//      contribute -(2*offset/spacing) * cutoff^{-s} in total, with offset,
//      spacing and cutoff estimated from the largest rank-paired magnitudes,
//   3. extrapolates the corrected sums to s = 0 through the Lagrange
//      polynomial on the provided s grid.
inline double eta_regularized_sum(const std::vector<double>& eigs,
                                  const std::vector<double>& s_values =
                                      std::vector<double>(defaults::s_values.begin(),
                                                          defaults::s_values.end()),
                                  double tol_kernel = defaults::tol_kernel) {
  if (s_values.empty()) {
    throw ConfigError("eta extrapolation needs at least one exponent");
  }
  std::vector<double> pos, neg;
  for (double lam : eigs) {
    if (std::abs(lam) <= tol_kernel) {
      throw KernelError("eigenvalue within kernel tolerance of zero");
    }
    (lam > 0.0 ? pos : neg).push_back(std::abs(lam));
  }
  std::sort(pos.begin(), pos.end(), std::greater<double>());
  std::sort(neg.begin(), neg.end(), std::greater<double>());

  const int k = static_cast<int>(std::min<std::size_t>({400, pos.size(), neg.size()}));
  double offset = 0.0, spacing = 0.0, cutoff = 0.0;
  const bool tail = k >= 2;
  if (tail) {
    for (int i = 0; i < k; ++i) offset += 0.5 * (pos[i] - neg[i]);
    offset /= k;
    spacing = 0.5 * ((pos[0] - pos[k - 1]) + (neg[0] - neg[k - 1])) / (k - 1);
    cutoff = 0.5 * (pos[0] + neg[0]) + 0.5 * spacing;
  }

  const double exact_threshold = std::max(1.0, spacing);
  double exact_part = 0.0;
  std::vector<double> sums(s_values.size(), 0.0);
  for (double lam : eigs) {
    if (std::abs(lam) < exact_threshold) {
      exact_part += lam > 0.0 ? 1.0 : -1.0;
      continue;
    }
    const double sign = lam > 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < s_values.size(); ++i) {
      sums[i] += sign * std::pow(std::abs(lam), -s_values[i]);
    }
  }
  if (tail && spacing > 0.0) {
    for (std::size_t i = 0; i < s_values.size(); ++i) {
      sums[i] -= (2.0 * offset / spacing) * std::pow(cutoff, -s_values[i]);
    }
  }

  // Lagrange evaluation of the interpolating polynomial at s = 0.
  double extrapolated = 0.0;
  for (std::size_t i = 0; i < s_values.size(); ++i) {
    double weight = 1.0;
    for (std::size_t j = 0; j < s_values.size(); ++j) {
      if (j == i) continue;
      weight *= (0.0 - s_values[j]) / (s_values[i] - s_values[j]);
    }
    extrapolated += sums[i] * weight;
  }
  return exact_part + extrapolated;
}

// ---------------------------------------------------------------------------
// Spectral flow along a linear generator path
// ---------------------------------------------------------------------------

struct Crossing {
  double param = 0.0;  // path parameter of the zero crossing
  int index = 0;       // position in the flat (mode-major, ascending) eigenvalue list
  int direction = 0;   // +1: negative -> positive
};

struct SpectralFlowResult {
  int flow = 0;
  std::vector<Crossing> crossings;
  std::vector<double> kernel_hits;  // sampled parameters with an eigenvalue inside tol_kernel
};

// Optional per-step eigenvalue capture for plot emission.
struct FlowTrace {
  int mode_bound = 8;  // capture modes |m| <= mode_bound
  std::vector<std::pair<double, std::vector<double>>> rows;
};

namespace detail {

struct FlowWorkspace {
  Mat j;
  CMat e0;
  CMat e1;
  bool standard_metric = true;
  Mat s_half;
  Mat s_inv_half;

  Vec mode_eigs(int m, double tau) const {
    const CMat e = (1.0 - tau) * e0 + tau * e1;
    CMat dm = mode_operator(j, e, m);
    if (!standard_metric) {
      dm = s_half.cast<Complex>() * dm * s_inv_half.cast<Complex>();
    }
    if (dm.rows() == 2) {
      // Closed form for the dominant 2x2 case.
      const double a = dm(0, 0).real();
      const double c = dm(1, 1).real();
      const Complex b = 0.5 * (dm(0, 1) + std::conj(dm(1, 0)));
      const double mean = 0.5 * (a + c);
      const double rad = std::sqrt(0.25 * (a - c) * (a - c) + std::norm(b));
      Vec out(2);
      out << mean - rad, mean + rad;
      return out;
    }
    return hermitian_eigenvalues(dm);
  }

  int negatives(int m, double tau) const {
    const Vec ev = mode_eigs(m, tau);
    int c = 0;
    for (int i = 0; i < ev.size(); ++i) {
      if (ev(i) < 0.0) ++c;
    }
    return c;
  }
};

inline void locate_crossings(const FlowWorkspace& ws, int m, int dim, int m_range,
                             double ta, double tb, int ca, int cb, int depth,
                             std::vector<Crossing>* out) {
  if (ca == cb) return;
  if (depth >= defaults::max_refine_depth) {
    if (std::abs(cb - ca) > 1) {
      throw MatchingError("eigenvalue crossings could not be separated at maximum refinement");
    }
    // Interval is as tight as the budget allows; record the midpoint.
    const double mid = 0.5 * (ta + tb);
    const Vec ev = ws.mode_eigs(m, mid);
    int local = 0;
    ev.cwiseAbs().minCoeff(&local);
    out->push_back(Crossing{mid, (m + m_range) * dim + local, ca - cb});
    return;
  }
  if (std::abs(cb - ca) == 1 && tb - ta <= 1e-9) {
    const double mid = 0.5 * (ta + tb);
    const Vec ev = ws.mode_eigs(m, mid);
    int local = 0;
    ev.cwiseAbs().minCoeff(&local);
    out->push_back(Crossing{mid, (m + m_range) * dim + local, ca - cb});
    return;
  }
  const double mid = 0.5 * (ta + tb);
  const int cm = ws.negatives(m, mid);
  locate_crossings(ws, m, dim, m_range, ta, mid, ca, cm, depth + 1, out);
  locate_crossings(ws, m, dim, m_range, mid, tb, cm, cb, depth + 1, out);
}

}  // namespace detail

// Signed count of eigenvalue zero crossings of D_tau = -1/2 J (d/dt + E_tau)
// along E_tau = (1-tau) E0 + tau E1, negative-to-positive counted +1.
// The mode decomposition is preserved along the path (J fixed), so tracking
// is per mode: a change in the mode's negative-eigenvalue count brackets a
// crossing, which adaptive bisection then localizes; ambiguous brackets that
// never separate raise MatchingError.
inline SpectralFlowResult spectral_flow_linear(const OperatorSpec& spec0,
                                               const OperatorSpec& spec1,
                                               int steps = defaults::steps,
                                               int m_range = defaults::m_range,
                                               double tol_kernel = defaults::tol_kernel,
                                               FlowTrace* trace = nullptr) {
  if (steps < 100) {
    throw ConfigError("spectral flow needs at least 100 path steps");
  }
  if (spec0.n != spec1.n) {
    throw DimensionError("spectral flow endpoints must share a dimension");
  }
  if (max_abs(Mat(spec0.J.entries - spec1.J.entries)) > defaults::tol_symp) {
    throw UnsupportedPathError("spectral flow endpoints must share the complex structure");
  }

  detail::FlowWorkspace ws;
  ws.j = spec0.J.entries;
  ws.e0 = spec0.E;
  ws.e1 = spec1.E;
  const int dim = static_cast<int>(ws.j.rows());
  const Mat s = omega_gram(dim) * ws.j;
  if (max_abs(Mat(s - Mat::Identity(dim, dim))) > defaults::tol_symp) {
    ws.standard_metric = false;
    const MetricSqrt ms = metric_sqrt(s);
    ws.s_half = ms.half;
    ws.s_inv_half = ms.inv_half;
  }

  // Endpoint kernel check is a hard error.
  for (int m = -m_range; m <= m_range; ++m) {
    for (double tau : {0.0, 1.0}) {
      const Vec ev = ws.mode_eigs(m, tau);
      if (ev.cwiseAbs().minCoeff() <= tol_kernel) {
        throw KernelError("path endpoint has an eigenvalue inside the kernel tolerance");
      }
    }
  }

  SpectralFlowResult result;
  std::vector<int> prev_neg(2 * m_range + 1);
  for (int m = -m_range; m <= m_range; ++m) {
    prev_neg[m + m_range] = ws.negatives(m, 0.0);
  }

  for (int i = 1; i <= steps; ++i) {
    const double ta = static_cast<double>(i - 1) / steps;
    const double tb = static_cast<double>(i) / steps;
    for (int m = -m_range; m <= m_range; ++m) {
      const int ca = prev_neg[m + m_range];
      const int cb = ws.negatives(m, tb);
      if (cb != ca) {
        detail::locate_crossings(ws, m, dim, m_range, ta, tb, ca, cb, 0, &result.crossings);
      }
      prev_neg[m + m_range] = cb;
      if (0.0 < tb && tb < 1.0) {
        const Vec ev = ws.mode_eigs(m, tb);
        if (ev.cwiseAbs().minCoeff() <= tol_kernel) {
          result.kernel_hits.push_back(tb);
        }
      }
    }
    if (trace != nullptr) {
      std::vector<double> row;
      for (int m = -std::min(m_range, trace->mode_bound); m <= std::min(m_range, trace->mode_bound); ++m) {
        const Vec ev = ws.mode_eigs(m, tb);
        row.insert(row.end(), ev.data(), ev.data() + ev.size());
      }
      trace->rows.emplace_back(tb, std::move(row));
    }
  }
  if (trace != nullptr) {
    // Prepend the tau = 0 row so the table covers the whole path.
    std::vector<double> row;
    for (int m = -std::min(m_range, trace->mode_bound); m <= std::min(m_range, trace->mode_bound); ++m) {
      const Vec ev = ws.mode_eigs(m, 0.0);
      row.insert(row.end(), ev.data(), ev.data() + ev.size());
    }
    trace->rows.insert(trace->rows.begin(), {0.0, std::move(row)});
  }

  std::sort(result.crossings.begin(), result.crossings.end(),
            [](const Crossing& a, const Crossing& b) {
              if (a.param != b.param) return a.param < b.param;
              return a.index < b.index;
            });
  int flow = 0;
  for (const auto& c : result.crossings) flow += c.direction;
  result.flow = flow;
  return result;
}

}  // namespace semiclassic
