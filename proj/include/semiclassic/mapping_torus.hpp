#pragma once

#include <algorithm>
#include <boost/rational.hpp>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semiclassic/cartan.hpp"
#include "semiclassic/defaults.hpp"
#include "semiclassic/errors.hpp"
#include "semiclassic/lefschetz.hpp"
#include "semiclassic/spectral.hpp"

namespace semiclassic {

// ---------------------------------------------------------------------------
// Mapping classes and pillowcase fixed points
// ---------------------------------------------------------------------------

struct MappingClass {
  Eigen::Matrix<long long, 2, 2> beta;

  long long trace() const { return beta(0, 0) + beta(1, 1); }
};

inline MappingClass make_mapping_class(const Eigen::Matrix<long long, 2, 2>& beta) {
  const long long det = beta(0, 0) * beta(1, 1) - beta(0, 1) * beta(1, 0);
  if (det != 1) throw ConfigError("mapping class matrix must have determinant 1");
  return MappingClass{beta};
}

enum class StabilizerClass { Central, GenericAbelian };

inline const char* to_string(StabilizerClass s) {
  return s == StabilizerClass::Central ? "central" : "generic";
}

struct PillowcasePoint {
  Rational x = Rational(0);
  Rational y = Rational(0);
  int weyl_sign = +1;  // sign s with (s*beta - I) * (x, y) integral
  StabilizerClass stabilizer_class = StabilizerClass::Central;
};

inline std::string to_string(const Rational& q) {
  std::string s = std::to_string(q.numerator());
  if (q.denominator() != 1) s += "/" + std::to_string(q.denominator());
  return s;
}

inline std::string to_string(const PillowcasePoint& p) {
  return to_string(p.x) + "," + to_string(p.y);
}

namespace detail {

inline Rational mod_one(Rational q) {
  const long long fl = q.numerator() >= 0 ? q.numerator() / q.denominator()
                                          : -((-q.numerator() + q.denominator() - 1) / q.denominator());
  return q - Rational(fl);
}

// Coordinates of the Weyl-reflected point -(x, y) on the unit torus.
inline std::pair<Rational, Rational> weyl_partner(const Rational& x, const Rational& y) {
  return {mod_one(-x), mod_one(-y)};
}

inline bool solves_sign(const Eigen::Matrix<long long, 2, 2>& beta, int sign, const Rational& x,
                        const Rational& y) {
  const Rational r1 = Rational(sign * beta(0, 0) - 1) * x + Rational(sign * beta(0, 1)) * y;
  const Rational r2 = Rational(sign * beta(1, 0)) * x + Rational(sign * beta(1, 1) - 1) * y;
  return r1.denominator() == 1 && r2.denominator() == 1;
}

}  // namespace detail

// All torus points x in [0,1)^2 with (sign*beta - I) x integral, enumerated
// exactly through the adjugate: x = adj(A) m / det(A) over the lattice points
// m of A([0,1)^2). The count is certified against |det(sign*beta - I)|.
inline std::vector<std::pair<Rational, Rational>> torus_fixed_solutions(const MappingClass& mc,
                                                                        int sign) {
  if (sign != 1 && sign != -1) throw ConfigError("sign must be +1 or -1");
  Eigen::Matrix<long long, 2, 2> a;
  a << sign * mc.beta(0, 0) - 1, sign * mc.beta(0, 1), sign * mc.beta(1, 0),
      sign * mc.beta(1, 1) - 1;
  const long long det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  if (det == 0) {
    throw NonIsolatedError("fixed points are not isolated: det(sign*beta - I) = 0");
  }
  const long long lo1 = std::min<long long>(0, a(0, 0)) + std::min<long long>(0, a(0, 1));
  const long long hi1 = std::max<long long>(0, a(0, 0)) + std::max<long long>(0, a(0, 1));
  const long long lo2 = std::min<long long>(0, a(1, 0)) + std::min<long long>(0, a(1, 1));
  const long long hi2 = std::max<long long>(0, a(1, 0)) + std::max<long long>(0, a(1, 1));

  std::vector<std::pair<Rational, Rational>> out;
  for (long long m1 = lo1; m1 <= hi1; ++m1) {
    for (long long m2 = lo2; m2 <= hi2; ++m2) {
      // adj(A) = [[a11, -a01], [-a10, a00]]
      const Rational x(a(1, 1) * m1 - a(0, 1) * m2, det);
      const Rational y(-a(1, 0) * m1 + a(0, 0) * m2, det);
      if (x >= Rational(0) && x < Rational(1) && y >= Rational(0) && y < Rational(1)) {
        out.emplace_back(x, y);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  const long long expected = det >= 0 ? det : -det;
  if (static_cast<long long>(out.size()) != expected) {
    throw OracleMismatchError("fixed point enumeration disagrees with |det(sign*beta - I)|");
  }
  return out;
}

// Fixed points of the induced map on the pillowcase (unit torus modulo the
// x -> -x involution), merged over both signs and deduplicated under the
// involution. Points fixed with sign +1 keep that sign when both apply.
inline std::vector<PillowcasePoint> enumerate_pillowcase_fixed_points(const MappingClass& mc) {
  const long long t = mc.trace();
  if (t == 2 || t == -2) {
    throw NonIsolatedError("mapping class with trace +-2 has a nonisolated fixed set");
  }
  std::map<std::pair<Rational, Rational>, PillowcasePoint> canon;
  for (int sign : {+1, -1}) {
    for (const auto& [x, y] : torus_fixed_solutions(mc, sign)) {
      const auto partner = detail::weyl_partner(x, y);
      const std::pair<Rational, Rational> self{x, y};
      const auto key = std::min(self, partner);
      PillowcasePoint p;
      p.x = key.first;
      p.y = key.second;
      const bool central = (p.x == Rational(0) || p.x == Rational(1, 2)) &&
                           (p.y == Rational(0) || p.y == Rational(1, 2));
      p.stabilizer_class = central ? StabilizerClass::Central : StabilizerClass::GenericAbelian;
      p.weyl_sign = detail::solves_sign(mc.beta, +1, p.x, p.y) ? +1 : -1;
      canon.emplace(key, p);
    }
  }
  std::vector<PillowcasePoint> out;
  out.reserve(canon.size());
  for (const auto& [key, p] : canon) out.push_back(p);
  return out;
}

// Linearization of the mapping class at a generic (nondegenerate stabilizer)
// point: the Weyl-sign twist of beta acting on first homology.
inline Mat h1_action_matrix(const MappingClass& mc, const PillowcasePoint& p) {
  if (p.stabilizer_class == StabilizerClass::Central) {
    throw CentralPointError("central point has no abelianized linearization");
  }
  Mat df(2, 2);
  df << static_cast<double>(p.weyl_sign * mc.beta(0, 0)),
      static_cast<double>(p.weyl_sign * mc.beta(0, 1)),
      static_cast<double>(p.weyl_sign * mc.beta(1, 0)),
      static_cast<double>(p.weyl_sign * mc.beta(1, 1));
  return df;
}

// |det(df - I)|^{-1/2}; this is the torsion normalization of a nondegenerate
// point and must match the decomposition determinant (a test target).
inline double torsion_sqrt_contribution(const Mat& df) {
  require_square_even(df, "torsion_sqrt_contribution");
  const Mat d = df - Mat::Identity(df.rows(), df.cols());
  const double det = d.determinant();
  if (std::abs(det) <= defaults::tol_eig) {
    throw DegenerateFixedPointError("df has eigenvalue 1: torsion is singular");
  }
  return 1.0 / std::sqrt(std::abs(det));
}

// ---------------------------------------------------------------------------
// Relative actions
// ---------------------------------------------------------------------------

namespace detail {

// Integer vector (sign*beta - I) X for a fixed point X; ConfigError if X is
// not actually fixed with that sign.
inline std::pair<long long, long long> integral_displacement(const MappingClass& mc,
                                                             const PillowcasePoint& p) {
  const int s = p.weyl_sign;
  const Rational r1 =
      Rational(s * mc.beta(0, 0) - 1) * p.x + Rational(s * mc.beta(0, 1)) * p.y;
  const Rational r2 =
      Rational(s * mc.beta(1, 0)) * p.x + Rational(s * mc.beta(1, 1) - 1) * p.y;
  if (r1.denominator() != 1 || r2.denominator() != 1) {
    throw ConfigError("point is not fixed by the stated Weyl sign of the mapping class");
  }
  return {r1.numerator(), r2.numerator()};
}

// nu wedge X for nu = (sign*beta - I) X.
inline Rational displacement_wedge(const MappingClass& mc, const PillowcasePoint& p) {
  const auto [n1, n2] = integral_displacement(mc, p);
  return Rational(n1) * p.y - Rational(n2) * p.x;
}

}  // namespace detail

// Relative action between fixed points divided by 2*pi, at symplectic scaling
// c = 2*pi*scale_n, evaluated exactly: frac((scale_n / 2) * (nu^X - nu0^X0))
// where nu = (sign*beta - I) X. For even scale_n the value is independent of
// the choice of integer lifts.
inline Rational action_fraction(const MappingClass& mc, const PillowcasePoint& base,
                                const PillowcasePoint& p, long long scale_n = 2) {
  const Rational rel = detail::displacement_wedge(mc, p) - detail::displacement_wedge(mc, base);
  return detail::mod_one(Rational(scale_n, 2) * rel);
}

// Same quantity in radians for a general positive symplectic scaling c
// (default 4*pi). Integer multiples of 2*pi take the exact rational path.
inline double action_difference(const MappingClass& mc, const PillowcasePoint& base,
                                const PillowcasePoint& p, double omega_scale = 4.0 * kPi) {
  if (!(omega_scale > 0.0)) throw ConfigError("omega_scale must be positive");
  const double ratio = omega_scale / (2.0 * kPi);
  const double rounded = std::nearbyint(ratio);
  if (std::abs(ratio - rounded) <= 1e-9 && rounded >= 1.0) {
    const Rational f = action_fraction(mc, base, p, static_cast<long long>(rounded));
    return 2.0 * kPi * boost::rational_cast<double>(f);
  }
  const double rel = boost::rational_cast<double>(detail::displacement_wedge(mc, p) -
                                                  detail::displacement_wedge(mc, base));
  double v = std::fmod(0.5 * omega_scale * rel, 2.0 * kPi);
  if (v < 0.0) v += 2.0 * kPi;
  return v;
}

// Independent construction of the relative action: the area swept by the
// straight-line homotopy applied to a perturbed segment from a fixed offset
// Y0 to the point (so the strip parameterization shares no algebra with the
// wedge shortcut), integrated with a tensor Gauss-Legendre rule that is exact
// for the polynomial integrand. Requires omega_scale in 4*pi*Z for the offset
// to drop out modulo 2*pi.
inline double action_difference_oracle(const MappingClass& mc, const PillowcasePoint& base,
                                       const PillowcasePoint& p, double omega_scale = 4.0 * kPi) {
  static const double nodes[4] = {-0.8611363115940525752, -0.3399810435848562648,
                                  0.3399810435848562648, 0.8611363115940525752};
  static const double weights[4] = {0.3478548451374538574, 0.6521451548625461426,
                                    0.6521451548625461426, 0.3478548451374538574};
  const Eigen::Vector2d y0(0.37, -0.21);

  const auto strip_integral = [&](const PillowcasePoint& q) {
    const int s = q.weyl_sign;
    Eigen::Matrix2d b;
    b << static_cast<double>(s * mc.beta(0, 0)), static_cast<double>(s * mc.beta(0, 1)),
        static_cast<double>(s * mc.beta(1, 0)), static_cast<double>(s * mc.beta(1, 1));
    const Eigen::Matrix2d bm1 = b - Eigen::Matrix2d::Identity();
    const Eigen::Vector2d x(boost::rational_cast<double>(q.x), boost::rational_cast<double>(q.y));
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double tau = 0.5 * (nodes[i] + 1.0);
      for (int j = 0; j < 4; ++j) {
        const double t = 0.5 * (nodes[j] + 1.0);
        const Eigen::Matrix2d et = (1.0 - t) * Eigen::Matrix2d::Identity() + t * b;
        const Eigen::Vector2d dtau = et * (x + (1.0 - 2.0 * tau) * y0);
        const Eigen::Vector2d dt = tau * (bm1 * (x + (1.0 - tau) * y0));
        acc += weights[i] * weights[j] * (dtau(0) * dt(1) - dtau(1) * dt(0));
      }
    }
    return omega_scale * 0.25 * acc;  // 0.25 maps both [-1,1] factors to [0,1]
  };

  double v = std::fmod(strip_integral(base) - strip_integral(p), 2.0 * kPi);
  if (v < 0.0) v += 2.0 * kPi;
  return v;
}

// ---------------------------------------------------------------------------
// Level shift and the stationary-phase comparison sum
// ---------------------------------------------------------------------------

struct GaugeGroup {
  int n = 2;  // SU(n)

  static GaugeGroup su2() { return GaugeGroup{2}; }
  static GaugeGroup sun(int n) { return GaugeGroup{n}; }
};

inline int level_shift(int k, GaugeGroup group) {
  if (k < 1) throw ConfigError("level must be a positive integer");
  if (group.n < 2) throw ConfigError("gauge group rank must be at least 2");
  return k + group.n;  // dual Coxeter number of SU(n) is n
}

struct FlatConnectionDatum {
  std::string label;
  double cs_value = 0.0;        // defined mod 1
  double torsion_sqrt = 1.0;    // positive square root of the torsion
  int dim_h0 = 0;
  int dim_h1 = 0;
  long long spectral_flow = 0;  // enters through a quarter-power of -i, mod 8
};

struct WittenSum {
  Complex value = Complex(0.0, 0.0);
  std::vector<std::pair<std::string, Complex>> per_connection;
};

// Sum over flat connections
//   (1/2) e^{-3 pi i (1 + b1) / 4} * sum_A T_A^{1/2}
//     * e^{-2 pi i (I_A / 4 + (h0 + h1) / 8)} * e^{2 pi i (k+h) cs_A}
//     * (k+h)^{(h1 - h0) / 2}
// with h the dual Coxeter number already folded into shifted_level = k + h.
inline WittenSum witten_stationary_phase(const std::vector<FlatConnectionDatum>& connections,
                                         int k, GaugeGroup group, int b1) {
  if (connections.empty()) throw ConfigError("at least one flat connection is required");
  if (b1 < 0) throw ConfigError("first Betti number must be nonnegative");
  const int shifted = level_shift(k, group);
  const Complex prefactor = 0.5 * std::polar(1.0, -0.75 * kPi * (1.0 + b1));
  WittenSum out;
  for (const auto& c : connections) {
    if (!(c.torsion_sqrt > 0.0)) throw ConfigError("torsion_sqrt must be positive");
    if (c.dim_h0 < 0 || c.dim_h1 < 0) throw ConfigError("cohomology dimensions must be nonnegative");
    const Complex quarter = detail::i_to_the(-c.spectral_flow);  // e^{-2 pi i I_A / 4}
    const double cs_phase = 2.0 * kPi * std::fmod(shifted * c.cs_value, 1.0);
    const Complex term = prefactor * c.torsion_sqrt * quarter *
                         std::polar(1.0, -0.25 * kPi * (c.dim_h0 + c.dim_h1)) *
                         std::polar(1.0, cs_phase) *
                         std::pow(static_cast<double>(shifted), 0.5 * (c.dim_h1 - c.dim_h0));
    out.per_connection.emplace_back(c.label, term);
    out.value += term;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full mapping torus assembly
// ---------------------------------------------------------------------------

struct MappingTorusOptions {
  double omega_scale = 4.0 * kPi;
  int mu_power = 0;
  int flow_steps = 100;
  int flow_m_range = 200;
};

struct MappingTorusReport {
  PartitionReport partition;
  std::vector<PillowcasePoint> points;        // every pillowcase fixed point
  std::vector<FixedPointDatum> generic_data;  // aligned with the generic points, in enumeration order
  long long torus_count_plus = 0;
  long long torus_count_minus = 0;
  int level = 0;
  int shifted_level = 0;
  std::vector<std::string> warnings;
};

namespace detail {

// Operator spec for a generic point, conjugated into the frame of the
// reference decomposition so both ends of a flow path share one complex
// structure. Valid because 2x2 block data always uses the same standard J.
inline OperatorSpec aligned_operator_spec(const CartanDecomposition& ref,
                                          const CartanDecomposition& dec) {
  if (max_abs(Mat(ref.source.J.entries - dec.source.J.entries)) <= 1e-9) {
    return dec.source;
  }
  const Mat g = ref.conjugator;
  const Mat gi = g.inverse();
  const CMat e = g.cast<Complex>() * standard_block_generator(dec.blocks) * gi.cast<Complex>();
  return make_operator_spec(ref.source.J, e);
}

}  // namespace detail

inline MappingTorusReport assemble_mapping_torus(const MappingClass& mc, int k,
                                                 const MappingTorusOptions& opt = {}) {
  MappingTorusReport rep;
  rep.level = k;
  rep.shifted_level = level_shift(k, GaugeGroup::su2());
  const long long t = mc.trace();
  rep.points = enumerate_pillowcase_fixed_points(mc);
  rep.torus_count_plus = 2 - t >= 0 ? 2 - t : t - 2;
  rep.torus_count_minus = 2 + t >= 0 ? 2 + t : -t - 2;

  std::vector<PillowcasePoint> generic;
  for (const auto& p : rep.points) {
    if (p.stabilizer_class == StabilizerClass::Central) {
      rep.warnings.push_back("skipped central point (" + to_string(p) + ")");
    } else {
      generic.push_back(p);
    }
  }

  if (generic.empty()) {
    rep.partition.k = k;
    rep.partition.convention_flags.emplace_back("mu_power", std::to_string(opt.mu_power));
    rep.partition.convention_flags.emplace_back("reference", "none");
    rep.partition.convention_flags.emplace_back("omega_scale_over_2pi",
                                                std::to_string(opt.omega_scale / (2.0 * kPi)));
    rep.partition.convention_flags.emplace_back("level_shift",
                                                std::to_string(rep.shifted_level));
    for (const auto& w : rep.warnings) {
      rep.partition.convention_flags.emplace_back("warning", w);
    }
    return rep;
  }

  // Reference: lexicographically smallest generic point (the enumeration is
  // already sorted by exact coordinates).
  const PillowcasePoint& base = generic.front();
  std::vector<CartanDecomposition> decs;
  decs.reserve(generic.size());
  for (const auto& p : generic) {
    decs.push_back(cartan_decompose(make_symplectic(h1_action_matrix(mc, p))));
  }

  const double scale_ratio = opt.omega_scale / (2.0 * kPi);
  const bool exact_scale =
      std::abs(scale_ratio - std::nearbyint(scale_ratio)) <= 1e-9 && scale_ratio >= 1.0;

  std::vector<FixedPointDatum> data;
  for (size_t i = 0; i < generic.size(); ++i) {
    const PillowcasePoint& p = generic[i];
    FixedPointDatum d;
    d.label = to_string(p);
    d.df = make_symplectic(h1_action_matrix(mc, p));
    d.lift_trace = Complex(1.0, 0.0);
    d.abs_det = abs_det(decs[i]);
    for (const auto& b : decs[i].blocks) d.eta += block_eta(b);
    if (exact_scale) {
      // Exact phase (k + h) * Delta, reduced mod 2*pi in rational arithmetic.
      const Rational f = action_fraction(mc, base, p,
                                         static_cast<long long>(std::nearbyint(scale_ratio)));
      d.action = 2.0 * kPi *
                 boost::rational_cast<double>(detail::mod_one(Rational(rep.shifted_level) * f));
    } else {
      d.action = std::fmod(rep.shifted_level * action_difference(mc, base, p, opt.omega_scale),
                           2.0 * kPi);
      if (d.action < 0.0) d.action += 2.0 * kPi;
    }
    if (i == 0) {
      d.flow_index = 0;
    } else {
      const OperatorSpec end = detail::aligned_operator_spec(decs[0], decs[i]);
      const SpectralFlowResult flow = spectral_flow_linear(decs[0].source, end, opt.flow_steps,
                                                           opt.flow_m_range);
      d.flow_index = flow.flow;
    }
    d.kernel_dim = 0;
    data.push_back(std::move(d));
  }

  rep.generic_data = data;
  rep.partition = sqm_partition(data, to_string(base), k, opt.mu_power);
  rep.partition.convention_flags.emplace_back("omega_scale_over_2pi",
                                              std::to_string(scale_ratio));
  rep.partition.convention_flags.emplace_back("level_shift", std::to_string(rep.shifted_level));
  for (const auto& w : rep.warnings) {
    rep.partition.convention_flags.emplace_back("warning", w);
  }
  return rep;
}

inline PartitionReport build_mapping_torus_report(const MappingClass& mc, int k,
                                                  const MappingTorusOptions& opt = {}) {
  return assemble_mapping_torus(mc, k, opt).partition;
}

}  // namespace semiclassic
