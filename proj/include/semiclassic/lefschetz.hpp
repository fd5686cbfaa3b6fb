#pragma once

#include <algorithm>
#include <boost/rational.hpp>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "semiclassic/cartan.hpp"
#include "semiclassic/defaults.hpp"
#include "semiclassic/errors.hpp"
#include "semiclassic/spectral.hpp"

namespace semiclassic {

using Rational = boost::rational<long long>;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// Everything a single fixed point contributes to a stationary-phase sum.
struct FixedPointDatum {
  std::string label;
  SymplecticMatrix df;
  Complex lift_trace = Complex(1.0, 0.0);  // unit modulus times multiplicity
  double action = 0.0;                     // relative action, mod 2*pi
  double eta = 0.0;
  double abs_det = 1.0;
  int flow_index = 0;
  int kernel_dim = 0;  // must be 0 in scope
};

inline void validate_fixed_point(const FixedPointDatum& p) {
  if (!(p.abs_det > 0.0)) throw ConfigError("fixed point needs abs_det > 0");
  if (std::abs(p.lift_trace) <= 0.0) throw ConfigError("fixed point needs a nonzero lift trace");
  if (p.kernel_dim != 0) {
    throw KernelError("fixed point operator has a kernel (kernel_dim != 0)");
  }
}

struct PartitionReport {
  Complex value = Complex(0.0, 0.0);
  std::vector<std::pair<std::string, Complex>> per_point;
  int k = 0;
  std::vector<std::pair<std::string, std::string>> convention_flags;
};

enum class ToyModelKind { ProjectiveLine, FlatTorus };

struct ToyModelSpec {
  ToyModelKind kind = ToyModelKind::ProjectiveLine;
  int level = 0;        // k >= 0
  double rotation = 0;  // ProjectiveLine angle, radians
  // FlatTorus data: the map x -> matrix*x + translation on R^2/Z^2.
  Eigen::Matrix2i torus_matrix = Eigen::Matrix2i::Identity();
  Rational translation_x = Rational(0);
  Rational translation_y = Rational(0);
};

// ---------------------------------------------------------------------------
// Fixed point weights
// ---------------------------------------------------------------------------

enum class WeightRoute { Auto, Holomorphic, EtaDet };

namespace detail {

inline Complex i_to_the(long long p) {
  long long r = p % 4;
  if (r < 0) r += 4;
  switch (r) {
    case 0: return Complex(1.0, 0.0);
    case 1: return Complex(0.0, 1.0);
    case 2: return Complex(-1.0, 0.0);
    default: return Complex(0.0, -1.0);
  }
}

}  // namespace detail

// Contribution weight of one regular fixed point. On purely rotational df the
// holomorphic form lift / prod_j (1 - e^{i h_j}) applies; in general the
// stationary-phase form lift * e^{i pi eta / 4} / sqrt|det D| is used. The two
// agree identically on rotational input (that identity is a test target).
inline Complex fixed_point_weight(const SymplecticMatrix& df, Complex lift_trace,
                                  WeightRoute route = WeightRoute::Auto) {
  const CartanDecomposition dec = cartan_decompose(df);
  const bool all_unitary =
      std::all_of(dec.blocks.begin(), dec.blocks.end(),
                  [](const CartanBlock& b) { return b.kind == CartanBlockKind::Unitary; });
  if (route == WeightRoute::Holomorphic && !all_unitary) {
    throw UnsupportedError("holomorphic weight form needs purely rotational df");
  }
  const bool holomorphic = route == WeightRoute::Holomorphic ||
                           (route == WeightRoute::Auto && all_unitary);
  if (holomorphic) {
    Complex den(1.0, 0.0);
    for (const auto& b : dec.blocks) {
      den *= 1.0 - std::polar(1.0, b.param_h);
    }
    return lift_trace / den;
  }
  double eta = 0.0;
  for (const auto& b : dec.blocks) eta += block_eta(b);
  return lift_trace * std::polar(1.0, 0.25 * kPi * eta) / std::sqrt(abs_det(dec));
}

// Sum of fixed-point weights; points are taken in label order so the result
// does not depend on list order. The level is the caller's bookkeeping: lift
// traces must already be supplied at level k.
inline Complex lefschetz_sum(const std::vector<FixedPointDatum>& points, int k) {
  (void)k;
  std::vector<const FixedPointDatum*> order;
  order.reserve(points.size());
  for (const auto& p : points) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const FixedPointDatum* a, const FixedPointDatum* b) { return a->label < b->label; });
  Complex sum(0.0, 0.0);
  for (const auto* p : order) {
    sum += fixed_point_weight(p->df, p->lift_trace);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Toy-model cohomology oracle
// ---------------------------------------------------------------------------

namespace detail {

inline Mat rotation2(double theta) {
  Mat r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

}  // namespace detail

// Fixed-point data of the rotation e^{i theta} on the projective line with
// the degree-k bundle: the two poles, with the lift phase pinned to 1 at the
// zero pole (which fixes it at e^{i k theta} on the other).
inline std::vector<FixedPointDatum> projective_line_fixed_points(int k, double theta) {
  if (k < 0) throw ConfigError("bundle degree must be nonnegative");
  if (std::abs(std::remainder(theta, 2.0 * kPi)) <= defaults::tol_eig) {
    throw DegenerateFixedPointError("rotation angle is a multiple of 2*pi: fixed points are not isolated");
  }
  std::vector<FixedPointDatum> pts(2);
  pts[0].label = "infinity";
  pts[0].df = make_symplectic(detail::rotation2(-theta));
  pts[0].lift_trace = std::polar(1.0, k * theta);
  pts[1].label = "zero";
  pts[1].df = make_symplectic(detail::rotation2(theta));
  pts[1].lift_trace = Complex(1.0, 0.0);
  for (auto& p : pts) {
    const CartanDecomposition dec = cartan_decompose(p.df);
    p.abs_det = abs_det(dec);
    double eta = 0.0;
    for (const auto& b : dec.blocks) eta += block_eta(b);
    p.eta = eta;
  }
  return pts;
}

// Alternating-sum trace of the induced action on bundle cohomology, as an
// explicit finite sum of unit complex numbers.
//
//   ProjectiveLine, level k, rotation theta: the k+1 monomial sections pick up
//   weights e^{i j theta}, j = 0..k (lift phase matching the zero pole).
//
//   FlatTorus: only cases with vanishing higher cohomology are in scope:
//   matrix = I at level k >= 1 with exact k-torsion translation (a/k, b/k),
//   where the theta-like basis gives sum_j [a = 0 (mod k)] e^{2 pi i j b / k};
//   and matrix = -I at zero translation, where the basis is permuted
//   j -> -j and the trace counts #{j in Z/k : 2j = 0}.
inline Complex cohomology_trace_oracle(const ToyModelSpec& spec) {
  if (spec.level < 0) throw ConfigError("level must be nonnegative");
  if (spec.kind == ToyModelKind::ProjectiveLine) {
    if (std::abs(std::remainder(spec.rotation, 2.0 * kPi)) <= defaults::tol_eig) {
      throw DegenerateFixedPointError("rotation angle is a multiple of 2*pi");
    }
    Complex sum(0.0, 0.0);
    for (int j = 0; j <= spec.level; ++j) {
      sum += std::polar(1.0, j * spec.rotation);
    }
    return sum;
  }

  // FlatTorus
  const int k = spec.level;
  if (k == 0) {
    throw UnsupportedError("flat torus at level 0 has nonvanishing higher cohomology");
  }
  const Eigen::Matrix2i& a = spec.torus_matrix;
  const bool is_id = a == Eigen::Matrix2i::Identity();
  const bool is_neg_id = a == Eigen::Matrix2i(-Eigen::Matrix2i::Identity());
  if (is_id) {
    // Translation must be exact k-torsion for the action to preserve the
    // level-k polarization data we enumerate.
    const Rational ax = spec.translation_x * k;
    const Rational ay = spec.translation_y * k;
    if (ax.denominator() != 1 || ay.denominator() != 1) {
      throw UnsupportedError("flat torus translation must be k-torsion at level k");
    }
    long long sx = ax.numerator() % k;
    long long sy = ay.numerator() % k;
    if (sx < 0) sx += k;
    if (sy < 0) sy += k;
    if (sx != 0) return Complex(0.0, 0.0);
    Complex sum(0.0, 0.0);
    for (int j = 0; j < k; ++j) {
      sum += std::polar(1.0, 2.0 * kPi * j * static_cast<double>(sy) / k);
    }
    return sum;
  }
  if (is_neg_id) {
    if (spec.translation_x != Rational(0) || spec.translation_y != Rational(0)) {
      throw UnsupportedError("flat torus inversion is supported at zero translation only");
    }
    int count = 0;
    for (int j = 0; j < k; ++j) {
      if ((2 * j) % k == 0) ++count;
    }
    return Complex(static_cast<double>(count), 0.0);
  }
  throw UnsupportedError("flat torus matrices other than +-identity are out of scope");
}

// ---------------------------------------------------------------------------
// Regularized partition assembler
// ---------------------------------------------------------------------------

// Z = i^mu * e^{i k S(x0)} * sum_x e^{i action(x) + i pi/2 flow(x)} / sqrt|det D_x|,
// the reference point entering with action 0 and flow 0. Contributions are
// recorded per point (prefactor included, so they sum to the value).
inline PartitionReport sqm_partition(const std::vector<FixedPointDatum>& points,
                                     const std::string& reference, int k, int mu_power) {
  const FixedPointDatum* ref = nullptr;
  for (const auto& p : points) {
    validate_fixed_point(p);
    if (p.label == reference) ref = &p;
  }
  if (ref == nullptr) {
    throw ConfigError("reference point \"" + reference + "\" is not in the list");
  }

  std::vector<const FixedPointDatum*> order;
  for (const auto& p : points) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const FixedPointDatum* a, const FixedPointDatum* b) { return a->label < b->label; });

  const Complex prefactor =
      detail::i_to_the(mu_power) * std::polar(1.0, k * ref->action);
  PartitionReport report;
  report.k = k;
  for (const auto* p : order) {
    const bool is_ref = p == ref;
    const double action = is_ref ? 0.0 : p->action;
    const int flow = is_ref ? 0 : p->flow_index;
    const Complex term = prefactor * detail::i_to_the(flow) * std::polar(1.0, action) /
                         std::sqrt(p->abs_det);
    report.per_point.emplace_back(p->label, term);
    report.value += term;
  }
  report.convention_flags.emplace_back("mu_power", std::to_string(mu_power));
  report.convention_flags.emplace_back("reference", reference);
  report.convention_flags.emplace_back("sqrt_branch", "positive");
  report.convention_flags.emplace_back("flow_phase", "i^flow (quarter turns)");
  return report;
}

}  // namespace semiclassic
