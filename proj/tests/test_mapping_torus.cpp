#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "semiclassic/errors.hpp"
#include "semiclassic/mapping_torus.hpp"

using namespace semiclassic;

namespace {

Eigen::Matrix<long long, 2, 2> mat2(long long a, long long b, long long c, long long d) {
  Eigen::Matrix<long long, 2, 2> m;
  m << a, b, c, d;
  return m;
}

using SolutionSet = std::set<std::pair<Rational, Rational>>;

// Exhaustive solver over the (1/d) lattice, sharing no code with the
// adjugate enumeration.
SolutionSet brute_force_solutions(const Eigen::Matrix<long long, 2, 2>& beta, int sign) {
  const long long a00 = sign * beta(0, 0) - 1;
  const long long a01 = sign * beta(0, 1);
  const long long a10 = sign * beta(1, 0);
  const long long a11 = sign * beta(1, 1) - 1;
  long long d = a00 * a11 - a01 * a10;
  if (d < 0) d = -d;
  EXPECT_NE(d, 0);
  SolutionSet out;
  for (long long i = 0; i < d; ++i) {
    for (long long j = 0; j < d; ++j) {
      const long long r1 = a00 * i + a01 * j;  // d * (A x)_1
      const long long r2 = a10 * i + a11 * j;
      if (r1 % d == 0 && r2 % d == 0) {
        out.emplace(Rational(i, d), Rational(j, d));
      }
    }
  }
  return out;
}

}  // namespace

TEST(MappingClass, DeterminantValidation) {
  EXPECT_NO_THROW(make_mapping_class(mat2(2, 1, 1, 1)));
  EXPECT_THROW(make_mapping_class(mat2(1, 1, 1, 1)), ConfigError);
  EXPECT_THROW(make_mapping_class(mat2(2, 0, 0, 2)), ConfigError);
}

TEST(TorusSolutions, AgreeWithBruteForceAndDeterminantCount) {
  // Every hyperbolic class with entries bounded by 3 (plus a few larger
  // ones); the acceptance suite extends the bound to 5.
  std::vector<Eigen::Matrix<long long, 2, 2>> cases;
  for (long long a = -3; a <= 3; ++a) {
    for (long long b = -3; b <= 3; ++b) {
      for (long long c = -3; c <= 3; ++c) {
        for (long long d = -3; d <= 3; ++d) {
          if (a * d - b * c != 1) continue;
          const long long t = a + d;
          if (t == 2 || t == -2) continue;
          cases.push_back(mat2(a, b, c, d));
        }
      }
    }
  }
  cases.push_back(mat2(1, 1, 3, 4));
  cases.push_back(mat2(5, 2, 2, 1));
  ASSERT_FALSE(cases.empty());
  for (const auto& beta : cases) {
    const MappingClass mc = make_mapping_class(beta);
    for (int sign : {+1, -1}) {
      const auto got = torus_fixed_solutions(mc, sign);
      const auto want = brute_force_solutions(beta, sign);
      const long long t = beta(0, 0) + beta(1, 1);
      const long long expected = sign > 0 ? std::llabs(2 - t) : std::llabs(2 + t);
      EXPECT_EQ(static_cast<long long>(got.size()), expected);
      EXPECT_EQ(SolutionSet(got.begin(), got.end()), want);
    }
  }
}

TEST(TorusSolutions, NonIsolatedClassesAreRejected) {
  EXPECT_THROW(enumerate_pillowcase_fixed_points(make_mapping_class(mat2(1, 1, 0, 1))),
               NonIsolatedError);
  EXPECT_THROW(enumerate_pillowcase_fixed_points(make_mapping_class(mat2(-1, 1, 0, -1))),
               NonIsolatedError);
  EXPECT_THROW(enumerate_pillowcase_fixed_points(make_mapping_class(mat2(1, 0, 0, 1))),
               NonIsolatedError);
  EXPECT_THROW(torus_fixed_solutions(make_mapping_class(mat2(1, 1, 0, 1)), +1),
               NonIsolatedError);
}

TEST(Pillowcase, OrderFourClassHasOnlyCentralPoints) {
  const auto pts = enumerate_pillowcase_fixed_points(make_mapping_class(mat2(0, -1, 1, 0)));
  ASSERT_EQ(pts.size(), 2u);
  for (const auto& p : pts) {
    EXPECT_EQ(p.stabilizer_class, StabilizerClass::Central);
    EXPECT_EQ(p.weyl_sign, +1);
  }
  EXPECT_EQ(to_string(pts[0]), "0,0");
  EXPECT_EQ(to_string(pts[1]), "1/2,1/2");
}

TEST(Pillowcase, OrderThreeClassHasOneGenericOrbit) {
  const auto pts = enumerate_pillowcase_fixed_points(make_mapping_class(mat2(0, -1, 1, -1)));
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0].stabilizer_class, StabilizerClass::Central);
  EXPECT_EQ(pts[1].stabilizer_class, StabilizerClass::GenericAbelian);
  EXPECT_EQ(pts[1].x, Rational(1, 3));
  EXPECT_EQ(pts[1].y, Rational(2, 3));
  EXPECT_EQ(pts[1].weyl_sign, +1);
}

TEST(Pillowcase, WeylDeduplicationOnTraceThree) {
  const auto pts = enumerate_pillowcase_fixed_points(make_mapping_class(mat2(2, 1, 1, 1)));
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0].stabilizer_class, StabilizerClass::Central);
  EXPECT_EQ(pts[1].x, Rational(1, 5));
  EXPECT_EQ(pts[1].y, Rational(2, 5));
  EXPECT_EQ(pts[1].weyl_sign, -1);
  EXPECT_EQ(pts[2].x, Rational(2, 5));
  EXPECT_EQ(pts[2].y, Rational(4, 5));
  EXPECT_EQ(pts[2].weyl_sign, -1);
}

TEST(H1Action, CentralPointsAreRejectedAndTorsionMatches) {
  const MappingClass mc = make_mapping_class(mat2(2, 1, 1, 1));
  const auto pts = enumerate_pillowcase_fixed_points(mc);
  EXPECT_THROW(h1_action_matrix(mc, pts[0]), CentralPointError);
  const Mat df = h1_action_matrix(mc, pts[1]);
  EXPECT_NEAR(max_abs(Mat(df + Mat(mc.beta.cast<double>()))), 0.0, 1e-15);
  EXPECT_NEAR(torsion_sqrt_contribution(df), 1.0 / std::sqrt(5.0), 1e-14);
  EXPECT_THROW(torsion_sqrt_contribution(Mat::Identity(2, 2)), DegenerateFixedPointError);
}

TEST(ActionDifference, ExactFractionsOnTraceThree) {
  const MappingClass mc = make_mapping_class(mat2(2, 1, 1, 1));
  const auto pts = enumerate_pillowcase_fixed_points(mc);
  const Rational f = action_fraction(mc, pts[1], pts[2]);
  EXPECT_EQ(f, Rational(2, 5));
  EXPECT_NEAR(action_difference(mc, pts[1], pts[2]), 2.0 * kPi * 2.0 / 5.0, 1e-12);
  EXPECT_EQ(action_fraction(mc, pts[1], pts[1]), Rational(0));
}

TEST(ActionDifference, AdditiveOverBasePoints) {
  const MappingClass mc = make_mapping_class(mat2(1, 1, 3, 4));
  const auto pts = enumerate_pillowcase_fixed_points(mc);
  std::vector<PillowcasePoint> generic;
  for (const auto& p : pts) {
    if (p.stabilizer_class == StabilizerClass::GenericAbelian) generic.push_back(p);
  }
  ASSERT_GE(generic.size(), 3u);
  const Rational ab = action_fraction(mc, generic[0], generic[1]);
  const Rational bc = action_fraction(mc, generic[1], generic[2]);
  const Rational ac = action_fraction(mc, generic[0], generic[2]);
  const Rational zero = detail::mod_one(ab + bc - ac);
  EXPECT_EQ(zero, Rational(0));
}

TEST(ActionDifference, MatchesTheQuadratureOracle) {
  for (const auto& beta : {mat2(2, 1, 1, 1), mat2(1, 1, 3, 4), mat2(0, -1, 1, -1)}) {
    const MappingClass mc = make_mapping_class(beta);
    const auto pts = enumerate_pillowcase_fixed_points(mc);
    std::vector<PillowcasePoint> generic;
    for (const auto& p : pts) {
      if (p.stabilizer_class == StabilizerClass::GenericAbelian) generic.push_back(p);
    }
    for (double scale : {4.0 * kPi, 8.0 * kPi}) {
      for (const auto& p : generic) {
        const double lib = action_difference(mc, generic.front(), p, scale);
        const double orc = action_difference_oracle(mc, generic.front(), p, scale);
        double d = std::fmod(std::abs(lib - orc), 2.0 * kPi);
        d = std::min(d, 2.0 * kPi - d);
        EXPECT_NEAR(d, 0.0, 1e-9) << to_string(p) << " scale " << scale;
      }
    }
  }
}

TEST(ActionDifference, RejectsPointsNotFixedByTheStatedSign) {
  const MappingClass mc = make_mapping_class(mat2(0, -1, 1, -1));
  const auto pts = enumerate_pillowcase_fixed_points(mc);
  PillowcasePoint bogus;
  bogus.x = Rational(1, 7);
  bogus.y = Rational(0);
  bogus.weyl_sign = +1;
  bogus.stabilizer_class = StabilizerClass::GenericAbelian;
  EXPECT_THROW(action_difference(mc, pts[1], bogus), ConfigError);
}

TEST(LevelShift, DualCoxeterRule) {
  EXPECT_EQ(level_shift(2, GaugeGroup::su2()), 4);
  EXPECT_EQ(level_shift(1, GaugeGroup::sun(3)), 4);
  EXPECT_EQ(level_shift(5, GaugeGroup::sun(2)), 7);
  EXPECT_THROW(level_shift(0, GaugeGroup::su2()), ConfigError);
  EXPECT_THROW(level_shift(1, GaugeGroup::sun(1)), ConfigError);
}

TEST(WittenSum, GoldenSingleConnection) {
  FlatConnectionDatum c;
  c.label = "trivial";
  const WittenSum z = witten_stationary_phase({c}, 1, GaugeGroup::su2(), 0);
  EXPECT_NEAR(z.value.real(), -0.35355339059327373, 1e-15);
  EXPECT_NEAR(z.value.imag(), -0.35355339059327373, 1e-15);
  ASSERT_EQ(z.per_connection.size(), 1u);
}

TEST(WittenSum, FlowShiftByFourAndCsShiftByOneAreInvariances) {
  FlatConnectionDatum c;
  c.label = "a";
  c.cs_value = 0.3127;
  c.torsion_sqrt = 0.8;
  c.dim_h0 = 1;
  c.dim_h1 = 2;
  c.spectral_flow = 3;
  const WittenSum base = witten_stationary_phase({c}, 2, GaugeGroup::su2(), 1);

  FlatConnectionDatum shifted = c;
  shifted.spectral_flow = 7;
  const WittenSum flow4 = witten_stationary_phase({shifted}, 2, GaugeGroup::su2(), 1);
  EXPECT_EQ(base.value.real(), flow4.value.real());
  EXPECT_EQ(base.value.imag(), flow4.value.imag());

  shifted = c;
  shifted.cs_value = c.cs_value + 1.0;
  const WittenSum cs1 = witten_stationary_phase({shifted}, 2, GaugeGroup::su2(), 1);
  EXPECT_NEAR(std::abs(base.value - cs1.value), 0.0, 1e-12);
}

TEST(WittenSum, MatchesAnIndependentEvaluationOfTheFormula) {
  FlatConnectionDatum c;
  c.label = "a";
  c.cs_value = 0.125;
  c.torsion_sqrt = 1.7;
  c.dim_h0 = 1;
  c.dim_h1 = 3;
  c.spectral_flow = 2;
  const int k = 3, b1 = 2;
  const int shifted = k + 2;
  const WittenSum z = witten_stationary_phase({c}, k, GaugeGroup::su2(), b1);
  const Complex manual = 0.5 * std::polar(1.0, -0.75 * kPi * (1 + b1)) * c.torsion_sqrt *
                         std::polar(1.0, -0.5 * kPi * c.spectral_flow) *
                         std::polar(1.0, -0.25 * kPi * (c.dim_h0 + c.dim_h1)) *
                         std::polar(1.0, 2.0 * kPi * shifted * c.cs_value) *
                         std::pow(shifted, 0.5 * (c.dim_h1 - c.dim_h0));
  EXPECT_NEAR(std::abs(z.value - manual), 0.0, 1e-12);
}

TEST(WittenSum, Validation) {
  EXPECT_THROW(witten_stationary_phase({}, 1, GaugeGroup::su2(), 0), ConfigError);
  FlatConnectionDatum c;
  c.torsion_sqrt = 0.0;
  EXPECT_THROW(witten_stationary_phase({c}, 1, GaugeGroup::su2(), 0), ConfigError);
  c.torsion_sqrt = 1.0;
  c.dim_h0 = -1;
  EXPECT_THROW(witten_stationary_phase({c}, 1, GaugeGroup::su2(), 0), ConfigError);
}

TEST(Assemble, CentralOnlyClassYieldsZeroWithWarnings) {
  const MappingTorusReport rep =
      assemble_mapping_torus(make_mapping_class(mat2(0, -1, 1, 0)), 2);
  EXPECT_EQ(rep.partition.value, Complex(0.0, 0.0));
  EXPECT_TRUE(rep.partition.per_point.empty());
  EXPECT_EQ(rep.warnings.size(), 2u);
  EXPECT_EQ(rep.shifted_level, 4);
}

TEST(Assemble, OrderThreeClassGivesInverseSqrtThree) {
  const MappingTorusReport rep =
      assemble_mapping_torus(make_mapping_class(mat2(0, -1, 1, -1)), 1);
  ASSERT_EQ(rep.generic_data.size(), 1u);
  const FixedPointDatum& d = rep.generic_data[0];
  EXPECT_NEAR(d.abs_det, 3.0, 1e-10);
  EXPECT_NEAR(d.eta, 2.0 / 3.0, 1e-10);
  EXPECT_EQ(d.flow_index, 0);
  EXPECT_NEAR(std::abs(rep.partition.value - Complex(1.0 / std::sqrt(3.0), 0.0)), 0.0, 1e-10);
  EXPECT_EQ(rep.torus_count_plus, 3);
  EXPECT_EQ(rep.torus_count_minus, 1);
}

TEST(Assemble, MixedSignClassAlignsFramesForTheFlow) {
  // Trace five: one sign-plus hyperbolic point and three sign-minus
  // neg-hyperbolic points; the flow endpoints then live in different frames
  // and exercise the alignment path.
  const MappingTorusReport rep =
      assemble_mapping_torus(make_mapping_class(mat2(1, 1, 3, 4)), 1);
  ASSERT_EQ(rep.generic_data.size(), 4u);
  for (const auto& d : rep.generic_data) {
    EXPECT_EQ(d.flow_index, 0) << d.label;
    EXPECT_EQ(d.kernel_dim, 0);
  }
  EXPECT_EQ(rep.torus_count_plus, 3);
  EXPECT_EQ(rep.torus_count_minus, 7);
  // Torsion normalization is consistent per point.
  const MappingClass mc = make_mapping_class(mat2(1, 1, 3, 4));
  size_t gi = 0;
  for (const auto& p : rep.points) {
    if (p.stabilizer_class != StabilizerClass::GenericAbelian) continue;
    const double torsion = torsion_sqrt_contribution(h1_action_matrix(mc, p));
    EXPECT_NEAR(torsion, 1.0 / std::sqrt(rep.generic_data[gi].abs_det), 1e-12);
    ++gi;
  }
}

TEST(Assemble, ShiftedActionsArePinnedToTheLattice) {
  // At level k the phase angles are multiples of 2*pi/5 on the trace-three
  // class (relative fractions live in (1/5) Z).
  const MappingTorusReport rep =
      assemble_mapping_torus(make_mapping_class(mat2(2, 1, 1, 1)), 1);
  ASSERT_EQ(rep.generic_data.size(), 2u);
  EXPECT_NEAR(rep.generic_data[0].action, 0.0, 1e-15);
  const double expected = 2.0 * kPi * std::fmod(3.0 * (2.0 / 5.0), 1.0);
  EXPECT_NEAR(rep.generic_data[1].action, expected, 1e-12);
}

TEST(Assemble, ConjugationAndInversionPreserveTheMagnitude) {
  const auto norm_z = [](const Eigen::Matrix<long long, 2, 2>& beta) {
    return std::abs(assemble_mapping_torus(make_mapping_class(beta), 2).partition.value);
  };
  for (const auto& beta : {mat2(2, 1, 1, 1), mat2(0, -1, 1, -1), mat2(1, 1, 3, 4)}) {
    // gamma = [[1, 1], [0, 1]] in SL(2, Z).
    const Eigen::Matrix<long long, 2, 2> gamma = mat2(1, 1, 0, 1);
    const Eigen::Matrix<long long, 2, 2> gamma_inv = mat2(1, -1, 0, 1);
    const Eigen::Matrix<long long, 2, 2> conj = gamma * beta * gamma_inv;
    const Eigen::Matrix<long long, 2, 2> inverse =
        mat2(beta(1, 1), -beta(0, 1), -beta(1, 0), beta(0, 0));
    const double z = norm_z(beta);
    EXPECT_NEAR(norm_z(conj), z, 1e-9);
    EXPECT_NEAR(norm_z(inverse), z, 1e-9);
  }
}

TEST(Assemble, ReportFlagsRecordConventions) {
  const PartitionReport rep = build_mapping_torus_report(make_mapping_class(mat2(2, 1, 1, 1)), 2);
  bool saw_shift = false, saw_scale = false;
  for (const auto& [key, value] : rep.convention_flags) {
    if (key == "level_shift") {
      saw_shift = true;
      EXPECT_EQ(value, "4");
    }
    if (key == "omega_scale_over_2pi") saw_scale = true;
  }
  EXPECT_TRUE(saw_shift);
  EXPECT_TRUE(saw_scale);
  EXPECT_THROW(build_mapping_torus_report(make_mapping_class(mat2(2, 1, 1, 1)), 0), ConfigError);
}
