#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "semiclassic/defaults.hpp"
#include "semiclassic/errors.hpp"
#include "semiclassic/linalg.hpp"

namespace semiclassic {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct SymplecticMatrix {
  int n = 0;        // half-dimension
  Mat entries;      // 2n x 2n, M^T J0 M = J0
};

inline SymplecticMatrix make_symplectic(const Mat& m, double tol = defaults::tol_symp) {
  require_square_even(m, "make_symplectic");
  if (!check_symplectic(m, tol)) {
    throw ConfigError("matrix is not symplectic within tolerance " + std::to_string(tol));
  }
  // Implied by the form condition, asserted independently.
  if (std::abs(m.determinant() - 1.0) > std::max(tol, 1e-12 * max_abs(m))) {
    throw ConfigError("symplectic matrix must have determinant 1");
  }
  SymplecticMatrix out;
  out.n = static_cast<int>(m.rows()) / 2;
  out.entries = m;
  return out;
}

enum class CartanBlockKind { Unitary, Hyperbolic, ComplexQuad, NegHyperbolic };

inline const char* to_string(CartanBlockKind k) {
  switch (k) {
    case CartanBlockKind::Unitary: return "unitary";
    case CartanBlockKind::Hyperbolic: return "hyperbolic";
    case CartanBlockKind::ComplexQuad: return "complex_quad";
    case CartanBlockKind::NegHyperbolic: return "neg_hyperbolic";
  }
  return "?";
}

// One indecomposable block of the generator: a 2-dim rotation (Unitary,
// angle h in (0, 2pi)), a 2-dim real-eigenvalue pair (Hyperbolic, rate h > 0),
// a 4-dim eigenvalue quadruple (ComplexQuad, exponent z with Re z, Im z != 0),
// or a 2-dim negative-real-eigenvalue pair (NegHyperbolic, rate h >= 0; the
// generator carries +i*pi on both diagonal entries so exp lands on -e^{+-h}).
struct CartanBlock {
  CartanBlockKind kind = CartanBlockKind::Unitary;
  double param_h = 0.0;
  Complex param_z = Complex(0.0, 0.0);

  int dim() const { return kind == CartanBlockKind::ComplexQuad ? 4 : 2; }
};

inline void validate_block(const CartanBlock& b) {
  switch (b.kind) {
    case CartanBlockKind::Unitary:
      if (!(b.param_h > 0.0 && b.param_h < 2.0 * kPi)) {
        throw ConfigError("unitary block angle must lie in (0, 2*pi)");
      }
      break;
    case CartanBlockKind::Hyperbolic:
      if (!(b.param_h > 0.0)) {
        throw ConfigError("hyperbolic block rate must be positive");
      }
      break;
    case CartanBlockKind::NegHyperbolic:
      // h = 0 is legitimate: eigenvalue pair (-1, -1), e.g. df = -I.
      if (!(b.param_h >= 0.0)) {
        throw ConfigError("neg-hyperbolic block rate must be nonnegative");
      }
      break;
    case CartanBlockKind::ComplexQuad:
      if (b.param_z.real() == 0.0 || b.param_z.imag() == 0.0) {
        throw ConfigError("complex-quad exponent needs nonzero real and imaginary parts");
      }
      break;
  }
}

struct ComplexStructure {
  Mat entries;  // J with J^2 = -I, compatible with omega, omega(., J.) > 0
};

inline ComplexStructure make_complex_structure(const Mat& j, double tol = defaults::tol_symp) {
  require_square_even(j, "make_complex_structure");
  const int d = static_cast<int>(j.rows());
  const double scale = std::max(1.0, max_abs(j) * max_abs(j));
  if (max_abs(j * j + Mat::Identity(d, d)) > tol * scale) {
    throw ConfigError("complex structure must square to -I");
  }
  const Mat j0 = ambient_j0(d);
  if (max_abs(j.transpose() * j0 * j - j0) > tol * scale) {
    throw ConfigError("complex structure must preserve the symplectic form");
  }
  const Mat s = omega_gram(d) * j;  // omega(., J.)
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError("complex structure must be positive (omega(., J.) > 0)");
  }
  return ComplexStructure{j};
}

// Generator data of D = -1/2 J (d/dt + E). E is complex only through the
// +i*pi diagonal shift carried by NegHyperbolic blocks.
struct OperatorSpec {
  int n = 0;
  ComplexStructure J;
  CMat E;
};

// JE is self-adjoint in the inner product <x,y> = x^dag S y with S = W*J,
// the positive form attached to J; this is the residual of that condition.
// In a standard frame S = I and it reduces to plain Hermiticity.
inline double metric_selfadjoint_residual(const OperatorSpec& spec) {
  const Mat s = omega_gram(2 * spec.n) * spec.J.entries;
  const CMat je = spec.J.entries.cast<Complex>() * spec.E;
  const CMat sc = s.cast<Complex>();
  return max_abs(sc * je - je.adjoint() * sc);
}

inline OperatorSpec make_operator_spec(const ComplexStructure& j, const CMat& e,
                                       double tol_decomp = defaults::tol_decomp,
                                       double tol_symp = defaults::tol_symp) {
  if (e.rows() != e.cols() || e.rows() != j.entries.rows()) {
    throw DimensionError("operator spec needs E square and shaped like J");
  }
  OperatorSpec spec;
  spec.n = static_cast<int>(e.rows()) / 2;
  spec.J = j;
  spec.E = e;

  const CMat exp_e = e.exp();
  const double scale = std::max(1.0, max_abs(exp_e));
  if (max_abs(CMat(exp_e.imag().cast<Complex>())) > tol_decomp * scale ||
      !check_symplectic(exp_e.real(), tol_decomp * scale)) {
    throw ConfigError("exp(E) must be a real symplectic matrix");
  }
  const double sa_scale = std::max(1.0, max_abs(spec.E)) * std::max(1.0, max_abs(j.entries));
  if (metric_selfadjoint_residual(spec) > tol_symp * 100.0 * sa_scale) {
    throw ConfigError("J*E must be self-adjoint with respect to the J-metric");
  }
  return spec;
}

struct CartanDecomposition {
  std::vector<CartanBlock> blocks;  // sorted: unitary, hyperbolic, quad, neg-hyperbolic
  Mat conjugator;                   // g with g * E_std * g^{-1} = E
  OperatorSpec source;              // (J, E) in the source frame, exp(E) = M
};

// ---------------------------------------------------------------------------
// Standard block assemblies
// ---------------------------------------------------------------------------

inline CMat standard_block_generator(const std::vector<CartanBlock>& blocks) {
  int d = 0;
  for (const auto& b : blocks) d += b.dim();
  CMat e = CMat::Zero(d, d);
  int at = 0;
  for (const auto& b : blocks) {
    switch (b.kind) {
      case CartanBlockKind::Unitary:
        e(at, at + 1) = -b.param_h;
        e(at + 1, at) = b.param_h;
        break;
      case CartanBlockKind::Hyperbolic:
        e(at, at) = b.param_h;
        e(at + 1, at + 1) = -b.param_h;
        break;
      case CartanBlockKind::NegHyperbolic:
        e(at, at) = Complex(b.param_h, kPi);
        e(at + 1, at + 1) = Complex(-b.param_h, kPi);
        break;
      case CartanBlockKind::ComplexQuad: {
        const double h1 = b.param_z.real();
        const double h2 = b.param_z.imag();
        Mat a(2, 2);
        a << h1, -h2, h2, h1;
        e.block(at, at, 2, 2) = a.cast<Complex>();
        e.block(at + 2, at + 2, 2, 2) = (-a.transpose()).cast<Complex>();
        break;
      }
    }
    at += b.dim();
  }
  return e;
}

inline Mat standard_block_j(const std::vector<CartanBlock>& blocks) {
  int d = 0;
  for (const auto& b : blocks) d += b.dim();
  Mat j = Mat::Zero(d, d);
  int at = 0;
  for (const auto& b : blocks) {
    const int half = b.dim() / 2;
    j.block(at, at + half, half, half) = -Mat::Identity(half, half);
    j.block(at + half, at, half, half) = Mat::Identity(half, half);
    at += b.dim();
  }
  return j;
}

// Gram matrix of the symplectic form in the standard block basis (blocks are
// omega-orthogonal to each other; within a block the basis pairs satisfy
// omega(x, y) = 1).
inline Mat standard_block_gram(const std::vector<CartanBlock>& blocks) {
  return standard_block_j(blocks).transpose();
}

// ---------------------------------------------------------------------------
// SL(2,R) trichotomy
// ---------------------------------------------------------------------------

enum class Sl2Class { Hyperbolic, Unitary, Parabolic };

inline const char* to_string(Sl2Class c) {
  switch (c) {
    case Sl2Class::Hyperbolic: return "hyperbolic";
    case Sl2Class::Unitary: return "unitary";
    case Sl2Class::Parabolic: return "parabolic";
  }
  return "?";
}

inline Sl2Class classify_sl2(const SymplecticMatrix& m, double tol = defaults::tol_trace) {
  if (m.n != 1) {
    throw DimensionError("classify_sl2 is defined for 2x2 matrices only");
  }
  const double t = m.entries.trace();
  if (std::abs(std::abs(t) - 2.0) <= tol) return Sl2Class::Parabolic;
  return std::abs(t) > 2.0 ? Sl2Class::Hyperbolic : Sl2Class::Unitary;
}

// ---------------------------------------------------------------------------
// Cartan decomposition
// ---------------------------------------------------------------------------

namespace detail {

// Orthonormal basis of ker(A) via SVD; relative cutoff on singular values.
inline CMat kernel_basis(const CMat& a, int expected_dim) {
  Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = std::max(1e-8 * sv(0), 1e-14);
  int dim = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) <= cutoff) ++dim;
  }
  if (dim < expected_dim) {
    throw ParabolicError("eigenspace dimension falls short of multiplicity (non-semisimple input)");
  }
  return svd.matrixV().rightCols(expected_dim);
}

struct PendingBlock {
  CartanBlock block;
  Mat cols;  // real column group for the conjugator
};

inline std::pair<double, double> sort_key(const CartanBlock& b) {
  switch (b.kind) {
    case CartanBlockKind::Unitary: return {b.param_h, 0.0};
    case CartanBlockKind::Hyperbolic: return {b.param_h, 0.0};
    case CartanBlockKind::ComplexQuad: return {b.param_z.real(), b.param_z.imag()};
    case CartanBlockKind::NegHyperbolic: return {b.param_h, 0.0};
  }
  return {0.0, 0.0};
}

inline int kind_rank(CartanBlockKind k) {
  switch (k) {
    case CartanBlockKind::Unitary: return 0;
    case CartanBlockKind::Hyperbolic: return 1;
    case CartanBlockKind::ComplexQuad: return 2;
    case CartanBlockKind::NegHyperbolic: return 3;
  }
  return 4;
}

}  // namespace detail

inline CartanDecomposition cartan_decompose(const SymplecticMatrix& m,
                                            double tol_eig = defaults::tol_eig,
                                            double tol_decomp = defaults::tol_decomp) {
  const int d = 2 * m.n;
  const Mat gram = omega_gram(d);
  const CMat gram_c = gram.cast<Complex>();
  const CMat mc = m.entries.cast<Complex>();

  Eigen::ComplexEigenSolver<CMat> ces(mc, /*computeEigenvectors=*/false);
  if (ces.info() != Eigen::Success) {
    throw ParabolicError("eigenvalue computation failed");
  }
  std::vector<Complex> eigs(ces.eigenvalues().data(), ces.eigenvalues().data() + d);

  for (const Complex& lam : eigs) {
    if (std::abs(lam - 1.0) <= tol_eig) {
      throw DegenerateFixedPointError("1 is an eigenvalue of the symplectic map");
    }
  }

  // Cluster eigenvalues (they arrive unordered; multiplicities are tiny).
  std::vector<std::pair<Complex, int>> clusters;
  std::sort(eigs.begin(), eigs.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  for (const Complex& lam : eigs) {
    if (!clusters.empty() && std::abs(lam - clusters.back().first) <= std::max(tol_eig, 1e-9)) {
      // Re-center the representative on the running mean for stability.
      auto& c = clusters.back();
      c.first = (c.first * static_cast<double>(c.second) + lam) / static_cast<double>(c.second + 1);
      c.second += 1;
    } else {
      clusters.emplace_back(lam, 1);
    }
  }

  const auto is_real = [&](const Complex& lam) { return std::abs(lam.imag()) <= tol_eig * std::max(1.0, std::abs(lam)); };
  const auto is_unit = [&](const Complex& lam) { return std::abs(std::abs(lam) - 1.0) <= tol_eig; };
  const auto find_cluster = [&](const Complex& target) -> int {
    for (int i = 0; i < static_cast<int>(clusters.size()); ++i) {
      if (std::abs(clusters[i].first - target) <= 1e-6 * std::max(1.0, std::abs(target))) return i;
    }
    throw ParabolicError("eigenvalue pairing failed: missing partner for a symplectic pair");
  };

  std::vector<detail::PendingBlock> pending;

  for (int ci = 0; ci < static_cast<int>(clusters.size()); ++ci) {
    const Complex lam = clusters[ci].first;
    const int mult = clusters[ci].second;

    if (is_real(lam)) {
      const double lr = lam.real();
      if (std::abs(lr + 1.0) <= tol_eig) {
        // Eigenvalue -1: self-paired. Build a symplectic basis inside the
        // eigenspace; each omega-pair is one NegHyperbolic(0) block.
        CMat basis_c = detail::kernel_basis(mc - lam * CMat::Identity(d, d), mult);
        // The eigenspace of a real eigenvalue of a real matrix has a real basis.
        Mat basis(d, mult);
        for (int i = 0; i < mult; ++i) {
          CVec w = basis_c.col(i);
          // Rotate the phase so the column is as real as possible.
          int argmax = 0;
          w.cwiseAbs().maxCoeff(&argmax);
          w *= std::conj(w(argmax)) / std::abs(w(argmax));
          basis.col(i) = w.real();
        }
        // Re-orthonormalize the realified basis.
        Eigen::HouseholderQR<Mat> qr(basis);
        basis = qr.householderQ() * Mat::Identity(d, mult);
        if (mult % 2 != 0) {
          throw ParabolicError("odd multiplicity at eigenvalue -1 cannot carry a symplectic form");
        }
        std::vector<Vec> pool;
        for (int i = 0; i < mult; ++i) pool.push_back(basis.col(i));
        while (!pool.empty()) {
          Vec x = pool.front();
          pool.erase(pool.begin());
          int best = -1;
          double best_abs = 0.0;
          for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
            const double w = std::abs(omega_real(gram, x, pool[i]));
            if (w > best_abs) {
              best_abs = w;
              best = i;
            }
          }
          if (best < 0 || best_abs < 1e-10) {
            throw ParabolicError("symplectic pairing degenerates on the -1 eigenspace");
          }
          Vec y = pool[best] / omega_real(gram, x, pool[best]);
          pool.erase(pool.begin() + best);
          for (auto& v : pool) {
            v = v + omega_real(gram, y, v) * x - omega_real(gram, x, v) * y;
          }
          detail::PendingBlock pb;
          pb.block.kind = CartanBlockKind::NegHyperbolic;
          pb.block.param_h = 0.0;
          pb.cols = Mat(d, 2);
          pb.cols.col(0) = x;
          pb.cols.col(1) = y;
          pending.push_back(std::move(pb));
        }
        continue;
      }
      if (std::abs(lr) <= 1.0) continue;  // consumed as the partner of 1/lambda

      // Real pair (lambda, 1/lambda), |lambda| > 1.
      const int cj = find_cluster(Complex(1.0 / lr, 0.0));
      if (clusters[cj].second != mult) {
        throw ParabolicError("multiplicity mismatch inside a real symplectic eigenvalue pair");
      }
      CMat xc = detail::kernel_basis(mc - Complex(lr, 0.0) * CMat::Identity(d, d), mult);
      CMat yc = detail::kernel_basis(mc - Complex(1.0 / lr, 0.0) * CMat::Identity(d, d), mult);
      Mat x(d, mult), y(d, mult);
      for (int i = 0; i < mult; ++i) {
        CVec wx = xc.col(i), wy = yc.col(i);
        int ax = 0, ay = 0;
        wx.cwiseAbs().maxCoeff(&ax);
        wy.cwiseAbs().maxCoeff(&ay);
        x.col(i) = (wx * (std::conj(wx(ax)) / std::abs(wx(ax)))).real();
        y.col(i) = (wy * (std::conj(wy(ay)) / std::abs(wy(ay)))).real();
      }
      // Normalize the duality: omega(x_i, y'_j) = delta_ij.
      Mat pairing = x.transpose() * gram * y;
      Eigen::FullPivLU<Mat> lu(pairing);
      if (!lu.isInvertible()) {
        throw ParabolicError("symplectic pairing between inverse eigenspaces is singular");
      }
      Mat yprime = y * lu.inverse();
      const bool negative = lr < 0.0;
      const double h = std::log(std::abs(lr));
      for (int i = 0; i < mult; ++i) {
        detail::PendingBlock pb;
        pb.block.kind = negative ? CartanBlockKind::NegHyperbolic : CartanBlockKind::Hyperbolic;
        pb.block.param_h = h;
        pb.cols = Mat(d, 2);
        pb.cols.col(0) = x.col(i);
        pb.cols.col(1) = yprime.col(i);
        pending.push_back(std::move(pb));
      }
      continue;
    }

    if (lam.imag() < 0.0) continue;  // conjugate family handles it

    if (is_unit(lam)) {
      // Unit-circle conjugate pair, angle h0 in (0, pi). The Hermitian form
      // q(w) = -i * omega(conj(w), w) splits the eigenspace: q < 0 vectors give
      // angle h0, q > 0 vectors (conjugated) give angle 2*pi - h0.
      const double h0 = std::arg(lam);
      CMat basis = detail::kernel_basis(mc - lam * CMat::Identity(d, d), mult);
      CMat q(mult, mult);
      for (int i = 0; i < mult; ++i) {
        for (int j = 0; j < mult; ++j) {
          q(i, j) = -kI * omega_bilinear(gram, CVec(basis.col(i).conjugate()), CVec(basis.col(j)));
        }
      }
      Eigen::SelfAdjointEigenSolver<CMat> qes(0.5 * (q + q.adjoint()));
      for (int j = 0; j < mult; ++j) {
        const double dj = qes.eigenvalues()(j);
        if (std::abs(dj) < 1e-10) {
          throw ParabolicError("indefinite pairing degenerates on a unit-circle eigenspace");
        }
        CVec w = basis * qes.eigenvectors().col(j);
        double h = h0;
        if (dj > 0.0) {
          w = w.conjugate();
          h = 2.0 * kPi - h0;
        }
        w *= std::sqrt(2.0 / std::abs(dj));  // now q(w) = -2, i.e. omega(Re w, -Im w) = 1
        detail::PendingBlock pb;
        pb.block.kind = CartanBlockKind::Unitary;
        pb.block.param_h = h;
        pb.cols = Mat(d, 2);
        pb.cols.col(0) = w.real();
        pb.cols.col(1) = -w.imag();
        pending.push_back(std::move(pb));
      }
      continue;
    }

    if (std::abs(lam) < 1.0) continue;  // consumed as the partner of 1/lambda

    // Generic quadruple {lambda, conj, 1/lambda, 1/conj}, |lambda| > 1, Im > 0.
    const Complex z = std::log(lam);  // Re z > 0, Im z in (0, pi)
    const int cj = find_cluster(1.0 / lam);
    if (clusters[cj].second != mult) {
      throw ParabolicError("multiplicity mismatch inside a complex eigenvalue quadruple");
    }
    CMat wbasis = detail::kernel_basis(mc - lam * CMat::Identity(d, d), mult);
    CMat wp = detail::kernel_basis(mc - (1.0 / lam) * CMat::Identity(d, d), mult);
    CMat pairing(mult, mult);
    for (int i = 0; i < mult; ++i) {
      for (int j = 0; j < mult; ++j) {
        pairing(i, j) = omega_bilinear(gram, CVec(wbasis.col(i)), CVec(wp.col(j)));
      }
    }
    Eigen::FullPivLU<CMat> lu(pairing);
    if (!lu.isInvertible()) {
      throw ParabolicError("symplectic pairing between inverse eigenspaces is singular");
    }
    CMat wpp = wp * (2.0 * lu.inverse());  // omega(w_i, w''_j) = 2 delta_ij
    for (int i = 0; i < mult; ++i) {
      const CVec w = wbasis.col(i);
      const CVec wq = wpp.col(i);
      detail::PendingBlock pb;
      pb.block.kind = CartanBlockKind::ComplexQuad;
      pb.block.param_z = z;
      pb.cols = Mat(d, 4);
      pb.cols.col(0) = w.real();
      pb.cols.col(1) = -w.imag();
      pb.cols.col(2) = wq.real();
      pb.cols.col(3) = wq.imag();
      pending.push_back(std::move(pb));
    }
  }

  std::sort(pending.begin(), pending.end(),
            [](const detail::PendingBlock& a, const detail::PendingBlock& b) {
              const int ra = detail::kind_rank(a.block.kind);
              const int rb = detail::kind_rank(b.block.kind);
              if (ra != rb) return ra < rb;
              return detail::sort_key(a.block) < detail::sort_key(b.block);
            });

  std::vector<CartanBlock> blocks;
  Mat g(d, d);
  int at = 0;
  for (const auto& pb : pending) {
    blocks.push_back(pb.block);
    g.block(0, at, d, pb.block.dim()) = pb.cols;
    at += pb.block.dim();
  }
  if (at != d) {
    throw ParabolicError("block dimensions do not fill the space");
  }

  Eigen::FullPivLU<Mat> glu(g);
  if (!glu.isInvertible()) {
    throw ParabolicError("conjugator is singular (non-semisimple input)");
  }
  const Mat ginv = glu.inverse();

  // The construction makes g map the standard-block form to the ambient one;
  // verify, since everything downstream (positivity of J, self-adjointness of
  // JE in the J-metric) rides on it.
  const Mat w_blk = standard_block_gram(blocks);
  if (max_abs(g.transpose() * gram * g - w_blk) > 1e-7 * std::max(1.0, max_abs(g) * max_abs(g))) {
    throw ParabolicError("conjugator failed the symplectic-form certification");
  }

  const CMat e = g.cast<Complex>() * standard_block_generator(blocks) * ginv.cast<Complex>();
  const Mat j = g * standard_block_j(blocks) * ginv;

  // Reassembly certification: exp(E) must reproduce the input.
  const CMat expe = e.exp();
  if (max_abs(CMat(expe - mc)) > tol_decomp * std::max(1.0, max_abs(m.entries))) {
    throw ParabolicError("exp(E) does not reproduce the source matrix (non-semisimple input?)");
  }

  CartanDecomposition dec;
  dec.blocks = std::move(blocks);
  dec.conjugator = g;
  dec.source = make_operator_spec(make_complex_structure(j, 1e-8), e, tol_decomp);
  return dec;
}

// Block-diagonal standard complex structure conjugated into the source frame.
inline ComplexStructure standard_j(const CartanDecomposition& dec) {
  Eigen::FullPivLU<Mat> lu(dec.conjugator);
  const Mat j = dec.conjugator * standard_block_j(dec.blocks) * lu.inverse();
  return make_complex_structure(j, 1e-8);
}

// Generator of M: E with exp(E) = M, J the canonical complex structure.
inline OperatorSpec log_generator(const SymplecticMatrix& m,
                                  double tol_eig = defaults::tol_eig,
                                  double tol_decomp = defaults::tol_decomp) {
  return cartan_decompose(m, tol_eig, tol_decomp).source;
}

}  // namespace semiclassic
