#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace coset {

using CMatrix = Eigen::MatrixXcd;
using complexd = std::complex<double>;

/// Base class for all library errors.
struct CosetError : std::runtime_error {
  explicit CosetError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NotPositiveDefinite : CosetError {
  using CosetError::CosetError;
};
struct AmbientMismatch : CosetError {
  using CosetError::CosetError;
};
struct NonCommuting : CosetError {
  using CosetError::CosetError;
};
struct NotInvariant : CosetError {
  using CosetError::CosetError;
};
struct NotInGroup : CosetError {
  using CosetError::CosetError;
};
struct InternalInconsistency : CosetError {
  using CosetError::CosetError;
};
struct IllConditioned : CosetError {
  using CosetError::CosetError;
};
struct AlreadyClosed : CosetError {
  using CosetError::CosetError;
};
struct ExtensionStalled : CosetError {
  using CosetError::CosetError;
};
struct NotReduced : CosetError {
  using CosetError::CosetError;
};
struct NotInZeroFiber : CosetError {
  using CosetError::CosetError;
};
struct LatticeTooCoarse : CosetError {
  using CosetError::CosetError;
};

/// Numerical thresholds shared across the library. Matrices in scope are
/// small (N <= 16) and well conditioned, so the margins between noise floor
/// and structure are generous.
struct Tolerances {
  double rank = 1e-9;      // singular-value cutoff for rank decisions
  double orth = 1e-10;     // Gram-matrix orthonormality
  double herm = 1e-10;     // Hermitian symmetry of inputs
  double pd = 1e-12;       // positive-definiteness floor
  double comm = 1e-8;      // commutator residual for joint eigensplits
  double cluster = 1e-6;   // eigenvalue clustering radius
  double member = 1e-7;    // Lie-algebra membership (log amplifies error)
  double weight = 1e-8;    // weight-functional zero test
  double nilzero = 1e-9;   // relative nilpotent-part cutoff
};

/// Real inner product <X,Y> = Re tr(X * conj(Y)^T) on complex matrices.
inline double frob_inner(const CMatrix& x, const CMatrix& y) {
  return x.cwiseProduct(y.conjugate()).sum().real();
}

/// Hermitian inner product tr(X * conj(Y)^T).
inline complexd herm_inner(const CMatrix& x, const CMatrix& y) {
  return x.cwiseProduct(y.conjugate()).sum();
}

inline double frob_norm(const CMatrix& x) { return x.norm(); }

/// Cartan involution of gl(N,C): X -> -conj(X)^T.
inline CMatrix theta_alg(const CMatrix& x) { return -x.adjoint(); }

/// Cartan involution on the group: g -> (conj(g)^T)^{-1}.
inline CMatrix theta_grp(const CMatrix& g) {
  return g.adjoint().inverse();
}

inline CMatrix bracket(const CMatrix& x, const CMatrix& y) {
  return x * y - y * x;
}

/// Matrix exponential by scaling-and-squaring with a [7/7] Pade core.
/// The argument is scaled to norm <= 0.5, where the Pade truncation error
/// is far below double precision.
inline CMatrix matexp(const CMatrix& x) {
  const Eigen::Index n = x.rows();
  double nrm = x.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
  int squarings = 0;
  if (nrm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
    squarings = std::min(squarings, 60);
  }
  CMatrix a = x / std::pow(2.0, squarings);

  // [7/7] Pade coefficients.
  static const double b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                             25200.0,    1512.0,    56.0,      1.0};
  const CMatrix id = CMatrix::Identity(n, n);
  CMatrix a2 = a * a;
  CMatrix a4 = a2 * a2;
  CMatrix a6 = a4 * a2;
  CMatrix u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  CMatrix v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  CMatrix r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

/// Inverse of matexp on the positive-definite Hermitian cone, computed by
/// unitary diagonalization and an entrywise real log of the eigenvalues.
/// Throws NotPositiveDefinite if an eigenvalue is at or below eps_pd.
inline CMatrix hermitian_log(const CMatrix& p, double eps_herm = 1e-10,
                             double eps_pd = 1e-12) {
  if (frob_norm(p - p.adjoint()) > eps_herm * (1.0 + frob_norm(p)))
    throw NotPositiveDefinite("hermitian_log: input is not Hermitian");
  CMatrix h = 0.5 * (p + p.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) <= eps_pd)
      throw NotPositiveDefinite("hermitian_log: eigenvalue " +
                                std::to_string(ev(i)) +
                                " not positive definite");
  }
  Eigen::VectorXcd logev = ev.array().log().cast<complexd>();
  return es.eigenvectors() * logev.asDiagonal() *
         es.eigenvectors().adjoint();
}

/// Principal log of a matrix close to the identity, via inverse scaling
/// (Denman-Beavers square roots) and the Mercator series. Handles
/// non-diagonalizable inputs such as exp(nilpotent).
inline CMatrix log_near_identity(const CMatrix& m, double radius = 0.25) {
  const Eigen::Index n = m.rows();
  const CMatrix id = CMatrix::Identity(n, n);
  CMatrix a = m;
  int k = 0;
  while ((a - id).norm() > radius && k < 20) {
    // Denman-Beavers iteration for the principal square root.
    CMatrix y = a, z = id;
    for (int it = 0; it < 60; ++it) {
      CMatrix yn = 0.5 * (y + z.inverse());
      CMatrix zn = 0.5 * (z + y.inverse());
      y = yn;
      z = zn;
      if ((y * y - a).norm() < 1e-14 * (1.0 + a.norm())) break;
    }
    a = y;
    ++k;
  }
  CMatrix e = a - id;
  CMatrix term = e;
  CMatrix acc = CMatrix::Zero(n, n);
  for (int j = 1; j <= 80; ++j) {
    acc += term / static_cast<double>(j) * ((j % 2) ? 1.0 : -1.0);
    term = term * e;
    if (term.norm() < 1e-18) break;
  }
  return acc * std::pow(2.0, k);
}

/// Principal log of a unitary matrix via Schur diagonalization; eigenvalue
/// arguments are taken in (-pi, pi].
inline CMatrix principal_log_unitary(const CMatrix& u) {
  Eigen::ComplexSchur<CMatrix> schur(u);
  const CMatrix& t = schur.matrixT();
  const CMatrix& q = schur.matrixU();
  const Eigen::Index n = u.rows();
  Eigen::VectorXcd logs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    complexd lam = t(i, i);
    logs(i) = complexd(0.0, std::atan2(lam.imag(), lam.real()));
  }
  return q * logs.asDiagonal() * q.adjoint();
}

}  // namespace coset
