#pragma once

#include <utility>

#include "coset/numeric.hpp"

namespace coset {

/// An involution of a matrix group given by conjugation with a fixed
/// matrix A, optionally composed with entrywise complex conjugation:
///   sigma(x) = A * eps(x) * A^{-1},  eps = conj or identity.
/// The same formula acts on the group and on its Lie algebra.
class InvolutionSpec {
 public:
  InvolutionSpec() = default;
  InvolutionSpec(CMatrix a, bool antiholomorphic)
      : a_(std::move(a)), antiholomorphic_(antiholomorphic) {
    a_inv_ = a_.inverse();
  }

  static InvolutionSpec identity_conjugation(Eigen::Index n) {
    return InvolutionSpec(CMatrix::Identity(n, n), true);
  }

  CMatrix apply(const CMatrix& x) const {
    if (antiholomorphic_) return a_ * x.conjugate() * a_inv_;
    return a_ * x * a_inv_;
  }

  CMatrix operator()(const CMatrix& x) const { return apply(x); }

  const CMatrix& conjugator() const { return a_; }
  bool antiholomorphic() const { return antiholomorphic_; }

  /// Residual of sigma(sigma(x)) = x on a probe matrix.
  double involutivity_residual(const CMatrix& probe) const {
    return frob_norm(apply(apply(probe)) - probe) / (1.0 + frob_norm(probe));
  }

 private:
  CMatrix a_, a_inv_;
  bool antiholomorphic_ = false;
};

}  // namespace coset
