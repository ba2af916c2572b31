#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "coset/scenario.hpp"

namespace coset {

/// Value of the gradient map at a group point: a pair
/// (beta1, beta2) in p^{sigma1} (+) p^{sigma2}.
struct GradientValue {
  CMatrix beta1, beta2;
  double norm = 0.0;
  double residual1 = 0.0;  // projection residual onto p^{sigma1}
  double residual2 = 0.0;
};

/// Gradient map of the (G1 x G2)-action at x = k exp(xi):
///   Phi(x) = ( Ad(k)xi + sigma1(Ad(k)xi),  -(xi + sigma2(xi)) ).
inline GradientValue phi(const Scenario& s, const GroupPoint& x) {
  CMatrix adk = x.k * x.xi * x.k.inverse();
  CMatrix b1 = adk + s.sigma1(adk);
  CMatrix b2 = -(x.xi + s.sigma2(x.xi));
  GradientValue v;
  v.residual1 = s.p_s1p.dim() ? s.p_s1p.distance(b1) : frob_norm(b1);
  v.residual2 = s.p_s2p.dim() ? s.p_s2p.distance(b2) : frob_norm(b2);
  v.beta1 = std::move(b1);
  v.beta2 = std::move(b2);
  v.norm = std::sqrt(frob_norm(v.beta1) * frob_norm(v.beta1) +
                     frob_norm(v.beta2) * frob_norm(v.beta2));
  return v;
}

/// The zero fiber has the equivalent description
/// xi in p^{-sigma2} /\ Ad(k^{-1}) p^{-sigma1}; this computes the distance
/// of xi to that intersection.
inline double zero_fiber_membership_distance(const Scenario& s,
                                             const GroupPoint& x) {
  RealSubspace moved = s.ad_subspace(x.k.inverse(), s.p_s1m);
  RealSubspace inter = s.p_s2m.intersect(moved, s.tol.rank);
  return inter.dim() ? inter.distance(x.xi) : frob_norm(x.xi);
}

/// Norm test ||Phi(x)|| < tol, cross-checked against the membership
/// characterization of the zero fiber. The two characterizations agree up
/// to conditioning; a disagreement outside the gray zone (factor 100)
/// signals a tolerance or scenario defect.
inline bool in_zero_fiber(const Scenario& s, const GroupPoint& x, double tol) {
  GradientValue v = phi(s, x);
  bool by_norm = v.norm < tol;
  double dist = zero_fiber_membership_distance(s, x);
  bool by_member = dist < tol;
  if (by_norm != by_member) {
    double lo = std::min(v.norm, dist), hi = std::max(v.norm, dist);
    if (lo < tol / 100.0 || hi > 100.0 * tol)
      throw InternalInconsistency(
          "in_zero_fiber: characterizations disagree, norm=" +
          std::to_string(v.norm) + " membership=" + std::to_string(dist));
  }
  return by_norm;
}

struct FlowParams {
  double tol_converge = 1e-9;
  long max_iters = 100000;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double initial_step = 1.0;
  double stall_step = 1e-14;
  long trace_stride = 1;  // store every k-th step in the trace
};

struct FlowStep {
  double grad_norm = 0.0;
  double step_size = 0.0;
};

struct FlowTrace {
  std::vector<FlowStep> steps;
  bool converged = false;
  bool stalled = false;
  long iterations = 0;
  double final_grad_norm = 0.0;
  double invariant_drift = 0.0;  // relative drift of tau_x char-poly coeffs
};

struct FlowResult {
  GroupPoint x0;
  FlowTrace trace;
  CMatrix g1, g2;  // accumulated group motion: x0 = g1 * x * g2^{-1}
};

namespace detail {

/// Coefficients of the characteristic polynomial of a real operator
/// matrix, via its complex eigenvalues (stable enough at dim <= 32).
inline Eigen::VectorXcd charpoly_coeffs(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  Eigen::VectorXcd ev = es.eigenvalues();
  Eigen::Index d = ev.size();
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(d + 1);
  c(0) = 1.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j >= 1; --j) c(j) = c(j) - ev(i) * c(j - 1);
  }
  return c;
}

inline double relative_drift(const Eigen::VectorXcd& a,
                             const Eigen::VectorXcd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst,
                     std::abs(a(i) - b(i)) / (1.0 + std::abs(a(i))));
  return worst;
}

}  // namespace detail

/// Discrete gradient flow toward the zero fiber. Each accepted step moves
///   x <- exp(-s b1) x exp(s b2),  (b1, b2) = Phi(x),
/// with Armijo backtracking on ||Phi||^2, so every iterate stays exactly on
/// the (G1 x G2)-orbit of the start point. converged means the final point
/// approximates the unique closed orbit in the orbit closure; hitting
/// max_iters or a stalled step size is the expected signature of a strictly
/// non-closed orbit.
inline FlowResult flow_to_closed(const Scenario& s, const GroupPoint& start,
                                 const FlowParams& params = {}) {
  FlowResult res;
  res.g1 = CMatrix::Identity(s.n(), s.n());
  res.g2 = CMatrix::Identity(s.n(), s.n());
  GroupPoint x = start;

  Eigen::VectorXcd inv0 = detail::charpoly_coeffs(s.tau_x_matrix(x.value));

  GradientValue g = phi(s, x);
  double f = g.norm * g.norm;
  res.trace.steps.push_back({g.norm, 0.0});
  double step = params.initial_step;

  long it = 0;
  for (; it < params.max_iters; ++it) {
    if (g.norm < params.tol_converge) {
      res.trace.converged = true;
      break;
    }
    // Flat-metric norm of the fundamental vector field; vanishes only at
    // critical points of ||Phi||^2.
    CMatrix v = g.beta1 * x.value - x.value * g.beta2;
    double q = frob_inner(v, v);
    bool accepted = false;
    double st = std::min(step * 2.0, params.initial_step);
    while (st >= params.stall_step) {
      CMatrix e1 = matexp(-st * g.beta1);
      CMatrix e2 = matexp(st * g.beta2);
      CMatrix xnew = e1 * x.value * e2;
      GroupPoint cand;
      try {
        cand = cartan_factor(s, xnew);
      } catch (const CosetError&) {
        st *= params.armijo_shrink;
        continue;
      }
      GradientValue gn = phi(s, cand);
      double fn = gn.norm * gn.norm;
      if (fn <= f - params.armijo_c * st * 2.0 * q) {
        res.g1 = e1 * res.g1;
        res.g2 = e2.inverse() * res.g2;
        x = std::move(cand);
        g = std::move(gn);
        f = fn;
        step = st;
        accepted = true;
        break;
      }
      st *= params.armijo_shrink;
    }
    if (!accepted) {
      res.trace.stalled = true;
      break;
    }
    if ((it + 1) % params.trace_stride == 0 ||
        g.norm < params.tol_converge)
      res.trace.steps.push_back({g.norm, step});
  }

  res.trace.iterations = it;
  res.trace.final_grad_norm = g.norm;
  if (g.norm < params.tol_converge) res.trace.converged = true;
  Eigen::VectorXcd inv1 = detail::charpoly_coeffs(s.tau_x_matrix(x.value));
  res.trace.invariant_drift = detail::relative_drift(inv0, inv1);
  res.x0 = std::move(x);
  return res;
}

/// Per-point infinitesimal data: the isotropy algebra h^x, the slice space
/// q^x, and the automorphism tau_x as an operator on the algebra.
struct IsotropyData {
  RealSubspace hx;  // g^{sigma2} /\ Ad(x^{-1}) g^{sigma1}
  RealSubspace qx;  // g^{-sigma2} /\ Ad(x^{-1}) g^{-sigma1}
  Eigen::MatrixXd taux;  // operator matrix on the algebra
  double taux_residual = 0.0;
  Eigen::Index orbit_dim = 0;  // dim(g^{sigma2} + Ad(x^{-1}) g^{sigma1})
};

inline IsotropyData isotropy_and_slice(const Scenario& s, const GroupPoint& x) {
  IsotropyData d;
  CMatrix xinv = x.value.inverse();
  RealSubspace m1p = s.ad_subspace(xinv, s.g_s1p);
  RealSubspace m1m = s.ad_subspace(xinv, s.g_s1m);
  d.hx = s.g_s2p.intersect(m1p, s.tol.rank);
  d.qx = s.g_s2m.intersect(m1m, s.tol.rank);
  d.orbit_dim = s.g_s2p.sum(m1p, s.tol.rank).dim();
  auto f = [&](const CMatrix& v) {
    return s.sigma2(xinv * s.sigma1(x.value * v * xinv) * x.value);
  };
  auto [m, resid] = s.algebra().operator_matrix(f);
  d.taux = std::move(m);
  d.taux_residual = resid;
  return d;
}

/// Diagonalizability test for an operator matrix: per eigenvalue cluster,
/// rank(T - lambda)^2 must equal rank(T - lambda).
inline bool is_semisimple_operator(const Eigen::MatrixXd& m,
                                   double eps_cluster, double eps_rank) {
  Eigen::MatrixXcd mc = m.cast<complexd>();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(mc, false);
  auto clusters = detail::cluster_values(ces.eigenvalues(), eps_cluster);
  const Eigen::Index d = m.rows();
  for (const auto& cl : clusters) {
    complexd mean = 0.0;
    for (auto i : cl) mean += ces.eigenvalues()(i);
    mean /= static_cast<double>(cl.size());
    Eigen::MatrixXcd shifted = mc - mean * Eigen::MatrixXcd::Identity(d, d);
    Eigen::Index r1 =
        d - detail::nullspace_cols(shifted, eps_rank).cols();
    Eigen::Index r2 =
        d - detail::nullspace_cols(Eigen::MatrixXcd(shifted * shifted),
                                   eps_rank).cols();
    if (r1 != r2) return false;
  }
  return true;
}

/// Fixed space of tau_x inside the algebra.
inline RealSubspace tau_x_fixed_space(const Scenario& s,
                                      const IsotropyData& iso) {
  const Eigen::Index d = s.algebra().dim();
  Eigen::MatrixXd fixed_c = detail::nullspace_cols(
      Eigen::MatrixXd(iso.taux - Eigen::MatrixXd::Identity(d, d)),
      s.tol.rank);
  std::vector<CMatrix> gens;
  for (Eigen::Index j = 0; j < fixed_c.cols(); ++j)
    gens.push_back(s.algebra().from_coords_of(fixed_c.col(j)));
  if (gens.empty()) return RealSubspace::zero(s.n());
  return RealSubspace::span_of(gens, s.tol.rank);
}

}  // namespace coset
