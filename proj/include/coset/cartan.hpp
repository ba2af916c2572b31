#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coset/gradient.hpp"
#include "coset/symmetric_pair.hpp"

namespace coset {

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Fundamental Cartan data
// ---------------------------------------------------------------------------

/// t0 maximal Abelian in k^{-sigma2} /\ k^{-sigma1}, a0 Abelian in
/// p^{-sigma2} /\ p^{-sigma1} centralizing t0, with c0 = t0 (+) a0 maximal
/// Abelian in g^{-sigma2} /\ g^{-sigma1}.
struct FundamentalCartanData {
  RealSubspace t0, a0, c0;
};

namespace detail {

/// Greedy maximal Abelian subspace of V containing the given start basis:
/// extend by random centralizer elements until Z_V(c) = c.
inline RealSubspace greedy_max_abelian(const RealSubspace& v,
                                       std::vector<CMatrix> start,
                                       std::mt19937_64& rng, double eps) {
  RealSubspace c = start.empty() ? RealSubspace::zero(v.matrix_size())
                                 : RealSubspace::span_of(start, eps);
  if (v.dim() == 0) return c;
  for (int guard = 0; guard < 400; ++guard) {
    RealSubspace z =
        c.dim() ? centralizer_in(v, c.basis(), eps) : v;
    if (c.dim() == 0 && z.dim() > 0) {
      // Seed with one random element of V (any nonzero element of an
      // Abelian V works; in the non-Abelian case it starts the chain).
      std::vector<CMatrix> nb{random_element(z, rng)};
      c = RealSubspace::span_of(nb, eps);
      continue;
    }
    if (z.dim() == c.dim()) return c;
    RealSubspace ext = c.orthocomplement_in(z, eps);
    if (ext.dim() == 0) return c;
    std::vector<CMatrix> nb = c.basis();
    nb.push_back(random_element(ext, rng));
    c = RealSubspace::span_of(nb, eps);
  }
  throw ExtensionStalled("greedy_max_abelian: did not stabilize");
}

}  // namespace detail

inline FundamentalCartanData fundamental_cartan(const Scenario& s,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(sub_seed(seed, 101));
  const double eps = s.tol.rank;
  FundamentalCartanData f;
  RealSubspace vk = s.k_s1m.intersect(s.k_s2m, eps);
  f.t0 = detail::greedy_max_abelian(vk, {}, rng, eps);
  RealSubspace vp = s.p_s1m.intersect(s.p_s2m, eps);
  RealSubspace vp_z = f.t0.dim() ? centralizer_in(vp, f.t0.basis(), eps) : vp;
  f.a0 = detail::greedy_max_abelian(vp_z, {}, rng, eps);
  f.c0 = f.t0.sum(f.a0, eps);

  // Maximality certificate inside g^{-sigma2} /\ g^{-sigma1}.
  RealSubspace vg = s.g_s1m.intersect(s.g_s2m, eps);
  RealSubspace z = f.c0.dim() ? centralizer_in(vg, f.c0.basis(), eps) : vg;
  if (z.dim() != f.c0.dim())
    throw ExtensionStalled("fundamental_cartan: c0 not maximal Abelian");
  return f;
}

/// Build fundamental data from explicit generators (used to reproduce the
/// worked examples in the coordinates of the source matrices).
inline FundamentalCartanData fundamental_cartan_from(
    const Scenario& s, const std::vector<CMatrix>& t0_gens,
    const std::vector<CMatrix>& a0_gens) {
  const double eps = s.tol.rank;
  FundamentalCartanData f;
  f.t0 = t0_gens.empty() ? RealSubspace::zero(s.n())
                         : RealSubspace::span_of(t0_gens, eps);
  f.a0 = a0_gens.empty() ? RealSubspace::zero(s.n())
                         : RealSubspace::span_of(a0_gens, eps);
  f.c0 = f.t0.sum(f.a0, eps);
  RealSubspace vg = s.g_s1m.intersect(s.g_s2m, eps);
  RealSubspace z = f.c0.dim() ? centralizer_in(vg, f.c0.basis(), eps) : vg;
  if (z.dim() != f.c0.dim())
    throw ExtensionStalled("fundamental_cartan_from: c0 not maximal Abelian");
  return f;
}

/// Minimal period T_i > 0 with exp(T_i b_i) = identity, per t0 basis
/// direction, from the eigenphases of the (anti-Hermitian) generator.
/// Falls back to 2 pi over the smallest phase when the phases are not
/// commensurable to working precision.
inline std::vector<double> torus_periods(const RealSubspace& t0) {
  std::vector<double> periods;
  for (const auto& b : t0.basis()) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(CMatrix(b / complexd(0, 1)));
    std::vector<double> phases;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      double th = std::abs(es.eigenvalues()(i));
      if (th > 1e-9) phases.push_back(th);
    }
    if (phases.empty()) {
      periods.push_back(2.0 * M_PI);
      continue;
    }
    double g = phases[0];
    bool ok = true;
    for (size_t i = 1; i < phases.size(); ++i) {
      double a = g, b2 = phases[i];
      for (int it = 0; it < 80 && b2 > 1e-8; ++it) {
        double r = std::fmod(a, b2);
        if (r > b2 / 2) r = b2 - r;
        a = b2;
        b2 = r;
      }
      if (b2 > 1e-8) {
        ok = false;
        break;
      }
      g = a;
    }
    double gmin = *std::min_element(phases.begin(), phases.end());
    periods.push_back(2.0 * M_PI / (ok ? g : gmin));
  }
  return periods;
}

// ---------------------------------------------------------------------------
// Extended weights
// ---------------------------------------------------------------------------

/// One extended weight (lambda, a): a t0-weight refined by the eigenvalue
/// a of tau = sigma2 sigma1, on the k- or p-part of the complexified
/// algebra.
struct ExtendedWeight {
  Eigen::VectorXd lambda;  // imaginary parts of ad-eigenvalues on t0 basis
  complexd a;              // unit-modulus tau-eigenvalue
  ComplexSubspace space;
  bool in_k = true;
};

struct ExtendedWeightTable {
  std::vector<ExtendedWeight> entries;
  Eigen::Index k_dim = 0, p_dim = 0;  // frame dims (= complex dims)
  double unit_modulus_residual = 0.0;
};

inline ExtendedWeightTable extended_weights(const Scenario& s,
                                            const FundamentalCartanData& f) {
  ExtendedWeightTable table;
  table.k_dim = s.k.dim();
  table.p_dim = s.p.dim();
  const double eps = s.tol.rank;

  auto run = [&](const RealSubspace& frame, bool in_k) {
    std::vector<Eigen::MatrixXcd> ops;
    for (const auto& b : f.t0.basis()) {
      auto [m, resid] = frame.operator_matrix(
          [&](const CMatrix& x) { return bracket(b, x); });
      ops.push_back(m.cast<complexd>());
    }
    auto [tm, tresid] =
        frame.operator_matrix([&](const CMatrix& x) { return s.tau(x); });
    ops.push_back(tm.cast<complexd>());
    auto blocks = joint_eigensplit(ops, s.tol.cluster, s.tol.comm, eps);
    Eigen::Index covered = 0;
    for (auto& blk : blocks) {
      ExtendedWeight w;
      const Eigen::Index m = f.t0.dim();
      w.lambda = Eigen::VectorXd(m);
      for (Eigen::Index i = 0; i < m; ++i) w.lambda(i) = blk.value(i).imag();
      w.a = blk.value(m);
      table.unit_modulus_residual = std::max(
          table.unit_modulus_residual, std::abs(std::abs(w.a) - 1.0));
      w.space = std::move(blk.space);
      w.in_k = in_k;
      covered += w.space.dim();
      table.entries.push_back(std::move(w));
    }
    if (covered != frame.dim())
      throw InternalInconsistency(
          "extended_weights: weight spaces do not cover the frame");
  };
  run(s.k, true);
  run(s.p, false);
  return table;
}

/// Indices of extended weights with a e^{2 lambda(eta)} = 1, the selection
/// rule cutting out the tau_k fixed spaces at k = exp(eta).
inline std::vector<int> weight_pattern(const ExtendedWeightTable& table,
                                       const Eigen::VectorXd& eta_coords,
                                       double eps_pattern = 1e-7) {
  std::vector<int> sel;
  for (size_t i = 0; i < table.entries.size(); ++i) {
    const auto& w = table.entries[i];
    double phase = 2.0 * w.lambda.dot(eta_coords);
    complexd val = w.a * std::exp(complexd(0.0, phase));
    if (std::abs(val - 1.0) < eps_pattern) sel.push_back(static_cast<int>(i));
  }
  return sel;
}

struct IntersectionAlgebras {
  RealSubspace kk;  // k^{sigma2} /\ Ad(k^{-1}) k^{sigma1}
  RealSubspace pp;  // p^{-sigma2} /\ Ad(k^{-1}) p^{-sigma1}
  double route_distance_kk = 0.0;
  double route_distance_pp = 0.0;
};

/// The two intersection algebras at k = exp(eta), computed BOTH by direct
/// subspace intersection AND by the extended-weight selection (pattern
/// filter, sigma2 eigenprojection, real-form cut). The two routes must
/// agree; a disagreement is the primary correctness guard of this module.
inline IntersectionAlgebras intersection_algebras(
    const Scenario& s, const FundamentalCartanData& f,
    const ExtendedWeightTable& table, const CMatrix& eta) {
  const double eps = s.tol.rank;
  IntersectionAlgebras out;
  CMatrix kmat = matexp(eta);
  CMatrix kinv = kmat.inverse();

  RealSubspace kk_direct =
      s.k_s2p.intersect(s.ad_subspace(kinv, s.k_s1p), eps);
  RealSubspace pp_direct =
      s.p_s2m.intersect(s.ad_subspace(kinv, s.p_s1m), eps);

  Eigen::VectorXd coords = f.t0.coords_of(eta);
  std::vector<int> pattern = weight_pattern(table, coords);

  auto weight_route = [&](bool in_k, const RealSubspace& frame,
                          const RealSubspace& real_target) {
    ComplexSubspace acc{frame.dim(), Eigen::MatrixXcd(frame.dim(), 0)};
    for (int i : pattern) {
      const auto& w = table.entries[static_cast<size_t>(i)];
      if (w.in_k != in_k) continue;
      acc = acc.sum(w.space, eps);
    }
    // Complexification of the real sigma2-eigenspace, then cut.
    Eigen::MatrixXd target_coords(frame.dim(), real_target.dim());
    for (Eigen::Index j = 0; j < real_target.dim(); ++j)
      target_coords.col(j) =
          frame.coords_of(real_target.basis()[static_cast<size_t>(j)]);
    ComplexSubspace targetC =
        ComplexSubspace::from_real_coords(target_coords, eps);
    ComplexSubspace inter = acc.dim() ? acc.intersect(targetC, eps)
                                      : ComplexSubspace{frame.dim(),
                                                        acc.q};
    return inter.real_points(frame, eps);
  };

  RealSubspace kk_weights = weight_route(true, s.k, s.k_s2p);
  RealSubspace pp_weights = weight_route(false, s.p, s.p_s2m);

  if (kk_weights.dim() != kk_direct.dim() ||
      pp_weights.dim() != pp_direct.dim())
    throw InternalInconsistency(
        "intersection_algebras: route dimensions disagree (kk " +
        std::to_string(kk_weights.dim()) + " vs " +
        std::to_string(kk_direct.dim()) + ", pp " +
        std::to_string(pp_weights.dim()) + " vs " +
        std::to_string(pp_direct.dim()) + ")");
  out.route_distance_kk =
      kk_direct.dim() ? kk_direct.distance_to(kk_weights) : 0.0;
  out.route_distance_pp =
      pp_direct.dim() ? pp_direct.distance_to(pp_weights) : 0.0;
  if (out.route_distance_kk > 1e-8 || out.route_distance_pp > 1e-8)
    throw InternalInconsistency(
        "intersection_algebras: route subspace distance " +
        std::to_string(std::max(out.route_distance_kk,
                                out.route_distance_pp)));
  out.kk = std::move(kk_direct);
  out.pp = std::move(pp_direct);
  return out;
}

// ---------------------------------------------------------------------------
// Torus reduction
// ---------------------------------------------------------------------------

struct TorusReduction {
  CMatrix k1, k2, eta;
  Eigen::VectorXd eta_coords;
  double residual = 0.0;  // ||k1 k k2^{-1} - exp(eta)||^2
  int restarts = 0;
};

struct TorusReductionBudget {
  int restarts = 40;
  int iterations = 250;
  double tol_torus = 1e-14;  // on the squared distance
};

namespace detail {

/// One Levenberg-Marquardt descent of
///   f(k1,k2,eta) = || k1 k k2^{-1} - exp(eta) ||^2
/// over directions in k^{sigma1} x k^{sigma2} x t0.
inline double lm_to_torus(const Scenario& s, const RealSubspace& t0,
                          const CMatrix& k, CMatrix& k1, CMatrix& k2,
                          Eigen::VectorXd& eta_coords, int iterations,
                          double tol) {
  const Eigen::Index n = s.n();
  const auto& b1 = s.k_s1p.basis();
  const auto& b2 = s.k_s2p.basis();
  const auto& bt = t0.basis();
  const Eigen::Index d1 = static_cast<Eigen::Index>(b1.size());
  const Eigen::Index d2 = static_cast<Eigen::Index>(b2.size());
  const Eigen::Index m = static_cast<Eigen::Index>(bt.size());

  auto eta_of = [&](const Eigen::VectorXd& c) {
    return t0.from_coords_of(c);
  };

  double lambda = 1e-3;
  CMatrix mcur = k1 * k * k2.inverse();
  CMatrix ecur = matexp(eta_of(eta_coords));
  double f = (mcur - ecur).squaredNorm();
  for (int it = 0; it < iterations; ++it) {
    if (f < tol) break;
    CMatrix r = mcur - ecur;
    Eigen::VectorXd rv = vec_real(r);
    Eigen::MatrixXd j(2 * n * n, d1 + d2 + m);
    for (Eigen::Index i = 0; i < d1; ++i)
      j.col(i) = vec_real(b1[static_cast<size_t>(i)] * mcur);
    for (Eigen::Index i = 0; i < d2; ++i)
      j.col(d1 + i) = vec_real(CMatrix(-mcur * b2[static_cast<size_t>(i)]));
    for (Eigen::Index i = 0; i < m; ++i)
      j.col(d1 + d2 + i) = vec_real(CMatrix(-ecur * bt[static_cast<size_t>(i)]));
    Eigen::MatrixXd jtj = j.transpose() * j;
    Eigen::VectorXd jtr = j.transpose() * rv;
    bool stepped = false;
    for (int tries = 0; tries < 24; ++tries) {
      Eigen::MatrixXd aug =
          jtj + lambda * Eigen::MatrixXd::Identity(jtj.rows(), jtj.cols());
      Eigen::VectorXd delta = aug.ldlt().solve(-jtr);
      CMatrix u = CMatrix::Zero(n, n), v = CMatrix::Zero(n, n);
      for (Eigen::Index i = 0; i < d1; ++i)
        u += delta(i) * b1[static_cast<size_t>(i)];
      for (Eigen::Index i = 0; i < d2; ++i)
        v += delta(d1 + i) * b2[static_cast<size_t>(i)];
      CMatrix k1n = matexp(u) * k1;
      CMatrix k2n = matexp(v) * k2;
      Eigen::VectorXd cn = eta_coords + delta.tail(m);
      CMatrix mn = k1n * k * k2n.inverse();
      CMatrix en = matexp(eta_of(cn));
      double fn = (mn - en).squaredNorm();
      if (fn < f) {
        k1 = std::move(k1n);
        k2 = std::move(k2n);
        eta_coords = std::move(cn);
        mcur = std::move(mn);
        ecur = std::move(en);
        f = fn;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        break;
      }
      lambda *= 8.0;
    }
    if (!stepped) break;
  }
  return f;
}

}  // namespace detail

/// Reduce a unitary group element onto the torus T0 = exp(t0):
/// find (k1, k2) in K1 x K2 and eta in t0 with k1 k k2^{-1} = exp(eta).
/// Multi-start Levenberg-Marquardt; the minimum is 0 by the compact-case
/// reduction theorem, so failure to reach tol signals a local minimum
/// (restarted internally) or a scenario defect.
inline TorusReduction reduce_to_torus(const Scenario& s,
                                      const FundamentalCartanData& f,
                                      const CMatrix& k, std::uint64_t seed,
                                      TorusReductionBudget budget = {}) {
  std::mt19937_64 rng(sub_seed(seed, 202));
  std::uniform_real_distribution<double> unif(-M_PI, M_PI);
  const Eigen::Index n = s.n();
  const Eigen::Index m = f.t0.dim();
  std::vector<double> periods = torus_periods(f.t0);

  TorusReduction best;
  best.residual = 1e300;
  for (int r = 0; r < budget.restarts; ++r) {
    CMatrix k1 = CMatrix::Identity(n, n);
    CMatrix k2 = CMatrix::Identity(n, n);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
    if (r > 0) {
      if (s.k_s1p.dim())
        k1 = matexp(unif(rng) * 0.5 * random_element(s.k_s1p, rng));
      if (s.k_s2p.dim())
        k2 = matexp(unif(rng) * 0.5 * random_element(s.k_s2p, rng));
      for (Eigen::Index i = 0; i < m; ++i) c(i) = unif(rng);
    }
    // Polish far below the acceptance threshold: rank decisions downstream
    // need eta to sit on its pattern wall to near machine precision.
    double fval = detail::lm_to_torus(s, f.t0, k, k1, k2, c,
                                      budget.iterations, 1e-28);
    if (fval < best.residual) {
      best.residual = fval;
      best.k1 = k1;
      best.k2 = k2;
      best.eta_coords = c;
      best.restarts = r + 1;
    }
    if (best.residual < budget.tol_torus) break;
  }
  if (best.residual >= budget.tol_torus)
    throw NotReduced("reduce_to_torus: best residual " +
                     std::to_string(best.residual) + " after " +
                     std::to_string(best.restarts) + " restarts");
  // Canonicalize eta into the fundamental box [0, T_i) per direction;
  // the shifts are exp-lattice translations so exp(eta) is unchanged.
  for (Eigen::Index i = 0; i < m; ++i) {
    double t = periods[static_cast<size_t>(i)];
    best.eta_coords(i) = std::fmod(best.eta_coords(i), t);
    if (best.eta_coords(i) < 0) best.eta_coords(i) += t;
  }
  best.eta = f.t0.from_coords_of(best.eta_coords);
  // Absorb the canonicalization mismatch into k1 (a central torus factor).
  CMatrix ecan = matexp(best.eta);
  CMatrix mred = best.k1 * k * best.k2.inverse();
  CMatrix corr = ecan * mred.inverse();
  best.k1 = corr * best.k1;
  best.residual = (best.k1 * k * best.k2.inverse() - ecan).squaredNorm();
  return best;
}

// ---------------------------------------------------------------------------
// Standard Cartan subsets
// ---------------------------------------------------------------------------

/// C = n exp(c) with n = exp(eta1) in T0 and c = t (+) a a theta-stable
/// Cartan subspace of q^n, t inside t0 and a containing a0.
struct StandardCartanSubset {
  CMatrix n;
  CMatrix eta1;
  RealSubspace t, a, c;
  int class_id = -1;
};

/// Construct the standard Cartan subset determined by a torus point
/// eta in t0: a is a maximal Abelian extension of a0 inside
/// p^{-sigma2} /\ Ad(exp(-eta)) p^{-sigma1}, t = Z_{t0}(a), and
/// n = exp(eta1) with eta = eta1 + eta2 in t-perp (+) t.
inline StandardCartanSubset build_cartan_at(const Scenario& s,
                                            const FundamentalCartanData& f,
                                            const CMatrix& eta,
                                            std::uint64_t seed) {
  const double eps = s.tol.rank;
  std::mt19937_64 rng(sub_seed(seed, 303));
  CMatrix kmat = matexp(eta);
  RealSubspace pp = s.p_s2m.intersect(
      s.ad_subspace(kmat.inverse(), s.p_s1m), eps);
  RealSubspace a = detail::greedy_max_abelian(pp, f.a0.basis(), rng, eps);
  RealSubspace t = a.dim() ? centralizer_in(f.t0, a.basis(), eps) : f.t0;
  StandardCartanSubset c;
  c.t = t;
  c.a = a;
  c.c = t.sum(a, eps);
  CMatrix eta2 = t.dim() ? t.project(eta) : CMatrix::Zero(s.n(), s.n());
  c.eta1 = eta - eta2;
  c.n = matexp(c.eta1);
  return c;
}

/// Every point of a standard Cartan subset must lie in the zero fiber and
/// all structural invariants must hold; returns the worst residual.
inline double cartan_subset_residual(const Scenario& s,
                                     const FundamentalCartanData& f,
                                     const StandardCartanSubset& c,
                                     std::uint64_t seed = 7) {
  const double eps = s.tol.rank;
  double worst = 0.0;
  // c abelian.
  for (const auto& x : c.c.basis())
    for (const auto& y : c.c.basis())
      worst = std::max(worst, frob_norm(bracket(x, y)));
  // c inside q^n.
  CMatrix ninv = c.n.inverse();
  RealSubspace qn = s.g_s2m.intersect(s.ad_subspace(ninv, s.g_s1m), eps);
  for (const auto& x : c.c.basis()) worst = std::max(worst, qn.distance(x));
  // sample points lie in the zero fiber.
  std::mt19937_64 rng(sub_seed(seed, 404));
  for (int i = 0; i < 4; ++i) {
    CMatrix etac = c.c.dim() ? random_element(c.c, rng) : CMatrix::Zero(s.n(), s.n());
    GroupPoint x = cartan_factor(s, c.n * matexp(etac));
    worst = std::max(worst, phi(s, x).norm);
  }
  return worst;
}

struct NormalizationResult {
  CMatrix k1, k2;
  StandardCartanSubset cartan;
  CMatrix eta_c;   // point of c with k1 x k2^{-1} = n exp(eta_c)
  double residual = 0.0;
};

/// Normal form for a zero-fiber point: conjugate x under K1 x K2 onto a
/// standard Cartan subset. Steps: torus reduction of the compact factor,
/// then ascent of <Ad(.) xi, rho> over K2 /\ k^{-1} K1 k for a random
/// regular rho in the target Abelian a, then the t-perp split of eta.
inline NormalizationResult normalize_to_cartan(const Scenario& s,
                                               const FundamentalCartanData& f,
                                               const GroupPoint& x,
                                               std::uint64_t seed,
                                               double zero_fiber_tol = 1e-8) {
  const double eps = s.tol.rank;
  if (!in_zero_fiber(s, x, zero_fiber_tol))
    throw NotInZeroFiber("normalize_to_cartan: ||Phi(x)|| >= tolerance");

  TorusReduction tr = reduce_to_torus(s, f, x.k, sub_seed(seed, 1));
  CMatrix xi = tr.k2 * x.xi * tr.k2.inverse();
  CMatrix kmat = matexp(tr.eta);
  CMatrix kinv = kmat.inverse();
  RealSubspace pp = s.p_s2m.intersect(s.ad_subspace(kinv, s.p_s1m), eps);
  RealSubspace kk = s.k_s2p.intersect(s.ad_subspace(kinv, s.k_s1p), eps);

  std::mt19937_64 rng(sub_seed(seed, 2));
  RealSubspace a = detail::greedy_max_abelian(pp, f.a0.basis(), rng, eps);

  // Ascent of <xi'', rho> over the compact isotropy directions kk; all
  // critical points lie in Z_pp(rho) = a for regular rho.
  CMatrix m_acc = CMatrix::Identity(s.n(), s.n());
  double dist_to_a = a.dim() ? a.distance(xi) : frob_norm(xi);
  for (int attempt = 0; attempt < 12 && dist_to_a > 1e-9 * (1.0 + frob_norm(xi));
       ++attempt) {
    CMatrix rho = a.dim() ? random_element(a, rng) : CMatrix::Zero(s.n(), s.n());
    if (a.dim() &&
        centralizer_in(pp, {rho}, eps).dim() != a.dim())
      continue;  // rho not regular, redraw
    CMatrix cur = xi;
    CMatrix macc = CMatrix::Identity(s.n(), s.n());
    double fcur = frob_inner(cur, rho);
    double step = 1.0;
    for (int it = 0; it < 4000; ++it) {
      Eigen::VectorXd g(kk.dim());
      for (Eigen::Index i = 0; i < kk.dim(); ++i)
        g(i) = frob_inner(bracket(kk.basis()[static_cast<size_t>(i)], cur), rho);
      if (g.size() == 0 || g.norm() < 1e-13 * (1.0 + frob_norm(rho))) break;
      CMatrix dir = CMatrix::Zero(s.n(), s.n());
      for (Eigen::Index i = 0; i < kk.dim(); ++i)
        dir += g(i) * kk.basis()[static_cast<size_t>(i)];
      double st = std::min(step * 2.0, 1.0);
      bool ok = false;
      while (st > 1e-14) {
        CMatrix e = matexp(st * dir);
        CMatrix cand = e * cur * e.inverse();
        double fn = frob_inner(cand, rho);
        if (fn >= fcur + 1e-4 * st * g.squaredNorm()) {
          cur = std::move(cand);
          macc = e * macc;
          fcur = fn;
          step = st;
          ok = true;
          break;
        }
        st *= 0.5;
      }
      if (!ok) break;
    }
    double d = a.dim() ? a.distance(cur) : frob_norm(cur);
    if (d < dist_to_a) {
      dist_to_a = d;
      xi = cur;
      m_acc = macc * m_acc;
    }
  }
  if (dist_to_a > 1e-7 * (1.0 + frob_norm(xi)))
    throw NotReduced("normalize_to_cartan: xi not conjugated into a, dist " +
                     std::to_string(dist_to_a));
  xi = a.dim() ? a.project(xi) : xi;

  NormalizationResult out;
  RealSubspace t = a.dim() ? centralizer_in(f.t0, a.basis(), eps) : f.t0;
  out.cartan.t = t;
  out.cartan.a = a;
  out.cartan.c = t.sum(a, eps);
  CMatrix eta2 = t.dim() ? t.project(tr.eta) : CMatrix::Zero(s.n(), s.n());
  out.cartan.eta1 = tr.eta - eta2;
  out.cartan.n = matexp(out.cartan.eta1);
  out.eta_c = eta2 + xi;
  out.k1 = kmat * m_acc * kinv * tr.k1;
  out.k2 = m_acc * tr.k2;
  out.residual = frob_norm(out.k1 * x.value * out.k2.inverse() -
                           out.cartan.n * matexp(out.eta_c));
  if (out.residual > 1e-6 * (1.0 + frob_norm(x.value)))
    throw NotReduced("normalize_to_cartan: normal-form residual " +
                     std::to_string(out.residual));
  return out;
}

// ---------------------------------------------------------------------------
// Classification of Cartan subsets
// ---------------------------------------------------------------------------

/// Equivalence-class fingerprint built from conjugation invariants: the
/// (t, a) split dims, isotropy dims at a generic probe, the dimension
/// multiset of the joint ad(c)-eigenspaces on the complexified algebra,
/// and the spectrum of tau_n at the canonical base point.
struct ClassFingerprint {
  Eigen::Index dim_t = 0, dim_a = 0;
  Eigen::Index generic_h = 0, generic_h_k = 0, generic_h_p = 0;
  Eigen::Index generic_tau_fixed = 0;
  std::vector<Eigen::Index> weight_dims;      // sorted, nonzero blocks
  std::vector<std::pair<double, double>> tau_n_spectrum;  // sorted, rounded

  bool matches(const ClassFingerprint& o, double spec_tol = 1e-5) const {
    if (dim_t != o.dim_t || dim_a != o.dim_a) return false;
    if (generic_h != o.generic_h || generic_h_k != o.generic_h_k ||
        generic_h_p != o.generic_h_p ||
        generic_tau_fixed != o.generic_tau_fixed)
      return false;
    if (weight_dims != o.weight_dims) return false;
    if (tau_n_spectrum.size() != o.tau_n_spectrum.size()) return false;
    for (size_t i = 0; i < tau_n_spectrum.size(); ++i)
      if (std::abs(tau_n_spectrum[i].first - o.tau_n_spectrum[i].first) >
              spec_tol ||
          std::abs(tau_n_spectrum[i].second - o.tau_n_spectrum[i].second) >
              spec_tol)
        return false;
    return true;
  }

  std::string to_string() const {
    std::ostringstream os;
    os << "t" << dim_t << "a" << dim_a << "h" << generic_h << "("
       << generic_h_k << "," << generic_h_p << ")f" << generic_tau_fixed
       << "w[";
    for (auto d : weight_dims) os << d << ",";
    os << "]";
    return os.str();
  }
};

/// A generic probe point of C: n exp(eta*) with eta* seeded in c, retried
/// until the strong-regularity certificate q^x = c holds.
inline GroupPoint generic_probe(const Scenario& s,
                                const StandardCartanSubset& c,
                                std::uint64_t seed, double* qx_dist = nullptr) {
  std::mt19937_64 rng(sub_seed(seed, 505));
  std::uniform_real_distribution<double> unif(0.25, 0.85);
  for (int attempt = 0; attempt < 24; ++attempt) {
    CMatrix etac = CMatrix::Zero(s.n(), s.n());
    for (const auto& b : c.c.basis()) etac += unif(rng) * b;
    GroupPoint x = cartan_factor(s, c.n * matexp(etac));
    IsotropyData iso = isotropy_and_slice(s, x);
    if (iso.qx.dim() == c.c.dim()) {
      double d = c.c.dim() ? iso.qx.distance_to(c.c) : 0.0;
      if (d < 1e-7) {
        if (qx_dist) *qx_dist = d;
        return x;
      }
    }
  }
  throw ExtensionStalled("generic_probe: no strongly regular point found");
}

inline ClassFingerprint fingerprint_of(const Scenario& s,
                                       const FundamentalCartanData& f,
                                       const StandardCartanSubset& c,
                                       std::uint64_t seed) {
  ClassFingerprint fp;
  fp.dim_t = c.t.dim();
  fp.dim_a = c.a.dim();

  GroupPoint probe = generic_probe(s, c, sub_seed(seed, 606));
  IsotropyData iso = isotropy_and_slice(s, probe);
  fp.generic_h = iso.hx.dim();
  if (iso.hx.dim()) {
    auto [hk, hp] = involution_split(
        iso.hx, [](const CMatrix& x) { return theta_alg(x); }, s.tol.rank);
    fp.generic_h_k = hk.dim();
    fp.generic_h_p = hp.dim();
  }
  fp.generic_tau_fixed = tau_x_fixed_space(s, iso).dim();

  if (c.c.dim()) {
    std::vector<Eigen::MatrixXcd> ops;
    for (const auto& b : c.c.basis()) {
      auto [m, resid] = s.algebra().operator_matrix(
          [&](const CMatrix& x) { return bracket(b, x); });
      ops.push_back(m.cast<complexd>());
    }
    auto blocks = joint_eigensplit(ops, s.tol.cluster, s.tol.comm, s.tol.rank);
    for (const auto& blk : blocks) {
      if (blk.value.norm() < s.tol.weight) continue;
      fp.weight_dims.push_back(blk.space.dim());
    }
    std::sort(fp.weight_dims.begin(), fp.weight_dims.end());
  }

  auto [taun, resid] = s.algebra().operator_matrix([&](const CMatrix& v) {
    CMatrix ninv = c.n.inverse();
    return s.sigma2(ninv * s.sigma1(c.n * v * ninv) * c.n);
  });
  Eigen::EigenSolver<Eigen::MatrixXd> es(taun, false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    fp.tau_n_spectrum.push_back(
        {std::round(es.eigenvalues()(i).real() * 1e6) / 1e6,
         std::round(es.eigenvalues()(i).imag() * 1e6) / 1e6});
  std::sort(fp.tau_n_spectrum.begin(), fp.tau_n_spectrum.end());
  return fp;
}

struct CartanClassification {
  std::vector<StandardCartanSubset> classes;
  std::vector<ClassFingerprint> fingerprints;
  std::vector<std::string> warnings;
  int lattice_resolution = 0;
};

struct ClassifyOptions {
  int initial_resolution = 32;
  int max_resolution = 256;
  int consolidation_kicks = 6;
};

namespace detail {

/// Candidate torus points: a generic interior point, all lattice points,
/// points on single pattern walls, and pairwise wall intersections.
inline std::vector<Eigen::VectorXd> candidate_torus_points(
    const ExtendedWeightTable& table, const std::vector<double>& periods,
    int resolution) {
  const Eigen::Index m = static_cast<Eigen::Index>(periods.size());
  std::vector<Eigen::VectorXd> cands;
  if (m == 0) {
    cands.push_back(Eigen::VectorXd(0));
    return cands;
  }

  // Lattice sweep.
  std::vector<int> idx(static_cast<size_t>(m), 0);
  for (;;) {
    Eigen::VectorXd c(m);
    for (Eigen::Index i = 0; i < m; ++i)
      c(i) = periods[static_cast<size_t>(i)] * idx[static_cast<size_t>(i)] /
             resolution;
    cands.push_back(c);
    Eigen::Index pos = 0;
    while (pos < m) {
      if (++idx[static_cast<size_t>(pos)] < resolution) break;
      idx[static_cast<size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == m) break;
  }

  // Walls: 2 lambda . c + arg(a) = 2 pi k, one affine condition per
  // extended weight and admissible integer k.
  struct Wall {
    Eigen::VectorXd normal;  // 2 lambda
    double offset;           // 2 pi k - arg(a)
  };
  std::vector<Wall> walls;
  for (const auto& w : table.entries) {
    Eigen::VectorXd nrm = 2.0 * w.lambda;
    if (nrm.norm() < 1e-10) continue;
    double alpha = std::atan2(w.a.imag(), w.a.real());
    double span = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      span += std::abs(nrm(i)) * periods[static_cast<size_t>(i)];
    int kmax = static_cast<int>(std::ceil(span / (2.0 * M_PI))) + 1;
    for (int k = -kmax; k <= kmax; ++k)
      walls.push_back({nrm, 2.0 * M_PI * k - alpha});
  }

  auto in_box = [&](const Eigen::VectorXd& c) {
    for (Eigen::Index i = 0; i < m; ++i)
      if (c(i) < -1e-9 || c(i) > periods[static_cast<size_t>(i)] + 1e-9)
        return false;
    return true;
  };

  if (m == 1) {
    for (const auto& w : walls) {
      if (std::abs(w.normal(0)) < 1e-12) continue;
      Eigen::VectorXd c(1);
      c(0) = w.offset / w.normal(0);
      if (in_box(c)) cands.push_back(c);
    }
  } else if (m >= 2) {
    // Points on single walls (generic in the wall) and pairwise
    // intersections, in the first two coordinates with the rest zero.
    for (size_t i = 0; i < walls.size(); ++i) {
      const auto& wi = walls[i];
      Eigen::Index piv = 0;
      for (Eigen::Index d = 0; d < m; ++d)
        if (std::abs(wi.normal(d)) > std::abs(wi.normal(piv))) piv = d;
      if (std::abs(wi.normal(piv)) < 1e-12) continue;
      for (double frac : {0.2931, 0.5179, 0.7457}) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
        for (Eigen::Index d = 0; d < m; ++d)
          if (d != piv)
            c(d) = frac * periods[static_cast<size_t>(d)];
        double rhs = wi.offset;
        for (Eigen::Index d = 0; d < m; ++d)
          if (d != piv) rhs -= wi.normal(d) * c(d);
        c(piv) = rhs / wi.normal(piv);
        if (in_box(c)) cands.push_back(c);
      }
      for (size_t j = i + 1; j < walls.size(); ++j) {
        const auto& wj = walls[j];
        // Solve the 2x2 system in the two most significant coordinates.
        Eigen::Matrix2d a2;
        Eigen::Vector2d b2;
        Eigen::Index c0 = 0, c1 = 1;
        a2 << wi.normal(c0), wi.normal(c1), wj.normal(c0), wj.normal(c1);
        if (std::abs(a2.determinant()) < 1e-10) continue;
        b2 << wi.offset, wj.offset;
        Eigen::Vector2d sol = a2.partialPivLu().solve(b2);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
        c(c0) = sol(0);
        c(c1) = sol(1);
        if (in_box(c)) cands.push_back(c);
      }
    }
  }

  // A generic interior point (irrational fractions of the periods).
  Eigen::VectorXd g(m);
  for (Eigen::Index i = 0; i < m; ++i)
    g(i) = periods[static_cast<size_t>(i)] *
           (0.28172817 + 0.11931183 * static_cast<double>(i));
  cands.push_back(g);
  return cands;
}

}  // namespace detail

/// Enumerate the equivalence classes of standard Cartan subsets: sample
/// the finitely many distinct extended-weight patterns over torus points
/// (lattice plus pattern-wall intersections, refined until the pattern set
/// is stable for two consecutive refinements), build a subset at one
/// representative per pattern, and deduplicate by class fingerprints.
/// Suspected merges are reported as warnings, never silently merged; a
/// consolidation pass merges classes whose generic orbits provably
/// normalize into each other.
inline CartanClassification classify_cartan_sets(
    const Scenario& s, const FundamentalCartanData& f,
    const ExtendedWeightTable& table, std::uint64_t seed,
    ClassifyOptions opts = {}) {
  std::vector<double> periods = torus_periods(f.t0);

  auto pattern_set_at = [&](int resolution) {
    std::set<std::vector<int>> pats;
    auto cands = detail::candidate_torus_points(table, periods, resolution);
    for (const auto& c : cands) pats.insert(weight_pattern(table, c));
    return pats;
  };

  int res = opts.initial_resolution;
  std::set<std::vector<int>> pats = pattern_set_at(res);
  int stable = 0;
  while (stable < 1) {
    if (2 * res > opts.max_resolution)
      throw LatticeTooCoarse(
          "classify_cartan_sets: pattern set unstable at resolution " +
          std::to_string(res));
    auto pats2 = pattern_set_at(2 * res);
    if (pats2 == pats) {
      ++stable;
    } else {
      stable = 0;
      pats = std::move(pats2);
    }
    res *= 2;
  }

  // One representative torus point per pattern: the lexicographically
  // smallest candidate carrying it.
  auto cands = detail::candidate_torus_points(table, periods, res);
  std::sort(cands.begin(), cands.end(),
            [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
              for (Eigen::Index i = 0; i < a.size(); ++i) {
                if (std::abs(a(i) - b(i)) > 1e-12) return a(i) < b(i);
              }
              return false;
            });
  std::map<std::vector<int>, Eigen::VectorXd> reps;
  for (const auto& c : cands) {
    auto pat = weight_pattern(table, c);
    if (!reps.count(pat)) reps[pat] = c;
  }

  CartanClassification out;
  out.lattice_resolution = res;
  std::uint64_t tag = 0;
  for (const auto& [pat, coords] : reps) {
    ++tag;
    CMatrix eta = f.t0.dim() ? f.t0.from_coords_of(coords)
                             : CMatrix::Zero(s.n(), s.n());
    StandardCartanSubset c = build_cartan_at(s, f, eta, sub_seed(seed, tag));
    if (c.c.dim() != f.c0.dim()) {
      out.warnings.push_back("candidate at pattern size " +
                             std::to_string(pat.size()) +
                             " produced dim c = " + std::to_string(c.c.dim()) +
                             " != dim c0; discarded");
      continue;
    }
    ClassFingerprint fp;
    try {
      fp = fingerprint_of(s, f, c, sub_seed(seed, tag + 1000));
    } catch (const CosetError& e) {
      out.warnings.push_back(std::string("fingerprint failed: ") + e.what());
      continue;
    }
    bool dup = false;
    for (size_t i = 0; i < out.classes.size(); ++i) {
      if (out.fingerprints[i].matches(fp)) {
        dup = true;
        break;
      }
    }
    if (!dup) {
      out.classes.push_back(std::move(c));
      out.fingerprints.push_back(std::move(fp));
    }
  }

  // Consolidation: if a generic orbit of class i renormalizes onto the
  // fingerprint of class j, the two are equivalent by definition.
  std::vector<int> merged_into(out.classes.size());
  for (size_t i = 0; i < out.classes.size(); ++i)
    merged_into[i] = static_cast<int>(i);
  for (size_t i = 0; i < out.classes.size(); ++i) {
    GroupPoint probe;
    try {
      probe = generic_probe(s, out.classes[i], sub_seed(seed, 9000 + i));
    } catch (const CosetError&) {
      continue;
    }
    std::mt19937_64 rng(sub_seed(seed, 5000 + i));
    for (int kick = 0; kick < opts.consolidation_kicks; ++kick) {
      CMatrix kap1 = s.k_s1p.dim()
                         ? matexp(1.3 * random_element(s.k_s1p, rng))
                         : CMatrix::Identity(s.n(), s.n());
      CMatrix kap2 = s.k_s2p.dim()
                         ? matexp(1.3 * random_element(s.k_s2p, rng))
                         : CMatrix::Identity(s.n(), s.n());
      GroupPoint y;
      try {
        y = cartan_factor(s, kap1 * probe.value * kap2.inverse());
        NormalizationResult nr =
            normalize_to_cartan(s, f, y, sub_seed(seed, 7000 + 31 * i + kick));
        ClassFingerprint fp = fingerprint_of(
            s, f, nr.cartan, sub_seed(seed, 8000 + 31 * i + kick));
        for (size_t j = 0; j < out.classes.size(); ++j) {
          if (j == i) continue;
          if (out.fingerprints[j].matches(fp) &&
              merged_into[i] != merged_into[j]) {
            int lo = std::min(merged_into[i], merged_into[j]);
            int hi = std::max(merged_into[i], merged_into[j]);
            for (auto& mi : merged_into)
              if (mi == hi) mi = lo;
            out.warnings.push_back(
                "classes " + std::to_string(i) + " and " + std::to_string(j) +
                " merged: a generic orbit meets both");
          }
        }
      } catch (const CosetError&) {
        continue;
      }
    }
  }
  CartanClassification dedup;
  dedup.lattice_resolution = out.lattice_resolution;
  dedup.warnings = out.warnings;
  for (size_t i = 0; i < out.classes.size(); ++i) {
    if (merged_into[i] != static_cast<int>(i)) continue;
    dedup.classes.push_back(out.classes[i]);
    dedup.fingerprints.push_back(out.fingerprints[i]);
  }

  // Stable ids: fundamental-type first (largest t), then by fingerprint.
  std::vector<size_t> order(dedup.classes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto& fa = dedup.fingerprints[a];
    const auto& fb = dedup.fingerprints[b];
    if (fa.dim_t != fb.dim_t) return fa.dim_t > fb.dim_t;
    if (fa.dim_a != fb.dim_a) return fa.dim_a < fb.dim_a;
    return fa.to_string() < fb.to_string();
  });
  CartanClassification final_out;
  final_out.lattice_resolution = dedup.lattice_resolution;
  final_out.warnings = dedup.warnings;
  for (size_t r = 0; r < order.size(); ++r) {
    StandardCartanSubset c = dedup.classes[order[r]];
    c.class_id = static_cast<int>(r);
    final_out.classes.push_back(std::move(c));
    final_out.fingerprints.push_back(dedup.fingerprints[order[r]]);
  }
  return final_out;
}

/// Match a normalized Cartan subset against a classification table.
inline std::optional<int> match_class(const Scenario& s,
                                      const FundamentalCartanData& f,
                                      const CartanClassification& cls,
                                      const StandardCartanSubset& c,
                                      std::uint64_t seed) {
  ClassFingerprint fp = fingerprint_of(s, f, c, seed);
  for (size_t i = 0; i < cls.classes.size(); ++i)
    if (cls.fingerprints[i].matches(fp))
      return cls.classes[i].class_id;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Weyl groups of Cartan subsets
// ---------------------------------------------------------------------------

/// An element of W_{K1 x K2}(C) recorded as the affine map it induces on
/// c-coordinates: eta -> translation + linear * eta. Translations occur in
/// the compact (t) directions through torus periodicity.
struct AffineMapOnC {
  Eigen::MatrixXd linear;
  Eigen::VectorXd translation;
};

struct WeylGroupReport {
  long order = 0;
  std::vector<AffineMapOnC> elements;
  std::vector<AffineMapOnC> generators;  // raw maps found by sampling
  bool complete = false;                 // closure certified under budget
  long samples_used = 0;
  long samples_succeeded = 0;
};

struct WeylBudget {
  int samples = 72;
  int lm_iterations = 160;
  long max_order = 4096;
};

namespace detail {

/// Solve exp(sum m_i b_i) = k_w for m over the commuting anti-Hermitian
/// basis b_i, by joint diagonalization and randomized phase unwrapping.
inline bool torus_log_in(const RealSubspace& t, const CMatrix& kw,
                         Eigen::VectorXd& m_out, std::mt19937_64& rng) {
  const Eigen::Index m = t.dim();
  if (m == 0) {
    bool ok = (kw - CMatrix::Identity(kw.rows(), kw.cols())).norm() < 1e-8;
    m_out = Eigen::VectorXd(0);
    return ok;
  }
  // Common eigenbasis of the commuting family via a random combination.
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  Eigen::VectorXd mix(m);
  for (Eigen::Index i = 0; i < m; ++i) mix(i) = unif(rng);
  CMatrix probe = CMatrix::Zero(kw.rows(), kw.cols());
  for (Eigen::Index i = 0; i < m; ++i)
    probe += mix(i) * t.basis()[static_cast<size_t>(i)];
  Eigen::SelfAdjointEigenSolver<CMatrix> es(CMatrix(probe / complexd(0, 1)));
  CMatrix v = es.eigenvectors();
  const Eigen::Index nn = kw.rows();

  Eigen::MatrixXd phi(nn, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    CMatrix d = v.adjoint() * t.basis()[static_cast<size_t>(i)] * v;
    for (Eigen::Index j = 0; j < nn; ++j) phi(j, i) = d(j, j).imag();
  }
  CMatrix dk = v.adjoint() * kw * v;
  // kw must be diagonal in this basis.
  CMatrix offd = dk;
  for (Eigen::Index j = 0; j < nn; ++j) offd(j, j) = 0.0;
  if (offd.norm() > 1e-7) return false;
  Eigen::VectorXd psi(nn);
  for (Eigen::Index j = 0; j < nn; ++j)
    psi(j) = std::atan2(dk(j, j).imag(), dk(j, j).real());

  std::uniform_real_distribution<double> init(-3.5, 3.5);
  for (int attempt = 0; attempt < 16; ++attempt) {
    Eigen::VectorXd mm(m);
    for (Eigen::Index i = 0; i < m; ++i)
      mm(i) = attempt == 0 ? 0.0 : init(rng);
    for (int it = 0; it < 24; ++it) {
      Eigen::VectorXd target = psi;
      for (Eigen::Index j = 0; j < nn; ++j) {
        double r = (phi.row(j).dot(mm) - psi(j)) / (2.0 * M_PI);
        target(j) += 2.0 * M_PI * std::round(r);
      }
      Eigen::VectorXd next =
          phi.colPivHouseholderQr().solve(target);
      if ((next - mm).norm() < 1e-12) {
        mm = next;
        break;
      }
      mm = next;
    }
    CMatrix cand = CMatrix::Zero(nn, nn);
    for (Eigen::Index i = 0; i < m; ++i)
      cand += mm(i) * t.basis()[static_cast<size_t>(i)];
    if ((matexp(cand) - kw).norm() < 1e-8) {
      m_out = mm;
      return true;
    }
  }
  return false;
}

/// LM minimization of || k1 y k2^{-1} - n exp(eta_c) ||^2 over
/// K1 x K2 x c; zero residual means the orbit point was pulled back onto C.
inline double lm_onto_cartan(const Scenario& s, const StandardCartanSubset& c,
                             const CMatrix& y, CMatrix& k1, CMatrix& k2,
                             Eigen::VectorXd& cc, int iterations, double tol) {
  const Eigen::Index n = s.n();
  const auto& b1 = s.k_s1p.basis();
  const auto& b2 = s.k_s2p.basis();
  const auto& bc = c.c.basis();
  const Eigen::Index d1 = static_cast<Eigen::Index>(b1.size());
  const Eigen::Index d2 = static_cast<Eigen::Index>(b2.size());
  const Eigen::Index m = static_cast<Eigen::Index>(bc.size());

  auto cpoint = [&](const Eigen::VectorXd& w) {
    CMatrix e = CMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < m; ++i)
      e += w(i) * bc[static_cast<size_t>(i)];
    return e;
  };

  double lambda = 1e-3;
  CMatrix mcur = k1 * y * k2.inverse();
  CMatrix ecur = c.n * matexp(cpoint(cc));
  double f = (mcur - ecur).squaredNorm();
  for (int it = 0; it < iterations; ++it) {
    if (f < tol) break;
    CMatrix r = mcur - ecur;
    Eigen::VectorXd rv = vec_real(r);
    Eigen::MatrixXd j(2 * n * n, d1 + d2 + m);
    for (Eigen::Index i = 0; i < d1; ++i)
      j.col(i) = vec_real(CMatrix(b1[static_cast<size_t>(i)] * mcur));
    for (Eigen::Index i = 0; i < d2; ++i)
      j.col(d1 + i) = vec_real(CMatrix(-mcur * b2[static_cast<size_t>(i)]));
    // d/dt n exp(eta + t b) = n exp(eta) b for commuting c.
    CMatrix ebase = matexp(cpoint(cc));
    for (Eigen::Index i = 0; i < m; ++i)
      j.col(d1 + d2 + i) =
          vec_real(CMatrix(-c.n * ebase * bc[static_cast<size_t>(i)]));
    Eigen::MatrixXd jtj = j.transpose() * j;
    Eigen::VectorXd jtr = j.transpose() * rv;
    bool stepped = false;
    for (int tries = 0; tries < 24; ++tries) {
      Eigen::MatrixXd aug =
          jtj + lambda * Eigen::MatrixXd::Identity(jtj.rows(), jtj.cols());
      Eigen::VectorXd delta = aug.ldlt().solve(-jtr);
      CMatrix u = CMatrix::Zero(n, n), v = CMatrix::Zero(n, n);
      for (Eigen::Index i = 0; i < d1; ++i)
        u += delta(i) * b1[static_cast<size_t>(i)];
      for (Eigen::Index i = 0; i < d2; ++i)
        v += delta(d1 + i) * b2[static_cast<size_t>(i)];
      CMatrix k1n = matexp(u) * k1;
      CMatrix k2n = matexp(v) * k2;
      Eigen::VectorXd ccn = cc + delta.tail(m);
      CMatrix mn = k1n * y * k2n.inverse();
      CMatrix en = c.n * matexp(cpoint(ccn));
      double fn = (mn - en).squaredNorm();
      if (fn < f) {
        k1 = std::move(k1n);
        k2 = std::move(k2n);
        cc = std::move(ccn);
        mcur = std::move(mn);
        ecur = std::move(en);
        f = fn;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        break;
      }
      lambda *= 8.0;
    }
    if (!stepped) break;
  }
  return f;
}

}  // namespace detail

/// Enumerate W_{K1 x K2}(C) = N_{K1 x K2}(C) / Z_{K1 x K2}(C): take a
/// strongly regular probe x in C, pull randomized orbit points back onto C
/// by least squares over K1 x K2, record the induced affine maps on
/// c-coordinates, and close under composition. Elements are compared at
/// the exponential level, so torus-periodic translations are handled
/// without explicit lattice bookkeeping.
inline WeylGroupReport weyl_group(const Scenario& s,
                                  const FundamentalCartanData& f,
                                  const StandardCartanSubset& c,
                                  std::uint64_t seed, WeylBudget budget = {}) {
  (void)f;
  WeylGroupReport rep;
  const Eigen::Index n = s.n();
  const Eigen::Index m = c.c.dim();
  std::mt19937_64 rng(sub_seed(seed, 717));

  GroupPoint probe = generic_probe(s, c, sub_seed(seed, 718));

  auto rounded = [](double x) {
    double r = std::round(x * 1e5) / 1e5;
    if (r == 0.0) r = 0.0;  // strip negative zero
    return r;
  };
  auto key_of = [&](const AffineMapOnC& w) {
    std::ostringstream os;
    os.precision(7);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) os << rounded(w.linear(i, j)) << ",";
    CMatrix tr = CMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < m; ++i)
      tr += w.translation(i) * c.c.basis()[static_cast<size_t>(i)];
    CMatrix e = c.n * matexp(tr);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        os << rounded(e(i, j).real()) << "," << rounded(e(i, j).imag()) << ";";
    return os.str();
  };

  auto verify_map = [&](const AffineMapOnC& w, const CMatrix& k1,
                        const CMatrix& k2) {
    std::mt19937_64 r2(sub_seed(seed, 719));
    for (int t = 0; t < 3; ++t) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
      for (Eigen::Index i = 0; i < m; ++i)
        e(i) = 0.2 + 0.17 * static_cast<double>(t + i);
      CMatrix lhs = k1 * (c.n * matexp(c.c.from_coords_of(e))) * k2.inverse();
      Eigen::VectorXd img = w.translation + w.linear * e;
      CMatrix rhs = c.n * matexp(c.c.from_coords_of(img));
      if ((lhs - rhs).norm() > 1e-6) return false;
    }
    return true;
  };

  std::map<std::string, AffineMapOnC> elements;
  {
    AffineMapOnC id;
    id.linear = Eigen::MatrixXd::Identity(m, m);
    id.translation = Eigen::VectorXd::Zero(m);
    elements[key_of(id)] = id;
  }

  std::uniform_real_distribution<double> scale(0.25, 2.2);
  for (int sample = 0; sample < budget.samples; ++sample) {
    ++rep.samples_used;
    CMatrix kap1 = s.k_s1p.dim()
                       ? matexp(scale(rng) * random_element(s.k_s1p, rng))
                       : CMatrix::Identity(n, n);
    CMatrix kap2 = s.k_s2p.dim()
                       ? matexp(scale(rng) * random_element(s.k_s2p, rng))
                       : CMatrix::Identity(n, n);
    CMatrix y = kap1 * probe.value * kap2.inverse();
    CMatrix k1 = CMatrix::Identity(n, n);
    CMatrix k2 = CMatrix::Identity(n, n);
    Eigen::VectorXd cc(m);
    std::uniform_real_distribution<double> jitter(-1.2, 1.2);
    for (Eigen::Index i = 0; i < m; ++i) cc(i) = jitter(rng);
    double fval = detail::lm_onto_cartan(s, c, y, k1, k2, cc,
                                         budget.lm_iterations, 1e-28);
    if (fval > 1e-14) continue;

    CMatrix w1 = k1 * kap1;
    CMatrix w2 = k2 * kap2;
    // Linear part: Ad(w2) restricted to c.
    CMatrix w2i = w2.inverse();
    Eigen::MatrixXd lin(m, m);
    double resid = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      CMatrix img = w2 * c.c.basis()[static_cast<size_t>(i)] * w2i;
      lin.col(i) = c.c.coords_of(img);
      resid = std::max(resid,
                       frob_norm(img - c.c.from_coords_of(lin.col(i))));
    }
    if (resid > 1e-7) continue;
    // Translation: w1 n w2^{-1} = n exp(mu), mu in c.
    CMatrix w0 = c.n.inverse() * w1 * c.n * w2i;
    GroupPoint wsplit;
    try {
      wsplit = cartan_factor(s, w0);
    } catch (const CosetError&) {
      continue;
    }
    double adist = c.a.dim() ? c.a.distance(wsplit.xi) : frob_norm(wsplit.xi);
    if (adist > 1e-7 * (1.0 + frob_norm(wsplit.xi))) continue;
    Eigen::VectorXd mu_t;
    if (!detail::torus_log_in(c.t, wsplit.k, mu_t, rng)) continue;
    CMatrix mu_mat = CMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < c.t.dim(); ++i)
      mu_mat += mu_t(i) * c.t.basis()[static_cast<size_t>(i)];
    mu_mat += wsplit.xi;

    AffineMapOnC w;
    w.linear = lin;
    w.translation = c.c.coords_of(mu_mat);
    if (!verify_map(w, w1, w2)) continue;
    ++rep.samples_succeeded;
    std::string key = key_of(w);
    if (!elements.count(key)) {
      elements[key] = w;
      rep.generators.push_back(w);
    }
  }

  // Close under composition (translations compose modulo the torus
  // lattice, which the exponential-level key absorbs).
  bool grew = true;
  while (grew) {
    grew = false;
    std::vector<AffineMapOnC> cur;
    for (const auto& [k, v] : elements) cur.push_back(v);
    for (const auto& a : cur) {
      for (const auto& b : cur) {
        AffineMapOnC ab;
        ab.linear = a.linear * b.linear;
        ab.translation = a.translation + a.linear * b.translation;
        std::string key = key_of(ab);
        if (!elements.count(key)) {
          elements[key] = ab;
          grew = true;
        }
      }
      if (static_cast<long>(elements.size()) > budget.max_order) {
        rep.order = static_cast<long>(elements.size());
        rep.complete = false;
        for (const auto& [k, v] : elements) rep.elements.push_back(v);
        return rep;
      }
    }
  }
  rep.order = static_cast<long>(elements.size());
  rep.complete = true;
  for (const auto& [k, v] : elements) rep.elements.push_back(v);
  return rep;
}

}  // namespace coset
