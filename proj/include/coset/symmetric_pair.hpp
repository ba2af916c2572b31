#pragma once

#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "coset/gradient.hpp"
#include "coset/involution.hpp"
#include "coset/scenario.hpp"
#include "coset/subspace.hpp"

namespace coset {

/// A reductive symmetric pair (g, sigma): g = h (+) q with h the +1 and q
/// the -1 eigenspace of sigma, both theta-stable.
struct SymmetricPairData {
  RealSubspace g;
  InvolutionSpec sigma;
  RealSubspace h, q;
  RealSubspace h_k, h_p, q_k, q_p;  // theta splits
  Tolerances tol;

  Eigen::Index n() const { return g.matrix_size(); }

  CMatrix theta_k_part(const CMatrix& x) const {
    return 0.5 * (x + theta_alg(x));
  }
  CMatrix theta_p_part(const CMatrix& x) const {
    return 0.5 * (x - theta_alg(x));
  }

  /// Worst bracket-closure residual over ([h,h],h), ([h,q],q), ([q,q],h).
  double bracket_residuals() const {
    double worst = 0.0;
    for (const auto& x : h.basis())
      for (const auto& y : h.basis())
        worst = std::max(worst, h.distance(bracket(x, y)));
    for (const auto& x : h.basis())
      for (const auto& y : q.basis())
        worst = std::max(worst, q.distance(bracket(x, y)));
    for (const auto& x : q.basis())
      for (const auto& y : q.basis())
        worst = std::max(worst, h.distance(bracket(x, y)));
    return worst;
  }
};

inline SymmetricPairData make_symmetric_pair(const RealSubspace& algebra,
                                             const InvolutionSpec& sigma,
                                             Tolerances tol = {}) {
  SymmetricPairData pair;
  pair.g = algebra;
  pair.sigma = sigma;
  pair.tol = tol;
  auto [h, q] = involution_split(
      algebra, [&](const CMatrix& x) { return sigma(x); }, tol.rank);
  pair.h = std::move(h);
  pair.q = std::move(q);
  auto th = [](const CMatrix& x) { return theta_alg(x); };
  std::tie(pair.h_k, pair.h_p) = involution_split(pair.h, th, tol.rank);
  std::tie(pair.q_k, pair.q_p) = involution_split(pair.q, th, tol.rank);
  return pair;
}

/// The slice pair at a zero-fiber point x: the algebra is the fixed space
/// of tau_x, sigma is sigma2 restricted, and h/q come out as h^x and q^x.
inline SymmetricPairData slice_pair_at(const Scenario& s, const GroupPoint& x,
                                       const IsotropyData& iso) {
  RealSubspace fixed = tau_x_fixed_space(s, iso);
  return make_symmetric_pair(fixed, s.sigma2, s.tol);
}

inline SymmetricPairData slice_pair_at(const Scenario& s,
                                       const GroupPoint& x) {
  IsotropyData iso = isotropy_and_slice(s, x);
  return slice_pair_at(s, x, iso);
}

// ---------------------------------------------------------------------------
// Jordan-Chevalley decomposition
// ---------------------------------------------------------------------------

struct JordanDecomposition {
  CMatrix xi_s, xi_n;
  double commutator_norm = 0.0;
  double q_residual_s = 0.0;
  double q_residual_n = 0.0;
  double matrix_nilpotency = 0.0;  // ||xi_n^N|| / (||xi_n|| + eps)^N
  bool semisimple = false;         // whether xi_n is negligible
};

/// Jordan-Chevalley split xi = xi_s + xi_n in the defining representation.
/// Eigenvalues are clustered with radius eps_cluster; the semisimple part
/// is the Newton limit of x <- x - g(x) g'(x)^{-1} for the square-free
/// cluster polynomial g(t) = prod_c (t - mu_c). Throws IllConditioned when
/// cluster centers are separated by less than 10 * eps_cluster.
inline JordanDecomposition jordan_chevalley(const SymmetricPairData& pair,
                                            const CMatrix& xi) {
  const Eigen::Index n = xi.rows();
  const double scale = frob_norm(xi);
  JordanDecomposition out;

  Eigen::ComplexEigenSolver<CMatrix> ces(xi, false);
  auto clusters = detail::cluster_values(ces.eigenvalues(), pair.tol.cluster);
  std::vector<complexd> mus;
  for (const auto& cl : clusters) {
    complexd m = 0.0;
    for (auto i : cl) m += ces.eigenvalues()(i);
    mus.push_back(m / static_cast<double>(cl.size()));
  }
  for (size_t i = 0; i < mus.size(); ++i)
    for (size_t j = i + 1; j < mus.size(); ++j)
      if (std::abs(mus[i] - mus[j]) < 10.0 * pair.tol.cluster)
        throw IllConditioned(
            "jordan_chevalley: eigenvalue clusters too close for a reliable "
            "decomposition");

  const CMatrix id = CMatrix::Identity(n, n);
  CMatrix x = xi;
  for (int it = 0; it < 12; ++it) {
    CMatrix gval = id;
    for (const auto& mu : mus) gval = gval * (x - mu * id);
    if (gval.norm() < 1e-14 * (1.0 + std::pow(scale + 1.0,
                                              static_cast<double>(mus.size()))))
      break;
    CMatrix gder = CMatrix::Zero(n, n);
    for (size_t j = 0; j < mus.size(); ++j) {
      CMatrix term = id;
      for (size_t i = 0; i < mus.size(); ++i)
        if (i != j) term = term * (x - mus[i] * id);
      gder += term;
    }
    x = x - gder.partialPivLu().solve(gval);
  }
  out.xi_s = x;
  out.xi_n = xi - x;
  out.commutator_norm = frob_norm(bracket(out.xi_s, out.xi_n));
  out.q_residual_s = pair.q.distance(out.xi_s);
  out.q_residual_n = pair.q.distance(out.xi_n);

  double nn = frob_norm(out.xi_n);
  CMatrix pw = out.xi_n;
  for (Eigen::Index i = 1; i < n; ++i) pw = pw * out.xi_n;
  out.matrix_nilpotency =
      pw.norm() / std::pow(nn + 1e-300, static_cast<double>(n));
  out.semisimple = nn < pair.tol.nilzero * (1.0 + scale);
  return out;
}

/// ad-nilpotency residual: norm of ad(x)^(dim g) applied to the basis,
/// relative to the worst-case growth bound.
inline double ad_nilpotency_residual(const SymmetricPairData& pair,
                                     const CMatrix& x) {
  double bound = std::pow(2.0 * frob_norm(x) + 1e-30,
                          static_cast<double>(pair.g.dim()));
  double worst = 0.0;
  for (const auto& b : pair.g.basis()) {
    CMatrix v = b;
    for (Eigen::Index i = 0; i < pair.g.dim(); ++i) {
      v = bracket(x, v);
      if (v.norm() < 1e-300) break;
    }
    worst = std::max(worst, v.norm() / bound);
  }
  return worst;
}

/// Gradient value of the adjoint H-action on q at xi: the bracket of the
/// theta parts, [xi_k, xi_p]. Vanishes exactly on the zero fiber.
inline CMatrix phi_H(const SymmetricPairData& pair, const CMatrix& xi) {
  CMatrix xk = pair.theta_k_part(xi);
  CMatrix xp = pair.theta_p_part(xi);
  return bracket(xk, xp);
}

struct QFlowResult {
  CMatrix xi;
  bool converged = false;
  long iterations = 0;
  double final_norm = 0.0;
};

/// Discrete gradient flow xi <- Ad(exp(-s beta)) xi, beta = Phi_H(xi), with
/// Armijo backtracking on ||Phi_H||^2. Iterates stay on the Ad(H)-orbit.
inline QFlowResult flow_in_q(const SymmetricPairData& pair, const CMatrix& xi0,
                             double tol_converge = 1e-10,
                             long max_iters = 40000) {
  QFlowResult res;
  res.xi = xi0;
  CMatrix beta = phi_H(pair, res.xi);
  double f = frob_inner(beta, beta);
  double step = 1.0;
  long it = 0;
  for (; it < max_iters; ++it) {
    double bn = std::sqrt(f);
    if (bn < tol_converge) {
      res.converged = true;
      break;
    }
    CMatrix dir = bracket(beta, res.xi);  // d/dt Ad(exp(t beta)) xi at 0
    double qq = frob_inner(dir, dir);
    double st = std::min(step * 2.0, 1.0);
    bool accepted = false;
    while (st >= 1e-16) {
      CMatrix e = matexp(-st * beta);
      CMatrix cand = e * res.xi * e.inverse();
      CMatrix bn2 = phi_H(pair, cand);
      double fn = frob_inner(bn2, bn2);
      if (fn <= f - 1e-4 * st * 2.0 * qq) {
        res.xi = std::move(cand);
        beta = std::move(bn2);
        f = fn;
        step = st;
        accepted = true;
        break;
      }
      st *= 0.5;
    }
    if (!accepted) break;
  }
  res.iterations = it;
  res.final_norm = std::sqrt(f);
  if (res.final_norm < tol_converge) res.converged = true;
  return res;
}

/// Closed-orbit test via the Jordan route: the orbit Ad(H) xi is closed iff
/// xi is semisimple.
inline bool is_closed_orbit(const SymmetricPairData& pair, const CMatrix& xi) {
  return jordan_chevalley(pair, xi).semisimple;
}

/// Flow-based closedness verdict, independent of the Jordan route. Closed
/// (semisimple) orbits reach the zero fiber at an exponential rate, while
/// the escape toward the boundary orbit of a non-closed one decays only
/// polynomially (the nilpotent directions make ||Phi_H||^2 quartically
/// degenerate, giving ||Phi_H|| ~ 1/t). Hence: budget exhaustion IS the
/// non-closed signature; for converged flows, closedness additionally
/// requires that a much deeper flow barely moves the point.
inline bool is_closed_orbit_flow(const SymmetricPairData& pair,
                                 const CMatrix& xi,
                                 double tol_first = 1e-9,
                                 double tol_second = 1e-12,
                                 double move_tol = 1e-6,
                                 long budget = 60000) {
  QFlowResult first = flow_in_q(pair, xi, tol_first, budget);
  if (!first.converged) return false;
  QFlowResult second = flow_in_q(pair, first.xi, tol_second, budget);
  double moved = frob_norm(second.xi - first.xi);
  return moved < move_tol * (1.0 + frob_norm(xi));
}

// ---------------------------------------------------------------------------
// Cartan subspaces and restricted weights
// ---------------------------------------------------------------------------

/// Centralizer of a set of matrices inside a subspace.
inline RealSubspace centralizer_in(const RealSubspace& domain,
                                   const std::vector<CMatrix>& elts,
                                   double eps_rank) {
  if (elts.empty()) return domain;
  const Eigen::Index d = domain.dim();
  const Eigen::Index n = domain.matrix_size();
  Eigen::MatrixXd stacked(2 * n * n * static_cast<Eigen::Index>(elts.size()),
                          d);
  for (size_t e = 0; e < elts.size(); ++e)
    for (Eigen::Index j = 0; j < d; ++j)
      stacked.block(static_cast<Eigen::Index>(e) * 2 * n * n, j, 2 * n * n, 1) =
          vec_real(bracket(elts[e], domain.basis()[static_cast<size_t>(j)]));
  Eigen::MatrixXd ker = detail::nullspace_cols(stacked, eps_rank);
  std::vector<CMatrix> gens;
  for (Eigen::Index j = 0; j < ker.cols(); ++j)
    gens.push_back(domain.from_coords_of(ker.col(j)));
  if (gens.empty()) return RealSubspace::zero(n);
  return RealSubspace::span_of(gens, eps_rank);
}

inline CMatrix random_element(const RealSubspace& v, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd c(v.dim());
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = gauss(rng);
  if (c.size() && c.norm() > 0) c /= c.norm();
  return v.from_coords_of(c);
}

/// One entry of a restricted-weight table: the weight as a real coordinate
/// functional on the chosen ordered Cartan basis (imaginary parts on the
/// t-part, real parts on the a-part), and its complex weight space.
struct WeightEntry {
  Eigen::VectorXd lambda;
  ComplexSubspace space;
  bool zero = false;
};

struct WeightTable {
  std::vector<WeightEntry> entries;
  Eigen::Index frame_dim = 0;
  double convention_residual = 0.0;  // off-convention eigenvalue parts
  double symmetry_residual = 0.0;    // sigma(g_lambda) vs g_{-lambda}
};

struct CartanSubspaceData {
  RealSubspace c, t_part, a_part;
  WeightTable weights;
  std::uint64_t seed = 0;
};

/// Greedy construction of a theta-stable Cartan subspace of q: flow a
/// random element to the zero fiber of Phi_H, seed the subspace with its
/// theta parts, then extend by theta-pure centralizer elements until the
/// centralizer certificate Z_q(c) = c holds.
inline CartanSubspaceData cartan_subspace_raw(const SymmetricPairData& pair,
                                              std::uint64_t seed,
                                              int retry_budget = 20) {
  std::mt19937_64 rng(seed);
  const double eps = pair.tol.rank;
  for (int attempt = 0; attempt < retry_budget; ++attempt) {
    std::vector<CMatrix> cbasis;
    if (pair.q.dim() > 0) {
      CMatrix xi = random_element(pair.q, rng);
      QFlowResult fl = flow_in_q(pair, xi, 1e-11);
      if (!fl.converged) continue;
      CMatrix xk = pair.theta_k_part(fl.xi);
      CMatrix xp = pair.theta_p_part(fl.xi);
      if (frob_norm(xk) > 1e-7) cbasis.push_back(xk / frob_norm(xk));
      if (frob_norm(xp) > 1e-7) cbasis.push_back(xp / frob_norm(xp));
    }
    RealSubspace c = cbasis.empty() ? RealSubspace::zero(pair.n())
                                    : RealSubspace::span_of(cbasis, eps);
    bool ok = true;
    for (int guard = 0; guard < 200; ++guard) {
      RealSubspace z = centralizer_in(pair.q, c.basis(), eps);
      if (z.dim() == c.dim()) break;
      RealSubspace ext = c.orthocomplement_in(z, eps);
      auto [ek, ep] = involution_split(
          ext, [](const CMatrix& x) { return theta_alg(x); }, eps);
      RealSubspace* pick = ek.dim() > 0 ? &ek : (ep.dim() > 0 ? &ep : nullptr);
      if (!pick) {
        ok = false;
        break;
      }
      cbasis = c.basis();
      cbasis.push_back(random_element(*pick, rng));
      c = RealSubspace::span_of(cbasis, eps);
    }
    if (!ok) continue;
    RealSubspace z = centralizer_in(pair.q, c.basis(), eps);
    if (z.dim() != c.dim()) continue;
    double ab = 0.0;
    for (const auto& x : c.basis())
      for (const auto& y : c.basis()) ab = std::max(ab, frob_norm(bracket(x, y)));
    if (ab > 1e-8) continue;

    CartanSubspaceData data;
    data.seed = seed;
    data.c = c;
    auto [ck, cp] = involution_split(
        c, [](const CMatrix& x) { return theta_alg(x); }, eps);
    data.t_part = std::move(ck);
    data.a_part = std::move(cp);
    return data;
  }
  throw ExtensionStalled(
      "cartan_subspace: no maximal Abelian subspace found within the retry "
      "budget");
}

/// Weight decomposition of the complexified algebra with respect to a
/// Cartan subspace. Weights are stored as real coordinate functionals on
/// the ordered basis (t-part first, then a-part).
inline WeightTable restricted_weights(const SymmetricPairData& pair,
                                      const RealSubspace& t_part,
                                      const RealSubspace& a_part) {
  WeightTable table;
  const Eigen::Index d = pair.g.dim();
  table.frame_dim = d;
  std::vector<Eigen::MatrixXcd> ops;
  std::vector<bool> is_t;
  for (const auto& b : t_part.basis()) {
    auto [m, resid] =
        pair.g.operator_matrix([&](const CMatrix& x) { return bracket(b, x); });
    ops.push_back(m.cast<complexd>());
    is_t.push_back(true);
  }
  for (const auto& b : a_part.basis()) {
    auto [m, resid] =
        pair.g.operator_matrix([&](const CMatrix& x) { return bracket(b, x); });
    ops.push_back(m.cast<complexd>());
    is_t.push_back(false);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(ops.size());
  if (m == 0) {
    WeightEntry e;
    e.lambda = Eigen::VectorXd(0);
    e.space = ComplexSubspace::full(d);
    e.zero = true;
    table.entries.push_back(std::move(e));
    return table;
  }

  auto blocks = joint_eigensplit(ops, pair.tol.cluster, pair.tol.comm,
                                 pair.tol.rank);
  for (auto& blk : blocks) {
    WeightEntry e;
    e.lambda = Eigen::VectorXd(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      complexd v = blk.value(i);
      if (is_t[static_cast<size_t>(i)]) {
        e.lambda(i) = v.imag();
        table.convention_residual =
            std::max(table.convention_residual, std::abs(v.real()));
      } else {
        e.lambda(i) = v.real();
        table.convention_residual =
            std::max(table.convention_residual, std::abs(v.imag()));
      }
    }
    e.zero = e.lambda.norm() < pair.tol.weight;
    e.space = std::move(blk.space);
    table.entries.push_back(std::move(e));
  }

  // sigma maps the lambda-space onto the (-lambda)-space.
  Eigen::MatrixXd smat =
      pair.g.operator_matrix([&](const CMatrix& x) { return pair.sigma(x); })
          .first;
  Eigen::MatrixXcd sc = smat.cast<complexd>();
  for (const auto& e : table.entries) {
    if (e.zero) continue;
    for (const auto& f : table.entries) {
      if ((e.lambda + f.lambda).norm() < 1e-6) {
        ComplexSubspace mapped{d, detail::orth_cols(
                                      Eigen::MatrixXcd(sc * e.space.q),
                                      pair.tol.rank)};
        table.symmetry_residual =
            std::max(table.symmetry_residual,
                     detail::subspace_distance_cols(mapped.q, f.space.q));
      }
    }
  }
  return table;
}

inline CartanSubspaceData cartan_subspace(const SymmetricPairData& pair,
                                          std::uint64_t seed,
                                          int retry_budget = 20) {
  CartanSubspaceData data = cartan_subspace_raw(pair, seed, retry_budget);
  data.weights = restricted_weights(pair, data.t_part, data.a_part);
  return data;
}

/// Complex eigenvalue of ad(eta0) on a weight space, from the stored real
/// functional: i * lambda_t on the t-part, lambda_a on the a-part.
inline complexd weight_value_at(const WeightEntry& e,
                                const Eigen::VectorXd& coords,
                                Eigen::Index t_dim) {
  complexd v = 0.0;
  for (Eigen::Index i = 0; i < coords.size(); ++i) {
    if (i < t_dim)
      v += complexd(0.0, e.lambda(i)) * coords(i);
    else
      v += complexd(e.lambda(i), 0.0) * coords(i);
  }
  return v;
}

struct SliceDecomposition {
  RealSubspace h_bracket;   // [h, eta0]
  RealSubspace c;           // the Cartan subspace itself
  RealSubspace third;       // q /\ (+)_{lambda(eta0)=0, lambda != 0} g_lambda
  std::vector<size_t> active_weights;  // indices into the weight table
};

/// q = [h, eta0] (+) c (+) (q /\ sum of weight spaces vanishing at eta0).
inline SliceDecomposition slice_at_semisimple(const SymmetricPairData& pair,
                                              const CartanSubspaceData& c,
                                              const CMatrix& eta0) {
  SliceDecomposition out;
  out.c = c.c;
  const double eps = pair.tol.rank;

  std::vector<CMatrix> img;
  for (const auto& b : pair.h.basis()) img.push_back(bracket(b, eta0));
  out.h_bracket = img.empty() ? RealSubspace::zero(pair.n())
                              : RealSubspace::span_of(img, eps);

  // Coordinates of eta0 on the ordered (t, a) basis.
  Eigen::VectorXd tc = c.t_part.coords_of(eta0);
  Eigen::VectorXd ac = c.a_part.coords_of(eta0);
  Eigen::VectorXd coords(tc.size() + ac.size());
  coords << tc, ac;

  ComplexSubspace acc{pair.g.dim(), Eigen::MatrixXcd(pair.g.dim(), 0)};
  for (size_t i = 0; i < c.weights.entries.size(); ++i) {
    const auto& e = c.weights.entries[i];
    if (e.zero) continue;
    if (std::abs(weight_value_at(e, coords, c.t_part.dim())) <
        pair.tol.weight) {
      acc = acc.sum(e.space, eps);
      out.active_weights.push_back(i);
    }
  }
  RealSubspace real_cut = acc.dim() ? acc.real_points(pair.g, eps)
                                    : RealSubspace::zero(pair.n());
  out.third = real_cut.dim() ? real_cut.intersect(pair.q, eps)
                             : RealSubspace::zero(pair.n());
  return out;
}

/// Null-cone membership: 0 lies in the closure of Ad(H) xi iff the
/// semisimple part vanishes. Central components of xi land in xi_s and
/// block membership, as they must.
inline bool in_null_cone(const SymmetricPairData& pair, const CMatrix& xi) {
  JordanDecomposition jd = jordan_chevalley(pair, xi);
  return frob_norm(jd.xi_s) < pair.tol.nilzero * (1.0 + frob_norm(xi));
}

struct NonclosedWitness {
  CMatrix eta0;     // semisimple part: a point of the closed orbit below
  CMatrix nilpart;  // nilpotent part, in the null cone of Z_H(eta0) on the
                    // centralizer slice
  double centralizer_residual = 0.0;
};

/// For xi off a closed orbit, produce the unique closed orbit representative
/// in the closure (the semisimple part) and the certified nilpotent offset.
inline NonclosedWitness nonclosed_witness(const SymmetricPairData& pair,
                                          const CMatrix& xi) {
  JordanDecomposition jd = jordan_chevalley(pair, xi);
  if (jd.semisimple)
    throw AlreadyClosed("nonclosed_witness: orbit is closed (xi semisimple)");
  NonclosedWitness w;
  w.eta0 = jd.xi_s;
  w.nilpart = jd.xi_n;
  // Certify: the nilpotent part lives in the centralizer of eta0 and is in
  // the null cone of the centralizer pair.
  RealSubspace zg = centralizer_in(pair.g, {w.eta0}, pair.tol.rank);
  w.centralizer_residual = zg.distance(w.nilpart);
  SymmetricPairData zpair = make_symmetric_pair(zg, pair.sigma, pair.tol);
  if (!in_null_cone(zpair, w.nilpart))
    throw InternalInconsistency(
        "nonclosed_witness: nilpotent part not in the centralizer null cone");
  return w;
}

}  // namespace coset
