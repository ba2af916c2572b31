#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "coset/involution.hpp"
#include "coset/numeric.hpp"
#include "coset/subspace.hpp"

namespace coset {

/// A matrix realization of a real-reductive group: a real basis of its Lie
/// algebra inside gl(N,C), closed under bracket and stable under the Cartan
/// involution theta(X) = -conj(X)^T.
struct ReductiveGroupData {
  Eigen::Index n = 0;
  RealSubspace algebra;
  std::string name;
};

/// An element x of the group carried with its Cartan factors x = k exp(xi),
/// k unitary, xi in p.
struct GroupPoint {
  CMatrix value;
  CMatrix k;
  CMatrix xi;
};

struct ValidationCheck {
  std::string name;
  bool pass = false;
  double residual = 0.0;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_pass = true;

  void add(const std::string& name, double residual, double tol) {
    bool ok = residual <= tol;
    checks.push_back({name, ok, residual});
    all_pass = all_pass && ok;
  }
  void add_flag(const std::string& name, bool ok, double residual = 0.0) {
    checks.push_back({name, ok, residual});
    all_pass = all_pass && ok;
  }
};

/// The full setup for one double-coset problem: the ambient group, the two
/// involutions, and cached eigenspace data. Immutable after construction.
class Scenario {
 public:
  ReductiveGroupData group;
  InvolutionSpec sigma1, sigma2;
  Tolerances tol;

  // Derived caches.
  RealSubspace k, p;                    // theta split of the algebra
  RealSubspace g_s1p, g_s1m;            // g^{+sigma1}, g^{-sigma1}
  RealSubspace g_s2p, g_s2m;
  RealSubspace k_s1p, k_s1m, p_s1p, p_s1m;
  RealSubspace k_s2p, k_s2m, p_s2p, p_s2m;
  bool is_complex = false;              // algebra closed under X -> iX
  std::map<std::string, double> split_residuals;

  static Scenario make(ReductiveGroupData grp, InvolutionSpec s1,
                       InvolutionSpec s2, Tolerances t = {}) {
    Scenario s;
    s.group = std::move(grp);
    s.sigma1 = std::move(s1);
    s.sigma2 = std::move(s2);
    s.tol = t;
    s.build_caches();
    return s;
  }

  Eigen::Index n() const { return group.n; }
  const RealSubspace& algebra() const { return group.algebra; }

  CMatrix theta(const CMatrix& x) const { return theta_alg(x); }
  CMatrix tau(const CMatrix& x) const { return sigma2(sigma1(x)); }
  CMatrix ad(const CMatrix& g, const CMatrix& x) const {
    return g * x * g.inverse();
  }

  /// Image of a subspace under Ad(g).
  RealSubspace ad_subspace(const CMatrix& g, const RealSubspace& v) const {
    CMatrix gi = g.inverse();
    return v.map([&](const CMatrix& x) { return g * x * gi; }, tol.rank);
  }

  /// tau_x = sigma2 o Ad(x^{-1}) o sigma1 o Ad(x) as a matrix map.
  CMatrix tau_x(const CMatrix& x, const CMatrix& v) const {
    CMatrix xi = x.inverse();
    return sigma2(xi * sigma1(x * v * xi) * x);
  }

  /// Operator matrix of tau_x on the algebra.
  Eigen::MatrixXd tau_x_matrix(const CMatrix& x) const {
    CMatrix xinv = x.inverse();
    auto f = [&](const CMatrix& v) {
      return sigma2(xinv * sigma1(x * v * xinv) * x);
    };
    return algebra().operator_matrix(f).first;
  }

 private:
  void build_caches() {
    const auto& g = group.algebra;
    double eps = tol.rank;

    auto lenient_split = [&](const std::function<CMatrix(const CMatrix&)>& f,
                             const std::string& label)
        -> std::pair<RealSubspace, RealSubspace> {
      auto [m, resid] = g.operator_matrix(f);
      split_residuals[label] = resid;
      Eigen::Index d = g.dim();
      Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
      Eigen::MatrixXd pc = detail::nullspace_cols(Eigen::MatrixXd(m - id), eps);
      Eigen::MatrixXd mc = detail::nullspace_cols(Eigen::MatrixXd(m + id), eps);
      auto lift = [&](const Eigen::MatrixXd& c) {
        std::vector<CMatrix> gens;
        for (Eigen::Index j = 0; j < c.cols(); ++j)
          gens.push_back(g.from_coords_of(c.col(j)));
        if (gens.empty()) return RealSubspace::zero(g.matrix_size());
        return RealSubspace::span_of(gens, eps);
      };
      return {lift(pc), lift(mc)};
    };

    auto th = [](const CMatrix& x) { return theta_alg(x); };
    auto s1 = [this](const CMatrix& x) { return sigma1(x); };
    auto s2 = [this](const CMatrix& x) { return sigma2(x); };

    std::tie(k, p) = lenient_split(th, "theta");
    std::tie(g_s1p, g_s1m) = lenient_split(s1, "sigma1");
    std::tie(g_s2p, g_s2m) = lenient_split(s2, "sigma2");

    k_s1p = k.intersect(g_s1p, eps);
    k_s1m = k.intersect(g_s1m, eps);
    p_s1p = p.intersect(g_s1p, eps);
    p_s1m = p.intersect(g_s1m, eps);
    k_s2p = k.intersect(g_s2p, eps);
    k_s2m = k.intersect(g_s2m, eps);
    p_s2p = p.intersect(g_s2p, eps);
    p_s2m = p.intersect(g_s2m, eps);

    is_complex = true;
    for (const auto& b : g.basis()) {
      if (g.distance(complexd(0, 1) * b) > tol.member) {
        is_complex = false;
        break;
      }
    }
  }
};

/// Run every scenario invariant and report pass/fail with residuals.
/// Failures here abort downstream pipelines.
inline ValidationReport validate_scenario(const Scenario& s) {
  ValidationReport rep;
  const auto& g = s.algebra();
  const double tol_struct = 1e-8;

  double br = 0.0;
  for (const auto& x : g.basis())
    for (const auto& y : g.basis()) br = std::max(br, g.distance(bracket(x, y)));
  rep.add("algebra bracket closure", br, 1e-9);

  double th = 0.0;
  for (const auto& x : g.basis()) th = std::max(th, g.distance(theta_alg(x)));
  rep.add("algebra theta-stable", th, tol_struct);

  auto check_sigma = [&](const InvolutionSpec& sg, const std::string& label) {
    double pres = 0.0, invol = 0.0, comm = 0.0;
    for (const auto& x : g.basis()) {
      CMatrix sx = sg(x);
      pres = std::max(pres, g.distance(sx));
      invol = std::max(invol, frob_norm(sg(sx) - x));
      comm = std::max(comm, frob_norm(theta_alg(sx) - sg(theta_alg(x))));
    }
    rep.add(label + " preserves algebra", pres, tol_struct);
    rep.add(label + " involutive", invol, tol_struct);
    rep.add(label + " commutes with theta", comm, tol_struct);
  };
  check_sigma(s.sigma1, "sigma1");
  check_sigma(s.sigma2, "sigma2");

  rep.add_flag("dim k + dim p = dim g",
               s.k.dim() + s.p.dim() == g.dim(),
               static_cast<double>(s.k.dim() + s.p.dim() - g.dim()));
  rep.add_flag("dim g^{sigma1} + dim g^{-sigma1} = dim g",
               s.g_s1p.dim() + s.g_s1m.dim() == g.dim(),
               static_cast<double>(s.g_s1p.dim() + s.g_s1m.dim() - g.dim()));
  rep.add_flag("dim g^{sigma2} + dim g^{-sigma2} = dim g",
               s.g_s2p.dim() + s.g_s2m.dim() == g.dim(),
               static_cast<double>(s.g_s2p.dim() + s.g_s2m.dim() - g.dim()));

  // tau restricted to the center must be semisimple with unit-circle
  // eigenvalues. The center is the kernel of the stacked ad map.
  {
    Eigen::Index d = g.dim();
    Eigen::MatrixXd stacked(d * d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) {
        CMatrix bij = bracket(g.basis()[static_cast<size_t>(j)],
                              g.basis()[static_cast<size_t>(i)]);
        stacked.block(i * d, j, d, 1) = g.coords_of(bij);
      }
    }
    Eigen::MatrixXd zc = detail::nullspace_cols(stacked, s.tol.rank);
    if (zc.cols() == 0) {
      rep.add_flag("tau on center semisimple unit-modulus", true, 0.0);
    } else {
      // Matrix of tau restricted to the center.
      std::vector<CMatrix> zbasis;
      for (Eigen::Index j = 0; j < zc.cols(); ++j)
        zbasis.push_back(g.from_coords_of(zc.col(j)));
      RealSubspace center = RealSubspace::span_of(zbasis, s.tol.rank);
      auto [m, resid] =
          center.operator_matrix([&](const CMatrix& x) { return s.tau(x); });
      Eigen::EigenSolver<Eigen::MatrixXd> es(m);
      double worst = resid;
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        worst = std::max(worst, std::abs(std::abs(es.eigenvalues()(i)) - 1.0));
      rep.add("tau on center semisimple unit-modulus", worst, 1e-8);
    }
  }

  return rep;
}

/// Whether Ad(u) preserves the scenario algebra; proxy for membership of a
/// unitary matrix in the group's compact part.
inline double ad_preservation_residual(const Scenario& s, const CMatrix& u) {
  CMatrix ui = u.inverse();
  double worst = 0.0;
  for (const auto& b : s.algebra().basis())
    worst = std::max(worst, s.algebra().distance(u * b * ui));
  return worst;
}

/// Cartan factorization x = k exp(xi) with xi in p: xi is half the
/// Hermitian log of conj(x)^T x projected onto p, and k = x exp(-xi).
/// Throws NotInGroup if xi fails p-membership.
inline GroupPoint cartan_factor(const Scenario& s, const CMatrix& x) {
  CMatrix gram = x.adjoint() * x;
  CMatrix xi_raw = 0.5 * hermitian_log(gram, s.tol.herm, s.tol.pd);
  double memb = s.p.distance(xi_raw);
  if (memb > s.tol.member * (1.0 + frob_norm(xi_raw)))
    throw NotInGroup("cartan_factor: xi off p by " + std::to_string(memb));
  CMatrix xi = s.p.project(xi_raw);
  CMatrix k = x * matexp(-xi);
  double unit = frob_norm(k.adjoint() * k -
                          CMatrix::Identity(s.n(), s.n()));
  if (unit > 1e-8)
    throw NotInGroup("cartan_factor: k not unitary, residual " +
                     std::to_string(unit));
  return {x, k, xi};
}

/// Synthesize a group point from factors (no factorization round trip).
inline GroupPoint group_point(const CMatrix& k, const CMatrix& xi) {
  return {k * matexp(xi), k, xi};
}

enum class SplitKind { Sigma1, Sigma2, Theta, TauFixed };

/// Split a sigma- or theta-invariant subspace into (+1, -1) eigenspaces;
/// for TauFixed, returns (fixed space of tau, invariant complement).
inline std::pair<RealSubspace, RealSubspace> eigenspace_split(
    const Scenario& s, SplitKind which, const RealSubspace& domain) {
  std::function<CMatrix(const CMatrix&)> f;
  switch (which) {
    case SplitKind::Sigma1:
      f = [&](const CMatrix& x) { return s.sigma1(x); };
      break;
    case SplitKind::Sigma2:
      f = [&](const CMatrix& x) { return s.sigma2(x); };
      break;
    case SplitKind::Theta:
      f = [](const CMatrix& x) { return theta_alg(x); };
      break;
    case SplitKind::TauFixed: {
      auto [m, resid] = domain.operator_matrix(
          [&](const CMatrix& x) { return s.tau(x); });
      if (resid > 1e-7)
        throw NotInvariant("eigenspace_split: tau does not preserve domain");
      Eigen::Index d = domain.dim();
      Eigen::MatrixXd fixed_c = detail::nullspace_cols(
          Eigen::MatrixXd(m - Eigen::MatrixXd::Identity(d, d)), s.tol.rank);
      std::vector<CMatrix> gens;
      for (Eigen::Index j = 0; j < fixed_c.cols(); ++j)
        gens.push_back(domain.from_coords_of(fixed_c.col(j)));
      RealSubspace fixed = gens.empty()
                               ? RealSubspace::zero(domain.matrix_size())
                               : RealSubspace::span_of(gens, s.tol.rank);
      return {fixed, fixed.orthocomplement_in(domain, s.tol.rank)};
    }
  }
  return involution_split(domain, f, s.tol.rank);
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace presets {

/// Real basis of sl(n,C) inside gl(n,C): elementary off-diagonal matrices,
/// diagonal differences, and i times each.
inline std::vector<CMatrix> sl_basis_real(Eigen::Index n) {
  std::vector<CMatrix> out;
  auto push_with_i = [&](const CMatrix& m) {
    out.push_back(m);
    out.push_back(complexd(0, 1) * m);
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      CMatrix e = CMatrix::Zero(n, n);
      e(i, j) = 1.0;
      push_with_i(e);
    }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    CMatrix h = CMatrix::Zero(n, n);
    h(i, i) = 1.0;
    h(i + 1, i + 1) = -1.0;
    push_with_i(h);
  }
  return out;
}

/// The defining-plus-dual embedding X -> diag(X, -X^T) of a complex matrix
/// algebra. It is C-linear and makes the transpose automorphism inner,
/// which is needed to express the involutions below as conjugations.
inline CMatrix double_embed(const CMatrix& x) {
  Eigen::Index n = x.rows();
  CMatrix y = CMatrix::Zero(2 * n, 2 * n);
  y.topLeftCorner(n, n) = x;
  y.bottomRightCorner(n, n) = -x.transpose();
  return y;
}

/// SL(2,C) acted on by SL(2,R) x SO(2,C): sigma1 is entrywise conjugation,
/// sigma2 is conjugation by the standard symplectic J (which realizes
/// g -> (g^T)^{-1} on SL(2)).
inline Scenario sl2c_sl2r_so2c(Tolerances tol = {}) {
  ReductiveGroupData grp;
  grp.n = 2;
  grp.name = "sl2c_sl2r_so2c";
  grp.algebra = RealSubspace::span_of(sl_basis_real(2), tol.rank);
  InvolutionSpec s1(CMatrix::Identity(2, 2), true);
  CMatrix j(2, 2);
  j << 0, 1, -1, 0;
  InvolutionSpec s2(j, false);
  return Scenario::make(std::move(grp), std::move(s1), std::move(s2), tol);
}

namespace detail_su22 {

inline std::vector<CMatrix> doubled_sl4_basis(double eps_rank) {
  std::vector<CMatrix> gens;
  for (const auto& b : sl_basis_real(4)) gens.push_back(double_embed(b));
  (void)eps_rank;
  return gens;
}

inline CMatrix i22_8() {
  Eigen::VectorXcd d(8);
  d << 1, 1, -1, -1, 1, 1, -1, -1;
  return d.asDiagonal();
}

/// Block swap [[0, I22],[I22, 0]]; composed with entrywise conjugation it
/// realizes the involution fixing su(2,2) in the doubled embedding.
inline CMatrix swap_i22_8() {
  CMatrix a = CMatrix::Zero(8, 8);
  Eigen::VectorXcd d(4);
  d << 1, 1, -1, -1;
  a.topRightCorner(4, 4) = CMatrix(d.asDiagonal());
  a.bottomLeftCorner(4, 4) = CMatrix(d.asDiagonal());
  return a;
}

}  // namespace detail_su22

/// SL(4,C) (doubled realization) acted on by SU(2,2) x S(GL(2,C)xGL(2,C)).
inline Scenario sl4c_su22_kc(Tolerances tol = {}) {
  ReductiveGroupData grp;
  grp.n = 8;
  grp.name = "sl4c_su22_kc";
  grp.algebra =
      RealSubspace::span_of(detail_su22::doubled_sl4_basis(tol.rank), tol.rank);
  InvolutionSpec s1(detail_su22::swap_i22_8(), true);
  InvolutionSpec s2(detail_su22::i22_8(), false);
  return Scenario::make(std::move(grp), std::move(s1), std::move(s2), tol);
}

/// SL(4,C) (doubled realization) acted on by SU(2,2) x SO(4,C), the latter
/// realized as the complex orthogonal group of the (2,2) symmetric form so
/// that it contains the complexification of SO(2,2) = SU(2,2)^{conj}.
/// On the 4x4 level sigma2 is X -> -I22 X^T I22, which in the doubled
/// embedding is conjugation by the same block swap as sigma1, holomorphic.
inline Scenario sl4c_su22_so4c(Tolerances tol = {}) {
  ReductiveGroupData grp;
  grp.n = 8;
  grp.name = "sl4c_su22_so4c";
  grp.algebra =
      RealSubspace::span_of(detail_su22::doubled_sl4_basis(tol.rank), tol.rank);
  InvolutionSpec s1(detail_su22::swap_i22_8(), true);
  InvolutionSpec s2(detail_su22::swap_i22_8(), false);
  return Scenario::make(std::move(grp), std::move(s1), std::move(s2), tol);
}

}  // namespace presets

inline Scenario make_preset(const std::string& name, Tolerances tol = {}) {
  if (name == "sl2c_sl2r_so2c") return presets::sl2c_sl2r_so2c(tol);
  if (name == "sl4c_su22_kc") return presets::sl4c_su22_kc(tol);
  if (name == "sl4c_su22_so4c") return presets::sl4c_su22_so4c(tol);
  throw CosetError("unknown preset: " + name);
}

}  // namespace coset
