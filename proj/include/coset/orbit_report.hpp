#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coset/cartan.hpp"
#include "coset/gradient.hpp"
#include "coset/symmetric_pair.hpp"

namespace coset {

/// Random group point: a compact factor times exp of a p-element.
inline GroupPoint random_group_point(const Scenario& s, std::mt19937_64& rng,
                                     double xi_scale = 1.2) {
  std::uniform_real_distribution<double> unif(0.3, 1.6);
  CMatrix k = matexp(unif(rng) * random_element(s.k, rng));
  CMatrix xi = xi_scale * unif(rng) * random_element(s.p, rng);
  return group_point(k, xi);
}

/// Once-per-scenario derived data for orbit classification.
struct ScenarioAnalysis {
  FundamentalCartanData fundamental;
  ExtendedWeightTable weights;
  Eigen::Index max_orbit_dim = 0;
  std::uint64_t seed = 0;
  std::optional<CartanClassification> classes;  // built on demand
};

/// Empirical maximal orbit dimension over random samples, cross-checked
/// against dim g - dim c0 for complex-type scenarios, where the slice
/// argument forces equality.
inline Eigen::Index max_orbit_dimension(const Scenario& s,
                                        const FundamentalCartanData& f,
                                        std::uint64_t seed,
                                        int samples = 100) {
  std::mt19937_64 rng(sub_seed(seed, 42));
  Eigen::Index best = 0;
  for (int i = 0; i < samples; ++i) {
    GroupPoint x = random_group_point(s, rng);
    IsotropyData iso = isotropy_and_slice(s, x);
    best = std::max(best, iso.orbit_dim);
  }
  if (s.is_complex) {
    Eigen::Index expected = s.algebra().dim() - f.c0.dim();
    if (best != expected)
      throw InternalInconsistency(
          "max_orbit_dimension: empirical " + std::to_string(best) +
          " != dim g - dim c0 = " + std::to_string(expected) +
          " for a complex-type scenario");
  }
  return best;
}

inline ScenarioAnalysis make_analysis(const Scenario& s, std::uint64_t seed) {
  ScenarioAnalysis a;
  a.seed = seed;
  a.fundamental = fundamental_cartan(s, seed);
  a.weights = extended_weights(s, a.fundamental);
  a.max_orbit_dim = max_orbit_dimension(s, a.fundamental, seed);
  return a;
}

inline const CartanClassification& ensure_classes(const Scenario& s,
                                                  ScenarioAnalysis& a) {
  if (!a.classes)
    a.classes =
        classify_cartan_sets(s, a.fundamental, a.weights, a.seed);
  return *a.classes;
}

enum class OrbitVerdict { Closed, NonClosed, Inconclusive };

inline const char* to_string(OrbitVerdict v) {
  switch (v) {
    case OrbitVerdict::Closed:
      return "closed";
    case OrbitVerdict::NonClosed:
      return "non-closed";
    default:
      return "inconclusive";
  }
}

/// The full classification verdict for one group point.
struct OrbitReport {
  GroupPoint point;
  OrbitVerdict verdict = OrbitVerdict::Inconclusive;
  bool closed = false;
  Eigen::Index orbit_dim = 0;
  bool regular = false;
  bool strongly_regular = false;
  Eigen::Index isotropy_dim = 0;
  bool isotropy_compact = false;
  bool proper_point = false;
  std::optional<int> cartan_class;
  std::optional<GroupPoint> closed_base;  // x0 with x = x0 exp(xi)
  std::optional<CMatrix> nil_witness;     // xi in the null cone at x0
  double factorization_residual = 0.0;
  std::map<std::string, double> diagnostics;
};

struct ClassifyParams {
  FlowParams flow;
  double closed_offset_tol = 1e-7;
  double nil_ratio_tol = 0.05;  // ||xi_s|| / ||xi_off|| for the budget path
  bool want_cartan_class = true;

  ClassifyParams() {
    flow.tol_converge = 1e-10;
    flow.max_iters = 25000;
  }
};

/// Project the Cartan factors of a near-zero-fiber point exactly onto the
/// zero fiber: keep k, replace xi by its projection onto
/// p^{-sigma2} /\ Ad(k^{-1}) p^{-sigma1}.
inline GroupPoint polish_to_zero_fiber(const Scenario& s,
                                       const GroupPoint& x) {
  RealSubspace pp = s.p_s2m.intersect(
      s.ad_subspace(x.k.inverse(), s.p_s1m), s.tol.rank);
  CMatrix xi = pp.dim() ? pp.project(x.xi)
                        : CMatrix::Zero(s.n(), s.n());
  return group_point(x.k, xi);
}

/// Classify one point: orbit dimension and regularity from the tangent
/// formula, closedness from the gradient flow plus the slice verdict at
/// the flow limit, the Cartan class of closed orbits, and the
/// x = x0 exp(xi) factorization with a null-cone witness otherwise.
inline OrbitReport classify_point(const Scenario& s, ScenarioAnalysis& a,
                                  const GroupPoint& x,
                                  const ClassifyParams& params,
                                  std::uint64_t seed) {
  OrbitReport rep;
  rep.point = x;

  IsotropyData iso = isotropy_and_slice(s, x);
  rep.orbit_dim = iso.orbit_dim;
  rep.isotropy_dim = iso.hx.dim();
  rep.regular = rep.orbit_dim == a.max_orbit_dim;
  if (iso.hx.dim()) {
    auto [hk, hp] = involution_split(
        iso.hx, [](const CMatrix& m) { return theta_alg(m); }, s.tol.rank);
    rep.isotropy_compact = hp.dim() == 0;
    rep.diagnostics["isotropy_p_dim"] = static_cast<double>(hp.dim());
  } else {
    rep.isotropy_compact = true;
  }

  FlowResult fl = flow_to_closed(s, x, params.flow);
  rep.diagnostics["flow_iterations"] = static_cast<double>(fl.trace.iterations);
  rep.diagnostics["flow_final_grad"] = fl.trace.final_grad_norm;
  rep.diagnostics["flow_invariant_drift"] = fl.trace.invariant_drift;
  rep.diagnostics["tol_converge"] = params.flow.tol_converge;
  rep.diagnostics["closed_offset_tol"] = params.closed_offset_tol;

  GroupPoint z = polish_to_zero_fiber(s, fl.x0);
  CMatrix w = z.value.inverse() * fl.x0.value;
  if ((w - CMatrix::Identity(s.n(), s.n())).norm() > 0.6) {
    rep.verdict = OrbitVerdict::Inconclusive;
    rep.diagnostics["polish_distance"] =
        (w - CMatrix::Identity(s.n(), s.n())).norm();
    return rep;
  }
  CMatrix xi_off = log_near_identity(w);
  double off_norm = frob_norm(xi_off);
  rep.diagnostics["slice_offset"] = off_norm;

  // Transport the factorization back to the original point:
  // x = g1^{-1} z g2 * exp(Ad(g2^{-1}) xi_off).
  auto record_witness = [&]() {
    CMatrix base_val = fl.g1.inverse() * z.value * fl.g2;
    CMatrix xi_back = fl.g2.inverse() * xi_off * fl.g2;
    rep.factorization_residual =
        frob_norm(x.value - base_val * matexp(xi_back));
    try {
      rep.closed_base = cartan_factor(s, base_val);
    } catch (const CosetError&) {
      rep.closed_base = std::nullopt;
    }
    rep.nil_witness = xi_back;
    rep.diagnostics["witness_norm"] = frob_norm(xi_back);
  };

  if (fl.trace.converged &&
      off_norm < params.closed_offset_tol * (1.0 + frob_norm(x.value))) {
    rep.closed = true;
    rep.verdict = OrbitVerdict::Closed;
    rep.closed_base = z;
  } else if (fl.trace.converged) {
    // Converged but with a visible offset: the limit sits off the original
    // orbit. Certify the offset as a null-cone element of the slice
    // representation at z (the offset is tiny here, so the relative Jordan
    // test is clean).
    SymmetricPairData slice = slice_pair_at(s, z);
    CMatrix xi_slice = slice.q.dim() ? slice.q.project(xi_off) : xi_off;
    rep.diagnostics["slice_q_residual"] =
        off_norm > 0 ? frob_norm(xi_off - xi_slice) / off_norm : 0.0;
    bool certified = false;
    try {
      certified = in_null_cone(slice, xi_slice);
    } catch (const IllConditioned&) {
      certified = !is_closed_orbit_flow(slice, xi_slice);
    }
    if (certified) {
      rep.closed = false;
      rep.verdict = OrbitVerdict::NonClosed;
      record_witness();
    } else {
      rep.verdict = OrbitVerdict::Inconclusive;
    }
  } else {
    // Budget exhausted. Closed orbits converge exponentially, while the
    // escape of a non-closed orbit decays only polynomially, so this is
    // the expected non-closed signature; certify it by the nilpotency
    // ratio of the slice offset at the polished point.
    SymmetricPairData slice = slice_pair_at(s, z);
    CMatrix xi_slice = slice.q.dim() ? slice.q.project(xi_off) : xi_off;
    double ratio = 1.0;
    bool have_ratio = false;
    if (off_norm > 0) {
      try {
        JordanDecomposition jd = jordan_chevalley(slice, xi_slice);
        ratio = frob_norm(jd.xi_s) / off_norm;
        have_ratio = true;
      } catch (const IllConditioned&) {
      }
    }
    rep.diagnostics["offset_ss_ratio"] = ratio;
    if (have_ratio && ratio < params.nil_ratio_tol &&
        fl.trace.invariant_drift < 1e-6) {
      rep.closed = false;
      rep.verdict = OrbitVerdict::NonClosed;
      record_witness();
    } else {
      rep.verdict = OrbitVerdict::Inconclusive;
    }
  }

  if (rep.closed && params.want_cartan_class) {
    try {
      const CartanClassification& cls = ensure_classes(s, a);
      NormalizationResult nr = normalize_to_cartan(
          s, a.fundamental, *rep.closed_base, sub_seed(seed, 11), 1e-7);
      rep.cartan_class =
          match_class(s, a.fundamental, cls, nr.cartan, sub_seed(seed, 12));
      rep.diagnostics["normalize_residual"] = nr.residual;
    } catch (const CosetError&) {
      rep.cartan_class = std::nullopt;
    }
  }

  rep.strongly_regular = rep.regular && rep.closed;
  rep.proper_point = rep.closed && rep.isotropy_compact;
  return rep;
}

/// Batch wrapper: per-point proper-region membership.
inline std::vector<OrbitReport> proper_region_probe(
    const Scenario& s, ScenarioAnalysis& a,
    const std::vector<GroupPoint>& xs, const ClassifyParams& params,
    std::uint64_t seed) {
  std::vector<OrbitReport> out;
  out.reserve(xs.size());
  for (size_t i = 0; i < xs.size(); ++i)
    out.push_back(classify_point(s, a, xs[i], params, sub_seed(seed, i)));
  return out;
}

}  // namespace coset
