// Temporary smoke check for the cartan machinery on the SL(2) preset.
#include <cstdio>

#include "coset/cartan.hpp"

using namespace coset;

int main() {
  Scenario s = make_preset("sl2c_sl2r_so2c");
  FundamentalCartanData f = fundamental_cartan(s, 12345);
  std::printf("t0=%ld a0=%ld c0=%ld\n", (long)f.t0.dim(), (long)f.a0.dim(),
              (long)f.c0.dim());
  auto periods = torus_periods(f.t0);
  for (double p : periods) std::printf("period %.6f (pi=%.6f)\n", p, M_PI);

  ExtendedWeightTable tbl = extended_weights(s, f);
  std::printf("extended weights: %zu entries, unit-res %.2e\n",
              tbl.entries.size(), tbl.unit_modulus_residual);
  for (const auto& w : tbl.entries)
    std::printf("  part=%c lambda=%s a=(%.4f,%.4f) dim=%ld\n",
                w.in_k ? 'k' : 'p',
                w.lambda.size() ? std::to_string(w.lambda(0)).c_str() : "-",
                w.a.real(), w.a.imag(), (long)w.space.dim());

  // Intersection algebras at a generic torus point.
  CMatrix eta = 0.37 * f.t0.basis()[0];
  auto ia = intersection_algebras(s, f, tbl, eta);
  std::printf("generic eta: kk=%ld pp=%ld (dists %.2e %.2e)\n",
              (long)ia.kk.dim(), (long)ia.pp.dim(), ia.route_distance_kk,
              ia.route_distance_pp);
  // At the pi/4-type wall point t0-coord pi/4 (x = exp(i pi/4 H)).
  CMatrix eta_w = (M_PI / 4.0) * std::sqrt(2.0) * f.t0.basis()[0];
  // note: basis is unit-norm; iH has norm sqrt(2), so coord pi/4*sqrt2.
  auto ia_w = intersection_algebras(s, f, tbl, eta_w);
  std::printf("wall eta: kk=%ld pp=%ld\n", (long)ia_w.kk.dim(),
              (long)ia_w.pp.dim());

  // Torus reduction of a random unitary in SU(2).
  std::mt19937_64 rng(99);
  CMatrix u = matexp(random_element(s.k, rng) * 1.3);
  TorusReduction tr = reduce_to_torus(s, f, u, 4242);
  std::printf("reduce_to_torus residual %.2e restarts %d\n", tr.residual,
              tr.restarts);

  // Normalize a synthesized zero-fiber point.
  GroupPoint x0 = cartan_factor(s, matexp(eta));
  NormalizationResult nr = normalize_to_cartan(s, f, x0, 777);
  std::printf("normalize residual %.2e, class dims t=%ld a=%ld\n", nr.residual,
              (long)nr.cartan.t.dim(), (long)nr.cartan.a.dim());

  CartanClassification cls = classify_cartan_sets(s, f, tbl, 31337);
  std::printf("classes: %zu (lattice res %d)\n", cls.classes.size(),
              cls.lattice_resolution);
  for (size_t i = 0; i < cls.classes.size(); ++i)
    std::printf("  id=%d t=%ld a=%ld fp=%s\n", cls.classes[i].class_id,
                (long)cls.classes[i].t.dim(), (long)cls.classes[i].a.dim(),
                cls.fingerprints[i].to_string().c_str());
  for (const auto& w : cls.warnings) std::printf("  warn: %s\n", w.c_str());

  // Weyl group of the fundamental class.
  WeylGroupReport wr = weyl_group(s, f, cls.classes[0], 2024);
  std::printf("weyl order %ld complete=%d samples ok %ld/%ld\n", wr.order,
              (int)wr.complete, wr.samples_succeeded, wr.samples_used);
  for (const auto& e : wr.elements)
    std::printf("  elem linear=%.3f trans=%.4f\n",
                e.linear.size() ? e.linear(0, 0) : 0.0,
                e.translation.size() ? e.translation(0) : 0.0);
  return 0;
}
