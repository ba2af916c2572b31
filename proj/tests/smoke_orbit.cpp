// Temporary smoke check for orbit classification on the SL(2) preset.
#include <cstdio>

#include "coset/orbit_report.hpp"

using namespace coset;

int main() {
  Scenario s = make_preset("sl2c_sl2r_so2c");
  ScenarioAnalysis a = make_analysis(s, 2025);
  std::printf("max orbit dim %ld (dim g %ld, c0 %ld)\n",
              (long)a.max_orbit_dim, (long)s.algebra().dim(),
              (long)a.fundamental.c0.dim());

  CMatrix h(2, 2);
  h << 1, 0, 0, -1;
  ClassifyParams params;
  for (double t : {0.0, M_PI / 8, M_PI / 4, 3 * M_PI / 8, M_PI / 2}) {
    GroupPoint x = cartan_factor(s, matexp(complexd(0, t) * h));
    OrbitReport r = classify_point(s, a, x, params, 555);
    std::printf(
        "t=%5.3f verdict=%s regular=%d sr=%d iso_dim=%ld iso_cpt=%d proper=%d "
        "class=%d\n",
        t, to_string(r.verdict), (int)r.regular, (int)r.strongly_regular,
        (long)r.isotropy_dim, (int)r.isotropy_compact, (int)r.proper_point,
        r.cartan_class ? *r.cartan_class : -1);
  }

  // Synthesize a non-closed point: x_{pi/4} * exp(nilpotent slice element).
  GroupPoint xq = cartan_factor(s, matexp(complexd(0, M_PI / 4) * h));
  SymmetricPairData slice = slice_pair_at(s, xq);
  std::printf("slice at pi/4: dim g^tau=%ld h=%ld q=%ld\n",
              (long)slice.g.dim(), (long)slice.h.dim(), (long)slice.q.dim());
  // Nilpotent direction: eigenvector of ad(generator of h) in q.
  CMatrix gen = slice.h.basis()[0];
  auto [m, resid] = slice.q.operator_matrix(
      [&](const CMatrix& v) { return bracket(gen, v); });
  Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  std::printf("slice rep eigenvalues of ad(h-gen):");
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    std::printf(" (%.3f,%.3f)", es.eigenvalues()(i).real(),
                es.eigenvalues()(i).imag());
  std::printf("\n");
  Eigen::VectorXd v0 = es.eigenvectors().col(0).real();
  v0.normalize();
  CMatrix nil = slice.q.from_coords_of(v0);
  std::printf("nil in null cone: %d\n", (int)in_null_cone(slice, nil));
  GroupPoint xn = cartan_factor(s, xq.value * matexp(0.4 * nil));
  OrbitReport rn = classify_point(s, a, xn, params, 556);
  std::printf("nonclosed point: verdict=%s fact_resid=%.2e witness=%.3f\n",
              to_string(rn.verdict), rn.factorization_residual,
              rn.nil_witness ? frob_norm(*rn.nil_witness) : -1.0);
  std::printf("flow iters=%.0f slice_offset=%.2e\n",
              rn.diagnostics["flow_iterations"],
              rn.diagnostics["slice_offset"]);
  return 0;
}
