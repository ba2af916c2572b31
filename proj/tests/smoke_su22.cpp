// Temporary smoke check for the two SU(2,2) presets.
#include <cstdio>

#include "coset/orbit_report.hpp"

using namespace coset;

static CMatrix e4(int i, int j) {
  CMatrix m = CMatrix::Zero(4, 4);
  m(i, j) = 1.0;
  return m;
}

int main() {
  {
    Scenario s = make_preset("sl4c_su22_kc");
    FundamentalCartanData f = fundamental_cartan(s, 99);
    std::printf("[kc] t0=%ld a0=%ld c0=%ld\n", (long)f.t0.dim(),
                (long)f.a0.dim(), (long)f.c0.dim());

    // Paper coordinates: i*t0 spanned by i(E14+E41), i(E23+E32).
    CMatrix b1 = presets::double_embed(complexd(0, 1) * (e4(0, 3) + e4(3, 0)));
    CMatrix b2 = presets::double_embed(complexd(0, 1) * (e4(1, 2) + e4(2, 1)));
    FundamentalCartanData fp = fundamental_cartan_from(s, {b1, b2}, {});
    std::printf("[kc] explicit t0=%ld c0=%ld\n", (long)fp.t0.dim(),
                (long)fp.c0.dim());

    // Distinct nonzero weight value-vectors on eta_{t,s}.
    SymmetricPairData dummy;  // restricted weights need a pair; use scenario
    // weight table via extended weights on the explicit frame instead:
    ExtendedWeightTable tbl = extended_weights(s, fp);
    std::printf("[kc] extended weights entries=%zu\n", tbl.entries.size());
    // Evaluate each nonzero lambda at eta(t=1,s=0) and (t=0,s=1).
    Eigen::VectorXd c10 = fp.t0.coords_of(b2);  // t=1, s=0
    Eigen::VectorXd c01 = fp.t0.coords_of(b1);  // t=0, s=1
    std::set<std::pair<double, double>> vals;
    for (const auto& w : tbl.entries) {
      if (w.lambda.norm() < 1e-8) continue;
      double vt = w.lambda.dot(c10), vs = w.lambda.dot(c01);
      vals.insert({std::round(vt * 1e6) / 1e6, std::round(vs * 1e6) / 1e6});
    }
    std::printf("[kc] distinct nonzero weight vectors (t,s)-values:\n");
    for (auto [a, b] : vals) std::printf("   (%.4f, %.4f)\n", a, b);

    // u1 boundary point.
    CMatrix eta1 = presets::double_embed(
        complexd(0, M_PI / 4) * (e4(0, 3) + e4(3, 0)));
    CMatrix u1 = matexp(eta1);
    // p /\ i Ad(u1^{-1}) k.
    RealSubspace iAdk = s.ad_subspace(u1.inverse(), s.k)
                            .map([](const CMatrix& x) {
                              return CMatrix(complexd(0, 1) * x);
                            }, 1e-9);
    RealSubspace inter = s.p.intersect(iAdk, 1e-9);
    std::printf("[kc] dim p /\\ i Ad(u1^-1) k = %ld\n", (long)inter.dim());
    GroupPoint xu1 = cartan_factor(s, u1);
    IsotropyData iso1 = isotropy_and_slice(s, xu1);
    std::printf("[kc] at u1: hx=%ld qx=%ld orbit_dim=%ld\n",
                (long)iso1.hx.dim(), (long)iso1.qx.dim(),
                (long)iso1.orbit_dim);
    NormalizationResult nr1 = normalize_to_cartan(s, fp, xu1, 31415);
    std::printf("[kc] u1 class dims: t=%ld a=%ld resid=%.2e\n",
                (long)nr1.cartan.t.dim(), (long)nr1.cartan.a.dim(),
                nr1.residual);

    CMatrix eta2 = presets::double_embed(
        complexd(0, M_PI / 4) *
        (e4(0, 3) + e4(3, 0) + e4(1, 2) + e4(2, 1)));
    CMatrix u2 = matexp(eta2);
    RealSubspace iAdk2 = s.ad_subspace(u2.inverse(), s.k)
                             .map([](const CMatrix& x) {
                               return CMatrix(complexd(0, 1) * x);
                             }, 1e-9);
    std::printf("[kc] dim p /\\ i Ad(u2^-1) k = %ld\n",
                (long)s.p.intersect(iAdk2, 1e-9).dim());
    GroupPoint xu2 = cartan_factor(s, u2);
    NormalizationResult nr2 = normalize_to_cartan(s, fp, xu2, 2718);
    std::printf("[kc] u2 class dims: t=%ld a=%ld resid=%.2e\n",
                (long)nr2.cartan.t.dim(), (long)nr2.cartan.a.dim(),
                nr2.residual);

    // Generic isotropy dimension.
    std::mt19937_64 rng(5);
    GroupPoint xr = random_group_point(s, rng);
    IsotropyData isor = isotropy_and_slice(s, xr);
    std::printf("[kc] generic hx=%ld orbit_dim=%ld\n", (long)isor.hx.dim(),
                (long)isor.orbit_dim);
  }

  {
    Scenario s = make_preset("sl4c_su22_so4c");
    FundamentalCartanData f = fundamental_cartan(s, 7);
    std::printf("[so4c] t0=%ld a0=%ld c0=%ld\n", (long)f.t0.dim(),
                (long)f.a0.dim(), (long)f.c0.dim());
    CMatrix t1 = presets::double_embed(e4(0, 3) - e4(3, 0));
    CMatrix t2 = presets::double_embed(e4(1, 2) - e4(2, 1));
    CMatrix a1 = presets::double_embed(
        CMatrix(Eigen::Vector4cd(1, -1, -1, 1).asDiagonal()));
    FundamentalCartanData fp = fundamental_cartan_from(s, {t1, t2}, {a1});
    std::printf("[so4c] explicit t0=%ld a0=%ld c0=%ld\n", (long)fp.t0.dim(),
                (long)fp.a0.dim(), (long)fp.c0.dim());
    Eigen::Index maxdim = max_orbit_dimension(s, f, 11);
    std::printf("[so4c] max orbit dim=%ld (expect 27)\n", (long)maxdim);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 3; ++i) {
      GroupPoint xr = random_group_point(s, rng);
      IsotropyData isor = isotropy_and_slice(s, xr);
      std::printf("[so4c] sample hx=%ld orbit=%ld\n", (long)isor.hx.dim(),
                  (long)isor.orbit_dim);
    }
  }
  return 0;
}
