// Temporary smoke check for the scenario caches; superseded by unit tests.
#include <cstdio>

#include "coset/gradient.hpp"
#include "coset/scenario.hpp"

using namespace coset;

int main() {
  for (const char* name :
       {"sl2c_sl2r_so2c", "sl4c_su22_kc", "sl4c_su22_so4c"}) {
    Scenario s = make_preset(name);
    auto rep = validate_scenario(s);
    std::printf("%s: dim g=%ld k=%ld p=%ld gs1=%ld gs2=%ld complex=%d\n",
                name, (long)s.algebra().dim(), (long)s.k.dim(),
                (long)s.p.dim(), (long)s.g_s1p.dim(), (long)s.g_s2p.dim(),
                (int)s.is_complex);
    for (const auto& c : rep.checks)
      if (!c.pass)
        std::printf("  FAIL %s residual %.3e\n", c.name.c_str(), c.residual);
    std::printf("  all_pass=%d\n", (int)rep.all_pass);
  }
  // Cartan factor round trip on sl2.
  Scenario s = make_preset("sl2c_sl2r_so2c");
  CMatrix x(2, 2);
  x << 2.0, 0.0, 0.0, 0.5;
  GroupPoint gp = cartan_factor(s, x);
  std::printf("cartan_factor diag: |k-I|=%.3e xi00=%.6f\n",
              frob_norm(gp.k - CMatrix::Identity(2, 2)),
              gp.xi(0, 0).real());
  GradientValue v = phi(s, gp);
  std::printf("phi norm at diag point: %.6f\n", v.norm);
  GroupPoint id = cartan_factor(s, CMatrix::Identity(2, 2));
  std::printf("phi norm at identity: %.3e, in_zero_fiber=%d\n",
              phi(s, id).norm, (int)in_zero_fiber(s, id, 1e-8));
  return 0;
}
