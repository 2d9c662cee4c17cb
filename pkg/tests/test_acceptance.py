"""Acceptance criteria 1-9, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible even under pytest's
output capture) before asserting. Run ``pytest tests/test_acceptance.py -v``.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from genriem import builtin, cli, expr, gencurv
from genriem.chart import format_chart, linear_transform, parse_chart_file
from genriem.gencore import prolongation_check
from genriem.oracle import finite_diff_audit, full_assembly, identity_suite, kretschmann_from_assembly
from genriem.riemannian import eval_point_geometry
from genriem.sugra import nsns_residuals, string_rewrite_identity, vector_residuals

N_POINTS, SEED, BOX, TOL = 20, 42, (-0.4, 0.4), 1e-8


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def suites():
    out, elapsed = {}, 0.0
    for name in builtin.ACCEPTANCE:
        gd = builtin.load(name)[0].geometry
        rep = identity_suite(gd, N_POINTS, SEED, BOX, TOL, builtin.centre(name, gd.dim))
        assert not rep.failures, (name, rep.failures)
        out[name] = rep
        elapsed += rep.elapsed
    return out, elapsed


def worst(suites, key):
    reps, _ = suites
    return max(rep.residuals[key].abs for rep in reps.values())


def test_criterion_1_pure_type_theorem(suites, report):
    _, elapsed = suites
    r = worst(suites, "rm_pure")
    report(1, r < 1e-8 and elapsed < 30.0, f"pure-type closed form vs oracle max {r:.2e} (< 1e-8), "
                                            f"suite time {elapsed:.1f} s (< 30 s)")


def test_criterion_2_mixed_type_theorem(suites, report):
    r = worst(suites, "rm_mixed")
    report(2, r < 1e-8, f"mixed-type closed form vs oracle max {r:.2e} (< 1e-8)")


def test_criterion_3_corollaries_by_trace(suites, report):
    vals = {k: worst(suites, k) for k in ("full_ricci_pure", "ricci_mixed", "gen_scalar", "trace_E")}
    detail = ", ".join(f"{k} {v:.2e}" for k, v in vals.items())
    report(3, max(vals.values()) < 1e-8, f"traced blocks vs corollaries: {detail} (< 1e-8)")


def test_criterion_4_connection_axioms(suites, report):
    g4 = suites[0]["G4"].residuals
    axioms = {k: g4[k].abs for k in ("torsion_Dcan", "metricity_Dcan", "divergence_Dcan")}
    s_err = max(rep.residuals["S_tensor"].abs for rep in suites[0].values())
    ok = max(axioms.values()) < 1e-9 and s_err < 1e-12
    detail = ", ".join(f"{k} {v:.2e}" for k, v in axioms.items())
    report(4, ok, f"G4 {detail} (< 1e-9); D - D0 vs chi/(d-1) {s_err:.2e} (< 1e-12)")


def test_criterion_5_kretschmann(report):
    gd1 = builtin.load("G1")[0].geometry
    pg = eval_point_geometry(gd1, [np.pi / 4, 0.0])
    k_sphere = kretschmann_from_assembly(full_assembly(pg), pg.g)

    gd4 = builtin.load("G4")[0].geometry
    A = np.array([[1.0, 0.3, 0.0, 0.0], [0.0, 0.9, 0.2, 0.0], [0.1, 0.0, 1.1, 0.0], [0.0, 0.0, -0.4, 1.0]])
    shift = np.array([0.05, -0.02, 0.0, 0.1])
    moved = linear_transform(gd4, A, shift)
    rel = 0.0
    for y in np.random.default_rng(SEED).uniform(-0.3, 0.3, size=(5, 4)):
        p_old = eval_point_geometry(gd4, A @ y + shift)
        p_new = eval_point_geometry(moved, y)
        k_old = kretschmann_from_assembly(full_assembly(p_old), p_old.g)
        k_new = kretschmann_from_assembly(full_assembly(p_new), p_new.g)
        rel = max(rel, abs(k_new - k_old) / abs(k_old))
    ok = abs(k_sphere - 16.0) < 1e-7 and rel < 1e-9
    report(5, ok, f"unit sphere |Rm^D|^2 = {k_sphere:.12g} (16 +- 1e-7); "
                  f"G4 frame change relative deviation {rel:.2e} (< 1e-9)")


def test_criterion_6_translation_layer(suites, report):
    index = max(worst(suites, k) for k in ("index_gen_scalar", "index_trace_E", "index_ricci_mixed"))

    sugra_two_path = 0.0
    rewrite = 0.0
    for name, src in (("G2", "0.2*z"), ("G4", "0.3*x0*x1 - sin(x3)"), ("G5", "exp(x/3)*cos(y) + z^2")):
        gd = builtin.load(name)[0].geometry
        x = np.full(gd.dim, 0.15)
        pg = eval_point_geometry(gd, x)
        phi = expr.eval_jet2(expr.parse_expression(src, gd.symbols), gd.coords, x, gd.params)
        res = nsns_residuals(pg, phi)
        sugra_two_path = max(sugra_two_path, *(v for k, v in res.two_path.items() if k != "string_rewrite"))
        rewrite = max(rewrite, string_rewrite_identity(pg, phi))

    flat = eval_point_geometry(builtin.load("G0")[0].geometry, [0.1, 0.2, 0.3])
    vac = nsns_residuals(flat, expr.Jet2(0.0, np.zeros(3), np.zeros((3, 3))))
    vacuum_exact = (not vac.symmetric.any() and not vac.antisymmetric.any()
                    and vac.scalar == 0.0 and vac.trace_E == 0.0)

    g3 = vector_residuals(eval_point_geometry(builtin.load("G3")[0].geometry, [0.0, 0.0, 0.0]))
    sugra_two_path = max(sugra_two_path, *g3.two_path.values())
    compat = max(g3.compatibility.values())

    ok = (index < 1e-10 and sugra_two_path < 1e-10 and rewrite < 1e-10 and vacuum_exact
          and compat < 1e-12 and abs(g3.scalar + 1.045) < 1e-9)
    report(6, ok, f"index paths {index:.2e} and {sugra_two_path:.2e} (< 1e-10), string rewrite "
                  f"{rewrite:.2e} (< 1e-10), flat vacuum exact {vacuum_exact}, G3 compatibility "
                  f"{compat:.2e} (< 1e-12), G3 scalar {g3.scalar:.12g} (-1.045 +- 1e-9)")


def test_criterion_7_prolongation(report):
    bad = []
    for n in (2, 3, 4):
        for sig in ((n, 0), (n - 1, 1)):
            rep = prolongation_check(n, sig, tol=1e-10)
            errs = max(rep["chi_orthogonality"], rep["chi_trace_error"])
            if not (rep["passed"] and errs < 1e-10
                    and rep["dim_ker_cyclic"] == n * n * (n - 1) // 2 - (n * (n - 1) * (n - 2)) // 6):
                bad.append(f"n={n} sig={sig}")
    report(7, not bad, "prolongation counts, trace surjectivity, Gram nondegeneracy and chi^e "
                       f"orthogonality for n in 2..4, both signatures; failures: {bad or 'none'}")


def test_criterion_8_infrastructure(tmp_path, report):
    jet = 0.0
    roundtrip = True
    for name in builtin.BUILTIN:
        gd = builtin.load(name)[0].geometry
        point = [c + 0.1 * (i + 1) for i, c in enumerate(builtin.centre(name, gd.dim))]
        jet = max(jet, finite_diff_audit(gd, point)["max_rel"])
        roundtrip &= parse_chart_file(format_chart(gd)) == gd
        for node in list(gd.g.values()) + list(gd.H.values()) + list(gd.X.values()) + list(gd.xi.values()):
            roundtrip &= expr.parse_expression(expr.pretty(node), gd.symbols) == node

    paths = [tmp_path / f"r{k}.json" for k in range(2)]
    for p in paths:
        cli.main(["check", "G4", "--points", "3", "--json", str(p)])
        cli.main(["eval", "G5", "--at", "0.1,0.2,0.3", "--json", str(p.with_suffix(".eval"))])
    deterministic = (paths[0].read_bytes() == paths[1].read_bytes()
                     and paths[0].with_suffix(".eval").read_bytes() == paths[1].with_suffix(".eval").read_bytes())

    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "genriem", "selftest"], capture_output=True, text=True)
    selftest_time = time.perf_counter() - t0
    ok = jet < 1e-6 and roundtrip and deterministic and proc.returncode == 0 and selftest_time < 60.0
    report(8, ok, f"jet audit {jet:.2e} (< 1e-6), round trips exact {roundtrip}, byte-identical "
                  f"reports {deterministic}, selftest exit {proc.returncode} in {selftest_time:.1f} s (< 60 s)")


def test_criterion_9_mutation_canaries(report):
    worst_by_coeff = cli.mutation_canaries(builtin.ACCEPTANCE, N_POINTS, SEED, BOX, TOL)
    survivors = sorted(k for k, v in worst_by_coeff.items() if not v >= TOL)
    weakest = min(worst_by_coeff.items(), key=lambda kv: kv[1])
    assert gencurv.COEFFS == gencurv.DEFAULT_COEFFS
    report(9, not survivors, f"{len(worst_by_coeff)} coefficients flipped, each breaks criterion 1 or 2 "
                             f"(weakest {weakest[0]} -> {weakest[1]:.2e}); survivors: {survivors or 'none'}")
