"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

import filecmp
import json
import math
import os
import subprocess
import sys
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from scipy.sparse.csgraph import shortest_path

from dimdrop.core import derive_embedding_integers, validate_pair
from dimdrop.elements import generator_library, modulus_of_continuity, random_pl_element
from dimdrop.fraisse import compose_apx, extend_trivial, from_matrices
from dimdrop.hom import corrective_unitary, hom_from_pattern, perturb_pattern, synthesize_embedding, verify_morphism
from dimdrop.intertwine import approx_inner_demo, build_intertwining
from dimdrop.measure import Measure, pullback_trace, trace_value
from dimdrop.paths import unitary_path_in_algebra
from dimdrop.pattern import variation
from dimdrop.regularity import check_monotracial, check_simplicity, check_variation, identity_system
from oracles import brute_embedding_integers, coprime_pairs, matrix_trace_integral

EPSILONS = (Fraction(1), Fraction(1, 2), Fraction(1, 4))
SMALL_SOURCES = [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (1, 4), (4, 1), (2, 3), (3, 2), (1, 5), (1, 6)]


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def _coprime_above(bound, rng, span=20):
    """Coprime (p', q') with min(p', q') > bound (bound may be fractional)."""
    lo = math.floor(bound) + 1
    while True:
        pp = lo + int(rng.integers(0, span))
        qq = lo + int(rng.integers(0, span))
        if pp != qq and math.gcd(pp, qq) == 1:
            return pp, qq


def test_1_integer_bullets(report):
    rng = np.random.default_rng(1)
    pairs = coprime_pairs(20)
    start = time.perf_counter()
    violations = []
    for _ in range(1000):
        p, q = pairs[int(rng.integers(len(pairs)))]
        for eps in EPSILONS:
            pp, qq = _coprime_above(p * q * (1 / eps + 2), rng)
            ints = derive_embedding_integers(validate_pair(p, q), validate_pair(pp, qq), eps)
            k = ints.k
            r0, r1 = k - ints.n00 - ints.n01, k - ints.n10 - ints.n11
            ok = (
                ints.n00 + ints.n01 < k
                and ints.n10 + ints.n11 < k
                and r0 % qq == 0
                and r1 % pp == 0
                and Fraction(r0, qq) > 1 / eps
                and Fraction(r1, pp) > 1 / eps
            )
            if not ok:
                violations.append((p, q, pp, qq, str(eps)))
    elapsed = time.perf_counter() - start
    ok = not violations and elapsed < 10
    report(1, ok, f"3000 derivations, violations={len(violations)}, {elapsed:.2f}s (< 10s)")
    assert ok, violations[:5]


def test_2_worked_example(report):
    ints = derive_embedding_integers(validate_pair(2, 3), validate_pair(19, 23), 1)
    got = {k: getattr(ints, k) for k in ("a", "b", "k", "n00", "n01", "n10", "n11")}
    oracle = brute_embedding_integers(2, 3, 19, 23)
    want = {"a": 1, "b": 1, "k": 72, "n00": 15, "n01": 11, "n10": 6, "n11": 9}
    ok = got == oracle == want
    report(2, ok, f"(2,3)->(19,23): {got}")
    assert ok


def _admissible_triples(rng, count, max_size):
    out = []
    while len(out) < count:
        p, q = SMALL_SOURCES[int(rng.integers(len(SMALL_SOURCES)))]
        eps = EPSILONS[int(rng.integers(len(EPSILONS)))]
        bound = p * q * (1 / eps + 2)
        pp, qq = _coprime_above(bound, rng, span=12)
        if pp * qq <= max_size:
            out.append(((p, q), (pp, qq), eps))
    return out


def test_3_synthesized_embeddings(report):
    rng = np.random.default_rng(3)
    worst = {"defect": 0.0, "boundary": 0.0, "build": 0.0}
    failures = []
    for src, tgt, eps in _admissible_triples(rng, 20, 2000):
        t0 = time.perf_counter()
        h = synthesize_embedding(validate_pair(*src), validate_pair(*tgt), eps)
        build = time.perf_counter() - t0
        gens = generator_library(h.src, 2, np.random.default_rng([3, *src, *tgt]))
        rep = verify_morphism(h, gens, grid=101)
        v = variation(h.pattern)
        worst["defect"] = max(worst["defect"], rep.max_defect)
        worst["boundary"] = max(worst["boundary"], rep.boundary)
        worst["build"] = max(worst["build"], build)
        if not (rep.max_defect <= 1e-9 and rep.boundary <= 1e-9 and v < eps and build < 5):
            failures.append((src, tgt, str(eps), rep.max_defect, str(v), build))
    ok = not failures
    report(3, ok, f"20 triples, max defect={worst['defect']:.2e}, max boundary={worst['boundary']:.2e}, slowest build={worst['build']:.2f}s")
    assert ok, failures


def test_4_trace_preservation(report):
    # the trace-preserving variant has no remainder blocks, so pq must divide p'q'
    lam = Measure.lebesgue()
    rng = np.random.default_rng(4)
    worst = 0.0
    for src, tgt in (((2, 3), (19, 24)), ((1, 2), (7, 10))):
        h = synthesize_embedding(validate_pair(*src), validate_pair(*tgt), 1, lam, lam)
        pulled = pullback_trace(h, lam)
        for _ in range(20):
            f = random_pl_element(h.src, rng)
            tgt_side = matrix_trace_integral(h, f)
            worst = max(worst, abs(float(trace_value(lam, f)) - tgt_side), abs(float(trace_value(pulled, f)) - tgt_side))
    ok = worst <= 1e-9
    report(4, ok, f"(2,3)->(19,24) and (1,2)->(7,10), 20 generators each, max |tau(f) - tau'(h(f))|={worst:.2e} (<= 1e-9)")
    assert ok


def test_5_corrective_constant(report):
    rng = np.random.default_rng(5)
    defects, ratios, slow = [], [], 0.0
    triples = []
    while len(triples) < 20:
        p, q = SMALL_SOURCES[int(rng.integers(len(SMALL_SOURCES)))]
        pp, qq = _coprime_above(p * q * 3, rng, span=10)
        if pp * qq <= 500:
            triples.append(((p, q), (pp, qq), [0.5, 0.25, 0.125][int(rng.integers(3))]))
    for src, tgt, eps in triples:
        t0 = time.perf_counter()
        h1 = synthesize_embedding(validate_pair(*src), validate_pair(*tgt), 1)
        gens = generator_library(h1.src, 3, rng)
        delta = min(modulus_of_continuity(g, eps) for g in gens)
        pert = perturb_pattern(h1.pattern, 0.5 * delta, rng)
        z = unitary_path_in_algebra(tgt[0], tgt[1], rng, interior=1, scale=0.3)
        h2 = hom_from_pattern(h1.src, h1.tgt, pert, h1.a, h1.b).postcompose_inner(z)
        res = corrective_unitary(h1, h2, gens, eps, grid=101)
        slow = max(slow, time.perf_counter() - t0)
        defects.append(res.defect)
        ratios.append(res.defect / eps)
    worst, median = max(ratios), float(np.median(ratios))
    ok = worst < 5 and median < 2 and slow < 30
    report(5, ok, f"20 pairs, max defect/eps={worst:.3f} (< 5), median={median:.3f} (< 2), slowest={slow:.1f}s")
    assert ok


def _random_bikatetov(rng):
    """phi = cross distances + c inside a random finite metric on A u B (shortest paths)."""
    na, nb = int(rng.integers(1, 6)), int(rng.integers(1, 6))
    n = na + nb
    w = rng.uniform(0.1, 2.0, size=(n, n))
    w = np.triu(w, 1)
    w = w + w.T
    d = shortest_path(w, method="FW", directed=False)
    c = float(rng.uniform(0, 1)) if rng.random() < 0.8 else 0.0
    return from_matrices(d[:na, :na], d[na:, na:], d[:na, na:] + c)


def test_6_katetov_calculus(report):
    rng = np.random.default_rng(6)
    worst = {"inequalities": 0.0, "restriction": 0.0, "maximality": 0.0, "adjunction": 0.0, "monotone": 0.0}
    adjunction_cases = 0
    for _ in range(10_000):
        phi = _random_bikatetov(rng)
        na, nb = phi.values.shape
        worst["inequalities"] = max(worst["inequalities"], float(phi.violations().max()))
        A0 = sorted(rng.choice(na, size=int(rng.integers(1, na + 1)), replace=False).tolist())
        B0 = sorted(rng.choice(nb, size=int(rng.integers(1, nb + 1)), replace=False).tolist())
        rest_a = [i for i in range(na) if i not in A0]
        rest_b = [j for j in range(nb) if j not in B0]
        order_a, order_b = A0 + rest_a, B0 + rest_b
        psi = phi.restrict(A0, B0)
        ext = extend_trivial(psi, rest_a, rest_b)
        worst["inequalities"] = max(worst["inequalities"], float(ext.violations().max()))
        worst["restriction"] = max(worst["restriction"], float(np.abs(ext.values[: len(A0), : len(B0)] - psi.values).max()))
        # chi = phi restricts to psi, hence lies below the extension
        chi = phi.values[np.ix_(order_a, order_b)]
        worst["maximality"] = max(worst["maximality"], float(np.max(chi - ext.values)))
        # a bi-Katetov map below the extension restricts below psi
        lowered = from_matrices(ext.da, ext.db, np.maximum(ext.values - rng.uniform(0, 0.2), 0))
        if lowered.is_bikatetov():
            adjunction_cases += 1
            worst["adjunction"] = max(worst["adjunction"], float(np.max(lowered.values[: len(A0), : len(B0)] - psi.values)))
        # monotonicity of extension and composition
        bump = float(rng.uniform(0, 0.5))
        bigger = replace(psi, values=psi.values + bump)
        ext_big = extend_trivial(bigger, rest_a, rest_b)
        worst["monotone"] = max(worst["monotone"], float(np.max(ext.values - ext_big.values)))
        nc = int(rng.integers(1, 4))
        dc = shortest_path(np.triu(rng.uniform(0.1, 2, (nc, nc)), 1) + np.triu(rng.uniform(0.1, 2, (nc, nc)), 1).T, method="FW", directed=False)
        right = from_matrices(phi.db, dc, rng.uniform(0, 2, size=(nb, nc)))
        lo = compose_apx(phi, right).values
        hi = compose_apx(from_matrices(phi.da, phi.db, phi.values + bump), right).values
        worst["monotone"] = max(worst["monotone"], float(np.max(lo - hi)))
    ok = all(v <= 1e-12 for v in worst.values()) and adjunction_cases > 0
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    report(6, ok, f"10^4 instances ({adjunction_cases} adjunction cases), worst excess: {detail} (<= 1e-12)")
    assert ok


def test_7_regularity_checkers(report, power_system):
    start = time.perf_counter()
    var = check_variation(power_system, 0, None, 0.15)
    mono = check_monotracial(power_system, 0, 0.1, 21, None, 0.05)
    simp = check_simplicity(power_system, 0, 0.2, 21)
    ident = identity_system(validate_pair(2, 3), 5)
    id_verdicts = [
        check_variation(ident, 0, None, 0.15)["verdict"],
        check_monotracial(ident, 0, 0.1, 21, None, 0.05)["verdict"],
        check_simplicity(ident, 0, 0.2, 21)["verdict"],
    ]
    elapsed = time.perf_counter() - start
    ok = (
        var["final"] < 0.15
        and mono["final_max_ratio"] < 0.05
        and simp["verdict"] == "PASS"
        and id_verdicts == ["FAIL"] * 3
        and elapsed < 60
    )
    report(
        7,
        ok,
        f"final V={var['final']:.4f} (< 0.15), max ratio={mono['final_max_ratio']:.4f} (< 0.05), "
        f"simplicity={simp['verdict']}, identity={id_verdicts}, {elapsed:.1f}s (< 60s)",
    )
    assert ok


def test_8_intertwining(report, small_system):
    start = time.perf_counter()
    chain = build_intertwining(small_system, small_system, 3, [0.5, 0.25, 0.125], offset=1)
    alg = small_system.algebra(2)
    c = unitary_path_in_algebra(alg.p, alg.q, np.random.default_rng(8), interior=1, scale=0.5)
    rho = small_system.steps[1].postcompose_inner(c)
    gens = generator_library(small_system.algebra(1), 3, np.random.default_rng(9))
    eps = 0.25
    inner = approx_inner_demo(small_system, rho, gens, eps)
    elapsed = time.perf_counter() - start
    ok = chain.passed and len(chain.triangles) >= 3 and inner.defect < 2 * eps and elapsed < 120
    defects = ", ".join(f"{t.kind}{t.index}={t.defect:.2e}<{t.bound}" for t in chain.triangles)
    report(8, ok, f"triangles: {defects}; approx inner defect={inner.defect:.3e} (< {2 * eps}); {elapsed:.1f}s (< 120s)")
    assert ok


CLI_SUITE = [
    ["derive", "--src", "2,3", "--tgt", "19,23", "--eps", "1", "-o", "derive.json"],
    ["embed", "--src", "1,2", "--tgt", "7,9", "--eps", "1", "--verify", "--twist", "0.3", "--grid", "21", "-o", "embed.json"],
    ["gen-system", "--start", "2,3", "--stages", "5", "--schedule", "1,1/2,1/4,1/8", "--growth", "power", "-o", "power.json"],
    ["check", "--system", "power.json", "--which", "all", "-o", "check.json"],
    ["gen-system", "--start", "1,1", "--stages", "3", "--schedule", "1/2,1/2", "--growth", "minimal", "-o", "small.json"],
    ["intertwine", "--a", "small.json", "--b", "small.json", "--schedule", "0.5,0.25,0.125", "--gens", "2", "--grid", "21", "-o", "chain.json"],
    ["embed", "--src", "2,3", "--tgt", "8,9", "--eps", "1/2", "--trace-preserving", "--waive-bullets", "--twist", "0.5", "-o", "rho.json"],
    ["approx-inner", "--system", "small.json", "--rho", "rho.json", "--eps", "0.5", "--gens", "2", "--grid", "21", "-o", "inner.json"],
    ["dk", "--a", "gens.json", "--b", "gens.json", "--budget", "200", "--max-candidates", "4", "--grid", "21", "-o", "dk.json"],
]


def _run_suite(workdir):
    (workdir / "gens.json").write_text(json.dumps({"algebra": [2, 3], "library": {"count": 2}}))
    codes = []
    env = dict(os.environ)
    for argv in CLI_SUITE:
        res = subprocess.run([sys.executable, "-m", "dimdrop.cli", *argv, "--seed", "11"], cwd=workdir, env=env, capture_output=True, check=False)
        codes.append(res.returncode)
    return codes


def test_9_cli_determinism(report, tmp_path):
    first, second = tmp_path / "run1", tmp_path / "run2"
    first.mkdir()
    second.mkdir()
    codes1, codes2 = _run_suite(first), _run_suite(second)
    names = sorted(p.name for p in first.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
    artifacts = [n for n in names if n != "gens.json"]
    outputs = [argv[argv.index("-o") + 1] for argv in CLI_SUITE]
    present = all((first / o).exists() and (second / o).exists() for o in outputs)
    ok = codes1 == codes2 and all(c in (0, 2) for c in codes1) and present and not mismatch and not errors
    report(9, ok, f"{len(CLI_SUITE)} commands, exit codes={codes1}, {len(artifacts)} artifacts, mismatched={mismatch + errors}")
    assert ok
