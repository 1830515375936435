"""Acceptance criteria 1-12. Each test records a PASS/FAIL line printed at the end of the run."""

import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest
from conftest import ACCEPTANCE
from scipy.spatial.distance import cdist

import corpus
import reference as ref
from fracperim import MetricMeasureSpace, covers, inequalities
from fracperim.functionals import coarea_rhs, fractional_energy, fractional_perimeter, graph_perimeter
from fracperim.functionals import rho_sandwich_check, rho_tail
from fracperim.generators import bowtie, grid, snowflake


@contextmanager
def criterion(number, title):
    detail = {"text": ""}
    try:
        yield detail
    except BaseException as exc:
        ACCEPTANCE[number] = ("FAIL", f"{title}: {detail['text'] or exc}".strip())
        raise
    ACCEPTANCE[number] = ("PASS", f"{title}: {detail['text']}".strip())


def rel_close(a, b, rtol):
    return abs(a - b) <= rtol * max(abs(a), abs(b)) or a == b


def random_space(rng, n):
    geodesic = bool(rng.integers(2))
    D, w, edges = ref.random_metric(rng, n, geodesic)
    if geodesic:
        return MetricMeasureSpace(w, edges=edges), w
    return MetricMeasureSpace(w, matrix=D), w


def random_subset(rng, n, p=None):
    p = rng.random() if p is None else p
    return [i for i in range(n) if rng.random() < p]


def oracle_instances():
    """50 random spaces, 20 (E, Omega, theta) each, with oracle values for both kernels."""
    rng = np.random.default_rng(2024)
    for _ in range(50):
        n = int(rng.integers(2, 41))
        sp, w = random_space(rng, n)
        D = sp.dist.tolist()
        M = ref.ball_masses(D, w)
        for _ in range(20):
            omega = random_subset(rng, n, 0.8) or list(range(n))
            E = random_subset(rng, n)
            theta = float(rng.uniform(0.01, 0.99))
            u = np.round(rng.normal(size=n), 1)
            yield sp, D, w, M, E, omega, theta, u


def test_criterion_01_oracle_equivalence():
    with criterion(1, "oracle equivalence") as note:
        worst, count = 0.0, 0
        for sp, D, w, M, E, omega, theta, u in oracle_instances():
            pairs = [
                (fractional_perimeter(sp, E, omega, theta).value, ref.perimeter(D, w, E, omega, theta, M)),
                (fractional_energy(sp, u, omega, theta).value, ref.energy(D, w, u, omega, theta, False, M)),
                (
                    fractional_energy(sp, u, omega, theta, "symmetric").value,
                    ref.energy(D, w, u, omega, theta, True, M),
                ),
            ]
            for got, want in pairs:
                err = abs(got - want) / max(abs(want), 1e-300)
                worst = max(worst, err if want else abs(got))
                assert rel_close(got, want, 1e-12), (got, want)
            count += 1
        note["text"] = f"{count} instances, worst relative error {worst:.2e}"


def test_criterion_02_exact_small_cases():
    with criterion(2, "exact small cases") as note:
        two = grid(1, 2)
        for theta in (0.1, 0.5, 0.9):
            assert rel_close(fractional_perimeter(two, [0], None, theta).value, 1.0, 1e-12)
        path = MetricMeasureSpace([1.0, 1.0, 1.0], edges=[(0, 1, 1.0), (1, 2, 1.0)])
        value = fractional_perimeter(path, [0], None, 0.5).value
        assert rel_close(value, 1 + 2**-1.5, 1e-12)
        note["text"] = f"P_0.5({{0}}, 3-path) = {value!r}"


def test_criterion_03_coarea_identity():
    with criterion(3, "coarea identity") as note:
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(2, 31))
            sp, _ = random_space(rng, n)
            u = rng.integers(0, 5, n) * rng.uniform(0.1, 2.0)
            omega = random_subset(rng, n, 0.8) or list(range(n))
            theta = float(rng.uniform(0.01, 0.99))
            lhs = fractional_energy(sp, u, omega, theta, "symmetric").value
            rhs = coarea_rhs(sp, u, omega, theta).value
            assert rel_close(lhs, rhs, 1e-9), (lhs, rhs)
            if lhs:
                worst = max(worst, abs(lhs - rhs) / lhs)
        note["text"] = f"200 instances, worst relative gap {worst:.2e}"


def test_criterion_04_complement_symmetry():
    with criterion(4, "complement symmetry") as note:
        count = 0
        for sp, D, w, M, E, omega, theta, u in oracle_instances():
            comp = [i for i in omega if i not in set(E)]
            a = fractional_perimeter(sp, E, omega, theta).value
            b = fractional_perimeter(sp, comp, omega, theta).value
            assert rel_close(a, b, 1e-12), (a, b)
            count += 1
        for name in corpus.SPACE_NAMES:
            sp = corpus.space(name)
            for set_name in corpus.SET_NAMES:
                m = corpus.set_mask(sp, set_name)
                for theta in (0.3, 0.7):
                    a = fractional_perimeter(sp, m, None, theta).value
                    b = fractional_perimeter(sp, ~m, None, theta).value
                    assert rel_close(a, b, 1e-12)
                    count += 1
        note["text"] = f"{count} instances"


def test_criterion_05_bbm_trend(pinned):
    with criterion(5, "BBM scaling trend") as note:
        fix = pinned["bbm_trend"]
        sp = grid(1, 257)
        E = sp.coords[:, 0] < 0.5
        gp = graph_perimeter(sp, E)
        raw = [fractional_perimeter(sp, E, None, t).value / gp for t in fix["thetas"]]
        rescaled = [(1 - t) * p for t, p in zip(fix["thetas"], raw)]
        for got, want in zip(rescaled, fix["rescaled"]):
            assert rel_close(got, want, 1e-12)
        lo, hi = fix["bracket"]
        assert all(lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12) for v in rescaled)
        assert hi / lo <= 4.0
        top = [p for t, p in zip(fix["thetas"], raw) if t >= 0.7 - 1e-9]
        assert all(b > a for a, b in zip(top, top[1:]))
        note["text"] = f"bracket [{lo:.4f}, {hi:.4f}], ratio {hi / lo:.3f} <= 4; raw curve increasing on 0.70-0.95"


def test_criterion_06_poincare_sweep(pinned, poincare_sweeps):
    with criterion(6, "Poincare sweep boundedness") as note:
        fix = pinned["poincare_sweep"]
        scaled, plain = poincare_sweeps
        for got, want in zip(scaled.max_ratio, fix["max_ratio"]):
            assert rel_close(got, want, 1e-12)
        ratio = max(scaled.max_ratio) / min(scaled.max_ratio)
        assert ratio <= fix["bracket_ratio"] * (1 + 1e-12)
        assert all(m >= md for m, md in zip(scaled.max_ratio, scaled.median_ratio))
        i5, i9 = scaled.thetas.index(0.5), scaled.thetas.index(0.9)
        assert plain.max_ratio[i9] > plain.max_ratio[i5]
        note["text"] = (
            f"max/min {ratio:.2f} <= pinned {fix['bracket_ratio']:.2f}; "
            f"unscaled {plain.max_ratio[i9]:.3f} at 0.9 > {plain.max_ratio[i5]:.3f} at 0.5"
        )


def corpus_covers(sp, mask):
    p = corpus.cover_params(sp, mask)
    cands = [(int(x), 0.05 + 0.02 * (i % 3)) for i, x in enumerate(np.flatnonzero(mask))]
    yield covers.five_r_cover(sp, cands)
    yield covers.cz_decomposition(sp, p["B0"], p["core"], p["lam_cz"])
    yield covers.boundary_balls(sp, p["B0"], mask, p["lam_boundary"])
    yield covers.boxing_cover(sp, mask, 0.5)
    yield covers.local_boxing_cover(sp, p["B0"], p["core"], p["kappa"], 0.5)


def test_criterion_07_cover_certificates():
    with criterion(7, "cover certificates") as note:
        total, flagged = 0, 0
        for name in corpus.SPACE_NAMES:
            sp = corpus.space(name)
            for set_name in corpus.SET_NAMES:
                for cover in corpus_covers(sp, corpus.set_mask(sp, set_name)):
                    cert = covers.check_cover(sp, cover)
                    assert cert.ok, (name, set_name, cover.algorithm, cert.notes)
                    assert cover.certificate.ok
                    if cover.algorithm in ("cz", "boxing"):
                        assert cert.density_ok
                    flagged += bool(cert.floor_flags)
                    total += 1
        assert total == 75
        note["text"] = f"{total}/75 covers certified ({flagged} with discreteness-floor flags)"


def test_criterion_08_boxing_quotient(pinned):
    with criterion(8, "boxing quotient") as note:
        from pin_fixtures import THETAS, boxing_family

        fix = pinned["boxing"]
        C = fix["C"]
        implied_all = []
        for name, sp in (("grid1_257", grid(1, 257)), ("grid2_33", grid(2, 33))):
            per_set = fix["spaces"][name]["per_set"]
            implied = [0.0] * len(THETAS)
            for uname, U in boxing_family(sp).items():
                cover = covers.boxing_cover(sp, U)
                assert cover.certificate.ok
                for i, t in enumerate(THETAS):
                    _, q = covers.boxing_quotient(sp, cover, t)
                    assert rel_close(q, per_set[uname][i], 1e-12)
                    assert q <= C * (1 + 1e-12)
                    implied[i] = max(implied[i], q)
            spread = max(implied) / min(implied)
            assert spread <= 10.0
            implied_all.append(f"{name} spread {spread:.2f}")
        note["text"] = f"C = {C:.4f}; " + ", ".join(implied_all)


def test_criterion_09_kernel_admissibility():
    with criterion(9, "kernel admissibility") as note:
        spaces = [corpus.space(n) for n in corpus.SPACE_NAMES] + [snowflake(grid(1, 129), 0.5), bowtie(64)]
        pairs = 0
        worst_drop = 0.0
        for sp in spaces:
            for theta in (0.3, 0.6, 0.9, 0.99):
                rep = rho_sandwich_check(sp, theta)
                assert rep.violations == 0, (sp, theta, rep.witness)
                pairs += rep.pairs_checked
            tails = [rho_tail(sp, t, 0.25) for t in (0.5, 0.9, 0.95, 0.99)]
            assert tails[1] > tails[2] > tails[3]
            assert tails[3] < 0.2 * tails[0]
            worst_drop = max(worst_drop, tails[3] / tails[0])
        note["text"] = f"{pairs} pairs, 0 violations; tail(0.99)/tail(0.5) <= {worst_drop:.3f}"


def test_criterion_10_equivalence_gauges(pinned):
    with criterion(10, "equivalence gauges") as note:
        fix = pinned["gauges"]
        checked = 0
        for name in corpus.SPACE_NAMES:
            sp = corpus.space(name)
            g = inequalities.equivalence_gauge(sp, 0.5, 1.0)
            assert g.chain_violations == 0
            checked += g.chain_checked
            assert rel_close(g.quotient, fix[name]["quotient"], 1e-9)
            for q in (2.0, None):
                extra = inequalities.equivalence_gauge(sp, 0.7, q, indicators_only=True)
                assert extra.chain_violations == 0
                checked += extra.chain_checked
        assert 0.1 <= fix["grid1_129"]["quotient"] <= 10
        quotients = ", ".join(f"{n} {fix[n]['quotient']:.3f}" for n in corpus.SPACE_NAMES)
        note["text"] = f"{checked} chain instances, 0 violations; quotients {quotients}"


CONTROL_PARTS: dict[str, str] = {}


def _control_factors(name, pinned):
    fix = pinned["controls"]
    spaces = {"grid1_129": grid(1, 129), "snowflake": snowflake(grid(1, 129), 0.5), "bowtie64": bowtie(64)}
    base = inequalities.sweep(spaces["grid1_129"], "bbm_poincare", fix["thetas"]).max_ratio
    curve = inequalities.sweep(spaces[name], "bbm_poincare", fix["thetas"]).max_ratio
    for got, want in zip(curve, fix["curves"][name]):
        assert rel_close(got, want, 1e-12)
    return [a / b for a, b in zip(curve, base)], fix["threshold"]


def _record_controls():
    ok = all(v.startswith("PASS") for v in CONTROL_PARTS.values()) and len(CONTROL_PARTS) == 2
    text = "; ".join(f"{k} {v}" for k, v in sorted(CONTROL_PARTS.items()))
    ACCEPTANCE[11] = ("PASS" if ok else "FAIL", f"negative controls: {text}")


def test_criterion_11_negative_control_snowflake(pinned):
    factors, threshold = _control_factors("snowflake", pinned)
    passed = min(factors) >= threshold
    CONTROL_PARTS["snowflake"] = f"{'PASS' if passed else 'FAIL'} (factors {', '.join(f'{f:.2f}' for f in factors)})"
    _record_controls()
    assert passed


@pytest.mark.xfail(
    strict=True,
    reason="path-winged bowtie is isometric to an interval, so it supports the Poincare inequality",
)
def test_criterion_11_negative_control_bowtie(pinned):
    factors, threshold = _control_factors("bowtie64", pinned)
    passed = min(factors) >= threshold
    CONTROL_PARTS["bowtie"] = (
        f"{'PASS' if passed else 'FAIL'} (factors {', '.join(f'{f:.3f}' for f in factors)} vs threshold {threshold})"
    )
    _record_controls()
    assert passed


def test_criterion_12_performance_determinism():
    with criterion(12, "performance and determinism") as note:
        rng = np.random.default_rng(12)
        pts = rng.random((10_000, 2))
        D = cdist(pts, pts)
        sp = MetricMeasureSpace(rng.random(10_000) + 0.5, matrix=D)
        del D
        E = pts[:, 0] < 0.5
        start = time.perf_counter()
        full = fractional_perimeter(sp, E, None, 0.5).value
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0
        values = [fractional_perimeter(sp, E, None, 0.5, threads=t).value for t in (1, 4, os.cpu_count() or 1)]
        assert all(rel_close(v, full, 1e-12) for v in values)
        note["text"] = f"n=10000 in {elapsed:.2f} s on {os.cpu_count()} core(s); threads 1/4/max agree"
