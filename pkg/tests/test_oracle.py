from pathlib import Path

import numpy as np
import pytest

from specpoly.oracle import (CORPUS_KINDS, OracleConfig, brute_force_roots, compare_solution_sets,
                             corpus_counts, random_instance, read_corpus, write_corpus)
from specpoly.pipeline import SpecularChain, validate_path
from specpoly.poly import BivariatePolynomial
from specpoly.polynomialize import ChainType

DATA = Path(__file__).resolve().parent / "data"


class _Pair:
    def __init__(self, a, b):
        self.a, self.b = a, b


def test_brute_force_roots_circle_and_line():
    # u^2 + v^2 = 1/2 and u = v meet at (1/2, 1/2) in the domain
    a = BivariatePolynomial.from_monomials({(2, 0): 1.0, (0, 2): 1.0, (0, 0): -0.5})
    b = BivariatePolynomial.from_monomials({(1, 0): 1.0, (0, 1): -1.0})
    roots = brute_force_roots(_Pair(a, b), detail=True)
    assert len(roots) == 1
    r = roots[0]
    assert (r.u, r.v) == pytest.approx((0.5, 0.5), abs=1e-12) and not r.tangent


def test_brute_force_flags_tangent_roots():
    # the parabola v = (u - 0.3)^2 touches the line v = 0
    a = BivariatePolynomial.from_monomials({(2, 0): 1.0, (1, 0): -0.6, (0, 0): 0.09, (0, 1): -1.0})
    b = BivariatePolynomial.from_monomials({(0, 1): 1.0})
    roots = brute_force_roots(_Pair(a, b), detail=True)
    assert len(roots) == 1 and roots[0].u == pytest.approx(0.3, abs=1e-6)
    assert roots[0].tangent


def test_compare_solution_sets():
    found = [(0.1, 0.2), (0.5, 0.5), (0.5, 0.5 + 1e-9)]
    oracle = [(0.1, 0.2 + 2e-6), (0.9, 0.05)]
    m = compare_solution_sets(found, oracle, 1e-5)
    assert (m.matched, m.n_found, m.n_oracle) == (1, 2, 2)
    assert m.recall == 0.5 and m.precision == 0.5 and m.worst == pytest.approx(2e-6)
    m2 = compare_solution_sets(found, oracle, 1e-5, exclude=[(0.9, 0.05)])
    assert m2.recall == 1.0
    with pytest.raises(ValueError):
        compare_solution_sets(found, oracle, 0.0)
    with pytest.raises(ValueError):
        OracleConfig(grid_n=4)


@pytest.mark.parametrize("kind", CORPUS_KINDS)
def test_random_instances_plant_admissible_chains(kind):
    for seed in range(5):
        seps, tris = random_instance(kind, np.random.default_rng(seed))
        assert len(tris) == ChainType.parse(kind).k
        if kind == "T":
            assert tris[0].material == "dielectric"


@pytest.mark.parametrize("kind", CORPUS_KINDS)
def test_frozen_corpus_reproduces(kind):
    frozen = read_corpus(DATA / f"corpus_{kind}.txt")
    assert len(frozen) == 50
    assert all(n >= 1 for _, n, _ in frozen)  # every instance carries its planted chain
    assert corpus_counts(kind, range(10)) == frozen[:10]


def test_corpus_roundtrip(tmp_path):
    write_corpus(tmp_path / "c.txt", "R", [(0, 1, 0), (7, 2, 1)])
    assert read_corpus(tmp_path / "c.txt") == [(0, 1, 0), (7, 2, 1)]


def test_validate_path_rejects_wrong_point(scene_of):
    s = scene_of("mirror.yaml")
    tri = s.triangles[0]
    good = SpecularChain((0,), ChainType.parse("R"), ((0.5, 1 / 3),), np.array([[0.5, 0.0, 0.0]]), (tri,),
                         s.separators.x0, s.separators.x_end)
    assert validate_path(good).admissible
    bad = SpecularChain((0,), ChainType.parse("R"), ((0.4, 1 / 3),), np.array([[0.2, 0.0, 0.0]]), (tri,),
                        s.separators.x0, s.separators.x_end)
    assert not validate_path(bad).constraint_ok
