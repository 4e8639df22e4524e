import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfcorrect import f2algebra as f2
from selfcorrect.csscode import (CodeSpec, InvalidCodeError, PauliOperator, catalog_build,
                                 code_from_json, code_to_json, cubic_code_polynomials,
                                 direct_sum, fractal_polynomials, logical_basis, make_css,
                                 planar_code, polynomial_code, redundancy_analysis,
                                 repetition_code, steane_code, symplectic_commute, toric2d,
                                 toric3d, weld_many, weld_x)
from selfcorrect.f2algebra import F2Poly3


def rows(*bits):
    return np.array([[int(c) for c in b] for b in bits], dtype=np.uint8)


def all_commute(code):
    return not f2.matmul(code.hx, code.hz.T).any()


class TestMakeCss:
    def test_chain(self):
        c = make_css(np.zeros((0, 3), np.uint8), rows("110", "011"))
        assert c.k == 1

    def test_even_overlap(self):
        assert make_css(rows("11"), rows("11")).k == 0

    def test_anticommuting_pair_named(self):
        with pytest.raises(InvalidCodeError, match="X-generator 0 anticommutes with Z-generator 0"):
            make_css(rows("1"), rows("1"))

    def test_column_mismatch(self):
        with pytest.raises(InvalidCodeError):
            make_css(rows("11"), rows("111"))


class TestSymplectic:
    def test_examples(self):
        n = 2
        assert not symplectic_commute(PauliOperator.from_support(n, xs=[0]), PauliOperator.from_support(n, zs=[0]))
        assert symplectic_commute(PauliOperator.from_support(n, xs=[0, 1]), PauliOperator.from_support(n, zs=[0, 1]))
        assert symplectic_commute(PauliOperator.identity(n), PauliOperator.from_support(n, xs=[1], zs=[0]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            symplectic_commute(PauliOperator.identity(2), PauliOperator.identity(3))

    def test_label(self):
        assert PauliOperator.from_support(3, xs=[0, 2], zs=[2]).label() == "XIY"


class TestCatalog:
    def test_toric2d_small(self):
        c = catalog_build(CodeSpec("toric2d", 2))
        assert (c.n, c.k) == (8, 2)

    @pytest.mark.parametrize("L", [2, 3, 4, 5])
    def test_toric2d_counts(self, L):
        c = toric2d(L)
        assert c.n == 2 * L * L and c.k == 2 and all_commute(c)
        assert set(c.hx.sum(axis=1)) == {4} and set(c.hz.sum(axis=1)) == {4}

    @pytest.mark.parametrize("L", [2, 3])
    def test_toric3d(self, L):
        c = toric3d(L)
        assert c.n == 3 * L ** 3 and c.k == 3 and all_commute(c)
        assert set(c.hx.sum(axis=1)) == {6} and set(c.hz.sum(axis=1)) == {4}

    def test_cubic_code_commutes(self):
        a, b = cubic_code_polynomials(2)
        c = catalog_build(CodeSpec("fractal", 2, a, b))
        assert c.n == 16 and all_commute(c)

    @pytest.mark.parametrize("L,k", [(2, 6), (4, 14), (8, 30)])
    def test_cubic_code_logical_count(self, L, k):
        # rank oracle values; these are 4L - 2 for L a power of two
        a, b = cubic_code_polynomials(L)
        assert catalog_build(CodeSpec("fractal", L, a, b)).k == k

    @pytest.mark.parametrize("L", [2, 4, 8])
    def test_fractal_code_logical_count(self, L):
        f = F2Poly3.from_univariate([1, 1, 1], L)
        g = F2Poly3.from_univariate([1, 1, 0, 1], L)
        a, b = fractal_polynomials(f, g)
        code = catalog_build(CodeSpec("fractal", L, a, b))
        assert code.k == 2 * L

    @pytest.mark.parametrize("L", [2, 4, 8])
    def test_fractal_code_with_nilpotent_f(self, L):
        # (1+x)^L = 0 when L is a power of two, which removes every logical qubit
        f = F2Poly3.from_univariate([1, 1], L)
        g = F2Poly3.from_univariate([1, 1, 1], L)
        assert catalog_build(CodeSpec("fractal", L, *fractal_polynomials(f, g))).k == 0

    def test_fractal_requires_power_of_two(self):
        a, b = cubic_code_polynomials(6)
        with pytest.raises(ValueError):
            catalog_build(CodeSpec("fractal", 6, a, b))

    def test_fractal_period_mismatch(self):
        a, _ = cubic_code_polynomials(4)
        _, b = cubic_code_polynomials(2)
        with pytest.raises(ValueError):
            CodeSpec("fractal", 4, a, b)

    def test_unsupported(self):
        with pytest.raises(ValueError):
            catalog_build(CodeSpec("hyperbolic", 4))

    def test_explicit(self):
        c = catalog_build(CodeSpec("explicit", 0, hx=((1, 1),), hz=((1, 1),)))
        assert c.n == 2 and c.k == 0

    def test_site_major_layout(self):
        L = 4
        c = polynomial_code(F2Poly3.from_terms([(0, 0, 0)], L), F2Poly3.from_terms([(1, 0, 0)], L))
        # Z(alpha, beta) at site 0: sublattice 0 at site 0, sublattice 1 at site x
        assert np.flatnonzero(c.hz[0]).tolist() == [0, 2 * 1 + 1]

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from([2, 4, 8]), st.data())
    def test_random_polynomials_commute(self, L, data):
        e = st.tuples(st.integers(0, L - 1), st.integers(0, L - 1), st.integers(0, L - 1))
        a = F2Poly3.from_terms(data.draw(st.lists(e, max_size=6)), L)
        b = F2Poly3.from_terms(data.draw(st.lists(e, max_size=6)), L)
        code = polynomial_code(a, b)
        assert all_commute(code)


def check_logicals(code):
    zs, xs = logical_basis(code)
    assert len(zs) == len(xs) == code.k
    if not zs:
        return zs, xs
    Z = np.array([p.z for p in zs])
    X = np.array([p.x for p in xs])
    assert not f2.matmul(code.hx, Z.T).any()
    assert not f2.matmul(code.hz, X.T).any()
    for p in Z:
        assert not f2.in_row_space(p, code.hz)
    for p in X:
        assert not f2.in_row_space(p, code.hx)
    assert np.array_equal(f2.matmul(Z, X.T), np.eye(code.k, dtype=np.uint8))
    return zs, xs


class TestLogicals:
    def test_toric2d(self):
        zs, xs = check_logicals(toric2d(2))
        assert len(zs) == 2

    def test_repetition(self):
        code = repetition_code(3)
        zs, xs = check_logicals(code)
        assert zs[0].weight == 1
        assert xs[0].label() == "XXX"

    def test_no_logicals(self):
        assert logical_basis(make_css(rows("11"), rows("11"))) == ([], [])

    @pytest.mark.parametrize("code", [steane_code(), toric3d(2), planar_code(3, 3),
                                      polynomial_code(*cubic_code_polynomials(2))],
                             ids=["steane", "toric3d", "planar", "cubic"])
    def test_catalog_codes(self, code):
        check_logicals(code)


def random_css(rng, n, nx, nz):
    hx = rng.integers(0, 2, (nx, n), dtype=np.uint8)
    comm = f2.kernel_basis(hx) if nx else np.eye(n, dtype=np.uint8)
    if comm.shape[0] == 0:
        return make_css(hx, np.zeros((0, n), np.uint8), n=n)
    coeff = rng.integers(0, 2, (nz, comm.shape[0]), dtype=np.uint8)
    return make_css(hx, f2.matmul(coeff, comm), n=n)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_codes_logical_contract(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    code = random_css(rng, n, int(rng.integers(0, n)), int(rng.integers(0, n)))
    check_logicals(code)


class TestRedundancy:
    def test_toric2d(self):
        r = redundancy_analysis(toric2d(3))
        assert (r.m_x, r.m_z) == (1, 1)
        assert (r.min_weight_x, r.min_weight_z) == (9, 9)
        assert not r.approximate_x

    @pytest.mark.parametrize("L", [3, 4, 5])
    def test_toric_is_two_zero_free(self, L):
        r = redundancy_analysis(toric2d(L))
        assert r.m_x == r.m_z == 1
        assert r.min_weight_x == r.min_weight_z == L * L

    def test_independent(self):
        r = redundancy_analysis(steane_code())
        assert (r.m_x, r.m_z) == (0, 0)
        assert r.min_weight_x is None and r.min_weight_z is None

    def test_exhaustive_matches_brute_force(self):
        code = toric3d(2)
        dep = f2.kernel_basis(code.hz.T)
        brute = min(int(f2.matmul(np.array(c, np.uint8), dep).sum())
                    for c in itertools.product([0, 1], repeat=dep.shape[0]) if any(c))
        r = redundancy_analysis(code)
        assert r.min_weight_z == brute and r.m_z == dep.shape[0]

    def test_cap_flags_approximation(self):
        code = toric3d(2)
        r = redundancy_analysis(code, weight_search_limit=2, seed=1)
        assert r.m_z > 2 and r.approximate_z
        exact = redundancy_analysis(code)
        assert not exact.approximate_z and r.min_weight_z >= exact.min_weight_z


class TestWeld:
    def test_empty_pairing_is_direct_sum(self):
        a, b = toric2d(2), steane_code()
        w = weld_x(a, b, [])
        assert w.n == a.n + b.n and w.k == a.k + b.k
        assert direct_sum(a, b).k == a.k + b.k

    def test_two_planar_patches(self):
        a = planar_code(2, 2)
        top = list(range(a.n - 2, a.n))
        w = weld_x(a, a, list(zip(top, top)))
        assert all_commute(w)
        assert w.n == 2 * a.n - 2
        assert w.k == w.n - f2.rank(w.hx) - f2.rank(w.hz) == 2
        # every rewritten input Z-generator is present
        assert w.n_z == 2 * a.n_z

    def test_literal_rule_absorbs_logicals(self):
        a = planar_code(2, 2)
        top = list(range(a.n - 2, a.n))
        assert weld_x(a, a, list(zip(top, top)), literal=True).k == 0

    def test_protected_logicals_respected(self):
        a = planar_code(2, 2)
        top = list(range(a.n - 2, a.n))
        base = weld_x(a, a, list(zip(top, top)), literal=True)
        zs, _ = logical_basis(weld_x(a, a, list(zip(top, top))))
        prot = weld_x(a, a, list(zip(top, top)), protected=zs, literal=True)
        assert all_commute(prot)
        for z in zs:
            assert not f2.matmul(prot.hx, z.z).any()
        assert prot.k >= base.k

    def test_pairing_errors(self):
        a = planar_code(2, 2)
        with pytest.raises(ValueError):
            weld_x(a, a, [(0, 99)])
        with pytest.raises(ValueError):
            weld_x(a, a, [(0, 1), (0, 2)])

    def test_three_way_condensation(self):
        """Seam X-stabilizers only change by a triple product between seam sites."""
        b = planar_code(3, 2)
        seam = list(range(b.n - 3, b.n))
        w = weld_many([b, b, b], [[(0, q), (1, q), (2, q)] for q in seam])
        assert all_commute(w)
        # express each welded X-stabilizer in the rewritten original X-generators
        from selfcorrect.csscode import welded_qubit_map
        mp = welded_qubit_map([b, b, b], [[(0, q), (1, q), (2, q)] for q in seam])
        gens = np.zeros((3 * b.n_x, w.n), np.uint8)
        for c in range(3):
            for i in range(b.n_x):
                for q in np.flatnonzero(b.hx[i]):
                    gens[c * b.n_x + i, mp[c * b.n + q]] ^= 1
        # top-row vertices carry the dangling seam edges
        top_vertices = [i for i in range(b.n_x) if b.hx[i, seam].any()]
        assert len(top_vertices) == 3
        for row in w.hx:
            coeff = f2.solve_linear(gens.T, row)
            assert coeff is not None
            pat = np.array([[coeff[c * b.n_x + v] for c in range(3)] for v in top_vertices])
            for x in range(len(top_vertices) - 1):
                step = pat[x] ^ pat[x + 1]
                assert step.tolist() in ([0, 0, 0], [1, 1, 1])
        # the triple product itself is a stabilizer, single and paired charges are not
        for v in top_vertices:
            triple = gens[v] ^ gens[b.n_x + v] ^ gens[2 * b.n_x + v]
            assert f2.in_row_space(triple, w.hx)
            assert not f2.in_row_space(gens[v], w.hx)
            assert not f2.in_row_space(gens[v] ^ gens[b.n_x + v], w.hx)


class TestSerialization:
    @pytest.mark.parametrize("code", [toric2d(3), steane_code(), repetition_code(4, periodic=True)],
                             ids=["toric", "steane", "ring"])
    def test_roundtrip(self, code):
        back = code_from_json(code_to_json(code))
        assert back.n == code.n and back.k == code.k
        assert np.array_equal(back.hx, code.hx) and np.array_equal(back.hz, code.hz)
        if code.geometry is not None:
            assert np.array_equal(back.geometry.coords, code.geometry.coords)
            assert back.geometry.period == code.geometry.period

    def test_spec_roundtrip(self):
        a, b = cubic_code_polynomials(4)
        spec = CodeSpec("fractal", 4, a, b)
        assert CodeSpec.from_json(spec.to_json()) == spec
