import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardy_nehari import grid as rg
from hardy_nehari.closed_forms import bubble_grid, bubble_profile, hardy_limit, sharp_constants
from hardy_nehari.errors import DomainError, GridMismatchError
from hardy_nehari.functional import (
    CouplingMatrix,
    TripleState,
    coupling_positivity_check,
    energy,
    gershgorin_pd,
    gradient_residual,
    interaction_matrix,
    nehari_membership,
    nehari_residuals,
    simplex_minimum,
    system_for,
)
from hardy_nehari.nehari import project_linear_N4

from .conftest import compact_bump, talenti_constant


def bubble_state(N, beta, mus=(1.0, 1.0, 1.0), amps=(1.0, 1.0, 1.0), K=2048):
    lam = hardy_limit(N) / 2
    lams = (lam, lam, lam)
    g = bubble_grid(N, lams, K)
    U = np.stack([amps[i] * bubble_profile(g, lam, mus[i]).values for i in range(3)])
    return TripleState.from_arrays(g, U, lams, beta)


class TestCouplingMatrix:
    def test_from_offdiag(self):
        b = CouplingMatrix.from_offdiag(0.1, -0.2, 0.3)
        assert b.offdiag == (0.1, -0.2, 0.3)
        assert b.max_offdiag() == 0.3
        np.testing.assert_array_equal(np.diag(b.beta), 1.0)

    def test_validation(self):
        with pytest.raises(DomainError):
            CouplingMatrix(np.array([[1, 0.1, 0], [0.2, 1, 0], [0, 0, 1]]))
        with pytest.raises(DomainError):
            CouplingMatrix(np.array([[2, 0, 0], [0, 1, 0], [0, 0, 1]]))


class TestState:
    def test_grid_mismatch(self):
        g1 = rg.make_log_grid(4, 1e-2, 1e2, 64)
        g2 = rg.make_log_grid(4, 1e-2, 1e2, 32)
        with pytest.raises(GridMismatchError):
            TripleState((g1.zeros(), g1.zeros(), g2.zeros()), (0.5, 0.5, 0.5), CouplingMatrix.uniform(0))

    def test_lambda_range(self):
        g = rg.make_log_grid(4, 1e-2, 1e2, 64)
        with pytest.raises(DomainError):
            TripleState((g.zeros(),) * 3, (0.5, 0.5, 1.0), CouplingMatrix.uniform(0))


class TestEnergy:
    def test_zero_state(self):
        st0 = bubble_state(4, CouplingMatrix.uniform(0.1), amps=(0, 0, 0), K=256)
        assert energy(st0) == 0.0
        np.testing.assert_array_equal(gradient_residual(st0), 0.0)

    @pytest.mark.parametrize("N", [3, 4, 5])
    def test_single_bubble_gives_A(self, N):
        st1 = bubble_state(N, CouplingMatrix.uniform(0.0), amps=(1, 0, 0), K=4096)
        A = sharp_constants(st1.lambdas, N, talenti_constant(N)).A[0]
        assert energy(st1) == pytest.approx(A, rel=5e-3)

    def test_on_manifold_identity(self):
        st0 = bubble_state(4, CouplingMatrix.uniform(0.1), mus=(1, 2, 4))
        on = st0.scaled(project_linear_N4(st0).t)
        mem = nehari_membership(on)
        assert mem.on_M
        sys = system_for(on)
        assert energy(on) == pytest.approx(sys.norms(on.values).sum() / 4, rel=1e-9)

    @pytest.mark.parametrize("N", [3, 4, 5])
    def test_dilation_invariance(self, N):
        st0 = bubble_state(N, CouplingMatrix.from_offdiag(0.2, 0.1, 0.3), mus=(0.8, 1.0, 1.3), amps=(1, 0.7, 0.4), K=4096)
        st1 = bubble_state(N, CouplingMatrix.from_offdiag(0.2, 0.1, 0.3), mus=(1.6, 2.0, 2.6), amps=(1, 0.7, 0.4), K=4096)
        assert energy(st1) == pytest.approx(energy(st0), rel=1e-4)

    def test_even_in_each_component(self):
        st0 = bubble_state(4, CouplingMatrix.from_offdiag(0.3, -0.2, 0.1), mus=(1, 2, 3), K=512)
        flipped = st0.scaled((1, -1, -1))
        assert energy(flipped) == energy(st0)


class TestResiduals:
    def test_bubble_residual_refines(self):
        # -Delta z is not square integrable at the origin, so compare against the operator image
        res, rel = [], []
        for K in (1024, 2048, 4096):
            st1 = bubble_state(4, CouplingMatrix.uniform(0.0), amps=(1, 0, 0), K=K)
            sys = system_for(st1)
            Au = sys.apply_operator(st1.values)[0] / (sys.omega * st1.grid.weights)
            scale = np.sqrt(sys.omega * (Au * Au) @ st1.grid.weights)
            res.append(gradient_residual(st1)[0])
            rel.append(res[-1] / scale)
        assert res[1] < res[0] and res[2] < res[1]
        assert rel[0] / rel[1] > 1.8 and rel[1] / rel[2] > 1.8
        assert rel[2] < 5e-3

    def test_random_state_nonzero_residual(self):
        g = rg.make_log_grid(4, 1e-3, 1e3, 512)
        U = np.stack([compact_bump(g, c, 2.0) for c in (-1, 0, 1)])
        st1 = TripleState.from_arrays(g, U, (0.5, 0.5, 0.5), CouplingMatrix.uniform(0.1))
        assert np.all(gradient_residual(st1) > 0)

    def test_nehari_residual_of_normalized_bubble(self):
        st1 = bubble_state(4, CouplingMatrix.uniform(0.0), amps=(1, 0, 0), K=4096)
        norms = system_for(st1).norms(st1.values)
        r = nehari_residuals(st1)
        assert abs(r[0]) < 1e-4 * norms[0]
        assert r[1] == 0 and r[2] == 0
        mem = nehari_membership(st1)
        assert mem.nonzero == (True, False, False)
        assert not mem.on_M

    def test_after_linear_projection(self):
        st0 = bubble_state(4, CouplingMatrix.uniform(0.05), mus=(0.5, 1, 2), amps=(2, 1, 0.5))
        on = st0.scaled(project_linear_N4(st0).t)
        norms = system_for(on).norms(on.values)
        assert np.all(np.abs(nehari_residuals(on)) < 1e-10 * norms)


class TestInteractionMatrix:
    def test_disjoint_is_diagonal(self):
        g = rg.make_log_grid(4, 1e-3, 1e3, 512)
        U = np.stack([compact_bump(g, c, 0.9) for c in (-3, 0, 3)])
        m = interaction_matrix(TripleState.from_arrays(g, U, (0.5,) * 3, CouplingMatrix.uniform(0.4))).m
        np.testing.assert_array_equal(m - np.diag(np.diag(m)), 0)

    def test_equal_profiles(self):
        g = rg.make_log_grid(4, 1e-3, 1e3, 512)
        w = compact_bump(g, 0, 2)
        st1 = TripleState.from_arrays(g, np.stack([w, w, w]), (0.5,) * 3, CouplingMatrix.uniform(-0.3))
        m = interaction_matrix(st1).m
        mass = rg.lp_norm_power(rg.RadialProfile(g, w), 4.0)
        np.testing.assert_allclose(np.diag(m), mass, rtol=1e-14)
        off = m[~np.eye(3, dtype=bool)]
        np.testing.assert_allclose(off, -0.3 * mass, rtol=1e-14)
        assert np.all(off < 0)


class TestGershgorin:
    def test_identity(self):
        v = gershgorin_pd(np.eye(3))
        assert v.dominant and v.lambda_min == pytest.approx(1.0)

    def test_two_diag(self):
        m = np.full((3, 3), 0.5) + 1.5 * np.eye(3)
        v = gershgorin_pd(m)
        assert v.dominant and v.margin == pytest.approx(1.0)
        assert v.lambda_min == pytest.approx(1.5)  # eigenvalues 1.5, 1.5, 3.0

    def test_violating_row(self):
        m = np.array([[1.0, 0.8, 0.5], [0.8, 3.0, 0.0], [0.5, 0.0, 3.0]])
        assert not gershgorin_pd(m)

    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(0.01, 3), min_size=3, max_size=3))
    @settings(max_examples=100, deadline=None)
    def test_dominant_implies_pd(self, off, slack):
        m = np.zeros((3, 3))
        m[0, 1] = m[1, 0] = off[0]
        m[0, 2] = m[2, 0] = off[1]
        m[1, 2] = m[2, 1] = off[2]
        rows = np.abs(m).sum(axis=1)
        m += np.diag(rows + np.asarray(slack))
        v = gershgorin_pd(m)
        assert v.dominant
        assert np.linalg.eigvalsh(m).min() >= v.margin * (1 - 1e-12)


class TestCondition:
    def test_identity(self):
        r = coupling_positivity_check(CouplingMatrix.uniform(0.0), trials=8)
        assert r.verdict == "proved-sufficient" and r.positive_definite
        assert r.counterexample_value is None

    def test_all_minus_one(self):
        r = coupling_positivity_check(CouplingMatrix.uniform(-1.0), trials=8)
        assert r.verdict == "counterexample"
        # three equal profiles give (3 - 6) times a positive integral
        assert r.counterexample_trial == 0 and r.counterexample_value < 0

    @given(st.lists(st.floats(0, 5), min_size=3, max_size=3))
    @settings(max_examples=20, deadline=None)
    def test_nonnegative_is_sufficient(self, off):
        r = coupling_positivity_check(CouplingMatrix.from_offdiag(*off), trials=4)
        assert r.verdict == "proved-sufficient" and r.nonnegative_coupling

    def test_copositive_indefinite(self):
        # not PSD and mixed sign, but strictly copositive: v^T B v > 0 on the simplex
        b = CouplingMatrix.from_offdiag(3.0, -0.9, 3.0)
        r = coupling_positivity_check(b, trials=16)
        assert not r.positive_definite and not r.nonnegative_coupling
        assert r.simplex_minimum > 0
        assert r.verdict == "proved-sufficient"

    def test_hidden_counterexample(self):
        # equal profiles give 3 + 2(2 - 2.4) > 0, but weights (1/4, 1/4, 1/2) give -0.1
        b = CouplingMatrix.from_offdiag(2.0, -1.2, -1.2)
        r = coupling_positivity_check(b, trials=4)
        assert r.simplex_minimum < 0
        assert r.verdict == "counterexample" and r.counterexample_trial == 1

    def test_simplex_minimum_against_dense_search(self, rng):
        for _ in range(20):
            off = rng.uniform(-1.5, 1.5, 3)
            b = CouplingMatrix.from_offdiag(*off).beta
            val, arg = simplex_minimum(np.asarray(b))
            x = rng.dirichlet(np.ones(3), size=20000)
            dense = np.einsum("ki,ij,kj->k", x, b, x).min()
            assert val <= dense + 1e-12
            assert val >= dense - 5e-3
            assert arg.sum() == pytest.approx(1.0) and np.all(arg >= 0)

    def test_trials_must_be_positive(self):
        with pytest.raises(DomainError):
            coupling_positivity_check(CouplingMatrix.uniform(0), trials=0)
