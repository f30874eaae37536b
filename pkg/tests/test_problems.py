import numpy as np
import pytest

from zodim.problems import (ConvexQuarticProblem, NonconvexTestProblem,
                            ProblemConfigError, ProblemMeta, QuadraticProblem,
                            RidgeSeparableProblem, SpectrumSpec, SquaredLink,
                            load_spectrum_csv, make_quadratic,
                            make_ridge_separable, optimum,
                            reference_derivatives)


def fd_gradient(problem, x, h=1e-5):
    d = x.size
    g = np.zeros(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        g[i] = (problem.evaluate(x + e) - problem.evaluate(x - e)) / (2 * h)
    return g


def test_flat_spectrum_identity():
    p = make_quadratic(SpectrumSpec.flat(1.0), 3)
    assert np.array_equal(p.hessian_spectrum(), np.ones(3))
    x = np.array([1.0, 2.0, 2.0])
    assert p.evaluate(x) == 0.5 * 9.0


def test_powerlaw_spectrum_values():
    eigs = SpectrumSpec.powerlaw(1.0, 2.0).realize(3)
    assert np.allclose(eigs, [1.0, 0.25, 1.0 / 9.0])


def test_powerlaw_floor_trace_regression():
    # direct-summation value for d=256, C=1, beta=3, floor 0.01
    p = make_quadratic(SpectrumSpec.powerlaw_floor(1.0, 3.0, 0.01), 256)
    assert abs(p.tr_A - 3.762049303509178) < 1e-12
    assert abs(p.mu - (0.01 + 256.0 ** -3)) < 1e-15


def test_spectrum_must_be_nonincreasing():
    with pytest.raises(ProblemConfigError):
        SpectrumSpec.explicit([1.0, 2.0]).realize(2)
    with pytest.raises(ProblemConfigError):
        SpectrumSpec.explicit([1.0, -0.5]).realize(2)


def test_explicit_length_mismatch():
    with pytest.raises(ProblemConfigError):
        SpectrumSpec.explicit([1.0, 0.5]).realize(3)


def test_csv_spectrum_roundtrip(tmp_path):
    path = tmp_path / "spec.csv"
    path.write_text("# top eigenvalue\n4.0\n\n1.0  # floor\n")
    eigs = load_spectrum_csv(str(path))
    assert np.array_equal(eigs, [4.0, 1.0])
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\n2.0\n")
    with pytest.raises(ProblemConfigError):
        load_spectrum_csv(str(bad))


def test_evaluate_hand_values():
    p = QuadraticProblem([1.0, 1.0])
    assert p.evaluate(np.array([3.0, 4.0])) == 12.5
    q = QuadraticProblem([2.0, 1.0], b=np.array([1.0, 0.0]))
    assert q.evaluate(np.array([1.0, 1.0])) == 2.5


def test_ridge_separable_hand_value():
    p = RidgeSeparableProblem(np.array([[1.0, 0.0], [0.0, 2.0]]), SquaredLink())
    assert p.evaluate(np.array([1.0, 1.0])) == 1.25
    assert p.R == 2.0
    assert p.mean_sq_norm == 2.5


def test_reference_derivatives_quadratic():
    p = QuadraticProblem([2.0, 1.0], b=np.array([1.0, 0.0]))
    g, eigs = reference_derivatives(p, np.array([1.0, 1.0]))
    assert np.array_equal(g, [3.0, 1.0])
    assert np.array_equal(eigs, [2.0, 1.0])
    g2, eigs2 = reference_derivatives(p, np.array([-4.0, 0.3]))
    assert np.array_equal(eigs2, eigs)


def test_nonconvex_saddle():
    p = NonconvexTestProblem([1.0, 2.0], [1.0, 3.0], domain_radius=2.0)
    g, H = reference_derivatives(p, np.zeros(2))
    assert np.array_equal(g, np.zeros(2))
    assert abs(np.linalg.eigvalsh(H).min() + 3.0) < 1e-12


def test_optimum_hand_values():
    p = QuadraticProblem([1.0, 1.0])
    x_star, f_star = optimum(p)
    assert np.array_equal(x_star, np.zeros(2)) and f_star == 0.0
    q = QuadraticProblem([2.0, 1.0], b=np.array([1.0, 0.0]))
    x_star, f_star = optimum(q)
    assert np.allclose(x_star, [-0.5, 0.0])
    assert abs(f_star + 0.25) < 1e-15
    assert np.linalg.norm(q.gradient(x_star)) <= 1e-12


def test_optimum_rotated_local_perturbation():
    p = make_quadratic(SpectrumSpec.powerlaw(1.0, 2.0), 4, seed=5, rotate=True,
                       b_mode="random_unit")
    x_star, f_star = p.optimum()
    for i in range(4):
        e = np.zeros(4)
        e[i] = 1e-3
        assert f_star <= p.evaluate(x_star + e)
        assert f_star <= p.evaluate(x_star - e)


def test_optimum_requires_positive_spectrum():
    with pytest.raises(ProblemConfigError):
        QuadraticProblem([1.0, 0.0]).optimum()


def test_fd_gradient_matches_reference():
    rng = np.random.Generator(np.random.Philox(key=np.uint64(42)))
    fixtures = [
        make_quadratic(SpectrumSpec.powerlaw(1.0, 2.0), 6, seed=1, rotate=True,
                       b_mode="random_unit"),
        make_ridge_separable(6, 12, seed=2, link="logistic"),
        NonconvexTestProblem(np.ones(4) * 1.5, np.ones(4), domain_radius=2.0,
                             reflectors=None),
        ConvexQuarticProblem(5),
    ]
    for p in fixtures:
        x = 0.3 * rng.standard_normal(p.d)
        g_ref = p.gradient(x)
        g_fd = fd_gradient(p, x)
        denom = max(1.0, np.linalg.norm(g_ref))
        assert np.linalg.norm(g_fd - g_ref) / denom < 1e-4


def test_rotation_preserves_spectrum_constants():
    spec = SpectrumSpec.powerlaw_floor(1.0, 3.0, 0.01)
    plain = make_quadratic(spec, 32, seed=0, rotate=False)
    rot = make_quadratic(spec, 32, seed=0, rotate=True)
    assert plain.tr_A == rot.tr_A
    assert plain.L == rot.L and plain.mu == rot.mu
    assert np.array_equal(plain.hessian_spectrum(), rot.hessian_spectrum())


def test_dense_cross_check_small_d():
    p = make_quadratic(SpectrumSpec.powerlaw(2.0, 1.5), 5, seed=9, rotate=True,
                       b_mode="random_unit")
    A = p.hessian()
    assert np.allclose(A, A.T)
    assert np.allclose(np.sort(np.linalg.eigvalsh(A))[::-1],
                       p.hessian_spectrum())
    rng = np.random.Generator(np.random.Philox(key=np.uint64(3)))
    for _ in range(5):
        x = rng.standard_normal(5)
        dense = 0.5 * x @ A @ x + p.b @ x
        assert abs(p.evaluate(x) - dense) < 1e-10
        assert np.allclose(p.gradient(x), A @ x + p.b)


def test_gap_is_stable_near_optimum():
    p = make_quadratic(SpectrumSpec.powerlaw_floor(1.0, 3.0, 1e-4), 64,
                       seed=0, rotate=True, b_mode="random_unit")
    x_star, _ = p.optimum()
    g = p.gap(x_star + 1e-9)
    assert 0.0 <= g < 1e-12


def test_nonconvex_minima_and_constants():
    p = NonconvexTestProblem([1.0, 1.0], [1.0, 1.0], domain_radius=2.0)
    assert p.H == 12.0
    assert p.f_star == -0.5
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            m = np.array([sx, sy])
            assert abs(p.evaluate(m) - p.f_star) < 1e-14
            assert np.linalg.norm(p.gradient(m)) < 1e-14


def test_quartic_fixture_constants():
    p = ConvexQuarticProblem(4, domain_radius=2.0)
    assert p.L == 13.0 and p.mu == 1.0 and p.H == 12.0
    assert p.evaluate(np.zeros(4)) == 0.0
    x = np.array([1.0, 0.0, 0.0, 0.0])
    assert p.evaluate(x) == 0.75


def test_problem_meta_validation():
    with pytest.raises(ProblemConfigError):
        ProblemMeta(mu=2.0, L=1.0)
    with pytest.raises(ProblemConfigError):
        ProblemMeta(Delta=-1.0)
    meta = ProblemMeta(mu=0.5, L=1.0, H=0.0, Delta=1.0, D=2.0)
    assert meta.mu == 0.5
