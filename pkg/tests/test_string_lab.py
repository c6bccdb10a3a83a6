import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from pertlab.string_lab import (
    ChainConfig,
    ChainState,
    NumericalInstabilityError,
    Profile,
    ZERO,
    bump_profile,
    chain_energy,
    continuum_frequency,
    continuum_solution,
    convergence_study,
    coupling_matrix,
    dalembert_solution,
    decompose_state,
    evolve_modal,
    evolve_verlet,
    fit_order,
    mode_frequency,
    normal_modes,
    odd_periodic_extension,
    parse_profile,
    project_initial_data,
    sine_profile,
    triangle_profile,
)

# configuration and profiles ------------------------------------------------------------------


def test_config_validation():
    for bad in (dict(m=1), dict(m=2.5), dict(a=0), dict(c=-1), dict(omega0=-0.1), dict(boundary="free")):
        with pytest.raises(ValueError):
            ChainConfig(**bad)
    cfg = ChainConfig(a=2.0, m=8)
    assert cfg.delta == 0.25 and cfg.n_sites == 9
    assert ChainConfig(m=8, boundary="periodic").n_sites == 8


def test_parse_profile_catalog():
    assert parse_profile("zero") is ZERO
    x = np.linspace(0, 1, 7)
    assert np.allclose(parse_profile("sine:2")(x), np.sin(2 * np.pi * x))
    assert parse_profile("triangle:0.25")(np.array([0.25]))[0] == 1.0
    assert parse_profile("bump:0.5,0.3")(np.array([0.5]))[0] == 1.0
    with pytest.raises(ValueError, match="available"):
        parse_profile("gauss:1")
    with pytest.raises(ValueError):
        parse_profile("triangle:1.5")


def test_bump_is_c2():
    # the second difference across a support edge vanishes linearly in h (third derivative jumps)
    f = bump_profile(0.5, 0.3)
    for x0 in (0.2, 0.8):
        d2 = []
        for h in (1e-3, 1e-4):
            v = f(np.array([x0 - h, x0, x0 + h]))
            d2.append(abs(v[0] - 2 * v[1] + v[2]) / h**2)
        assert d2[1] < 0.15 * d2[0]


# spectrum -------------------------------------------------------------------------------------


def test_spectrum_examples():
    cfg = ChainConfig(m=2, c=1.5)
    (w, vec), = normal_modes(cfg)
    assert math.isclose(w, cfg.c * math.sqrt(2) / cfg.delta, rel_tol=1e-14)
    cfg = ChainConfig(m=3)
    w2 = np.array([w for w, _ in normal_modes(cfg)]) ** 2
    assert np.allclose(w2 / (cfg.c / cfg.delta) ** 2, [1, 3], rtol=1e-14)


@pytest.mark.parametrize("m", [8, 32, 128])
def test_frequencies_match_tridiagonal_eigensolve(m):
    cfg = ChainConfig(a=1.3, m=m, c=0.7)
    s = (cfg.c / cfg.delta) ** 2
    vals = eigh_tridiagonal(np.full(m - 1, 2 * s), np.full(m - 2, -s), eigvals_only=True, lapack_driver="stebz")
    _, vecs = eigh_tridiagonal(np.full(m - 1, 2 * s), np.full(m - 2, -s))
    modes = normal_modes(cfg)
    w = np.array([w for w, _ in modes])
    assert np.all(np.diff(w) > 0)
    assert np.max(np.abs(w / np.sqrt(vals) - 1)) < 1e-12
    basis = np.column_stack([v for _, v in modes])
    overlap = np.abs(np.sum(basis * vecs, axis=0))
    assert np.allclose(overlap, 1, atol=1e-10)


@pytest.mark.parametrize("m", [8, 128, 1024])
def test_closed_form_frequencies_high_precision(m):
    cfg = ChainConfig(a=1.0, m=m, c=1.0)
    w = np.array([w for w, _ in normal_modes(cfg)])
    with mpmath.workdps(40):
        ref = np.array([float(2 * m * mpmath.sin(mpmath.pi * h / (2 * m))) for h in range(1, m)])
    assert np.max(np.abs(w / ref - 1)) < 1e-15


@pytest.mark.parametrize("boundary", ["dirichlet", "periodic"])
@pytest.mark.parametrize("omega0", [0.0, 2.5])
def test_modes_diagonalise_coupling(boundary, omega0):
    cfg = ChainConfig(m=12, omega0=omega0, boundary=boundary)
    K = coupling_matrix(cfg)
    for w, v in normal_modes(cfg):
        assert np.allclose(K @ v, w**2 * v, atol=1e-10 * w**2 + 1e-12)
    ref = np.sort(np.linalg.eigvalsh(K))
    got = np.sort([w**2 for w, _ in normal_modes(cfg)])
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_dirichlet_eigenvector_closed_form():
    cfg = ChainConfig(a=2.0, m=10)
    xi = cfg.sites()[1:-1]
    for h, (_, v) in enumerate(normal_modes(cfg), start=1):
        assert np.allclose(v, math.sqrt(2 / cfg.m) * np.sin(np.pi * h * xi / cfg.a), atol=1e-14)


@pytest.mark.parametrize("a", [1.0, 2.0])
def test_frequency_convergence_rate(a):
    h = 3
    meshes = [16, 32, 64, 128, 256]
    deltas, errs = [], []
    for m in meshes:
        cfg = ChainConfig(a=a, m=m)
        err = abs(float(mode_frequency(cfg, h)) - float(continuum_frequency(cfg, h)))
        # leading term of the expansion: c pi^3 h^3 delta^2 / (24 a^3)
        assert err <= cfg.c * math.pi**3 * h**3 * cfg.delta**2 / (24 * a**3) * 1.1
        deltas.append(cfg.delta)
        errs.append(err)
    assert abs(fit_order(deltas, errs) - 2.0) < 0.1


# modal solution ---------------------------------------------------------------------------------


def test_projection_examples():
    m = 16
    cfg = ChainConfig(m=m)
    d = project_initial_data(sine_profile(1), ZERO, cfg)
    assert math.isclose(d.A[0], math.sqrt(m / 2), rel_tol=1e-13)
    assert np.max(np.abs(d.A[1:])) < 1e-13 and np.all(d.velocity == 0)
    rest = project_initial_data(ZERO, ZERO, cfg)
    assert np.all(rest.A == 0) and np.all(rest.velocity == 0)
    d = project_initial_data(ZERO, sine_profile(2), cfg)
    assert np.max(np.abs(np.delete(d.B, 1))) < 1e-13
    assert math.isclose(d.B[1], math.sqrt(m / 2) / d.frequencies[1], rel_tol=1e-13)


def test_projection_rejects_loose_ends():
    shifted = Profile(lambda x: np.cos(np.pi * x), "cos")
    with pytest.raises(ValueError):
        project_initial_data(shifted, ZERO, ChainConfig(m=8))


@st.composite
def site_data(draw):
    m = draw(st.integers(2, 40))
    boundary = draw(st.sampled_from(["dirichlet", "periodic"]))
    cfg = ChainConfig(m=m, boundary=boundary, omega0=draw(st.sampled_from([0.0, 1.5])))
    vals = st.floats(-1, 1, allow_nan=False)
    y = np.array(draw(st.lists(vals, min_size=cfg.n_sites, max_size=cfg.n_sites)))
    v = np.array(draw(st.lists(vals, min_size=cfg.n_sites, max_size=cfg.n_sites)))
    if boundary == "dirichlet":
        y[[0, -1]] = v[[0, -1]] = 0.0
    return cfg, y, v


@given(site_data())
def test_projection_is_complete(data):
    cfg, y, v = data
    s = evolve_modal(decompose_state(y, v, cfg), cfg, 0.0)
    assert np.allclose(s.y, y, rtol=0, atol=1e-10 * max(1, np.max(np.abs(y))))
    assert np.allclose(s.v, v, rtol=0, atol=1e-10 * max(1, np.max(np.abs(v))))


@given(site_data(), st.floats(0.01, 5.0))
def test_modal_evolution_is_reversible_and_conserves_energy(data, t):
    cfg, y, v = data
    s0 = ChainState(y, v)
    s1 = evolve_modal(decompose_state(y, v, cfg), cfg, t)
    back = evolve_modal(decompose_state(s1.y, s1.v, cfg, t0=t), cfg, -t)
    assert back.t == 0.0
    assert np.max(np.abs(back.y - y)) < 1e-12 and np.max(np.abs(back.v - v)) < 1e-12
    e0 = chain_energy(s0, cfg)
    assert abs(chain_energy(s1, cfg) - e0) <= 1e-12 * max(e0, 1e-300)


def test_modal_periodicity():
    cfg = ChainConfig(m=9)
    d = project_initial_data(sine_profile(3), ZERO, cfg)
    s = evolve_modal(d, cfg, 2 * math.pi / d.frequencies[2])
    assert np.max(np.abs(s.y - sine_profile(3)(cfg.sites()))) < 1e-12


# Verlet ------------------------------------------------------------------------------------------


def test_verlet_zero_state_and_guard():
    cfg = ChainConfig(m=6)
    z = ChainState(np.zeros(7), np.zeros(7))
    out = evolve_verlet(z, cfg, 1e-3, 50)
    assert np.all(out.y == 0) and np.all(out.v == 0)
    with pytest.raises(ValueError, match="dt"):
        evolve_verlet(z, cfg, 2.1 * cfg.delta / cfg.c, 10)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_verlet_instability_raises():
    cfg = ChainConfig(m=6)
    y = np.zeros(7)
    y[3] = np.inf
    with pytest.raises(NumericalInstabilityError, match="omega_max"):
        evolve_verlet(ChainState(y, np.zeros(7)), cfg, 1e-3, 10)


def test_verlet_matches_modal_m3():
    cfg = ChainConfig(m=3)
    y = np.array([0.0, 0.3, -0.7, 0.0])
    v = np.array([0.0, 0.2, 0.5, 0.0])
    t = 0.37
    exact = evolve_modal(decompose_state(y, v, cfg), cfg, t)
    num = evolve_verlet(ChainState(y, v), cfg, 1e-5, 37000)
    assert abs(num.t - t) < 1e-12
    assert np.max(np.abs(num.y - exact.y)) < 1e-8


def test_verlet_second_order():
    cfg = ChainConfig(m=8)
    s0 = ChainState(sine_profile(1)(cfg.sites()), np.zeros(cfg.n_sites))
    w = float(mode_frequency(cfg, 1))
    T = 1.0
    dts, errs = [], []
    for n in (200, 400, 800, 1600):
        dt = T / n
        out = evolve_verlet(s0, cfg, dt, n)
        errs.append(np.max(np.abs(out.y - s0.y * math.cos(w * T))))
        dts.append(dt)
    assert abs(fit_order(dts, errs) - 2.0) < 0.1


def test_verlet_energy_drift():
    cfg = ChainConfig(m=4)
    w1 = float(mode_frequency(cfg, 1))
    s0 = ChainState(sine_profile(1)(cfg.sites()), np.zeros(cfg.n_sites))
    dt = 2e-4 / w1
    n = int(round(100 / w1 / dt))
    out = evolve_verlet(s0, cfg, dt, n)
    e0 = chain_energy(s0, cfg)
    assert abs(chain_energy(out, cfg) - e0) <= 1e-8 * e0


def test_verlet_pinned_frequency():
    omega0 = 3.0
    cfg = ChainConfig(m=2, omega0=omega0)
    expect = math.sqrt(float(mode_frequency(ChainConfig(m=2), 1)) ** 2 + omega0**2)
    s = ChainState(np.array([0.0, 1.0, 0.0]), np.zeros(3))
    dt, chunk = 1e-4, 5
    ys, ts = [s.y[1]], [0.0]
    while ts[-1] < 6 * 2 * math.pi / expect:
        s = evolve_verlet(s, cfg, dt, chunk)
        ys.append(s.y[1])
        ts.append(s.t)
    ys, ts = np.array(ys), np.array(ts)
    idx = np.nonzero(np.sign(ys[1:]) != np.sign(ys[:-1]))[0]
    crossings = ts[idx] - ys[idx] * (ts[idx + 1] - ts[idx]) / (ys[idx + 1] - ys[idx])
    half_period = np.polyfit(np.arange(len(crossings)), crossings, 1)[0]
    assert abs(math.pi / half_period / expect - 1) < 1e-6


# continuum -------------------------------------------------------------------------------------


def test_continuum_single_modes():
    cfg = ChainConfig(a=2.0, c=1.3)
    x = np.linspace(0, cfg.a, 33)
    w1 = math.pi * cfg.c / cfg.a
    got = continuum_solution(sine_profile(1, cfg.a), None, cfg, x, 0.8, H=8)
    assert np.max(np.abs(got - np.sin(np.pi * x / cfg.a) * math.cos(w1 * 0.8))) < 1e-12
    w2 = 2 * w1
    got = continuum_solution(None, sine_profile(2, cfg.a), cfg, x, 0.8, H=8)
    assert np.max(np.abs(got - np.sin(2 * np.pi * x / cfg.a) * math.sin(w2 * 0.8) / w2)) < 1e-12
    with pytest.raises(ValueError):
        continuum_solution(ZERO, ZERO, cfg, x, 0.1, H=0)


def test_continuum_tail_of_c2_bump():
    cfg = ChainConfig()
    x = np.linspace(0, 1, 256)
    Z = bump_profile(0.5, 0.3)
    a = continuum_solution(Z, None, cfg, x, 0.3, H=200)
    b = continuum_solution(Z, None, cfg, x, 0.3, H=400)
    assert np.max(np.abs(a - b)) <= 1e-6


def test_dalembert_examples():
    cfg = ChainConfig(a=1.5, c=0.8)
    x = np.linspace(0, cfg.a, 41)
    Z = bump_profile(0.6, 0.4)
    assert np.allclose(dalembert_solution(Z, cfg, x, 0.0), Z(x), atol=1e-15)
    s1 = sine_profile(1, cfg.a)
    t = 0.77
    expect = np.sin(np.pi * x / cfg.a) * np.cos(np.pi * cfg.c * t / cfg.a)
    assert np.max(np.abs(dalembert_solution(s1, cfg, x, t) - expect)) < 1e-14
    for t in (0.1, 1.3, 4.0):
        assert np.all(np.abs(dalembert_solution(Z, cfg, np.array([0.0, cfg.a]), t)) < 1e-15)


@given(st.floats(-10, 10), st.floats(0.05, 0.95))
def test_odd_extension_properties(x, x0):
    ext = odd_periodic_extension(triangle_profile(x0), 1.0)
    assert abs(ext(x) + ext(-x)) < 1e-12
    assert abs(ext(x + 2.0) - ext(x)) < 1e-9


def test_dalembert_matches_continuum():
    cfg = ChainConfig()
    x = np.linspace(0, 1, 256)
    Z = bump_profile(0.5, 0.3)
    for t in (0.3, 0.7):
        diff = continuum_solution(Z, None, cfg, x, t, H=400) - dalembert_solution(Z, cfg, x, t)
        assert np.max(np.abs(diff)) <= 1e-6


# convergence study ----------------------------------------------------------------------------


def test_convergence_single_mode_order_two():
    table = convergence_study(sine_profile(1), None, [16, 32, 64, 128], 0.5, np.linspace(0, 1, 65), H=16)
    assert abs(table.order - 2.0) < 0.1
    assert [r["mesh"] for r in table.rows()] == [16, 32, 64, 128]


def test_convergence_rest_state():
    table = convergence_study(ZERO, ZERO, [8, 16], 0.5, np.linspace(0, 1, 9), H=8)
    assert table.errors == [0.0, 0.0] and math.isnan(table.order)


def test_convergence_bump_monotone():
    table = convergence_study(bump_profile(0.5, 0.3), None, [32, 64, 128, 256], 0.3, np.linspace(0, 1, 129))
    assert all(b < a for a, b in zip(table.errors, table.errors[1:]))


def test_convergence_meshes_must_increase():
    with pytest.raises(ValueError):
        convergence_study(ZERO, ZERO, [16, 8], 0.1, [0.5])
