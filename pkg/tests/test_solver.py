import numpy as np
import pytest

from floquet_ness.freqspace import FloquetDensityMatrix, block_norms, initial_guess, trace_components
from floquet_ness.liouvillian import (
    ModelSpec,
    PenaltyParams,
    build_extended_lindbladian,
    dense_extended_lindbladian,
    extended_null_vector,
)
from floquet_ness.mps import Mps
from floquet_ness.models import IsingBenchmarkParams, build_driven_ising
from floquet_ness.solver import (
    DegenerateSteadyStateError,
    StaleEnvironmentError,
    SweepConfig,
    SweepEngine,
    SweepStage,
    local_effective_operator,
    make_warmup_schedule,
    solve_first_decay_mode,
    solve_ness,
    transient_observable,
)
from floquet_ness.superops import PAULI, LocalOperator, choi_site_vector
from floquet_ness.tensors import TruncationSpec

SM = np.array([[0, 1], [0, 0]], dtype=complex)


def single_qubit_model(gamma=1.0, omega_z=0.0, drive=5.0):
    ham = {0: [LocalOperator(0, omega_z * PAULI["Z"] / 2)]} if omega_z else {}
    return ModelSpec(
        1, drive, ham, {"d": {0: LocalOperator(0, np.sqrt(gamma) * SM)}}
    ).validate()


def quick_config(n_c, chi, **kwargs):
    defaults = dict(
        warmup=make_warmup_schedule(n_c, chi, warm_sweeps=2, final_sweeps=6),
        eig_tol=1e-10,
        noise_amplitude=1e-4,
        seed=11,
    )
    defaults.update(kwargs)
    return SweepConfig(**defaults)


def densify_problem(problem):
    return problem.dense_matrix()


def test_local_operator_single_site_equals_dense():
    model = single_qubit_model(gamma=0.7, omega_z=1.1, drive=4.0)
    n_c = 1
    mpo = build_extended_lindbladian(model, n_c)
    state = initial_guess(1, 2, n_c, model.omega, noise_amplitude=1e-2, seed=3)
    engine = SweepEngine(mpo, state, TruncationSpec())
    problem = local_effective_operator(engine, 0)
    local = densify_problem(problem)
    dense = dense_extended_lindbladian(model, n_c)
    assert np.max(np.abs(local - dense)) < 1e-10


def test_local_operator_matches_dense_projection_two_sites():
    # random driven two-site model; frames from a random state
    rng = np.random.default_rng(5)
    h1 = [LocalOperator(0, 0.3 * PAULI["X"]), LocalOperator(1, 0.2j * PAULI["Y"])]
    hm1 = [LocalOperator(t.start, t.matrix.conj().T) for t in h1]
    model = ModelSpec(
        2,
        3.0,
        {0: [LocalOperator(0, np.kron(PAULI["Z"], PAULI["Z"]))], 1: h1, -1: hm1},
        {"a": {0: LocalOperator(0, np.sqrt(0.5) * np.kron(SM, PAULI["I"]))}},
    ).validate()
    n_c = 1
    mpo = build_extended_lindbladian(model, n_c)
    blocks = {n: Mps.random(2, 4, 3, rng, norm=1.0) for n in (-1, 0, 1)}
    state = FloquetDensityMatrix(blocks, model.omega, n_c, 2)
    engine = SweepEngine(mpo, state, TruncationSpec())
    site = 1
    engine.advance_to(site)
    problem = local_effective_operator(engine, site)
    local = densify_problem(problem)
    # dense projection oracle: P = Phi^dag L Phi with Phi mapping local
    # coordinates to the full frequency-stacked space through the frames
    dense = dense_extended_lindbladian(model, n_c)
    d2l = 4**2
    phi = np.zeros((3 * d2l, problem.dim), dtype=complex)
    col = 0
    for n in (-1, 0, 1):
        shape = problem.shapes[n]
        for idx in np.ndindex(shape):
            basis = np.zeros(shape, dtype=complex)
            basis[idx] = 1.0
            mps = Mps([engine.blocks[n][0], basis])
            phi[(n + 1) * d2l : (n + 2) * d2l, col] = mps.to_dense()
            col += 1
    projected = phi.conj().T @ dense @ phi
    assert np.max(np.abs(projected - local)) < 1e-10


def test_stale_problem_rejected():
    model = single_qubit_model()
    mpo = build_extended_lindbladian(model, 0)
    state = initial_guess(1, 2, 0, model.omega, noise_amplitude=1e-3, seed=1)
    engine = SweepEngine(mpo, state, TruncationSpec())
    problem = engine.site_problem(0)
    vec = problem.current_vector()
    engine.set_site(0, problem.unpack(vec))
    with pytest.raises(StaleEnvironmentError):
        problem.matvec(vec)


def test_solve_ness_amplitude_damping():
    model = single_qubit_model(gamma=0.8)
    cfg = quick_config(0, 4)
    state, report = solve_ness(model, cfg)
    rho = state.to_dense_blocks()[0]
    assert np.max(np.abs(rho - np.diag([1.0, 0.0]))) < 1e-8
    assert report.converged
    assert report.final_residual <= cfg.eig_tol


def test_solve_ness_static_drive_localizes_in_zero_block():
    model = single_qubit_model(gamma=0.6, omega_z=0.9)
    cfg = quick_config(2, 4)
    state, report = solve_ness(model, cfg)
    norms = block_norms(state)
    for n in (-2, -1, 1, 2):
        assert norms[n] <= 1e-6


def test_solve_ness_driven_ising_l3_matches_dense():
    p = IsingBenchmarkParams(chain_length=3, omega=5.0)
    model = build_driven_ising(p)
    n_c = 3
    cfg = quick_config(n_c, 16, noise_amplitude=1e-5)
    state, report = solve_ness(model, cfg)
    assert report.converged
    exact = extended_null_vector(model, n_c)
    got = state.to_dense_blocks()
    for n in range(-n_c, n_c + 1):
        assert np.max(np.abs(got[n] - exact[n])) < 1e-7
    # constraint suite
    traces = trace_components(state)
    assert abs(traces[0] - 1.0) < 1e-12
    for n in range(1, n_c + 1):
        assert abs(traces[n]) < 1e-8
        assert abs(traces[-n]) < 1e-8
    assert report.fixed_point_residual < 1e-7


def test_solve_ness_detects_degenerate_steady_space():
    model = ModelSpec(
        1, 2.0, {}, {"z": {0: LocalOperator(0, PAULI["Z"])}}
    ).validate()
    cfg = quick_config(0, 2)
    with pytest.raises(DegenerateSteadyStateError):
        solve_ness(model, cfg)


def test_decay_mode_amplitude_damping():
    gamma = 0.8
    model = single_qubit_model(gamma=gamma)
    cfg = quick_config(0, 4)
    ness, _ = solve_ness(model, cfg)
    decay = solve_first_decay_mode(model, ness, cfg)
    assert abs(decay.eigenvalue - (-gamma / 2)) < 1e-8
    assert abs(decay.tau_relax - 2.0 / gamma) < 1e-7
    assert decay.identity_overlap < 1e-8
    assert decay.steady_overlap < 1e-6


def test_decay_mode_conjugate_pair():
    gamma, wz = 0.6, 1.3
    model = single_qubit_model(gamma=gamma, omega_z=wz)
    cfg = quick_config(0, 4)
    ness, _ = solve_ness(model, cfg)
    decay = solve_first_decay_mode(model, ness, cfg)
    assert decay.conjugate_pair
    assert abs(decay.eigenvalue.real - (-gamma / 2)) < 1e-8
    assert abs(abs(decay.eigenvalue.imag) - wz) < 1e-8
    # the conjugate must be in the dense spectrum too
    dense = dense_extended_lindbladian(model, 0)
    eigs = np.linalg.eigvals(dense)
    assert np.min(np.abs(eigs - np.conj(decay.eigenvalue))) < 1e-8


def test_decay_mode_l3_ising_vs_dense_spectrum():
    p = IsingBenchmarkParams(chain_length=3, omega=5.0, gamma=1.0)
    model = build_driven_ising(p)
    n_c = 2
    cfg = quick_config(n_c, 16, noise_amplitude=1e-5)
    ness, _ = solve_ness(model, cfg)
    decay = solve_first_decay_mode(model, ness, cfg)
    dense = dense_extended_lindbladian(model, n_c)
    eigs = np.linalg.eigvals(dense)
    # fold into the first zone and find the slowest genuine decay
    fold = np.round(eigs.imag / model.omega)
    folded = eigs - 1j * fold * model.omega
    nonzero = folded[folded.real < -1e-8]
    lam_exact = nonzero[np.argmax(nonzero.real)]
    err = min(
        abs(decay.eigenvalue - lam_exact), abs(np.conj(decay.eigenvalue) - lam_exact)
    ) / abs(lam_exact)
    assert err < 1e-3


def test_transient_limits():
    gamma = 0.9
    model = single_qubit_model(gamma=gamma)
    cfg = quick_config(0, 4)
    ness, _ = solve_ness(model, cfg)
    decay = solve_first_decay_mode(model, ness, cfg)
    obs = LocalOperator(0, PAULI["Z"])
    rho_init = [np.diag([0.2, 0.8]).astype(complex)]
    times = np.linspace(0.0, 60.0, 121)
    series = transient_observable(ness, decay, rho_init, obs, times)
    # long times must land on the steady value
    from floquet_ness.observables import expectation_series

    steady = expectation_series(ness, obs, times)
    assert abs(series.values[-1] - steady.values[-1]) < 1e-8
    # injecting the steady state itself leaves a flat series
    flat = transient_observable(ness, decay, ness, obs, times)
    assert np.max(np.abs(flat.values - steady.values)) < 1e-6


def test_transient_matches_master_equation_after_fast_modes():
    gamma, wz = 0.8, 1.3
    model = single_qubit_model(gamma=gamma, omega_z=wz)
    cfg = quick_config(0, 4)
    ness, _ = solve_ness(model, cfg)
    decay = solve_first_decay_mode(model, ness, cfg)
    # tilted pure state excites the slow coherence pair
    ket = np.array([np.sqrt(0.2), np.sqrt(0.8)])
    rho0 = np.outer(ket, ket.conj()).astype(complex)
    obs = LocalOperator(0, PAULI["X"])
    tau = decay.tau_relax
    times = np.linspace(0.0, 8 * tau, 161)
    from floquet_ness.exact import evolve_master_equation

    traj = evolve_master_equation(model, rho0, times, tol=1e-12)
    exact_vals = np.real([np.trace(PAULI["X"] @ r) for r in traj])
    recon = transient_observable(ness, decay, [rho0], obs, times)
    window = times >= 3 * tau
    scale = np.max(np.abs(exact_vals[window]))
    err = np.max(np.abs(recon.values[window] - exact_vals[window]))
    assert err <= 0.05 * scale
    # for this two-level model the slow pair is exact at all times
    assert np.max(np.abs(recon.values - exact_vals)) < 1e-6


def test_normalization_idempotence():
    model = single_qubit_model(gamma=0.5, omega_z=0.4)
    cfg = quick_config(1, 4)
    state, _ = solve_ness(model, cfg)
    # one extra production sweep must not move the observables
    mpo = build_extended_lindbladian(model, 1)
    engine = SweepEngine(mpo, state, TruncationSpec(max_rank=4))
    from floquet_ness.solver import _run_sweeps

    stage = SweepStage(n_c=1, chi=4, sweeps=1, penalties_on=False, two_site=False)
    _run_sweeps(engine, cfg, stage, cfg.local_eig_target, label="extra")
    again = engine.state()
    t0 = again.block_trace(0)
    again = again.scaled(1.0 / t0)
    obs = LocalOperator(0, PAULI["Z"])
    from floquet_ness.observables import expectation_series

    times = np.linspace(0, 2 * np.pi / model.omega, 13)
    a = expectation_series(state, obs, times)
    b = expectation_series(again, obs, times)
    assert np.max(np.abs(a.values - b.values)) < 10 * cfg.eig_tol + 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(warmup=[]).validate()
    bad = [SweepStage(n_c=2, chi=8), SweepStage(n_c=1, chi=8)]
    with pytest.raises(ValueError):
        SweepConfig(warmup=bad).validate()
    bad_gamma = [
        SweepStage(n_c=0, chi=8, gamma_scale=1.0),
        SweepStage(n_c=1, chi=8, gamma_scale=2.0),
    ]
    with pytest.raises(ValueError):
        SweepConfig(warmup=bad_gamma).validate()


def test_schedule_builder_monotone():
    stages = make_warmup_schedule(4, 32, gamma_scale_start=5.0)
    cfg = SweepConfig(warmup=stages)
    cfg.validate()
    assert stages[-1].penalties_on is False
    assert stages[-1].n_c == 4 and stages[-1].chi == 32
    assert stages[0].gamma_scale == pytest.approx(5.0)
    assert stages[-1].gamma_scale == 1.0
