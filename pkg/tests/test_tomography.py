import numpy as np
import pytest

from hybridoam.measurement import CountRecord, ExpectedCountRecord, setting_from_labels
from hybridoam.source import NoiseModel, hybrid_singlet, hybrid_singlet_ket, prepare_hybrid
from hybridoam.states import (
    OAM_O2,
    POLARIZATION,
    DensityMatrix,
    StateVector,
    project_to_physical,
)
from hybridoam.tomography import (
    ALICE_LABELS,
    BOB_LABELS,
    InsufficientDataError,
    StateMetrics,
    concurrence,
    fidelity,
    linear_entropy,
    linear_inversion,
    log_likelihood,
    metric_uncertainties,
    mle_reconstruct,
    reconstruct,
    simulate_tomography,
    tomography_settings,
    trace_distance,
)

PSI = hybrid_singlet_ket()


def test_settings_enumeration():
    settings = tomography_settings()
    assert len(settings) == 36
    # Alice-major order, six Bob analyzers per Alice analyzer
    assert [s.label for s in settings[:6]] == [
        "H|+2", "H|-2", "H|h", "H|v", "H|a", "H|d",
    ]
    assert settings[6].label == "V|+2"
    assert {s.alice for s in settings} == set(ALICE_LABELS)
    assert {s.bob for s in settings} == set(BOB_LABELS)


def test_exact_data_linear_inversion_is_exact():
    rho, _ = prepare_hybrid(NoiseModel(werner_p=0.887))
    recs = simulate_tomography(rho, exact=True)
    assert all(isinstance(r, ExpectedCountRecord) for r in recs)
    est = linear_inversion(recs)
    assert np.max(np.abs(est.matrix - rho.matrix)) < 1e-12


def test_exact_data_mle_matches_truth():
    rho = hybrid_singlet()
    run = reconstruct(simulate_tomography(rho, exact=True))
    assert abs(fidelity(run.rho_mle, PSI) - 1.0) < 1e-10
    assert np.max(np.abs(run.rho_mle.matrix - rho.matrix)) < 1e-8
    assert trace_distance(run.rho_mle, rho) < 1e-8
    assert np.max(np.abs(run.rho_linear.matrix - rho.matrix)) < 1e-12


def test_maximally_mixed_state_reconstructs():
    rho = DensityMatrix(np.eye(4) / 4, (POLARIZATION, OAM_O2))
    run = reconstruct(simulate_tomography(rho, exact=True))
    assert np.max(np.abs(run.rho_linear.matrix - np.eye(4) / 4)) < 1e-12
    assert np.max(np.abs(run.rho_mle.matrix - np.eye(4) / 4)) < 1e-8


def test_werner_metrics_closed_forms_exact_mode():
    for p in (0.0, 0.5, 0.887, 1.0):
        rho, _ = prepare_hybrid(NoiseModel(werner_p=p))
        run = reconstruct(simulate_tomography(rho, exact=True))
        assert abs(fidelity(run.rho_mle, PSI) - (1 + 3 * p) / 4) < 1e-10
        assert abs(concurrence(run.rho_mle) - max(0.0, (3 * p - 1) / 2)) < 1e-10
        assert abs(linear_entropy(run.rho_mle) - (1 - p * p)) < 1e-10


def test_metric_oracles_on_known_states():
    pure = hybrid_singlet()
    assert abs(fidelity(pure, PSI) - 1.0) < 1e-12
    assert abs(concurrence(pure) - 1.0) < 1e-12
    assert linear_entropy(pure) < 1e-12
    mixed = DensityMatrix(np.eye(4) / 4, (POLARIZATION, OAM_O2))
    assert abs(fidelity(mixed, PSI) - 0.25) < 1e-12
    assert concurrence(mixed) < 1e-12
    assert abs(linear_entropy(mixed) - 1.0) < 1e-12
    assert abs(trace_distance(mixed, pure) - 0.75) < 1e-12
    assert trace_distance(pure, pure) < 1e-12
    prod = DensityMatrix(np.diag([1.0, 0, 0, 0]), (POLARIZATION, OAM_O2))
    assert concurrence(prod) < 1e-12


def test_noisy_reconstruction_is_physical_and_close():
    rho, _ = prepare_hybrid("fitted")
    run = reconstruct(simulate_tomography(rho, seed=0))
    w = np.linalg.eigvalsh(run.rho_mle.matrix)
    assert w[0] > -1e-10
    assert abs(np.trace(run.rho_mle.matrix).real - 1.0) < 1e-9
    assert trace_distance(run.rho_mle, rho) < 0.05
    # MLE never does worse than the projected linear estimate
    base = log_likelihood(project_to_physical(run.rho_linear), run.records)
    assert run.loglik >= base - 1e-9


def test_count_table_validation():
    rho = hybrid_singlet()
    recs = simulate_tomography(rho, seed=1)
    with pytest.raises(InsufficientDataError):
        linear_inversion(recs[:-1])  # one setting missing
    with pytest.raises(InsufficientDataError):
        linear_inversion(recs + [recs[0]])  # duplicated setting
    renamed = CountRecord(
        setting=setting_from_labels("theta=0.5", "+2"), counts=5,
        expected_rate_cps=None, seed=0,
    )
    with pytest.raises(InsufficientDataError):
        linear_inversion(recs[:-1] + [renamed])
    zero = [CountRecord(r.setting, 0, None, 0) for r in recs]
    with pytest.raises(InsufficientDataError):
        linear_inversion(zero)


def test_mle_gradient_spot_check():
    # central finite differences against the analytic gradient
    from hybridoam.tomography import _grad_to_params, _pack, _projector_stack, _unpack

    rho, _ = prepare_hybrid("fitted")
    recs = simulate_tomography(rho, seed=2)
    projs, counts, totals = _projector_stack(recs)
    const = float(np.sum(counts * np.log(totals)))

    def value(x):
        t = _unpack(x)
        gram = t @ t.conj().T
        rho_m = gram / np.trace(gram).real
        p = np.einsum("sij,ji->s", projs, rho_m).real
        pc = np.clip(p, 1e-15, None)
        return float(np.sum(counts * np.log(pc))) + const

    rng = np.random.default_rng(11)
    for _ in range(3):
        x = rng.normal(size=16) * 0.4
        x[:4] = np.abs(x[:4]) + 0.3
        t = _unpack(x)
        gram = t @ t.conj().T
        tr = np.trace(gram).real
        rho_m = gram / tr
        p = np.einsum("sij,ji->s", projs, rho_m).real
        active = p > 1e-15
        pc = np.where(active, p, 1e-15)
        w = np.where(active, counts / pc, 0.0)
        a = np.einsum("s,sij->ij", w, projs)
        grad = _grad_to_params(((a - float(np.sum(w * p)) * np.eye(4)) @ t) / tr)
        eps = 1e-6
        for k in (0, 5, 11):
            xp, xm = x.copy(), x.copy()
            xp[k] += eps
            xm[k] -= eps
            fd = (value(xp) - value(xm)) / (2 * eps)
            assert abs(grad[k] - fd) <= 1e-5 * max(1.0, abs(fd))


def test_mle_physical_on_random_counts():
    rng = np.random.default_rng(7)
    settings = tomography_settings()
    for _ in range(5):
        recs = [
            CountRecord(s, int(rng.integers(0, 400)), None, 0) for s in settings
        ]
        res = mle_reconstruct(recs)
        w = np.linalg.eigvalsh(res.rho.matrix)
        assert w[0] > -1e-10
        assert abs(np.trace(res.rho.matrix).real - 1.0) < 1e-9


def test_bootstrap_uncertainties_identity_resampler():
    rho, _ = prepare_hybrid("fitted")
    recs = simulate_tomography(rho, seed=4)
    m = metric_uncertainties(recs, n_resamples=100, resampler=lambda obs, r: obs)
    # identical resamples: point estimates survive, spreads collapse
    assert m.fidelity_sigma < 1e-12
    assert m.concurrence_sigma < 1e-12
    assert m.linear_entropy_sigma < 1e-12
    assert 0.9 < m.fidelity <= 1.0
    d = m.as_dict()
    assert set(d["uncertainties"]) == {"fidelity", "concurrence", "linear_entropy"}


def test_bootstrap_enforces_resample_floor_and_failure_budget():
    rho, _ = prepare_hybrid("fitted")
    recs = simulate_tomography(rho, seed=4)
    with pytest.raises(ValueError):
        metric_uncertainties(recs, n_resamples=50)
    with pytest.raises(RuntimeError):
        metric_uncertainties(
            recs, n_resamples=100, resampler=lambda obs, r: np.zeros_like(obs)
        )


def test_bootstrap_sigma_scale_at_reference_acquisition():
    rho, _ = prepare_hybrid("fitted")
    recs = simulate_tomography(rho, seed=3)
    m = metric_uncertainties(recs, n_resamples=100, seed=3)
    assert 0.003 <= m.fidelity_sigma <= 0.03


def test_state_metrics_validation():
    with pytest.raises(ValueError):
        StateMetrics(1.2, 0.5, 0.1, 0.01, 0.01, 0.01)
    with pytest.raises(ValueError):
        StateMetrics(0.9, 0.5, 0.1, -0.01, 0.01, 0.01)
