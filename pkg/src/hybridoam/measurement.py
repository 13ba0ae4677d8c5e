"""Born-rule probabilities, Poisson coincidence counting, fringe scans.

Counting model: the detected pair rate is a single input constant (default
100 cps); each setting's mean is rate x joint probability x duration, so the
four outcomes of a complete local basis pair sum to the total rate.  Singles,
dark counts and accidentals are out of scope.

RNG contract: every setting draws from its own stream derived from
(global seed, path of small integers), so results are independent of
execution order and safe to parallelize.

Fringe convention: the scan variable theta is 4x the half-waveplate
fast-axis angle, so Alice's analysis state is (cos(theta/2), sin(theta/2))
and ideal fringes follow N0 (1 + V cos(theta - phi0)) with period 2 pi.
The phase offset phi0 depends on Bob's projector (0 for |+2>, -pi/2 for
|h>) and is reported by the fit rather than absorbed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .states import ATOL, StateVector, DensityMatrix, basis_ket, _resolve_label

DEFAULT_RATE_CPS = 100.0
DEFAULT_DURATION_S = 15.0

_THETA_PREFIX = "theta="


class FitFailureError(ValueError):
    """Fringe fit cannot be performed on the given points."""


def _check_projector(p: np.ndarray, who: str) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    if p.shape != (2, 2):
        raise ValueError(f"{who} projector must be 2x2, got {p.shape}")
    if np.max(np.abs(p - p.conj().T)) > ATOL:
        raise ValueError(f"{who} projector is not Hermitian")
    if np.max(np.abs(p @ p - p)) > ATOL:
        raise ValueError(f"{who} projector is not idempotent")
    if abs(np.trace(p).real - 1.0) > ATOL:
        raise ValueError(f"{who} projector is not rank 1")
    return p


@dataclass(frozen=True)
class MeasurementSetting:
    """One coincidence setting: rank-1 analyzers on both sides.

    ``alice`` and ``bob`` are the display names used in count tables
    (basis-state labels, or "theta=<x>" for scanned analyzers).
    """

    alice_proj: np.ndarray
    bob_proj: np.ndarray
    duration_s: float
    label: str
    alice: str = ""
    bob: str = ""

    def __post_init__(self):
        object.__setattr__(
            self, "alice_proj", _check_projector(self.alice_proj, "alice")
        )
        object.__setattr__(self, "bob_proj", _check_projector(self.bob_proj, "bob"))
        if not self.duration_s > 0:
            raise ValueError(f"duration must be positive, got {self.duration_s}")


@dataclass(frozen=True)
class CountRecord:
    """Simulated counts for one setting, reproducible from (setting, seed).

    expected_rate_cps is the per-setting mean rate used for the draw; it is
    None for records read back from CSV, which does not store it.
    """

    setting: MeasurementSetting
    counts: int
    expected_rate_cps: float | None
    seed: int

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError("counts must be non-negative")
        if self.expected_rate_cps is not None and self.expected_rate_cps < 0:
            raise ValueError("expected rate must be non-negative")


@dataclass(frozen=True)
class ExpectedCountRecord:
    """No-noise counterpart of CountRecord carrying the exact expectation.

    counts is the Poisson mean itself and is generally fractional; the field
    names mirror CountRecord so reconstruction code accepts either kind.
    """

    setting: MeasurementSetting
    counts: float
    expected_rate_cps: float
    seed: int = 0

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError("counts must be non-negative")
        if self.expected_rate_cps < 0:
            raise ValueError("expected rate must be non-negative")


def setting_stream_seed(global_seed: int, path: tuple[int, ...]) -> int:
    """Per-setting 64-bit seed derived from a global seed and a stream path."""
    ss = np.random.SeedSequence(entropy=global_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


def _analyzer_state(name: str) -> np.ndarray:
    """Alice analysis ket from a label name or a "theta=<x>" scan tag."""
    if name.startswith(_THETA_PREFIX):
        theta = float(name[len(_THETA_PREFIX):])
        return np.array([np.cos(theta / 2), np.sin(theta / 2)], dtype=complex)
    return basis_ket(name).amplitudes


def _projector_from(label_or_matrix, degree: str | None = None) -> tuple[np.ndarray, str]:
    if isinstance(label_or_matrix, str):
        if label_or_matrix.startswith(_THETA_PREFIX):
            ket = _analyzer_state(label_or_matrix)
            return np.outer(ket, ket.conj()), label_or_matrix
        lab = _resolve_label(label_or_matrix)
        if degree is not None and lab.degree != degree:
            raise ValueError(f"label {lab.name!r} is not a {degree} state")
        ket = basis_ket(lab).amplitudes
        return np.outer(ket, ket.conj()), lab.name
    mat = np.asarray(label_or_matrix, dtype=complex)
    return mat, ""


def setting_from_labels(
    alice: str, bob: str, duration_s: float = DEFAULT_DURATION_S
) -> MeasurementSetting:
    """Build a setting from analyzer names, e.g. ("H", "+2") or ("+", "d")."""
    pa, aname = _projector_from(alice, "polarization")
    pb, bname = _projector_from(bob, "oam_o2")
    return MeasurementSetting(
        alice_proj=pa,
        bob_proj=pb,
        duration_s=duration_s,
        label=f"{aname}|{bname}",
        alice=aname,
        bob=bname,
    )


def joint_probability(rho: DensityMatrix, s: MeasurementSetting) -> float:
    """Born probability Tr[rho (Pi_A x Pi_B)] for a coincidence setting."""
    if rho.dim != 4 or len(rho.basis) != 2:
        raise ValueError("joint_probability expects a two-qubit state")
    op = np.kron(s.alice_proj, s.bob_proj)
    p = float(np.trace(rho.matrix @ op).real)
    if p < -ATOL or p > 1.0 + ATOL:
        raise ValueError(f"probability {p} outside [0, 1]")
    return p


def expected_counts(
    rho: DensityMatrix, s: MeasurementSetting, rate_cps: float
) -> float:
    """Noise-free mean count for a setting (the Poisson parameter)."""
    if rate_cps < 0:
        raise ValueError("rate must be non-negative")
    return max(joint_probability(rho, s), 0.0) * rate_cps * s.duration_s


def simulate_counts(
    rho: DensityMatrix, s: MeasurementSetting, rate_cps: float, seed: int
) -> CountRecord:
    """Draw one Poisson count for a setting, deterministic for a given seed."""
    lam = expected_counts(rho, s, rate_cps)
    counts = int(np.random.default_rng(seed).poisson(lam))
    p = joint_probability(rho, s)
    return CountRecord(
        setting=s, counts=counts, expected_rate_cps=max(p, 0.0) * rate_cps, seed=seed
    )


def exact_counts(
    rho: DensityMatrix, s: MeasurementSetting, rate_cps: float, seed: int = 0
) -> ExpectedCountRecord:
    """Noise-free record whose counts equal the unrounded expectation."""
    lam = expected_counts(rho, s, rate_cps)
    p = joint_probability(rho, s)
    return ExpectedCountRecord(
        setting=s,
        counts=lam,
        expected_rate_cps=max(p, 0.0) * rate_cps,
        seed=seed,
    )


def fringe_scan_records(
    rho: DensityMatrix,
    bob_proj,
    theta_grid,
    rate_cps: float = DEFAULT_RATE_CPS,
    duration_s: float = DEFAULT_DURATION_S,
    seed: int = 0,
    scan_index: int = 0,
    exact: bool = False,
) -> list[CountRecord]:
    """Scan Alice's analyzer over theta against a fixed Bob projector.

    Each point uses the stream (2, scan_index, point index) off the global
    seed.  ``bob_proj`` is an OAM label or a 2x2 projector.
    """
    thetas = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    if thetas.size == 0:
        raise ValueError("theta grid is empty")
    pb, bname = _projector_from(bob_proj, "oam_o2")
    pb = _check_projector(pb, "bob")
    records = []
    for i, theta in enumerate(thetas):
        aname = f"{_THETA_PREFIX}{theta:.17g}"
        ket = _analyzer_state(aname)
        s = MeasurementSetting(
            alice_proj=np.outer(ket, ket.conj()),
            bob_proj=pb,
            duration_s=duration_s,
            label=f"{aname}|{bname}",
            alice=aname,
            bob=bname,
        )
        point_seed = setting_stream_seed(seed, (2, scan_index, i))
        if exact:
            records.append(exact_counts(rho, s, rate_cps, seed=point_seed))
        else:
            records.append(simulate_counts(rho, s, rate_cps, point_seed))
    return records


def fringe_scan(
    rho: DensityMatrix,
    bob_proj,
    theta_grid,
    rate_cps: float = DEFAULT_RATE_CPS,
    duration_s: float = DEFAULT_DURATION_S,
    seed: int = 0,
    scan_index: int = 0,
    exact: bool = False,
) -> list[tuple[float, float]]:
    """Fringe scan returning (theta, counts) pairs; see fringe_scan_records.

    With exact=True the points carry the unrounded expectations, so a fit on
    them recovers the model parameters to solver precision.
    """
    records = fringe_scan_records(
        rho, bob_proj, theta_grid, rate_cps, duration_s, seed, scan_index, exact
    )
    thetas = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    return [(float(t), float(r.counts)) for t, r in zip(thetas, records)]


def fit_fringe(points) -> tuple[float, float, float]:
    """Least-squares fit of N(theta) = N0 (1 + V cos(theta - phi0)).

    Linear in (N0, N0 V cos phi0, N0 V sin phi0); returns (N0, V, phi0)
    with V clamped to [0, 1].  Needs at least 4 points whose angles make the
    three basis functions independent.
    """
    pts = [(float(t), float(c)) for t, c in points]
    if len(pts) < 4:
        raise FitFailureError(f"need at least 4 points, got {len(pts)}")
    thetas = np.array([t for t, _ in pts])
    counts = np.array([c for _, c in pts])
    design = np.column_stack([np.ones_like(thetas), np.cos(thetas), np.sin(thetas)])
    if np.linalg.matrix_rank(design, tol=1e-9) < 3:
        raise FitFailureError("theta grid is degenerate, cannot separate phases")
    coef, *_ = np.linalg.lstsq(design, counts, rcond=None)
    n0, a1, a2 = coef
    if n0 <= 0:
        raise FitFailureError(f"fitted baseline {n0} is not positive")
    v = float(np.hypot(a1, a2) / n0)
    v = min(max(v, 0.0), 1.0)
    phi0 = float(np.arctan2(a2, a1)) if v > 0 else 0.0
    return float(n0), v, phi0


def visibility_minmax(points) -> float:
    """Max/min count visibility (max-min)/(max+min), the fit-free estimate."""
    counts = np.array([float(c) for _, c in points])
    if counts.size == 0:
        raise FitFailureError("no points")
    hi, lo = counts.max(), counts.min()
    if hi + lo == 0:
        return 0.0
    return float((hi - lo) / (hi + lo))


def write_counts_csv(records, path) -> None:
    """Write count records as CSV: setting_label, alice, bob, duration_s, counts, seed.

    Integer counts serialize without a decimal point; exact-mode expectations
    keep their fractional part via repr-faithful formatting.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["setting_label", "alice", "bob", "duration_s", "counts", "seed"])
        for r in records:
            s = r.setting
            c = r.counts if isinstance(r.counts, int) else f"{r.counts:.17g}"
            w.writerow([s.label, s.alice, s.bob, f"{s.duration_s:.17g}", c, r.seed])


def read_counts_csv(path) -> list:
    """Read records written by write_counts_csv, rebuilding the projectors.

    Integer counts come back as CountRecord, fractional ones (exact-mode
    expectations) as ExpectedCountRecord.  The per-setting expected rate is
    not stored in the CSV, so CountRecord rows carry None and exact rows
    recover it as counts / duration.
    """
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"setting_label", "alice", "bob", "duration_s", "counts", "seed"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise ValueError(f"unexpected CSV columns: {reader.fieldnames}")
        for row in reader:
            pa, _ = _projector_from(row["alice"], "polarization")
            pb, _ = _projector_from(row["bob"], "oam_o2")
            s = MeasurementSetting(
                alice_proj=pa,
                bob_proj=pb,
                duration_s=float(row["duration_s"]),
                label=row["setting_label"],
                alice=row["alice"],
                bob=row["bob"],
            )
            c = float(row["counts"])
            seed = int(row["seed"])
            if c.is_integer():
                records.append(
                    CountRecord(
                        setting=s,
                        counts=int(c),
                        expected_rate_cps=None,
                        seed=seed,
                    )
                )
            else:
                records.append(
                    ExpectedCountRecord(
                        setting=s,
                        counts=c,
                        expected_rate_cps=c / s.duration_s,
                        seed=seed,
                    )
                )
    return records
