"""Labeled qubit bases and small dense linear algebra for two-photon states.

Every state is expressed over an ordered tuple of tensor factors.  The factor
kinds used throughout the package:

* ``polarization``: 2-dim, computational basis (|H>, |V>)
* ``oam_o2``: 2-dim orbital angular momentum subspace, basis (|+2>, |-2>)
* ``oam_fundamental``: 1-dim placeholder for the m=0 mode
* ``oam_full``: 3-dim internal factor (|0>, |+2>, |-2>) used by optical
  elements that couple the fundamental mode to the o2 subspace

Conventions pinned here and relied on everywhere else:

* circular polarization: |L> = (|H>+i|V>)/sqrt2, |R> = (|H>-i|V>)/sqrt2
* canonical two-qubit ordering {|H,+2>, |H,-2>, |V,+2>, |V,-2>}
* OAM qubit identification: |+2> is logical 0, |-2> is logical 1
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ATOL = 1e-12        # tolerance for algebraic identities
PSD_FLOOR = -1e-10  # eigenvalue floor for physicality checks

POLARIZATION = "polarization"
OAM_O2 = "oam_o2"
OAM_FUNDAMENTAL = "oam_fundamental"
OAM_FULL = "oam_full"

FACTOR_DIMS = {
    POLARIZATION: 2,
    OAM_O2: 2,
    OAM_FUNDAMENTAL: 1,
    OAM_FULL: 3,
}

_SQ2 = np.sqrt(2.0)

_POL_KETS = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "+": np.array([1.0, 1.0], dtype=complex) / _SQ2,
    "-": np.array([1.0, -1.0], dtype=complex) / _SQ2,
    "L": np.array([1.0, 1.0j], dtype=complex) / _SQ2,
    "R": np.array([1.0, -1.0j], dtype=complex) / _SQ2,
}

# OAM o2 superpositions; a and d keep their defining global phases
# exp(-i pi/4) and exp(+i pi/4), which drop out of every probability.
_O2_KETS = {
    "+2": np.array([1.0, 0.0], dtype=complex),
    "-2": np.array([0.0, 1.0], dtype=complex),
    "h": np.array([1.0, 1.0], dtype=complex) / _SQ2,
    "v": np.array([1.0, -1.0], dtype=complex) / _SQ2,
    "a": np.exp(-1j * np.pi / 4) * np.array([1.0, 1.0j], dtype=complex) / _SQ2,
    "d": np.exp(+1j * np.pi / 4) * np.array([1.0, -1.0j], dtype=complex) / _SQ2,
}

_FUND_KETS = {"0": np.array([1.0], dtype=complex)}

_DEGREE_KETS = {
    POLARIZATION: _POL_KETS,
    OAM_O2: _O2_KETS,
    OAM_FUNDAMENTAL: _FUND_KETS,
}


class InvalidLabelError(ValueError):
    """Basis label does not exist for the requested degree of freedom."""


class DegenerateInputError(ValueError):
    """Input matrix carries no usable weight (e.g. all eigenvalues <= 0)."""


@dataclass(frozen=True)
class BasisLabel:
    """A named basis state of one degree of freedom."""

    degree: str
    name: str

    def __post_init__(self):
        kets = _DEGREE_KETS.get(self.degree)
        if kets is None:
            raise InvalidLabelError(f"unknown degree of freedom: {self.degree!r}")
        if self.name not in kets:
            raise InvalidLabelError(
                f"label {self.name!r} is not valid for degree {self.degree!r}"
            )


def _resolve_label(label) -> BasisLabel:
    if isinstance(label, BasisLabel):
        return label
    for degree, kets in _DEGREE_KETS.items():
        if label in kets:
            return BasisLabel(degree, label)
    raise InvalidLabelError(f"unknown basis label: {label!r}")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateVector:
    """A ket over an ordered tuple of tensor factors.

    ``unnormalized`` marks the output of a filtering map whose norm encodes a
    success probability; all other vectors must have unit norm.
    """

    amplitudes: np.ndarray
    basis: tuple[str, ...]
    unnormalized: bool = False

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", _freeze(amp))
        object.__setattr__(self, "basis", tuple(self.basis))
        expected = int(np.prod([FACTOR_DIMS[f] for f in self.basis]))
        if amp.size != expected:
            raise ValueError(
                f"amplitude length {amp.size} does not match factors {self.basis}"
            )
        if not self.unnormalized:
            norm2 = float(np.vdot(amp, amp).real)
            if abs(norm2 - 1.0) > 1e-10:
                raise ValueError(f"state vector is not normalized: |psi|^2 = {norm2}")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class DensityMatrix:
    """A Hermitian positive matrix over an ordered tuple of tensor factors.

    ``unnormalized`` skips the unit-trace check (filter outputs).  Estimators
    that can produce indefinite matrices (pre-projection linear inversion)
    construct with ``require_positive=False``.
    """

    matrix: np.ndarray
    basis: tuple[str, ...]
    unnormalized: bool = False
    require_positive: bool = True

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", _freeze(mat))
        object.__setattr__(self, "basis", tuple(self.basis))
        expected = int(np.prod([FACTOR_DIMS[f] for f in self.basis]))
        if mat.shape != (expected, expected):
            raise ValueError(
                f"matrix shape {mat.shape} does not match factors {self.basis}"
            )
        if np.max(np.abs(mat - mat.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        if not self.unnormalized:
            tr = float(np.trace(mat).real)
            if abs(tr - 1.0) > 1e-10:
                raise ValueError(f"density matrix trace is {tr}, expected 1")
        if self.require_positive:
            lo = float(np.linalg.eigvalsh(mat)[0])
            if lo < PSD_FLOOR:
                raise ValueError(f"density matrix has negative eigenvalue {lo}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


def basis_ket(label) -> StateVector:
    """Return the defining superposition for a named basis state."""
    lab = _resolve_label(label)
    return StateVector(_DEGREE_KETS[lab.degree][lab.name].copy(), (lab.degree,))


def tensor(u, v):
    """Kronecker product of two states of the same kind.

    Basis factors concatenate; norm (or trace) multiplies.
    """
    if isinstance(u, StateVector) and isinstance(v, StateVector):
        return StateVector(
            np.kron(u.amplitudes, v.amplitudes),
            u.basis + v.basis,
            unnormalized=u.unnormalized or v.unnormalized,
        )
    if isinstance(u, DensityMatrix) and isinstance(v, DensityMatrix):
        return DensityMatrix(
            np.kron(u.matrix, v.matrix),
            u.basis + v.basis,
            unnormalized=u.unnormalized or v.unnormalized,
            require_positive=u.require_positive and v.require_positive,
        )
    raise TypeError("tensor requires two StateVectors or two DensityMatrices")


def density_from_ket(psi: StateVector) -> DensityMatrix:
    """Rank-1 projector |psi><psi| of a normalized ket."""
    if psi.unnormalized or abs(psi.norm_squared() - 1.0) > 1e-10:
        raise ValueError("density_from_ket requires a normalized state vector")
    return DensityMatrix(
        np.outer(psi.amplitudes, psi.amplitudes.conj()), psi.basis
    )


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Trace out every tensor factor not listed in ``keep`` (indices kept in order)."""
    keep = tuple(keep)
    n = len(rho.basis)
    if any(k < 0 or k >= n for k in keep):
        raise IndexError(f"factor index out of range for {n} factors: {keep}")
    if len(set(keep)) != len(keep):
        raise ValueError("duplicate factor indices in keep")
    keep = tuple(sorted(keep))
    dims = [FACTOR_DIMS[f] for f in rho.basis]
    work = rho.matrix.reshape(dims + dims)
    removed = 0
    for idx in range(n):
        if idx in keep:
            continue
        axis = idx - removed
        nleft = work.ndim // 2
        work = np.trace(work, axis1=axis, axis2=axis + nleft)
        removed += 1
    kept_dim = int(np.prod([dims[k] for k in keep])) if keep else 1
    out = work.reshape(kept_dim, kept_dim)
    return DensityMatrix(
        out,
        tuple(rho.basis[k] for k in keep),
        unnormalized=rho.unnormalized,
        require_positive=rho.require_positive,
    )


def project_to_physical(rho, basis: Iterable[str] | None = None) -> DensityMatrix:
    """Clamp negative eigenvalues to zero and renormalize the trace to one.

    Accepts a DensityMatrix or a raw Hermitian ndarray (then ``basis`` names
    its factors).  Idempotent on matrices that are already physical.
    """
    if isinstance(rho, DensityMatrix):
        mat = rho.matrix
        basis = rho.basis
    else:
        mat = np.asarray(rho, dtype=complex)
        if basis is None:
            if mat.shape == (4, 4):
                basis = (POLARIZATION, OAM_O2)
            elif mat.shape == (2, 2):
                basis = (POLARIZATION,)
            else:
                raise ValueError("basis factors required for raw matrix input")
    if np.max(np.abs(mat - mat.conj().T)) > 1e-9:
        raise ValueError("project_to_physical requires a Hermitian matrix")
    w, vecs = np.linalg.eigh((mat + mat.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    total = float(w.sum())
    if total <= 0.0:
        raise DegenerateInputError("matrix has no positive spectral weight")
    w /= total
    out = (vecs * w) @ vecs.conj().T
    out = (out + out.conj().T) / 2
    return DensityMatrix(out, tuple(basis))


def matrix_to_json(rho: DensityMatrix) -> dict:
    """Serialize a matrix as row-major [re, im] entry pairs plus factor labels."""
    entries = [
        [[float(z.real), float(z.imag)] for z in row] for row in rho.matrix
    ]
    return {"matrix": entries, "basis": list(rho.basis)}


def matrix_from_json(data: dict, **kwargs) -> DensityMatrix:
    rows = data["matrix"]
    mat = np.array(
        [[complex(re, im) for re, im in row] for row in rows], dtype=complex
    )
    return DensityMatrix(mat, tuple(data["basis"]), **kwargs)
