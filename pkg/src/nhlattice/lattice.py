"""Lattice model builders for the four-site loss-patterned chain.

The unit cell has four sites with uniform nearest-neighbor hopping ``J``
(units 1/um) and a per-site gain/loss pattern ``(i*g1, -i*g2, -i*g1, i*g2)``
plus a uniform background loss ``-i*g0``, all dimensionless in units of J.
Purely dissipative realizations keep every on-site imaginary part <= 0,
which requires ``g0 >= max(|g1|, |g2|)``.

Sign of ``g1*g2`` selects the phase: negative is dissipative trivial (II),
positive is dissipative topological (III), all-zero is the lossless metal (I).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError

#: Default uniform real propagation constant, 1/um.
DEFAULT_RE_BETA = 6.6

SITES_PER_CELL = 4

PHASE_LOSSLESS = "I"
PHASE_TRIVIAL = "II"
PHASE_TOPOLOGICAL = "III"
PHASE_CUSTOM = "custom"


@dataclass(frozen=True)
class LossPattern:
    """Per-cell on-site gain/loss amplitudes, dimensionless (units of J).

    ``custom_cell`` replaces the four-site gain/loss pattern verbatim; the
    uniform background loss ``g0`` is still applied on top of it.
    """

    phase: str
    g0: float = 0.0
    g1: float = 0.0
    g2: float = 0.0
    custom_cell: Optional[Tuple[complex, complex, complex, complex]] = None

    def __post_init__(self):
        if self.g0 < 0:
            raise ConfigurationError(f"g0 must be >= 0, got {self.g0}")
        if self.phase == PHASE_CUSTOM:
            if self.custom_cell is None:
                raise ConfigurationError("custom pattern requires custom_cell")
            if len(self.custom_cell) != SITES_PER_CELL:
                raise ConfigurationError("custom_cell must hold 4 values")
            object.__setattr__(
                self, "custom_cell", tuple(complex(c) for c in self.custom_cell)
            )
            return
        if self.custom_cell is not None:
            raise ConfigurationError("custom_cell is only valid with phase='custom'")
        if self.phase == PHASE_LOSSLESS:
            if self.g0 != 0 or self.g1 != 0 or self.g2 != 0:
                raise ConfigurationError("phase I requires g0 = g1 = g2 = 0")
        elif self.phase == PHASE_TRIVIAL:
            if not self.g1 * self.g2 < 0:
                raise ConfigurationError("phase II requires g1*g2 < 0")
        elif self.phase == PHASE_TOPOLOGICAL:
            if not self.g1 * self.g2 > 0:
                raise ConfigurationError("phase III requires g1*g2 > 0")
        else:
            raise ConfigurationError(f"unknown phase {self.phase!r}")

    @classmethod
    def lossless(cls) -> "LossPattern":
        """Phase I: no loss anywhere."""
        return cls(PHASE_LOSSLESS)

    @classmethod
    def trivial(cls, g: float) -> "LossPattern":
        """Phase II with the symmetric choice g0 = g1 = |g2| = g, g2 = -g."""
        return cls(PHASE_TRIVIAL, g0=g, g1=g, g2=-g)

    @classmethod
    def topological(cls, g: float) -> "LossPattern":
        """Phase III with the symmetric choice g0 = g1 = g2 = g."""
        return cls(PHASE_TOPOLOGICAL, g0=g, g1=g, g2=g)

    @classmethod
    def from_g(cls, g0: float, g1: float, g2: float) -> "LossPattern":
        """Classify an explicit (g0, g1, g2) triple by the sign of g1*g2."""
        if g0 == g1 == g2 == 0:
            return cls(PHASE_LOSSLESS)
        if g1 * g2 == 0:
            raise ConfigurationError(
                "g1*g2 = 0 with nonzero loss has no phase label; use a custom cell"
            )
        phase = PHASE_TOPOLOGICAL if g1 * g2 > 0 else PHASE_TRIVIAL
        return cls(phase, g0=g0, g1=g1, g2=g2)

    @classmethod
    def custom(cls, cell: Sequence[complex], g0: float = 0.0) -> "LossPattern":
        return cls(PHASE_CUSTOM, g0=g0, custom_cell=tuple(cell))


def cell_diagonal(pattern: LossPattern) -> np.ndarray:
    """On-site constants of one unit cell, complex, in units of J.

    For the preset phases this is
    ``(i*g1 - i*g0, -i*g2 - i*g0, -i*g1 - i*g0, i*g2 - i*g0)``; with the
    symmetric choices it reduces to ``-2i*g*(0,0,1,1)`` (II) and
    ``-2i*g*(0,1,1,0)`` (III).
    """
    if pattern.phase == PHASE_CUSTOM:
        base = np.array(pattern.custom_cell, dtype=complex)
    else:
        g1, g2 = pattern.g1, pattern.g2
        base = np.array([1j * g1, -1j * g2, -1j * g1, 1j * g2], dtype=complex)
    return base - 1j * pattern.g0 * np.ones(SITES_PER_CELL)


DomainList = Tuple[Tuple[LossPattern, int], ...]


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry and loss pattern of a finite chain.

    ``pattern`` is either a single :class:`LossPattern` (tiled over the chain,
    truncating the last cell site by site when ``n_sites`` is not a multiple
    of 4) or a tuple of ``(pattern, n_cells)`` domains laid out left to right.
    ``interface_index`` is the 1-based index of the first site of the second
    domain, recorded by :func:`interface_lattice`.
    """

    n_sites: int
    hopping_J: float
    spacing_d: float
    pattern: Union[LossPattern, DomainList]
    re_beta: float = DEFAULT_RE_BETA
    interface_index: Optional[int] = None

    def __post_init__(self):
        if self.n_sites < 1:
            raise ConfigurationError("n_sites must be >= 1")
        if self.hopping_J <= 0:
            raise ConfigurationError("hopping_J must be > 0")
        if self.spacing_d <= 0:
            raise ConfigurationError("spacing_d must be > 0")
        if not self.is_uniform:
            n_domain = SITES_PER_CELL * sum(n for _, n in self.pattern)
            if n_domain != self.n_sites:
                raise ConfigurationError(
                    f"domain cells cover {n_domain} sites, n_sites is {self.n_sites}"
                )
        if self.interface_index is not None and not (
            1 <= self.interface_index <= self.n_sites
        ):
            raise ConfigurationError("interface_index out of range")

    @property
    def is_uniform(self) -> bool:
        return isinstance(self.pattern, LossPattern)

    def onsite_values(self) -> np.ndarray:
        """Per-site on-site constants in units of J, length ``n_sites``."""
        if self.is_uniform:
            cell = cell_diagonal(self.pattern)
            reps = -(-self.n_sites // SITES_PER_CELL)
            return np.tile(cell, reps)[: self.n_sites]
        parts = [
            np.tile(cell_diagonal(p), n) for p, n in self.pattern
        ]
        return np.concatenate(parts)

    def site_positions(self) -> np.ndarray:
        """Transverse site coordinates x_j = (j - 1) * d in um, 1-based sites."""
        return np.arange(self.n_sites) * self.spacing_d

    def single_pattern(self) -> LossPattern:
        if not self.is_uniform:
            raise ConfigurationError("operation requires a single-domain lattice")
        return self.pattern


@dataclass(frozen=True)
class ComplexMatrix:
    """A square complex matrix together with its unit convention."""

    matrix: np.ndarray
    units: str = "1/um"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigurationError(f"matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ConfigurationError("matrix entries must be finite")
        object.__setattr__(self, "matrix", m)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def to_csv(self, path):
        """Row-major CSV dump with re,im column pairs."""
        from .serialization import matrix_to_csv

        return matrix_to_csv(path, self.matrix)


def bloch_hamiltonian(k: float, spec: LatticeSpec, units: str = "J") -> ComplexMatrix:
    """4x4 Bloch matrix of the infinite lattice at wave number ``k`` (1/um).

    The corner entries carry the cell-periodic phases ``exp(-4ikd)`` and
    ``exp(+4ikd)``, so the matrix is periodic in k with period pi/(2d).
    ``units='J'`` returns the dimensionless matrix; ``units='1/um'`` scales
    by ``hopping_J``. The uniform ``re_beta`` offset is not included: it
    shifts all bands identically and carries no band-structure information.
    """
    pattern = spec.single_pattern()
    phase = np.exp(4j * k * spec.spacing_d)
    h = np.array(
        [
            [0, 1, 0, 1 / phase],
            [1, 0, 1, 0],
            [0, 1, 0, 1],
            [phase, 0, 1, 0],
        ],
        dtype=complex,
    )
    h[np.diag_indices(4)] = cell_diagonal(pattern)
    if units == "J":
        return ComplexMatrix(h, units="J")
    if units == "1/um":
        return ComplexMatrix(h * spec.hopping_J, units="1/um")
    raise ConfigurationError(f"unknown units {units!r}")


def real_space_hamiltonian(spec: LatticeSpec) -> ComplexMatrix:
    """Open-boundary chain Hamiltonian, n_sites x n_sites, in 1/um.

    Tridiagonal with hopping ``J`` off the diagonal and on-site constants
    ``beta_j = re_beta + J * onsite_j``. Hermitian iff the lattice is
    lossless.
    """
    n = spec.n_sites
    diag = spec.re_beta + spec.hopping_J * spec.onsite_values()
    h = np.diag(diag.astype(complex))
    off = spec.hopping_J * np.ones(n - 1)
    h += np.diag(off, k=1) + np.diag(off, k=-1)
    return ComplexMatrix(h, units="1/um")


def interface_lattice(
    left: LossPattern,
    right: LossPattern,
    n_left_cells: int,
    n_right_cells: int,
    spec: LatticeSpec,
) -> LatticeSpec:
    """Join two loss domains into one chain, recording the interface site.

    The interface site is the first site of the first right-domain cell,
    1-based. Hopping, spacing and ``re_beta`` are taken from ``spec``.
    """
    if n_left_cells < 1 or n_right_cells < 1:
        raise ConfigurationError("both interface domains need at least one cell")
    n_sites = SITES_PER_CELL * (n_left_cells + n_right_cells)
    return LatticeSpec(
        n_sites=n_sites,
        hopping_J=spec.hopping_J,
        spacing_d=spec.spacing_d,
        pattern=((left, n_left_cells), (right, n_right_cells)),
        re_beta=spec.re_beta,
        interface_index=SITES_PER_CELL * n_left_cells + 1,
    )
