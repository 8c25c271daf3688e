"""Environmentally-extended multi-regional input-output model.

The model follows the standard demand-pull formulation::

    A = Z diag(x)^-1          technical coefficients
    L = (I - A)^-1            Leontief inverse
    q = f diag(x)^-1          direct intensities
    E = Q L Y                 n x n embodied flows between regions

where ``Q`` stacks one intensity row per region, each row holding the
intensities of that region's sectors and zeros elsewhere. Row sums of ``E``
plus household direct pressure give production-based accounts (PBA), column
sums plus household pressure give consumption-based accounts (CBA).

All heavy lifting goes through one factorization of ``(I - A)`` which is
reused for every extension and every column of ``Y``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import units
from ._validation import check_labels, check_matrix, check_nonnegative, check_vector
from .exceptions import (
    ConfigurationError,
    DegenerateEntity,
    DegenerateInput,
    InvalidInput,
    InvalidPressure,
    NonProductiveEconomy,
    StructuralError,
)

BALANCE_TOL = 1e-6
RESIDUAL_TOL = 1e-9
SPARSE_DENSITY_THRESHOLD = 0.10


@dataclass(frozen=True, eq=False)
class MrioTable:
    """Symmetric industry-by-industry MRIO table.

    ``Z`` is (nm x nm), ``Y`` is (nm x n) with one final-demand column per
    consuming region and ``x`` is gross output. Rows and columns are ordered
    region-major: all sectors of the first region, then the second, ...

    Negative final demand (inventory changes) is accepted; ``Z`` and ``x``
    must be non-negative.
    """

    regions: tuple
    sectors: tuple
    Z: np.ndarray
    Y: np.ndarray
    x: np.ndarray
    balance_tol: float = BALANCE_TOL

    def __post_init__(self):
        regions = check_labels(self.regions, "regions")
        sectors = check_labels(self.sectors, "sectors")
        nm = len(regions) * len(sectors)
        Z = check_matrix(self.Z, "Z", shape=(nm, nm), nonnegative=True)
        Y = check_matrix(self.Y, "Y", shape=(nm, len(regions)))
        x = check_vector(self.x, "x", length=nm, nonnegative=True)
        for arr in (Z, Y, x):
            arr.setflags(write=False)
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "sectors", sectors)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "x", x)
        self._check_balance()

    def _check_balance(self):
        residual = np.abs(self.x - self.Z.sum(axis=1) - self.Y.sum(axis=1))
        bad = np.flatnonzero(residual > self.balance_tol * np.maximum(1.0, self.x))
        if bad.size:
            rows = ", ".join(f"{i} {self.labels[i]}" for i in bad[:10])
            raise StructuralError(
                f"row balance violated (tol {self.balance_tol:g}) at rows: {rows}"
                + (" ..." if bad.size > 10 else "")
            )

    @property
    def n_regions(self):
        return len(self.regions)

    @property
    def n_sectors(self):
        return len(self.sectors)

    @property
    def labels(self):
        return [(r, s) for r in self.regions for s in self.sectors]

    def final_demand_total(self):
        return self.Y.sum(axis=1)


@dataclass(frozen=True, eq=False)
class ExtensionAccount:
    """Satellite account: direct pressure per region-sector plus households."""

    name: str
    unit: str
    f: np.ndarray
    f_hh: np.ndarray

    def __post_init__(self):
        f = check_vector(self.f, f"{self.name}.f")
        f_hh = check_vector(self.f_hh, f"{self.name}.f_hh")
        f.setflags(write=False)
        f_hh.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "f_hh", f_hh)
        object.__setattr__(self, "unit", units.canonical(self.unit))

    def check_against(self, table: MrioTable):
        nm = table.n_regions * table.n_sectors
        if self.f.shape[0] != nm:
            raise StructuralError(f"{self.name}: f has length {self.f.shape[0]}, table has {nm} rows")
        if self.f_hh.shape[0] != table.n_regions:
            raise StructuralError(
                f"{self.name}: f_hh has length {self.f_hh.shape[0]}, table has {table.n_regions} regions"
            )
        orphan = np.flatnonzero((table.x == 0) & (self.f != 0))
        if orphan.size:
            labels = [table.labels[i] for i in orphan[:5]]
            raise InvalidPressure(f"{self.name}: pressure recorded in zero-output sectors {labels}")

    def scaled(self, factor):
        return ExtensionAccount(self.name, self.unit, self.f * factor, self.f_hh * factor)


@dataclass(frozen=True, eq=False)
class FootprintAccounts:
    name: str
    unit: str
    regions: tuple
    E: np.ndarray
    pba: np.ndarray
    cba: np.ndarray
    sectoral_pba: np.ndarray
    sectoral_cba: np.ndarray
    intensity: np.ndarray = field(repr=False)
    multipliers: np.ndarray = field(repr=False)

    def by_region(self, perspective):
        vec = {"pba": self.pba, "cba": self.cba}[perspective.lower()]
        return dict(zip(self.regions, vec.tolist()))


def technical_coefficients(table: MrioTable) -> np.ndarray:
    Z, x = np.asarray(table.Z, dtype=float), np.asarray(table.x, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1] or Z.shape[1] != x.shape[0]:
        raise StructuralError(f"Z shape {Z.shape} incompatible with x length {x.shape}")
    inv_x = np.divide(1.0, x, out=np.zeros_like(x), where=x != 0)
    return Z * inv_x[np.newaxis, :]


def _spectral_radius(A):
    n = A.shape[0]
    if n <= 500:
        return float(np.max(np.abs(np.linalg.eigvals(A)))) if n else 0.0
    vals = scipy.sparse.linalg.eigs(scipy.sparse.csr_matrix(A), k=1, which="LM", return_eigenvectors=False)
    return float(np.abs(vals[0]))


def check_productive(A):
    """Raise ``NonProductiveEconomy`` unless the spectral radius of A is < 1.

    Column sums below one are sufficient (Perron bound) and cheap, so the
    eigenvalue computation only runs when some column sum reaches one.
    """
    col_sums = np.asarray(A.sum(axis=0)).ravel()
    if col_sums.size == 0 or col_sums.max() < 1.0:
        return
    rho = _spectral_radius(np.asarray(A))
    if rho >= 1.0:
        offending = {int(j): float(col_sums[j]) for j in np.flatnonzero(col_sums >= 1.0)}
        raise NonProductiveEconomy(
            f"spectral radius of A is {rho:.6g} >= 1; column sums >= 1: {offending}",
            column_sums=offending,
        )


class LeontiefSolver:
    """One LU factorization of ``I - A`` reused for every right-hand side.

    ``sparse='auto'`` switches to a sparse LU when fewer than 10% of the
    entries of A are nonzero.
    """

    def __init__(self, A, sparse: bool | Literal["auto"] = "auto"):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise StructuralError(f"A must be square, got shape {A.shape}")
        check_productive(A)
        self.n = A.shape[0]
        density = np.count_nonzero(A) / A.size if A.size else 1.0
        self.sparse = bool(density < SPARSE_DENSITY_THRESHOLD) if sparse == "auto" else bool(sparse)
        self._A = A
        I_minus_A = np.eye(self.n) - A
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            try:
                if self.sparse:
                    self._lu = scipy.sparse.linalg.splu(scipy.sparse.csc_matrix(I_minus_A))
                else:
                    self._lu = scipy.linalg.lu_factor(I_minus_A, check_finite=False)
            except (RuntimeError, scipy.linalg.LinAlgError, Warning) as exc:
                col_sums = {int(j): float(s) for j, s in enumerate(A.sum(axis=0)) if s >= 1.0}
                raise NonProductiveEconomy(f"I - A is singular: {exc}", column_sums=col_sums) from None

    def solve(self, B):
        """Return ``L @ B`` without forming L."""
        B = np.asarray(B, dtype=float)
        if self.sparse:
            X = self._lu.solve(B)
        else:
            X = scipy.linalg.lu_solve(self._lu, B, check_finite=False)
        self._check_residual(X, B, transposed=False)
        return X

    def solve_transposed(self, b):
        """Return ``b @ L`` for a row vector (or rows) ``b``."""
        b = np.asarray(b, dtype=float)
        if self.sparse:
            X = self._lu.solve(b.T, trans="T").T
        else:
            X = scipy.linalg.lu_solve(self._lu, b.T, trans=1, check_finite=False).T
        self._check_residual(X.T, b.T, transposed=True)
        return X

    def inverse(self):
        return self.solve(np.eye(self.n))

    def _check_residual(self, X, B, transposed):
        M = np.eye(self.n) - self._A
        if transposed:
            M = M.T
        resid = M @ X - B
        scale = max(1.0, float(np.max(np.abs(B))) if B.size else 1.0)
        if not np.all(np.isfinite(X)) or (resid.size and np.max(np.abs(resid)) > RESIDUAL_TOL * scale):
            raise NonProductiveEconomy(
                f"Leontief solve residual {np.max(np.abs(resid)):.3g} exceeds {RESIDUAL_TOL:g}"
            )


def leontief_inverse(A) -> np.ndarray:
    """Dense ``(I - A)^-1`` with productivity and residual checks."""
    solver = LeontiefSolver(A, sparse=False)
    L = solver.inverse()
    # A >= 0 with rho(A) < 1 implies L >= 0; a negative entry means the
    # economy is not productive even if the solve went through.
    if L.size and L.min() < -RESIDUAL_TOL * max(1.0, float(L.max())):
        raise NonProductiveEconomy("Leontief inverse has negative entries")
    return L


def footprint_accounts(
    table: MrioTable,
    ext: ExtensionAccount,
    unit: str | None = None,
    solver: LeontiefSolver | None = None,
) -> FootprintAccounts:
    """PBA/CBA and sectoral accounts for one extension.

    Pass a prebuilt ``solver`` to share the factorization across extensions.
    """
    if unit is not None and units.canonical(unit) != ext.unit:
        raise ConfigurationError(
            f"extension {ext.name!r} is in {ext.unit!r}, requested output unit {unit!r}"
        )
    ext.check_against(table)
    if solver is None:
        solver = LeontiefSolver(technical_coefficients(table))
    n, m = table.n_regions, table.n_sectors
    x = table.x
    q = np.divide(ext.f, x, out=np.zeros_like(ext.f), where=x != 0)

    LY = solver.solve(table.Y)
    # Q L Y: each region's intensity row only picks up its own sectors.
    E = (q[:, np.newaxis] * LY).reshape(n, m, n).sum(axis=1)
    multipliers = solver.solve_transposed(q)
    return FootprintAccounts(
        name=ext.name,
        unit=ext.unit,
        regions=table.regions,
        E=E,
        pba=E.sum(axis=1) + ext.f_hh,
        cba=E.sum(axis=0) + ext.f_hh,
        sectoral_pba=ext.f.copy(),
        sectoral_cba=multipliers * table.final_demand_total(),
        intensity=q,
        multipliers=multipliers,
    )


def per_capita(values, population) -> np.ndarray:
    values = check_vector(values, "values")
    population = check_vector(population, "population", length=values.shape[0])
    check_nonnegative(population, "population")
    degenerate = np.flatnonzero((population == 0) & (values != 0))
    if degenerate.size:
        raise DegenerateEntity(f"zero population with nonzero value at entities {degenerate.tolist()}")
    return np.divide(values, population, out=np.zeros_like(values), where=population != 0)


NormalizationMode = Literal["global_population_weighted", "country_mean", "subset_mean"]


def normalized_comparison(
    per_capita_values,
    mode: NormalizationMode,
    population=None,
    subset: Sequence[int] | np.ndarray | None = None,
) -> np.ndarray:
    """Ratio of each entity's per-capita value to a reference average.

    ``global_population_weighted`` uses total pressure / total population,
    ``country_mean`` the unweighted mean of per-capita values and
    ``subset_mean`` the unweighted mean over ``subset`` (indices or a mask).
    """
    pc = check_vector(per_capita_values, "per_capita_values")
    if mode == "global_population_weighted":
        if population is None:
            raise ConfigurationError("population-weighted normalization needs population")
        pop = check_vector(population, "population", length=pc.shape[0], nonnegative=True)
        total_pop = math.fsum(pop)
        if total_pop <= 0:
            raise DegenerateInput("total population is zero")
        average = math.fsum(pc * pop) / total_pop
    elif mode == "country_mean":
        if pc.size == 0:
            raise ConfigurationError("no entities to average")
        average = math.fsum(pc) / pc.size
    elif mode == "subset_mean":
        if subset is None:
            raise ConfigurationError("subset_mean needs a subset")
        sel = np.asarray(subset)
        chosen = pc[sel] if sel.size else sel
        if chosen.size == 0:
            raise ConfigurationError("empty subset")
        average = math.fsum(chosen) / chosen.size
    else:
        raise ConfigurationError(f"unknown normalization mode {mode!r}")
    if not average > 0:
        raise DegenerateInput(f"reference average is {average!r}, must be > 0")
    return pc / average


class FootprintModel(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` factorizes the table, ``transform`` maps
    extensions to footprint accounts.

    Parameters
    ----------
    sparse : bool or "auto"
        Use a sparse LU. "auto" picks sparse below 10% nonzero density.
    """

    def __init__(self, sparse="auto"):
        self.sparse = sparse

    def fit(self, X: MrioTable, y=None):
        if not isinstance(X, MrioTable):
            raise InvalidInput(f"FootprintModel.fit expects an MrioTable, got {type(X).__name__}")
        self.table_ = X
        self.A_ = technical_coefficients(X)
        self.solver_ = LeontiefSolver(self.A_, sparse=self.sparse)
        self.regions_ = X.regions
        self.sectors_ = X.sectors
        return self

    def transform(self, X):
        """Accounts for one ``ExtensionAccount`` or a list of them."""
        check_is_fitted(self, "solver_")
        if isinstance(X, ExtensionAccount):
            return footprint_accounts(self.table_, X, solver=self.solver_)
        return [footprint_accounts(self.table_, ext, solver=self.solver_) for ext in X]

    @property
    def leontief_(self):
        check_is_fitted(self, "solver_")
        return self.solver_.inverse()
