"""Loda, RS-Hash and xStream streaming ensembles.

Each detector is R seeded sub-detectors built from the same four blocks
(projection, core table, sliding window, score) and reduced by averaging.
Scores are negative log-likelihoods: higher means more anomalous.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels_numba, kernels_numpy
from ._accel import resolve_backend
from .core import SeededRng, derive_seed, q_from_real

KINDS = ("loda", "rshash", "xstream")

# Sub-detectors per slot by detector kind.
CAPACITY = {"loda": 35, "rshash": 25, "xstream": 20}

DEFAULT_WINDOW = 128
CALIBRATION_MARGIN = 0.05


class NotCalibratedError(RuntimeError):
    pass


def log2_table(window: int) -> np.ndarray:
    """log2(i) for i in 0..window+1; entry 0 is unused and set to 0."""
    lut = np.zeros(window + 2)
    lut[1:] = np.log2(np.arange(1, window + 2, dtype=np.float64))
    return lut


def windower(scalars, d: int) -> np.ndarray:
    """Group a flat scalar stream into consecutive d-dimensional samples."""
    if d <= 0:
        raise ValueError("dimension must be positive")
    scalars = np.asarray(scalars, dtype=np.float64).reshape(-1)
    n = scalars.shape[0] // d
    if n * d != scalars.shape[0]:
        warnings.warn(
            f"dropping {scalars.shape[0] - n * d} trailing value(s) of a partial sample",
            stacklevel=2,
        )
    return scalars[: n * d].reshape(n, d)


def widen(lo: np.ndarray, hi: np.ndarray, margin: float = CALIBRATION_MARGIN):
    """Widen [lo, hi] by ``margin`` of its span; degenerate spans use the magnitude."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    span = hi - lo
    fallback = margin * np.maximum(np.maximum(np.abs(lo), np.abs(hi)), 1.0)
    m = np.where(span > 0, margin * span, fallback)
    return lo - m, hi + m


@dataclass
class LodaParams:
    R: int
    W: int
    bins: int
    proj: np.ndarray
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None


@dataclass
class RsHashParams:
    R: int
    W: int
    w: int
    mod: int
    alpha: np.ndarray
    f: np.ndarray
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None


@dataclass
class XStreamParams:
    R: int
    W: int
    w: int
    mod: int
    K: int
    bins: float
    proj: np.ndarray
    offset: np.ndarray  # bin offset as a fraction of delta, in [0, 1)
    delta: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None


class EnsembleDetector:
    """Common streaming contract for the three ensembles.

    Parameters
    ----------
    dimension : int
        Input dimension d.
    n_estimators : int
        Ensemble size R.
    window : int
        Sliding-window length W.
    seed : int
        Master seed; sub-detector r draws its parameters from
        ``derive_seed(seed, first_index + r)``.
    first_index : int
        Offset into the master seed's sub-seed sequence, so several
        smaller ensembles can partition one large one exactly.
    fixed_point : bool
        Run the Q16.16 kernels instead of float64.
    backend : {"numba", "numpy"}, optional
        Kernel implementation; defaults to the ``SEAD_NUMBA`` setting.
    """

    kind = ""
    rows = 1
    _n_scratch = 0

    def __init__(self, dimension, n_estimators, window=DEFAULT_WINDOW, seed=0,
                 first_index=0, fixed_point=False, backend=None):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        if n_estimators < 1:
            raise ValueError("ensemble size must be >= 1")
        if window < 2:
            raise ValueError("window must be >= 2")
        self.dimension = int(dimension)
        self.n_estimators = int(n_estimators)
        self.window = int(window)
        self.seed = int(seed)
        self.first_index = int(first_index)
        self.fixed_point = bool(fixed_point)
        self.backend = resolve_backend(backend)
        self._k = kernels_numba if self.backend == "numba" else kernels_numpy
        self.lut = log2_table(self.window)
        self.lutq = q_from_real(self.lut)
        self.inv_rq = q_from_real(1.0 / self.n_estimators)
        self.params = self._draw(
            [SeededRng(derive_seed(self.seed, self.first_index + r))
             for r in range(self.n_estimators)]
        )
        self.calibrated = False
        self.counts = np.zeros((self.n_estimators, self.rows, self.columns), dtype=np.int64)
        self.ring = np.zeros((self.window, self.n_estimators, self.rows), dtype=np.int64)
        self.head = 0
        self.occupancy = 0
        self._sub = np.empty(self.n_estimators,
                             dtype=np.int64 if self.fixed_point else np.float64)

    # subclasses provide: _draw, columns, _calibrate, _step_args, _run_args

    def _draw(self, rngs):
        raise NotImplementedError

    @property
    def columns(self) -> int:
        raise NotImplementedError

    def calibrate(self, prefix) -> "EnsembleDetector":
        """Fix the range-dependent parameters from a prefix of the stream."""
        X = np.atleast_2d(np.asarray(prefix, dtype=np.float64))
        if X.shape[0] == 0 or X.size == 0:
            raise ValueError("calibration prefix is empty")
        if X.shape[1] != self.dimension:
            raise ValueError(
                f"dimension mismatch: detector has d={self.dimension}, prefix has {X.shape[1]}"
            )
        if X.shape[0] < self.window:
            warnings.warn(
                f"calibration prefix of {X.shape[0]} samples is shorter than the window "
                f"({self.window})",
                stacklevel=2,
            )
        self._calibrate(X)
        self._prepare()
        self.calibrated = True
        return self

    def _prepare(self):
        pass

    def _check_ready(self, x):
        if not self.calibrated:
            raise NotCalibratedError(f"{self.kind} detector is not calibrated")
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape[-1] != self.dimension:
            raise ValueError(
                f"dimension mismatch: detector has d={self.dimension}, got {x.shape[-1]}"
            )
        return x

    def _advance(self):
        self.head = (self.head + 1) % self.window
        self.occupancy = min(self.occupancy + 1, self.window)

    def process(self, features) -> float:
        """Score one sample and admit it into the window."""
        return self.process_sub(features)[0]

    def process_sub(self, features):
        """Like :meth:`process` but also returns the R sub-scores."""
        x = self._check_ready(features).reshape(-1)
        if self.fixed_point:
            raw = self._step_q(q_from_real(x))
            score = raw / 65536.0
            sub = self._sub / 65536.0
        else:
            score = float(self._step(x))
            sub = self._sub.copy()
        self._advance()
        return score, sub

    def score_stream(self, X) -> np.ndarray:
        """Score every row of ``X`` in order; same result as repeated :meth:`process`."""
        X = self._check_ready(X)
        X = np.ascontiguousarray(np.atleast_2d(X))
        if self.fixed_point:
            out = np.empty(X.shape[0], dtype=np.int64)
            self.head, self.occupancy = self._run_q(q_from_real(X), out)
            return out / 65536.0
        out = np.empty(X.shape[0])
        self.head, self.occupancy = self._run(X, out)
        return out

    def reset(self):
        """Clear the window; calibration is kept."""
        self.counts[:] = 0
        self.ring[:] = 0
        self.head = 0
        self.occupancy = 0

    def __repr__(self):
        mode = "q16" if self.fixed_point else "real"
        return (f"{type(self).__name__}(d={self.dimension}, R={self.n_estimators}, "
                f"W={self.window}, seed={self.seed}, mode={mode})")


class Loda(EnsembleDetector):
    """Random 1-D projection + sliding histogram.

    Sub-score ``-log2((c + 1) / (n + 1))`` where ``c`` is the count in the
    sample's bin and ``n`` the number of samples in the window.
    """

    kind = "loda"

    def __init__(self, dimension, n_estimators=CAPACITY["loda"], window=DEFAULT_WINDOW,
                 bins=20, seed=0, first_index=0, fixed_point=False, backend=None):
        if bins < 2:
            raise ValueError("bins must be >= 2")
        self.bins = int(bins)
        super().__init__(dimension, n_estimators, window, seed, first_index, fixed_point,
                         backend)

    @property
    def columns(self):
        return self.bins

    def _draw(self, rngs):
        proj = np.stack([g.normal(self.dimension) for g in rngs])
        return LodaParams(self.n_estimators, self.window, self.bins, proj)

    def project(self, X):
        """Projected values, shape (n, R), summed in input-dimension order."""
        X = np.atleast_2d(X)
        p = np.zeros((X.shape[0], self.n_estimators))
        for j in range(self.dimension):
            p += X[:, j : j + 1] * self.params.proj[:, j]
        return p

    def _calibrate(self, X):
        p = self.project(X)
        self.params.lo, self.params.hi = widen(p.min(axis=0), p.max(axis=0))

    def _prepare(self):
        P = self.params
        self._scale = self.bins / (P.hi - P.lo)
        self._projq = q_from_real(P.proj)
        self._loq = q_from_real(P.lo)
        self._scaleq = q_from_real(self._scale)

    def _step(self, x):
        P = self.params
        return self._k.loda_step(x, P.proj, P.lo, self._scale, self.bins, self.counts,
                                 self.ring, self.head, self.occupancy, self.lut, self._sub)

    def _run(self, X, out):
        P = self.params
        return self._k.loda_run(X, P.proj, P.lo, self._scale, self.bins, self.counts,
                                self.ring, self.head, self.occupancy, self.lut, out)

    def _step_q(self, xq):
        return self._k.loda_step_q(xq, self._projq, self._loq, self._scaleq, self.bins,
                                   self.counts, self.ring, self.head, self.occupancy,
                                   self.lutq, self.inv_rq, self._sub)

    def _run_q(self, XQ, out):
        return self._k.loda_run_q(XQ, self._projq, self._loq, self._scaleq, self.bins,
                                  self.counts, self.ring, self.head, self.occupancy,
                                  self.lutq, self.inv_rq, out)


class RSHash(EnsembleDetector):
    """Randomly shifted and scaled grid codes hashed into a sliding CMS.

    Sub-score ``-log2(1 + min_row c_row)``.
    """

    kind = "rshash"

    def __init__(self, dimension, n_estimators=CAPACITY["rshash"], window=DEFAULT_WINDOW,
                 rows=2, mod=128, seed=0, first_index=0, fixed_point=False, backend=None):
        if rows < 1 or mod < 1:
            raise ValueError("rows and mod must be positive")
        self.rows = int(rows)
        self.mod = int(mod)
        super().__init__(dimension, n_estimators, window, seed, first_index, fixed_point,
                         backend)

    @property
    def columns(self):
        return self.mod

    def _draw(self, rngs):
        low = 1.0 / math.sqrt(self.window)
        f = np.empty(self.n_estimators)
        alpha = np.empty((self.n_estimators, self.dimension))
        for r, g in enumerate(rngs):
            f[r] = g.uniform(low=low, high=1.0 - low)
            alpha[r] = g.uniform(self.dimension, high=f[r])
        return RsHashParams(self.n_estimators, self.window, self.rows, self.mod, alpha, f)

    def _calibrate(self, X):
        self.params.lo, self.params.hi = widen(X.min(axis=0), X.max(axis=0))

    def _prepare(self):
        P = self.params
        self._inv_range = 1.0 / (P.hi - P.lo)
        self._inv_f = 1.0 / P.f
        self._loq = q_from_real(P.lo)
        self._inv_rangeq = q_from_real(self._inv_range)
        self._alphaq = q_from_real(P.alpha)
        self._inv_fq = q_from_real(self._inv_f)
        self._key = np.empty(self.dimension, dtype=np.int64)

    def _step(self, x):
        P = self.params
        return self._k.rshash_step(x, P.lo, self._inv_range, P.alpha, self._inv_f, self.mod, self.counts,
                                   self.ring, self.head, self.occupancy, self.lut,
                                   self._sub, self._key)

    def _run(self, X, out):
        P = self.params
        return self._k.rshash_run(X, P.lo, self._inv_range, P.alpha, self._inv_f, self.mod, self.counts,
                                  self.ring, self.head, self.occupancy, self.lut, out)

    def _step_q(self, xq):
        return self._k.rshash_step_q(xq, self._loq, self._inv_rangeq, self._alphaq,
                                     self._inv_fq, self.mod, self.counts, self.ring,
                                     self.head, self.occupancy, self.lutq, self.inv_rq,
                                     self._sub, self._key)

    def _run_q(self, XQ, out):
        return self._k.rshash_run_q(XQ, self._loq, self._inv_rangeq, self._alphaq,
                                    self._inv_fq, self.mod, self.counts, self.ring,
                                    self.head, self.occupancy, self.lutq, self.inv_rq, out)


class XStream(EnsembleDetector):
    """K-dimensional sparse projections, multi-scale binning, sliding CMS.

    Row ``i`` (1-based) bins every shifted component ``p + s`` with width
    ``delta / 2**(i-1)``; the row score is ``log2(1 + c_i) + i`` and the
    sub-score is minus the smallest row score. The per-component offset
    ``s`` is uniform in ``[0, delta)`` so grid boundaries do not sit at the
    origin; ``shift=False`` pins it to zero.
    """

    kind = "xstream"

    def __init__(self, dimension, n_estimators=CAPACITY["xstream"], window=DEFAULT_WINDOW,
                 rows=2, mod=128, k=20, bins=1.0, shift=True, seed=0, first_index=0,
                 fixed_point=False, backend=None):
        if rows < 1 or mod < 1 or k < 1:
            raise ValueError("rows, mod and k must be positive")
        if bins <= 0:
            raise ValueError("bins must be positive")
        self.rows = int(rows)
        self.mod = int(mod)
        self.k = int(k)
        self.bins = float(bins)
        self.shift = bool(shift)
        super().__init__(dimension, n_estimators, window, seed, first_index, fixed_point,
                         backend)

    @property
    def columns(self):
        return self.mod

    def _draw(self, rngs):
        # Achlioptas-style sparse projection: +-sqrt(3) w.p. 1/6 each, else 0.
        proj = np.empty((self.n_estimators, self.dimension, self.k))
        offset = np.zeros((self.n_estimators, self.k))
        for r, g in enumerate(rngs):
            u = g.uniform((self.dimension, self.k))
            proj[r] = np.where(u < 1 / 6, -math.sqrt(3.0),
                               np.where(u >= 5 / 6, math.sqrt(3.0), 0.0))
            if self.shift:
                offset[r] = g.uniform(self.k)
        return XStreamParams(self.n_estimators, self.window, self.rows, self.mod, self.k,
                             self.bins, proj, offset)

    def project(self, X):
        """Projected values, shape (n, R, K)."""
        X = np.atleast_2d(X)
        p = np.zeros((X.shape[0], self.n_estimators, self.k))
        for j in range(self.dimension):
            p += X[:, j, None, None] * self.params.proj[None, :, j, :]
        return p

    def _calibrate(self, X):
        p = self.project(X)
        lo, hi = widen(p.min(axis=0), p.max(axis=0))
        self.params.delta = (hi - lo) / self.bins
        self.params.shift = self.params.offset * self.params.delta

    def _prepare(self):
        P = self.params
        self._projq = q_from_real(P.proj)
        scales = 2.0 ** np.arange(self.rows)
        self._inv_delta = scales[None, :, None] / P.delta[:, None, :]
        self._inv_deltaq = q_from_real(self._inv_delta)
        self._shiftq = q_from_real(P.shift)
        self._p = np.empty(self.k)
        self._pq = np.empty(self.k, dtype=np.int64)
        self._key = np.empty(self.k, dtype=np.int64)

    def _step(self, x):
        P = self.params
        return self._k.xstream_step(x, P.proj, self._inv_delta, P.shift, self.mod, self.counts, self.ring,
                                    self.head, self.occupancy, self.lut, self._sub,
                                    self._p, self._key)

    def _run(self, X, out):
        P = self.params
        return self._k.xstream_run(X, P.proj, self._inv_delta, P.shift, self.mod, self.counts, self.ring,
                                   self.head, self.occupancy, self.lut, out)

    def _step_q(self, xq):
        return self._k.xstream_step_q(xq, self._projq, self._inv_deltaq, self._shiftq, self.mod,
                                      self.counts, self.ring, self.head, self.occupancy,
                                      self.lutq, self.inv_rq, self._sub, self._pq,
                                      self._key)

    def _run_q(self, XQ, out):
        return self._k.xstream_run_q(XQ, self._projq, self._inv_deltaq, self._shiftq, self.mod,
                                     self.counts, self.ring, self.head, self.occupancy,
                                     self.lutq, self.inv_rq, out)


DETECTORS = {"loda": Loda, "rshash": RSHash, "xstream": XStream}


@dataclass
class DetectorSpec:
    """Buildable description of an ensemble, as held by a pipeline slot."""

    kind: str
    n_estimators: int
    window: int = DEFAULT_WINDOW
    seed: int = 0
    first_index: int = 0
    fixed_point: bool = False
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DETECTORS:
            raise ValueError(f"unknown detector kind {self.kind!r}")

    def build(self, dimension, backend=None) -> EnsembleDetector:
        return DETECTORS[self.kind](
            dimension, n_estimators=self.n_estimators, window=self.window, seed=self.seed,
            first_index=self.first_index, fixed_point=self.fixed_point, backend=backend,
            **self.options,
        )

    @property
    def rows(self) -> int:
        return 1 if self.kind == "loda" else int(self.options.get("rows", 2))

    @property
    def k(self) -> int:
        return int(self.options.get("k", 20))


def make_detector(kind, dimension, **kwargs) -> EnsembleDetector:
    if kind not in DETECTORS:
        raise ValueError(f"unknown detector kind {kind!r}")
    return DETECTORS[kind](dimension, **kwargs)


def op_count(kind, N, R, d, w=1, k=1) -> int:
    """Analytic operation count of one pass over N samples."""
    for name, v in (("N", N), ("R", R), ("d", d), ("w", w), ("k", k)):
        if v < 1:
            raise ValueError(f"{name} must be >= 1")
    if kind == "loda":
        return N * (2 * R * d + 7 * R + 2)
    if kind == "rshash":
        return N * (5 * R * d * w + 4 * R * d + 11 * R * w + R + 2)
    if kind == "xstream":
        return N * (2 * R * d * k + 5 * R * d * w + 15 * R * w + 2 * R + 2)
    raise ValueError(f"unknown detector kind {kind!r}")
