"""Truncated continuous-time Markov chains used as exact oracles.

Two chains are provided:

* the level-occupancy chain of an (n, n) fork-join queue, viewed as a tandem
  queue whose empty downstream levels lend their server upstream;
* the read-priority chain over (primary writes, secondary write levels, reads
  per server) for one or two secondaries.  With two secondaries, requests
  that have visited exactly one server were all served by the same server, so
  that server's identity (``head``) completes the state.

Every count coordinate is capped.  Arrivals into a full coordinate are
dropped and moves into a full level are blocked; the stationary mass that
sits on a cap is reported as ``truncation_mass``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from rwlatency.analytic import SystemParams
from rwlatency.errors import (
    ConvergenceError,
    DomainError,
    StateSpaceTooLarge,
    TruncationWarning,
)

MAX_STATES = 2_000_000
DEFAULT_WRITE_CAP = 40
DEFAULT_READ_CAP = 25
TRUSTED_TRUNCATION_MASS = 1e-6
RESIDUAL_TOL = 1e-8
DIRECT_LIMIT = 20_000

HEAD_NONE = 0


@dataclass(frozen=True)
class Generator:
    """Sparse generator over an explicitly enumerated state space.

    ``states`` lists the states in lexicographic order, one row per state,
    with columns named by ``coords``.  ``matrix`` holds the full generator,
    diagonal included.
    """

    states: np.ndarray
    coords: tuple[str, ...]
    caps: tuple[int, ...]
    matrix: sp.csr_matrix
    write_coords: tuple[int, ...]
    read_coords: tuple[int, ...]
    _keys: np.ndarray = field(repr=False)
    _radix: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    @property
    def rates(self) -> sp.coo_matrix:
        """Off-diagonal transition rates."""
        off = self.matrix.tocoo()
        keep = off.row != off.col
        return sp.coo_matrix(
            (off.data[keep], (off.row[keep], off.col[keep])), shape=off.shape
        )

    def index(self, state) -> int:
        key = int(np.dot(np.asarray(state, dtype=np.int64), self._radix))
        pos = int(np.searchsorted(self._keys, key))
        if pos >= len(self._keys) or self._keys[pos] != key:
            raise KeyError(f"state {tuple(state)} is not in the truncated space")
        return pos

    def outgoing(self, state) -> dict[tuple[int, ...], float]:
        """Map of target state -> rate for the transitions leaving ``state``."""
        i = self.index(state)
        row = self.matrix.getrow(i).tocoo()
        out: dict[tuple[int, ...], float] = {}
        for j, rate in zip(row.col, row.data):
            if j != i and rate != 0:
                out[tuple(int(v) for v in self.states[j])] = float(rate)
        return out

    def on_boundary(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        for c in self.write_coords + self.read_coords:
            mask |= self.states[:, c] >= self.caps[c]
        return mask


@dataclass(frozen=True)
class StationaryResult:
    pi: np.ndarray
    truncation_mass: float
    expected_counts: tuple[float, float]
    residual: float


class _Builder:
    """Collects transitions as (source index, target states, rate) blocks."""

    def __init__(self, states, coords, caps, write_coords, read_coords, max_states):
        self.states = states
        self.coords = tuple(coords)
        self.caps = tuple(int(c) for c in caps)
        self.write_coords = tuple(write_coords)
        self.read_coords = tuple(read_coords)
        radix = np.ones(len(caps), dtype=np.int64)
        for k in range(len(caps) - 2, -1, -1):
            radix[k] = radix[k + 1] * (self.caps[k + 1] + 1)
        self.radix = radix
        self.keys = states @ radix
        if np.any(np.diff(self.keys) <= 0):
            raise AssertionError("states must be strictly lexicographic")
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []
        self.max_states = max_states

    def add(self, mask, delta=None, rate=1.0, set_coords=None):
        """Add moves from states in ``mask``: targets = state + delta, then
        coordinates in ``set_coords`` (dict coord -> value array/scalar) are
        overwritten."""
        src = np.flatnonzero(mask)
        if src.size == 0:
            return
        target = self.states[src].copy()
        if delta is not None:
            target += np.asarray(delta, dtype=np.int64)
        if set_coords:
            for c, v in set_coords.items():
                target[:, c] = v[src] if isinstance(v, np.ndarray) else v
        keys = target @ self.radix
        dst = np.searchsorted(self.keys, keys)
        if np.any(dst >= len(self.keys)) or np.any(self.keys[np.minimum(dst, len(self.keys) - 1)] != keys):
            raise AssertionError("transition leaves the truncated state space")
        rate = np.broadcast_to(np.asarray(rate, dtype=float), mask.shape)[src]
        self.rows.append(src)
        self.cols.append(dst)
        self.vals.append(rate)

    def build(self) -> Generator:
        size = self.states.shape[0]
        if self.rows:
            rows = np.concatenate(self.rows)
            cols = np.concatenate(self.cols)
            vals = np.concatenate(self.vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        off = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
        out_rate = np.asarray(off.sum(axis=1)).ravel()
        matrix = (off - sp.diags(out_rate)).tocsr()
        return Generator(
            states=self.states,
            coords=self.coords,
            caps=self.caps,
            matrix=matrix,
            write_coords=self.write_coords,
            read_coords=self.read_coords,
            _keys=self.keys,
            _radix=self.radix,
        )


def _grid(caps, max_states) -> np.ndarray:
    size = math.prod(c + 1 for c in caps)
    if size > max_states:
        raise StateSpaceTooLarge(f"{size} states exceed the limit of {max_states}")
    axes = [np.arange(c + 1, dtype=np.int64) for c in caps]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def available_servers(y, n: int) -> tuple[int, ...]:
    """Servers working on the head request of each level.

    The last level always has exactly one; an empty level i+1 hands its
    servers down to level i.
    """
    if len(y) != n:
        raise DomainError(f"expected {n} levels, got {len(y)}")
    out = [0] * n
    for i in range(n - 1, -1, -1):
        if i == n - 1:
            out[i] = 1
        else:
            out[i] = 1 + (out[i + 1] if y[i + 1] == 0 else 0)
    return tuple(out)


def _available_servers_vec(levels: np.ndarray) -> np.ndarray:
    n = levels.shape[1]
    out = np.ones_like(levels)
    for i in range(n - 2, -1, -1):
        out[:, i] = 1 + out[:, i + 1] * (levels[:, i + 1] == 0)
    return out


def build_wp_tandem_generator(
    n: int,
    lam: float,
    mu: float,
    cap: int,
    include_primary: bool = False,
    max_states: int = MAX_STATES,
) -> Generator:
    """Level-occupancy chain of an (n, n) fork-join queue.

    With ``include_primary`` an M/M/1 primary queue ``w0`` feeds level 0,
    which is the write process of the write-priority system.
    """
    if not 1 <= n <= 4:
        raise DomainError(f"the tandem oracle supports 1 <= n <= 4, got {n}")
    if cap < 10:
        raise DomainError(f"cap must be at least 10, got {cap}")
    if not (lam >= 0 and mu > 0):
        raise DomainError("need lam >= 0 and mu > 0")
    off = 1 if include_primary else 0
    d = n + off
    caps = (cap,) * d
    states = _grid(caps, max_states)
    coords = (("w0",) if include_primary else ()) + tuple(f"y{i}" for i in range(n))
    b = _Builder(states, coords, caps, tuple(range(d)), (), max_states)
    levels = states[:, off:]
    pooled = _available_servers_vec(levels)

    def e(k):
        v = np.zeros(d, dtype=np.int64)
        v[k] = 1
        return v

    if lam > 0:
        b.add(states[:, 0] < cap, e(0), lam)
    if include_primary:
        b.add((states[:, 0] > 0) & (states[:, 1] < cap), e(1) - e(0), mu)
    for i in range(1, n):
        src = off + i - 1
        mask = (states[:, src] > 0) & (states[:, src + 1] < cap)
        b.add(mask, e(src + 1) - e(src), pooled[:, i - 1] * mu)
    last = off + n - 1
    b.add(states[:, last] > 0, -e(last), pooled[:, n - 1] * mu)
    return b.build()


def build_rp_generator(
    params: SystemParams,
    caps: Mapping[str, int] | None = None,
    write_cap: int = DEFAULT_WRITE_CAP,
    read_cap: int = DEFAULT_READ_CAP,
    max_states: int = MAX_STATES,
) -> Generator:
    """Read-priority chain for one or two secondaries.

    Coordinates are ``(w0, y0, r0, r1)`` for one secondary and
    ``(w0, y0, y1, head, r0, r1, r2)`` for two, where ``head`` in {0, 1, 2}
    names the secondary that has served every level-1 write (0 when there
    are none).  ``caps`` overrides the cap of individual count coordinates.
    """
    n = params.n
    if n not in (1, 2):
        raise DomainError(f"the read-priority oracle supports n in {{1, 2}}, got {n}")
    m = n + 1
    lam_r, lam_w = params.lambda_r, params.lambda_w
    mu_r, mu_w = params.mu_r, params.mu_w

    if n == 1:
        coords = ("w0", "y0", "r0", "r1")
    else:
        coords = ("w0", "y0", "y1", "head", "r0", "r1", "r2")
    cap = {c: (read_cap if c.startswith("r") else write_cap) for c in coords}
    cap["head"] = 2 if n == 2 else 0
    for c, v in (caps or {}).items():
        if c not in cap or c == "head":
            raise DomainError(f"unknown capped coordinate {c!r}")
        cap[c] = int(v)
    if any(cap[c] < 1 for c in coords if c != "head"):
        raise DomainError("every cap must be at least 1")
    cap_tuple = tuple(cap[c] for c in coords)

    if n == 1:
        states = _grid(cap_tuple, max_states)
        write_coords, read_coords = (0, 1), (2, 3)
    else:
        valid = (
            (cap["w0"] + 1) * (cap["y0"] + 1) * (1 + 2 * cap["y1"])
            * math.prod(cap[f"r{j}"] + 1 for j in range(m))
        )
        if valid > max_states:
            raise StateSpaceTooLarge(f"{valid} states exceed the limit of {max_states}")
        full = _grid(cap_tuple, math.prod(c + 1 for c in cap_tuple))
        states = full[(full[:, 2] == 0) == (full[:, 3] == HEAD_NONE)]
        write_coords, read_coords = (0, 1, 2), (4, 5, 6)

    d = len(coords)
    b = _Builder(states, coords, cap_tuple, write_coords, read_coords, max_states)

    def e(name):
        v = np.zeros(d, dtype=np.int64)
        v[coords.index(name)] = 1
        return v

    col = {name: states[:, k] for k, name in enumerate(coords)}

    for j in range(m):
        r = f"r{j}"
        if lam_r > 0:
            b.add(col[r] < cap[r], e(r), lam_r / m)
        b.add(col[r] > 0, -e(r), mu_r)

    if lam_w > 0:
        b.add(col["w0"] < cap["w0"], e("w0"), lam_w)
    # primary completion forks the write to every secondary
    b.add(
        (col["r0"] == 0) & (col["w0"] > 0) & (col["y0"] < cap["y0"]),
        e("y0") - e("w0"),
        mu_w,
    )

    if n == 1:
        b.add((col["r1"] == 0) & (col["y0"] > 0), -e("y0"), mu_w)
        return b.build()

    y0, y1, head = col["y0"], col["y1"], col["head"]
    idle = {1: col["r1"] == 0, 2: col["r2"] == 0}
    head_idx = coords.index("head")
    # no level-1 batch: either secondary may serve the oldest level-0 write
    for j in (1, 2):
        b.add(
            (y1 == 0) & (y0 > 0) & idle[j],
            e("y1") - e("y0"),
            mu_w,
            set_coords={head_idx: j},
        )
    for h in (1, 2):
        other = 3 - h
        # the other secondary finishes the oldest level-1 write, which departs
        dep = (y1 > 0) & (head == h) & idle[other]
        new_head = np.where(y1 == 1, HEAD_NONE, h)
        b.add(dep, -e("y1"), mu_w, set_coords={head_idx: new_head})
        # the head secondary moves on to the oldest level-0 write
        adv = (y1 > 0) & (head == h) & idle[h] & (y0 > 0) & (y1 < cap["y1"])
        b.add(adv, e("y1") - e("y0"), mu_w)
    return b.build()


def generator_from_matrix(matrix) -> Generator:
    """Wrap an explicit generator matrix; state i is the single count ``i``."""
    q = sp.csr_matrix(matrix, dtype=float)
    size = q.shape[0]
    off = q - sp.diags(q.diagonal())
    out_rate = np.asarray(off.sum(axis=1)).ravel()
    states = np.arange(size, dtype=np.int64).reshape(-1, 1)
    return Generator(
        states=states,
        coords=("x",),
        caps=(size - 1,),
        matrix=(off - sp.diags(out_rate)).tocsr(),
        write_coords=(0,),
        read_coords=(),
        _keys=states.ravel(),
        _radix=np.ones(1, dtype=np.int64),
    )


def _solve_pinned(g: Generator) -> np.ndarray:
    # pin pi[0] (the empty state) to 1 and drop its balance equation; unlike a
    # row of ones this keeps the system sparse
    at = g.matrix.T.tocsc()
    a = at[1:, 1:].tocsc()
    rhs = -at[1:, 0].toarray().ravel()
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            if g.size <= DIRECT_LIMIT:
                x = spla.spsolve(a, rhs)
            else:
                ilu = spla.spilu(a, drop_tol=1e-3, fill_factor=10, permc_spec="MMD_AT_PLUS_A")
                precond = spla.LinearOperator(a.shape, ilu.solve)
                x, info = spla.gmres(
                    a, rhs, M=precond, rtol=1e-12, atol=0.0, restart=80, maxiter=500
                )
                if info != 0:
                    raise ConvergenceError(f"GMRES stopped with status {info}")
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            if isinstance(exc, ConvergenceError):
                raise
            raise ConvergenceError(f"singular generator: {exc}") from exc
    return np.concatenate([[1.0], np.atleast_1d(x)])


def stationary(g: Generator) -> StationaryResult:
    """Stationary distribution of an irreducible truncated chain.

    Small chains use a sparse LU solve, larger ones ILU-preconditioned GMRES.
    """
    if g.size == 1:
        pi = np.ones(1)
    else:
        pi = _solve_pinned(g)
        if not np.all(np.isfinite(pi)):
            raise ConvergenceError("stationary solve produced non-finite values")
        pi = np.where(pi < 0, 0.0, pi)
        pi /= pi.sum()
    residual = float(np.abs(g.matrix.T @ pi).max()) if g.size > 1 else 0.0
    if residual > RESIDUAL_TOL:
        raise ConvergenceError(f"stationary residual {residual:.3g} above {RESIDUAL_TOL}")
    mass = float(pi[g.on_boundary()].sum())
    return StationaryResult(
        pi=pi, truncation_mass=mass, expected_counts=_means(pi, g), residual=residual
    )


def _means(pi, g: Generator) -> tuple[float, float]:
    writes = sum(float(pi @ g.states[:, c]) for c in g.write_coords)
    reads = sum(float(pi @ g.states[:, c]) for c in g.read_coords)
    return writes, reads


def expected_counts(res: StationaryResult, g: Generator) -> tuple[float, float]:
    """Mean unique writes and mean reads under the stationary law."""
    if res.truncation_mass > TRUSTED_TRUNCATION_MASS:
        warnings.warn(
            f"truncation mass {res.truncation_mass:.3g} exceeds "
            f"{TRUSTED_TRUNCATION_MASS:g}; raise the caps",
            TruncationWarning,
            stacklevel=2,
        )
    return _means(res.pi, g)


def forkjoin_oracle_mean(n: int, lam: float, mu: float, cap: int = 60) -> tuple[float, float]:
    """Mean number of requests in an (n, n) fork-join queue and the truncation mass."""
    g = build_wp_tandem_generator(n, lam, mu, cap)
    res = stationary(g)
    return expected_counts(res, g)[0], res.truncation_mass


def wp_oracle_mean_writes(n: int, lam: float, mu: float, cap: int = 60) -> tuple[float, float]:
    """Exact mean writes under write priority: primary M/M/1 plus the fork-join.

    The primary's departures are Poisson, so its M/M/1 mean simply adds to the
    fork-join mean.
    """
    if not lam < mu:
        raise DomainError("the write queue is unstable")
    rho = lam / mu
    primary = rho / (1.0 - rho)
    if n == 0:
        return primary, 0.0
    fj, mass = forkjoin_oracle_mean(n, lam, mu, cap)
    return primary + fj, mass
