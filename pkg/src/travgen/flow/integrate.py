"""Batched Dormand-Prince integration with boundary event location.

All trajectories in a batch advance together with per-row step sizes, so
thousands of chords cost a few hundred numpy calls rather than a Python loop
per trajectory.  Results are per-row deterministic: a row's path does not
depend on which other rows share its batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..local_models import IllConditioned
from ..omega import Pattern, is_admissible
from .domain import FlowSystem

# Dormand-Prince 5(4) tableau
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class BudgetExceeded(RuntimeError):
    """No exit before the time budget: evidence of a trapped trajectory."""


@dataclass
class Tolerances:
    tol_event: float = 1e-11      # time resolution of event location
    tol_mult: float = 1e-6        # threshold on normalised Lie derivatives
    tol_boundary: float = 1e-7    # |z| band (normalised) counted as on the boundary
    t_max: float | None = None    # default: 1000 * diameter / speed
    rtol: float = 1e-10
    atol: float = 1e-12
    h_max_fraction: float = 1 / 64

    def __post_init__(self):
        for name in ("tol_event", "tol_mult", "tol_boundary", "rtol", "atol", "h_max_fraction"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.t_max is not None and not self.t_max > 0:
            raise ValueError("t_max must be positive")

    def halved(self) -> "Tolerances":
        return Tolerances(self.tol_event / 2, self.tol_mult / 2, self.tol_boundary, self.t_max,
                          self.rtol, self.atol, self.h_max_fraction)


@dataclass
class Event:
    time: float
    state: tuple[float, ...]
    multiplicity: int
    sign: int


@dataclass
class TrajectoryRecord:
    entry_state: tuple[float, ...]
    start_state: tuple[float, ...] | None = None
    events: list[Event] = field(default_factory=list)
    status: str = "ok"            # ok | budget | ill-conditioned | parity
    times: list[float] = field(default_factory=list)
    states: list[tuple[float, ...]] = field(default_factory=list)
    message: str = ""
    entry_time: float = 0.0       # time of entry_state measured from the start
    flags: list[str] = field(default_factory=list)

    @property
    def pattern(self) -> Pattern | None:
        if self.status != "ok":
            return None
        return Pattern(e.multiplicity for e in self.events)

    @property
    def m(self) -> int:
        return sum(e.multiplicity for e in self.events)

    @property
    def m_reduced(self) -> int:
        return sum(e.multiplicity - 1 for e in self.events)

    @property
    def exit_state(self) -> tuple[float, ...] | None:
        return self.events[-1].state if self.events and self.status == "ok" else None

    @property
    def flight_time(self) -> float | None:
        if self.status != "ok" or not self.events:
            return None
        return self.events[-1].time - self.events[0].time

    @property
    def entry_is_start(self) -> bool:
        if self.start_state is None:
            return False
        return bool(np.allclose(self.entry_state, self.start_state, atol=1e-9, rtol=0))


def _step(system: FlowSystem, y: np.ndarray, h: np.ndarray, k1: np.ndarray | None = None):
    """One DP5(4) step per row; returns (y5, error, f(y5))."""
    h = h[:, None]
    ks = [system.f(y) if k1 is None else k1]
    for s in range(1, 7):
        acc = y.copy()
        for r, a in enumerate(_A[s]):
            if a != 0.0:
                acc += h * a * ks[r]
        ks.append(system.f(acc))
    y5 = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y5, err, ks[-1]


def _bisect(system, y0, a, b, value_fn, sign_a, tol):
    """Locate a sign change of value_fn along single steps from y0 within [a, b]."""
    a = a.copy()
    b = b.copy()
    # rows stop independently so a row's answer never depends on its batch
    for _ in range(200):
        live = (b - a) > tol
        if not live.any():
            break
        li = np.nonzero(live)[0]
        mid = 0.5 * (a[li] + b[li])
        ym, _, _ = _step(system, y0[li], mid)
        same = np.sign(value_fn(ym)) == sign_a
        a[li] = np.where(same, mid, a[li])
        b[li] = np.where(same, b[li], mid)
    s = 0.5 * (a + b)
    ys, _, _ = _step(system, y0, s)
    return s, ys


@dataclass
class _RunResult:
    exit_t: np.ndarray
    exit_y: np.ndarray
    status: np.ndarray                 # 0 exit, 1 budget
    touches: list[list[tuple[float, np.ndarray]]]
    paths: list[list[tuple[float, np.ndarray]]] | None


def run_until_exit(system: FlowSystem, Y0: np.ndarray, tol: Tolerances,
                   record_path: bool = False) -> _RunResult:
    """Integrate rows from Y0 (inside X or on its boundary) until they leave X.

    Exits are sign changes of z (located by bisection); interior tangencies
    are local maxima of z (sign changes of L_v z from + to -) whose value
    lies within the boundary band.
    """
    Y0 = np.atleast_2d(np.asarray(Y0, dtype=float))
    n = len(Y0)
    ell = system.length_scale
    speed0 = system.speed(Y0) if n else np.array([])
    speed0 = np.where(speed0 > 0, speed0, 1.0)
    t_scale = ell / speed0
    h_max = tol.h_max_fraction * t_scale
    t_max = tol.t_max if tol.t_max is not None else None
    budget = np.full(n, t_max) if t_max is not None else 1000.0 * t_scale
    t_min = 1e-7 * t_scale
    gz = np.linalg.norm(system.domain.grad(Y0[:, : system.field.spatial_dim]), axis=1) if n else np.zeros(0)
    z_band = tol.tol_boundary * ell * np.where(gz > 0, gz, 1.0)

    y = Y0.copy()
    t = np.zeros(n)
    h = h_max / 8
    k1 = system.f(y) if n else None
    lz_prev = system.lz(y) if n else np.zeros(0)
    active = np.ones(n, dtype=bool)
    exit_t = np.full(n, np.nan)
    exit_y = np.full_like(Y0, np.nan)
    status = np.full(n, -1)
    touches: list[list] = [[] for _ in range(n)]
    paths = [[(0.0, Y0[i].copy())] for i in range(n)] if record_path else None

    while active.any():
        idx = np.nonzero(active)[0]
        y0 = y[idx]
        hh = np.minimum(h[idx], budget[idx] - t[idx] + 1e-300)
        y5, err, k7 = _step(system, y0, hh, k1[idx])
        scale = tol.atol + tol.rtol * np.maximum(np.abs(y0), np.abs(y5))
        en = np.max(np.abs(err) / scale, axis=1)
        en = np.where(np.isfinite(en), en, 1e10)
        ok = en <= 1.0
        fac = np.where(en > 0, 0.9 * en ** (-0.2), 5.0)
        h[idx] = np.minimum(h_max[idx], hh * np.clip(fac, 0.2, 5.0))
        if not ok.any():
            continue
        acc = idx[ok]
        ya, yb, ha = y0[ok], y5[ok], hh[ok]
        zb = system.z(yb)
        lzb = system.lz(yb)
        lza = lz_prev[acc]

        crossed = zb > 0
        touch_cand = (~crossed) & (lza > 0) & (lzb < 0)
        # a local max that pokes above the band also means the row left X
        exit_rows = np.zeros(len(acc), dtype=bool)
        exit_s = np.zeros(len(acc))
        exit_state = np.zeros_like(ya)

        if touch_cand.any():
            ti = np.nonzero(touch_cand)[0]
            s, ys = _bisect(system, ya[ti], np.zeros(len(ti)), ha[ti], system.lz, 1.0, tol.tol_event)
            zmax = system.z(ys)
            band = z_band[acc[ti]]
            too_early = (t[acc[ti]] + s) < t_min[acc[ti]]
            poke = (zmax > band) & ~too_early
            graze = (np.abs(zmax) <= band) & ~too_early
            for k in np.nonzero(graze)[0]:
                r = acc[ti[k]]
                touches[r].append((t[r] + s[k], ys[k].copy()))
            if poke.any():
                pi = ti[poke]
                s2, ys2 = _bisect(system, ya[pi], np.zeros(len(pi)), s[poke], system.z, -1.0, tol.tol_event)
                exit_rows[pi] = True
                exit_s[pi] = s2
                exit_state[pi] = ys2
        if crossed.any():
            ci = np.nonzero(crossed & ~exit_rows)[0]
            if len(ci):
                s2, ys2 = _bisect(system, ya[ci], np.zeros(len(ci)), ha[ci], system.z, -1.0, tol.tol_event)
                exit_rows[ci] = True
                exit_s[ci] = s2
                exit_state[ci] = ys2

        if exit_rows.any():
            ei = np.nonzero(exit_rows)[0]
            r = acc[ei]
            exit_t[r] = t[r] + exit_s[ei]
            exit_y[r] = exit_state[ei]
            status[r] = 0
            active[r] = False
            if record_path:
                for k, rr in zip(ei, r):
                    paths[rr].append((exit_t[rr], exit_y[rr].copy()))

        cont = ~exit_rows
        ci = acc[cont]
        y[ci] = yb[cont]
        t[ci] = t[ci] + ha[cont]
        k1[ci] = k7[ok][cont]
        lz_prev[ci] = lzb[cont]
        if record_path:
            for k, rr in enumerate(ci):
                paths[rr].append((t[rr], y[rr].copy()))
        over = ci[t[ci] >= budget[ci]]
        if len(over):
            status[over] = 1
            active[over] = False
            exit_t[over] = t[over]
            exit_y[over] = y[over]

    return _RunResult(exit_t, exit_y, status, touches, paths)


def classify_points(system: FlowSystem, Y: np.ndarray, tol: Tolerances):
    """Multiplicity and sign of the first non-vanishing normalised Lie derivative.

    Returns (m, sign, on_boundary); m == 0 marks an ill-conditioned point.
    """
    Y = np.atleast_2d(Y)
    T = system.normalised_tower(Y)
    on_b = np.abs(T[:, 0]) <= tol.tol_boundary
    big = np.abs(T[:, 1:]) > tol.tol_mult
    has = big.any(axis=1)
    first = np.argmax(big, axis=1)
    m = np.where(has, first + 1, 0)
    sign = np.sign(T[np.arange(len(Y)), np.where(has, first + 1, 0)]).astype(int)
    return m, sign, on_b


def trace(system: FlowSystem, entries, tol: Tolerances | None = None,
          record_path: bool = False) -> list[TrajectoryRecord]:
    """Full trajectories through the given states.

    Points that are not the lower end of their trajectory (interior points,
    interior tangencies, exit points) are first flowed backward to find it.
    """
    tol = tol or Tolerances()
    E = np.atleast_2d(np.asarray(entries, dtype=float))
    n = len(E)
    recs = [TrajectoryRecord(entry_state=tuple(map(float, E[i]))) for i in range(n)]
    if n == 0:
        return recs
    m, sign, on_b = classify_points(system, E, tol)
    starts = E.copy()
    need_back = np.zeros(n, dtype=bool)
    singleton = np.zeros(n, dtype=bool)
    for i in range(n):
        if not on_b[i]:
            if system.z(E[i:i + 1])[0] > 0:
                recs[i].status = "outside"
                recs[i].message = "state lies outside the domain"
                continue
            need_back[i] = True
        elif m[i] == 0:
            recs[i].status = "ill-conditioned"
            recs[i].message = "all Lie derivatives below threshold"
        elif m[i] % 2 == 0 and sign[i] > 0:
            singleton[i] = True
        elif m[i] % 2 == 1 and sign[i] < 0:
            pass
        else:
            need_back[i] = True

    if need_back.any():
        bi = np.nonzero(need_back)[0]
        res = run_until_exit(system.reversed(), E[bi], tol)
        for k, i in enumerate(bi):
            if res.status[k] != 0:
                recs[i].status = "budget"
                recs[i].message = "no start found before the time budget (backward)"
            else:
                starts[i] = res.exit_y[k]
                recs[i].entry_time = float(res.exit_t[k])

    fwd = [i for i in range(n) if recs[i].status == "ok" and not singleton[i]]
    for i in np.nonzero(singleton)[0]:
        recs[i].start_state = recs[i].entry_state
        recs[i].events = [Event(0.0, recs[i].entry_state, 0, 0)]
    if fwd:
        fi = np.array(fwd)
        res = run_until_exit(system, starts[fi], tol, record_path=record_path)
        for k, i in enumerate(fi):
            rec = recs[i]
            rec.start_state = tuple(map(float, starts[i]))
            if res.status[k] != 0:
                rec.status = "budget"
                rec.message = "no exit before the time budget"
                continue
            ev = [Event(0.0, rec.start_state, 0, 0)]
            for tt, st in res.touches[k]:
                ev.append(Event(float(tt), tuple(map(float, st)), 0, 0))
            ev.append(Event(float(res.exit_t[k]), tuple(map(float, res.exit_y[k])), 0, 0))
            rec.events = ev
            if record_path:
                rec.times = [p[0] for p in res.paths[k]]
                rec.states = [tuple(map(float, p[1])) for p in res.paths[k]]

    # multiplicities of every event, one vectorised pass
    owners = [(i, j) for i in range(n) if recs[i].status == "ok" for j in range(len(recs[i].events))]
    if owners:
        S = np.array([recs[i].events[j].state for i, j in owners])
        mm, ss, _ = classify_points(system, S, tol)
        for (i, j), mv, sv in zip(owners, mm, ss):
            e = recs[i].events[j]
            e.multiplicity, e.sign = int(mv), int(sv)
    for rec in recs:
        if rec.status != "ok":
            continue
        mults = [e.multiplicity for e in rec.events]
        if any(v == 0 for v in mults):
            rec.status = "ill-conditioned"
            rec.message = "multiplicity undetermined at an event"
        elif len(mults) > 1 and (mults[0] % 2 == 0 or mults[-1] % 2 == 0
                                 or any(v % 2 for v in mults[1:-1])):
            # the integrator saw a sign change (or not) that the tower does not
            # resolve: a near-degenerate crossing such as an inflection tangency
            rec.status = "ill-conditioned"
            rec.message = f"event parity disagrees with the crossing {tuple(mults)}"
        elif not is_admissible(mults):
            rec.status = "parity"
            rec.message = f"inadmissible divisor {tuple(mults)}"
        elif rec.m_reduced > system.dim - 1:
            # the local chart has only dim - 1 transversal coordinates
            rec.flags.append("dimension-cap")
    return recs


def integrate_trajectory(system: FlowSystem, entry, tol: Tolerances | None = None,
                         record_path: bool = True) -> TrajectoryRecord:
    """Single-trajectory front end; raises on budget or conditioning failures."""
    rec = trace(system, [entry], tol, record_path=record_path)[0]
    if rec.status == "budget":
        raise BudgetExceeded(rec.message)
    if rec.status == "ill-conditioned":
        raise IllConditioned(rec.message)
    return rec


def tangency_multiplicity(system: FlowSystem, point, tol: Tolerances | None = None) -> int:
    tol = tol or Tolerances()
    m, _, on_b = classify_points(system, np.atleast_2d(point), tol)
    if not on_b[0]:
        raise ValueError("point is not on the boundary within tol_boundary")
    if m[0] == 0:
        raise IllConditioned(f"L_v^k z below threshold for k <= {system.max_order}")
    return int(m[0])
