"""Static working points of the thermally shifted cavity.

The working-point equation ``1 + (phi_l - Phi(T0 + mu I))**2 = 1 / I`` is
multivalued in the laser detuning ``phi_l`` but explicit in the normalized
intracavity intensity ``I``::

    phi_l(I) = Phi(T0 + mu I) +/- sqrt(1/I - 1)

so every branch is a single-valued curve over an intensity grid and the
turning points are zeros of ``d phi_l / d I``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .core import CavityParams, ResonanceModel, half_linewidth, mu_parameter
from .errors import Degenerate, GridTooCoarse

DEFAULT_GRID_SIZE = 4000
DEGENERACY_TOL = 1e-6


def default_grid(n: int = DEFAULT_GRID_SIZE, lo: float = 1e-4) -> np.ndarray:
    return np.geomspace(lo, 1.0, n)


class Regime(enum.Enum):
    MONOSTABLE = "i"
    RED_SIDE_BISTABLE = "ii"
    BLUE_SIDE_BISTABLE = "iii"
    TRISTABLE_A = "iv"
    TRISTABLE_B = "v"
    DOUBLE_BISTABLE = "vi"

    @property
    def code(self) -> str:
        return self.value


DEGENERATE_CODE = "X"


@dataclass(frozen=True)
class BranchPoint:
    intensity: float
    detuning: float
    temperature_rise: float
    stable: bool | None = None
    sign: int = 0


@dataclass(frozen=True)
class TurningPoint:
    detuning: float
    intensity: float
    sign: int


@dataclass(frozen=True)
class Branch:
    """One sign branch ``phi_l = Phi +/- sqrt(1/I - 1)`` sampled on an intensity grid."""

    sign: int
    intensity: np.ndarray
    detuning: np.ndarray
    stable: np.ndarray | None = None

    def points(self, mu: float) -> list[BranchPoint]:
        stable = self.stable if self.stable is not None else [None] * len(self.intensity)
        return [
            BranchPoint(float(i), float(p), mu * float(i), None if s is None else bool(s), self.sign)
            for i, p, s in zip(self.intensity, self.detuning, stable)
        ]


@dataclass(frozen=True)
class StaticProblem:
    """Model, cavity and heating parameters shared by all static computations."""

    model: ResonanceModel
    params: CavityParams
    mu: float
    t0: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if not self.t0 > 0:
            raise ValueError("base temperature must be positive")

    @property
    def hwhm(self) -> float:
        return half_linewidth(self.params)

    def shift(self, i_tilde):
        """``Phi(T0 + mu I)``: resonance position in half-linewidths."""
        return self.model.offset(self.t0 + self.mu * np.asarray(i_tilde, dtype=float)) / self.hwhm

    def shift_rate(self, i_tilde):
        """``d Phi(T0 + mu I) / dI``."""
        return self.mu * self.model.slope(self.t0 + self.mu * np.asarray(i_tilde, dtype=float)) / self.hwhm

    def residual(self, i_tilde, phi_l):
        """``1/I - 1 - (phi_l - Phi)**2``; zero on a working point."""
        i_tilde = np.asarray(i_tilde, dtype=float)
        return 1.0 / i_tilde - 1.0 - (phi_l - self.shift(i_tilde)) ** 2

    def branch_slope(self, i_tilde, sign: int):
        """Analytic ``d phi_l / dI`` along the branch of the given sign."""
        return self.shift_rate(i_tilde) - sign * _wing_slope(i_tilde)


def _wing_slope(i_tilde):
    # -d/dI sqrt(1/I - 1) = 1 / (2 I^2 sqrt(1/I - 1))
    i_tilde = np.asarray(i_tilde, dtype=float)
    root = np.sqrt(np.maximum(1.0 / i_tilde - 1.0, 0.0))
    with np.errstate(divide="ignore"):
        return 1.0 / (2.0 * i_tilde**2 * root)


def _wing(i_tilde):
    return np.sqrt(np.maximum(1.0 / np.asarray(i_tilde, dtype=float) - 1.0, 0.0))


@dataclass(frozen=True)
class BranchSet:
    """Both sign branches with their turning points.

    ``upper`` is the ``+`` branch (laser above the shifted resonance), ``lower``
    the ``-`` branch. They meet at ``I = 1``. Turning points are sorted by
    detuning.
    """

    problem: StaticProblem
    upper: Branch
    lower: Branch
    turning_points: tuple[TurningPoint, ...] | None = None

    @property
    def mu(self) -> float:
        return self.problem.mu

    @property
    def base_temperature(self) -> float:
        return self.problem.t0

    @property
    def branches(self) -> tuple[Branch, Branch]:
        return (self.lower, self.upper)

    def points(self) -> list[BranchPoint]:
        return self.lower.points(self.mu) + self.upper.points(self.mu)

    def path(self):
        """Concatenated curve: lower branch up to the closure point, then the upper branch back down.

        Returns ``(intensity, detuning, sign, segment)`` arrays where
        ``segment`` counts the turning points passed so far; turning points
        themselves are inserted into the path.
        """
        tps = self.turning_points or ()
        lo_tp = sorted(tp.intensity for tp in tps if tp.sign < 0)
        up_tp = sorted((tp.intensity for tp in tps if tp.sign > 0), reverse=True)
        p = self.problem

        def with_tps(branch, tp_i):
            i = np.concatenate([branch.intensity, tp_i])
            i = np.unique(i)
            return i, p.shift(i) + branch.sign * _wing(i)

        li, lphi = with_tps(self.lower, np.array(lo_tp))
        ui, uphi = with_tps(self.upper, np.array(up_tp))
        ui, uphi = ui[::-1], uphi[::-1]
        lseg = np.searchsorted(np.array(lo_tp), li, side="left")
        useg = len(lo_tp) + np.searchsorted(-np.array(up_tp), -ui, side="left")
        intensity = np.concatenate([li, ui[1:]])
        detuning = np.concatenate([lphi, uphi[1:]])
        sign = np.concatenate([np.full(len(li), -1), np.full(len(ui) - 1, 1)])
        segment = np.concatenate([lseg, useg[1:]])
        return intensity, detuning, sign, segment


def _validate_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("intensity grid must be a 1-D sequence of at least two values")
    if np.any(grid <= 0) or np.any(grid > 1):
        raise ValueError("intensity grid values must lie in (0, 1]")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("intensity grid must be strictly increasing")
    if grid[-1] < 1.0:
        grid = np.append(grid, 1.0)
    return grid


def branch_curve(model: ResonanceModel, params: CavityParams, mu: float, T0: float,
                 grid=None, analyze: bool = True) -> BranchSet:
    """Both explicit solution branches of the static equation over ``grid``.

    With ``analyze`` (the default) turning points and stability labels are
    filled in as well.
    """
    problem = StaticProblem(model, params, mu, T0)
    grid = _validate_grid(default_grid() if grid is None else grid)
    shift = problem.shift(grid)
    wing = _wing(grid)
    bs = BranchSet(
        problem,
        upper=Branch(+1, grid, shift + wing),
        lower=Branch(-1, grid, shift - wing),
    )
    if analyze:
        bs = classify_stability(replace(bs, turning_points=tuple(turning_points(bs))))
    return bs


def _bisect(f, a, b, fa, xtol):
    """Vectorized bisection of ``f`` on brackets ``[a, b]``; ``fa`` holds ``f(a)``."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    pa = np.asarray(fa) > 0
    for _ in range(200):
        if np.all(b - a <= xtol):
            break
        m = 0.5 * (a + b)
        left = (f(m) > 0) == pa
        a = np.where(left, m, a)
        b = np.where(left, b, m)
    return 0.5 * (a + b)


def turning_points(branch: BranchSet) -> list[TurningPoint]:
    """Zeros of ``d phi_l / dI`` on both branches, sorted by detuning.

    Sign changes of the analytic derivative between adjacent grid nodes are
    refined by bisection. As ``I -> 0`` and ``I -> 1`` the wing term dominates
    with a known sign, which closes the end cells. A cell whose midpoint shows
    a sign pattern implying two changes raises :class:`GridTooCoarse`.
    """
    p = branch.problem
    found = []
    if p.mu == 0:
        return found
    for br in branch.branches:
        grid = br.intensity[br.intensity < 1.0]
        if len(grid) < 2:
            continue
        # d phi/dI -> -sign * inf at both ends of the branch
        end_positive = br.sign < 0
        if (p.branch_slope(grid[0], br.sign) >= 0) != end_positive:
            grid = np.concatenate([np.geomspace(grid[0] * 1e-8, grid[0], 400)[:-1], grid])
        d = p.branch_slope(grid, br.sign)
        pos = d >= 0
        mid = np.sqrt(grid[:-1] * grid[1:])
        pmid = p.branch_slope(mid, br.sign) >= 0
        doubled = (pos[:-1] == pos[1:]) & (pmid != pos[:-1])
        if np.any(doubled):
            k = int(np.flatnonzero(doubled)[0])
            raise GridTooCoarse(
                f"derivative changes sign twice within I in [{grid[k]:.6g}, {grid[k + 1]:.6g}]"
            )
        lo = list(grid[:-1][pos[:-1] != pos[1:]])
        hi = list(grid[1:][pos[:-1] != pos[1:]])
        flo = list(d[:-1][pos[:-1] != pos[1:]])
        if pos[-1] != end_positive:
            lo.append(grid[-1])
            hi.append(1.0)
            flo.append(d[-1])
        if not lo:
            continue
        roots = _bisect(lambda x: p.branch_slope(x, br.sign), lo, hi, flo, xtol=1e-15)
        roots = np.minimum(roots, np.nextafter(1.0, 0.0))
        phi = p.shift(roots) + br.sign * _wing(roots)
        found.extend(TurningPoint(float(f), float(i), br.sign) for f, i in zip(phi, roots))
    found.sort(key=lambda tp: tp.detuning)
    return found


def classify_stability(branch: BranchSet) -> BranchSet:
    """Label every branch point stable or unstable.

    Walking the concatenated curve from the far red wing, over the closure
    point and out to the far blue wing, stability alternates at each turning
    point, starting (and ending) stable.
    """
    if branch.turning_points is None:
        branch = replace(branch, turning_points=tuple(turning_points(branch)))
    tps = branch.turning_points
    lo_tp = np.array(sorted(tp.intensity for tp in tps if tp.sign < 0))
    up_tp = np.array(sorted(tp.intensity for tp in tps if tp.sign > 0))
    lower_seg = np.searchsorted(lo_tp, branch.lower.intensity, side="left")
    # the upper branch is traversed towards decreasing intensity
    upper_seg = len(lo_tp) + (len(up_tp) - np.searchsorted(up_tp, branch.upper.intensity, side="right"))
    return replace(
        branch,
        lower=replace(branch.lower, stable=lower_seg % 2 == 0),
        upper=replace(branch.upper, stable=upper_seg % 2 == 0),
    )


def steady_states(model: ResonanceModel, params: CavityParams, mu: float, T0: float,
                  phi_l: float, n_grid: int = DEFAULT_GRID_SIZE, xtol: float = 1e-12) -> list[BranchPoint]:
    """All working points at a fixed laser detuning, sorted by intensity.

    ``g(I) = 1/I - 1 - (phi_l - Phi(T0 + mu I))**2`` is scanned on a
    geometric grid from a lower bound where ``g > 0`` is guaranteed up to
    ``I = 1``; each sign change is bisected to ``xtol``.
    """
    if not np.isfinite(phi_l):
        raise ValueError("detuning must be finite")
    p = StaticProblem(model, params, mu, T0)
    bound = abs(phi_l) + _max_abs_shift(model, params) + 1.0
    lo = 1.0 / (1.0 + 4.0 * bound**2)
    grid = np.geomspace(lo, 1.0, n_grid)
    g = p.residual(grid, phi_l)
    pos = g > 0
    roots = []
    cells = np.flatnonzero(pos[:-1] != pos[1:])
    if g[-1] == 0:
        # exact resonance: the closure point itself is the root
        cells = cells[cells != len(grid) - 2]
        roots.append(1.0)
    if len(cells):
        refined = _bisect(lambda x: p.residual(x, phi_l), grid[cells], grid[cells + 1], g[cells], xtol)
        roots.extend(float(r) for r in refined)
    roots.sort()
    out = []
    for r in roots:
        sign = 1 if phi_l - p.shift(r) >= 0 else -1
        slope = p.branch_slope(r, sign) if r < 1.0 else -sign * np.inf
        out.append(BranchPoint(r, float(phi_l), mu * r, bool(sign * slope < 0), sign))
    return out


def _max_abs_shift(model: ResonanceModel, params: CavityParams) -> float:
    t = np.linspace(model.t_min, model.t_max, 2048)
    return float(np.max(np.abs(model.offset(t)))) / half_linewidth(params)


def _pairs(tps):
    """Group turning points by branch sign into ``(lo, hi)`` detuning intervals."""
    out = {}
    for s in (-1, 1):
        phis = sorted(tp.detuning for tp in tps if tp.sign == s)
        out[s] = [(phis[k], phis[k + 1]) for k in range(0, len(phis) - 1, 2)]
    return out


def classify_regime(branch: BranchSet) -> Regime:
    """Multistability regime from the number and arrangement of turning points.

    Two turning points on the ``+`` branch mean the resonance is pushed to
    higher frequency by heating (blue side), two on the ``-`` branch that it is
    pushed to lower frequency (red side). With both pairs present, disjoint
    hysteresis intervals give double bistability; overlapping intervals are
    tristable, split by whether the red-side interval starts below (iv) or
    above (v) the lower turning point of the blue-side interval.
    """
    tps = branch.turning_points
    if tps is None:
        tps = tuple(turning_points(branch))
    phis = np.array([tp.detuning for tp in tps])
    if len(phis) > 1 and np.min(np.diff(phis)) < DEGENERACY_TOL:
        raise Degenerate("two turning points coincide within 1e-6 half-linewidths")
    n = len(tps)
    if n == 0:
        return Regime.MONOSTABLE
    pairs = _pairs(tps)
    if n == 2:
        (sign,) = [s for s in (-1, 1) if pairs[s]]
        return Regime.BLUE_SIDE_BISTABLE if sign > 0 else Regime.RED_SIDE_BISTABLE
    if n == 4 and len(pairs[1]) == 1 and len(pairs[-1]) == 1:
        (b1, b2), (r1, r2) = pairs[1][0], pairs[-1][0]
        if r2 < b1 or b2 < r1:
            return Regime.DOUBLE_BISTABLE
        return Regime.TRISTABLE_A if r1 < b1 else Regime.TRISTABLE_B
    raise Degenerate(f"unsupported turning point arrangement ({n} points)")


def regime_cell(model: ResonanceModel, params: CavityParams, T0: float, finesse: float,
                power: float, chi_stat: float, grid=None) -> str:
    """Regime code of one ``(finesse, power)`` cell, ``X`` when degenerate."""
    cell = params.with_finesse(finesse)
    mu = mu_parameter(power, cell, chi_stat)
    bs = branch_curve(model, cell, mu, T0, grid=grid)
    try:
        return classify_regime(bs).code
    except Degenerate:
        return DEGENERATE_CODE


def regime_map(model: ResonanceModel, params_template: CavityParams, T0: float,
               finesse_grid, power_grid, chi_stat: float, grid=None, executor=None) -> np.ndarray:
    """Regime codes on a finesse x power grid, row-major (rows = finesse).

    ``executor`` may be any :class:`concurrent.futures.Executor`; cells are
    independent and are written back into their own slots.
    """
    finesse_grid = _check_axis(finesse_grid, "finesse")
    power_grid = _check_axis(power_grid, "power", allow_zero=True)
    out = np.empty((len(finesse_grid), len(power_grid)), dtype=object)
    if executor is None:
        for a, f in enumerate(finesse_grid):
            for b, pw in enumerate(power_grid):
                out[a, b] = regime_cell(model, params_template, T0, f, pw, chi_stat, grid)
        return out
    futures = {}
    for a, f in enumerate(finesse_grid):
        fut = executor.submit(_regime_row, model, params_template, T0, float(f), power_grid, chi_stat, grid)
        futures[a] = fut
    for a, fut in futures.items():
        out[a, :] = fut.result()
    return out


def _regime_row(model, params, T0, finesse, powers, chi_stat, grid):
    return [regime_cell(model, params, T0, finesse, pw, chi_stat, grid) for pw in powers]


def _check_axis(values, name, allow_zero=False):
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError(f"{name} grid must be a non-empty 1-D sequence")
    if np.any(values < 0) or (not allow_zero and np.any(values == 0)):
        raise ValueError(f"{name} grid values must be positive")
    if np.any(np.diff(values) <= 0):
        raise ValueError(f"{name} grid must be strictly increasing")
    return values


@dataclass(frozen=True)
class Jump:
    detuning: float
    from_intensity: float
    to_intensity: float


@dataclass(frozen=True)
class HysteresisTrace:
    detuning: np.ndarray
    intensity: np.ndarray
    transmission: np.ndarray
    jumps: tuple[Jump, ...]
    direction: str


@dataclass
class _Segment:
    detuning: np.ndarray  # increasing
    intensity: np.ndarray

    @property
    def lo(self):
        return self.detuning[0]

    @property
    def hi(self):
        return self.detuning[-1]

    def covers(self, phi):
        return self.lo <= phi <= self.hi

    def at(self, phi):
        return float(np.interp(phi, self.detuning, self.intensity))


def _stable_segments(branch: BranchSet) -> list[_Segment]:
    intensity, detuning, _, segment = branch.path()
    segs = []
    for k in np.unique(segment):
        if k % 2:
            continue
        mask = segment == k
        # segments share their bounding turning points with the neighbours
        idx = np.flatnonzero(mask)
        if k > 0:
            idx = np.concatenate([[idx[0] - 1], idx])
        phi, it = detuning[idx], intensity[idx]
        order = np.argsort(phi, kind="stable")
        segs.append(_Segment(phi[order], it[order]))
    return segs


def hysteresis_trace(branch: BranchSet, direction: str = "up", coupling: float = 1.0,
                     n: int = 2000, phi_range: tuple[float, float] | None = None) -> HysteresisTrace:
    """Quasi-static transmission sweep over the stable branches.

    The state follows its stable segment until the segment ends at a turning
    point, then drops onto the stable segment at that detuning closest in
    intensity (ties go to the lower intensity).
    """
    from .dynamics import transmission

    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    if branch.turning_points is None or branch.lower.stable is None:
        branch = classify_stability(branch)
    segs = _stable_segments(branch)
    if phi_range is None:
        phi_range = default_phi_range(branch)
    lo, hi = phi_range
    phis = np.linspace(lo, hi, n)
    if direction == "down":
        phis = phis[::-1]
    step = 1 if direction == "up" else -1

    def candidates(phi):
        return [s for s in segs if s.covers(phi)]

    start = candidates(phis[0])
    if not start:
        raise ValueError("sweep start lies outside the computed branches")
    current = min(start, key=lambda s: (s.at(phis[0]), s.lo))
    values = np.empty(n)
    jumps = []
    for k, phi in enumerate(phis):
        while not current.covers(phi):
            edge = current.hi if step > 0 else current.lo
            from_i = current.at(edge)
            options = [s for s in candidates(edge) if s is not current]
            # keep only segments that continue in the sweep direction
            options = [s for s in options if (s.hi > edge if step > 0 else s.lo < edge)]
            if not options:
                raise ValueError(f"no stable branch to land on at detuning {edge:.6g}")
            nxt = min(options, key=lambda s: (abs(s.at(edge) - from_i), s.at(edge)))
            jumps.append(Jump(float(edge), from_i, nxt.at(edge)))
            current = nxt
        values[k] = current.at(phi)
    return HysteresisTrace(
        detuning=phis,
        intensity=values,
        transmission=transmission(values, coupling),
        jumps=tuple(jumps),
        direction=direction,
    )


def default_phi_range(branch: BranchSet, margin: float = 5.0) -> tuple[float, float]:
    """Detuning window covering the resonance and all turning points."""
    shift = branch.problem.shift(branch.upper.intensity)
    phis = [float(np.min(shift)), float(np.max(shift))]
    phis += [tp.detuning for tp in branch.turning_points or ()]
    lo, hi = min(phis) - margin, max(phis) + margin
    lo = max(lo, float(np.min(branch.lower.detuning)))
    hi = min(hi, float(np.max(branch.upper.detuning)))
    return lo, hi
