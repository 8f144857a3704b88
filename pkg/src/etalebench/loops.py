"""Twisted discrete loops f[0..N-1] with closure f[N] = γ'·f[0]: energy,
exponential charts, gradient descent and length spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Geometry, GeometryError, IsometryElement, IsometryGroup

MIN_SAMPLES = 8
DEGENERATE_LENGTH = 1e-6


class LoopError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TwistedLoop:
    geometry: Geometry
    samples: np.ndarray
    twist: IsometryElement

    def __post_init__(self):
        f = np.array(self.samples, dtype=float)
        if f.ndim != 2 or f.shape[1] != self.geometry.ambient:
            raise LoopError("samples must be an N x %d array" % self.geometry.ambient)
        if f.shape[0] < MIN_SAMPLES:
            raise LoopError("a loop needs at least %d samples" % MIN_SAMPLES)
        f.setflags(write=False)
        object.__setattr__(self, "samples", f)

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    def successors(self) -> np.ndarray:
        """f[k+1] for k = 0..N-1, with f[N] = γ'·f[0]."""
        f = self.samples
        return np.vstack([f[1:], self.twist.apply(f[0])[None, :]])

    def predecessors(self) -> np.ndarray:
        """f[k-1] for k = 0..N-1, with f[-1] = γ'^-1·f[N-1]."""
        f = self.samples
        return np.vstack([self.twist.inverse().apply(f[-1])[None, :], f[:-1]])

    def gaps(self) -> np.ndarray:
        return self.geometry.dist(self.samples, self.successors())

    def with_samples(self, samples) -> "TwistedLoop":
        return TwistedLoop(self.geometry, samples, self.twist)


def _check_gaps(loop: TwistedLoop, gaps=None):
    gaps = loop.gaps() if gaps is None else gaps
    r = loop.geometry.convexity_radius
    if np.any(gaps >= r):
        k = int(np.argmax(gaps))
        raise LoopError("gap %.6g at sample %d exceeds the convexity radius" % (gaps[k], k))
    return gaps


def loop_measurements(loop: TwistedLoop) -> tuple[float, float]:
    """(energy, length): energy = (N/2) Σ d(f_k, f_{k+1})², length = Σ d."""
    gaps = _check_gaps(loop)
    return float(0.5 * loop.N * np.sum(gaps * gaps)), float(np.sum(gaps))


def loop_energy(loop: TwistedLoop) -> float:
    return loop_measurements(loop)[0]


def chart_epsilon(loop: TwistedLoop) -> float:
    """0.9 × min(convexity radius, gap slack); the slack is half the room
    left below the radius, since both ends of a gap may move."""
    r = loop.geometry.convexity_radius
    if math.isinf(r):
        return math.inf
    gaps = _check_gaps(loop)
    return 0.9 * min(r, 0.5 * (r - float(np.max(gaps))))


def sup_norm(nu) -> float:
    nu = np.asarray(nu)
    return float(np.max(np.linalg.norm(nu, axis=-1))) if nu.size else 0.0


def chart_apply(loop: TwistedLoop, nu, eps: float | None = None) -> TwistedLoop:
    """f^ν[k] = exp_{f[k]} ν[k]; requires ‖ν‖_∞ < ε."""
    nu = np.asarray(nu, dtype=float)
    if nu.shape != loop.samples.shape:
        raise LoopError("section has the wrong shape")
    eps = chart_epsilon(loop) if eps is None else eps
    if sup_norm(nu) >= eps:
        raise LoopError("section norm %.6g is outside the chart ball (ε = %.6g)" % (sup_norm(nu), eps))
    return loop.with_samples(loop.geometry.exp(loop.samples, nu))


def chart_log(loop: TwistedLoop, other: TwistedLoop) -> np.ndarray:
    """The section ν with chart_apply(loop, ν) = other."""
    if other.samples.shape != loop.samples.shape:
        raise LoopError("loops have different sample counts")
    return loop.geometry.log(loop.samples, other.samples)


def energy_gradient(loop: TwistedLoop) -> np.ndarray:
    """g[k] = -N (log_{f_k} f_{k-1} + log_{f_k} f_{k+1}); the twisted ends use
    γ'^-1·f[N-1] and γ'·f[0]."""
    _check_gaps(loop)
    G, f = loop.geometry, loop.samples
    return -loop.N * (G.log(f, loop.predecessors()) + G.log(f, loop.successors()))


def finite_difference_gradient(loop: TwistedLoop, h: float = 1e-5) -> np.ndarray:
    """Central differences of the energy along an orthonormal tangent frame."""
    G, f = loop.geometry, loop.samples
    out = np.zeros_like(f)
    for k in range(loop.N):
        for e in G.tangent_basis(f[k]):
            plus, minus = f.copy(), f.copy()
            plus[k] = G.exp(f[k], h * e)
            minus[k] = G.exp(f[k], -h * e)
            d = (loop_energy(loop.with_samples(plus)) - loop_energy(loop.with_samples(minus))) / (2 * h)
            out[k] += d * e
    return out


@dataclass
class DescentReport:
    iterations: int
    grad_norm: float
    converged: bool
    energy: float
    length: float
    degenerate: bool
    stalled: bool


def minimize_energy(loop: TwistedLoop, max_iter: int = 20000, grad_tol: float = 1e-6,
                    armijo: float = 1e-4, max_backtracks: int = 40,
                    initial_step: float | None = None) -> tuple[TwistedLoop, DescentReport]:
    """Steepest descent with Armijo backtracking inside the chart ball.

    Each iteration starts from step 1/(2N) (or ``initial_step``) and halves
    until the sufficient-decrease test passes; energy never increases.
    """
    G = loop.geometry
    step0 = 1.0 / (2 * loop.N) if initial_step is None else initial_step
    energy, length = loop_measurements(loop)
    it = 0
    gnorm = math.inf
    stalled = False
    while True:
        g = energy_gradient(loop)
        gnorm = sup_norm(g)
        if gnorm < grad_tol or it >= max_iter:
            break
        g2 = float(np.sum(g * g))
        eps = chart_epsilon(loop)
        step = step0
        gmax = gnorm
        if step * gmax >= eps:
            step = 0.5 * eps / gmax
        accepted = None
        for _ in range(max_backtracks + 1):
            trial = loop.with_samples(G.exp(loop.samples, -step * g))
            try:
                e_new = loop_energy(trial)
            except LoopError:
                e_new = math.inf
            if e_new <= energy - armijo * step * g2:
                accepted = (trial, e_new)
                break
            step *= 0.5
        if accepted is None:
            stalled = True
            break
        loop, energy = accepted
        it += 1
    energy, length = loop_measurements(loop)
    report = DescentReport(it, gnorm, gnorm < grad_tol, energy, length,
                           length < DEGENERATE_LENGTH, stalled)
    return loop, report


def conjugate_loop(g: IsometryElement, loop: TwistedLoop) -> TwistedLoop:
    """(g·f, g γ' g^-1)"""
    return TwistedLoop(loop.geometry, g.apply(loop.samples), loop.twist.conjugate(g))


# -- seeds -----------------------------------------------------------------


def straight_seed(geometry: Geometry, twist: IsometryElement, N: int, rng,
                  amplitude: float = 0.05, modes=(1, 2, 3), base=None) -> TwistedLoop:
    """Flat seed: the segment from p to γ'·p plus sin(mπk/N) bumps (which
    vanish at both ends, so the closure is unaffected)."""
    if geometry.kind != "flat":
        raise LoopError("straight seeds need flat geometry")
    d = geometry.ambient
    p = rng.uniform(-0.5, 0.5, d) if base is None else np.asarray(base, dtype=float)
    q = twist.apply(p)
    s = np.arange(N)[:, None] / N
    f = p + s * (q - p)
    for m in modes:
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        f = f + amplitude * rng.uniform(0.5, 1.0) * np.sin(m * math.pi * s) * direction
    return TwistedLoop(geometry, f, twist)


def great_circle_seed(geometry: Geometry, twist: IsometryElement, N: int, rng,
                      amplitude: float = 0.05, modes=(2, 6)) -> TwistedLoop:
    """Sphere seed for twist = id: the equator plus z-bumps sin(mπk/N) with
    m ≡ 2 (mod 4).  Such bumps are odd under the antipodal map, a symmetry
    the descent preserves, which keeps the loop off the latitude mode that
    would shrink it to a point."""
    if geometry.kind != "sphere":
        raise LoopError("great-circle seeds need the sphere")
    if not twist.is_identity():
        raise LoopError("great-circle seeds need the identity twist")
    if N % 2:
        raise LoopError("great-circle seeds need an even sample count")
    for m in modes:
        if m % 4 != 2:
            raise LoopError("bump modes must be 2 mod 4")
    theta = 2 * math.pi * np.arange(N) / N
    f = np.stack([np.cos(theta), np.sin(theta), np.zeros(N)], axis=1)
    for m in modes:
        f[:, 2] += amplitude * rng.uniform(0.5, 1.0) * np.sin(m * theta / 2)
    return TwistedLoop(geometry, geometry.normalize(f), twist)


def seed_loop(geometry: Geometry, twist: IsometryElement, N: int, rng, amplitude: float = 0.05) -> TwistedLoop:
    if geometry.kind == "flat":
        return straight_seed(geometry, twist, N, rng, amplitude)
    if twist.is_identity():
        return great_circle_seed(geometry, twist, N, rng, amplitude)
    # rotation twist: the arc of the rotation's circle through a tilted base point
    axis = _rotation_axis(twist.linear)
    start = geometry.normalize(np.cross(axis, rng.normal(size=3)))
    angle = _rotation_angle(twist.linear, axis)
    s = np.arange(N) / N
    f = np.array([_rotate(start, axis, a) for a in angle * s])
    f[:, :] += amplitude * 0.2 * np.sin(math.pi * s)[:, None] * axis
    return TwistedLoop(geometry, geometry.normalize(f), twist)


def _rotation_axis(R):
    w, v = np.linalg.eig(R)
    i = int(np.argmin(np.abs(w - 1.0)))
    axis = np.real(v[:, i])
    return axis / np.linalg.norm(axis)


def _rotation_angle(R, axis):
    c = (np.trace(R) - 1) / 2
    s = float(axis @ np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])) / 2
    return math.atan2(s, c)


def _rotate(x, axis, a):
    return x * math.cos(a) + np.cross(axis, x) * math.sin(a) + axis * (axis @ x) * (1 - math.cos(a))


# -- spectra ---------------------------------------------------------------


@dataclass
class SpectrumRow:
    class_word: str
    min_length: float
    iterations: int
    converged: bool
    degenerate: bool
    members: int


def conjugacy_classes(group: IsometryGroup, twists) -> list[list[IsometryElement]]:
    """Group the given twists by conjugacy within the enumerated ball."""
    classes: list[list[IsometryElement]] = []
    keys: list[set] = []
    for t in twists:
        if t not in group:
            raise GeometryError("twist %s is not in the enumerated group" % t.word)
        for cls, ks in zip(classes, keys):
            if t.key in ks:
                cls.append(t)
                break
        else:
            classes.append([t])
            keys.append({c.key for c in group.conjugacy_class(t)} | {t.key})
    return classes


def length_spectrum(group: IsometryGroup, geometry: Geometry, twists, seeds: int = 1,
                    samples: int = 64, seed: int = 0, amplitude: float = 0.05,
                    **opts) -> list[SpectrumRow]:
    """Minimal length found per twist conjugacy class (min over seeds)."""
    twists = list(twists)
    if not twists:
        raise GeometryError("empty twist set")
    if seeds < 1:
        raise GeometryError("need at least one seed")
    rows = []
    for ci, cls in enumerate(conjugacy_classes(group, twists)):
        rep = cls[0]
        best = None
        for k in range(seeds):
            rng = np.random.default_rng([seed, ci, k])
            start = seed_loop(geometry, rep, samples, rng, amplitude)
            _, rep_report = minimize_energy(start, **opts)
            if best is None or rep_report.length < best.length:
                best = rep_report
        rows.append(SpectrumRow(rep.word, best.length, best.iterations, best.converged,
                                best.degenerate, len(cls)))
    return rows
