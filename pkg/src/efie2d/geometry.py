"""Closed parametric curves, uniform segment meshes and the P1 hat basis."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument, Unsupported
from .quadrature import gauss_legendre

TWO_PI = 2.0 * math.pi
CURVE_KINDS = ("circle", "ellipse", "kite", "polygon-smooth")
_ARC_PANELS = 64
_ARC_ORDER = 30


@dataclass(frozen=True)
class ParametricCurve:
    """Closed counter-clockwise curve on t in [0, 2 pi).

    Parameters by kind:

    * circle: (radius,)
    * ellipse: (semi_axis_x, semi_axis_y)
    * kite: (scale,) for x = s(cos t + 0.65 cos 2t - 0.65), y = 1.5 s sin t
    * polygon-smooth: (radius, sides, depth), r(t) = radius (1 + depth cos(sides t))
    """

    kind: str
    params: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise Unsupported(f"unsupported curve kind {self.kind!r}")
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "circle" and (len(p) != 1 or p[0] <= 0):
            raise InvalidArgument("circle needs one positive radius")
        if self.kind == "ellipse" and (len(p) != 2 or min(p) <= 0):
            raise InvalidArgument("ellipse needs two positive semi-axes")
        if self.kind == "kite" and (len(p) != 1 or p[0] <= 0):
            raise InvalidArgument("kite needs one positive scale")
        if self.kind == "polygon-smooth":
            if len(p) != 3 or p[0] <= 0 or p[1] < 2 or int(p[1]) != p[1] or not 0 <= p[2] < 1.0 / (1.0 + p[1] ** 2):
                raise InvalidArgument("polygon-smooth needs (radius > 0, integer sides >= 2, 0 <= depth < 1/(1+sides^2))")

    def position(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == "circle":
            return np.stack([p[0] * np.cos(t), p[0] * np.sin(t)], axis=-1)
        if self.kind == "ellipse":
            return np.stack([p[0] * np.cos(t), p[1] * np.sin(t)], axis=-1)
        if self.kind == "kite":
            s = p[0]
            return np.stack([s * (np.cos(t) + 0.65 * np.cos(2 * t) - 0.65), 1.5 * s * np.sin(t)], axis=-1)
        rad = p[0] * (1.0 + p[2] * np.cos(p[1] * t))
        return np.stack([rad * np.cos(t), rad * np.sin(t)], axis=-1)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == "circle":
            return np.stack([-p[0] * np.sin(t), p[0] * np.cos(t)], axis=-1)
        if self.kind == "ellipse":
            return np.stack([-p[0] * np.sin(t), p[1] * np.cos(t)], axis=-1)
        if self.kind == "kite":
            s = p[0]
            return np.stack([s * (-np.sin(t) - 1.3 * np.sin(2 * t)), 1.5 * s * np.cos(t)], axis=-1)
        n, d = p[1], p[2]
        rad = p[0] * (1.0 + d * np.cos(n * t))
        drad = -p[0] * d * n * np.sin(n * t)
        return np.stack([drad * np.cos(t) - rad * np.sin(t), drad * np.sin(t) + rad * np.cos(t)], axis=-1)

    def speed(self, t):
        return np.linalg.norm(self.derivative(t), axis=-1)

    def arclength(self, t=TWO_PI):
        """Arclength from parameter 0 to t (vectorized, 0 <= t <= 2 pi)."""
        return _arclength(self, np.asarray(t, dtype=float))

    def total_arclength(self) -> float:
        return float(_panel_table(self)[-1])


_tables: dict[ParametricCurve, np.ndarray] = {}


def _panel_table(curve: ParametricCurve) -> np.ndarray:
    table = _tables.get(curve)
    if table is None:
        edges = np.linspace(0.0, TWO_PI, _ARC_PANELS + 1)
        rule = gauss_legendre(_ARC_ORDER)
        half = 0.5 * (edges[1] - edges[0])
        pts = edges[:-1, None] + half * (rule.nodes + 1.0)
        per_panel = half * (curve.speed(pts) @ rule.weights)
        table = np.concatenate([[0.0], np.cumsum(per_panel)])
        _tables[curve] = table
    return table


def _arclength(curve: ParametricCurve, t: np.ndarray) -> np.ndarray:
    table = _panel_table(curve)
    width = TWO_PI / _ARC_PANELS
    idx = np.clip(np.floor(t / width).astype(int), 0, _ARC_PANELS - 1)
    start = idx * width
    rule = gauss_legendre(_ARC_ORDER)
    half = 0.5 * (t - start)
    pts = start[..., None] + half[..., None] * (rule.nodes + 1.0)
    partial = half * (curve.speed(pts) @ rule.weights)
    return table[idx] + partial


@dataclass(frozen=True, eq=False)
class CurveMesh:
    """N chord segments; segment i joins node i to node (i+1) mod N."""

    curve: ParametricCurve
    params: np.ndarray
    nodes: np.ndarray
    spacing: str
    lengths: np.ndarray = field(init=False)
    segments: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.nodes.shape[0]
        seg = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
        d = self.nodes[seg[:, 1]] - self.nodes[seg[:, 0]]
        object.__setattr__(self, "segments", seg)
        object.__setattr__(self, "lengths", np.hypot(d[:, 0], d[:, 1]))
        for arr in (self.params, self.nodes, self.lengths, self.segments):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def length(self) -> float:
        """Sum of chord lengths."""
        return float(math.fsum(self.lengths))

    @property
    def arclength(self) -> float:
        return self.curve.total_arclength()

    @property
    def h(self) -> float:
        return float(np.mean(self.lengths))

    @property
    def tangents(self) -> np.ndarray:
        d = self.nodes[self.segments[:, 1]] - self.nodes[self.segments[:, 0]]
        return d / self.lengths[:, None]

    @property
    def normals(self) -> np.ndarray:
        t = self.tangents
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    @property
    def tag(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.nodes).tobytes()).hexdigest()[:12]

    def to_csv(self) -> str:
        lines = ["index,x,y"]
        lines += [f"{i},{x:.17g},{y:.17g}" for i, (x, y) in enumerate(self.nodes)]
        return "\n".join(lines) + "\n"


def _arclength_params(curve: ParametricCurve, n: int) -> np.ndarray:
    total = curve.total_arclength()
    targets = total * np.arange(n) / n
    # start from a dense inverse table, then Newton on s(t) - target
    grid = np.linspace(0.0, TWO_PI, 16 * n + 1)
    t = np.interp(targets, curve.arclength(grid), grid)
    for _ in range(50):
        step = (curve.arclength(t) - targets) / curve.speed(t)
        t = t - step
        if np.max(np.abs(step)) < 1e-14:
            break
    t[0] = 0.0
    return t


def _chord_step(curve: ParametricCurve, t0: float, h: float, speed_bound: float) -> float:
    p0 = curve.position(t0)
    f = lambda t: float(np.linalg.norm(curve.position(t) - p0)) - h
    hi = t0 + 1.5 * h / speed_bound
    while f(hi) < 0:
        hi = t0 + 2.0 * (hi - t0)
    return brentq(f, t0, hi, xtol=1e-15, rtol=1e-15)


def _chord_params(curve: ParametricCurve, n: int) -> np.ndarray:
    grid = np.linspace(0.0, TWO_PI, 4096)
    vmin = float(curve.speed(grid).min())

    def walk(h):
        ts = [0.0]
        for _ in range(n):
            ts.append(_chord_step(curve, ts[-1], h, vmin))
        return np.array(ts)

    h0 = curve.total_arclength() / n
    closure = lambda h: walk(h)[-1] - TWO_PI
    h = brentq(closure, 0.9 * h0, h0 * 1.0000001, xtol=1e-15, rtol=1e-15)
    return walk(h)[:-1]


def build_mesh(curve: ParametricCurve, n: int, spacing: str = "arclength") -> CurveMesh:
    """Mesh ``curve`` with ``n`` chord segments.

    ``spacing="arclength"`` places nodes at equal arclength; ``"chord"``
    makes every chord exactly the same length (the two agree on circles).
    """
    if int(n) != n or n < 8:
        raise InvalidArgument(f"need N >= 8 segments, got {n}")
    n = int(n)
    if not isinstance(curve, ParametricCurve):
        raise Unsupported(f"unsupported curve {curve!r}")
    if spacing == "arclength":
        if curve.kind == "circle":
            t = TWO_PI * np.arange(n) / n
        else:
            t = _arclength_params(curve, n)
    elif spacing == "chord":
        t = TWO_PI * np.arange(n) / n if curve.kind == "circle" else _chord_params(curve, n)
    else:
        raise InvalidArgument(f"unknown spacing {spacing!r}")
    return CurveMesh(curve, t, curve.position(t), spacing)


def parse_curve(text: str) -> ParametricCurve:
    """Parse ``kind[:p1,p2,...]``, e.g. ``circle:0.8`` or ``ellipse:1,0.5``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind not in CURVE_KINDS:
        raise Unsupported(f"unsupported curve kind {kind!r}")
    params = tuple(float(v) for v in rest.split(",") if v.strip()) if rest else ()
    if not params:
        params = {"circle": (1.0,), "ellipse": (1.0, 0.5), "kite": (1.0,), "polygon-smooth": (1.0, 5.0, 0.03)}[kind]
    return ParametricCurve(kind, params)


@dataclass(frozen=True)
class BasisSet:
    """Piecewise-linear hats on a mesh; hat i peaks at node i."""

    mesh: CurveMesh

    def locate(self, r, tol: float = 1e-10) -> tuple[int, float]:
        """Segment index and local coordinate s in [0,1] of a point on the mesh."""
        r = np.asarray(r, dtype=float)
        a = self.mesh.nodes
        d = np.roll(a, -1, axis=0) - a
        h2 = np.einsum("ij,ij->i", d, d)
        s = np.clip(np.einsum("ij,ij->i", r - a, d) / h2, 0.0, 1.0)
        dist = np.linalg.norm(a + s[:, None] * d - r, axis=1)
        seg = int(np.argmin(dist))
        if dist[seg] > tol * math.sqrt(h2[seg]):
            raise InvalidArgument("point does not lie on the mesh")
        return seg, float(s[seg])

    def evaluate(self, i: int, r) -> float:
        n = self.mesh.size
        seg, s = self.locate(r)
        i = i % n
        if seg == i:
            return 1.0 - s
        if (seg + 1) % n == i:
            return s
        return 0.0


def evaluate_basis(basis: BasisSet, i: int, r) -> float:
    return basis.evaluate(i, r)
