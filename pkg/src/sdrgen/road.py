"""Road centerline and the context splines laid out across it.

The centerline is a centripetal Catmull-Rom curve through control points on a
flat ground plane (x, y; z up).  Every context spline is a parallel offset of
the centerline: a point at station ``s`` and lateral offset ``d`` is
``C(s) + d * N(s)`` with ``N`` the left-pointing ground normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .rng import RngStream
from .sampling import GlobalParams

MAX_HEADING_DEG = 30.0
TURN_DEG = 30.0
_GL_X = np.array([-math.sqrt(3 / 5), 0.0, math.sqrt(3 / 5)])
_GL_W = np.array([5 / 9, 8 / 9, 5 / 9])


@dataclass(frozen=True)
class ControlPoint:
    position: tuple[float, float]
    heading: float  # degrees, CCW-positive, relative to the initial direction


@dataclass(frozen=True)
class SplineFrame:
    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    up: np.ndarray


class CenterlineSpline:
    """Centripetal Catmull-Rom through ``points`` with a cached arclength table."""

    samples_per_segment = 32

    def __init__(self, points, headings=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("need at least two 2D control points")
        chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(chords < 1e-9):
            raise ValueError("degenerate spline: coincident consecutive control points")
        self.points = pts
        if headings is None:
            d = np.diff(pts, axis=0)
            h = np.degrees(np.arctan2(d[:, 1], d[:, 0]))
            headings = np.append(h, h[-1])
        self.control_points = tuple(
            ControlPoint((float(p[0]), float(p[1])), float(hd)) for p, hd in zip(pts, headings)
        )
        self._coeffs = self._build_coeffs(pts)
        self._build_table()

    # -- construction -------------------------------------------------------

    @staticmethod
    def _build_coeffs(p: np.ndarray) -> np.ndarray:
        ext = np.vstack([2 * p[0] - p[1], p, 2 * p[-1] - p[-2]])
        p0, p1, p2, p3 = ext[:-3], ext[1:-2], ext[2:-1], ext[3:]
        d01 = np.sqrt(np.linalg.norm(p1 - p0, axis=1))[:, None]
        d12 = np.sqrt(np.linalg.norm(p2 - p1, axis=1))[:, None]
        d23 = np.sqrt(np.linalg.norm(p3 - p2, axis=1))[:, None]
        m1 = d12 * ((p1 - p0) / d01 - (p2 - p0) / (d01 + d12) + (p2 - p1) / d12)
        m2 = d12 * ((p2 - p1) / d12 - (p3 - p1) / (d12 + d23) + (p3 - p2) / d23)
        # cubic a + b u + c u^2 + d u^3 per segment, shape (nseg, 4, 2)
        a = p1
        b = m1
        c = -3 * p1 - 2 * m1 + 3 * p2 - m2
        d = 2 * p1 + m1 - 2 * p2 + m2
        return np.stack([a, b, c, d], axis=1)

    def _build_table(self):
        k = self.samples_per_segment
        nseg = len(self._coeffs)
        t = np.linspace(0.0, nseg, nseg * k + 1)
        lo, hi = t[:-1], t[1:]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        pieces = np.zeros(len(lo))
        for x, w in zip(_GL_X, _GL_W):
            pieces += w * half * self._speed(mid + half * x)
        self._table_t = t
        self._table_s = np.concatenate([[0.0], np.cumsum(pieces)])
        self.length = float(self._table_s[-1])
        if self.length <= 0:
            raise ValueError("degenerate spline: zero length")

    # -- evaluation ---------------------------------------------------------

    @property
    def n_segments(self) -> int:
        return len(self._coeffs)

    def _seg(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.floor(t).astype(int), 0, self.n_segments - 1)
        return i, t - i

    def point(self, t) -> np.ndarray:
        i, u = self._seg(t)
        c = self._coeffs[i]
        u = u[..., None]
        return c[..., 0, :] + u * (c[..., 1, :] + u * (c[..., 2, :] + u * c[..., 3, :]))

    def derivative(self, t) -> np.ndarray:
        i, u = self._seg(t)
        c = self._coeffs[i]
        u = u[..., None]
        return c[..., 1, :] + u * (2 * c[..., 2, :] + 3 * u * c[..., 3, :])

    def second_derivative(self, t) -> np.ndarray:
        i, u = self._seg(t)
        c = self._coeffs[i]
        return 2 * c[..., 2, :] + 6 * u[..., None] * c[..., 3, :]

    def _speed(self, t) -> np.ndarray:
        return np.linalg.norm(self.derivative(t), axis=-1)

    def curvature(self, t) -> np.ndarray:
        d1 = self.derivative(t)
        d2 = self.second_derivative(t)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3

    def param_at(self, s) -> np.ndarray:
        """Curve parameter at arclength ``s`` (table inverse)."""
        return np.interp(s, self._table_s, self._table_t)

    def arclength_to(self, t) -> np.ndarray:
        """Arclength from the start to parameter ``t`` by direct quadrature."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        k = self.samples_per_segment
        for j, tj in enumerate(t):
            base = int(np.clip(np.floor(tj * k), 0, len(self._table_t) - 1))
            t0 = self._table_t[base]
            half = 0.5 * (tj - t0)
            mid = 0.5 * (tj + t0)
            extra = sum(w * half * self._speed(mid + half * x) for x, w in zip(_GL_X, _GL_W))
            out[j] = self._table_s[base] + extra
        return out

    def sample(self, s):
        """Positions, unit tangents and left normals at stations ``s`` (arrays)."""
        t = self.param_at(s)
        p = self.point(t)
        d = self.derivative(t)
        tan = d / np.linalg.norm(d, axis=-1, keepdims=True)
        nrm = np.stack([-tan[..., 1], tan[..., 0]], axis=-1)
        return p, tan, nrm


def arclength(spline) -> float:
    if isinstance(spline, CenterlineSpline):
        return spline.length
    return spline.length


@dataclass(frozen=True)
class SurfaceAppearance:
    base_color: tuple[float, float, float]
    texture_class: str  # asphalt, grass, concrete, dirt
    darkness: float
    roughness: float


@dataclass(frozen=True)
class Imperfection:
    kind: str  # pothole, crack, oil_spill
    s: float
    u: float  # absolute lateral offset from the centerline
    extent: float
    intensity: float
    angle: float = 0.0  # degrees, orientation relative to the road tangent


@dataclass(frozen=True)
class ContextSpline:
    spline_id: int
    kind: str  # lane, median, sidewalk, gutter, side_stretch
    offset: float  # lateral offset of the strip center from the centerline
    width: float
    surface: SurfaceAppearance
    centerline: CenterlineSpline = field(repr=False, compare=False)
    lane_index: int | None = None
    side: int = 0  # +1 left of centerline, -1 right
    imperfections: tuple[Imperfection, ...] = ()

    @property
    def left_edge(self) -> float:
        return self.offset + self.width / 2

    @property
    def right_edge(self) -> float:
        return self.offset - self.width / 2

    @property
    def direction(self) -> int:
        """+1 if traffic follows increasing station, -1 for oncoming lanes."""
        if self.lane_index is None:
            return 0
        return 1 if self.lane_index > 0 else -1

    @property
    def length(self) -> float:
        return offset_arclength(self.centerline, self.offset)

    def to_dict(self) -> dict:
        return {
            "spline_id": self.spline_id, "kind": self.kind, "offset": self.offset, "width": self.width,
            "lane_index": self.lane_index, "side": self.side,
            "surface": {"base_color": list(self.surface.base_color), "texture_class": self.surface.texture_class,
                        "darkness": self.surface.darkness, "roughness": self.surface.roughness},
            "imperfections": [vars(i) for i in self.imperfections],
        }


def offset_arclength(center: CenterlineSpline, offset: float) -> float:
    """Length of the parallel curve at ``offset`` via quadrature of |1 - k*d| |C'|."""
    k = 64
    nseg = center.n_segments
    t = np.linspace(0.0, nseg, nseg * k + 1)
    lo, hi = t[:-1], t[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    total = 0.0
    for x, w in zip(_GL_X, _GL_W):
        tt = mid + half * x
        total += float(np.sum(w * half * np.abs(1.0 - center.curvature(tt) * offset) * center._speed(tt)))
    return total


def frame_at(spline, s: float, u: float = 0.0) -> SplineFrame:
    """Placement frame at station ``s`` and lateral ``u`` relative to the strip center."""
    if isinstance(spline, CenterlineSpline):
        center, offset = spline, 0.0
    else:
        center, offset = spline.centerline, spline.offset
        if abs(u) > spline.width / 2 + 1e-9:
            raise DomainError(f"lateral {u} outside strip of width {spline.width}")
    if not (0.0 <= s <= center.length + 1e-9):
        raise DomainError(f"station {s} outside [0, {center.length}]")
    p, tan, nrm = center.sample(np.array([s]))
    pos = p[0] + (offset + u) * nrm[0]
    return SplineFrame(
        position=np.array([pos[0], pos[1], 0.0]),
        tangent=np.array([tan[0, 0], tan[0, 1], 0.0]),
        normal=np.array([nrm[0, 0], nrm[0, 1], 0.0]),
        up=np.array([0.0, 0.0, 1.0]),
    )


def heading_at(center: CenterlineSpline, s) -> np.ndarray:
    """Tangent direction (degrees, CCW from +x) at stations ``s``."""
    _, tan, _ = center.sample(np.asarray(s, dtype=float))
    return np.degrees(np.arctan2(tan[..., 1], tan[..., 0]))


def legal_turns(heading: float) -> list[float]:
    """Turns that keep the cumulative heading within the hairpin bound."""
    return [d for d in (TURN_DEG, 0.0, -TURN_DEG) if abs(heading + d) <= MAX_HEADING_DEG + 1e-9]


def generate_centerline(rng: RngStream, globals_: GlobalParams, *, n_points: int = 100,
                        segment_length: float = 8.0,
                        turn_weights: dict[str, float] | None = None) -> CenterlineSpline:
    """Random right/left/straight road, one decision every ``turn_decision_period`` points.

    ``turn_weights`` keys are ``left``, ``straight`` and ``right`` (uniform by
    default); a decision is drawn from the currently legal turns only.
    """
    period = int(globals_.turn_decision_period)
    if period < 1:
        raise ValueError("turn_decision_period must be >= 1")
    weights = {"left": 1.0, "straight": 1.0, "right": 1.0}
    if turn_weights:
        weights.update(turn_weights)
    name = {TURN_DEG: "left", 0.0: "straight", -TURN_DEG: "right"}

    heading = 0.0
    headings = np.zeros(n_points)
    pts = np.zeros((n_points, 2))
    for i in range(n_points - 1):
        if i % period == 0:
            options = [d for d in legal_turns(heading) if weights[name[d]] > 0]
            if options:
                heading += options[rng.choice_index([weights[name[d]] for d in options])]
        headings[i] = heading
        rad = math.radians(heading)
        pts[i + 1] = pts[i] + segment_length * np.array([math.cos(rad), math.sin(rad)])
    headings[-1] = heading
    return CenterlineSpline(pts, headings)


def _cross_section(g: GlobalParams):
    """Strip kinds and widths from the left outer edge to the right outer edge."""
    n_ego = (g.lane_count + 1) // 2
    n_on = g.lane_count // 2
    left: list[tuple[str, float, int | None]] = [("side_stretch", g.side_stretch_width, None)]
    if g.has_sidewalk:
        left.append(("sidewalk", g.sidewalk_width, None))
    left.append(("gutter", g.gutter_width, None))
    left += [("lane", g.lane_width, -(n_on - k)) for k in range(n_on)]
    right: list[tuple[str, float, int | None]] = [("lane", g.lane_width, k + 1) for k in range(n_ego)]
    right.append(("gutter", g.gutter_width, None))
    if g.has_sidewalk:
        right.append(("sidewalk", g.sidewalk_width, None))
    right.append(("side_stretch", g.side_stretch_width, None))
    median = [("median", g.median_width, None)] if g.has_median else []
    return left, median, right


_SURFACE = {
    "lane": ("asphalt", (0.30, 0.30, 0.31)),
    "median": ("grass", (0.22, 0.42, 0.15)),
    "sidewalk": ("concrete", (0.62, 0.61, 0.58)),
    "gutter": ("concrete", (0.45, 0.45, 0.44)),
}
_STRETCH = {
    "fields": {"grass": 3.0, "dirt": 1.0},
    "houses": {"grass": 4.0, "dirt": 1.0},
    "buildings": {"concrete": 2.0, "grass": 1.0},
}
_STRETCH_COLOR = {
    "grass": (0.25, 0.45, 0.16),
    "dirt": (0.42, 0.33, 0.22),
    "concrete": (0.55, 0.54, 0.52),
    "asphalt": (0.30, 0.30, 0.31),
}


def sample_surface(rng: RngStream, kind: str, style: str) -> SurfaceAppearance:
    if kind == "side_stretch":
        names = list(_STRETCH[style])
        tex = names[rng.choice_index([_STRETCH[style][n] for n in names])]
        base = _STRETCH_COLOR[tex]
    elif kind == "median" and rng.random() < 0.2:
        tex, base = "dirt", _STRETCH_COLOR["dirt"]
    else:
        tex, base = _SURFACE[kind]
    darkness = rng.uniform(0.0, 0.5)
    hue_jitter = np.array([rng.uniform(-0.04, 0.04) for _ in range(3)])
    color = np.clip(np.asarray(base) * (1.2 - 0.6 * darkness) + hue_jitter, 0.02, 0.95)
    return SurfaceAppearance(
        base_color=tuple(float(c) for c in color), texture_class=tex,
        darkness=darkness, roughness=rng.uniform(0.6, 1.0),
    )


_IMPERFECTION_EXTENT = {"pothole": (0.3, 1.0), "crack": (1.0, 4.0), "oil_spill": (0.5, 2.0)}


def _imperfections(rng: RngStream, center: CenterlineSpline, offset: float, width: float,
                   density_per_100m: float) -> tuple[Imperfection, ...]:
    n = int(rng.poisson(density_per_100m * center.length / 100.0)) if density_per_100m > 0 else 0
    out = []
    for _ in range(n):
        kind = ("pothole", "crack", "oil_spill")[rng.integers(0, 2)]
        lo, hi = _IMPERFECTION_EXTENT[kind]
        extent = min(rng.uniform(lo, hi), width * 0.9)
        reach = max(0.0, width / 2 - extent / 2)
        u = offset + rng.uniform(-reach, reach)
        out.append(Imperfection(kind=kind, s=rng.uniform(0.0, center.length), u=u, extent=extent,
                                intensity=rng.uniform(0.3, 1.0), angle=rng.uniform(-90.0, 90.0)))
    return tuple(out)


def build_context_splines(center: CenterlineSpline, g: GlobalParams, rng: RngStream, *,
                          imperfection_density: float = 3.0) -> list[ContextSpline]:
    """Strips ordered from the left outer edge to the right outer edge.

    The direction split sits at lateral 0 (the median is centered on it), the
    ego direction is on the right (negative lateral) and gets the extra lane
    for odd lane counts.
    """
    if g.lane_count < 1:
        raise ValueError("lane_count must be >= 1")
    left, median, right = _cross_section(g)
    half_median = g.median_width / 2 if median else 0.0

    layout: list[tuple[str, float, int | None, float, int]] = []
    edge = half_median + sum(w for _, w, _ in left)
    for kind, w, lane in left:
        layout.append((kind, w, lane, edge - w / 2, 1))
        edge -= w
    for kind, w, lane in median:
        layout.append((kind, w, lane, 0.0, 0))
    edge = -half_median
    for kind, w, lane in right:
        layout.append((kind, w, lane, edge - w / 2, -1))
        edge -= w

    out = []
    for i, (kind, w, lane, off, side) in enumerate(layout):
        srng = rng.fork(f"spline{i}")
        surface = sample_surface(srng, kind, g.side_stretch_style)
        imps = _imperfections(srng, center, off, w, imperfection_density) if kind == "lane" else ()
        out.append(ContextSpline(spline_id=i, kind=kind, offset=off, width=w, surface=surface,
                                 centerline=center, lane_index=lane, side=side, imperfections=imps))
    return out
