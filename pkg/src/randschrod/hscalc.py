"""Almost-analytic extensions and resolvent-integral functional calculus.

Compactly supported functions are stored as piecewise polynomials so every
derivative is available in closed form.  The matrix calculus integrates
dbar-weighted resolvents over the upper half-plane only and returns
(S + S*) / pi, which is Hermitian by construction and halves the solve
count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "hypot1",
    "smoothstep",
    "SmoothCompactFunction",
    "CutoffFunction",
    "CutoffReport",
    "AlmostAnalyticExtension",
    "DbarBoundReport",
    "LemmaIntegralReport",
    "QuadratureSpec",
    "extend",
    "dbar",
    "dbar_bound_check",
    "plateau_function",
    "shifted_weight",
    "leibniz_constant",
    "matrix_function_hs",
    "matrix_function_eigh",
    "lemma_integral_check",
    "write_extension_csv",
]

# target bytes per stacked resolvent chunk in matrix_function_hs
_CHUNK_BYTES = 25_000_000


def hypot1(x):
    """sqrt(x^2 + 1), elementwise."""
    return np.hypot(np.asarray(x, dtype=float), 1.0)


def smoothstep(order: int) -> Polynomial:
    """Monotone polynomial rising 0 -> 1 on [0,1].

    Derivatives 1..order vanish at both endpoints, so piecing it against
    constants yields a C^order function.  Degree is 2*order + 1.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    k = order
    coef = np.zeros(2 * k + 2)
    for j in range(k + 1):
        coef[k + 1 + j] = (-1.0) ** j * math.comb(k + j, j) * math.comb(2 * k + 1, k - j)
    return Polynomial(coef)


def _piece_index(breaks: np.ndarray, x: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(breaks, x, side="right") - 1
    return np.clip(idx, 0, len(breaks) - 2)


@dataclass(frozen=True)
class SmoothCompactFunction:
    """Piecewise polynomial, identically zero outside its breakpoint span.

    ``smoothness`` is the number of continuous derivatives across the
    knots (and at the support edges against the zero extension).
    Derivatives beyond it still evaluate, piecewise.
    """

    breakpoints: np.ndarray
    pieces: tuple[Polynomial, ...]
    smoothness: int
    label: str = ""

    def __post_init__(self) -> None:
        b = np.asarray(self.breakpoints, dtype=float)
        if b.ndim != 1 or len(b) < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.pieces) != len(b) - 1:
            raise ValueError(
                f"{len(b)} breakpoints require {len(b) - 1} pieces, got {len(self.pieces)}"
            )
        object.__setattr__(self, "breakpoints", b)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def support_length(self) -> float:
        return float(self.breakpoints[-1] - self.breakpoints[0])

    @property
    def support_radius(self) -> float:
        a, b = self.support
        return max(abs(a), abs(b))

    def _eval_pieces(self, pieces: Sequence[Polynomial], x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        a, b = self.support
        inside = (x >= a) & (x <= b)
        if np.any(inside):
            xi = x[inside]
            idx = _piece_index(self.breakpoints, xi)
            vals = np.empty_like(xi)
            for i, poly in enumerate(pieces):
                m = idx == i
                if np.any(m):
                    vals[m] = poly(xi[m])
            out[inside] = vals
        return out[0] if scalar else out

    def __call__(self, x):
        return self._eval_pieces(self.pieces, x)

    def derivative(self, r: int = 1) -> "SmoothCompactFunction":
        if r < 0:
            raise ValueError("derivative order must be >= 0")
        if r == 0:
            return self
        pieces = tuple(p.deriv(r) for p in self.pieces)
        return replace(self, pieces=pieces, smoothness=self.smoothness - r,
                       label=f"{self.label}^({r})" if self.label else "")

    def derivative_values(self, x, r: int):
        return self._eval_pieces(tuple(p.deriv(r) if r else p for p in self.pieces), x)

    def sup_norm(self, r: int = 0, samples_per_piece: int = 513) -> float:
        """Sampled sup of |f^(r)| (piecewise dense grid incl. knots)."""
        best = 0.0
        for i, poly in enumerate(self.pieces):
            q = poly.deriv(r) if r else poly
            xs = np.linspace(self.breakpoints[i], self.breakpoints[i + 1], samples_per_piece)
            best = max(best, float(np.max(np.abs(q(xs)))))
        return best

    def seminorm(self, n: int) -> float:
        """Sum of derivative sup-norms through order n."""
        return float(sum(self.sup_norm(r) for r in range(n + 1)))

    def multiplied_by(self, poly: Polynomial, label: str = "") -> "SmoothCompactFunction":
        # re-express the multiplier in each piece's local coordinates;
        # global coefficients of high-degree pieces are ill-conditioned
        pieces = tuple(
            p * poly.convert(domain=p.domain, window=p.window) for p in self.pieces
        )
        return replace(self, pieces=pieces, label=label or self.label)

    def __mul__(self, scalar: float) -> "SmoothCompactFunction":
        s = float(scalar)
        return replace(self, pieces=tuple(p * s for p in self.pieces))

    __rmul__ = __mul__

    def __add__(self, other: "SmoothCompactFunction") -> "SmoothCompactFunction":
        knots = np.unique(np.concatenate([self.breakpoints, other.breakpoints]))
        pieces = []
        for lo, hi in zip(knots[:-1], knots[1:]):
            mid = 0.5 * (lo + hi)
            acc = Polynomial([0.0], domain=[lo, hi], window=[0.0, 1.0])
            for f in (self, other):
                a, b = f.support
                if a <= mid <= b:
                    p = f.pieces[_piece_index(f.breakpoints, np.array([mid]))[0]]
                    acc = acc + p.convert(domain=[lo, hi], window=[0.0, 1.0])
            pieces.append(acc)
        return SmoothCompactFunction(
            breakpoints=knots,
            pieces=tuple(pieces),
            smoothness=min(self.smoothness, other.smoothness),
        )

    @staticmethod
    def polynomial_bump(a: float, b: float, order: int, label: str = "") -> "SmoothCompactFunction":
        """((x-a)(b-x))^(order+1), normalized to peak 1; C^order at the edges.

        Stored as (1 - v^2)^(order+1) in the local window v in [-1, 1],
        where the expansion is well conditioned at any degree.
        """
        if not a < b:
            raise ValueError("need a < b")
        k = order + 1
        base = Polynomial([1.0, 0.0, -1.0], domain=[a, b], window=[-1.0, 1.0]) ** k
        return SmoothCompactFunction(
            breakpoints=np.array([a, b]),
            pieces=(base,),
            smoothness=order,
            label=label or f"bump[{a},{b}]^{k}",
        )


@dataclass(frozen=True)
class CutoffReport:
    passed: bool
    slope_sup: float
    messages: tuple[str, ...]


@dataclass(frozen=True)
class CutoffFunction:
    """Even transition window: 1 on [-1,1], 0 outside (-2,2).

    ``step`` rises 0 -> 1 on [0,1]; the window falls by 1 - step(|x|-1)
    on the shell 1 < |x| < 2.  The quintic default has slope bound
    15/8, inside the required |t'| <= 2.
    """

    step: Polynomial
    slope_bound: float

    @staticmethod
    def default() -> "CutoffFunction":
        return CutoffFunction.from_order(2)

    @staticmethod
    def from_order(order: int) -> "CutoffFunction":
        step = smoothstep(order)
        dstep = step.deriv()
        us = np.linspace(0.0, 1.0, 4097)
        bound = float(np.max(np.abs(dstep(us))))
        if bound > 2.0:
            raise ValueError(
                f"smoothstep of order {order} has slope {bound:.4f} > 2; use order <= 2"
            )
        return CutoffFunction(step=step, slope_bound=bound)

    def value(self, x):
        raw = np.asarray(x, dtype=float)
        x = np.abs(np.atleast_1d(raw))
        out = np.ones_like(x)
        shell = (x > 1.0) & (x < 2.0)
        out[shell] = 1.0 - self.step(x[shell] - 1.0)
        out[x >= 2.0] = 0.0
        return out[0] if raw.ndim == 0 else out

    def slope(self, x):
        raw = np.asarray(x, dtype=float)
        x = np.atleast_1d(raw)
        out = np.zeros_like(x)
        shell = (np.abs(x) > 1.0) & (np.abs(x) < 2.0)
        d = self.step.deriv()
        out[shell] = -np.sign(x[shell]) * d(np.abs(x[shell]) - 1.0)
        return out[0] if raw.ndim == 0 else out

    def validate(self, samples: int = 2001) -> CutoffReport:
        msgs = []
        xs = np.linspace(-2.5, 2.5, samples)
        vals = self.value(xs)
        inner = np.abs(xs) < 1.0
        outer = np.abs(xs) > 2.0
        if np.max(np.abs(vals[inner] - 1.0)) > 1e-12:
            msgs.append("window is not identically 1 on |x| < 1")
        if np.max(np.abs(vals[outer])) > 1e-12:
            msgs.append("window does not vanish for |x| > 2")
        slope_sup = float(np.max(np.abs(self.slope(xs))))
        if slope_sup > 2.0:
            msgs.append(f"slope bound violated: sup |t'| = {slope_sup:.4f} > 2")
        # C^1 across the shell edges, sampled central differences
        h = 1e-6
        for edge in (-2.0, -1.0, 1.0, 2.0):
            fd = (self.value(edge + h) - self.value(edge - h)) / (2 * h)
            if abs(fd - self.slope(np.array(edge))) > 1e-4:
                msgs.append(f"transition not smooth at x = {edge}")
        return CutoffReport(passed=not msgs, slope_sup=slope_sup, messages=tuple(msgs))


@dataclass(frozen=True)
class AlmostAnalyticExtension:
    """Taylor-in-iy extension of a real function, damped off the real axis."""

    source: SmoothCompactFunction
    order: int
    cutoff: CutoffFunction
    derivs: tuple[SmoothCompactFunction, ...]  # orders 0 .. n+1

    @property
    def y_extent(self) -> float:
        """The extension vanishes for |y| >= 2*R + 2, R the support radius."""
        return 2.0 * self.source.support_radius + 2.0

    def cutoff_factor(self, x, y):
        return self.cutoff.value(np.asarray(y, dtype=float) / hypot1(x))

    def _taylor(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        iy = 1j * y
        acc = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        power = np.ones_like(acc)
        for r in range(self.order + 1):
            if r > 0:
                power = power * iy / r
            acc = acc + self.derivs[r](x) * power
        return acc

    def value(self, x, y):
        return self._taylor(x, y) * self.cutoff_factor(x, y)

    def dbar(self, x, y):
        """(1/2)(d/dx + i d/dy) of the extension, in closed form."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        bracket = hypot1(x)
        u = y / bracket
        s = self.cutoff.value(u)
        du = self.cutoff.slope(u)
        s_x = du * (-x * y / bracket**3)
        s_y = du / bracket
        n = self.order
        iy_n = (1j * y) ** n
        lead = 0.5 * self.derivs[n + 1](x) * iy_n / math.factorial(n) * s
        tail = 0.5 * (s_x + 1j * s_y) * self._taylor(x, y)
        return lead + tail


def extend(
    f: SmoothCompactFunction, n: int, t: CutoffFunction | None = None
) -> AlmostAnalyticExtension:
    """Build the order-n extension; f must be C^(n+1)."""
    if n < 0:
        raise ValueError("extension order must be >= 0")
    if f.smoothness < n + 1:
        raise ValueError(
            f"source function is C^{f.smoothness}; an order-{n} extension needs C^{n + 1}"
        )
    t = t if t is not None else CutoffFunction.default()
    derivs = tuple(f.derivative(r) for r in range(n + 2))
    return AlmostAnalyticExtension(source=f, order=n, cutoff=t, derivs=derivs)


def dbar(ext: AlmostAnalyticExtension, x, y):
    return ext.dbar(x, y)


@dataclass(frozen=True)
class DbarBoundReport:
    passed: bool
    min_slack: float
    max_slack: float
    violations: int
    worst_point: tuple[float, float]

    def __str__(self) -> str:  # pragma: no cover
        state = "ok" if self.passed else f"{self.violations} violations"
        return f"dbar bound {state}; min slack {self.min_slack:.3e} at {self.worst_point}"


def dbar_bound_check(
    ext: AlmostAnalyticExtension,
    xs: np.ndarray,
    ys: np.ndarray,
    atol: float = 1e-11,
    rtol: float = 1e-12,
) -> DbarBoundReport:
    """Verify |dbar| against its two-term envelope on a sample grid.

    The envelope is (1/2n!)|f^(n+1) s| |y|^n plus the shell term
    (3/<x>) 1{<x> < |y| < 2<x>} sum_r |f^(r)| |y|^r / r!.  In the region
    |y| < <x> the first term is an equality, so the comparison allows
    rounding at the scale of the terms themselves (``rtol``); a real
    violation indicates a cutoff with too steep a transition.
    """
    X, Y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float),
                       indexing="ij")
    lhs = np.abs(ext.dbar(X, Y))
    bracket = hypot1(X)
    s = ext.cutoff_factor(X, Y)
    n = ext.order
    absy = np.abs(Y)
    first = np.abs(ext.derivs[n + 1](X) * s) * absy**n / (2 * math.factorial(n))
    shell = (bracket < absy) & (absy < 2 * bracket)
    series = np.zeros_like(X)
    for r in range(n + 1):
        series += np.abs(ext.derivs[r](X)) * absy**r / math.factorial(r)
    second = np.where(shell, 3.0 / bracket * series, 0.0)
    slack = first + second - lhs
    tol = atol + rtol * np.maximum(lhs, first + second)
    worst = np.unravel_index(np.argmin(slack + tol), slack.shape)
    violations = int(np.sum(slack < -tol))
    return DbarBoundReport(
        passed=violations == 0,
        min_slack=float(slack[worst]),
        max_slack=float(np.max(slack)),
        violations=violations,
        worst_point=(float(X[worst]), float(Y[worst])),
    )


def plateau_function(energy: float, n: int) -> SmoothCompactFunction:
    """Smooth surrogate for the indicator of [0, E].

    Identically 1 on [0, E], supported in [-E/2, 3E/2], C^(n+1), with
    shoulders of width E/2.  Exact scale covariance: the function equals
    the E = 1 profile evaluated at x/E, so every derivative sup-norm
    scales as E^(-r).
    """
    if n < 1:
        raise ValueError("plateau order must be >= 1")
    if energy <= 0:
        raise ValueError(f"plateau energy must be positive, got {energy}")
    E = float(energy)
    step = smoothstep(n + 1)
    # pieces live in local [0,1] coordinates; the falling shoulder uses
    # the reflection identity S(1-u) = 1 - S(u)
    rise = Polynomial(step.coef, domain=[-E / 2, 0.0], window=[0.0, 1.0])
    fall_coef = -step.coef.copy()
    fall_coef[0] += 1.0
    fall = Polynomial(fall_coef, domain=[E, 1.5 * E], window=[0.0, 1.0])
    flat = Polynomial([1.0], domain=[0.0, E], window=[0.0, 1.0])
    return SmoothCompactFunction(
        breakpoints=np.array([-E / 2, 0.0, E, 1.5 * E]),
        pieces=(rise, flat, fall),
        smoothness=n + 1,
        label=f"plateau(E={E:g}, n={n})",
    )


def leibniz_constant(n: int, q: int, lam: float, support: tuple[float, float]) -> float:
    """Seminorm amplification bound for multiplying by (lam + x)^q.

    From the product rule: ||f^(j)|| <= sum_i C(j,i) q!/(q-i)! M^(q-i)
    ||g^(j-i)|| with M = sup of (lam + x) on the support; collecting
    coefficients per ||g^(r)|| and maximizing gives the constant.
    """
    a, b = support
    m = lam + b
    totals = np.zeros(n + 2)
    for r in range(n + 2):
        for j in range(r, n + 2):
            i = j - r
            if i > q:
                continue
            falling = math.factorial(q) // math.factorial(q - i)
            totals[r] += math.comb(j, i) * falling * m ** (q - i)
    return float(np.max(totals))


def shifted_weight(
    g: SmoothCompactFunction, lam: float, q: int, order_n: int | None = None
) -> SmoothCompactFunction:
    """Multiply g by the polynomial weight (lam + x)^q.

    Checks the seminorm inflation against the product-rule constant; a
    failure here would mean the sampled sup-norms are inconsistent.
    """
    if q < 0 or int(q) != q:
        raise ValueError(f"weight exponent must be a nonnegative integer, got {q}")
    a, b = g.support
    if lam + a <= 0:
        raise ValueError(f"lam + x must stay positive on the support; lam + {a} <= 0")
    n = g.smoothness - 1 if order_n is None else order_n
    weight = Polynomial([lam, 1.0]) ** int(q)
    f = g.multiplied_by(weight, label=f"(lam+x)^{q} * {g.label}" if g.label else "")
    c4 = leibniz_constant(n, int(q), lam, g.support)
    lhs = f.seminorm(n + 1)
    rhs = c4 * g.seminorm(n + 1)
    # 1e-2 slack: sup-norms are sampled, so either side can be slightly low
    if lhs > rhs * (1 + 1e-2):
        raise RuntimeError(
            f"seminorm bound failed: {lhs:.6g} > {c4:.6g} * {g.seminorm(n + 1):.6g}"
        )
    return f


@dataclass(frozen=True)
class QuadratureSpec:
    """Node layout for the half-plane resolvent integral.

    The default "gauss" scheme covers x by uniform Gauss-Legendre panels
    (panel count a multiple of 4, so the knots of the plateau family land
    on panel edges) and, per x node, covers y by a geometric panel stack
    whose edges snap to the cutoff breakpoints <x> and 2<x>; between
    those the integrand is polynomial-times-resolvent and the composite
    rule converges geometrically.  The "midpoint" scheme is the plain
    alternative: uniform x points, one global geometric y stack of
    midpoint panels descending from ``y_max``.  With eps_y = 0 the
    region below the deepest panel is dropped, which is harmless for
    extension order n >= 2 (integrand is O(|y|^(n-1))).

    ``x_points`` is the x node budget; the gauss scheme rounds it to
    whole panels of 8.
    """

    x_min: float
    x_max: float
    y_max: float
    x_points: int = 128
    y_panels: int = 18
    y_subnodes: int = 6
    eps_y: float = 0.0
    scheme: str = "gauss"
    panel_ratio: float = 0.5

    def __post_init__(self) -> None:
        if not self.x_min < self.x_max:
            raise ValueError("empty x interval")
        if self.eps_y < 0:
            raise ValueError("eps_y must be >= 0")
        if self.y_max <= self.eps_y:
            raise ValueError("y_max must exceed eps_y")
        if self.x_points < 8 or self.y_panels * self.y_subnodes < 8:
            raise ValueError("resolution must be >= 8 nodes per axis")
        if self.scheme not in ("midpoint", "gauss"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0.0 < self.panel_ratio < 1.0:
            raise ValueError("panel_ratio must lie in ]0,1[")

    @staticmethod
    def for_function(f: SmoothCompactFunction, **kwargs) -> "QuadratureSpec":
        a, b = f.support
        return QuadratureSpec(
            x_min=a, x_max=b, y_max=2.0 * f.support_radius + 2.0, **kwargs
        )

    def refine(self) -> "QuadratureSpec":
        """Double the per-axis resolution (and deepen the panel stack)."""
        return replace(
            self,
            x_points=2 * self.x_points,
            y_subnodes=2 * self.y_subnodes,
            y_panels=self.y_panels + 4,
        )

    def x_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        if self.scheme == "gauss":
            panels = max(4, 4 * max(1, round(self.x_points / 32)))
            gn, gw = np.polynomial.legendre.leggauss(8)
            edges = np.linspace(self.x_min, self.x_max, panels + 1)
            half = 0.5 * (edges[1] - edges[0])
            mids = 0.5 * (edges[:-1] + edges[1:])
            nodes = (mids[:, None] + half * gn[None, :]).ravel()
            weights = np.broadcast_to(half * gw, (panels, 8)).ravel()
            return nodes, weights
        h = (self.x_max - self.x_min) / self.x_points
        return self.x_min + (np.arange(self.x_points) + 0.5) * h, np.full(self.x_points, h)

    def _panel_edges(self) -> np.ndarray:
        edges = [self.y_max]
        for _ in range(self.y_panels):
            nxt = edges[-1] * self.panel_ratio
            if nxt <= self.eps_y:
                break
            edges.append(nxt)
        if self.eps_y > 0:
            edges.append(self.eps_y)
        return np.asarray(edges)

    def positive_y_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        edges = self._panel_edges()
        nodes, weights = [], []
        if self.scheme == "gauss":
            gn, gw = np.polynomial.legendre.leggauss(self.y_subnodes)
        for top, bot in zip(edges[:-1], edges[1:]):
            if self.scheme == "gauss":
                half = 0.5 * (top - bot)
                nodes.append(bot + half * (gn + 1.0))
                weights.append(half * gw)
            else:
                h = (top - bot) / self.y_subnodes
                nodes.append(bot + (np.arange(self.y_subnodes) + 0.5) * h)
                weights.append(np.full(self.y_subnodes, h))
        return np.concatenate(nodes), np.concatenate(weights)

    def snapped_y_nodes(self, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Gauss y nodes whose panel edges honor the cutoff breakpoints.

        The integrand is analytic in y on ]0, b[ and a polynomial times
        a resolvent on ]b, 2b[ (b = <x>), so panels that end exactly at
        b, 1.5b, 2b see no interior kinks; below b the usual geometric
        stack resolves the resolvent's approach to the real axis.
        """
        edges = [2.0 * b, 1.5 * b, b]
        bottom = b
        for _ in range(self.y_panels):
            nxt = bottom * self.panel_ratio
            if nxt <= self.eps_y:
                break
            edges.append(nxt)
            bottom = nxt
        if self.eps_y > 0.0:
            edges = [e for e in edges if e > self.eps_y]
            edges.append(self.eps_y)
        if len(edges) < 2:
            return np.empty(0), np.empty(0)
        edges = np.asarray(edges)
        gn, gw = np.polynomial.legendre.leggauss(self.y_subnodes)
        half = 0.5 * (edges[:-1] - edges[1:])
        nodes = (edges[1:, None] + half[:, None] * (gn[None, :] + 1.0)).ravel()
        weights = (half[:, None] * gw[None, :]).ravel()
        return nodes, weights


def _require_hermitian(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(float(np.linalg.norm(a, ord="fro")), 1.0)
    if float(np.linalg.norm(a - a.conj().T, ord="fro")) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    return a


def matrix_function_hs(
    a: np.ndarray,
    f: SmoothCompactFunction,
    n: int = 4,
    quad: QuadratureSpec | None = None,
    cutoff: CutoffFunction | None = None,
) -> np.ndarray:
    """Apply f to a Hermitian matrix through the resolvent integral.

    Quadratures the plane integral (1/pi) iint dbar(x,y) (A - z)^{-1}
    with z = x + iy.  Conjugate symmetry of the integrand folds the
    lower half-plane into the Hermitian transpose of the upper-half sum,
    so only y > 0 nodes are solved.
    """
    a = _require_hermitian(a)
    quad = quad if quad is not None else QuadratureSpec.for_function(f)
    if quad.eps_y == 0.0 and n < 2:
        raise ValueError("eps_y = 0 requires extension order n >= 2")
    sa, sb = f.support
    needed_y = 2.0 * f.support_radius + 2.0
    tol = 1e-12 * max(1.0, abs(sa), abs(sb))
    if quad.x_min > sa + tol or quad.x_max < sb - tol or quad.y_max < needed_y - tol:
        raise ValueError(
            f"quadrature rectangle [{quad.x_min}, {quad.x_max}] x [0, {quad.y_max}] "
            f"does not cover supp f x [0, {needed_y}]"
        )
    ext = extend(f, n, cutoff)

    xs, wx = quad.x_nodes()
    if quad.scheme == "gauss":
        zx_parts, zy_parts, w_parts = [], [], []
        for x, wxi in zip(xs, wx):
            ys, wys = quad.snapped_y_nodes(hypot1(x))
            zx_parts.append(np.full(ys.shape, x))
            zy_parts.append(ys)
            w_parts.append(wxi * wys)
        zx = np.concatenate(zx_parts)
        zy = np.concatenate(zy_parts)
        w = np.concatenate(w_parts)
    else:
        ys, wy = quad.positive_y_nodes()
        zx = np.repeat(xs, ys.size)
        zy = np.tile(ys, xs.size)
        w = (wx[:, None] * wy[None, :]).ravel()
    coeff = w * ext.dbar(zx, zy)
    zs = zx + 1j * zy
    live = np.abs(coeff) > 0.0
    zs, coeff = zs[live], coeff[live]

    dim = a.shape[0]
    eye = np.eye(dim)
    chunk = max(1, _CHUNK_BYTES // (16 * dim * dim))
    s = np.zeros((dim, dim), dtype=complex)
    for start in range(0, len(zs), chunk):
        z = zs[start : start + chunk]
        stacked = a[None, :, :] - z[:, None, None] * eye[None, :, :]
        inv = np.linalg.inv(stacked)
        s += np.tensordot(coeff[start : start + chunk], inv, axes=1)
    return (s + s.conj().T) / math.pi


def matrix_function_eigh(a: np.ndarray, f) -> np.ndarray:
    """Eigendecomposition route: Q f(diag) Q*.  The comparison oracle."""
    a = _require_hermitian(a)
    w, v = np.linalg.eigh(a)
    return (v * np.asarray(f(w), dtype=float)) @ v.conj().T


@dataclass(frozen=True)
class LemmaIntegralRow:
    scale: int
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


@dataclass(frozen=True)
class LemmaIntegralReport:
    rows: tuple[LemmaIntegralRow, ...]
    onset_scale: int | None
    seminorm: float
    support_length: float

    @property
    def passed(self) -> bool:
        return self.onset_scale is not None


def lemma_integral_check(
    f: SmoothCompactFunction,
    n: int,
    c3: float,
    scales: Sequence[int],
    dimension: int,
    quad: QuadratureSpec | None = None,
    cutoff: CutoffFunction | None = None,
) -> LemmaIntegralReport:
    """Weighted dbar integral against its closed-form decay bound.

    Evaluates iint |dbar(x,y)| |y|^(-2d-2) exp(-c3 |y| l) dx dy and
    compares with 2 c3^(-n+2d+2) |||f|||_(n+1) |supp f| l^(-n+2d+1) for
    each scale l, reporting the onset scale from which the bound holds
    onward.  The y-singularity is integrable only for n >= 2d + 2.
    """
    d = dimension
    if n < 2 * d + 2:
        raise ValueError(
            f"order n = {n} < 2d + 2 = {2 * d + 2}: the |y|^(-2d-2) weight diverges"
        )
    if c3 <= 0:
        raise ValueError("decay constant must be positive")
    sa, sb = f.support
    if sa < -0.5 - 1e-12 or sb > 0.5 + 1e-12:
        raise ValueError(f"support [{sa}, {sb}] must lie inside [-1/2, 1/2]")
    if quad is None:
        # midpoint: |dbar| has sign-change creases that defeat high-order rules
        quad = QuadratureSpec.for_function(
            f, x_points=96, y_panels=40, y_subnodes=8, scheme="midpoint"
        )
    ext = extend(f, n, cutoff)

    xs, wx = quad.x_nodes()
    ys, wy = quad.positive_y_nodes()
    absd = np.abs(ext.dbar(xs[:, None], ys[None, :]))
    base = (wx[:, None] * wy[None, :]) * absd * ys[None, :] ** (-2 * d - 2)

    norm = f.seminorm(n + 1)
    length = f.support_length
    rows = []
    for l in scales:
        # factor 2: the integrand is even in y
        lhs = 2.0 * float(np.sum(base * np.exp(-c3 * ys[None, :] * l)))
        rhs = 2.0 * c3 ** (-n + 2 * d + 2) * norm * length * l ** (-n + 2 * d + 1)
        rows.append(LemmaIntegralRow(scale=int(l), lhs=lhs, rhs=rhs))
    onset = None
    for i in range(len(rows)):
        if all(r.holds for r in rows[i:]):
            onset = rows[i].scale
            break
    return LemmaIntegralReport(
        rows=tuple(rows), onset_scale=onset, seminorm=norm, support_length=length
    )


def write_extension_csv(
    ext: AlmostAnalyticExtension, xs: np.ndarray, ys: np.ndarray, path: str
) -> None:
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    vals = ext.value(X, Y)
    der = ext.dbar(X, Y)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("x,y,re_ext,im_ext,re_dbar,im_dbar\n")
        for i in range(X.shape[0]):
            for j in range(X.shape[1]):
                fh.write(
                    f"{X[i, j]!r},{Y[i, j]!r},{vals[i, j].real!r},{vals[i, j].imag!r},"
                    f"{der[i, j].real!r},{der[i, j].imag!r}\n"
                )
