"""Diffeomorphism expression trees, flow maps and transit times.

A :class:`Diffeo1D` node evaluates to jets of any order and knows how to
invert itself pointwise (closed form where available, monotone root solve
otherwise).  Circle diffeomorphisms are handled through their lifts: a node
with a circle domain evaluates the lift ``F`` with ``F(x+1) = F(x) + 1``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .fields import Circle, Interval, VectorField1D
from .jets import Jet, JetError, jet_compose, jet_divide, jet_invert

#: Default per-step integrator tolerance for flow maps.
FLOW_TOL = 1e-12

#: Above this |t| a value-only flow is computed by inverting the transit
#: time instead of stepping the ODE, which would need ~|t|/step_size steps.
LONG_TIME_SWITCH = 32.0


class FlowError(RuntimeError):
    """Raised when flow integration or transit-time evaluation fails."""


# ---------------------------------------------------------------------------
# flow integration with jet transport
# ---------------------------------------------------------------------------

def _flow_rhs(X: VectorField1D, x0: float, state: np.ndarray, r: int):
    """Time derivative of the jet coefficients of the flow map at ``x0``.

    The k-th spatial derivative of the flow satisfies the variational system
    d/dt D^k phi_t = D^k (X o phi_t), evaluated by jet composition.
    """
    if not np.all(np.isfinite(state)):
        return None
    try:
        if r == 0:
            # order 0 needs only the field value; leaves may provide a fast
            # scalar path that skips jet arithmetic entirely
            return np.array([X(float(state[0]))])
        xj = X.eval_jet(float(state[0]), r)
        inner = Jet(x0, r, tuple(state))
        return np.array(jet_compose(xj, inner).coeffs)
    except (JetError, OverflowError, ZeroDivisionError):
        return None


def _flow_by_transit(X: VectorField1D, t: float, x: float):
    """Value of the time-``t`` flow by solving ``tau(x, y) = t`` for ``y``.

    Only usable when the trajectory stays in a stretch where X keeps its
    sign, which requires the neighbouring recorded zeros (or finite domain
    ends) as a bracket.  Returns None when that data is missing, so the
    caller can fall back to integration.
    """
    v = X(x)
    if v == 0.0:
        return x
    zeros = sorted(getattr(X, "zeros", ()) or ())
    lo = max((z for z in zeros if z < x), default=X.domain.lo)
    hi = min((z for z in zeros if z > x), default=X.domain.hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return None
    end = hi if (v > 0.0) == (t > 0.0) else lo

    def g(y):
        return transit_time(X, x, float(y)) - t

    # g(x) = -t; push y toward the blocking end until the sign flips, then
    # solve on the last subinterval
    prev = x
    for k in range(1, 64):
        y_try = end - (end - x) * 0.5**k
        try:
            gy = g(y_try)
        except FlowError:
            return None
        if not math.isfinite(gy):
            return None
        if (gy > 0.0) == (t > 0.0):
            a, b = (prev, y_try) if prev < y_try else (y_try, prev)
            return brentq(g, a, b, xtol=1e-300, rtol=8.9e-16)
        prev = y_try
    # the target time outruns quadrature resolution of tau near the zero
    return prev


def flow(X: VectorField1D, t: float, x: float, r: int = 0, tol: float = FLOW_TOL) -> Jet:
    """Jet of the time-``t`` flow map of ``X`` at ``x``, to order ``r``.

    Adaptive high-order Runge-Kutta (DOP853) on the variational jet system;
    relative and absolute tolerance ``tol``.
    """
    x = float(x)
    t = float(t)
    state = np.array(Jet.identity(x, r).coeffs) if r >= 1 else np.array([x])
    if t == 0.0:
        return Jet(x, r, tuple(state))
    if r == 0 and abs(t) >= LONG_TIME_SWITCH:
        y = _flow_by_transit(X, t, x)
        if y is not None:
            return Jet(x, 0, (float(y),))

    def rhs(_s, y):
        d = _flow_rhs(X, x, y, r)
        if d is None:
            raise FlowError(f"flow left the evaluable region at x={x}, t={t}")
        return d

    sol = solve_ivp(rhs, (0.0, t), state, method="DOP853", rtol=tol,
                    atol=tol, first_step=min(0.05, abs(t)))
    if not sol.success:
        raise FlowError(f"flow integration failed at x={x}, t={t}: {sol.message}")
    return Jet(x, r, tuple(sol.y[:, -1]))


def transit_time(X: VectorField1D, p: float, q: float) -> float:
    """Flow time from ``p`` to ``q``: the integral of ``1/X`` over [p, q].

    Refuses when X vanishes (or changes sign) between the endpoints.
    """
    p, q = float(p), float(q)
    if p == q:
        return 0.0
    lo, hi = min(p, q), max(p, q)
    sample = np.linspace(lo, hi, 33)
    vals = np.array([X(float(s)) for s in sample])
    if np.any(vals == 0.0) or (np.min(vals) < 0.0 < np.max(vals)):
        raise FlowError(f"vector field vanishes on [{lo}, {hi}]; transit time undefined")
    pts = [z for z in getattr(X, "zeros", ()) if lo < z < hi]
    val, _ = quad(lambda s: 1.0 / X(s), p, q, points=pts or None, limit=200,
                  epsabs=1e-13, epsrel=1e-12)
    return val


# ---------------------------------------------------------------------------
# diffeomorphism nodes
# ---------------------------------------------------------------------------


class Diffeo1D:
    """Base class for diffeomorphism expression nodes."""

    kind = "abstract"
    domain = Interval()

    def eval_jet(self, x: float, r: int) -> Jet:
        raise NotImplementedError

    def __call__(self, x: float) -> float:
        return self.eval_jet(x, 0).value

    def deriv(self, x: float, k: int = 1) -> float:
        return self.eval_jet(x, k).coeffs[k]

    def inverse_value(self, y: float) -> float:
        """Solve f(x) = y by monotone bracketing; nodes override when closed
        forms exist."""
        if self.domain.is_circle:
            base = math.floor(y - self(0.0) + 0.5)
            lo, hi = base - 1.0, base + 1.0
            while self(lo) > y:
                lo -= 0.5
            while self(hi) < y:
                hi += 0.5
            return brentq(lambda x: self(x) - y, lo, hi, xtol=1e-14)
        lo, hi = self.domain.lo, self.domain.hi
        flo, fhi = self(lo) - y, self(hi) - y
        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
        if flo > 0 or fhi < 0:
            raise FlowError(f"value {y} not attained on [{lo}, {hi}]")
        return brentq(lambda x: self(x) - y, lo, hi, xtol=1e-14)

    def inverse(self) -> "Diffeo1D":
        return InverseMap(self)

    def children(self):
        return ()

    def params(self) -> dict:
        return {}

    def __matmul__(self, other):
        """``f @ g`` is the composition f after g."""
        return Compose(self, other)


class Identity(Diffeo1D):
    kind = "identity"

    def __init__(self, domain=Interval()):
        self.domain = domain

    def eval_jet(self, x, r):
        return Jet.identity(x, r)

    def inverse_value(self, y):
        return y

    def inverse(self):
        return self


class Affine(Diffeo1D):
    """x -> slope*x + offset with slope > 0."""

    kind = "affine"

    def __init__(self, slope, offset, domain=Interval()):
        if slope <= 0:
            raise ValueError("affine diffeo needs positive slope")
        self.slope, self.offset = float(slope), float(offset)
        self.domain = domain

    def eval_jet(self, x, r):
        coeffs = [self.slope * x + self.offset] + [0.0] * r
        if r >= 1:
            coeffs[1] = self.slope
        return Jet(x, r, tuple(coeffs))

    def inverse_value(self, y):
        return (y - self.offset) / self.slope

    def inverse(self):
        return Affine(1.0 / self.slope, -self.offset / self.slope, self.domain)

    def params(self):
        return {"slope": self.slope, "offset": self.offset}


class Homothety(Affine):
    """x -> center + ratio*(x - center); an affine map tagged by its center."""

    kind = "homothety"

    def __init__(self, center, ratio, domain=Interval()):
        super().__init__(ratio, (1.0 - ratio) * center, domain)
        self.center, self.ratio = float(center), float(ratio)

    def inverse(self):
        return Homothety(self.center, 1.0 / self.ratio, self.domain)

    def params(self):
        return {"center": self.center, "ratio": self.ratio}


class Moebius(Diffeo1D):
    """x -> (a x + b) / (c x + d) with ad - bc > 0."""

    kind = "moebius"

    def __init__(self, a, b, c, d, domain=Interval()):
        if a * d - b * c <= 0:
            raise ValueError("Moebius map needs positive determinant")
        self.a, self.b, self.c, self.d = (float(v) for v in (a, b, c, d))
        self.domain = domain

    @staticmethod
    def fixing_01(ratio, domain=Interval()):
        """The Moebius map x -> ratio*x / (1 + (ratio-1)*x), fixing 0 and 1
        with derivative ``ratio`` at 0."""
        return Moebius(ratio, 0.0, ratio - 1.0, 1.0, domain)

    def eval_jet(self, x, r):
        num = Jet(x, r, tuple([self.a * x + self.b, self.a] + [0.0] * (r - 1))
                  if r >= 1 else (self.a * x + self.b,))
        den = Jet(x, r, tuple([self.c * x + self.d, self.c] + [0.0] * (r - 1))
                  if r >= 1 else (self.c * x + self.d,))
        return jet_divide(num, den)

    def inverse_value(self, y):
        return (self.d * y - self.b) / (-self.c * y + self.a)

    def inverse(self):
        return Moebius(self.d, -self.b, -self.c, self.a, self.domain)

    def params(self):
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}


class Rotation(Diffeo1D):
    """Circle rotation; the lift is x -> x + angle."""

    kind = "rotation"
    domain = Circle()

    def __init__(self, angle):
        self.angle = float(angle)

    def eval_jet(self, x, r):
        coeffs = [x + self.angle] + [0.0] * r
        if r >= 1:
            coeffs[1] = 1.0
        return Jet(x, r, tuple(coeffs))

    def inverse_value(self, y):
        return y - self.angle

    def inverse(self):
        return Rotation(-self.angle)

    def params(self):
        return {"angle": self.angle}


class FlowMap(Diffeo1D):
    """Time-``t`` map of the flow of a vector field."""

    kind = "flow"

    def __init__(self, X: VectorField1D, t: float, tol: float = FLOW_TOL):
        self.X = X
        self.t = float(t)
        self.tol = float(tol)
        self.domain = X.domain

    def eval_jet(self, x, r):
        return flow(self.X, self.t, x, r, self.tol)

    def inverse_value(self, y):
        return flow(self.X, -self.t, y, 0, self.tol).value

    def inverse(self):
        return FlowMap(self.X, -self.t, self.tol)

    def params(self):
        return {"t": self.t}

    def children(self):
        return (self.X,)


class Displacement(Diffeo1D):
    """x -> x + d(x) for a displacement field with sup |Dd| < 1."""

    kind = "displacement"

    def __init__(self, d: VectorField1D, domain=None):
        self.d = d
        self.domain = domain or d.domain

    def eval_jet(self, x, r):
        dj = self.d.eval_jet(x, r)
        coeffs = list(dj.coeffs)
        coeffs[0] += x
        if r >= 1:
            coeffs[1] += 1.0
        return Jet(x, r, tuple(coeffs))

    def children(self):
        return (self.d,)


class Compose(Diffeo1D):
    """Composition children[0] o children[1] o ... (leftmost applied last)."""

    kind = "compose"

    def __init__(self, *children):
        flat = []
        for c in children:
            if isinstance(c, Compose):
                flat.extend(c.maps)
            else:
                flat.append(c)
        self.maps = tuple(flat)
        self.domain = self.maps[0].domain

    def eval_jet(self, x, r):
        out = self.maps[-1].eval_jet(x, r)
        for f in self.maps[-2::-1]:
            out = jet_compose(f.eval_jet(out.value, r), out)
        return out

    def inverse_value(self, y):
        for f in self.maps:
            y = f.inverse_value(y)
        return y

    def inverse(self):
        return Compose(*[f.inverse() for f in self.maps[::-1]])

    def children(self):
        return self.maps


class InverseMap(Diffeo1D):
    kind = "inverse"

    def __init__(self, child: Diffeo1D):
        self.child = child
        self.domain = child.domain

    def eval_jet(self, x, r):
        y = self.child.inverse_value(x)
        if r == 0:
            return Jet(x, 0, (y,))
        return jet_invert(self.child.eval_jet(y, r))

    def inverse_value(self, y):
        return self.child(y)

    def inverse(self):
        return self.child

    def children(self):
        return (self.child,)


class Power(Diffeo1D):
    """Integer iterate f^n (n may be negative); evaluated by repeated
    composition without building a chain of nodes."""

    kind = "power"

    def __init__(self, child: Diffeo1D, n: int):
        self.child = child
        self.n = int(n)
        self.domain = child.domain

    def eval_jet(self, x, r):
        base = self.child if self.n >= 0 else self.child.inverse()
        out = Jet.identity(x, r)
        for _ in range(abs(self.n)):
            out = jet_compose(base.eval_jet(out.value, r), out)
        return out

    def inverse_value(self, y):
        base = self.child if self.n >= 0 else self.child.inverse()
        for _ in range(abs(self.n)):
            y = base.inverse_value(y)
        return y

    def inverse(self):
        return Power(self.child, -self.n)

    def children(self):
        return (self.child,)

    def params(self):
        return {"n": self.n}


class PiecewiseGlue(Diffeo1D):
    """Diffeos glued at interior breakpoints; children[i] rules on
    [b[i-1], b[i]] and the images of the breakpoints separate the pieces of
    the inverse."""

    kind = "piecewise"

    def __init__(self, breakpoints, pieces, domain=Interval(), gluing_order=1):
        if len(pieces) != len(breakpoints) + 1:
            raise ValueError("need len(pieces) == len(breakpoints) + 1")
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.pieces = tuple(pieces)
        self.domain = domain
        self.gluing_order = int(gluing_order)
        self._images = tuple(self.pieces[i](b) for i, b in enumerate(self.breakpoints))

    def _piece_at(self, x):
        return self.pieces[int(np.searchsorted(self.breakpoints, x, side="right"))]

    def eval_jet(self, x, r):
        if self.domain.is_circle:
            # evaluate the degree-one lift through the fundamental domain
            n = math.floor(x)
            jet = self._piece_at(x - n).eval_jet(x - n, r)
            return Jet(x, r, (jet.coeffs[0] + n,) + jet.coeffs[1:])
        return self._piece_at(x).eval_jet(x, r)

    def inverse_value(self, y):
        n = 0
        if self.domain.is_circle:
            n = math.floor(y)
            y = y - n
        i = int(np.searchsorted(self._images, y, side="right"))
        return self.pieces[i].inverse_value(y) + n

    def children(self):
        return self.pieces

    def params(self):
        return {"breakpoints": list(self.breakpoints),
                "gluing_order": self.gluing_order}

    def check_gluing(self, r=None, tol=1e-9):
        """Max jet mismatch across breakpoints up to the gluing order."""
        r = self.gluing_order if r is None else r
        worst = 0.0
        for i, b in enumerate(self.breakpoints):
            left = self.pieces[i].eval_jet(b, r)
            right = self.pieces[i + 1].eval_jet(b, r)
            worst = max(worst, max(abs(u - v) for u, v in
                                   zip(left.coeffs, right.coeffs)))
        return worst


class CircleFromInterval(Diffeo1D):
    """Circle diffeomorphism from an interval diffeo fixing 0 and 1; the lift
    is F(x) = floor(x) + child(frac(x))."""

    kind = "circle_from_interval"
    domain = Circle()

    def __init__(self, child: Diffeo1D):
        self.child = child

    def eval_jet(self, x, r):
        n = math.floor(x)
        u = x - n
        jet = self.child.eval_jet(u, r)
        coeffs = (jet.coeffs[0] + n,) + jet.coeffs[1:]
        return Jet(x, r, coeffs)

    def inverse_value(self, y):
        n = math.floor(y)
        return n + self.child.inverse_value(y - n)

    def inverse(self):
        return CircleFromInterval(self.child.inverse())

    def children(self):
        return (self.child,)


# ---------------------------------------------------------------------------
# fast tabulated evaluation
# ---------------------------------------------------------------------------


class FastDiffeo(Diffeo1D):
    """Spline tabulation of a diffeo on an interval, for value-heavy work
    such as certificate verification.  Forward and inverse are cubic splines
    through n sample nodes; accuracy is O(h^4) of the sampled map."""

    kind = "fast"

    def __init__(self, f: Diffeo1D, n: int = 4097, domain=None):
        self.domain = domain or f.domain
        lo, hi = self.domain.lo, self.domain.hi
        xs = np.linspace(lo, hi, n)
        ys = np.array([f(float(x)) for x in xs])
        if np.any(np.diff(ys) <= 0):
            raise ValueError("sampled map is not strictly increasing")
        self._fwd = CubicSpline(xs, ys)
        self._inv = CubicSpline(ys, xs)
        self._range = (float(ys[0]), float(ys[-1]))

    @staticmethod
    def from_callable(fn, domain=Interval(), n: int = 4097):
        class _Wrap(Diffeo1D):
            def __init__(self):
                self.domain = domain

            def eval_jet(self, x, r):
                if r != 0:
                    raise JetError("callable wrapper is value-only")
                return Jet(x, 0, (fn(x),))

        return FastDiffeo(_Wrap(), n, domain)

    def eval_jet(self, x, r):
        x = min(max(x, self.domain.lo), self.domain.hi)
        derivs = [float(self._fwd(x, k)) for k in range(r + 1)]
        return Jet(x, r, tuple(derivs))

    def inverse_value(self, y):
        y = min(max(y, self._range[0]), self._range[1])
        return float(self._inv(y))


# ---------------------------------------------------------------------------
# consistency checks
# ---------------------------------------------------------------------------


def check_orientation(f: Diffeo1D, grid=None) -> bool:
    """First derivative positive on the grid."""
    if grid is None:
        lo, hi = (0.0, 1.0) if f.domain.is_circle else (f.domain.lo, f.domain.hi)
        grid = np.linspace(lo, hi, 129)
    return all(f.eval_jet(float(x), 1).d1 > 0.0 for x in grid)


def check_fixed_endpoints(f: Diffeo1D, tol=1e-9) -> bool:
    lo, hi = f.domain.lo, f.domain.hi
    return abs(f(lo) - lo) <= tol and abs(f(hi) - hi) <= tol


def check_circle_degree(f: Diffeo1D, tol=1e-10, r=3) -> bool:
    """Lift periodicity F(x+1) = F(x)+1, all derivative orders."""
    for x in (0.1, 0.37, 0.75):
        a = f.eval_jet(x, r)
        b = f.eval_jet(x + 1.0, r)
        if abs(b.value - a.value - 1.0) > tol:
            return False
        if any(abs(u - v) > tol for u, v in zip(a.coeffs[1:], b.coeffs[1:])):
            return False
    return True
