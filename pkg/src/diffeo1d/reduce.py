"""Almost-reducibility engine.

Field flattening by large-ratio homothety conjugation, interpolation past
boundary points where all derivatives of the dynamics vanish (ITI points),
Borel-style smoothing of one-sided jets, the integer-offset interpolation
driver, the subdivision driver, and rational-rotation normal forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .conjugacy import TransitConjugator
from .diffeos import (
    Affine,
    Compose,
    Diffeo1D,
    FlowMap,
    Homothety,
    Identity,
    PiecewiseGlue,
    Power,
    Rotation,
    flow,
    transit_time,
)
from .fields import (
    AffinePushforwardField,
    Circle,
    BumpField,
    ConstantField,
    Interval,
    PiecewiseField,
    PolynomialField,
    ProductField,
    PushforwardField,
    ScaledField,
    ShiftedField,
    StepField,
    SumField,
    VectorField1D,
    field_norm,
)
from .grid import GridSpec
from .jets import MAX_ORDER, Jet, jet_apply_smooth, jet_exp, jet_scale
from .metrics import cr_distance, rotation_number


class ReduceError(RuntimeError):
    pass


#: A fixed point counts as ITI when all jets of the field up to this order
#: are below this threshold (declared metadata overrides detection).
ITI_JET_TOL = 1e-9


def is_iti_zero(X: VectorField1D, x: float, r: int = None) -> bool:
    r = MAX_ORDER if r is None else r
    j = X.eval_jet(float(x), r)
    return all(abs(c) < ITI_JET_TOL for c in j.coeffs)


# ---------------------------------------------------------------------------
# the flattening conjugator phi_lambda
# ---------------------------------------------------------------------------


class FlattenConjugator(Diffeo1D):
    """The piecewise conjugator used for flattening.

    Homothety of ratio ``lam`` centered at each endpoint on
    [0, 1/(4 lam)] and its mirror, affine of ratio 1/(2 lam - 2) on the
    middle block [1/(2 lam), 1 - 1/(2 lam)], and transition bands whose
    derivative keeps the value ``lam`` on a plateau and then drops along a
    smooth step in log scale.  The plateau fraction has a closed form from
    the band mean-value constraint, so no root search is needed, and all
    jets at band ends are exactly those of the adjacent pieces.
    """

    kind = "flatten_conjugator"

    def __init__(self, lam: float, band_nodes: int = 257):
        if lam <= 2.0:
            raise ValueError("flatten conjugator needs lam > 2")
        self.lam = float(lam)
        self.a = 1.0 / (4 * lam)
        self.b = 1.0 / (2 * lam)
        self.mid_slope = 1.0 / (2 * lam - 2.0)
        self._step = StepField()
        self._log_lo = math.log(self.mid_slope)
        self._log_hi = math.log(lam)
        # mean of the drop profile over a unit layer
        m, _ = quad(lambda v: math.exp(
            self._log_hi + (self._log_lo - self._log_hi) * self._step(v)),
            0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
        # band derivative must average to (1/4 - a)/(b - a) = lam - 1, and
        # the plateau/drop split gives mean = lam*c + (1-c)*m
        target = (0.25 - self.a) / (self.b - self.a)
        if not m < target:
            raise ReduceError("plateau fraction infeasible at this ratio")
        self.plateau = (target - m) / (lam - m)
        self._corr = 1.0
        band_int, _ = quad(self._dphi_band, self.a, self.b, epsabs=1e-15,
                           epsrel=1e-13, limit=400,
                           points=[self.a + self.plateau * (self.b - self.a)])
        # tiny multiplicative correction so the band lands exactly on the
        # affine piece (absorbs quadrature error in m)
        self._corr = target * (self.b - self.a) / band_int
        # the plateau part of the band is exactly linear; only the drop
        # layer needs a cumulative cache, served by a spline thereafter
        self._drop_lo = self.a + self.plateau * (self.b - self.a)
        xs = np.linspace(self._drop_lo, self.b, band_nodes)
        vals = [0.25 + self._corr * lam * (self._drop_lo - self.a)]
        for x0, x1 in zip(xs[:-1], xs[1:]):
            seg, _ = quad(self._dphi_band, x0, x1, epsabs=1e-16,
                          epsrel=1e-14, limit=200)
            vals.append(vals[-1] + seg)
        from scipy.interpolate import CubicSpline
        self._drop_spline = CubicSpline(xs, vals)
        self.domain = Interval()

    def _band_exponent(self, u: float) -> float:
        c = self.plateau
        if u <= c:
            return self._log_hi
        s = self._step((u - c) / (1.0 - c))
        return self._log_hi + (self._log_lo - self._log_hi) * s

    def _dphi_band(self, x: float) -> float:
        u = (x - self.a) / (self.b - self.a)
        return self._corr * math.exp(self._band_exponent(u))

    # -- evaluation --------------------------------------------------------

    def _band_value(self, x: float) -> float:
        if x <= self._drop_lo:
            return 0.25 + self._corr * self.lam * (x - self.a)
        return float(self._drop_spline(x))

    def _half_value(self, x: float) -> float:
        """phi on [0, 1/2]."""
        if x <= self.a:
            return self.lam * x
        if x < self.b:
            return self._band_value(x)
        return 0.5 + (x - 0.5) * self.mid_slope

    def __call__(self, x):
        x = float(x)
        if x <= 0.5:
            return self._half_value(x)
        return 1.0 - self._half_value(1.0 - x)

    def eval_jet(self, x, r):
        x = float(x)
        if x > 0.5:
            inner = self.eval_jet(1.0 - x, r)
            coeffs = [1.0 - inner.coeffs[0]]
            coeffs += [(-1.0) ** (k + 1) * inner.coeffs[k]
                       for k in range(1, r + 1)]
            return Jet(x, r, tuple(coeffs))
        val = self._half_value(x)
        if r == 0:
            return Jet(x, 0, (val,))
        if x <= self.a:
            coeffs = [val, self.lam] + [0.0] * (r - 1)
        elif x >= self.b:
            coeffs = [val, self.mid_slope] + [0.0] * (r - 1)
        else:
            width = self.b - self.a
            u = (x - self.a) / width
            if u <= self.plateau:
                coeffs = [val, self._corr * self.lam] + [0.0] * (r - 1)
                return Jet(x, r, tuple(coeffs))
            drop_w = (1.0 - self.plateau) * width
            v = (x - self.a - self.plateau * width) / drop_w
            sv = self._step.eval_jet(v, r - 1)
            sv = Jet(x, r - 1, tuple(c / drop_w**k for k, c in
                                     enumerate(sv.coeffs)))
            expo = jet_scale(sv, self._log_lo - self._log_hi)
            expo = Jet(x, r - 1, (expo.coeffs[0] + self._log_hi,)
                       + expo.coeffs[1:])
            dphi = jet_scale(jet_exp(expo), self._corr)
            coeffs = [val] + list(dphi.coeffs)
        return Jet(x, r, tuple(coeffs))

    def inverse_value(self, y):
        y = float(y)
        if y > 0.5:
            return 1.0 - self.inverse_value(1.0 - y)
        if y <= self.lam * self.a:
            return y / self.lam
        if y >= 0.5 - (0.5 - self.b) * self.mid_slope:
            return 0.5 + (y - 0.5) / self.mid_slope
        v_drop = self._band_value(self._drop_lo)
        if y <= v_drop:
            return self.a + (y - 0.25) / (self._corr * self.lam)
        return brentq(lambda x: self._band_value(x) - y, self._drop_lo,
                      self.b, xtol=1e-15)

    def params(self):
        return {"lam": self.lam, "plateau": self.plateau}


class _CachedField(VectorField1D):
    """Memoizes jets of an expensive field (keyed by point and order)."""

    kind = "cached"

    def __init__(self, child):
        self.child = child
        self.domain = child.domain
        self.zeros = child.zeros
        self._cache = {}

    def eval_jet(self, x, r):
        key = (x, r)
        out = self._cache.get(key)
        if out is None:
            out = self.child.eval_jet(x, r)
            self._cache[key] = out
        return out

    def children(self):
        return (self.child,)


@dataclass
class FlattenResult:
    Y: VectorField1D
    phi: Diffeo1D
    lam: float
    u: float
    eta: float
    r: int
    transit_match_residual: float
    norm_Y: float
    lam_sweep: list = dc_field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "lam": self.lam,
            "u": self.u,
            "eta": self.eta,
            "r": self.r,
            "norm_Y": self.norm_Y,
            "transit_match_residual": self.transit_match_residual,
            "lam_sweep": self.lam_sweep,
        }


def _flatten_family(X: VectorField1D, lam: float):
    """(phi_lam, X_lam, rho) for the flattening interpolation."""
    phi_lam = FlattenConjugator(lam)
    X_lam = _CachedField(PushforwardField(X, phi_lam, zeros=(0.0, 1.0)))
    # rho = 1 near the endpoints, 0 on the middle half
    rho = SumField(ConstantField(1.0),
                   ScaledField(BumpField(1 / 8, 1 / 4, 3 / 4, 7 / 8), -1.0))
    return phi_lam, X_lam, rho


def _flatten_Y(X_lam, rho, u: float) -> VectorField1D:
    # Y = u + rho * (X_lam - u); written piecewise so the constant middle
    # block never evaluates the pushforward (rho vanishes there anyway, but
    # a product node would still compute the expensive factor)
    diff = SumField(X_lam, ConstantField(-u))
    blend = SumField(ConstantField(u), ProductField(rho, diff))
    Y = PiecewiseField([1 / 8, 1 / 4, 3 / 4, 7 / 8],
                       [X_lam, blend, ConstantField(u), blend, X_lam],
                       zeros=(0.0, 1.0))
    return Y


def flatten_field(X: VectorField1D, eta: float, r: int, lam: float = None,
                  lam_max: float = 2.0**16) -> FlattenResult:
    """Conjugate X by a large-ratio boundary homothety so the pushed-forward
    field interpolates to a C^r-small field with matching transit time.

    X must vanish exactly at 0 and 1 with vanishing derivative there.  When
    ``lam`` is not supplied, ratios are swept geometrically until the norm
    target is met (the threshold ratio exists but has no formula).
    """
    for z in (0.0, 1.0):
        j = X.eval_jet(z, 1)
        if abs(j.value) > 1e-12 or abs(j.d1) > 1e-12:
            raise ReduceError("flatten needs X = DX = 0 at both endpoints")
    grid = np.linspace(0.0, 1.0, 129)
    sweep = []
    trial = 4.0 if lam is None else lam
    chosen = None
    while trial <= lam_max:
        phi_lam, X_lam, rho = _flatten_family(X, trial)
        u_max = max(X_lam(float(x)) for x in grid)

        # the integrand varies over a thin layer where the conjugator
        # derivative drops; quad needs those breakpoints spelled out
        v_drop = phi_lam._band_value(phi_lam._drop_lo)
        v_b = 0.5 - 1.0 / (4 * trial)
        pts = [1 / 4, v_drop, v_b, 1 / 2, 1 - v_b, 1 - v_drop, 3 / 4]

        def residual(u):
            Y = _flatten_Y(X_lam, rho, u)
            val, _ = quad(lambda s: 1.0 / X_lam(s) - 1.0 / Y(s),
                          1 / 8, 7 / 8, points=pts,
                          limit=500, epsabs=1e-12, epsrel=1e-13)
            return val

        # residual is increasing in u and negative as u -> 0
        u_lo = u_hi = u_max
        while residual(u_hi) < 0:
            u_hi *= 2.0
            if u_hi > 1e6:
                raise ReduceError("transit residual bracket failure (high)")
        while residual(u_lo) > 0:
            u_lo *= 0.5
            if u_lo < 1e-300:
                raise ReduceError("transit residual bracket failure (low)")
        u_star = brentq(residual, u_lo, u_hi, xtol=1e-300, rtol=8.9e-16)
        Y = _flatten_Y(X_lam, rho, u_star)
        norm_Y = field_norm(Y, r, np.linspace(0.0, 1.0, 33))
        if norm_Y < eta:
            norm_Y = field_norm(Y, r, grid)
        sweep.append({"lam": trial, "u": u_star, "norm": norm_Y})
        if norm_Y < eta:
            chosen = (trial, u_star, Y, abs(residual(u_star)), norm_Y)
            break
        if lam is not None:
            break
        # the norm scales roughly like 1/ratio, so jump ahead on the first
        # miss instead of walking every doubling
        if len(sweep) == 1:
            jump = max(1, math.ceil(math.log2(norm_Y / eta)))
            trial *= 2.0**jump
        else:
            trial *= 2.0
    if chosen is None:
        raise ReduceError(f"no ratio up to {lam_max} reached norm {eta}; "
                          f"sweep: {sweep}")
    lam, u_star, Y, res, norm_Y = chosen
    x0 = 1.0 / (8 * lam)
    phi = PiecewiseGlue(
        [x0, 1.0 - x0],
        [Homothety(0.0, lam),
         TransitConjugator(X, Y, x0, lam * x0),
         Homothety(1.0, lam)],
        gluing_order=r,
    )
    return FlattenResult(Y, phi, lam, u_star, eta, r, res, norm_Y, sweep)


# ---------------------------------------------------------------------------
# interpolation past boundary flat points
# ---------------------------------------------------------------------------


def _unit_cutoff():
    """chi: 1 on (-inf, 1/2], 0 on [1, inf), smooth and monotone."""
    return SumField(ConstantField(1.0), ScaledField(StepField(0.5, 1.0), -1.0))


def _cutoff_norm(r: int) -> float:
    return field_norm(_unit_cutoff(), r, np.linspace(0.0, 1.5, 301))


def _scan_points(x_max: float, floor: float = 1e-12, ratio: float = 0.85):
    x = float(x_max)
    while x > floor:
        yield x
        x *= ratio


def regularity_point_search(X: VectorField1D, f: Diffeo1D, r: int,
                            delta: float, x_max: float) -> float:
    """First point of a geometric scan toward 0 where the field norm on the
    four-iterate window is dominated by a power of the step size, and the
    field value at the point is at least half the step."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    best = None
    for x0 in _scan_points(x_max):
        ok, margins = _regularity_margins(X, f, r, delta, x0)
        if ok:
            return x0
        if best is None or margins["worst"] > best["worst"]:
            best = {"x0": x0, **margins}
    raise ReduceError(f"no regularity point found above 1e-12; best: {best}")


def _regularity_margins(X, f, r, delta, x0):
    d_fwd = f(x0) - x0
    d_back = x0 - f.inverse_value(x0)
    lo = f.inverse_value(f.inverse_value(x0))
    hi = f(f(x0))
    norm_w = field_norm(X, r, np.linspace(lo, hi, 33))
    bound = min(abs(d_fwd), abs(d_back)) ** (1.0 - delta)
    vx = abs(X(x0))
    need = 0.5 * max(abs(d_fwd), abs(d_back))
    margins = {
        "norm_margin": bound - norm_w,
        "value_margin": vx - need,
        "worst": min(bound - norm_w, vx - need),
    }
    return (norm_w <= bound and vx >= need), margins


def _build_taper(X, x0, d, r, delta):
    """The interpolant: X itself left of x0, then its degree-r Taylor
    polynomial cut off over a window of width d^(2 delta)."""
    b = d ** (2.0 * delta)
    jet = X.eval_jet(x0, r)
    a = list(jet.coeffs)
    cutoff = SumField(ConstantField(1.0),
                      ScaledField(StepField(x0 + b / 2, x0 + b), -1.0))
    poly_coeffs = [0.0] + [a[i] / math.factorial(i) for i in range(1, r + 1)]
    poly = ShiftedField(PolynomialField(poly_coeffs), x0)
    right = SumField(ConstantField(a[0]), ProductField(cutoff, poly))
    zeros = tuple(z for z in X.zeros if z <= x0)
    Y = PiecewiseField([x0], [X, right], zeros=zeros)
    return Y, b


def interpolate_ITI(X: VectorField1D, f: Diffeo1D, eta: float, r: int,
                    delta: float = None, strict: bool = False,
                    x_max: float = 0.2, fwd=None, back=None):
    """Interpolate X to a constant right of a well-chosen point x0 near the
    flat boundary fixed point at 0, keeping X itself on [0, x0].

    Returns (x0, Y).  Y is the Taylor-polynomial taper of the proof; the
    candidate x0 must pass the regularity inequalities and — in ``strict``
    mode — the three literal smallness conditions (which push x0 far below
    what float64 transit bookkeeping can handle for very flat fields), or
    otherwise the directly measured versions: the taper's norm stays below
    eta on the extended window and the taper does not vanish on [x0, x0+eta].
    """
    if delta is None:
        delta = 1.0 / (2 * r + 2)
    if not delta < 1.0 / (2 * r + 1):
        raise ValueError("delta must be below 1/(2r+1)")
    fwd = fwd if fwd is not None else f
    back = back if back is not None else f.inverse_value
    M_r = _cutoff_norm(r)
    best = None
    for x0 in _scan_points(x_max):
        d = fwd(x0) - x0
        if d <= 0:
            # the step has underflowed: no usable points further in
            break
        ok, margins = _regularity_margins(
            X, _CallablePair(fwd, back), r, delta, x0)
        if not ok:
            continue
        if strict:
            c1 = d**delta < eta
            c2 = (d ** (1 - delta)
                  + r * 2**r * M_r * d ** (1 - (2 * r + 1) * delta)) < eta
            c3 = 0.5 * d > d ** (1 - delta) * (math.exp(d ** (2 * delta)) - 1)
            if not (c1 and c2 and c3):
                continue
        Y, b = _build_taper(X, x0, d, r, delta)
        hi = min(x0 + eta, 1.0 - 1e-9)
        norm_y = field_norm(Y, r, np.linspace(back(x0), hi, 65))
        vals = [Y(float(s)) for s in np.linspace(x0, hi, 129)]
        nonvanishing = min(vals) > 0 if Y(x0) > 0 else max(vals) < 0
        if norm_y <= eta and nonvanishing:
            return x0, Y
        if best is None or norm_y < best[0]:
            best = (norm_y, x0, nonvanishing)
    raise ReduceError(f"interpolation scan failed; best norm {best}")


class _CallablePair:
    """Adapter so the regularity check can consume raw step callables."""

    def __init__(self, fwd, back):
        self._fwd, self._back = fwd, back

    def __call__(self, x):
        return self._fwd(x)

    def inverse_value(self, x):
        return self._back(x)


def interpolate_right(X: VectorField1D, f: Diffeo1D, eta: float, r: int,
                      **kw):
    """Mirror of :func:`interpolate_ITI` at the right endpoint: returns
    (x1, Z) with Z = X on [x1, 1] and constant left of x1 - eta."""
    from .fields import ReversedField

    Xr = ReversedField(X)
    fwd = lambda y: 1.0 - f.inverse_value(1.0 - y)
    back = lambda y: 1.0 - f(1.0 - y)
    y0, Ym = interpolate_ITI(Xr, None, eta, r, fwd=fwd, back=back, **kw)
    return 1.0 - y0, ReversedField(Ym)


def borel_smooth(Y: VectorField1D, x0: float, alpha: float, r: int):
    """Cancel the one-sided derivative jumps of Y above order r at x0 by
    bump-localized Taylor terms, yielding a field equal to Y outside
    (x0, x0 + alpha) with correction of C^r norm below alpha.

    Jumps are read off the two adjacent pieces of a piecewise field;
    correctable orders are capped by the jet backend (order 8) and by float
    resolution: a jump so large that its cutoff width falls below 1e-12 is
    skipped, since no evaluation can resolve it.
    """
    if not (isinstance(Y, PiecewiseField) and x0 in Y.breakpoints):
        raise ReduceError("borel smoothing needs a piecewise field with a "
                          "breakpoint at x0")
    idx = Y.breakpoints.index(x0)
    left = Y.pieces[idx].eval_jet(x0, MAX_ORDER)
    right = Y.pieces[idx + 1].eval_jet(x0, MAX_ORDER)
    M_r = _cutoff_norm(r)
    terms = []
    for i in range(r + 1, MAX_ORDER + 1):
        a_i = left.coeffs[i] - right.coeffs[i]
        if a_i == 0.0:
            continue
        b_i = 0.5 * min(alpha / (abs(a_i) * 2**r * M_r), alpha)
        if b_i < 1e-12:
            # the cutoff would live below float resolution; such a jump is
            # invisible to any downstream evaluation anyway
            continue
        cut = SumField(ConstantField(1.0),
                       ScaledField(StepField(x0 + b_i / 2, x0 + b_i), -1.0))
        mono = ShiftedField(
            PolynomialField([0.0] * i + [a_i / math.factorial(i)]), x0)
        terms.append(ProductField(cut, mono))
    if not terms:
        return Y
    corr = terms[0]
    for t in terms[1:]:
        corr = SumField(corr, t)
    return PiecewiseField([x0], [Y, SumField(Y, corr)], zeros=Y.zeros)


# ---------------------------------------------------------------------------
# reduction driver
# ---------------------------------------------------------------------------


_ETA_CACHE: dict = {}


def calibrate_flow_eta(epsilon: float, r: int) -> float:
    """Field-norm budget eta such that any field below it has time-1 map
    within epsilon of the identity in C^r, calibrated on a validation family
    (constant and two bump profiles, normalized) and halved for safety."""
    key = (float(epsilon), int(r))
    if key in _ETA_CACHE:
        return _ETA_CACHE[key]
    family = [ConstantField(1.0),
              BumpField(0.05, 0.3, 0.7, 0.95),
              BumpField(0.3, 0.45, 0.55, 0.7)]
    family = [ScaledField(F, 1.0 / field_norm(F, r)) for F in family]

    def worst(eta):
        return max(
            cr_distance(FlowMap(ScaledField(F, eta), 1.0),
                        Identity(), r, GridSpec(0.0, 1.0, 64))
            for F in family)

    eta = float(epsilon)
    for _ in range(30):
        if worst(eta) < epsilon:
            break
        eta *= 0.5
    else:
        raise ReduceError("flow-norm calibration failed to converge")
    _ETA_CACHE[key] = eta / 2.0
    return _ETA_CACHE[key]


@dataclass
class BoundaryTag:
    endpoint: float
    tag: str          # "identity" | "power_of_f" | "homothety"
    value: float = 0.0
    jet_residual: float = float("nan")

    def to_json(self):
        return {"endpoint": self.endpoint, "tag": self.tag,
                "value": self.value, "jet_residual": self.jet_residual}


@dataclass
class ReductionStep:
    conjugator: Diffeo1D
    conjugate: Diffeo1D
    dr_to_isometry: float
    r: int
    boundary_tags: list
    sigma: float = float("nan")
    tau: float = float("nan")
    info: dict = dc_field(default_factory=dict)

    def to_json(self):
        return {
            "dr_to_isometry": self.dr_to_isometry,
            "r": self.r,
            "sigma": self.sigma,
            "tau": self.tau,
            "boundary_tags": [t.to_json() for t in self.boundary_tags],
            "info": self.info,
        }


@dataclass
class ReductionTrace:
    steps: list
    target_epsilon: float

    def final_distance(self) -> float:
        return self.steps[-1].dr_to_isometry

    def validate(self) -> None:
        ds = [s.dr_to_isometry for s in self.steps]
        if any(b >= a for a, b in zip(ds, ds[1:])):
            raise ReduceError(f"trace distances not decreasing: {ds}")
        if ds[-1] >= self.target_epsilon:
            raise ReduceError(
                f"trace ends at {ds[-1]} >= target {self.target_epsilon}")

    def to_json(self):
        return {"target_epsilon": self.target_epsilon,
                "steps": [s.to_json() for s in self.steps]}


@dataclass
class ReductionInput:
    X: VectorField1D
    iti_left: bool = None
    iti_right: bool = None

    def resolved_flags(self):
        left = (is_iti_zero(self.X, 0.0) if self.iti_left is None
                else self.iti_left)
        right = (is_iti_zero(self.X, 1.0) if self.iti_right is None
                 else self.iti_right)
        return left, right


def _tag_residual_identity(phi, pts, r):
    return max(
        max(abs(a - b) for a, b in
            zip(phi.eval_jet(float(x), r).coeffs,
                Jet.identity(float(x), r).coeffs))
        for x in pts)


def _tag_residual_power(phi, f, n, pts, r, X=None):
    """Worst jet mismatch between phi and the n-th iterate of f.

    For large |n| the iterate is evaluated through the integer-time flow of
    the generating field (identical to the iterate for a time-1 map; the
    identity itself is covered by the flow tests), since composing
    thousands of jets is prohibitively slow.
    """
    if X is not None and abs(n) > 64:
        def fn_jet(x, r):
            return flow(X, float(n), x, r)
    else:
        fn = Power(f, n)
        fn_jet = fn.eval_jet
    return max(
        max(abs(a - b) for a, b in
            zip(phi.eval_jet(float(x), r).coeffs,
                fn_jet(float(x), r).coeffs))
        for x in pts)


def _tag_residual_homothety(phi, center, ratio, pts, r):
    H = Homothety(center, ratio)
    return max(
        max(abs(a - b) for a, b in
            zip(phi.eval_jet(float(x), r).coeffs,
                H.eval_jet(float(x), r).coeffs))
        for x in pts)


# ---------------------------------------------------------------------------
# the integer-offset driver
# ---------------------------------------------------------------------------


def _case1_profiles(x0: float, x1: float):
    """Blend step chi and correction bump rho on the prepared span."""
    L = x1 - x0
    chi = StepField(x0 + 3 * L / 8, x0 + 5 * L / 8)
    rho = BumpField(x0 + L / 4, x0 + 5 * L / 16,
                    x0 + 11 * L / 16, x0 + 3 * L / 4)
    return chi, rho


def _prep_eta(eta: float, rho, chi, r: int, span=(0.0, 1.0)) -> float:
    grid = np.linspace(span[0], span[1], 257)
    nr = field_norm(rho, r, grid)
    nc = field_norm(chi, r, grid)
    return (eta / 3.0) * min(1.0, 1.0 / nr, 1.0 / (2.0 * nc))


def _sigma_quad(X, X_other, lo, hi, pts):
    """Integral of 1/X - 1/X_other over [lo, hi], in difference form to
    dodge cancellation between two large transit times."""

    def integrand(x):
        a, b = X(x), X_other(x)
        return (b - a) / (a * b)

    pts = [p for p in pts if lo < p < hi]
    val, err = quad(integrand, lo, hi, points=pts or None, limit=400,
                    epsabs=1e-10, epsrel=1e-12)
    return val


def _boundary_tags_iti(phi, f, X, x0, x1, sigma_int, r):
    pts0 = [x0 / 4, x0 / 2, 3 * x0 / 4]
    # the power-of-f identity holds where the sigma-iterate stays right of
    # the prepared span, so start the check past the shifted image of x1
    lo = flow(X, max(0.0, -float(sigma_int)), x1, 0).value
    pts1 = lo + (1.0 - lo) * np.array([0.25, 0.5, 0.75])
    res0 = _tag_residual_identity(phi, pts0, r)
    res1 = _tag_residual_power(phi, f, sigma_int, pts1, r, X=X)
    return [BoundaryTag(0.0, "identity", 0.0, res0),
            BoundaryTag(1.0, "power_of_f", float(sigma_int), res1)]


def _drive_sigma_to_integer(X, X_tilde, rho, scale, x0, x1, pts):
    """Find u >= 0 with sigma(u) = integral of 1/X - 1/(X_tilde - u rho scale)
    equal to the nearest integer at or below sigma(0).  sigma decreases
    continuously in u and diverges to -inf as the corrected field is pushed
    toward a zero, so a bracket always exists."""

    def field_at(u):
        return SumField(X_tilde, ScaledField(rho, -u * scale))

    def sigma(u):
        return _sigma_quad(X, field_at(u), x0, x1, pts)

    s0 = sigma(0.0)
    target = math.floor(s0)
    if abs(s0 - target) < 1e-12:
        return 0.0, target, field_at(0.0)
    # u may grow until the corrected field first touches zero
    grid = np.linspace(x0, x1, 2049)
    caps = [X_tilde(float(t)) / (rho(float(t)) * scale)
            for t in grid if rho(float(t)) * scale > 1e-300]
    u_cap = min(caps)
    u_hi = None
    for k in range(1, 60):
        u_try = u_cap * (1.0 - 2.0 ** (-k))
        if sigma(u_try) < target:
            u_hi = u_try
            break
    if u_hi is None:
        raise ReduceError("offset continuation failed to bracket an integer")
    u = brentq(lambda v: sigma(v) - target, 0.0, u_hi,
               xtol=1e-300, rtol=8.9e-16)
    return u, target, field_at(u)


def _reduce_case1(X, f, eta_flow, r, eta_prep):
    """Both-ends-ITI block, no interior zeros: interpolate both ends to
    constants, bridge the middle with a step blend, then push the bridge
    down with a bump until the transit-time offset is an integer."""
    x0, Y = interpolate_ITI(X, f, eta_prep, r, x_max=0.2)
    x1, Z = interpolate_right(X, f, eta_prep, r, x_max=0.2)
    if not x0 < x1:
        raise ReduceError("interpolation points crossed; block too small")
    L = x1 - x0
    c0, c1 = X(x0), X(x1)
    d0 = f(x0) - x0
    b0 = d0 ** (2.0 / (2 * r + 2))
    d1 = x1 - f.inverse_value(x1)
    b1 = d1 ** (2.0 / (2 * r + 2))
    if b0 > L / 4 or b1 > L / 4:
        raise ReduceError("interpolation tapers overlap the bridge zone")
    chi, rho = _case1_profiles(x0, x1)
    q1, q2 = x0 + L / 4, x0 + 3 * L / 4
    blend = SumField(ConstantField(c0), ProductField(chi,
                                                     ConstantField(c1 - c0)))
    X_tilde = PiecewiseField([x0, q1, q2, x1], [X, Y, blend, Z, X],
                             zeros=(0.0, 1.0))
    pts = [x0 + b0, q1, x0 + 5 * L / 16, x0 + 3 * L / 8, x0 + 5 * L / 8,
           x0 + 11 * L / 16, q2, x1 - b1]
    u, sigma_int, X_u = _drive_sigma_to_integer(
        X, X_tilde, rho, c0, x0, x1, pts)
    X_u = PiecewiseField([x0, x1], [X, X_u, X], zeros=(0.0, 1.0))
    norm_u = field_norm(X_u, r, np.linspace(0.0, 1.0, 257))
    if norm_u > eta_flow:
        raise ReduceError(f"prepared field norm {norm_u:.3g} exceeds the "
                          f"flow budget {eta_flow:.3g}")
    phi = TransitConjugator(X, X_u, x0 / 2, x0 / 2)
    g = FlowMap(X_u, 1.0)
    # independent offset recomputation at a second base pair
    p_l, p_r = x0 / 2, (1.0 + x1) / 2
    sigma_b = _sigma_quad(X, X_u, p_l, p_r, [x0] + pts + [x1])
    sigma_a = _sigma_quad(X, X_u, x0, x1, pts)
    if abs(sigma_a - sigma_b) > max(1e-7, 1e-9 * abs(sigma_a)):
        raise ReduceError(
            f"offset bookkeeping mismatch: {sigma_a} vs {sigma_b}")
    tags = _boundary_tags_iti(phi, f, X, x0, x1, sigma_int, r)
    d_iso = cr_distance(g, Identity(), r, GridSpec(0.0, 1.0, 128))
    return ReductionStep(
        conjugator=phi, conjugate=g, dr_to_isometry=d_iso, r=r,
        boundary_tags=tags, sigma=float(sigma_int),
        info={"case": 1, "x0": x0, "x1": x1, "u": u,
              "sigma_raw": sigma_a, "norm": norm_u,
              "eta_prep": eta_prep, "eta_flow": eta_flow})


def reduce_no_interior_ITI(f_data, epsilon: float, r: int) -> ReductionStep:
    """One reduction step for a block whose interior carries no flat fixed
    point: ITI boundaries are interpolated away and the transit offset is
    driven to an integer, so the conjugator degenerates to a power of the
    map at those ends; blocks with ordinary (finite-order) boundary zeros
    go through homothety flattening instead."""
    if isinstance(f_data, VectorField1D):
        f_data = ReductionInput(f_data)
    X = f_data.X
    left, right = f_data.resolved_flags()
    f = FlowMap(X, 1.0)
    if not left and not right:
        eta_flow = calibrate_flow_eta(epsilon, r)
        fl = flatten_field(X, eta_flow, r)
        g = Compose(fl.phi, f, fl.phi.inverse())
        d_iso = cr_distance(FlowMap(fl.Y, 1.0), Identity(), r,
                            GridSpec(0.0, 1.0, 128))
        pts0 = [1e-3 / fl.lam, 1e-2 / fl.lam]
        tags = [
            BoundaryTag(0.0, "homothety", fl.lam,
                        _tag_residual_homothety(fl.phi, 0.0, fl.lam, pts0, r)),
            BoundaryTag(1.0, "homothety", fl.lam,
                        _tag_residual_homothety(fl.phi, 1.0, fl.lam,
                                                [1.0 - p for p in pts0], r)),
        ]
        return ReductionStep(
            conjugator=fl.phi, conjugate=FlowMap(fl.Y, 1.0),
            dr_to_isometry=d_iso, r=r, boundary_tags=tags,
            info={"case": 0, "lam": fl.lam, "u": fl.u,
                  "transit_match_residual": fl.transit_match_residual})
    if not (left and right):
        raise ReduceError("mixed boundary types (one flat end, one "
                          "finite-order end) need a prior subdivision")
    eta_flow = calibrate_flow_eta(epsilon, r)
    chi0, rho0 = _case1_profiles(0.2, 0.8)
    eta_prep = _prep_eta(eta_flow, rho0, chi0, r)
    interior = [z for z in X.zeros if 0.0 < z < 1.0]
    if any(is_iti_zero(X, z) for z in interior):
        raise ReduceError("interior flat fixed point: subdivide first")
    if len(interior) > 1:
        raise ReduceError("multiple interior zeros: subdivide first")
    worker = _reduce_case2 if interior else _reduce_case1
    last_err = None
    for _ in range(7):
        try:
            return worker(X, f, eta_flow, r, eta_prep)
        except ReduceError as exc:
            last_err = exc
            eta_prep *= 0.5
    raise ReduceError(f"reduction failed after retries: {last_err}")


def _drive_offset(X_tilde, rho, scale, frac, span, pts):
    """Find u with Delta(u) = integral over the bump support of
    1/(X_tilde - u rho scale) - 1/X_tilde equal to frac (in [0, 1)).
    Delta is zero at u = 0, increasing, and diverges as the corrected field
    approaches zero on the bump plateau."""
    if frac < 1e-12:
        return 0.0

    def delta(u):
        def integrand(x):
            a = X_tilde(x)
            b = a - u * rho(x) * scale
            return (a - b) / (a * b)
        val, _ = quad(integrand, span[0], span[1], points=list(pts),
                      limit=400, epsabs=1e-11, epsrel=1e-13)
        return val

    grid = np.linspace(span[0], span[1], 513)
    caps = [X_tilde(float(t)) / (rho(float(t)) * scale)
            for t in grid if rho(float(t)) * scale > 1e-300]
    u_cap = min(caps)
    u_hi = None
    for k in range(1, 60):
        u_try = u_cap * (1.0 - 2.0 ** (-k))
        if delta(u_try) > frac:
            u_hi = u_try
            break
    if u_hi is None:
        raise ReduceError("offset continuation failed to bracket an integer")
    return brentq(lambda v: delta(v) - frac, 0.0, u_hi,
                  xtol=1e-300, rtol=8.9e-16)


def _diff_quad(F, G, lo, hi, pts):
    def integrand(x):
        a, b = F(x), G(x)
        return (b - a) / (a * b)
    pts = [p for p in pts if lo < p < hi]
    val, _ = quad(integrand, lo, hi, points=pts or None, limit=400,
                  epsabs=1e-10, epsrel=1e-13)
    return val


def _inv_quad(F, lo, hi, pts):
    pts = [p for p in pts if lo < p < hi]
    val, _ = quad(lambda x: 1.0 / F(x), lo, hi, points=pts or None,
                  limit=400, epsabs=1e-10, epsrel=1e-13)
    return val


def _reduce_case2(X, f, eta_flow, r, eta_prep, lam_max=2 ** 20):
    """Both-ends-ITI block with one interior zero c of the field, where all
    reparametrization happens through an expansion germ at c: the prepared
    field equals the affine pushforward of X near c (so the conjugator is
    exactly affine there), constants near the prepared endpoints, and two
    independent transit offsets driven to integers by bumps in the constant
    zones."""
    c = [z for z in X.zeros if 0.0 < z < 1.0][0]
    jc = X.eval_jet(c, 2)
    if abs(jc.coeffs[0]) > 1e-12 or abs(jc.coeffs[1]) > 1e-9:
        raise ReduceError("interior zero must be parabolic (X = DX = 0); a "
                          "hyperbolic fixed point cannot be reduced")
    x0, Y = interpolate_ITI(X, f, eta_prep, r, x_max=min(0.2, c / 2))
    x1, Z = interpolate_right(X, f, eta_prep, r,
                              x_max=min(0.2, (1.0 - c) / 2))
    if not x0 < c < x1:
        raise ReduceError("interpolation points crossed the interior zero")
    c0, c1 = X(x0), X(x1)
    lL, lR = c - x0, x1 - c
    b0 = (f(x0) - x0) ** (2.0 / (2 * r + 2))
    b1 = (x1 - f.inverse_value(x1)) ** (2.0 / (2 * r + 2))
    if b0 > 0.1 * lL or b1 > 0.1 * lR:
        raise ReduceError("interpolation tapers overlap the drive bumps")
    W_L, W_R = lL / 6.0, lR / 6.0
    e1, e2 = x0 + 0.5 * lL, c - W_L          # left blend zone
    e3, e4 = c + W_R, x1 - 0.5 * lR          # right blend zone
    rho_L = BumpField(x0 + 0.1 * lL, x0 + 0.2 * lL,
                      x0 + 0.3 * lL, x0 + 0.4 * lL)
    rho_R = BumpField(x1 - 0.4 * lR, x1 - 0.3 * lR,
                      x1 - 0.2 * lR, x1 - 0.1 * lR)
    chi_L = StepField(e1, e2)
    chi_R = StepField(e3, e4)
    grid = np.linspace(0.0, 1.0, 513)
    lam, X_tilde, G = 4.0, None, None
    while lam <= lam_max:
        G = AffinePushforwardField(X, lam, c * (1.0 - lam))
        blend_L = SumField(ConstantField(c0),
                           ProductField(chi_L, SumField(G, ConstantField(-c0))))
        blend_R = SumField(G, ProductField(chi_R, SumField(ConstantField(c1),
                                                           ScaledField(G, -1.0))))
        cand = PiecewiseField([x0, e1, e2, e3, e4, x1],
                              [X, Y, blend_L, G, blend_R, Z, X],
                              zeros=(0.0, c, 1.0))
        if field_norm(cand, r, grid) <= 0.9 * eta_flow:
            X_tilde = cand
            break
        lam *= 2.0
    if X_tilde is None:
        raise ReduceError("no expansion ratio brought the prepared field "
                          "under the flow budget")
    p_L = c - W_L / (2 * lam)
    p_R = c + W_R / (2 * lam)
    H = Affine(lam, c * (1.0 - lam))
    # transit offsets, with the germ-zone legs cancelled exactly through
    # tau_G(H a, H b) = tau_X(a, b): only the blend mismatch and a short
    # one-sided leg remain
    def sigma_left(mid):
        return (_diff_quad(X, X_tilde, x0, mid, [x0 + b0, e1, e2])
                + _inv_quad(X, mid, c - W_L / lam, [e2])
                - _inv_quad(X_tilde, mid, e2, []))

    def sigma_right(mid):
        return (_inv_quad(X, c + W_R / lam, mid, [e3])
                - _inv_quad(X_tilde, e3, mid, [])
                + _diff_quad(X, X_tilde, mid, x1, [e3, e4, x1 - b1]))

    s_L, s_R = sigma_left(e2), sigma_right(e3)
    s_L2, s_R2 = sigma_left((e1 + e2) / 2), sigma_right((e3 + e4) / 2)
    # the offsets grow like 1/min X on the constant zones, so the agreement
    # gate needs a relative component on top of the absolute one
    gate = max(1e-7, 1e-9 * max(abs(s_L), abs(s_R)))
    if abs(s_L - s_L2) > gate or abs(s_R - s_R2) > gate:
        raise ReduceError(f"offset bookkeeping mismatch: left {s_L} vs "
                          f"{s_L2}, right {s_R} vs {s_R2}")
    tgt_L, tgt_R = math.floor(s_L), math.floor(s_R)
    u_L = _drive_offset(X_tilde, rho_L, c0, s_L - tgt_L,
                        (x0 + 0.1 * lL, x0 + 0.4 * lL),
                        [x0 + 0.2 * lL, x0 + 0.3 * lL])
    u_R = _drive_offset(X_tilde, rho_R, c1, s_R - tgt_R,
                        (x1 - 0.4 * lR, x1 - 0.1 * lR),
                        [x1 - 0.3 * lR, x1 - 0.2 * lR])
    X_u = SumField(X_tilde, ScaledField(rho_L, -u_L * c0),
                   ScaledField(rho_R, -u_R * c1))
    X_u = PiecewiseField([x0, x1], [X, X_u, X], zeros=(0.0, c, 1.0))
    norm_u = field_norm(X_u, r, grid)
    if norm_u > eta_flow:
        raise ReduceError(f"prepared field norm {norm_u:.3g} exceeds the "
                          f"flow budget {eta_flow:.3g}")
    T_L = TransitConjugator(X, X_u, p_L, H(p_L))
    T_R = TransitConjugator(X, X_u, p_R, H(p_R))
    phi = PiecewiseGlue([p_L, p_R], [T_L, H, T_R], gluing_order=r)
    g = FlowMap(X_u, 1.0)
    k0, k1 = -tgt_L, tgt_R
    hi0 = flow(X, -k0, x0, 0).value if k0 > 0 else x0
    pts0 = hi0 * np.array([0.25, 0.5, 0.75])
    lo1 = flow(X, -k1, x1, 0).value if k1 < 0 else x1
    pts1 = lo1 + (1.0 - lo1) * np.array([0.25, 0.5, 0.75])
    tags = [
        BoundaryTag(0.0, "power_of_f", float(k0),
                    _tag_residual_power(phi, f, k0, pts0, r, X=X)),
        BoundaryTag(1.0, "power_of_f", float(k1),
                    _tag_residual_power(phi, f, k1, pts1, r, X=X)),
    ]
    d_iso = cr_distance(g, Identity(), r, GridSpec(0.0, 1.0, 128))
    return ReductionStep(
        conjugator=phi, conjugate=g, dr_to_isometry=d_iso, r=r,
        boundary_tags=tags, sigma=float(tgt_L), tau=float(tgt_R),
        info={"case": 2, "x0": x0, "x1": x1, "zero": c, "lam": lam,
              "u_left": u_L, "u_right": u_R, "sigma_raw": s_L,
              "tau_raw": s_R, "norm": norm_u, "eta_prep": eta_prep,
              "eta_flow": eta_flow})


# ---------------------------------------------------------------------------
# the subdivision driver
# ---------------------------------------------------------------------------


def _block_field(X, lo, hi):
    """Pull the field on [lo, hi] back to [0, 1], preserving time-1 maps."""
    w = hi - lo
    return AffinePushforwardField(X, 1.0 / w, -lo / w), w


def _block_to_global(phi_b, Y_b, lo, hi):
    w = hi - lo
    back, fwd = Affine(w, lo), Affine(1.0 / w, -lo / w)
    return Compose(back, phi_b, fwd), AffinePushforwardField(Y_b, w, lo)


def _identity_tags():
    return [BoundaryTag(0.0, "identity", 0.0, 0.0),
            BoundaryTag(1.0, "identity", 0.0, 0.0)]


def _blockwise_d_iso(block_fields, r):
    """d_r(time-1 map of the glued global field, id), computed block by
    block.

    On a block [lo, hi] the glued time-1 map is the affine conjugate
    A g_b A^{-1} of the block map g_b, so its jet deviation from the
    identity is the block deviation with the value scaled by w = hi - lo
    and D^k by w^(1-k).  Evaluating blockwise avoids flowing the glued
    field, whose right side is far costlier per call.
    """
    worst = 0.0
    for lo, hi, Yb in block_fields:
        w = hi - lo
        n, prev = 33, None
        while True:
            best = 0.0
            for x in np.linspace(0.0, 1.0, n):
                # the distance is reported against thresholds >= 1e-2, so
                # the default integrator tolerance (which can stall against
                # evaluation noise in the jet system) is far tighter than
                # the measurement needs
                j = flow(Yb, 1.0, float(x), r, tol=1e-9)
                dev = w * abs(j.value - float(x))
                for k in range(1, r + 1):
                    target = 1.0 if k == 1 else 0.0
                    dev = max(dev, w ** (1 - k) * abs(j.coeffs[k] - target))
                best = max(best, dev)
            if prev is not None and best <= prev * 1.01 + 1e-15:
                break
            if n >= 1025:
                break
            prev, n = best, 2 * n - 1
        worst = max(worst, best)
    return worst


def _flatten_blocks(X, zeros, epsilon, r):
    """Flatten each zero-delimited block at a common ratio so the conjugator
    germs at shared zeros agree exactly (both are the lam-homothety centered
    there)."""
    eta = calibrate_flow_eta(epsilon, r)
    blocks = list(zip(zeros[:-1], zeros[1:]))
    results = []
    for lo, hi in blocks:
        Xb, w = _block_field(X, lo, hi)
        # pulling a C^r-small field back to a width-w block divides the
        # k-th derivative by w^(k-1), so the block budget shrinks likewise
        results.append(flatten_field(Xb, eta * w ** (r - 1), r))
    lam_star = max(res.lam for res in results)
    for i, ((lo, hi), res) in enumerate(zip(blocks, results)):
        if res.lam != lam_star:
            Xb, w = _block_field(X, lo, hi)
            results[i] = flatten_field(Xb, eta * w ** (r - 1), r,
                                       lam=lam_star)
    psis, fields = [], []
    for (lo, hi), res in zip(blocks, results):
        psi, Yg = _block_to_global(res.phi, res.Y, lo, hi)
        psis.append(psi)
        fields.append(Yg)
    if len(blocks) == 1:
        phi, Y = psis[0], fields[0]
    else:
        phi = PiecewiseGlue(list(zeros[1:-1]), psis, gluing_order=r)
        Y = PiecewiseField(list(zeros[1:-1]), fields, zeros=tuple(zeros))
    pts0 = [1e-3 / lam_star, 1e-2 / lam_star]
    tags = [
        BoundaryTag(0.0, "homothety", lam_star,
                    _tag_residual_homothety(phi, 0.0, lam_star, pts0, r)),
        BoundaryTag(1.0, "homothety", lam_star,
                    _tag_residual_homothety(phi, 1.0, lam_star,
                                            [1.0 - p for p in pts0], r)),
    ]
    g = FlowMap(Y, 1.0)
    d_iso = _blockwise_d_iso(
        [(lo, hi, res.Y) for (lo, hi), res in zip(blocks, results)], r)
    return ReductionStep(
        conjugator=phi, conjugate=g, dr_to_isometry=d_iso, r=r,
        boundary_tags=tags,
        info={"case": "flatten", "lam": lam_star, "blocks": len(blocks),
              "transit_match_residuals":
                  [res.transit_match_residual for res in results]})


def reduce_interval(f_data, epsilon: float, r: int) -> ReductionTrace:
    """Conjugate the time-1 map of the field toward the identity.

    Dispatch: inputs already within epsilon are returned as a single trivial
    step; fields whose zeros are all of finite order are subdivided at
    interior zeros and flattened blockwise at a common homothety ratio;
    fields flat at both endpoints are subdivided at interior flat zeros and
    each block goes through the integer-offset driver.  One flat and one
    finite-order endpoint cannot be handled in a single pass.
    """
    if isinstance(f_data, VectorField1D):
        f_data = ReductionInput(f_data)
    X = f_data.X
    f = FlowMap(X, 1.0)
    d0 = cr_distance(f, Identity(), r, GridSpec(0.0, 1.0, 128))
    first = ReductionStep(conjugator=Identity(), conjugate=f,
                          dr_to_isometry=d0, r=r,
                          boundary_tags=_identity_tags(),
                          info={"case": "input"})
    if d0 < epsilon:
        return ReductionTrace([first], epsilon)
    left, right = f_data.resolved_flags()
    interior = [z for z in X.zeros if 0.0 < z < 1.0]
    if not left and not right:
        if any(is_iti_zero(X, z) for z in interior):
            raise ReduceError("interior flat zero with finite-order "
                              "endpoints: the subdivision produces mixed "
                              "blocks, which need separate treatment")
        step = _flatten_blocks(X, [0.0] + interior + [1.0], epsilon, r)
    elif left and right:
        cuts = [0.0] + [z for z in interior if is_iti_zero(X, z)] + [1.0]
        if len(cuts) == 2:
            step = reduce_no_interior_ITI(f_data, epsilon, r)
        else:
            psis, fields, tag_list, block_fields = [], [], [], []
            sigma = tau = float("nan")
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                Xb, w = _block_field(X, lo, hi)
                sub = reduce_no_interior_ITI(
                    ReductionInput(Xb, True, True),
                    epsilon * w ** (r - 1), r)
                psi, Yg = _block_to_global(sub.conjugator, sub.conjugate.X,
                                           lo, hi)
                psis.append(psi)
                fields.append(Yg)
                block_fields.append((lo, hi, sub.conjugate.X))
                if lo == 0.0:
                    tag_list.append(sub.boundary_tags[0])
                    sigma = sub.sigma
                if hi == 1.0:
                    t = sub.boundary_tags[1]
                    tag_list.append(t)
                    tau = sub.sigma if math.isnan(sub.tau) else sub.tau
            phi = PiecewiseGlue(cuts[1:-1], psis, gluing_order=r)
            zs = tuple(sorted(set([0.0, 1.0] + interior)))
            Y = PiecewiseField(cuts[1:-1], fields, zeros=zs)
            g = FlowMap(Y, 1.0)
            d_iso = _blockwise_d_iso(block_fields, r)
            step = ReductionStep(
                conjugator=phi, conjugate=g, dr_to_isometry=d_iso, r=r,
                boundary_tags=tag_list, sigma=sigma, tau=tau,
                info={"case": "iti_blocks", "cuts": cuts})
    else:
        raise ReduceError("mixed boundary types (one flat end, one "
                          "finite-order end) are not handled in one pass")
    trace = ReductionTrace([first, step], epsilon)
    trace.validate()
    return trace


# ---------------------------------------------------------------------------
# rational-rotation normal forms
# ---------------------------------------------------------------------------


@dataclass
class NormalizationResult:
    normalized: Diffeo1D
    conjugator: Diffeo1D
    case: int
    residuals: dict

    def to_json(self):
        return {"case": self.case, "residuals": self.residuals}


def _circle_grid(n=64):
    return np.linspace(0.0, 1.0, n, endpoint=False)


def _circle_dist(a, b, pts):
    worst = 0.0
    for x in pts:
        d = a(float(x)) - b(float(x))
        worst = max(worst, abs(d - round(d)))
    return worst


def normalize_rational(f: Diffeo1D, p: int, q: int) -> NormalizationResult:
    """Normal form of a circle diffeomorphism with rotation number p/q.

    The input carries its construction: a rotation composed with either the
    time-s map of a 1/q-periodic field (case 1: extract the q-th root from
    the global field of f^q and verify the root-of-unity residual) or a
    diffeomorphism supported in the fundamental arc [0, 1/q] with flat germs
    at its ends (case 2: extend a seed conjugator arc by arc through the
    iterates of f and check the jets at the q arc breakpoints).
    """
    # rotation number p/q means the lift of f^q displaces by exactly p
    # somewhere (at a periodic point); the Birkhoff average is too slow to
    # certify that, the displacement minimum is exact
    disp = []
    for x in _circle_grid(33):
        y = float(x)
        for _ in range(q):
            y = f(y)
        disp.append(y - float(x) - p)
    if min(abs(d) for d in disp) > 1e-7:
        raise ReduceError(f"no period-q point found: the rotation number "
                          f"is not {p}/{q} (min displacement "
                          f"{min(abs(d) for d in disp):.3g})")
    pts = _circle_grid()
    R = Rotation(p / q)
    if _circle_dist(f, R, pts) < 1e-12:
        return NormalizationResult(R, Identity(), 0, {"rotation_dist": 0.0})
    if not (isinstance(f, Compose) and len(f.maps) == 2
            and isinstance(f.maps[0], Rotation)):
        raise ReduceError("normalization needs the rotation-times-"
                          "perturbation construction of the input")
    tail = f.maps[1]
    if isinstance(tail, FlowMap):
        # case 1: the perturbation is a flow map of a 1/q-periodic field
        X, s = tail.X, tail.t
        per = max(
            max(abs(u - v) for u, v in
                zip(X.eval_jet(float(x), 3).coeffs[1:],
                    X.eval_jet(float(x) + 1.0 / q, 3).coeffs[1:]))
            + abs(X(float(x)) - X(float(x) + 1.0 / q))
            for x in np.linspace(0.0, 1.0 - 1.0 / q, 17))
        if per > 1e-9:
            raise ReduceError(f"field is not 1/q-periodic: defect {per:.3g}")
        # f^q = time-(q s) map of X, so the canonical root is the time-s map
        g = FlowMap(X, s)
        h = Compose(f, g.inverse())
        hq = Power(h, q)
        res_unit = _circle_dist(hq, Identity(), pts)
        if res_unit > 1e-7:
            raise ReduceError(f"root-of-unity residual {res_unit:.3g}")
        comm = _circle_dist(Compose(g, R), Compose(R, g), pts)
        if comm > 1e-7:
            raise ReduceError(f"root does not commute with the rotation "
                              f"({comm:.3g})")
        return NormalizationResult(Compose(R, g), Identity(), 1,
                                   {"unit_residual": res_unit,
                                    "commutation": comm})
    # case 2: arc-supported perturbation; extend the seed conjugator
    # arc by arc: on the arc R^j([0,1/q]) the conjugator is f^j R^{-j}
    k = tail
    sup = max(abs(k(float(x)) - float(x))
              for x in np.linspace(1.0 / q, 1.0, 33))
    if sup > 1e-9:
        raise ReduceError("case-2 input must be supported in [0, 1/q]")
    p_inv = pow(p % q, -1, q)
    pieces = []
    for m in range(q):
        # with psi = R^j f^(-j) on the arc [m/q, (m+1)/q], the identity
        # psi o f = R o psi holds exactly on every arc whose index does not
        # wrap, because the exponent just increments
        j = (m * p_inv) % q
        pieces.append(Compose(Rotation(j * p / q), Power(f, -j)))
    breaks = [m / q for m in range(1, q)]
    phi = PiecewiseGlue(breaks, pieces, domain=Circle(), gluing_order=2)
    jet_gap = phi.check_gluing(r=2, tol=float("inf"))
    if jet_gap > 1e-7:
        raise ReduceError(f"conjugator jets mismatch at arc ends: {jet_gap}")
    normalized = Compose(phi, f, CircleInverse(phi))
    # the conjugation sweeps every copy of the perturbation into the arc
    # where the piece index wraps from q-1 back to 0; elsewhere the normal
    # form is the bare rotation
    m_star = (q - p) % q
    res = _circle_dist(normalized, R,
                       [m / q + 0.5 / q for m in range(q) if m != m_star])
    return NormalizationResult(normalized, phi, 2,
                               {"jet_gap": jet_gap, "off_arc_residual": res,
                                "carrier_arc": m_star})


class CircleInverse(Diffeo1D):
    """Inverse of a circle diffeomorphism through its inverse_value."""

    kind = "circle_inverse"

    def __init__(self, child):
        self.child = child
        self.domain = child.domain

    def eval_jet(self, x, r):
        from .jets import jet_invert
        pre = self.child.inverse_value(float(x))
        return jet_invert(self.child.eval_jet(pre, r))

    def inverse_value(self, y):
        return self.child(float(y))

    def inverse(self):
        return self.child

    def children(self):
        return (self.child,)
