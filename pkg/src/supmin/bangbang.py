"""Closed-form least-peak-acceleration curves on [0, 1].

Given position and velocity at both endpoints, the curve minimizing the
maximal acceleration magnitude has piecewise-constant acceleration +-a with
at most one sign switch at some s in [0, 1].  Writing b for the signed
acceleration on [0, s], dv = v1 - v0 and w = (x1 - x0) - v0, matching the
endpoint data reduces to

    b (2s - 1)           = dv        (velocity match)
    b (2s - s^2 - 1/2)   = w         (position match)

Eliminating b gives the quadratic  dv s^2 - 2(dv - w) s + (dv/2 - w) = 0,
whose discriminant dv^2/2 - dv w + w^2 is a positive-semidefinite form, so a
real switch always exists.  With dv = 0 the switch sits at s = 1/2 and
b = 4w; data with w = dv/2 are fitted exactly by a single parabola (no
switch, a = |dv|), and affine-compatible data need no acceleration at all.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClampedBC1D:
    """Endpoint position/velocity data: u(0)=x0, u'(0)=v0, u(1)=x1, u'(1)=v1."""

    x0: float
    v0: float
    x1: float
    v1: float

    def __post_init__(self):
        for name in ("x0", "v0", "x1", "v1"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class BangBang:
    """Profile u'' = sigma * a on [0, s], -sigma * a on (s, 1]."""

    a: float
    s: float
    sigma: int


def _polish(b, s, dv, w):
    # few Newton steps on the 2x2 matching system to scrub rounding
    for _ in range(3):
        r1 = b * (2.0 * s - 1.0) - dv
        r2 = b * (2.0 * s - s * s - 0.5) - w
        j = np.array(
            [[2.0 * s - 1.0, 2.0 * b], [2.0 * s - s * s - 0.5, b * (2.0 - 2.0 * s)]]
        )
        try:
            delta = np.linalg.solve(j, -np.array([r1, r2]))
        except np.linalg.LinAlgError:
            break
        b += delta[0]
        s += delta[1]
    return b, min(max(s, 0.0), 1.0)


def solve_bang_bang(bc):
    """Minimal-peak-acceleration profile matching the endpoint data.

    Candidates with a switch in [0, 1] come from the matching quadratic; the
    feasible one with smaller acceleration wins, ties broken toward sigma=+1.
    Affine-compatible data return a = 0 with s = 0 by convention.
    """
    dv = bc.v1 - bc.v0
    w = (bc.x1 - bc.x0) - bc.v0
    scale = max(1.0, abs(dv), abs(w))

    if abs(dv) <= 1e-14 * scale:
        if abs(w) <= 1e-14 * scale:
            return BangBang(a=0.0, s=0.0, sigma=1)
        b = 4.0 * w
        return BangBang(a=abs(b), s=0.5, sigma=1 if b > 0 else -1)

    disc = 0.5 * dv * dv - dv * w + w * w
    root = np.sqrt(max(disc, 0.0))
    candidates = []
    for sign in (1.0, -1.0):
        s = ((dv - w) + sign * root) / dv
        if not -1e-9 <= s <= 1.0 + 1e-9:
            continue
        s = min(max(s, 0.0), 1.0)
        if abs(2.0 * s - 1.0) < 1e-13:
            continue  # incompatible with dv != 0
        b = dv / (2.0 * s - 1.0)
        b, s = _polish(b, s, dv, w)
        candidates.append(BangBang(a=abs(b), s=s, sigma=1 if b > 0 else -1))
    if not candidates:
        raise ValueError(f"no single-switch profile matches {bc}")  # unreachable for real data
    candidates.sort(key=lambda c: (c.a, -c.sigma))
    best = candidates[0]
    if best.a <= 1e-14 * scale:
        return BangBang(a=0.0, s=0.0, sigma=1)
    return best


def sample_solution(bb, bc, t):
    """Evaluate (u, u', u'') of the profile at t in [0, 1]; C^1 across the switch."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12):
        raise ValueError("t must lie in [0, 1]")
    b = bb.sigma * bb.a
    s = bb.s
    # left piece from (x0, v0); right piece from the switch state
    us = bc.x0 + bc.v0 * s + 0.5 * b * s * s
    vs = bc.v0 + b * s
    left = t <= s
    dt = t - s
    u = np.where(
        left,
        bc.x0 + bc.v0 * t + 0.5 * b * t * t,
        us + vs * dt - 0.5 * b * dt * dt,
    )
    du = np.where(left, bc.v0 + b * t, vs - b * dt)
    ddu = np.where(left, b, -b)
    if t.ndim == 0:
        return float(u), float(du), float(ddu)
    return u, du, ddu
