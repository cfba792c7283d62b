"""
Single against double precision near grazing incidence
======================================================

Segments almost parallel to a triangle make the determinant tiny, and single
precision loses the crossing parameter (or the hit itself, close to an edge).
The ``high_precision`` flag evaluates the same test in 64-bit arithmetic.
"""

from fractions import Fraction

import numpy as np

from lbvh_rsi.geometry import moller_trumbore

rng = np.random.default_rng(0)
q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
off = np.array([900.0, 350.0, 60.0])
a, b, c = off, off + 10 * q[0], off + 10 * q[1]
p = 0.3 * a + 0.4 * b + 0.3 * c


tri = [x.astype(np.float32) for x in (a, b, c)]


def exact_t(s, e):
    """Crossing parameter with the triangle's plane, exact for the float32 inputs."""
    f = lambda v: [Fraction(float(x)) for x in v]
    s, e, a_, b_, c_ = f(s), f(e), f(tri[0]), f(tri[1]), f(tri[2])
    e1 = [b_[k] - a_[k] for k in range(3)]
    e2 = [c_[k] - a_[k] for k in range(3)]
    n = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]]
    denom = sum(n[k] * (e[k] - s[k]) for k in range(3))
    return None if denom == 0 else float(sum(n[k] * (a_[k] - s[k]) for k in range(3)) / denom)


# rounding the endpoints to float32 near x = 900 tilts the segment by up to
# ~1e-5, so below that slope the stored segment may no longer cross at all
print(f"{'slope':>8} {'exact t':>10} {'32-bit t error':>15} {'64-bit t error':>15}")
for slope in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]:
    d = (q[0] + slope * q[2]) * 10
    s, e = np.float32(p - 0.5 * d), np.float32(p + 0.5 * d)
    t = exact_t(s, e)
    h32 = moller_trumbore((s, e), *tri)
    h64 = moller_trumbore((s, e), *tri, high_precision=True)
    inside = t is not None and 0 <= t <= 1
    err = lambda h: "miss" if h is None else f"{abs(h.t - t):.1e}"
    shown = f"{t:10.6f}" if inside else f"{'outside':>10}"
    print(f"{slope:8.0e} {shown} {err(h32):>15} {err(h64):>15}")
