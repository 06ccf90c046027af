"""Open-interior intersection tests for axis-aligned rectangles.

Rectangles are ``(xmin, xmax, ymin, ymax)``. Touching edges do not count as
an intersection.
"""

import numpy as np


def square(center, size):
    x, y = center
    h = 0.5 * size
    return (x - h, x + h, y - h, y + h)


def corridor(center, size, clearance=0.0):
    """Region swept by a square pulled out through the x = 0 opening."""
    x, y = center
    h = 0.5 * size
    return (0.0, x + h, y - h - clearance, y + h + clearance)


def rects_intersect(a, b):
    return a[0] < b[1] and b[0] < a[1] and a[2] < b[3] and b[2] < a[3]


def any_square_hits(rect, centers, size):
    """True if any square of side ``size`` centred at ``centers`` meets ``rect``."""
    if len(centers) == 0:
        return False
    c = np.asarray(centers, dtype=float)
    h = 0.5 * size
    hit = ((c[:, 0] - h < rect[1]) & (rect[0] < c[:, 0] + h)
           & (c[:, 1] - h < rect[3]) & (rect[2] < c[:, 1] + h))
    return bool(hit.any())


def segment_hits_squares(start, end, centers, half):
    """Mask of open squares (centre, half-side ``half``) crossed by a segment.

    Slab test on each axis; a square the segment only grazes is not hit.
    """
    c = np.atleast_2d(np.asarray(centers, dtype=float))
    s = np.asarray(start, dtype=float)
    d = np.asarray(end, dtype=float) - s
    t_in = np.zeros(len(c))
    t_out = np.ones(len(c))
    for i in range(2):
        lo = c[:, i] - half - s[i]
        hi = c[:, i] + half - s[i]
        if abs(d[i]) < 1e-15:
            inside = (lo < 0.0) & (0.0 < hi)
            t_in = np.where(inside, t_in, 1.0)
            t_out = np.where(inside, t_out, 0.0)
        else:
            a, b = lo / d[i], hi / d[i]
            t_in = np.maximum(t_in, np.minimum(a, b))
            t_out = np.minimum(t_out, np.maximum(a, b))
    return t_in < t_out
