"""
Vectorized smooth terms with exact first and second derivatives.

Each family evaluates many scalar terms at once; a term belongs to one
row of its block. Derivative entries are returned as (row, col, value)
triplets so blocks can assemble them with scipy.sparse, which sums
duplicates. Hessian triplets always list both triangles.
"""

import numpy as np


def _as_int(values):
    return np.asarray(values, dtype=int)


def _as_float(values):
    return np.asarray(values, dtype=float)


def _safe_power(base, exponent):
    # Exponents below zero only ever multiply a zero factor.
    return np.power(base, np.maximum(exponent, 0))


class TrigTerms:
    """
    F = a·Vi² + Vi·Vj·(b·cos(θi − θj) + c·sin(θi − θj)).

    Every branch power injection of the pi-model is one such term.
    """

    def __init__(self, rows, vi, vj, ti, tj, alpha, beta, gamma):
        self.rows = _as_int(rows)
        self.vi, self.vj, self.ti, self.tj = _as_int(vi), _as_int(vj), _as_int(ti), _as_int(tj)
        self.alpha, self.beta, self.gamma = _as_float(alpha), _as_float(beta), _as_float(gamma)

    def __len__(self):
        return len(self.rows)

    def _parts(self, x):
        v_i, v_j = x[self.vi], x[self.vj]
        theta = x[self.ti] - x[self.tj]
        cos, sin = np.cos(theta), np.sin(theta)
        trig = self.beta * cos + self.gamma * sin
        d_trig = -self.beta * sin + self.gamma * cos
        return v_i, v_j, trig, d_trig

    def values(self, x):
        v_i, v_j, trig, _ = self._parts(x)
        return self.alpha * v_i ** 2 + v_i * v_j * trig

    def gradient(self, x):
        v_i, v_j, trig, d_trig = self._parts(x)
        cols = np.stack([self.vi, self.vj, self.ti, self.tj], axis=1)
        vals = np.stack([
            2 * self.alpha * v_i + v_j * trig,
            v_i * trig,
            v_i * v_j * d_trig,
            -v_i * v_j * d_trig,
        ], axis=1)
        return np.repeat(self.rows, 4), cols.ravel(), vals.ravel()

    def hessian(self, x):
        v_i, v_j, trig, d_trig = self._parts(x)
        vv = v_i * v_j * trig
        # (col_a, col_b, value) for the upper triangle of each 4x4 term Hessian.
        upper = [
            (self.vi, self.vi, 2 * self.alpha),
            (self.vi, self.vj, trig),
            (self.vi, self.ti, v_j * d_trig),
            (self.vi, self.tj, -v_j * d_trig),
            (self.vj, self.ti, v_i * d_trig),
            (self.vj, self.tj, -v_i * d_trig),
            (self.ti, self.ti, -vv),
            (self.ti, self.tj, vv),
            (self.tj, self.tj, -vv),
        ]
        return _symmetric_triplets(self.rows, upper)


class MonomialTerms:
    """
    F = c · x^p · y^q with integer exponents.

    A univariate term uses y = x and q = 0; a constant belongs in the
    block's constant vector instead.
    """

    def __init__(self, rows, xcol, ycol, coef, px, py):
        self.rows = _as_int(rows)
        self.xcol, self.ycol = _as_int(xcol), _as_int(ycol)
        self.coef = _as_float(coef)
        self.px, self.py = _as_float(px), _as_float(py)

    def __len__(self):
        return len(self.rows)

    def values(self, x):
        xv, yv = x[self.xcol], x[self.ycol]
        return self.coef * _safe_power(xv, self.px) * _safe_power(yv, self.py)

    def gradient(self, x):
        xv, yv = x[self.xcol], x[self.ycol]
        c, p, q = self.coef, self.px, self.py
        dx = c * p * _safe_power(xv, p - 1) * _safe_power(yv, q)
        dy = c * q * _safe_power(xv, p) * _safe_power(yv, q - 1)
        rows = np.concatenate([self.rows, self.rows])
        cols = np.concatenate([self.xcol, self.ycol])
        return rows, cols, np.concatenate([dx, dy])

    def hessian(self, x):
        xv, yv = x[self.xcol], x[self.ycol]
        c, p, q = self.coef, self.px, self.py
        upper = [
            (self.xcol, self.xcol, c * p * (p - 1) * _safe_power(xv, p - 2) * _safe_power(yv, q)),
            (self.xcol, self.ycol, c * p * q * _safe_power(xv, p - 1) * _safe_power(yv, q - 1)),
            (self.ycol, self.ycol, c * q * (q - 1) * _safe_power(xv, p) * _safe_power(yv, q - 2)),
        ]
        return _symmetric_triplets(self.rows, upper)


def _symmetric_triplets(rows, upper):
    out_rows, out_i, out_j, out_v = [], [], [], []
    for col_a, col_b, vals in upper:
        vals = np.broadcast_to(vals, rows.shape)
        diagonal = col_a is col_b
        out_rows.append(rows)
        out_i.append(col_a)
        out_j.append(col_b)
        out_v.append(vals)
        if not diagonal:
            out_rows.append(rows)
            out_i.append(col_b)
            out_j.append(col_a)
            out_v.append(vals)
    return (np.concatenate(out_rows), np.concatenate(out_i),
            np.concatenate(out_j), np.concatenate(out_v))
