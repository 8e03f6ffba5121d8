import numpy as np
from scipy import sparse

from .terms import MonomialTerms, TrigTerms


class ExpressionBlock:
    """
    A vector-valued smooth function: each row is a constant plus a sum of
    trigonometric and monomial terms.
    """

    def __init__(self, name, size, terms=(), constant=None, labels=None):
        self.name = name
        self.size = size
        self.terms = [term for term in terms if len(term)]
        self.constant = np.zeros(size) if constant is None else np.asarray(constant, dtype=float)
        self.labels = labels or [f"{name}[{i}]" for i in range(size)]

    def value(self, x):
        out = self.constant.copy()
        for term in self.terms:
            out += np.bincount(term.rows, weights=term.values(x), minlength=self.size)
        return out

    def jacobian(self, x, n):
        rows, cols, vals = [], [], []
        for term in self.terms:
            r, c, v = term.gradient(x)
            rows.append(r)
            cols.append(c)
            vals.append(v)
        if not rows:
            return sparse.csr_matrix((self.size, n))
        return sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.size, n)
        ).tocsr()

    def hessian(self, x, weights, n):
        """Returns Σ_r weights[r]·∇²(row r) as an n×n CSR matrix."""
        weights = np.asarray(weights, dtype=float)
        ii, jj, vals = [], [], []
        for term in self.terms:
            r, i, j, v = term.hessian(x)
            ii.append(i)
            jj.append(j)
            vals.append(v * weights[r])
        if not ii:
            return sparse.csr_matrix((n, n))
        return sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(ii), np.concatenate(jj))), shape=(n, n)
        ).tocsr()


class FlowLimitBlock:
    """Rows P_r² + Q_r² − limit_r² built from two expression blocks."""

    def __init__(self, name, p, q, limit, labels=None):
        self.name = name
        self.p = p
        self.q = q
        self.limit = np.asarray(limit, dtype=float)
        self.size = p.size
        self.labels = labels or p.labels

    def flows(self, x):
        return self.p.value(x), self.q.value(x)

    def value(self, x):
        p, q = self.flows(x)
        return p ** 2 + q ** 2 - self.limit ** 2

    def jacobian(self, x, n):
        p, q = self.flows(x)
        return (sparse.diags(2 * p) @ self.p.jacobian(x, n) + sparse.diags(2 * q) @ self.q.jacobian(x, n)).tocsr()

    def hessian(self, x, weights, n):
        weights = np.asarray(weights, dtype=float)
        p, q = self.flows(x)
        jp, jq = self.p.jacobian(x, n), self.q.jacobian(x, n)
        w = sparse.diags(2 * weights)
        return (
            jp.T @ w @ jp + jq.T @ w @ jq
            + self.p.hessian(x, 2 * weights * p, n)
            + self.q.hessian(x, 2 * weights * q, n)
        ).tocsr()


class BlockBuilder:
    """Collects terms row by row, then freezes them into an ExpressionBlock."""

    def __init__(self, name):
        self.name = name
        self.labels = []
        self.constant = []
        self._trig = []
        self._mono = []

    def new_row(self, label, constant=0.0):
        self.labels.append(label)
        self.constant.append(constant)
        return len(self.labels) - 1

    def add_constant(self, row, value):
        self.constant[row] += value

    def add_trig(self, row, vi, vj, ti, tj, alpha, beta, gamma):
        self._trig.append((row, vi, vj, ti, tj, alpha, beta, gamma))

    def add_monomial(self, row, xcol, coef, px=1, ycol=None, py=0):
        self._mono.append((row, xcol, xcol if ycol is None else ycol, coef, px, py))

    @property
    def size(self):
        return len(self.labels)

    def build(self):
        terms = []
        if self._trig:
            terms.append(TrigTerms(*zip(*self._trig)))
        if self._mono:
            terms.append(MonomialTerms(*zip(*self._mono)))
        return ExpressionBlock(self.name, self.size, terms, self.constant, self.labels)
