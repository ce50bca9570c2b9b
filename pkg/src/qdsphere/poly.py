"""Polynomial utilities: evaluation, simultaneous root finding, deflation.

Coefficients are stored ascending by degree throughout, matching the input
document format.  Root finding uses Aberth-Ehrlich simultaneous iteration
with a Newton polish and a clustering pass that merges near-coincident
roots into multiple roots; this is robust for the moderate degrees
(<= ~20) the toolkit targets.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyPolynomial, RootFindingFailure

__all__ = [
    "trim",
    "degree",
    "polyval",
    "polyder",
    "roots",
    "roots_with_multiplicity",
    "deflate",
    "coeff_scale",
    "parse_poly_expr",
]


def trim(coeffs) -> np.ndarray:
    """Drop trailing (highest-degree) coefficients that are exactly zero."""
    c = np.asarray(coeffs, dtype=complex).ravel()
    if c.size == 0:
        raise EmptyPolynomial("empty coefficient array")
    k = c.size
    while k > 1 and c[k - 1] == 0:
        k -= 1
    return c[:k].copy()


def degree(coeffs) -> int:
    return len(trim(coeffs)) - 1


def polyval(coeffs, z):
    """Horner evaluation; works on scalars and arrays."""
    c = np.asarray(coeffs, dtype=complex)
    z = np.asarray(z, dtype=complex)
    out = np.full_like(z, c[-1])
    for k in range(len(c) - 2, -1, -1):
        out = out * z + c[k]
    return out if out.ndim else complex(out)


def polyder(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=complex)
    if len(c) == 1:
        return np.zeros(1, dtype=complex)
    return c[1:] * np.arange(1, len(c))


def coeff_scale(coeffs) -> float:
    c = np.asarray(coeffs, dtype=complex)
    return float(max(np.abs(c).max(), 1e-300))


def _aberth(c: np.ndarray, rng: np.random.Generator, max_iter: int = 200,
            tol: float = 1e-14) -> np.ndarray:
    n = len(c) - 1
    d = polyder(c)
    # Cauchy-style bound: circle of radius 1 + max |a_k / a_n|
    radius = 1.0 + float(np.abs(c[:-1] / c[-1]).max()) if n > 0 else 1.0
    ang = 2 * np.pi * (np.arange(n) + rng.uniform(-0.25, 0.25, n)) / n
    z = radius * np.exp(1j * ang) * (1.0 + 0.1 * rng.uniform(size=n))

    for _ in range(max_iter):
        p = polyval(c, z)
        dp = polyval(d, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        s = (1.0 / diff).sum(axis=1)
        newton = np.where(dp != 0, p / np.where(dp == 0, 1, dp), 0.0)
        denom = 1.0 - newton * s
        step = np.where(denom != 0, newton / np.where(denom == 0, 1, denom), newton)
        z = z - step
        if np.abs(step).max() < tol * (1.0 + np.abs(z).max()):
            break
    return z


def _newton_polish(c: np.ndarray, z: np.ndarray, iters: int = 8) -> np.ndarray:
    d = polyder(c)
    for _ in range(iters):
        p = polyval(c, z)
        dp = polyval(d, z)
        mask = np.abs(dp) > 0
        z = np.where(mask, z - p / np.where(mask, dp, 1.0), z)
    return z


def roots(coeffs, rng: np.random.Generator | None = None,
          residual_tol: float = 1e-8) -> np.ndarray:
    """All complex roots of the polynomial, with multiplicity.

    Raises RootFindingFailure if the refined roots do not reproduce the
    polynomial to ``residual_tol`` times the coefficient scale.
    """
    c = trim(coeffs)
    n = len(c) - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    if rng is None:
        rng = np.random.default_rng(0)
    z = _aberth(c, rng)
    z = _newton_polish(c, z)

    # For multiple roots Newton stalls at sqrt(eps); cluster and re-polish
    # each cluster on the deflated polynomial of the cluster mean.
    z = _cluster_refine(c, z)

    scale = coeff_scale(c)
    zs = max(1.0, float(np.abs(z).max())) if len(z) else 1.0
    res = np.abs(polyval(c, z)) / (scale * zs ** n)
    if res.max() > residual_tol:
        raise RootFindingFailure(
            f"root residual {res.max():.3e} exceeds {residual_tol:.1e}")
    return z


def _cluster_refine(c: np.ndarray, z: np.ndarray) -> np.ndarray:
    scale = 1.0 + float(np.abs(z).max()) if len(z) else 1.0
    groups = cluster_points(z, 1e-8 * scale)
    out = []
    for idx in groups:
        m = len(idx)
        center = z[idx].mean()
        if m > 1:
            center = _polish_multiple(c, center, m)
        out.extend([center] * m)
    return np.array(out, dtype=complex)


def cluster_points(pts: np.ndarray, tol: float) -> list[list[int]]:
    """Greedy single-linkage clustering of points within ``tol``."""
    n = len(pts)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if abs(pts[i] - pts[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def roots_with_multiplicity(coeffs, rng=None) -> list[tuple[complex, int]]:
    """Roots grouped into (location, multiplicity) pairs.

    A root of multiplicity m is only computable to ~eps^(1/m), so the
    grouping tolerance cannot be fixed a priori.  Clusterings of
    increasing coarseness are tried and the coarsest one whose
    reconstructed polynomial reproduces the input coefficients is kept;
    a wrong merge of genuinely distinct roots fails that certificate.
    """
    c = trim(coeffs)
    r = roots(c, rng=rng)
    if len(r) == 0:
        return []
    scale = 1.0 + float(np.abs(r).max())
    cscale = coeff_scale(c)

    best = None
    for tol in (1e-8, 1e-6, 1e-5, 1e-4, 1e-3):
        groups = cluster_points(r, tol * scale)
        cand = []
        for idx in groups:
            center = complex(r[idx].mean())
            m = len(idx)
            if m > 1:
                center = _polish_multiple(c, center, m)
            cand.append((center, m))
        recon = from_roots([z for z, m in cand for _ in range(m)], lead=c[-1])
        err = float(np.abs(recon - c).max()) / cscale
        if err < 1e-7:
            best = cand
    if best is None:
        best = [(complex(z), 1) for z in r]
    best.sort(key=lambda t: (t[0].real, t[0].imag))
    return best


def _polish_multiple(c: np.ndarray, center: complex, m: int) -> complex:
    """Newton on the (m-1)-th derivative, where a multiple root is simple."""
    dk = c
    for _ in range(m - 1):
        dk = polyder(dk)
    dkd = polyder(dk)
    zz = center
    for _ in range(40):
        p, dp = polyval(dk, zz), polyval(dkd, zz)
        if dp == 0:
            break
        step = p / dp
        zz -= step
        if abs(step) < 1e-15 * (1 + abs(zz)):
            break
    return zz


def deflate(coeffs, root: complex, multiplicity: int = 1) -> np.ndarray:
    """Synthetic division by (z - root)^multiplicity, remainder discarded."""
    c = trim(coeffs)
    for _ in range(multiplicity):
        n = len(c) - 1
        q = np.zeros(n, dtype=complex)
        acc = c[n]
        for k in range(n - 1, -1, -1):
            q[k] = acc
            acc = c[k] + acc * root
        c = q if len(q) else np.zeros(1, dtype=complex)
    return c


def from_roots(root_list, lead: complex = 1.0) -> np.ndarray:
    c = np.array([lead], dtype=complex)
    for r in root_list:
        c = np.convolve(c, np.array([-r, 1.0], dtype=complex))
    return c


# --- tiny expression parser ---------------------------------------------------
#
# Grammar (whitespace ignored):
#   expr   := term (('+'|'-') term)*
#   term   := factor (('*')? factor)*          juxtaposition multiplies
#   factor := atom ('^' uint)?
#   atom   := number | 'z' | 'i' | '(' expr ')' | ('+'|'-') factor
#
# Returns ascending coefficient arrays, so "z^2-1" -> [-1, 0, 1].

class _P:
    def __init__(self, s: str):
        self.s = s.replace(" ", "")
        self.i = 0

    def peek(self):
        return self.s[self.i] if self.i < len(self.s) else ""

    def take(self):
        ch = self.peek()
        self.i += 1
        return ch

    def expr(self) -> np.ndarray:
        v = self.term()
        while self.peek() and self.peek() in "+-":
            op = self.take()
            w = self.term()
            n = max(len(v), len(w))
            v = np.pad(v, (0, n - len(v)))
            w = np.pad(w, (0, n - len(w)))
            v = v + w if op == "+" else v - w
        return v

    def term(self) -> np.ndarray:
        v = self.factor()
        while True:
            ch = self.peek()
            if ch == "*":
                self.take()
                v = np.convolve(v, self.factor())
            elif ch and (ch.isdigit() or ch in "zi(."):
                v = np.convolve(v, self.factor())
            else:
                return v

    def factor(self) -> np.ndarray:
        v = self.atom()
        if self.peek() == "^":
            self.take()
            num = ""
            while self.peek().isdigit():
                num += self.take()
            if not num:
                raise ValueError("expected integer exponent")
            out = np.array([1.0 + 0j])
            for _ in range(int(num)):
                out = np.convolve(out, v)
            return out
        return v

    def atom(self) -> np.ndarray:
        ch = self.peek()
        if ch and ch in "+-":
            self.take()
            v = self.factor()
            return v if ch == "+" else -v
        if ch == "(":
            self.take()
            v = self.expr()
            if self.take() != ")":
                raise ValueError("unbalanced parenthesis")
            return v
        if ch == "z":
            self.take()
            return np.array([0.0, 1.0], dtype=complex)
        if ch == "i":
            self.take()
            return np.array([1j], dtype=complex)
        num = ""
        while self.peek().isdigit() or self.peek() == ".":
            num += self.take()
        if not num:
            raise ValueError(f"unexpected character {ch!r}")
        return np.array([float(num)], dtype=complex)


def parse_poly_expr(text: str) -> np.ndarray:
    """Parse a polynomial expression in z, e.g. ``"z^2-1"`` or ``"(z-1)(z+2i)"``."""
    p = _P(text)
    v = p.expr()
    if p.i != len(p.s):
        raise ValueError(f"trailing input {p.s[p.i:]!r}")
    return trim(v)
