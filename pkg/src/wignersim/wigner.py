"""General Wigner representation: weighted sums of polynomial x Gaussian terms.

Every state in scope lives in this class: Gaussian states are a single constant
term, Fock states are Laguerre polynomials times a Gaussian, and heralded
addition/subtraction outputs stay inside the class because it is closed under
linear variable substitution, multiplication by Fock projectors, and partial
integration.  All moments and overlaps evaluate analytically through the
Gaussian moment recursion, so there is no numerical quadrature anywhere.

Term convention: weight * poly(X) * exp(-(X - mean)^T quad^{-1} (X - mean)),
matching the Gaussian Wigner exponent used throughout, so quad equals the
covariance matrix sigma for Gaussian states and the per-variable covariance of
the Gaussian factor is quad / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ImprobableBranch
from .gaussian import GaussianState
from .symplectic import SymplecticTransform

FOCK_CUTOFF = 64
IMPROBABLE_FLOOR = 1e-14
DEFAULT_NMAX = 40

Poly = dict  # exponent tuple over the 2N variables -> real coefficient


def _poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            key = tuple(x + y for x, y in zip(ea, eb))
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def _poly_scale(a: Poly, s) -> Poly:
    return {e: c * s for e, c in a.items()}


def _poly_add(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0.0) + c
    return out


def _poly_prune(a: Poly, tol: float = 0.0) -> Poly:
    return {e: c for e, c in a.items() if c != 0.0 and abs(c) > tol}


def _const_poly(nvars: int, value=1.0) -> Poly:
    return {(0,) * nvars: value}


def _poly_power(base: Poly, k: int, nvars: int) -> Poly:
    out = _const_poly(nvars)
    for _ in range(k):
        out = _poly_mul(out, base)
    return out


def _poly_substitute(poly: Poly, rows: list[Poly], nvars_out: int) -> Poly:
    """Substitute variable i -> rows[i] (an affine poly in the output variables)."""
    powers: dict[tuple[int, int], Poly] = {}

    def row_power(i: int, k: int) -> Poly:
        key = (i, k)
        if key not in powers:
            powers[key] = _poly_power(rows[i], k, nvars_out)
        return powers[key]

    out: Poly = {}
    for expo, coeff in poly.items():
        piece = _const_poly(nvars_out, coeff)
        for i, e in enumerate(expo):
            if e:
                piece = _poly_mul(piece, row_power(i, e))
        out = _poly_add(out, piece)
    return _poly_prune(out)


def _gaussian_expectation(poly: Poly, mean: np.ndarray, cov: np.ndarray):
    """E[poly(X)] for X ~ N(mean, cov), exact via the Gaussian moment recursion."""
    memo: dict[tuple, complex] = {}

    def mom(e: tuple):
        if e in memo:
            return memo[e]
        i = next((k for k, v in enumerate(e) if v), -1)
        if i < 0:
            return 1.0
        e1 = list(e)
        e1[i] -= 1
        e1t = tuple(e1)
        val = mean[i] * mom(e1t)
        for j, ej in enumerate(e1t):
            if ej:
                e2 = list(e1t)
                e2[j] -= 1
                val += cov[i, j] * ej * mom(tuple(e2))
        memo[e] = val
        return val

    return sum(c * mom(e) for e, c in poly.items())


def _conditional_expectation_poly(
    poly: Poly, keep: list[int], out: list[int], cond_mean_rows: list[Poly], cond_cov: np.ndarray
) -> Poly:
    """E over the integrated variables of poly, conditional on the kept ones.

    cond_mean_rows[i] is the conditional mean of integrated variable i as an
    affine poly in the kept variables; returns a poly in the kept variables.
    """
    nk = len(keep)
    memo: dict[tuple, Poly] = {}

    def mom(e: tuple) -> Poly:
        if e in memo:
            return memo[e]
        i = next((k for k, v in enumerate(e) if v), -1)
        if i < 0:
            return _const_poly(nk)
        e1 = list(e)
        e1[i] -= 1
        e1t = tuple(e1)
        val = _poly_mul(cond_mean_rows[i], mom(e1t))
        for j, ej in enumerate(e1t):
            if ej and cond_cov[i, j] != 0.0:
                e2 = list(e1t)
                e2[j] -= 1
                val = _poly_add(val, _poly_scale(mom(tuple(e2)), cond_cov[i, j] * ej))
        memo[e] = val
        return val

    result: Poly = {}
    for expo, coeff in poly.items():
        e_keep = tuple(expo[v] for v in keep)
        e_out = tuple(expo[v] for v in out)
        piece = _poly_mul({e_keep: coeff}, mom(e_out))
        result = _poly_add(result, piece)
    return _poly_prune(result)


@dataclass(frozen=True)
class Term:
    """One polynomial x Gaussian summand."""

    weight: float
    poly: Poly
    mean: np.ndarray
    quad: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        quad = np.asarray(self.quad, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "quad", quad)

    @property
    def nvars(self) -> int:
        return self.mean.size

    def integral(self, extra_monomial: Poly | None = None) -> float:
        """Analytic integral of this term over all variables, optionally times a poly."""
        poly = self.poly if extra_monomial is None else _poly_mul(self.poly, extra_monomial)
        z = math.pi ** (self.nvars // 2) * math.sqrt(np.linalg.det(self.quad))
        return self.weight * z * float(np.real(_gaussian_expectation(poly, self.mean, self.quad / 2.0)))

    def evaluate(self, x: np.ndarray):
        d = x - self.mean
        a = np.linalg.inv(self.quad)
        expo = -float(d @ a @ d)
        pv = sum(c * np.prod([xx**e for xx, e in zip(x, ee) if e]) for ee, c in self.poly.items())
        return self.weight * pv * math.exp(expo)


class WignerExpr:
    """Weighted sum of polynomial x Gaussian terms over 2N phase-space variables."""

    def __init__(self, modes: int, terms: list[Term]):
        self.modes = modes
        self.terms = terms
        self.norm = sum(t.integral() for t in terms) if terms else 0.0

    @property
    def nvars(self) -> int:
        return 2 * self.modes

    def normalize(self) -> "WignerExpr":
        if self.norm <= 0.0:
            raise ValueError(f"cannot normalize expression with integral {self.norm:.3e}")
        scaled = [Term(t.weight / self.norm, t.poly, t.mean, t.quad) for t in self.terms]
        return WignerExpr(self.modes, scaled)

    def evaluate(self, x: Iterable[float]) -> float:
        xv = np.asarray(list(x), dtype=float)
        if xv.size != self.nvars:
            raise ValueError(f"point has {xv.size} coordinates, expected {self.nvars}")
        return float(sum(t.evaluate(xv) for t in self.terms))

    def _var_indices(self, mode: int) -> list[int]:
        if not 1 <= mode <= self.modes:
            raise ValueError(f"mode {mode} out of range 1..{self.modes}")
        return [2 * (mode - 1), 2 * mode - 1]


def from_gaussian(state: GaussianState) -> WignerExpr:
    det = np.linalg.det(state.cov)
    if det <= 0.0:
        raise ValueError("singular covariance")
    w = 1.0 / (math.pi**state.modes * math.sqrt(det))
    term = Term(w, _const_poly(2 * state.modes), state.mean.copy(), state.cov.copy())
    return WignerExpr(state.modes, [term])


def _laguerre_poly_2d(n: int) -> Poly:
    """L_n(2(x^2+p^2)) expanded as a poly over (x, p)."""
    out: Poly = {}
    for k in range(n + 1):
        c = (-1) ** k * math.comb(n, k) * 2.0**k / math.factorial(k)
        for j in range(k + 1):
            e = (2 * j, 2 * (k - j))
            out[e] = out.get(e, 0.0) + c * math.comb(k, j)
    return out


def fock_wigner(n: int) -> WignerExpr:
    """Single-mode Fock state: (1/pi)(-1)^n L_n(2(x^2+p^2)) e^{-x^2-p^2}."""
    if n < 0:
        raise ValueError("photon number must be >= 0")
    if n > FOCK_CUTOFF:
        raise ValueError(f"photon number {n} above cutoff {FOCK_CUTOFF}")
    poly = _poly_scale(_laguerre_poly_2d(n), (-1.0) ** n)
    return WignerExpr(1, [Term(1.0 / math.pi, poly, np.zeros(2), np.eye(2))])


def tensor_exprs(a: WignerExpr, b: WignerExpr) -> WignerExpr:
    """Product state: concatenate variables (a's modes first)."""
    n = a.nvars + b.nvars
    terms = []
    for ta in a.terms:
        for tb in b.terms:
            poly = {}
            for ea, ca in ta.poly.items():
                for eb, cb in tb.poly.items():
                    poly[ea + eb] = ca * cb
            mean = np.concatenate([ta.mean, tb.mean])
            quad = np.zeros((n, n))
            quad[: a.nvars, : a.nvars] = ta.quad
            quad[a.nvars :, a.nvars :] = tb.quad
            terms.append(Term(ta.weight * tb.weight, poly, mean, quad))
    return WignerExpr(a.modes + b.modes, terms)


def apply_symplectic(expr: WignerExpr, f: SymplecticTransform) -> WignerExpr:
    """Propagate: mean -> f mean + shift, quad -> f quad f^T, poly recomposed via X -> f^{-1}(X - s)."""
    if f.modes != expr.modes:
        raise ValueError(f"dimension mismatch: transform has {f.modes} modes, expression has {expr.modes}")
    finv = np.linalg.inv(f.matrix)
    c = -finv @ f.shift
    nv = expr.nvars
    trivial_sub = np.array_equal(finv, np.eye(nv)) and not np.any(c)
    rows = [
        _poly_prune(
            dict(
                [(tuple(int(j == k) for k in range(nv)), finv[i, j]) for j in range(nv)]
                + [((0,) * nv, c[i])]
            )
        )
        for i in range(nv)
    ]
    terms = []
    for t in expr.terms:
        const_poly = len(t.poly) == 1 and next(iter(t.poly)) == (0,) * nv
        poly = t.poly if trivial_sub or const_poly else _poly_substitute(t.poly, rows, nv)
        quad = f.matrix @ t.quad @ f.matrix.T
        terms.append(Term(t.weight, poly, f.matrix @ t.mean + f.shift, (quad + quad.T) / 2.0))
    return WignerExpr(expr.modes, terms)


def moment(expr: WignerExpr, exponents: Mapping[int, int] | Iterable[int]) -> float:
    """Integral of X^exponents against the expression, exact via Wick pairings.

    `exponents` is either a full tuple over the 2N variables or a mapping
    {variable index: power} with 0-based variable indices.
    """
    if isinstance(exponents, Mapping):
        e = [0] * expr.nvars
        for k, v in exponents.items():
            e[k] = v
        e = tuple(e)
    else:
        e = tuple(exponents)
    if len(e) != expr.nvars:
        raise ValueError(f"exponent tuple has length {len(e)}, expected {expr.nvars}")
    mono = {e: 1.0}
    return sum(t.integral(mono) for t in expr.terms)


def _integrate_out(expr: WignerExpr, var_indices: list[int]) -> WignerExpr:
    """Analytically integrate out the given variables (0-based)."""
    out = sorted(var_indices)
    keep = [i for i in range(expr.nvars) if i not in out]
    new_terms = []
    for t in expr.terms:
        a = np.linalg.inv(t.quad)
        a_vv = a[np.ix_(out, out)]
        a_vu = a[np.ix_(out, keep)]
        det_avv = np.linalg.det(a_vv)
        z = math.pi ** (len(out) / 2.0) / math.sqrt(det_avv)
        new_quad = t.quad[np.ix_(keep, keep)]
        new_mean = t.mean[keep]
        # conditional mean of integrated vars: m_v - A_vv^{-1} A_vu (u - m_u), affine in u
        b = -np.linalg.solve(a_vv, a_vu)
        nk = len(keep)
        cond_rows = []
        for i in range(len(out)):
            row = {(0,) * nk: t.mean[out[i]] - float(b[i] @ new_mean)}
            for j in range(nk):
                if b[i, j] != 0.0:
                    row[tuple(int(j == k) for k in range(nk))] = b[i, j]
            cond_rows.append(_poly_prune(row) or _const_poly(nk, 0.0))
        cond_cov = np.linalg.inv(a_vv) / 2.0
        poly = _conditional_expectation_poly(t.poly, keep, out, cond_rows, cond_cov)
        if not poly:
            continue
        new_terms.append(Term(t.weight * z, poly, new_mean, new_quad))
    return WignerExpr(expr.modes - len(out) // 2, new_terms)


def marginalize(expr: WignerExpr, mode: int) -> WignerExpr:
    """Integrate out one mode's two variables; the norm is preserved."""
    if expr.modes < 2:
        raise ValueError("marginalize requires at least two modes")
    return _integrate_out(expr, expr._var_indices(mode))


def marginal_mode(expr: WignerExpr, mode: int) -> WignerExpr:
    """Reduce to a single mode by integrating out all others."""
    if not 1 <= mode <= expr.modes:
        raise ValueError(f"mode {mode} out of range 1..{expr.modes}")
    if expr.modes == 1:
        return expr
    drop = [i for i in range(expr.nvars) if i not in expr._var_indices(mode)]
    return _integrate_out(expr, drop)


def _multiply_projector(expr: WignerExpr, mode: int, proj_poly_2d: Poly, scale: float) -> WignerExpr:
    """Multiply by scale * poly(x_m, p_m) * exp(-x_m^2 - p_m^2) without integrating."""
    idx = expr._var_indices(mode)
    nv = expr.nvars
    terms = []
    for t in expr.terms:
        a1 = np.linalg.inv(t.quad)
        a2 = np.zeros((nv, nv))
        a2[idx[0], idx[0]] = 1.0
        a2[idx[1], idx[1]] = 1.0
        a3 = a1 + a2
        quad3 = np.linalg.inv(a3)
        quad3 = (quad3 + quad3.T) / 2.0
        m3 = np.linalg.solve(a3, a1 @ t.mean)  # projector Gaussian is centered at 0
        gamma = float(t.mean @ a1 @ t.mean - m3 @ a3 @ m3)
        lifted = {}
        for (ex, ep), c in proj_poly_2d.items():
            e = [0] * nv
            e[idx[0]], e[idx[1]] = ex, ep
            lifted[tuple(e)] = c
        poly = _poly_mul(t.poly, lifted)
        terms.append(Term(t.weight * scale * math.exp(-gamma), poly, m3, quad3))
    return WignerExpr(expr.modes, terms)


def project_fock_unnormalized(expr: WignerExpr, mode: int, n: int) -> WignerExpr:
    """Apply 2*pi*F_n on one mode and integrate that mode out (no renormalization)."""
    if n < 0 or n > FOCK_CUTOFF:
        raise ValueError(f"Fock projector order must lie in 0..{FOCK_CUTOFF}")
    poly = _poly_scale(_laguerre_poly_2d(n), (-1.0) ** n)
    projected = _multiply_projector(expr, mode, poly, 2.0)  # 2*pi * (1/pi) = 2
    return _integrate_out(projected, expr._var_indices(mode))


def project_fock(expr: WignerExpr, mode: int, n: int) -> tuple[WignerExpr, float]:
    """Herald n photons on one mode: returns (renormalized remainder, herald probability)."""
    reduced = project_fock_unnormalized(expr, mode, n)
    prob = reduced.norm / expr.norm
    if prob < IMPROBABLE_FLOOR:
        raise ImprobableBranch(prob)
    if expr.modes == 1:
        return WignerExpr(0, []), min(max(prob, 0.0), 1.0)
    return reduced.normalize(), min(max(prob, 0.0), 1.0)


def project_no_click(expr: WignerExpr, mode: int) -> tuple[WignerExpr, float]:
    """Herald vacuum (no click) on one mode."""
    return project_fock(expr, mode, 0)


def project_click(expr: WignerExpr, mode: int) -> tuple[WignerExpr, float]:
    """Herald a click (any photon number > 0) on one mode: projector 1 - F_0."""
    no_click = project_fock_unnormalized(expr, mode, 0)
    p0 = no_click.norm / expr.norm
    prob = 1.0 - p0
    if prob < IMPROBABLE_FLOOR:
        raise ImprobableBranch(prob)
    if expr.modes == 1:
        return WignerExpr(0, []), min(max(prob, 0.0), 1.0)
    full = _integrate_out(expr, expr._var_indices(mode))
    terms = list(full.terms) + [Term(-t.weight, t.poly, t.mean, t.quad) for t in no_click.terms]
    return WignerExpr(expr.modes - 1, terms).normalize(), min(max(prob, 0.0), 1.0)


def _single_mode_g(expr1: WignerExpr, s: complex) -> complex:
    """Integral of exp(-s (x^2+p^2)) against a normalized single-mode expression."""
    total = 0.0 + 0.0j
    for t in expr1.terms:
        a = np.linalg.inv(t.quad)
        evals, evecs = np.linalg.eigh(a)
        det_sqrt = np.sqrt(evals[0] + s) * np.sqrt(evals[1] + s)  # factors stay in the right half plane
        a_s = a + s * np.eye(2)
        m_s = np.linalg.solve(a_s, a @ t.mean).astype(complex)
        gamma = complex(t.mean @ a @ t.mean - m_s @ a_s @ m_s)
        cov_s = np.linalg.inv(a_s) / 2.0
        epoly = _gaussian_expectation(t.poly, m_s, cov_s)
        total += t.weight * np.exp(-gamma) * math.pi / det_sqrt * epoly
    return total


def generating_function(expr: WignerExpr, mode: int, l: float) -> float:
    """Photon-number generating function G(l) = sum_n P(n) l^n on one mode, for -1 < l <= 1."""
    if l <= -1.0:
        raise ValueError("generating function diverges for l <= -1")
    reduced = marginal_mode(expr.normalize(), mode)
    s = (1.0 - l) / (1.0 + l)
    val = 2.0 / (1.0 + l) * _single_mode_g(reduced, s)
    return float(np.real(val))


@dataclass(frozen=True)
class PhotonNumberDistribution:
    """P(n) for n = 0..n_max plus the truncated tail mass."""

    probs: np.ndarray
    n_max: int
    tail: float

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        p = np.clip(self.probs, 0.0, None)
        p = p / p.sum()
        return rng.choice(self.n_max + 1, size=size, p=p)


def photon_number_distribution(expr: WignerExpr, mode: int, n_max: int = DEFAULT_NMAX) -> PhotonNumberDistribution:
    """P(n) for n = 0..n_max via exact contour extraction from the generating function.

    Evaluates G on a root-of-unity grid (shifted off l = -1, where G has a
    removable singularity) and Fourier-inverts; this is the same Fock-projector
    integral as project_fock but stays numerically exact at large n, where the
    expanded Laguerre route loses precision to cancellation.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    reduced = marginal_mode(expr.normalize(), mode)
    m = 512
    while m < 8 * (n_max + 1):
        m *= 2
    ks = np.arange(m)
    tks = np.exp(1j * math.pi * (2 * ks + 1) / m)
    gs = np.empty(m, dtype=complex)
    for i, tk in enumerate(tks):
        s = (1.0 - tk) / (1.0 + tk)
        gs[i] = 2.0 / (1.0 + tk) * _single_mode_g(reduced, s)
    ns = np.arange(n_max + 1)
    probs = np.real(gs @ np.exp(-1j * math.pi * np.outer(2 * ks + 1, ns) / m)) / m
    if probs.min() < -1e-9 or probs.max() > 1.0 + 1e-9:
        raise ValueError(f"distribution outside [0,1]: range [{probs.min():.3e}, {probs.max():.3e}]")
    probs = np.clip(probs, 0.0, 1.0)
    return PhotonNumberDistribution(probs, n_max, 1.0 - float(probs.sum()))


def attenuate(expr: WignerExpr, mode: int, eta: float, nbar_env: float = 0.0) -> WignerExpr:
    """Loss/thermal channel on one mode: mix with a thermal ancilla on BS(eta), drop the ancilla.

    Non-Gaussian counterpart of the Gaussian-engine channels, for pipelines
    where heralding has already broken Gaussianity.
    """
    from .gaussian import thermal_state
    from .symplectic import embed, make_beam_splitter

    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {eta}")
    if nbar_env < 0.0:
        raise ValueError(f"environment photon number must be >= 0, got {nbar_env}")
    joint = tensor_exprs(expr, from_gaussian(thermal_state(nbar_env)))
    anc = expr.modes + 1
    mixed = apply_symplectic(joint, embed(make_beam_splitter(eta), [mode, anc], anc))
    return _integrate_out(mixed, [2 * (anc - 1), 2 * anc - 1])


def purity(expr: WignerExpr) -> float:
    """(2 pi)^N * integral of W^2, via the analytic product rule."""
    nv = expr.nvars
    total = 0.0
    for t1 in expr.terms:
        a1 = np.linalg.inv(t1.quad)
        for t2 in expr.terms:
            a2 = np.linalg.inv(t2.quad)
            a3 = a1 + a2
            quad3 = np.linalg.inv(a3)
            quad3 = (quad3 + quad3.T) / 2.0
            m3 = np.linalg.solve(a3, a1 @ t1.mean + a2 @ t2.mean)
            gamma = float(t1.mean @ a1 @ t1.mean + t2.mean @ a2 @ t2.mean - m3 @ a3 @ m3)
            prod = Term(t1.weight * t2.weight * math.exp(-gamma), _poly_mul(t1.poly, t2.poly), m3, quad3)
            total += prod.integral()
    return (2.0 * math.pi) ** expr.modes * total / expr.norm**2


def grid_samples(expr: WignerExpr, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    """Sample a single-mode expression on a rectangular grid; rows ordered (x, p, W)."""
    if expr.modes != 1:
        raise ValueError("grid export requires a single-mode expression")
    rows = np.empty((xs.size * ps.size, 3))
    i = 0
    for x in xs:
        for p in ps:
            rows[i] = (x, p, expr.evaluate((x, p)))
            i += 1
    return rows


def save_grid_csv(expr: WignerExpr, xs: np.ndarray, ps: np.ndarray, path: str) -> None:
    rows = grid_samples(expr, xs, ps)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,p,W\n")
        for x, p, w in rows:
            fh.write(f"{x:.17g},{p:.17g},{w:.17g}\n")
