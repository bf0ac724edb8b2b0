"""Independent truncated Fock-basis simulator used as the test oracle.

Everything here is deliberately brute force: states are mixtures of pure
vectors on a per-mode-truncated Fock lattice, optical elements act by
exponentiating sparse quadratic generators, and measurements are plain
operator expectations.  Nothing is shared with the phase-space engine except
the engine's element conventions, which test_oracle pins numerically.

Element conventions (matching the engine's symplectic matrices):
    BS(T):    exp(theta (a_i a_j^+ - a_i^+ a_j)) . exp(i pi n_j), theta = arccos sqrt(T)
    PS(phi):  exp(i phi n)
    PS2(phi): exp(i phi/2 n_i) exp(-i phi/2 n_j)
    S(r, th): PS(th/2) exp(r/2 (a^+2 - a^2)) PS(-th/2)
    S2(r,th): [PS(th/2) x PS(th/2)] exp(r (a_i^+ a_j^+ - a_i a_j)) [PS(-th/2) x PS(-th/2)]
    D(a, th): exp(alpha a^+ - alpha^* a), alpha = |a| e^{i th}
"""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply


class Oracle:
    """Operator factory for a fixed per-mode truncation."""

    def __init__(self, dims):
        self.dims = tuple(int(d) for d in dims)
        self.dim = int(np.prod(self.dims))

    def _embed(self, op, mode: int):
        mats = [sparse.identity(d, format="csr", dtype=complex) for d in self.dims]
        mats[mode - 1] = sparse.csr_matrix(op, dtype=complex)
        out = mats[0]
        for m in mats[1:]:
            out = sparse.kron(out, m, format="csr")
        return out

    def destroy(self, mode: int):
        d = self.dims[mode - 1]
        a = sparse.diags(np.sqrt(np.arange(1, d)), 1)
        return self._embed(a, mode)

    def number(self, mode: int):
        d = self.dims[mode - 1]
        return self._embed(sparse.diags(np.arange(d, dtype=float)), mode)

    def xquad(self, mode: int, theta: float = 0.0):
        a = self.destroy(mode)
        return (a * np.exp(-1j * theta) + a.conj().T * np.exp(1j * theta)) / math.sqrt(2.0)

    def parity_diag(self, mode: int) -> np.ndarray:
        per = [np.ones(d) for d in self.dims]
        per[mode - 1] = (-1.0) ** np.arange(self.dims[mode - 1])
        out = per[0]
        for v in per[1:]:
            out = np.kron(out, v)
        return out

    # --- optical elements as ordered step lists -------------------------

    def ps(self, mode: int, phi: float):
        diag = np.ones(1, dtype=complex)
        for k, d in enumerate(self.dims, start=1):
            v = np.exp(1j * phi * np.arange(d)) if k == mode else np.ones(d, dtype=complex)
            diag = np.kron(diag, v)
        return [("diag", diag)]

    def ps2(self, i: int, j: int, phi: float):
        return self.ps(i, phi / 2.0) + self.ps(j, -phi / 2.0)

    def bs(self, i: int, j: int, T: float):
        theta = math.acos(math.sqrt(T))
        ai, aj = self.destroy(i), self.destroy(j)
        gen = theta * (ai @ aj.conj().T - ai.conj().T @ aj)
        flip = self.ps(j, math.pi)
        return flip + [("expm", gen)]

    def squeeze(self, mode: int, r: float, theta: float = 0.0):
        a = self.destroy(mode)
        gen = 0.5 * r * (a.conj().T @ a.conj().T - a @ a)
        steps = [("expm", gen)]
        if theta:
            steps = self.ps(mode, -theta / 2.0) + steps + self.ps(mode, theta / 2.0)
        return steps

    def tms(self, i: int, j: int, r: float, theta: float = 0.0):
        ai, aj = self.destroy(i), self.destroy(j)
        gen = r * (ai.conj().T @ aj.conj().T - ai @ aj)
        steps = [("expm", gen)]
        if theta:
            pre = self.ps(i, -theta / 2.0) + self.ps(j, -theta / 2.0)
            post = self.ps(i, theta / 2.0) + self.ps(j, theta / 2.0)
            steps = pre + steps + post
        return steps

    def displace(self, mode: int, alpha_mag: float, theta: float = 0.0):
        a = self.destroy(mode)
        alpha = alpha_mag * np.exp(1j * theta)
        return [("expm", alpha * a.conj().T - np.conj(alpha) * a)]

    def mzi(self, phi: float):
        return self.bs(1, 2, 0.5) + self.ps2(1, 2, phi) + self.bs(1, 2, 0.5)


def _coherent_vector(alpha: complex, d: int) -> np.ndarray:
    v = np.empty(d, dtype=complex)
    v[0] = 1.0
    for n in range(1, d):
        v[n] = v[n - 1] * alpha / math.sqrt(n)
    v *= math.exp(-abs(alpha) ** 2 / 2.0)
    return v / np.linalg.norm(v)


class Mixture:
    """Statistical mixture of pure vectors on the oracle's lattice."""

    def __init__(self, oracle: Oracle, weights, vectors):
        self.oracle = oracle
        self.weights = np.asarray(weights, dtype=float)
        self.vectors = np.asarray(vectors, dtype=complex)  # shape (dim, rank)

    @classmethod
    def from_product(cls, oracle: Oracle, specs) -> "Mixture":
        """Build a product state; each spec is a tuple like ('coherent', alpha)."""
        parts = []
        for d, spec in zip(oracle.dims, specs):
            kind = spec[0]
            if kind == "vacuum":
                v = np.zeros(d, dtype=complex)
                v[0] = 1.0
                parts.append([(1.0, v)])
            elif kind == "fock":
                v = np.zeros(d, dtype=complex)
                v[spec[1]] = 1.0
                parts.append([(1.0, v)])
            elif kind == "coherent":
                parts.append([(1.0, _coherent_vector(spec[1], d))])
            elif kind == "thermal":
                nbar = spec[1]
                if nbar == 0.0:
                    v = np.zeros(d, dtype=complex)
                    v[0] = 1.0
                    parts.append([(1.0, v)])
                else:
                    p = (nbar / (nbar + 1.0)) ** np.arange(d) / (nbar + 1.0)
                    p = p / p.sum()
                    comp = []
                    for n in range(d):
                        v = np.zeros(d, dtype=complex)
                        v[n] = 1.0
                        comp.append((p[n], v))
                    parts.append(comp)
            elif kind == "squeezed":
                v = np.zeros(d, dtype=complex)
                v[0] = 1.0
                single = Oracle([d])
                for step in single.squeeze(1, spec[1], spec[2] if len(spec) > 2 else 0.0):
                    v = _apply_step(step, v.reshape(-1, 1)).reshape(-1)
                parts.append([(1.0, v / np.linalg.norm(v))])
            else:
                raise ValueError(f"unknown state spec {spec!r}")
        weights = [1.0]
        vectors = [np.ones(1, dtype=complex)]
        for comp in parts:
            weights = [w * pw for w in weights for pw, _ in comp]
            vectors = [np.kron(v, pv) for v in vectors for _, pv in comp]
        return cls(oracle, weights, np.stack(vectors, axis=1))

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    def apply(self, steps) -> "Mixture":
        vecs = self.vectors
        for step in steps:  # step lists are in application order (first entry acts first)
            vecs = _apply_step(step, vecs)
        return Mixture(self.oracle, self.weights, vecs)

    def expect(self, op) -> float:
        if isinstance(op, np.ndarray) and op.ndim == 1:
            vals = np.einsum("ir,i,ir->r", self.vectors.conj(), op, self.vectors)
        else:
            vals = np.einsum("ir,ir->r", self.vectors.conj(), np.asarray(op @ self.vectors))
        return float(np.real(self.weights @ vals))

    def number_mean(self, mode: int) -> float:
        return self.expect(self.oracle.number(mode))

    def number_moments(self, mode: int) -> tuple[float, float]:
        n = self.oracle.number(mode)
        return self.expect(n), self.expect(n @ n)

    def number_diff_moments(self, i: int, j: int) -> tuple[float, float]:
        d = self.oracle.number(i) - self.oracle.number(j)
        return self.expect(d), self.expect(d @ d)

    def quadrature_moments(self, mode: int, theta: float = 0.0) -> tuple[float, float]:
        x = self.oracle.xquad(mode, theta)
        return self.expect(x), self.expect(x @ x)

    def parity_mean(self, mode: int) -> float:
        return self.expect(self.oracle.parity_diag(mode))

    def number_distribution(self, mode: int) -> np.ndarray:
        axis = mode - 1
        shaped = self.vectors.reshape(self.oracle.dims + (self.rank,))
        probs = np.abs(shaped) ** 2
        other = tuple(k for k in range(len(self.oracle.dims)) if k != axis)
        marg = probs.sum(axis=other)  # (d_mode, rank)
        return marg @ self.weights

    def click_probability(self, mode: int) -> float:
        return 1.0 - float(self.number_distribution(mode)[0])

    def total_mean_photon(self) -> float:
        return sum(self.number_mean(k) for k in range(1, len(self.oracle.dims) + 1))

    def _slices(self, mode: int, n: int) -> np.ndarray:
        axis = mode - 1
        shaped = self.vectors.reshape(self.oracle.dims + (self.rank,))
        sl = [slice(None)] * len(self.oracle.dims) + [slice(None)]
        sl[axis] = n
        rest = shaped[tuple(sl)]
        return rest.reshape(-1, self.rank)

    def _reduced_oracle(self, mode: int) -> Oracle:
        dims = list(self.oracle.dims)
        dims.pop(mode - 1)
        return Oracle(dims)

    def herald_fock(self, mode: int, n: int) -> tuple["Mixture", float]:
        """Project mode onto |n><n|, drop it, and renormalize."""
        sub = self._slices(mode, n)
        norms = np.einsum("ir,ir->r", sub.conj(), sub).real
        prob = float(self.weights @ norms)
        keep = norms > 1e-300
        w = (self.weights * norms)[keep] / prob
        v = sub[:, keep] / np.sqrt(norms[keep])
        return Mixture(self._reduced_oracle(mode), w, v), prob

    def herald_click(self, mode: int) -> tuple["Mixture", float]:
        """Condition on the mode containing at least one photon, then drop it."""
        d = self.oracle.dims[mode - 1]
        weights, vectors = [], []
        prob = 0.0
        for n in range(1, d):
            sub = self._slices(mode, n)
            norms = np.einsum("ir,ir->r", sub.conj(), sub).real
            prob += float(self.weights @ norms)
            for r in range(self.rank):
                if norms[r] > 1e-300:
                    weights.append(self.weights[r] * norms[r])
                    vectors.append(sub[:, r] / math.sqrt(norms[r]))
        w = np.array(weights) / prob
        return Mixture(self._reduced_oracle(mode), w, np.stack(vectors, axis=1)), prob

    def loss(self, mode: int, eta: float, kmax: int | None = None) -> "Mixture":
        """Amplitude damping via Kraus operators K_k = sqrt((1-eta)^k/k!) eta^{n/2} a^k."""
        d = self.oracle.dims[mode - 1]
        kmax = d if kmax is None else min(kmax, d)
        a = self.oracle.destroy(mode)
        n_diag = np.asarray((self.oracle.number(mode)).diagonal()).real
        damp = eta ** (n_diag / 2.0)
        weights, vectors = [], []
        for r in range(self.rank):
            psi = self.vectors[:, r]
            current = psi.copy()
            for k in range(kmax):
                coeff = (1.0 - eta) ** k / math.factorial(k)
                vec = np.sqrt(coeff) * (damp * current)
                norm2 = float(np.real(vec.conj() @ vec))
                if norm2 > 1e-24:
                    weights.append(self.weights[r] * norm2)
                    vectors.append(vec / math.sqrt(norm2))
                current = np.asarray(a @ current)
        w = np.array(weights)
        total = w.sum()
        return Mixture(self.oracle, w / total, np.stack(vectors, axis=1))

    def dm(self) -> np.ndarray:
        return (self.vectors * self.weights) @ self.vectors.conj().T


def _apply_step(step, vecs: np.ndarray) -> np.ndarray:
    kind, payload = step
    if kind == "diag":
        return payload[:, None] * vecs
    return expm_multiply(payload, vecs)


def qfi_sld(rho: np.ndarray, drho: np.ndarray, tol: float = 1e-12) -> float:
    """QFI via the symmetric logarithmic derivative, by eigendecomposition."""
    w, v = np.linalg.eigh(rho)
    dr = v.conj().T @ drho @ v
    s = w[:, None] + w[None, :]
    mask = s > tol
    return float(2.0 * np.sum(np.abs(dr[mask]) ** 2 / s[mask]))
