"""Heralded photon addition and subtraction.

Addition and subtraction are intrinsically nondeterministic: every operation
here returns a HeraldedState carrying its success probability, and the pure
creation/annihilation-operator treatment exists only as the T -> 1 (or r -> 0)
limit of these models, where that probability vanishes.

Mode bookkeeping: the ancilla enters as beam-splitter (or two-mode squeezer)
input 1 and the signal as input 2, matching the element conventions in `symplectic`; the
herald detector sits on the ancilla output, so the signal keeps sqrt(T) of its
amplitude (up to sign).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import eval_laguerre

from .errors import ImprobableBranch
from .gaussian import vacuum_state
from .symplectic import embed, make_beam_splitter, make_two_mode_squeezer
from .wigner import (
    Term,
    WignerExpr,
    _integrate_out,
    apply_symplectic,
    fock_wigner,
    from_gaussian,
    project_click,
    project_fock,
    project_fock_unnormalized,
    tensor_exprs,
)

M_CUTOFF = 8


@dataclass(frozen=True)
class HeraldedState:
    """A post-measurement state, its herald probability, and which branch it is."""

    state: WignerExpr
    probability: float
    branch: str  # "success" or "failure"
    label: str


def _check_spec(mode: int, m: int, T: float) -> None:
    if not 1 <= m <= M_CUTOFF:
        raise ValueError(f"photon count m must lie in 1..{M_CUTOFF}, got {m}")
    if not 0.0 <= T <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {T}")


def _with_ancilla(expr: WignerExpr, mode: int, T: float, ancilla: WignerExpr) -> tuple[WignerExpr, int]:
    """Tensor an ancilla as the last mode and mix it with `mode` on BS(T); ancilla is input 1."""
    if not 1 <= mode <= expr.modes:
        raise ValueError(f"mode {mode} out of range 1..{expr.modes}")
    joint = tensor_exprs(expr, ancilla)
    anc = expr.modes + 1
    mixed = apply_symplectic(joint, embed(make_beam_splitter(T), [anc, mode], anc))
    return mixed, anc


def _complement_branch(mixed: WignerExpr, anc: int, n: int, label: str) -> HeraldedState:
    """Complement of a Fock-n herald on the ancilla: projector 1 - 2 pi F_n."""
    success = project_fock_unnormalized(mixed, anc, n)
    p_fail = 1.0 - success.norm / mixed.norm
    if p_fail < 1e-14:
        raise ImprobableBranch(p_fail)
    idx = [2 * (anc - 1), 2 * anc - 1]
    full = _integrate_out(mixed, idx)
    terms = list(full.terms) + [Term(-t.weight, t.poly, t.mean, t.quad) for t in success.terms]
    state = WignerExpr(mixed.modes - 1, terms).normalize()
    return HeraldedState(state, p_fail, "failure", label)


def add_photons_bs(expr: WignerExpr, mode: int, m: int, T: float) -> HeraldedState:
    """Add m photons: Fock-m ancilla on BS(T), heralded by zero photons on the ancilla output."""
    _check_spec(mode, m, T)
    mixed, anc = _with_ancilla(expr, mode, T, fock_wigner(m))
    state, prob = project_fock(mixed, anc, 0)
    return HeraldedState(state, prob, "success", f"add {m} via BS(T={T:g}), Fock 0 herald")


def add_photons_bs_branches(expr: WignerExpr, mode: int, m: int, T: float) -> tuple[HeraldedState, HeraldedState]:
    """Matched success/failure pair for the beam-splitter addition herald."""
    _check_spec(mode, m, T)
    mixed, anc = _with_ancilla(expr, mode, T, fock_wigner(m))
    state, prob = project_fock(mixed, anc, 0)
    success = HeraldedState(state, prob, "success", f"add {m} via BS(T={T:g}), Fock 0 herald")
    failure = _complement_branch(mixed, anc, 0, f"failed to add {m} via BS(T={T:g})")
    return success, failure


def add_photon_spdc(expr: WignerExpr, mode: int, r: float, theta: float = 0.0, m: int = 1) -> HeraldedState:
    """Add m photons by two-mode squeezing with a vacuum ancilla, heralded on m ancilla photons."""
    if r < 0.0:
        raise ValueError(f"squeezing parameter must be >= 0, got {r}")
    if not 1 <= m <= M_CUTOFF:
        raise ValueError(f"photon count m must lie in 1..{M_CUTOFF}, got {m}")
    if not 1 <= mode <= expr.modes:
        raise ValueError(f"mode {mode} out of range 1..{expr.modes}")
    joint = tensor_exprs(expr, from_gaussian(vacuum_state(1)))
    anc = expr.modes + 1
    mixed = apply_symplectic(joint, embed(make_two_mode_squeezer(r, theta), [anc, mode], anc))
    state, prob = project_fock(mixed, anc, m)
    return HeraldedState(state, prob, "success", f"add {m} via SPDC(r={r:g}), Fock {m} herald")


def subtract_photons(expr: WignerExpr, mode: int, m: int, T: float) -> HeraldedState:
    """Subtract m photons: vacuum ancilla on BS(T), heralded by m photons on the ancilla output."""
    _check_spec(mode, m, T)
    mixed, anc = _with_ancilla(expr, mode, T, from_gaussian(vacuum_state(1)))
    state, prob = project_fock(mixed, anc, m)
    return HeraldedState(state, prob, "success", f"subtract {m} via BS(T={T:g}), Fock {m} herald")


def add_photon_spdc_branches(
    expr: WignerExpr, mode: int, r: float, theta: float = 0.0, m: int = 1
) -> tuple[HeraldedState, HeraldedState]:
    """Matched success/failure pair for the SPDC addition herald."""
    if r < 0.0:
        raise ValueError(f"squeezing parameter must be >= 0, got {r}")
    if not 1 <= mode <= expr.modes:
        raise ValueError(f"mode {mode} out of range 1..{expr.modes}")
    joint = tensor_exprs(expr, from_gaussian(vacuum_state(1)))
    anc = expr.modes + 1
    mixed = apply_symplectic(joint, embed(make_two_mode_squeezer(r, theta), [anc, mode], anc))
    state, prob = project_fock(mixed, anc, m)
    success = HeraldedState(state, prob, "success", f"add {m} via SPDC(r={r:g}), Fock {m} herald")
    failure = _complement_branch(mixed, anc, m, f"failed to add {m} via SPDC(r={r:g})")
    return success, failure


def failure_branch(expr: WignerExpr, mode: int, m: int, T: float) -> HeraldedState:
    """Complement of subtract_photons: the herald saw anything other than exactly m photons."""
    _check_spec(mode, m, T)
    mixed, anc = _with_ancilla(expr, mode, T, from_gaussian(vacuum_state(1)))
    return _complement_branch(mixed, anc, m, f"failed to subtract exactly {m} via BS(T={T:g})")


def subtract_branches(expr: WignerExpr, mode: int, m: int, T: float) -> tuple[HeraldedState, HeraldedState]:
    """Matched success/failure pair for an m-photon subtraction herald."""
    return subtract_photons(expr, mode, m, T), failure_branch(expr, mode, m, T)


def subtract_click(expr: WignerExpr, mode: int, T: float) -> HeraldedState:
    """Subtraction heralded by a click (any photon number) on the ancilla output."""
    _check_spec(mode, 1, T)
    mixed, anc = _with_ancilla(expr, mode, T, from_gaussian(vacuum_state(1)))
    state, prob = project_click(mixed, anc)
    return HeraldedState(state, prob, "success", f"subtract via BS(T={T:g}), click herald")


def subtract_click_branches(expr: WignerExpr, mode: int, T: float) -> tuple[HeraldedState, HeraldedState]:
    """Click-heralded subtraction together with its no-click complement."""
    _check_spec(mode, 1, T)
    mixed, anc = _with_ancilla(expr, mode, T, from_gaussian(vacuum_state(1)))
    no_click, p0 = project_fock(mixed, anc, 0)
    click, pc = project_click(mixed, anc)
    return (
        HeraldedState(click, pc, "success", f"subtract via BS(T={T:g}), click herald"),
        HeraldedState(no_click, p0, "failure", f"no click on BS(T={T:g}) herald"),
    )


# ---------------------------------------------------------------------------
# Closed-form reference statistics for the heralded models.
# ---------------------------------------------------------------------------


def spacs_mean_n(alpha2: float, m: int, T: float) -> float:
    """Mean photon number of the m-photon-added coherent state (BS model)."""
    if alpha2 < 0.0 or not 0.0 <= T <= 1.0 or m < 0:
        raise ValueError("require alpha2 >= 0, 0 <= T <= 1, m >= 0")
    y = -T * alpha2
    if m == 0:
        return T * alpha2
    return T * alpha2 + 2.0 * m - m * eval_laguerre(m - 1, y) / eval_laguerre(m, y)


def spacs_second_moment(alpha2: float, m: int, T: float) -> float:
    """Second moment of the photon number of the m-photon-added coherent state."""
    if alpha2 < 0.0 or not 0.0 <= T <= 1.0 or m < 0:
        raise ValueError("require alpha2 >= 0, 0 <= T <= 1, m >= 0")
    y = -T * alpha2
    num = (
        (m + 2) * (m + 1) * eval_laguerre(m + 2, y)
        - 3.0 * (m + 1) * eval_laguerre(m + 1, y)
        + eval_laguerre(m, y)
    )
    return num / eval_laguerre(m, y)


def spacs_prob(alpha2: float, m: int, T: float) -> float:
    """Success probability of adding m photons to a coherent state."""
    if alpha2 < 0.0 or not 0.0 <= T <= 1.0 or m < 1:
        raise ValueError("require alpha2 >= 0, 0 <= T <= 1, m >= 1")
    return (1.0 - T) ** m * math.exp(alpha2 * (T - 1.0)) * eval_laguerre(m, -T * alpha2)


def spacs_snr(alpha2: float, m: int, T: float) -> float:
    """SNR of the m-photon-added coherent state with the injected m photons subtracted off."""
    mean = spacs_mean_n(alpha2, m, T)
    var = spacs_second_moment(alpha2, m, T) - mean**2
    return (mean - m) / math.sqrt(var)


def thermal_snr(nbar: float) -> float:
    """SNR of a plain thermal state of mean photon number nbar."""
    if nbar <= 0.0:
        raise ValueError("thermal SNR requires nbar > 0")
    return nbar / math.sqrt(nbar**2 + nbar)


def spsts_mean_n(nbar: float, m: int, T: float) -> float:
    """Mean photon number of the m-photon-subtracted thermal state."""
    if nbar < 0.0 or not 0.0 <= T <= 1.0 or m < 0:
        raise ValueError("require nbar >= 0, 0 <= T <= 1, m >= 0")
    return (m + 1) * nbar * T / (nbar * (1.0 - T) + 1.0)


def spsts_prob(nbar: float, m: int, T: float) -> float:
    """Probability of heralding exactly m photons subtracted from a thermal state."""
    if nbar < 0.0 or not 0.0 <= T <= 1.0 or m < 0:
        raise ValueError("require nbar >= 0, 0 <= T <= 1, m >= 0")
    x = nbar * (1.0 - T)
    return x**m / (x + 1.0) ** (m + 1)


def spsts_snr(nbar: float, m: int, T: float) -> float:
    """SNR of the m-photon-subtracted thermal state: sqrt(T(m+1)) times the thermal SNR."""
    return math.sqrt(T * (m + 1)) * thermal_snr(nbar)


def _mzi_arm_mean(nbar: float, phi: float) -> float:
    """Thermal mean photon number reaching the subtraction arm of the MZI at phase phi."""
    return nbar * math.cos(phi / 2.0) ** 2


def mzi_sub_prob_m(nbar: float, m: int, T: float, phi: float) -> float:
    """Herald probability for m-photon subtraction at the MZI output (thermal + vacuum input)."""
    return spsts_prob(_mzi_arm_mean(nbar, phi), m, T)


def mzi_sub_prob_click(nbar: float, T: float, phi: float) -> float:
    """Click-herald probability for subtraction at the MZI output."""
    x = _mzi_arm_mean(nbar, phi) * (1.0 - T)
    return 1.0 - 1.0 / (x + 1.0)


def mzi_sub_mean_n(nbar: float, m: int, T: float, phi: float) -> float:
    """Post-herald mean photon number for m-photon subtraction at the MZI output."""
    return spsts_mean_n(_mzi_arm_mean(nbar, phi), m, T)


def mzi_sub_mean_click(nbar: float, T: float, phi: float) -> float:
    """Post-herald mean photon number for click-heralded subtraction at the MZI output."""
    ntil = _mzi_arm_mean(nbar, phi)
    x = ntil * (1.0 - T)
    return T * ntil * (x + 2.0) / (x + 1.0)


def mzi_sub_snr(nbar: float, m: int, T: float, phi: float) -> float:
    """SNR of the m-subtracted MZI output: sqrt(T(m+1)) times the plain MZI-output thermal SNR."""
    return math.sqrt(T * (m + 1)) * thermal_snr(_mzi_arm_mean(nbar, phi))


_REFERENCE = {
    "spacs_mean_n": spacs_mean_n,
    "spacs_second_moment": spacs_second_moment,
    "spacs_prob": spacs_prob,
    "spacs_snr": spacs_snr,
    "spsts_mean_n": spsts_mean_n,
    "spsts_prob": spsts_prob,
    "spsts_snr": spsts_snr,
    "thermal_snr": thermal_snr,
    "mzi_sub_prob_m": mzi_sub_prob_m,
    "mzi_sub_prob_click": mzi_sub_prob_click,
    "mzi_sub_mean_n": mzi_sub_mean_n,
    "mzi_sub_mean_click": mzi_sub_mean_click,
    "mzi_sub_snr": mzi_sub_snr,
}


def reference_stats(kind: str, **params) -> float:
    """Evaluate one of the closed-form reference statistics by name."""
    if kind not in _REFERENCE:
        raise ValueError(f"unknown reference statistic {kind!r}; options: {sorted(_REFERENCE)}")
    return float(_REFERENCE[kind](**params))
