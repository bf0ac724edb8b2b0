"""Configuration-driven MZI studies: run, sweep, phase drift, simulated counts.

A scenario is a single structured config (JSON, or a dotted key-tree) that
declares the two input states, ordered per-mode modifications at the input or
output stage, the interferometer phase, the noise model, the detector list,
and which metrics to compute.  Pipelines that stay Gaussian run on the
mean/covariance fast path; any Fock input or heralded addition/subtraction
switches to the full Wigner representation.  Identical config plus seed gives
byte-identical CSV/JSON output.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__
from .errors import ConfigError, DegenerateBranch, ImprobableBranch, SignalStationary
from . import conditional as cond
from . import estimation as est
from . import gaussian as ga
from . import measurements as meas
from . import symplectic as sym
from . import wigner as wig

SWEEP_PARAMETERS = ("phi", "alpha2", "r", "T", "L", "D", "nbar", "nbar_env", "m")
METRICS = ("phase_variance", "cfi", "qfi", "snr", "distributions")
DRIFT_SIGMA_DEFAULTS = {"parity": 0.001, "default": 0.15}
THREADS_ENV = "WIGNERSIM_THREADS"


# ---------------------------------------------------------------------------
# Config parsing and validation.
# ---------------------------------------------------------------------------


def _reject_unknown(d: dict, allowed: set, path: str) -> None:
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else k, f"unknown key (allowed: {sorted(allowed)})")


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return d[key]


def _number(v, path: str, lo=None, hi=None) -> float:
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(path, f"expected a number, got {v!r}")
    v = float(v)
    if lo is not None and v < lo:
        raise ConfigError(path, f"value {v} below minimum {lo}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"value {v} above maximum {hi}")
    return v


@dataclass(frozen=True)
class InputSpec:
    kind: str
    alpha: float = 0.0
    theta: float = 0.0
    nbar: float = 0.0
    n: int = 1

    KINDS = ("vacuum", "coherent", "thermal", "fock")

    @staticmethod
    def from_dict(d: dict, path: str) -> "InputSpec":
        kind = _need(d, "kind", path)
        if kind not in InputSpec.KINDS:
            raise ConfigError(f"{path}.kind", f"unknown input kind {kind!r} (menu: {InputSpec.KINDS})")
        if kind == "vacuum":
            _reject_unknown(d, {"kind"}, path)
            return InputSpec("vacuum")
        if kind == "coherent":
            _reject_unknown(d, {"kind", "alpha", "theta"}, path)
            return InputSpec("coherent", alpha=_number(_need(d, "alpha", path), f"{path}.alpha", lo=0.0),
                             theta=_number(d.get("theta", 0.0), f"{path}.theta"))
        if kind == "thermal":
            _reject_unknown(d, {"kind", "nbar"}, path)
            return InputSpec("thermal", nbar=_number(_need(d, "nbar", path), f"{path}.nbar", lo=0.0))
        _reject_unknown(d, {"kind", "n"}, path)
        n = d.get("n", 1)
        if n != 1:
            raise ConfigError(f"{path}.n", "the input menu offers the single-photon Fock state only (n = 1)")
        return InputSpec("fock", n=1)

    def gaussian(self) -> ga.GaussianState | None:
        if self.kind == "vacuum":
            return ga.vacuum_state(1)
        if self.kind == "coherent":
            return ga.coherent_state(self.alpha, self.theta)
        if self.kind == "thermal":
            return ga.thermal_state(self.nbar)
        return None

    def expr(self) -> wig.WignerExpr:
        g = self.gaussian()
        return wig.from_gaussian(g) if g is not None else wig.fock_wigner(self.n)


@dataclass(frozen=True)
class ModificationSpec:
    op: str
    stage: str
    mode: int
    r: float = 0.0
    theta: float = 0.0
    alpha: float = 0.0
    m: int | str = 1
    T: float = 1.0
    mechanism: str = "bs"

    OPS = ("squeeze", "displace", "add", "subtract")

    @staticmethod
    def from_dict(d: dict, path: str) -> "ModificationSpec":
        op = _need(d, "op", path)
        if op not in ModificationSpec.OPS:
            raise ConfigError(f"{path}.op", f"unknown modification {op!r} (menu: {ModificationSpec.OPS})")
        stage = d.get("stage", "input")
        if stage not in ("input", "output"):
            raise ConfigError(f"{path}.stage", f"stage must be 'input' or 'output', got {stage!r}")
        mode = _need(d, "mode", path)
        if mode not in (1, 2):
            raise ConfigError(f"{path}.mode", f"mode must be 1 or 2, got {mode!r}")
        if op == "squeeze":
            _reject_unknown(d, {"op", "stage", "mode", "r", "theta", "gain"}, path)
            if "gain" in d:
                g = _number(d["gain"], f"{path}.gain", lo=1.0)
                return ModificationSpec("squeeze", stage, mode, r=math.acosh(math.sqrt(g)), theta=0.0)
            return ModificationSpec("squeeze", stage, mode,
                                    r=_number(_need(d, "r", path), f"{path}.r", lo=0.0),
                                    theta=_number(d.get("theta", 0.0), f"{path}.theta"))
        if op == "displace":
            _reject_unknown(d, {"op", "stage", "mode", "alpha", "theta"}, path)
            return ModificationSpec("displace", stage, mode,
                                    alpha=_number(_need(d, "alpha", path), f"{path}.alpha", lo=0.0),
                                    theta=_number(d.get("theta", 0.0), f"{path}.theta"))
        if op == "add":
            _reject_unknown(d, {"op", "stage", "mode", "m", "mechanism", "T", "r", "theta"}, path)
            mech = d.get("mechanism", "bs")
            if mech not in ("bs", "spdc"):
                raise ConfigError(f"{path}.mechanism", f"mechanism must be 'bs' or 'spdc', got {mech!r}")
            m = d.get("m", 1)
            if not isinstance(m, int) or not 1 <= m <= cond.M_CUTOFF:
                raise ConfigError(f"{path}.m", f"m must be an integer in 1..{cond.M_CUTOFF}")
            if mech == "bs":
                return ModificationSpec("add", stage, mode, m=m, mechanism="bs",
                                        T=_number(_need(d, "T", path), f"{path}.T", lo=0.0, hi=1.0))
            return ModificationSpec("add", stage, mode, m=m, mechanism="spdc",
                                    r=_number(_need(d, "r", path), f"{path}.r", lo=0.0),
                                    theta=_number(d.get("theta", 0.0), f"{path}.theta"))
        _reject_unknown(d, {"op", "stage", "mode", "m", "T"}, path)
        m = d.get("m", 1)
        if m != "click" and (not isinstance(m, int) or not 1 <= m <= cond.M_CUTOFF):
            raise ConfigError(f"{path}.m", f"m must be 'click' or an integer in 1..{cond.M_CUTOFF}")
        return ModificationSpec("subtract", stage, mode, m=m,
                                T=_number(_need(d, "T", path), f"{path}.T", lo=0.0, hi=1.0))

    @property
    def heralded(self) -> bool:
        return self.op in ("add", "subtract")


@dataclass(frozen=True)
class NoiseSpec:
    loss: ga.LossSpec | None = None
    thermal_nbar: float = 0.0
    thermal_eta: float = 1.0
    thermal_modes: tuple = (1, 2)
    has_thermal: bool = False

    @staticmethod
    def from_dict(d: dict, path: str) -> "NoiseSpec":
        _reject_unknown(d, {"loss", "thermal"}, path)
        loss = None
        if "loss" in d:
            ld = d["loss"]
            _reject_unknown(ld, {"L", "D"}, f"{path}.loss")
            loss = ga.LossSpec(L=_number(ld.get("L", 0.0), f"{path}.loss.L", 0.0, 1.0),
                               D=_number(ld.get("D", 1.0), f"{path}.loss.D", 0.0, 1.0))
        if "thermal" in d:
            td = d["thermal"]
            _reject_unknown(td, {"nbar_env", "eta", "modes"}, f"{path}.thermal")
            modes = tuple(td.get("modes", [1, 2]))
            if not modes or any(m not in (1, 2) for m in modes):
                raise ConfigError(f"{path}.thermal.modes", "modes must be a non-empty subset of [1, 2]")
            return NoiseSpec(loss=loss, has_thermal=True,
                             thermal_nbar=_number(_need(td, "nbar_env", f"{path}.thermal"),
                                                  f"{path}.thermal.nbar_env", lo=0.0),
                             thermal_eta=_number(_need(td, "eta", f"{path}.thermal"),
                                                 f"{path}.thermal.eta", 0.0, 1.0),
                             thermal_modes=modes)
        return NoiseSpec(loss=loss)

    @property
    def lossless(self) -> bool:
        return (self.loss is None or self.loss.total == 0.0) and (
            not self.has_thermal or self.thermal_eta == 1.0
        )


@dataclass(frozen=True)
class ScenarioConfig:
    inputs: tuple
    modifications: tuple
    phi: float
    noise: NoiseSpec
    detection: tuple
    metrics: tuple
    phi_grid: tuple | None = None
    raw: dict = field(compare=False, default_factory=dict)

    @staticmethod
    def from_dict(d: dict) -> "ScenarioConfig":
        _reject_unknown(d, {"inputs", "modifications", "interferometer", "noise", "detection", "metrics"}, "")
        raw_inputs = _need(d, "inputs", "")
        if not isinstance(raw_inputs, list) or len(raw_inputs) != 2:
            raise ConfigError("inputs", "exactly two input modes are required")
        inputs = tuple(InputSpec.from_dict(x, f"inputs.{i}") for i, x in enumerate(raw_inputs))

        mods = []
        for i, x in enumerate(d.get("modifications", [])):
            spec = ModificationSpec.from_dict(x, f"modifications.{i}")
            if (
                spec.op == "displace"
                and spec.stage == "input"
                and inputs[spec.mode - 1].kind == "vacuum"
                and not any(m.mode == spec.mode for m in mods)
            ):
                raise ConfigError(
                    f"modifications.{i}",
                    "displacing a bare vacuum input is redundant; use a coherent input instead",
                )
            mods.append(spec)

        inter = _need(d, "interferometer", "")
        _reject_unknown(inter, {"phi"}, "interferometer")
        raw_phi = _need(inter, "phi", "interferometer")
        phi_grid = None
        if isinstance(raw_phi, dict):
            _reject_unknown(raw_phi, {"start", "stop", "step"}, "interferometer.phi")
            start = _number(_need(raw_phi, "start", "interferometer.phi"), "interferometer.phi.start")
            stop = _number(_need(raw_phi, "stop", "interferometer.phi"), "interferometer.phi.stop")
            step = _number(_need(raw_phi, "step", "interferometer.phi"), "interferometer.phi.step")
            if step <= 0.0 or stop < start:
                raise ConfigError("interferometer.phi", "need stop >= start and step > 0")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            phi_grid = tuple(start + step * k for k in range(n))
            phi = phi_grid[0]
        else:
            phi = _number(raw_phi, "interferometer.phi")

        noise = NoiseSpec.from_dict(d.get("noise", {}), "noise")

        det = []
        for i, x in enumerate(d.get("detection", [])):
            p = f"detection.{i}"
            _reject_unknown(x, {"scheme", "mode", "mode_b", "angle"}, p)
            kind = _need(x, "scheme", p)
            try:
                det.append(
                    meas.DetectionScheme(
                        kind,
                        mode=int(x.get("mode", 1)),
                        mode_b=x.get("mode_b"),
                        angle=_number(x.get("angle", 0.0), f"{p}.angle"),
                    )
                )
            except ValueError as exc:
                raise ConfigError(p, str(exc)) from exc
        metrics = tuple(d.get("metrics", ["phase_variance"]))
        for i, m in enumerate(metrics):
            if m not in METRICS:
                raise ConfigError(f"metrics.{i}", f"unknown metric {m!r} (menu: {METRICS})")
        heralds = [m for m in (mods) if m.heralded]
        if len(heralds) > 1 and "cfi" in metrics:
            raise ConfigError("metrics", "cfi with more than one heralded modification is not supported")
        return ScenarioConfig(inputs, tuple(mods), phi, noise, tuple(det), metrics, phi_grid=phi_grid, raw=d)

    def with_values(self, **updates) -> "ScenarioConfig":
        d = json.loads(json.dumps(self.raw))
        for key, value in updates.items():
            _apply_sweep_value(d, key, value)
        return ScenarioConfig.from_dict(d)


def _apply_sweep_value(d: dict, parameter: str, value: float) -> None:
    """Rewrite the first matching site of a sweep parameter in a raw config dict."""
    if parameter == "phi":
        d["interferometer"]["phi"] = value
        return
    if parameter == "alpha2":
        for x in d["inputs"]:
            if x.get("kind") == "coherent":
                x["alpha"] = math.sqrt(value)
                return
        raise ConfigError("inputs", "sweep parameter alpha2 needs a coherent input")
    if parameter == "nbar":
        for x in d["inputs"]:
            if x.get("kind") == "thermal":
                x["nbar"] = value
                return
        raise ConfigError("inputs", "sweep parameter nbar needs a thermal input")
    if parameter == "r":
        for x in d.get("modifications", []):
            if x.get("op") == "squeeze":
                x["r"] = value
                return
        raise ConfigError("modifications", "sweep parameter r needs a squeeze modification")
    if parameter in ("T", "m"):
        for x in d.get("modifications", []):
            heralded = x.get("op") in ("add", "subtract")
            # SPDC additions have no beam-splitter transmissivity to sweep
            if heralded and not (parameter == "T" and x.get("mechanism") == "spdc"):
                x[parameter] = value if parameter == "T" else int(value)
                return
        raise ConfigError(
            "modifications", f"sweep parameter {parameter} needs a matching add/subtract modification"
        )
    if parameter in ("L", "D"):
        d.setdefault("noise", {}).setdefault("loss", {})[parameter] = value
        return
    if parameter == "nbar_env":
        noise = d.setdefault("noise", {})
        if "thermal" not in noise:
            noise["thermal"] = {"nbar_env": value, "eta": 0.5}
        else:
            noise["thermal"]["nbar_env"] = value
        return
    raise ConfigError("sweep", f"unknown sweep parameter {parameter!r} (menu: {SWEEP_PARAMETERS})")


def load_config(path: str) -> ScenarioConfig:
    """Load a config file: JSON, or a dotted key-tree (`a.b.0.c = value`, values in JSON syntax)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    else:
        data = _parse_key_tree(text)
    return ScenarioConfig.from_dict(data)


def _parse_key_tree(text: str) -> dict:
    root: dict = {}
    prefix: list[str] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            prefix = line[1:-1].strip().split(".")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected `key = value`, got {line!r}")
        key, _, raw = line.partition("=")
        segments = prefix + key.strip().split(".")
        try:
            value = json.loads(raw.strip())
        except json.JSONDecodeError:
            value = raw.strip()
        _set_path(root, segments, value, lineno)
    return root


def _set_path(node, segments: list[str], value, lineno: int) -> None:
    for i, seg in enumerate(segments):
        last = i == len(segments) - 1
        is_index = seg.lstrip("-").isdigit()
        if is_index:
            idx = int(seg)
            if not isinstance(node, list):
                raise ConfigError(f"line {lineno}", f"cannot index non-list with {seg!r}")
            while len(node) <= idx:
                node.append(None)
            if last:
                node[idx] = value
            else:
                if node[idx] is None:
                    node[idx] = [] if segments[i + 1].lstrip("-").isdigit() else {}
                node = node[idx]
        else:
            if not isinstance(node, dict):
                raise ConfigError(f"line {lineno}", f"cannot key into non-object with {seg!r}")
            if last:
                node[seg] = value
            else:
                if seg not in node or node[seg] is None:
                    node[seg] = [] if segments[i + 1].lstrip("-").isdigit() else {}
                node = node[seg]


# ---------------------------------------------------------------------------
# Pipeline construction.
# ---------------------------------------------------------------------------


@dataclass
class PipelineResult:
    """Success-branch state with herald bookkeeping."""

    state: Any  # GaussianState or WignerExpr
    success_prob: float = 1.0
    failure_state: Any = None
    failure_prob: float = 0.0
    herald_stage: str | None = None  # None, "input", or "output"
    gaussian_path: bool = True


def _gaussian_possible(config: ScenarioConfig) -> bool:
    if any(s.kind == "fock" for s in config.inputs):
        return False
    return not any(m.heralded for m in config.modifications)


def _apply_gaussian_mod(state: ga.GaussianState, mod: ModificationSpec) -> ga.GaussianState:
    if mod.op == "squeeze":
        f = sym.embed(sym.make_squeezer(mod.r, mod.theta), [mod.mode], state.modes)
    else:
        f = sym.embed(sym.make_displacement(mod.alpha, mod.theta), [mod.mode], state.modes)
    return ga.propagate(state, f)


def _apply_expr_mod(expr: wig.WignerExpr, mod: ModificationSpec) -> tuple:
    """Returns (success_expr, prob, failure_expr, failure_prob) for heralded ops,
    or (expr, 1.0, None, 0.0) for unitary ones."""
    if mod.op == "squeeze":
        f = sym.embed(sym.make_squeezer(mod.r, mod.theta), [mod.mode], expr.modes)
        return wig.apply_symplectic(expr, f), 1.0, None, 0.0
    if mod.op == "displace":
        f = sym.embed(sym.make_displacement(mod.alpha, mod.theta), [mod.mode], expr.modes)
        return wig.apply_symplectic(expr, f), 1.0, None, 0.0
    if mod.op == "add":
        if mod.mechanism == "bs":
            s, f = cond.add_photons_bs_branches(expr, mod.mode, mod.m, mod.T)
        else:
            s, f = cond.add_photon_spdc_branches(expr, mod.mode, mod.r, mod.theta, m=mod.m)
    elif mod.m == "click":
        s, f = cond.subtract_click_branches(expr, mod.mode, mod.T)
    else:
        s, f = cond.subtract_branches(expr, mod.mode, mod.m, mod.T)
    return s.state, s.probability, f.state, f.probability


def build_pipeline(config: ScenarioConfig, phi: float | None = None) -> PipelineResult:
    """Assemble inputs -> input mods -> MZI -> noise -> output mods for one phase value."""
    phi = config.phi if phi is None else phi
    mods_in = [m for m in config.modifications if m.stage == "input"]
    mods_out = [m for m in config.modifications if m.stage == "output"]

    if _gaussian_possible(config):
        state = ga.tensor([s.gaussian() for s in config.inputs])
        for m in mods_in:
            state = _apply_gaussian_mod(state, m)
        state = ga.propagate(state, sym.make_mzi(phi))
        state = _apply_noise_gaussian(state, config.noise)
        for m in mods_out:
            state = _apply_gaussian_mod(state, m)
        return PipelineResult(state=state, gaussian_path=True)

    expr = wig.tensor_exprs(config.inputs[0].expr(), config.inputs[1].expr())
    prob, fail, fail_prob, herald_stage = 1.0, None, 0.0, None

    def apply_mods(e, f, mods, stage):
        nonlocal prob, fail_prob, herald_stage
        for m in mods:
            if m.heralded:
                if herald_stage is not None:
                    e, p, _, _ = _apply_expr_mod(e, m)
                    prob *= p
                    f = None  # failure tracking only supports a single herald
                    fail_prob = 0.0
                else:
                    e, p, f, fp = _apply_expr_mod(e, m)
                    prob *= p
                    fail_prob = fp
                    herald_stage = stage
            else:
                e, _, _, _ = _apply_expr_mod(e, m)
                if f is not None:
                    f, _, _, _ = _apply_expr_mod(f, m)
        return e, f

    expr, fail = apply_mods(expr, fail, mods_in, "input")
    mzi = sym.make_mzi(phi)
    expr = wig.apply_symplectic(expr, mzi)
    if fail is not None:
        fail = wig.apply_symplectic(fail, mzi)
    expr = _apply_noise_expr(expr, config.noise)
    if fail is not None:
        fail = _apply_noise_expr(fail, config.noise)
    expr, fail = apply_mods(expr, fail, mods_out, "output")
    return PipelineResult(
        state=expr,
        success_prob=prob,
        failure_state=fail,
        failure_prob=fail_prob,
        herald_stage=herald_stage,
        gaussian_path=False,
    )


def _apply_noise_gaussian(state: ga.GaussianState, noise: NoiseSpec) -> ga.GaussianState:
    if noise.loss is not None and noise.loss.total > 0.0:
        state = ga.apply_loss(state, noise.loss)
    if noise.has_thermal:
        for m in noise.thermal_modes:
            state = ga.inject_thermal(state, m, noise.thermal_nbar, noise.thermal_eta)
    return state


def _apply_noise_expr(expr: wig.WignerExpr, noise: NoiseSpec) -> wig.WignerExpr:
    if noise.loss is not None and noise.loss.total > 0.0:
        eta = 1.0 - noise.loss.total
        for m in range(1, expr.modes + 1):
            expr = wig.attenuate(expr, m, eta, 0.0)
    if noise.has_thermal:
        for m in noise.thermal_modes:
            expr = wig.attenuate(expr, m, noise.thermal_eta, noise.thermal_nbar)
    return expr


# ---------------------------------------------------------------------------
# Metric evaluation.
# ---------------------------------------------------------------------------


def _moments_fn(config: ScenarioConfig, scheme: meas.DetectionScheme) -> Callable[[float], meas.MeasurementMoments]:
    def fn(phi: float) -> meas.MeasurementMoments:
        return meas.measure(build_pipeline(config, phi).state, scheme)

    return fn

_OPTIMUM_SEEDS = {
    "parity": math.pi,
    "homodyne": math.pi,
    "intensity_difference": math.pi / 2.0,
    "intensity": None,  # depends on source strength; found by scan
    "click": None,
}


def _optimal_phi(config: ScenarioConfig, scheme: meas.DetectionScheme) -> tuple[float, float]:
    """Seeded golden-section search of the phase-variance minimum over (0, 2 pi)."""
    mom = _moments_fn(config, scheme)

    def variance_at(phi: float) -> float:
        try:
            return est.phase_variance_error_prop(lambda p: mom(p).mean, lambda p: mom(p).variance, phi)
        except (SignalStationary, ImprobableBranch, ValueError):
            return float("inf")

    seeds = []
    seed = _OPTIMUM_SEEDS.get(scheme.kind)
    if seed is not None:
        seeds.append(seed)
    coarse = np.linspace(0.05, 2.0 * math.pi - 0.05, 25)
    seeds.extend(coarse[np.argsort([variance_at(p) for p in coarse])[:2]])
    best = (float("inf"), config.phi)
    for s in seeds:
        x, v = est.find_optimal_phase(variance_at, s, window=0.35)
        if v < best[0]:
            best = (v, x)
    return best[1], best[0]


def _click_cfi(config: ScenarioConfig, phi: float) -> float:
    """Total click-detection CFI over both output modes, honoring heralded branches."""
    herald = next((m for m in config.modifications if m.heralded), None)

    if herald is None:
        def branch(mode):
            return est.two_outcome(lambda p: meas.click_probability(build_pipeline(config, p).state, mode))

        return sum(est.cfi(branch(m), phi) for m in (1, 2))

    def result_at(p: float) -> PipelineResult:
        return build_pipeline(config, p)

    def succ_prob(p: float) -> float:
        return result_at(p).success_prob

    def mk(which: str, mode: int):
        def f(p: float) -> float:
            r = result_at(p)
            state = r.state if which == "success" else r.failure_state
            return meas.click_probability(state, mode)

        return f

    res = result_at(phi)
    succ_sets = [est.two_outcome(mk("success", m)) for m in (1, 2)]
    fail_sets = [est.two_outcome(mk("failure", m)) for m in (1, 2)] if res.failure_state is not None else None
    include_herald = res.herald_stage == "output"
    return est.probabilistic_cfi(succ_prob, succ_sets, fail_sets, phi, include_herald=include_herald)


def _qfi(config: ScenarioConfig, phi: float) -> tuple[float | None, str]:
    """QFI of the phi-family, choosing the route the state class allows."""
    if _gaussian_possible(config):
        fam = lambda p: build_pipeline(config, p).state
        if config.noise.lossless:
            return est.qfi_pure_gaussian(fam, phi), "pure_gaussian"
        return est.qfi_mixed_gaussian(fam, phi), "mixed_gaussian"
    if config.noise.lossless and not any(m.heralded for m in config.modifications):
        fam = lambda p: build_pipeline(config, p).state
        return est.qfi_pure_wigner(fam, phi), "pure_wigner"
    return None, "unavailable (mixed non-Gaussian)"


def _input_mean_photon(config: ScenarioConfig) -> float:
    """Total mean photon number entering the interferometer (post input-stage mods)."""
    probe = ScenarioConfig(
        config.inputs,
        tuple(m for m in config.modifications if m.stage == "input"),
        0.0,
        NoiseSpec(),
        (),
        ("snr",),
        raw=config.raw,
    )
    res = build_pipeline(probe, 0.0)
    if res.gaussian_path:
        return ga.total_mean_photon(res.state)
    return sum(meas.intensity(res.state, k).mean for k in range(1, res.state.modes + 1))


def evaluate_point(config: ScenarioConfig, phi: float | None = None, n_max: int = wig.DEFAULT_NMAX):
    """Compute the requested metrics at one parameter point.

    A herald whose success probability sits below the renormalization floor
    (transmissivity pinned at 1, say) yields a flagged row rather than a
    failure.
    """
    phi = config.phi if phi is None else phi
    report = est.EstimationReport(phi=phi)
    warnings: list[str] = []
    distributions: list[dict] = []
    try:
        res = build_pipeline(config, phi)
    except ImprobableBranch as exc:
        report.extras["flag"] = "improbable herald branch"
        warnings.append(f"phi={phi:.6g}: {exc}")
        return report, warnings, distributions
    if res.success_prob < 1.0:
        report.extras["herald_probability"] = res.success_prob

    ntot = _input_mean_photon(config)
    if ntot > 0.0:
        report.snl = est.snl(ntot)
        report.hl = est.hl(ntot)

    if "phase_variance" in config.metrics:
        for scheme in config.detection:
            mom = _moments_fn(config, scheme)
            try:
                report.phase_variance[scheme.label] = est.phase_variance_error_prop(
                    lambda p: mom(p).mean, lambda p: mom(p).variance, phi
                )
            except (SignalStationary, DegenerateBranch, ImprobableBranch) as exc:
                warnings.append(f"phase_variance[{scheme.label}] at phi={phi:.6g}: {exc}")
            opt_phi, opt_var = _optimal_phi(config, scheme)
            report.optimal_phi[scheme.label] = opt_phi
            report.extras[f"min_phase_variance.{scheme.label}"] = opt_var

    if "cfi" in config.metrics:
        try:
            report.cfi = _click_cfi(config, phi)
        except (DegenerateBranch, ImprobableBranch) as exc:
            warnings.append(f"cfi at phi={phi:.6g}: {exc}")

    if "qfi" in config.metrics:
        qfi, route = _qfi(config, phi)
        if qfi is None:
            warnings.append(f"qfi: {route}")
        else:
            report.qfi = qfi
            report.qcrb = 1.0 / qfi if qfi > 0.0 else float("inf")
            report.extras["qfi_route"] = route

    if "snr" in config.metrics:
        added = {m.mode: 0 for m in config.modifications}
        for m in config.modifications:
            if m.op == "add":
                added[m.mode] = added.get(m.mode, 0) + int(m.m)
        for mode in (1, 2):
            mom = meas.intensity(res.state, mode)
            try:
                report.snr[f"mode{mode}"] = est.snr(mom, subtract_injected=added.get(mode, 0))
            except ValueError as exc:
                warnings.append(f"snr mode {mode}: {exc}")

    if "distributions" in config.metrics:
        for mode in (1, 2):
            dist = wig.photon_number_distribution(
                res.state if isinstance(res.state, wig.WignerExpr) else wig.from_gaussian(res.state),
                mode,
                n_max,
            )
            for n, p in enumerate(dist.probs):
                distributions.append({"mode": mode, "n": n, "p": float(p)})
            report.extras[f"distribution_tail.mode{mode}"] = dist.tail

    return report, warnings, distributions


# ---------------------------------------------------------------------------
# Reports and emission.
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    config: dict
    rows: list
    parameter: str | None = None
    grid: list | None = None
    seed: int | None = None
    warnings: list = field(default_factory=list)
    distributions: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    version: str = __version__

    def as_dict(self) -> dict:
        out = {
            "config": self.config,
            "parameter": self.parameter,
            "grid": self.grid,
            "rows": self.rows,
            "seed": self.seed,
            "warnings": self.warnings,
            "version": self.version,
        }
        if self.distributions:
            out["distributions"] = self.distributions
        if self.traces:
            out["traces"] = self.traces
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def emit(report: RunReport, out_dir: str, formats: str = "both") -> list[str]:
    """Write report files; identical report objects produce byte-identical files."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if formats in ("json", "both"):
        path = os.path.join(out_dir, "report.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        written.append(path)
    if formats in ("csv", "both"):
        path = os.path.join(out_dir, "results.csv")
        cols: list[str] = []
        for row in report.rows:
            for k in row:
                if k not in cols:
                    cols.append(k)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for row in report.rows:
                fh.write(",".join(_fmt(row.get(c, "")) for c in cols) + "\n")
        written.append(path)
        if report.distributions:
            dpath = os.path.join(out_dir, "distributions.csv")
            with open(dpath, "w", encoding="utf-8") as fh:
                fh.write("grid_index,mode,n,p\n")
                for d in report.distributions:
                    fh.write(f"{d['grid_index']},{d['mode']},{d['n']},{_fmt(d['p'])}\n")
            written.append(dpath)
        if report.traces:
            tpath = os.path.join(out_dir, "traces.csv")
            cols = list(report.traces[0].keys())
            with open(tpath, "w", encoding="utf-8") as fh:
                fh.write(",".join(cols) + "\n")
                for row in report.traces:
                    fh.write(",".join(_fmt(row.get(c, "")) for c in cols) + "\n")
            written.append(tpath)
    return written


# ---------------------------------------------------------------------------
# Top-level operations.
# ---------------------------------------------------------------------------


def run(config: ScenarioConfig, seed: int | None = None, threads: int = 1) -> RunReport:
    """Evaluate the configured metrics at the configured phase (or phase grid)."""
    if config.phi_grid is not None:
        return sweep(config, "phi", list(config.phi_grid), seed=seed, threads=threads)
    report, warnings, dists = evaluate_point(config)
    row = report.as_dict()
    row["index"] = 0
    for d in dists:
        d["grid_index"] = 0
    return RunReport(config=config.raw, rows=[row], seed=seed, warnings=warnings, distributions=dists)


def sweep(config: ScenarioConfig, parameter: str, grid, seed: int | None = None, threads: int = 1) -> RunReport:
    """Evaluate the metrics across a parameter grid."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError("sweep", f"unknown sweep parameter {parameter!r} (menu: {SWEEP_PARAMETERS})")
    grid = [float(g) for g in grid]
    if not grid:
        raise ConfigError("sweep", "empty sweep grid")

    def one(idx_value):
        idx, value = idx_value
        cfg = config.with_values(**{parameter: value})
        report, warnings, dists = evaluate_point(cfg)
        row = report.as_dict()
        row["index"] = idx
        row[parameter] = value
        for d in dists:
            d["grid_index"] = idx
        return row, warnings, dists

    items = list(enumerate(grid))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]
    rows, warnings, dists = [], [], []
    for row, w, d in results:
        rows.append(row)
        warnings.extend(w)
        dists.extend(d)
    return RunReport(config=config.raw, rows=rows, parameter=parameter, grid=grid, seed=seed, warnings=warnings,
                     distributions=dists)


def phase_drift_study(
    config: ScenarioConfig,
    trials: int,
    seed: int,
    sigma: dict | None = None,
    distribution: str = "gaussian",
) -> RunReport:
    """Running average of the phase variance under a randomly drifting control phase.

    Each trial draws the control phase near the scheme's optimum (Gaussian with
    the per-scheme sigma, or uniformly within 20% of the optimum) and evaluates
    the phase variance there; the trace reports the running mean versus trial
    count.
    """
    if trials < 1:
        raise ConfigError("drift.trials", "need at least one trial")
    if distribution not in ("gaussian", "uniform20"):
        raise ConfigError("drift.distribution", "distribution must be 'gaussian' or 'uniform20'")
    sigma = dict(DRIFT_SIGMA_DEFAULTS, **(sigma or {}))
    traces = []
    warnings: list[str] = []
    rows = []
    for si, scheme in enumerate(config.detection):
        mom = _moments_fn(config, scheme)

        def variance_at(p: float) -> float:
            return est.phase_variance_error_prop(lambda q: mom(q).mean, lambda q: mom(q).variance, p)

        opt_phi, opt_var = _optimal_phi(config, scheme)
        sig = sigma.get(scheme.kind, sigma["default"])
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(si,)))
        total = 0.0
        for k in range(1, trials + 1):
            if distribution == "gaussian":
                phi_k = rng.normal(opt_phi, sig)
            else:
                phi_k = opt_phi * rng.uniform(0.8, 1.2)
            try:
                total += variance_at(phi_k)
            except (SignalStationary, DegenerateBranch):
                total += opt_var  # a flat draw carries no usable slope; score it at the optimum
                warnings.append(f"drift[{scheme.label}] trial {k}: stationary draw at phi={phi_k:.6g}")
            traces.append({"scheme": scheme.label, "trial": k, "running_mean": total / k})
        rows.append(
            {
                "index": si,
                "scheme": scheme.label,
                "optimal_phi": opt_phi,
                "optimal_variance": opt_var,
                "sigma": sig,
                "final_running_mean": total / trials,
            }
        )
    return RunReport(config=config.raw, rows=rows, seed=seed, warnings=warnings, traces=traces)


def simulate_counts(
    config: ScenarioConfig,
    trials: int,
    seed: int,
    t_grid=None,
    n_max: int = wig.DEFAULT_NMAX,
) -> RunReport:
    """Post-selected photon-counting experiment at fixed total trial budget.

    For each transmissivity grid point the herald keeps M ~ Binomial(trials,
    P_success) measurements; M photon-number samples are drawn from the
    heralded state's distribution and reduced to a sample mean and sample SNR,
    reported against the analytic values.  All schemes spend the same `trials`
    (equal experiment time); the substream for each grid point derives from
    (seed, index) so execution order cannot matter.
    """
    if trials < 1:
        raise ConfigError("counts.trials", "need at least one trial")
    herald = [m for m in config.modifications if m.heralded]
    if len(herald) != 1:
        raise ConfigError("modifications", "simulate_counts needs exactly one add/subtract modification")
    mod = herald[0]
    if mod.op == "add" and mod.mechanism == "spdc":
        raise ConfigError("modifications", "simulate_counts sweeps the BS transmissivity; use the bs mechanism")
    if t_grid is None:
        t_grid = np.arange(0.05, 1.0, 0.05)
    rows = []
    warnings: list[str] = []
    added = int(mod.m) if (mod.op == "add" and isinstance(mod.m, int)) else 0
    for idx, T in enumerate(float(t) for t in t_grid):
        cfg = config.with_values(T=T)
        res = build_pipeline(cfg)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))
        kept = int(rng.binomial(trials, min(max(res.success_prob, 0.0), 1.0)))
        theory = meas.intensity(res.state, mod.mode)
        row = {
            "index": idx,
            "T": T,
            "herald_probability": res.success_prob,
            "kept": kept,
            "theory_mean": theory.mean,
            "theory_snr": est.snr(theory, subtract_injected=added),
        }
        if kept == 0:
            row["flag"] = "no kept measurements"
            warnings.append(f"T={T:g}: herald kept zero of {trials} trials")
        else:
            dist = wig.photon_number_distribution(res.state, mod.mode, n_max)
            samples = dist.sample(rng, kept)
            mean = float(np.mean(samples))
            row["sample_mean"] = mean
            if kept > 1 and float(np.std(samples)) > 0.0:
                row["sample_snr"] = (mean - added) / float(np.std(samples, ddof=1))
        rows.append(row)
    return RunReport(config=config.raw, rows=rows, parameter="T", grid=[float(t) for t in t_grid], seed=seed,
                     warnings=warnings)
