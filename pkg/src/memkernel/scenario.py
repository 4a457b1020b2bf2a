"""Scenario configs (TOML) and the pipelines they drive.

A scenario names a ``kind``, a ``[grid]`` (``h`` and ``N`` or ``T``), the
kind-specific ``[params]`` and optional ``[tolerances]``, ``[certify]`` and
``[state]`` sections.  Matrices are tables ``{rows, cols, re, im}`` with
row-major entries; vectors are ``{re, im}``.
"""

from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .classical import gillespie_kernel, solve_classical, stochastic_vector
from .densities import WaitingDensity
from .errors import GainViolation, MemKernelError
from .forge import (KernelFamily, ScalarFamily, assemble_kernel, build_q_channel,
                    build_q_dephasing, hadamard_family)
from .grid import TimeGrid
from .io import matrix_from_dict
from .markov import GKSLSpec, build_gksl
from .propagate import MapTrajectory, renewal_solve, volterra_solve
from .reduction import (DecoherenceModel, TotalModel, decoherence_spectral, lift,
                        reduced_family, sqrt_gain_q, ww_limit_family)
from .superop import PAULI, check_density, depolarizing, identity_super, kraus_to_super
from .verify import DEFAULT_TOL, MOMENT_TOL, certify

KINDS = ("markov", "scalar_kernel", "dephasing_kernel", "hadamard_family", "classical",
         "reduction", "decoherence")
TOL_KEYS = {"cp": DEFAULT_TOL, "trace": DEFAULT_TOL, "moment": MOMENT_TOL, "gain": 1e-10,
            "prob": 1e-10}
GAIN_SAMPLES = 201


class ConfigError(MemKernelError):
    """Invalid or incomplete scenario configuration."""


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required field '{where}.{key}'")
    return section[key]


def _matrix(obj, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a matrix table {{rows, cols, re, im}}")
    try:
        return matrix_from_dict(obj, where)
    except MemKernelError as exc:
        raise ConfigError(str(exc)) from None


def _matrices(objs, where):
    if not isinstance(objs, list):
        raise ConfigError(f"{where}: expected a list of matrices")
    return [_matrix(m, f"{where}[{k}]") for k, m in enumerate(objs)]


def _vector(obj, where):
    if not isinstance(obj, dict) or "re" not in obj:
        raise ConfigError(f"{where}: expected a vector table {{re, im}}")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros(re.size)), dtype=float)
    if re.shape != im.shape:
        raise ConfigError(f"{where}: re and im lengths differ")
    return re + 1j * im


def _floats(obj, where):
    try:
        return np.atleast_1d(np.asarray(obj, dtype=float))
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a list of numbers") from None


@dataclass
class Scenario:
    kind: str
    grid: TimeGrid
    params: dict
    tolerances: dict
    stride: int = 1
    moments_s: list = field(default_factory=list)
    k_max: int = 3
    accept_tail: bool = False
    rho0: np.ndarray | None = None
    raw: dict = field(default_factory=dict)

    def tol(self, key):
        return self.tolerances[key]


def parse_tol_overrides(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in TOL_KEYS:
            raise ConfigError(f"--tol-override expects KEY=VAL with KEY in {sorted(TOL_KEYS)}, got '{item}'")
        try:
            out[key] = float(val)
        except ValueError:
            raise ConfigError(f"--tol-override {key}: '{val}' is not a number") from None
        if not out[key] > 0:
            raise ConfigError(f"--tol-override {key}: tolerance must be positive")
    return out


def parse_scenario(cfg: dict, tol_overrides=None, stride=None) -> Scenario:
    kind = _need(cfg, "kind", "scenario")
    if kind not in KINDS:
        raise ConfigError(f"scenario.kind: '{kind}' is not one of {', '.join(KINDS)}")
    if "grid" not in cfg:
        raise ConfigError("missing required section [grid]")
    g = cfg["grid"]
    h = _need(g, "h", "grid")
    if "N" in g:
        N = g["N"]
    elif "T" in g:
        N = int(round(float(g["T"]) / float(h)))
    else:
        raise ConfigError("missing required field 'grid.N' (or 'grid.T')")
    try:
        grid = TimeGrid(float(h), N)
    except MemKernelError as exc:
        raise ConfigError(f"grid: {exc}") from None
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("[params] must be a table")

    tols = dict(TOL_KEYS)
    for k, v in cfg.get("tolerances", {}).items():
        if k not in TOL_KEYS:
            raise ConfigError(f"tolerances.{k}: unknown key (expected one of {sorted(TOL_KEYS)})")
        tols[k] = float(v)
    tols.update(tol_overrides or {})

    cert = cfg.get("certify", {})
    st = int(stride if stride is not None else cert.get("stride", 1))
    if st < 1:
        raise ConfigError("certify.stride must be >= 1")
    rho0 = None
    if "state" in cfg:
        try:
            rho0 = check_density(_matrix(_need(cfg["state"], "rho0", "state"), "state.rho0"))
        except MemKernelError as exc:
            raise ConfigError(f"state.rho0: {exc}") from None
    return Scenario(kind, grid, params, tols, st,
                    [float(s) for s in cert.get("moments_s", [])],
                    int(cert.get("k_max", 3)), bool(cert.get("accept_tail", False)),
                    rho0, cfg)


# --- construction -----------------------------------------------------------

NAMED_CHANNELS = {
    "identity": lambda d: identity_super(d),
    "bit_flip": lambda d: kraus_to_super([PAULI["X"]]),
    "phase_flip": lambda d: kraus_to_super([PAULI["Z"]]),
    "depolarizing": lambda d: depolarizing(d),
}


def _channel(p, dim):
    if "kraus" in p:
        return kraus_to_super(_matrices(p["kraus"], "params.kraus"))
    name = _need(p, "channel", "params")
    if name not in NAMED_CHANNELS:
        raise ConfigError(f"params.channel: unknown channel '{name}'")
    if name in ("bit_flip", "phase_flip") and dim != 2:
        raise ConfigError(f"params.channel: '{name}' is defined for qubits only")
    return NAMED_CHANNELS[name](dim)


def _density(obj, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected {{amplitudes, rates}}")
    return WaitingDensity(_floats(_need(obj, "amplitudes", where), f"{where}.amplitudes"),
                          _floats(_need(obj, "rates", where), f"{where}.rates"))


@dataclass
class Built:
    """Constructed objects for one scenario."""

    kernel: KernelFamily | None = None
    N: object = None
    Q: object = None
    gain: object = None
    notes: list = field(default_factory=list)


def build(scn: Scenario, force_gain: bool = False) -> Built:
    """Construct the kernel (or the (N, Q) pair when no time-domain kernel exists)."""
    p = scn.params
    kind = scn.kind
    out = Built()
    if kind == "markov":
        H = _matrix(_need(p, "hamiltonian", "params"), "params.hamiltonian")
        ops = _matrices(p.get("noise", []), "params.noise")
        out.kernel = KernelFamily(build_gksl(GKSLSpec(H, ops)), meta={"family": "GKSL"})
    elif kind == "scalar_kernel":
        dim = int(p.get("dim", 2))
        dens = _density(_need(p, "density", "params"), "params.density")
        out.N = ScalarFamily(dens, dim)
        out.Q = build_q_channel(_channel(p, dim), out.N)
        out.kernel = assemble_kernel(out.N, out.Q)
    elif kind in ("dephasing_kernel", "hadamard_family", "decoherence"):
        if kind == "dephasing_kernel":
            out.N = ww_limit_family(_floats(_need(p, "eps", "params"), "params.eps"),
                                    _floats(_need(p, "kappa", "params"), "params.kappa"),
                                    _floats(_need(p, "gamma", "params"), "params.gamma")).family()
        elif kind == "hadamard_family":
            out.N = hadamard_family(_matrices(_need(p, "X", "params"), "params.X"),
                                    _matrix(_need(p, "omega", "params"), "params.omega"))
        else:
            model = DecoherenceModel(
                _floats(_need(p, "energies", "params"), "params.energies"),
                _matrix(_need(p, "H_R", "params"), "params.H_R"),
                tuple(_matrices(_need(p, "couplings", "params"), "params.couplings")),
                _vector(_need(p, "omega", "params"), "params.omega"))
            out.N = decoherence_spectral(model).family()
        _gain(scn, out, force_gain)
        if out.gain is not None and not out.gain.ok and not force_gain:
            return out
        states = _matrices(_need(p, "states", "params"), "params.states")
        check = scn.grid.times[:: max(1, scn.grid.N // 200)]
        out.Q = build_q_dephasing(out.N, states=states, times=check)
        out.kernel = assemble_kernel(out.N, out.Q, times=check)
    elif kind == "reduction":
        model = TotalModel(int(_need(p, "d_S", "params")), int(_need(p, "d_R", "params")),
                           _matrix(_need(p, "H_total", "params"), "params.H_total"),
                           _vector(_need(p, "omega", "params"), "params.omega"))
        out.N = reduced_family(model)
        _gain(scn, out, force_gain)
        if out.gain.ok or force_gain:
            out.Q = sqrt_gain_q(out.N)
            out.notes.append("kernel known only in the Laplace domain; "
                             "propagated by the renewal equation")
    else:
        raise ConfigError(f"kind '{kind}' has no quantum pipeline")
    return out


def kernel_notes(K: KernelFamily) -> list:
    if K.is_delta_only:
        return ["delta-only kernel: the dynamics is the semigroup exp(t * delta)"]
    return []


def _gain(scn, out, force):
    times = np.linspace(0.0, scn.grid.T, GAIN_SAMPLES)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GainViolation)
        _, rep = lift(out.N, times, tol=scn.tol("gain"))
    out.gain = rep
    if not rep.ok:
        msg = f"gain condition violated from t = {rep.first_violation:g}"
        out.notes.append(msg + ("; continuing (--force-gain)" if force else
                                "; kernel assembly skipped"))


def propagate(scn: Scenario, built: Built, kernel: KernelFamily | None = None) -> MapTrajectory:
    K = kernel if kernel is not None else built.kernel
    if K is not None:
        return volterra_solve(K, scn.grid)
    if built.Q is None:
        raise MemKernelError("nothing to propagate")
    return renewal_solve(built.N, built.Q, scn.grid)


def certify_scenario(scn: Scenario, traj: MapTrajectory):
    rep = certify(traj, tol=scn.tol("cp"), stride=scn.stride, s_list=scn.moments_s,
                  k_max=scn.k_max, moment_tol=scn.tol("moment"), accept_tail=scn.accept_tail)
    rep.tolerances["trace"] = scn.tol("trace")
    return rep


# --- classical --------------------------------------------------------------

def run_classical(scn: Scenario):
    """Returns ``(kernel, populations, report dict)``."""
    p = scn.params
    pi = _floats(_need(p, "pi", "params"), "params.pi")
    dens_cfg = _need(p, "densities", "params")
    if not isinstance(dens_cfg, list):
        raise ConfigError("params.densities: expected a list of {amplitudes, rates}")
    d = len(dens_cfg)
    if pi.size != d * d:
        raise ConfigError(f"params.pi: expected {d * d} row-major entries, got {pi.size}")
    dens = [_density(x, f"params.densities[{k}]") for k, x in enumerate(dens_cfg)]
    p0 = stochastic_vector(_floats(_need(p, "p0", "params"), "params.p0"))
    k = gillespie_kernel(pi.reshape(d, d), dens)
    P = solve_classical(k, p0, scn.grid)
    tol = scn.tol("prob")
    sum_def = float(np.max(np.abs(P.sum(axis=1) - 1)))
    report = {
        "tolerances": {"prob": tol},
        "min_prob": float(P.min()),
        "max_prob": float(P.max()),
        "sum_defect": sum_def,
        "kernel_column_sum_defect": k.column_sum_defect(),
        "verdict": "pass" if (P.min() >= -tol and P.max() <= 1 + tol and sum_def <= tol) else "fail",
    }
    return k, P, report
