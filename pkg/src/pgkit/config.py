"""Run configuration files.

Grammar: one ``key = value`` pair per line.  ``#`` starts a comment, blank
lines are ignored, keys are case-sensitive, and a key may appear once.
List-valued keys (bench matrices only) take comma-separated values.

Keys::

    sampler       smc | pg | pgas | ipmcmc | blocked_pg | collapsed_pg
    N, M, T       positive integers (T is for simulation; runs take it from the data)
    seed          integer in [0, 2**64); overridden by $PGKIT_SEED
    model         benchmark | linear_gaussian
    a, c, m0, p0  linear_gaussian coefficients (required iff model = linear_gaussian)
    q, r          true / fixed noise variances (default 0.1 and 1.0)
    theta_mode    fixed | infer
    init_q, init_r  starting (Q, R) when theta_mode = infer (default 1, 1)
    alpha_q, beta_q, alpha_r, beta_r   inverse-gamma prior (default 0.01)
    R, P          node count and conditional count (required iff sampler = ipmcmc)
    block_len, overlap   block partition (required iff sampler = blocked_pg)
    resampling    multinomial | systematic
    save_states   true | false: write sampled paths into the trace CSV
    thin          keep every thin-th path
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .diagnostics import LinearGaussianModel
from .model import BenchmarkModel, LinearGaussianSsm, NoiseParams, SsmModel
from .samplers import InvGammaPrior

SAMPLERS = ("smc", "pg", "pgas", "ipmcmc", "blocked_pg", "collapsed_pg")
MODELS = ("benchmark", "linear_gaussian")
SAMPLER_KEYS = {"ipmcmc": ("R", "P"), "blocked_pg": ("block_len", "overlap")}
LG_KEYS = ("a", "c", "m0", "p0")
FIXED_ONLY = ("smc",)
INFER_ONLY = ("collapsed_pg",)
INFER_DEFAULT = ("pg", "pgas", "collapsed_pg")

KNOWN_KEYS = {
    "sampler", "N", "M", "T", "seed", "model", "q", "r", "theta_mode", "init_q", "init_r",
    "alpha_q", "beta_q", "alpha_r", "beta_r", "resampling", "save_states", "thin",
    *LG_KEYS, *(k for keys in SAMPLER_KEYS.values() for k in keys),
}
BENCH_LIST_KEYS = {"sampler", "M", "N"}


def default_theta_mode(sampler: str) -> str:
    return "infer" if sampler in INFER_DEFAULT else "fixed"


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def read_config(path) -> Dict[str, str]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror or err}") from None
    return parse_config_text(text, str(path))


def _int(values, key, default=None, minimum=1) -> Optional[int]:
    if key not in values:
        return default
    try:
        v = int(values[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {values[key]!r}") from None
    if v < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {v}")
    return v


def _float(values, key, default=None, positive=False) -> Optional[float]:
    if key not in values:
        return default
    try:
        v = float(values[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {values[key]!r}") from None
    if positive and not v > 0:
        raise ConfigError(f"{key} must be positive, got {v}")
    return v


def _choice(values, key, options, default):
    v = values.get(key, default)
    if v not in options:
        raise ConfigError(f"{key} must be one of {', '.join(options)}, got {v!r}")
    return v


def _bool(values, key, default=False) -> bool:
    if key not in values:
        return default
    v = values[key].lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key} must be true or false, got {values[key]!r}")


@dataclass
class RunConfig:
    sampler: str
    N: int
    M: int
    T: int
    seed: int
    model_name: str = "benchmark"
    lg: Optional[Dict[str, float]] = None
    q: float = 0.1
    r: float = 1.0
    theta_mode: str = "infer"
    init_q: float = 1.0
    init_r: float = 1.0
    prior: InvGammaPrior = field(default_factory=InvGammaPrior)
    R: Optional[int] = None
    P: Optional[int] = None
    block_len: Optional[int] = None
    overlap: Optional[int] = None
    resampling: str = "multinomial"
    save_states: bool = False
    thin: int = 1
    explicit_theta_mode: bool = True

    @property
    def true_params(self) -> NoiseParams:
        return NoiseParams(self.q, self.r)

    @property
    def init_params(self) -> NoiseParams:
        return NoiseParams(self.init_q, self.init_r)

    def model(self) -> SsmModel:
        if self.model_name == "benchmark":
            return BenchmarkModel()
        return LinearGaussianSsm(self.lg["a"], self.lg["c"], self.lg["m0"], self.lg["p0"])

    def linear_gaussian(self) -> LinearGaussianModel:
        if self.model_name != "linear_gaussian":
            raise ConfigError("the Kalman oracle needs model = linear_gaussian")
        return LinearGaussianModel(self.lg["a"], self.lg["c"], self.q, self.r, self.lg["m0"], self.lg["p0"])


def _seed(values) -> int:
    env = os.environ.get("PGKIT_SEED")
    raw = env if env not in (None, "") else values.get("seed", "0")
    where = "PGKIT_SEED" if env not in (None, "") else "seed"
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"{where} must be an integer, got {raw!r}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError(f"{where} must be in [0, 2**64), got {seed}")
    return seed


def _common(values: Dict[str, str], sampler: str, sampler_set) -> dict:
    unknown = sorted(set(values) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    for name, keys in SAMPLER_KEYS.items():
        for key in keys:
            if name in sampler_set and key not in values:
                raise ConfigError(f"sampler {name} requires key {key!r}")
            if name not in sampler_set and key in values:
                raise ConfigError(f"key {key!r} only applies to sampler {name}")
    model_name = _choice(values, "model", MODELS, "benchmark")
    lg = None
    if model_name == "linear_gaussian":
        missing = [k for k in LG_KEYS if k not in values]
        if missing:
            raise ConfigError(f"model linear_gaussian requires key(s) {', '.join(missing)}")
        lg = {k: _float(values, k) for k in LG_KEYS}
        if not lg["p0"] > 0:
            raise ConfigError("p0 must be positive")
    else:
        present = [k for k in LG_KEYS if k in values]
        if present:
            raise ConfigError(f"key(s) {', '.join(present)} only apply to model linear_gaussian")

    theta_mode = _choice(values, "theta_mode", ("fixed", "infer"), default_theta_mode(sampler))
    checked = sampler_set if "theta_mode" in values else ()
    for s in checked:
        if s in FIXED_ONLY and theta_mode != "fixed":
            raise ConfigError(f"sampler {s} needs theta_mode = fixed")
        if s in INFER_ONLY and theta_mode != "infer":
            raise ConfigError(f"sampler {s} integrates out theta and needs theta_mode = infer")
    try:
        prior = InvGammaPrior(*(_float(values, k, 0.01) for k in ("alpha_q", "beta_q", "alpha_r", "beta_r")))
    except ValueError as err:
        raise ConfigError(str(err)) from None
    out = dict(
        seed=_seed(values), model_name=model_name, lg=lg,
        q=_float(values, "q", 0.1, positive=True), r=_float(values, "r", 1.0, positive=True),
        theta_mode=theta_mode,
        init_q=_float(values, "init_q", 1.0, positive=True), init_r=_float(values, "init_r", 1.0, positive=True),
        prior=prior, resampling=_choice(values, "resampling", ("multinomial", "systematic"), "multinomial"),
        save_states=_bool(values, "save_states"), thin=_int(values, "thin", 1),
        T=_int(values, "T", 500),
    )
    if "ipmcmc" in sampler_set:
        out["R"], out["P"] = _int(values, "R"), _int(values, "P")
        if out["P"] > out["R"]:
            raise ConfigError(f"P must not exceed R, got P={out['P']}, R={out['R']}")
    if "blocked_pg" in sampler_set:
        out["block_len"], out["overlap"] = _int(values, "block_len", minimum=2), _int(values, "overlap", minimum=0)
        if not 2 * out["overlap"] < out["block_len"]:
            raise ConfigError("overlap must be less than block_len / 2")
    return out


def build_run_config(values: Dict[str, str], need_sampler: bool = True) -> RunConfig:
    """Validate a parsed config for ``simulate``, ``run`` or ``oracle``."""
    for key in ("sampler", "N", "M"):
        if key in values and "," in values[key]:
            raise ConfigError(f"{key} takes a single value here (lists are for bench)")
    if need_sampler and "sampler" not in values:
        raise ConfigError("missing required key 'sampler'")
    sampler = _choice(values, "sampler", SAMPLERS, "pg") if "sampler" in values else "pg"
    if need_sampler and "N" not in values:
        raise ConfigError("missing required key 'N'")
    if need_sampler and sampler != "smc" and "M" not in values:
        raise ConfigError("missing required key 'M'")
    common = _common(values, sampler, {sampler} if "sampler" in values else set())
    return RunConfig(sampler=sampler, N=_int(values, "N", 1), M=_int(values, "M", 1), **common)


@dataclass
class BenchConfig:
    samplers: List[str]
    Ms: List[int]
    Ns: List[int]
    base: RunConfig
    cells: List[tuple] = field(default_factory=list)


def _list(values, key) -> List[str]:
    if key not in values:
        return []
    items = [s.strip() for s in values[key].split(",")]
    if any(not s for s in items):
        raise ConfigError(f"{key}: empty list entry")
    return items


def build_bench_config(values: Dict[str, str]) -> BenchConfig:
    """A bench matrix: ``sampler``, ``M`` and ``N`` take comma-separated lists."""
    samplers = _list(values, "sampler")
    for s in samplers:
        if s not in SAMPLERS:
            raise ConfigError(f"sampler must be one of {', '.join(SAMPLERS)}, got {s!r}")
    Ms = [_int({"M": v}, "M") for v in _list(values, "M")]
    Ns = [_int({"N": v}, "N") for v in _list(values, "N")]
    if not samplers or not Ns or (not Ms and set(samplers) != {"smc"}):
        raise ConfigError("empty bench matrix: sampler, N and M need at least one value each")
    scalar = {k: v for k, v in values.items() if k not in BENCH_LIST_KEYS}
    common = _common(scalar, samplers[0], set(samplers))
    common["explicit_theta_mode"] = "theta_mode" in values
    base = RunConfig(sampler=samplers[0], N=Ns[0], M=Ms[0] if Ms else 1, **common)
    cells = [(s, m, n) for s in samplers for m in (Ms or [1]) for n in Ns]
    return BenchConfig(samplers, Ms, Ns, base, cells)
