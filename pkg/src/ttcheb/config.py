"""
Flat ``key = value`` run configuration.

Lines hold one assignment each; ``#`` starts a comment. Vector-valued keys
take comma-separated lists, and a single value is broadcast over all
dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from . import fft as _fft
from .errors import ConfigError
from .function_train import Basis
from .hamiltonian import HamiltonianSpec
from .models import GaussianParams
from .tensor_train import GridSpec

SCHEMES = ("chebyshev-clenshaw", "chebyshev-recurrence", "soft")
FORMATS = ("tt", "ft")

VECTOR_KEYS = ("x_min", "x_max", "n", "width", "x0", "p0", "beta", "slice_fixed")
LIST_KEYS = ("slice_dims", "slice_times", "n_list", "t_list", "dt_list")


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; see ``DEFAULT_TEXT`` for documentation."""

    model: str = "dna"
    alpha: float = 0.1
    beta: float = 0.0
    omega: float = 1.0
    dim: int = 2
    x_min: tuple = (-5.0,)
    x_max: tuple = (5.0,)
    n: tuple = (32,)
    degree: int = 32
    format: str = "tt"
    mass: float = 1.0
    width: tuple = (1.0,)
    x0: tuple = (1.0,)
    p0: tuple = (0.0,)
    scheme: str = "chebyshev-clenshaw"
    t_final: float = 1.0
    tau: float = 0.01
    n_poly: int = 50
    dt: float = 0.001
    round_tol: float = 1e-10
    rmax: int = 256
    auto_trim: bool = False
    output: str = "out"
    checkpoint_every: int = 10
    slice_dims: tuple = (0, 1)
    slice_times: tuple = ()
    slice_fixed: tuple = ()
    n_list: tuple = (50, 100, 150, 200, 250, 300, 350, 400, 450, 500)
    t_list: tuple = (1.0, 6.0)
    dt_list: tuple = (10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01)

    # derived objects ---------------------------------------------------

    @property
    def n_checkpoints(self) -> int:
        return int(round(self.t_final / self.tau))

    def grid(self) -> GridSpec:
        return GridSpec(self._vec(self.x_min), self._vec(self.x_max), self._vec(self.n))

    def bases(self) -> tuple[Basis, ...]:
        lo, hi = self._vec(self.x_min), self._vec(self.x_max)
        return tuple(Basis(a, b, self.degree) for a, b in zip(lo, hi))

    def hamiltonian(self) -> HamiltonianSpec:
        grid = self.grid() if self.format == "tt" else None
        bases = self.bases() if self.format == "ft" else None
        return HamiltonianSpec(self.mass, self.model, self.alpha, self.beta, self.omega, grid, bases)

    def gaussian(self) -> GaussianParams:
        w = self._vec(self.width)
        if len(set(w)) != 1:
            raise ConfigError("width", "a single Gaussian width is required")
        return GaussianParams(w[0], self._vec(self.x0), self._vec(self.p0))

    def fixed_coords(self) -> tuple[float, ...]:
        return self._vec(self.slice_fixed) if self.slice_fixed else self._vec(self.x0)

    def with_format(self, fmt: str) -> "RunConfig":
        return replace(self, format=fmt)

    def _vec(self, v):
        v = tuple(v)
        return v * self.dim if len(v) == 1 else v


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_scalar(key, raw, kind):
    try:
        if kind == "int":
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return raw
    except ValueError:
        raise ConfigError(key, f"cannot read {raw!r} as {kind}") from None


def _kind(key):
    default = getattr(RunConfig, key)
    if key in ("n", "slice_dims", "n_list"):
        return "int"
    if isinstance(default, bool):
        return "bool"
    if isinstance(default, int):
        return "int"
    if isinstance(default, (float, tuple)):
        return "float"
    return "str"


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text; errors name the offending key."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(key, "unknown key")
        if key in values:
            raise ConfigError(key, "given twice")
        kind = _kind(key)
        if key in VECTOR_KEYS or key in LIST_KEYS:
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if not items and key not in ("slice_times", "slice_fixed"):
                raise ConfigError(key, "empty list")
            values[key] = tuple(_parse_scalar(key, s, kind) for s in items)
        else:
            values[key] = _parse_scalar(key, raw, kind)
    if "beta" in values:
        betas = values["beta"]
        if len(set(betas)) != 1:
            raise ConfigError("beta", "only a uniform coupling is supported")
        values["beta"] = betas[0]
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def apply_overrides(text: str, overrides) -> str:
    """Replace or append ``key=value`` assignments in configuration text."""
    pairs = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        pairs.append((key, value))
    keys = {k for k, _ in pairs}
    kept = []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        if "=" in body and body.split("=", 1)[0].strip() in keys:
            continue
        kept.append(line)
    kept.extend(f"{k} = {v}" for k, v in pairs)
    return "\n".join(kept) + "\n"


def validate_config(cfg: RunConfig) -> None:
    if cfg.model not in ("dna", "harmonic"):
        raise ConfigError("model", f"unsupported model {cfg.model!r}")
    if cfg.format not in FORMATS:
        raise ConfigError("format", f"expected one of {FORMATS}")
    if cfg.scheme not in SCHEMES:
        raise ConfigError("scheme", f"expected one of {SCHEMES}")
    if cfg.scheme == "soft" and cfg.format != "tt":
        raise ConfigError("scheme", "the split-operator scheme needs format = tt")
    if cfg.dim < 1:
        raise ConfigError("dim", "must be at least 1")
    for key in VECTOR_KEYS:
        v = getattr(cfg, key)
        if key in ("beta",):
            continue
        if key == "slice_fixed" and not v:
            continue
        if len(v) not in (1, cfg.dim):
            raise ConfigError(key, f"has {len(v)} entries for dim = {cfg.dim}")
    positive = {"mass": cfg.mass, "tau": cfg.tau, "dt": cfg.dt, "omega": cfg.omega}
    if cfg.model == "dna":
        positive["alpha"] = cfg.alpha
    for key, v in positive.items():
        if not v > 0:
            raise ConfigError(key, "must be positive")
    if any(not w > 0 for w in cfg.width):
        raise ConfigError("width", "must be positive")
    for lo, hi in zip(cfg._vec(cfg.x_min), cfg._vec(cfg.x_max)):
        if not hi > lo:
            raise ConfigError("x_max", "must exceed x_min")
    for n in cfg.n:
        if n < 2 or not _fft.is_power_of_two(n):
            raise ConfigError("n", f"{n} is not a power of two >= 2")
    if cfg.degree < 1:
        raise ConfigError("degree", "must be positive")
    if cfg.t_final < 0:
        raise ConfigError("t_final", "must be non-negative")
    k = cfg.t_final / cfg.tau
    if abs(k - round(k)) * cfg.tau > 1e-12:
        raise ConfigError("tau", f"does not divide t_final = {cfg.t_final}")
    if cfg.scheme == "soft":
        s = cfg.tau / cfg.dt
        if abs(s - round(s)) * cfg.dt > 1e-12:
            raise ConfigError("dt", "does not divide tau")
    if cfg.n_poly < 1:
        raise ConfigError("n_poly", "must be at least 1")
    if not 0 <= cfg.round_tol < 1:
        raise ConfigError("round_tol", "must lie in [0, 1)")
    if cfg.rmax < 1:
        raise ConfigError("rmax", "must be positive")
    if cfg.checkpoint_every < 1:
        raise ConfigError("checkpoint_every", "must be positive")
    if len(cfg.slice_dims) != 2 or cfg.slice_dims[0] == cfg.slice_dims[1]:
        raise ConfigError("slice_dims", "need two distinct dimensions")
    if cfg.slice_times and max(cfg.slice_dims) >= cfg.dim:
        raise ConfigError("slice_dims", "dimension out of range")
    if any(n < 1 for n in cfg.n_list):
        raise ConfigError("n_list", "entries must be positive")
    if any(t < 0 for t in cfg.t_list):
        raise ConfigError("t_list", "entries must be non-negative")
    if any(not dt > 0 for dt in cfg.dt_list):
        raise ConfigError("dt_list", "entries must be positive")


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def format_config(cfg: RunConfig) -> str:
    """Configuration text that parses back to ``cfg``."""
    return "".join(f"{f.name} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(RunConfig))


DEFAULT_TEXT = """\
# model: dna (double well with nearest-neighbour coupling) or harmonic
model = dna
alpha = 0.1          # dna potential scale (au)
beta = 0.0           # dna coupling; the bilinear coefficient is alpha*beta
omega = 1.0          # harmonic frequency (au)
dim = 2              # number of dimensions D
x_min = -5.0         # grid or basis domain, per dimension or broadcast (au)
x_max = 5.0
n = 32               # grid points per dimension (power of two, tt format)
degree = 32          # Legendre basis size per dimension (ft format)
format = tt          # tt (grid) or ft (Legendre function train)
mass = 1.0           # particle mass (au)
width = 1.0          # initial Gaussian width w (au)
x0 = 1.0             # initial centres (au)
p0 = 0.0             # initial momenta (au)
scheme = chebyshev-clenshaw   # chebyshev-clenshaw, chebyshev-recurrence or soft
t_final = 1.0        # final time (au)
tau = 0.01           # checkpoint interval (au); each interval is one propagation
n_poly = 50          # Chebyshev terms per interval
dt = 0.001           # split-operator step (au), must divide tau
round_tol = 1e-10    # relative rounding tolerance
rmax = 256           # rank cap
auto_trim = false    # drop negligible Bessel terms
output = out         # output directory
checkpoint_every = 10    # write a state file every k checkpoints
slice_dims = 0, 1    # dimensions kept in density slices
slice_times =        # times at which slices are written (empty: none)
slice_fixed =        # coordinates of the other dimensions (empty: x0)
n_list = 50, 100, 150, 200, 250, 300, 350, 400, 450, 500   # converge: term counts
t_list = 1.0, 6.0    # converge: final times
dt_list = 10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01   # soft-compare: steps
"""


def default_config() -> RunConfig:
    return parse_config(DEFAULT_TEXT)
