"""Problem configuration: INI-style files, command-line overrides and experiment presets."""
import configparser
import io
import math
from dataclasses import asdict, dataclass, fields, replace

from . import qtensor as qt
from .errors import ConfigError

# section of every field in the INI representation
_SECTIONS = {
    "preset": "problem", "dim": "problem", "n_per_side": "problem",
    "dt": "time", "tf": "time",
    "a0": "bulk", "a2": "bulk", "a3": "bulk", "a4": "bulk", "b1": "bulk", "b2": "bulk",
    "eta_dw": "model", "eta_gamma": "model", "lambda_omega": "model",
    "beta_omega": "objective", "beta_gamma": "objective", "beta_tf": "objective",
    "alpha_omega": "objective", "alpha_gamma": "objective",
    "bound_gamma": "bounds", "bound_omega": "bounds",
    "max_iter": "optimizer", "rtol": "optimizer", "armijo_c": "optimizer",
    "backtrack": "optimizer", "sigma0": "optimizer", "max_halvings": "optimizer",
    "linear_solver": "solver", "newton_rtol": "solver",
    "out_dir": "output", "checkpoint": "output",
}


@dataclass(frozen=True)
class ProblemConfig:
    preset: int = 1
    dim: int = 2
    n_per_side: int = 32
    dt: float = 0.004
    tf: float = 0.4
    a0: float = qt.BULK_2D.a0
    a2: float = qt.BULK_2D.a2
    a3: float = qt.BULK_2D.a3
    a4: float = qt.BULK_2D.a4
    b1: float = 1.0
    b2: float = 2.0
    eta_dw: float = 0.2
    eta_gamma: float = 100.0
    lambda_omega: float = 0.0
    beta_omega: float = 1.0
    beta_gamma: float = 0.0
    beta_tf: float = 1.0
    alpha_omega: float = 0.0
    alpha_gamma: float = 0.01
    bound_gamma: float = 1.0
    bound_omega: float = math.inf
    max_iter: int = 50
    rtol: float = 1e-6
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    sigma0: float = 1.0
    max_halvings: int = 30
    linear_solver: str = "cg"
    newton_rtol: float = 1e-10
    out_dir: str = "out"
    checkpoint: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset}; choose from {sorted(PRESETS)}")
        need = 3 if self.preset == 3 else 2
        if self.dim != need:
            raise ConfigError(f"preset {self.preset} is a {need}D experiment, got dim={self.dim}")
        if self.n_per_side < 2:
            raise ConfigError("n_per_side must be at least 2")
        if self.dt <= 0 or self.tf <= 0:
            raise ConfigError("dt and tf must be positive")
        k = round(self.tf / self.dt)
        if k < 1 or abs(k * self.dt - self.tf) > 1e-12:
            raise ConfigError(f"dt={self.dt} does not divide tf={self.tf}")
        if self.eta_dw <= 0 or self.eta_gamma < 0 or self.lambda_omega < 0:
            raise ConfigError("need eta_dw > 0, eta_gamma >= 0, lambda_omega >= 0")
        weights = [self.beta_omega, self.beta_gamma, self.beta_tf, self.alpha_omega, self.alpha_gamma]
        if min(weights) < 0:
            raise ConfigError("objective weights must be non-negative")
        if max(self.beta_omega, self.beta_gamma, self.beta_tf) <= 0:
            raise ConfigError("at least one tracking weight must be positive")
        if self.alpha_gamma <= 0:
            raise ConfigError("the boundary control is optimized, so alpha_gamma must be positive")
        if self.bound_gamma <= 0 or self.bound_omega <= 0:
            raise ConfigError("control bounds must be positive")
        if self.max_iter < 0 or self.max_halvings < 0:
            raise ConfigError("iteration limits must be non-negative")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo_c < 1 or self.sigma0 <= 0:
            raise ConfigError("line search needs 0 < backtrack < 1, 0 < armijo_c < 1, sigma0 > 0")
        if self.linear_solver not in ("cg", "direct"):
            raise ConfigError("linear_solver must be 'cg' or 'direct'")
        try:
            self.bulk
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def bulk(self):
        return qt.BulkParams(self.a0, self.a2, self.a3, self.a4, self.b1, self.b2)

    @property
    def n_steps(self):
        return int(round(self.tf / self.dt))

    def with_overrides(self, **kw):
        """Copy with the non-None entries of ``kw`` replaced (validated)."""
        kw = {k: v for k, v in kw.items() if v is not None}
        unknown = set(kw) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return replace(self, **kw)

    # -- INI round trip ------------------------------------------------------
    def to_ini(self):
        cp = configparser.ConfigParser()
        for key, val in asdict(self).items():
            sec = _SECTIONS[key]
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, key, repr(val) if isinstance(val, float) else str(val))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text):
        """Parse INI text; keys not given fall back to the named preset."""
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed configuration: {exc}") from None
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for sec in cp.sections():
            for key, raw in cp.items(sec):
                if key not in _SECTIONS:
                    raise ConfigError(f"unknown key '{key}' in section [{sec}]")
                if _SECTIONS[key] != sec:
                    raise ConfigError(f"key '{key}' belongs in section [{_SECTIONS[key]}]")
                values[key] = _convert(key, raw, types[key])
        base = preset_config(values.pop("preset", 1), validate=False)
        return base.with_overrides(**values)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                return cls.from_ini(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read configuration: {exc}") from None


def _convert(key, raw, typ):
    raw = raw.strip()
    try:
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        if typ in (bool, "bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"invalid value for '{key}': {raw!r}") from None


def _bulk_fields(b):
    return dict(a0=b.a0, a2=b.a2, a3=b.a3, a4=b.a4, b1=b.b1, b2=b.b2)


PRESETS = {
    # one +1/2 point defect moved to (0.25, 0.35)
    1: dict(dim=2, n_per_side=32, dt=0.004, tf=0.4, bound_gamma=1.0, max_iter=50,
            **_bulk_fields(qt.BULK_2D)),
    # a +1/2 / -1/2 pair kept apart; tighter boundary bound
    2: dict(dim=2, n_per_side=32, dt=0.004, tf=0.4, bound_gamma=0.6, max_iter=50,
            **_bulk_fields(qt.BULK_2D)),
    # a +1/2 line defect bent into a cubic curve (reduced resolution)
    3: dict(dim=3, n_per_side=12, dt=0.006, tf=0.3, bound_gamma=1.0, max_iter=20,
            **_bulk_fields(qt.BULK_3D)),
}


def preset_config(preset, validate=True, **overrides):
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset}; choose from {sorted(PRESETS)}")
    cfg = object.__new__(ProblemConfig)
    vals = {f.name: f.default for f in fields(ProblemConfig)}
    vals.update(PRESETS[preset], preset=preset)
    if not validate:
        # a base for further overrides; validation happens on the final copy
        for k, v in vals.items():
            object.__setattr__(cfg, k, v)
        return cfg.with_overrides(**overrides) if overrides else cfg
    return ProblemConfig(**vals).with_overrides(**overrides)
