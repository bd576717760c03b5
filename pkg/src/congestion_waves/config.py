"""INI run configuration with strict keys.

Every section is optional; missing keys take the defaults below.  Unknown
sections or keys are rejected so that a typo in ``epsilon`` cannot silently
fall back to a default.

    [model]        epsilon gamma v_plus u_plus u_minus
    [grid]         xi_min xi_max n
    [perturbation] shape amplitude center width applies_to
                   w_amplitude w_center w_width smallness_margin
    [time]         dt t_end snapshot_stride
    [scheme]       boundary balanced corrector_sweeps
    [diagnostics]  c0 c1 c2 delta0 horizon
    [audit]        delta alpha k_max
    [sweep]        epsilons
    [outputs]      directory formats

``dt = auto`` selects the default step; ``smallness_margin``, when set,
rescales the perturbation so that the initial-data smallness sum equals
that fraction of ``delta0 * eps**3``.
"""

import configparser
from dataclasses import dataclass, field, fields
import re

from .errors import CongestionWavesError, ConfigParseError, ConfigValidationError
from .model import ModelParams
from .numerics import Grid
from .pde import PerturbationSpec, Scheme

__all__ = ["TimeConfig", "DiagnosticsConfig", "AuditConfig", "OutputConfig", "RunConfig", "parse_config",
           "config_from_string", "DEFAULT_EPSILONS"]

DEFAULT_EPSILONS = (0.4, 0.2, 0.1, 0.05)
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class TimeConfig:
    dt: float = None
    t_end: float = 50.0
    snapshot_stride: int = 1000

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ConfigValidationError(f"time.dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ConfigValidationError(f"time.t_end must be non-negative, got {self.t_end}")
        if self.snapshot_stride < 1:
            raise ConfigValidationError(f"time.snapshot_stride must be at least 1, got {self.snapshot_stride}")


@dataclass(frozen=True)
class DiagnosticsConfig:
    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    delta0: float = 0.01
    horizon: float = 0.0

    def __post_init__(self):
        for name in ("c0", "c1", "c2", "delta0"):
            if not getattr(self, name) > 0:
                raise ConfigValidationError(f"diagnostics.{name} must be positive, got {getattr(self, name)}")
        if not self.horizon >= 0:
            raise ConfigValidationError(f"diagnostics.horizon must be non-negative, got {self.horizon}")

    @property
    def c(self):
        return (self.c0, self.c1, self.c2)


@dataclass(frozen=True)
class AuditConfig:
    delta: float = 0.5
    alpha: float = 0.25
    k_max: int = 3

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigValidationError(f"audit.delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.alpha < 1:
            raise ConfigValidationError(f"audit.alpha must lie in (0, 1), got {self.alpha}")
        if self.k_max not in (1, 2, 3):
            raise ConfigValidationError(f"audit.k_max must be 1, 2 or 3, got {self.k_max}")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = FORMATS

    def __post_init__(self):
        bad = [f for f in self.formats if f not in FORMATS]
        if bad or not self.formats:
            raise ConfigValidationError(f"outputs.formats must be a non-empty subset of {FORMATS}, got {self.formats}")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of every subcommand."""

    model: ModelParams = field(default_factory=ModelParams)
    grid: Grid = field(default_factory=lambda: Grid(-10.0, 20.0, 6001))
    perturbation: PerturbationSpec = field(default_factory=lambda: PerturbationSpec(amplitude=1.0))
    smallness_margin: float = 0.5
    time: TimeConfig = field(default_factory=TimeConfig)
    scheme: Scheme = field(default_factory=Scheme)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    audit: AuditConfig = field(default_factory=AuditConfig)
    epsilons: tuple = DEFAULT_EPSILONS
    outputs: OutputConfig = field(default_factory=OutputConfig)


def _float(text):
    return float(text)


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional_float(text):
    return None if text.strip().lower() in ("auto", "none", "") else float(text)


def _float_list(text):
    return tuple(float(x) for x in re.split(r"[,\s]+", text.strip()) if x)


def _word_list(text):
    return tuple(x for x in re.split(r"[,\s]+", text.strip().lower()) if x)


SCHEMA = {
    "model": {k: _float for k in ("epsilon", "gamma", "v_plus", "u_plus", "u_minus")},
    "grid": {"xi_min": _float, "xi_max": _float, "n": _int},
    "perturbation": {
        "shape": str, "amplitude": _float, "center": _float, "width": _float, "applies_to": str,
        "w_amplitude": _optional_float, "w_center": _optional_float, "w_width": _optional_float,
        "smallness_margin": _optional_float,
    },
    "time": {"dt": _optional_float, "t_end": _float, "snapshot_stride": _int},
    "scheme": {"boundary": str, "balanced": _bool, "corrector_sweeps": _int},
    "diagnostics": {"c0": _float, "c1": _float, "c2": _float, "delta0": _float, "horizon": _float},
    "audit": {"delta": _float, "alpha": _float, "k_max": _int},
    "sweep": {"epsilons": _float_list},
    "outputs": {"directory": str, "formats": _word_list},
}


def _line_of(text, section, key=None):
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
        elif key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
            return no
    return None


def _read(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as err:
        raise ConfigParseError(f"line {err.lineno}: key outside any section") from err
    except configparser.ParsingError as err:
        lines = ", ".join(str(no) for no, _ in err.errors)
        raise ConfigParseError(f"malformed line(s) {lines}") from err
    except configparser.DuplicateSectionError as err:
        raise ConfigParseError(f"line {err.lineno}: duplicate section [{err.section}]") from err
    except configparser.DuplicateOptionError as err:
        raise ConfigParseError(f"line {err.lineno}: duplicate key {err.option!r} in [{err.section}]") from err
    except configparser.Error as err:
        raise ConfigParseError(str(err)) from err

    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigValidationError(f"line {_line_of(text, section)}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            where = f"line {_line_of(text, section, key)}"
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigValidationError(f"{where}: unknown key {key!r} in [{section}]")
            try:
                values[section][key] = conv(raw)
            except ValueError as err:
                raise ConfigParseError(f"{where}: cannot read {section}.{key} = {raw!r}: {err}") from err
    return values


def _build(values):
    base = RunConfig()

    def merged(section, default):
        given = values.get(section, {})
        current = {f.name: getattr(default, f.name) for f in fields(default)}
        current.update({k: v for k, v in given.items() if k in current})
        return current

    try:
        model = ModelParams(**merged("model", base.model))
        grid = Grid(**merged("grid", base.grid))
        pert_values = merged("perturbation", base.perturbation)
        perturbation = PerturbationSpec(**pert_values)
        margin = values.get("perturbation", {}).get("smallness_margin", base.smallness_margin)
        if margin is not None and not margin > 0:
            raise ConfigValidationError(f"perturbation.smallness_margin must be positive, got {margin}")
        time = TimeConfig(**merged("time", base.time))
        scheme = Scheme(**merged("scheme", base.scheme))
        diagnostics = DiagnosticsConfig(**merged("diagnostics", base.diagnostics))
        audit = AuditConfig(**merged("audit", base.audit))
        epsilons = values.get("sweep", {}).get("epsilons", base.epsilons)
        if not epsilons or any(not e > 0 for e in epsilons):
            raise ConfigValidationError(f"sweep.epsilons must be positive, got {epsilons}")
        outputs = OutputConfig(**merged("outputs", base.outputs))
    except ConfigValidationError:
        raise
    except CongestionWavesError as err:
        raise ConfigValidationError(str(err)) from err
    return RunConfig(model, grid, perturbation, margin, time, scheme, diagnostics, audit, tuple(epsilons),
                     outputs)


def config_from_string(text):
    """Parse and validate configuration text."""
    return _build(_read(text))


def parse_config(path):
    """Parse and validate the file at ``path``; ``"default"`` returns the built-in defaults."""
    if str(path) == "default":
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return config_from_string(text)
