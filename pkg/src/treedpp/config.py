"""Run configuration shared by the library entry points and the CLI.

Values are resolved in this order, later sources winning:

1. built-in defaults,
2. the file named by the ``TREEDPP_CONFIG`` environment variable,
3. the file passed with ``--config``,
4. explicit command-line flags.

Files are TOML with the sections ``[kernel]``, ``[domain]``, ``[tree]``,
``[quadrature]``, ``[sampling]``, ``[verify]`` and ``[output]``.  Unknown
sections or keys are rejected.
"""

from dataclasses import asdict, dataclass, field, fields
import os
import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .partition import parse_window

ENV_VAR = "TREEDPP_CONFIG"
KERNELS = ("sine", "airy", "bessel", "ginibre")
DEFAULT_WINDOWS = {"sine": "-2..2", "airy": "-2..2", "bessel": "0..4", "ginibre": "-2..2"}


@dataclass
class KernelSection:
    name: str = "sine"
    alpha: float = 1.0


@dataclass
class DomainSection:
    window: str = ""


@dataclass
class TreeSection:
    level: int = 3
    rank_max: int = 6


@dataclass
class QuadratureSection:
    order: int = 16
    tol: float = 1e-10


@dataclass
class SamplingSection:
    seed: int = 0
    n: int = 1000
    threads: int = 0


@dataclass
class VerifySection:
    cells: list = field(default_factory=list)
    multiplicities: list = field(default_factory=list)
    level_fine: int = 0
    tol: float = 0.0
    configs: int = 1000
    points: int = 100


@dataclass
class OutputSection:
    dir: str = "."


SECTIONS = {
    "kernel": KernelSection,
    "domain": DomainSection,
    "tree": TreeSection,
    "quadrature": QuadratureSection,
    "sampling": SamplingSection,
    "verify": VerifySection,
    "output": OutputSection,
}


@dataclass
class RunConfig:
    kernel: KernelSection = field(default_factory=KernelSection)
    domain: DomainSection = field(default_factory=DomainSection)
    tree: TreeSection = field(default_factory=TreeSection)
    quadrature: QuadratureSection = field(default_factory=QuadratureSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    verify: VerifySection = field(default_factory=VerifySection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def window(self):
        return parse_window(self.domain.window or DEFAULT_WINDOWS[self.kernel.name])

    @property
    def threads(self):
        from .rng import default_threads

        return self.sampling.threads or default_threads()

    def to_dict(self):
        return asdict(self)

    def provenance(self):
        """Config as embedded in artifacts: no thread count or output paths."""
        d = self.to_dict()
        d["sampling"].pop("threads")
        d.pop("output")
        d["domain"]["window"] = "{}..{}".format(*self.window)
        return d

    def validate(self):
        k = self.kernel
        if k.name not in KERNELS:
            raise ConfigError(f"kernel.name: unknown kernel {k.name!r} (choose from {', '.join(KERNELS)})")
        if k.name == "bessel" and not k.alpha >= 1:
            raise ConfigError(f"kernel.alpha: must be >= 1, got {k.alpha}")
        try:
            self.window
        except ValueError as exc:
            raise ConfigError(f"domain.window: {exc}") from exc
        checks = [
            ("tree.level", self.tree.level, 1),
            ("tree.rank_max", self.tree.rank_max, 1),
            ("quadrature.order", self.quadrature.order, 2),
            ("sampling.n", self.sampling.n, 1),
            ("sampling.threads", self.sampling.threads, 0),
            ("sampling.seed", self.sampling.seed, 0),
            ("verify.configs", self.verify.configs, 1),
            ("verify.points", self.verify.points, 1),
        ]
        for name, value, low in checks:
            if not isinstance(value, int) or isinstance(value, bool) or value < low:
                raise ConfigError(f"{name}: must be an integer >= {low}, got {value!r}")
        if not self.quadrature.tol > 0:
            raise ConfigError(f"quadrature.tol: must be > 0, got {self.quadrature.tol}")
        if self.verify.tol < 0:
            raise ConfigError(f"verify.tol: must be >= 0, got {self.verify.tol}")
        return self


def _line_of(text, section, key=None):
    """1-based line of a section header or of a key inside it (0 if not found)."""
    lines = text.splitlines()
    in_section = section is None
    for n, line in enumerate(lines, 1):
        s = line.strip()
        head = re.match(r"^\[([^\]]+)\]", s)
        if head:
            in_section = head.group(1).strip() == section
            if key is None and in_section:
                return n
            continue
        if key is not None and in_section and re.match(rf"^{re.escape(key)}\s*=", s):
            return n
    return 0


def _where(source, text, section, key=None):
    line = _line_of(text, section, key) if text else 0
    return f"{source}:{line}" if line else source


def _coerce(value, default, where, name):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{where}: {name} expects {type(default).__name__}, got {value!r}")
    return value


def apply_mapping(cfg, data, source="<mapping>", text=None):
    """Overlay a nested mapping (parsed TOML) onto ``cfg`` with validation."""
    for section, values in data.items():
        if section not in SECTIONS:
            raise ConfigError(f"{_where(source, text, section)}: unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"{source}: [{section}] must be a table")
        target = getattr(cfg, section)
        known = {f.name: f for f in fields(target)}
        for key, value in values.items():
            where = _where(source, text, section, key)
            if key not in known:
                raise ConfigError(f"{where}: unknown key {section}.{key} (allowed: {', '.join(known)})")
            default = getattr(target, key)
            setattr(target, key, _coerce(value, default, where, f"{section}.{key}"))
    return cfg


def load_file(cfg, path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    text = raw.decode("utf-8", errors="replace")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return apply_mapping(cfg, data, str(path), text)


def resolve(config_path=None, overrides=None, env=None):
    """Defaults < $TREEDPP_CONFIG < ``config_path`` < ``overrides``.

    ``overrides`` maps dotted names (``"tree.level"``) to values; ``None``
    values are skipped.
    """
    env = os.environ if env is None else env
    cfg = RunConfig()
    if env.get(ENV_VAR):
        load_file(cfg, env[ENV_VAR])
    if config_path:
        load_file(cfg, config_path)
    nested = {}
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, key = dotted.split(".")
        nested.setdefault(section, {})[key] = value
    apply_mapping(cfg, nested, "command line")
    return cfg.validate()
