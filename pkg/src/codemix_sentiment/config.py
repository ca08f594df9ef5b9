"""Run configuration: ``key = value`` text with one section per stage.

Example::

    [run]
    seed = 13
    deterministic = true

    [skipgram]
    dim = 100
    epochs = 10

    [cnn]
    epochs = 20

Command-line flags override file values; every command writes the resolved
configuration next to its outputs so a run can be repeated from it.
"""

import configparser
import dataclasses
import hashlib
import inspect
import io
from dataclasses import dataclass, field
from typing import Any, Dict

from .alignment import AlignmentConfig
from .classifiers import KINDS
from .embeddings.skipgram import SkipGramConfig

CONFIG_FILENAME = "config.ini"


def _defaults(obj) -> Dict[str, Any]:
    if dataclasses.is_dataclass(obj):
        return {f.name: f.default for f in dataclasses.fields(obj)}
    sig = inspect.signature(obj.__init__)
    return {name: p.default for name, p in sig.parameters.items()
            if name not in ("self", "embeddings")}


SECTION_DEFAULTS = {
    "run": {"seed": 0, "deterministic": True, "workers": 1, "max_len": 64},
    "skipgram": _defaults(SkipGramConfig),
    "alignment": _defaults(AlignmentConfig),
    **{kind: _defaults(cls) for kind, cls in KINDS.items()},
}


class ConfigError(ValueError):
    pass


def _coerce(value: str, default: Any, where: str) -> Any:
    text = value.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [x for x in text.replace(",", " ").split() if x]
            kind = type(default[0]) if default else float
            return tuple(kind(x) for x in items)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {value!r} as {type(default).__name__}") from None
    return text


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    sections: Dict[str, Dict[str, Any]] = field(
        default_factory=lambda: {k: dict(v) for k, v in SECTION_DEFAULTS.items()}
    )

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        cfg = cls()
        for section in parser.sections():
            if section not in SECTION_DEFAULTS:
                raise ConfigError(f"{source}: unknown section [{section}]")
            for key, value in parser.items(section):
                cfg.set(section, key, value, where=f"{source} [{section}] {key}")
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), str(path))

    def set(self, section: str, key: str, value: Any, where: str = None) -> None:
        defaults = SECTION_DEFAULTS.get(section)
        if defaults is None:
            raise ConfigError(f"unknown section [{section}]")
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        if isinstance(value, str):
            value = _coerce(value, defaults[key], where or f"[{section}] {key}")
        self.sections[section][key] = value

    def get(self, section: str, key: str) -> Any:
        return self.sections[section][key]

    def apply_globals(self, seed=None, deterministic=None, workers=None) -> None:
        run = self.sections["run"]
        if seed is not None:
            run["seed"] = seed
        if deterministic is not None:
            run["deterministic"] = deterministic
        if workers is not None:
            run["workers"] = workers
        if run["deterministic"]:
            run["workers"] = 1
        # the global seed drives every stage
        for section in ("skipgram", "alignment", *KINDS):
            self.sections[section]["seed"] = run["seed"]
        self.sections["skipgram"]["workers"] = run["workers"]
        for kind in ("cnn", "bilstm"):
            self.sections[kind]["max_len"] = run["max_len"]

    def skipgram(self) -> SkipGramConfig:
        return SkipGramConfig(**self.sections["skipgram"])

    def alignment(self) -> AlignmentConfig:
        return AlignmentConfig(**self.sections["alignment"])

    def classifier_params(self, kind: str) -> Dict[str, Any]:
        return dict(self.sections[kind])

    def to_text(self) -> str:
        out = io.StringIO()
        for section in SECTION_DEFAULTS:
            out.write(f"[{section}]\n")
            for key in sorted(self.sections[section]):
                out.write(f"{key} = {_render(self.sections[section][key])}\n")
            out.write("\n")
        return out.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:12]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())
