"""YAML config documents that remember where each value came from.

Every scalar is addressable by a dotted path such as ``tx[2].consumption_mw``
so validation errors can name the field and the line it sits on.
"""
from __future__ import annotations

from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    pass


def _walk(node, path, marks, raw):
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            sub = f"{path}.{k.value}" if path else str(k.value)
            _walk(v, sub, marks, raw)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _walk(v, f"{path}[{i}]", marks, raw)
    else:
        raw[path] = node.value


class Document:
    def __init__(self, text: str, source: str = "<string>"):
        self.source = source
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{source}:{mark.line + 1}" if mark else source
            raise ConfigError(f"{where}: malformed YAML: {getattr(exc, 'problem', exc)}") from exc
        self.lines: dict[str, int] = {}
        self.raw: dict[str, str] = {}
        if root is not None:
            _walk(root, "", self.lines, self.raw)
        if self.data is None:
            self.data = {}

    @classmethod
    def load(cls, path) -> "Document":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read: {exc.strerror}") from exc
        return cls(text, str(path))

    def where(self, key: str) -> str:
        line = self.lines.get(key)
        return f"{self.source}:{line}" if line else self.source

    def error(self, key: str, msg: str) -> ConfigError:
        return ConfigError(f"{self.where(key)}: field '{key}': {msg}")

    def get(self, key: str, default: Any = ...) -> Any:
        cur = self.data
        for part in _split(key):
            try:
                cur = cur[part]
            except (KeyError, IndexError, TypeError):
                if default is ...:
                    raise self.error(key, "missing") from None
                return default
        return cur

    def number(self, key: str, default: Any = ...) -> Fraction:
        """The field as an exact rational, parsed from its source text."""
        value = self.get(key, default)
        if value is default and default is not ...:
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(key, f"expected a number, got {self.raw.get(key, value)!r}")
        return Fraction(self.raw.get(key, repr(value)).replace("_", ""))

    def text(self, key: str) -> str:
        """The scalar exactly as written in the file."""
        self.get(key)
        return self.raw[key]


def _split(key: str):
    for part in key.split("."):
        while "[" in part:
            head, _, rest = part.partition("[")
            if head:
                yield head
            idx, _, part = rest.partition("]")
            yield int(idx)
        if part:
            yield part


def data_path(name: str) -> Path:
    return Path(str(resources.files("wakesim") / "data" / name))


def load_data(name: str) -> Document:
    return Document.load(data_path(name))
