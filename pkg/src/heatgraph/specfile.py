"""The ``.hg`` graph specification format.

A line-oriented UTF-8 text format::

    # comments start with '#'
    [family]
    name = birth_death
    b = "r+1"
    m = "1"

Families: ``birth_death`` (b, m), ``line`` (b, m; mirrored integers),
``cycle`` (n, b, m), ``lattice`` (dims), ``tree`` (degree),
``explicit`` (with ``[vertices]`` lines ``v <id> <m>`` and ``[edges]``
lines ``e <id> <id> <b>``), ``product`` (with ``[product]`` keys
``factors`` -- comma-separated spec paths -- and ``weighting``) and
``cover`` (with ``[cover]`` keys ``constructor`` and its parameters).

Explicit edges are mirrored unless both directions are listed, so an
asymmetric weight can be written down on purpose (and is then reported by
validation).  Expressions are exprlang strings; quotes are optional.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

from heatgraph.exprlang import ParseError, parse

FAMILIES = ("birth_death", "line", "cycle", "lattice", "tree", "explicit", "product", "cover")
COVER_CONSTRUCTORS = ("cyclic", "line_over_cycle", "product", "converse")
_SECTIONS = ("family", "vertices", "edges", "product", "cover")
_EXPR_KEYS = ("b", "m")


class SpecError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip())


@dataclass
class GraphSpec:
    family: str
    params: dict[str, str] = field(default_factory=dict)
    vertices: list[tuple[int, float]] = field(default_factory=list)
    edges: list[tuple[int, int, float]] = field(default_factory=list)
    product: dict[str, str] = field(default_factory=dict)
    cover: dict[str, str] = field(default_factory=dict)
    base_dir: str = "."

    # -- text form -------------------------------------------------------------

    @classmethod
    def loads(cls, text: str, base_dir: str = ".", path: str | None = None) -> "GraphSpec":
        section = None
        data: dict[str, dict[str, str]] = {"family": {}, "product": {}, "cover": {}}
        verts, edges = [], []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.fullmatch(r"\[(\w+)\]", line)
            if m:
                section = m.group(1)
                if section not in _SECTIONS:
                    raise SpecError(f"unknown section [{section}]", lineno, path)
                continue
            if section is None:
                raise SpecError("content before the first section header", lineno, path)
            if section in ("vertices", "edges"):
                parts = line.split()
                try:
                    if section == "vertices" and parts[0] == "v" and len(parts) == 3:
                        verts.append((int(parts[1]), float(parts[2])))
                        continue
                    if section == "edges" and parts[0] == "e" and len(parts) == 4:
                        edges.append((int(parts[1]), int(parts[2]), float(parts[3])))
                        continue
                except ValueError:
                    pass
                form = "v <id> <m>" if section == "vertices" else "e <id> <id> <b>"
                raise SpecError(f"expected '{form}', got {line!r}", lineno, path)
            key, eq, value = line.partition("=")
            if not eq:
                raise SpecError(f"expected 'key = value', got {line!r}", lineno, path)
            key, value = key.strip(), value.strip()
            if len(value) >= 2 and value[0] == value[-1] == '"':
                value = value[1:-1]
            if key in data[section]:
                raise SpecError(f"duplicate key {key!r}", lineno, path)
            data[section][key] = value
        fam = data["family"].pop("name", None)
        if fam is None:
            raise SpecError("missing 'name' in [family]", None, path)
        if fam not in FAMILIES:
            raise SpecError(f"unknown family {fam!r} (expected one of {', '.join(FAMILIES)})", None, path)
        spec = cls(fam, data["family"], verts, edges, data["product"], data["cover"], base_dir)
        spec.check(path)
        return spec

    @classmethod
    def load(cls, path: str) -> "GraphSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read(), os.path.dirname(os.path.abspath(path)), path)

    def dumps(self) -> str:
        out = ["[family]", f"name = {self.family}"]
        for k, v in self.params.items():
            out.append(f'{k} = "{v}"' if k in _EXPR_KEYS else f"{k} = {v}")
        if self.vertices:
            out.append("[vertices]")
            out.extend(f"v {i} {m!r}" for i, m in self.vertices)
        if self.edges:
            out.append("[edges]")
            out.extend(f"e {i} {j} {b!r}" for i, j, b in self.edges)
        for name in ("product", "cover"):
            sec = getattr(self, name)
            if sec:
                out.append(f"[{name}]")
                for k, v in sec.items():
                    out.append(f'{k} = "{v}"' if k in _EXPR_KEYS else f"{k} = {v}")
        return "\n".join(out) + "\n"

    def __eq__(self, other) -> bool:
        if not isinstance(other, GraphSpec):
            return NotImplemented
        fields_ = ("family", "params", "vertices", "edges", "product", "cover")
        return all(getattr(self, f) == getattr(other, f) for f in fields_)

    def check(self, path: str | None = None) -> None:
        """Static checks: expressions parse, required keys exist."""
        for sec in (self.params, self.cover):
            for k in _EXPR_KEYS:
                if k in sec:
                    try:
                        parse(sec[k])
                    except ParseError as exc:
                        raise SpecError(f"bad expression for {k}: {exc}", None, path) from None
        need = {"cycle": ["n"], "lattice": ["dims"], "tree": ["degree"]}.get(self.family, [])
        for k in need:
            if k not in self.params:
                raise SpecError(f"family {self.family} needs '{k}'", None, path)
        if self.family == "explicit" and not self.vertices:
            raise SpecError("explicit family needs a [vertices] section", None, path)
        if self.family == "product" and "factors" not in self.product:
            raise SpecError("product family needs 'factors' in [product]", None, path)
        if self.family == "cover":
            c = self.cover.get("constructor")
            if c not in COVER_CONSTRUCTORS:
                raise SpecError(f"cover constructor must be one of {', '.join(COVER_CONSTRUCTORS)}", None, path)

    # -- construction -------------------------------------------------------------

    @property
    def is_cover(self) -> bool:
        return self.family == "cover"

    def _factor_specs(self, sec: dict) -> list["GraphSpec"]:
        paths = [p.strip() for p in sec["factors"].split(",") if p.strip()]
        if len(paths) < 2:
            raise SpecError("a product needs at least two factors")
        return [GraphSpec.load(os.path.join(self.base_dir, p)) for p in paths]

    def build(self):
        """The graph (or :class:`~heatgraph.covering.CoveringMap`) described by the spec."""
        from heatgraph import covering, graph

        p = self.params
        b, m = p.get("b", "1"), p.get("m", "1")
        if self.family == "birth_death":
            return graph.birth_death(b, m)
        if self.family == "line":
            return graph.line(b, m)
        if self.family == "cycle":
            return graph.cycle(int(p["n"]), b, m)
        if self.family == "lattice":
            return graph.lattice(int(p["dims"]))
        if self.family == "tree":
            return graph.regular_tree(int(p["degree"]))
        if self.family == "explicit":
            measure = {i: mm for i, mm in self.vertices}
            weights = {}
            for i, j, w in self.edges:
                weights[(i, j)] = w
            for i, j, w in self.edges:
                weights.setdefault((j, i), w)
            root = int(p.get("root", self.vertices[0][0]))
            return graph.FiniteGraph(measure, weights, root=root, name=p.get("label", "explicit"))
        if self.family == "product":
            factors = [s.build() for s in self._factor_specs(self.product)]
            return graph.product(*factors, weighting=self.product.get("weighting", "laplacian"))
        c = self.cover
        kind = c["constructor"]
        cb, cm = c.get("b"), c.get("m")
        if kind == "cyclic":
            return covering.cyclic_cover(int(c["n"]), int(c["k"]), cb, cm)
        if kind == "line_over_cycle":
            return covering.line_over_cycle(int(c["k"]), cb, cm)
        if kind == "converse":
            return covering.converse_example(c.get("m", "4^-r"))
        factors = [s.build() for s in self._factor_specs(c)]
        return covering.product_cover(*factors, weighting=c.get("weighting", "laplacian"))


def load_spec(path: str) -> GraphSpec:
    return GraphSpec.load(path)
