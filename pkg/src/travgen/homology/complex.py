"""Finite regular cell complexes with stratum tags and filtration depth.

Cells carry signed boundary incidences, a stratum tag (a pattern string or
any label), an integer depth, an optional ordered vertex tuple (needed for
cup/cap formulas on simplicial complexes) and a flag marking cells of the
manifold boundary.  Subcomplexes are frozensets of cell ids.
"""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field

from .snf import matmul


class ComplexError(ValueError):
    """Malformed complex; ``diagnostics`` lists one message per problem."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics[:5]) +
                         (f" (+{len(self.diagnostics) - 5} more)" if len(self.diagnostics) > 5 else ""))


@dataclass
class Cell:
    id: str
    dim: int
    boundary: list[tuple[str, int]] = field(default_factory=list)
    stratum: str | None = None
    depth: int = 0
    vertices: tuple | None = None
    on_boundary: bool = False


class StratifiedCellComplex:
    def __init__(self, cells, name: str = "", validate: bool = True):
        self.name = name
        self.cells: dict[str, Cell] = {}
        for c in cells:
            if c.id in self.cells:
                raise ComplexError([f"duplicate cell id {c.id!r}"])
            self.cells[c.id] = c
        self._by_dim: dict[int, list[str]] = {}
        for c in self.cells.values():
            self._by_dim.setdefault(c.dim, []).append(c.id)
        self._vertex_index = None
        if validate:
            self.validate()

    # ---------------------------------------------------------------- basics

    def __len__(self):
        return len(self.cells)

    def __contains__(self, cid):
        return cid in self.cells

    @property
    def dim(self) -> int:
        return max(self._by_dim, default=-1)

    @property
    def all_ids(self) -> frozenset:
        return frozenset(self.cells)

    def ids(self, q: int, within=None) -> list[str]:
        ids = self._by_dim.get(q, [])
        return ids if within is None else [c for c in ids if c in within]

    def count(self, q: int) -> int:
        return len(self._by_dim.get(q, []))

    def euler_characteristic(self, within=None) -> int:
        return sum((-1) ** q * len(self.ids(q, within)) for q in self._by_dim)

    def faces(self, cid) -> list[str]:
        return [f for f, _ in self.cells[cid].boundary]

    def closure(self, ids) -> frozenset:
        out = set()
        stack = list(ids)
        while stack:
            c = stack.pop()
            if c in out:
                continue
            out.add(c)
            stack.extend(self.faces(c))
        return frozenset(out)

    def is_subcomplex(self, ids) -> bool:
        s = set(ids)
        return all(c in self.cells for c in s) and all(f in s for c in s for f in self.faces(c))

    def require_subcomplex(self, ids, label="subset"):
        missing = [c for c in ids if c not in self.cells]
        if missing:
            raise ComplexError([f"{label}: unknown cell {m!r}" for m in missing[:5]])
        open_faces = sorted({f for c in ids for f in self.faces(c) if f not in ids})
        if open_faces:
            raise ComplexError([f"{label} is not a subcomplex: face {f!r} missing" for f in open_faces[:5]])
        return frozenset(ids)

    def depth_at_least(self, d: int) -> frozenset:
        return frozenset(c for c, cell in self.cells.items() if cell.depth >= d)

    @property
    def boundary_cells(self) -> frozenset:
        return frozenset(c for c, cell in self.cells.items() if cell.on_boundary)

    def boundary_matrix(self, q: int, rows=None, cols=None) -> list[list[int]]:
        """Matrix of the q-th boundary map restricted to the given cell lists."""
        rows = self.ids(q - 1) if rows is None else rows
        cols = self.ids(q) if cols is None else cols
        ri = {c: i for i, c in enumerate(rows)}
        M = [[0] * len(cols) for _ in rows]
        for j, c in enumerate(cols):
            for f, s in self.cells[c].boundary:
                i = ri.get(f)
                if i is not None:
                    M[i][j] += s
        return M

    # ---------------------------------------------------------------- validation

    def validate(self):
        diag = []
        for c in self.cells.values():
            if not isinstance(c.dim, int) or c.dim < 0:
                diag.append(f"cell {c.id!r}: dimension must be a non-negative integer")
                continue
            if not isinstance(c.depth, int) or c.depth < 0:
                diag.append(f"cell {c.id!r}: depth must be a non-negative integer")
            for f, s in c.boundary:
                if f not in self.cells:
                    diag.append(f"cell {c.id!r}: boundary refers to unknown cell {f!r}")
                elif self.cells[f].dim != c.dim - 1:
                    diag.append(f"cell {c.id!r}: face {f!r} has dimension {self.cells[f].dim}, "
                                f"expected {c.dim - 1}")
                if s not in (-1, 1) and not (isinstance(s, int) and s != 0):
                    diag.append(f"cell {c.id!r}: incidence with {f!r} must be a nonzero integer")
            if c.dim == 0 and c.boundary:
                diag.append(f"cell {c.id!r}: a vertex cannot have boundary cells")
            if c.dim > 0 and not c.boundary:
                diag.append(f"cell {c.id!r}: a {c.dim}-cell needs boundary cells")
        if diag:
            raise ComplexError(diag)
        for q in range(1, self.dim):
            P = matmul(self.boundary_matrix(q), self.boundary_matrix(q + 1))
            bad = [(i, j) for i, row in enumerate(P) for j, v in enumerate(row) if v]
            if bad:
                i, j = bad[0]
                raise ComplexError([f"boundary of boundary nonzero: cell {self.ids(q + 1)[j]!r} "
                                    f"hits {self.ids(q - 1)[i]!r} with coefficient {P[i][j]}"])
        # depth must be upper-semicontinuous so that each depth >= d set is closed
        for c in self.cells.values():
            for f in self.faces(c.id):
                if self.cells[f].depth < c.depth:
                    diag.append(f"cell {c.id!r} (depth {c.depth}) has face {f!r} of smaller depth "
                                f"{self.cells[f].depth}")
                if c.on_boundary and not self.cells[f].on_boundary:
                    diag.append(f"boundary cell {c.id!r} has face {f!r} not marked boundary")
        if diag:
            raise ComplexError(diag)

    @property
    def is_simplicial(self) -> bool:
        """Every cell has ordered vertices and the standard alternating boundary."""
        if not self.cells or any(c.vertices is None for c in self.cells.values()):
            return False
        index = self.vertex_index()
        for c in self.cells.values():
            if c.dim == 0:
                continue
            want = {}
            for i in range(c.dim + 1):
                face = c.vertices[:i] + c.vertices[i + 1:]
                fid = index.get(face)
                if fid is None:
                    return False
                want[fid] = (-1) ** i
            if len(c.vertices) != c.dim + 1 or dict(c.boundary) != want or len(c.boundary) != len(want):
                return False
        return True

    def vertex_index(self) -> dict:
        if self._vertex_index is None:
            self._vertex_index = {c.vertices: c.id for c in self.cells.values() if c.vertices is not None}
        return self._vertex_index

    # ---------------------------------------------------------------- constructors

    @classmethod
    def from_simplices(cls, simplices, stratum=None, depth=None, boundary_vertices=None,
                       name: str = "") -> "StratifiedCellComplex":
        """Simplicial complex from its maximal simplices.

        Vertex tuples are sorted, so faces inherit a consistent order.
        ``stratum``/``depth`` are callables on the vertex tuple (or None);
        ``boundary_vertices`` marks the boundary as the full subcomplex on
        the listed vertices restricted to faces of codimension-one
        simplices lying in exactly one top simplex.
        """
        all_s = set()
        for s in simplices:
            s = tuple(sorted(s))
            for k in range(1, len(s) + 1):
                all_s.update(itertools.combinations(s, k))
        ordered = sorted(all_s, key=lambda t: (len(t), [str(v) for v in t]))
        ids = {s: _simplex_id(s) for s in ordered}
        bnd = set()
        if boundary_vertices is not None:
            top = max(len(s) for s in ordered)
            count: dict = {}
            for s in ordered:
                if len(s) == top:
                    for i in range(top):
                        f = s[:i] + s[i + 1:]
                        count[f] = count.get(f, 0) + 1
            bv = set(boundary_vertices)
            for f, k in count.items():
                if k == 1 and set(f) <= bv:
                    for r in range(1, len(f) + 1):
                        bnd.update(itertools.combinations(f, r))
        cells = []
        for s in ordered:
            b = [(ids[s[:i] + s[i + 1:]], (-1) ** i) for i in range(len(s))] if len(s) > 1 else []
            cells.append(Cell(ids[s], len(s) - 1, b,
                              stratum(s) if stratum else None,
                              depth(s) if depth else 0, s, s in bnd))
        return cls(cells, name=name)

    def with_tags(self, stratum=None, depth=None, on_boundary=None) -> "StratifiedCellComplex":
        """Copy with tags recomputed from callables on the Cell."""
        cells = []
        for c in self.cells.values():
            cells.append(Cell(c.id, c.dim, list(c.boundary),
                              stratum(c) if stratum else c.stratum,
                              depth(c) if depth else c.depth, c.vertices,
                              on_boundary(c) if on_boundary else c.on_boundary))
        return StratifiedCellComplex(cells, name=self.name)

    def product(self, other: "StratifiedCellComplex", name: str = "") -> "StratifiedCellComplex":
        """Cartesian product cell complex; depths add, tags join with 'x'."""
        cells = []
        for a, b in itertools.product(self.cells.values(), other.cells.values()):
            bd = [(f"{fa}*{b.id}", s) for fa, s in a.boundary]
            bd += [(f"{a.id}*{fb}", (-1) ** a.dim * s) for fb, s in b.boundary]
            tag = None if a.stratum is None and b.stratum is None else f"{a.stratum}x{b.stratum}"
            cells.append(Cell(f"{a.id}*{b.id}", a.dim + b.dim, bd, tag, a.depth + b.depth, None,
                              a.on_boundary or b.on_boundary))
        return StratifiedCellComplex(cells, name=name or f"{self.name}x{other.name}")

    def double(self, sub=None, name: str = ""):
        """Two copies glued along ``sub`` (default: the boundary cells).

        Returns (doubled complex, involution) where the involution maps
        cell ids of the double to cell ids and fixes the glued cells.
        Interior tags get the copy index appended (``w|0``, ``w|1``);
        glued cells keep their tag.
        """
        sub = self.boundary_cells if sub is None else self.require_subcomplex(frozenset(sub), "gluing set")
        def cid(c, k):
            return c if c in sub else f"{c}|{k}"

        def vert(v, k, glued_vertices):
            return v if v in glued_vertices else (v, k)

        glued_vertices = {c.vertices[0] for c in self.cells.values()
                          if c.dim == 0 and c.id in sub and c.vertices is not None}
        cells = []
        inv = {}
        for k in (0, 1):
            for c in self.cells.values():
                if c.id in sub and k == 1:
                    continue
                new = cid(c.id, k)
                verts = None if c.vertices is None else tuple(vert(v, k, glued_vertices) for v in c.vertices)
                tag = c.stratum if c.id in sub or c.stratum is None else f"{c.stratum}|{k}"
                cells.append(Cell(new, c.dim, [(cid(f, k), s) for f, s in c.boundary], tag,
                                  c.depth, verts, False))
                inv[new] = cid(c.id, 1 - k)
        dbl = StratifiedCellComplex(cells, name=name or f"D({self.name})")
        return dbl, inv

    # ---------------------------------------------------------------- strata

    def stratum_components(self, depth: int, cells=None) -> list[tuple[str, list[str]]]:
        """Connected components of the open strata of the given depth.

        Two cells of that depth with the same tag are connected when one is
        a face of the other.  Returns [(tag, sorted cell ids)] in a
        deterministic order.
        """
        pool = [c for c in self.cells.values() if c.depth == depth and (cells is None or c.id in cells)]
        parent = {c.id: c.id for c in pool}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for c in pool:
            for f in self.faces(c.id):
                if f in parent and self.cells[f].stratum == c.stratum:
                    a, b = find(c.id), find(f)
                    if a != b:
                        parent[max(a, b)] = min(a, b)
        groups: dict[str, list[str]] = {}
        for c in pool:
            groups.setdefault(find(c.id), []).append(c.id)
        out = [(self.cells[r].stratum, sorted(m)) for r, m in groups.items()]
        out.sort(key=lambda t: (str(t[0]), t[1]))
        return out

    # ---------------------------------------------------------------- io

    def to_json(self) -> dict:
        cells = []
        for c in self.cells.values():
            d = {"id": c.id, "dim": c.dim, "boundary": [[f, s] for f, s in c.boundary],
                 "stratum": c.stratum, "depth": c.depth}
            if c.vertices is not None:
                d["vertices"] = [_jsonable(v) for v in c.vertices]
            if c.on_boundary:
                d["on_boundary"] = True
            cells.append(d)
        return {"format": "travgen-complex", "version": 1, "name": self.name, "cells": cells}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, data: dict, text: str | None = None) -> "StratifiedCellComplex":
        diag = []
        if not isinstance(data, dict) or not isinstance(data.get("cells"), list):
            raise ComplexError(["top level must be an object with a 'cells' list"])
        cells = []
        for k, d in enumerate(data["cells"]):
            where = _locate(text, d.get("id") if isinstance(d, dict) else None, k)
            if not isinstance(d, dict):
                diag.append(f"{where}: cell entry must be an object")
                continue
            unknown = set(d) - {"id", "dim", "boundary", "stratum", "depth", "vertices", "on_boundary"}
            if unknown:
                diag.append(f"{where}: unknown keys {sorted(unknown)}")
            if "id" not in d or "dim" not in d:
                diag.append(f"{where}: 'id' and 'dim' are required")
                continue
            bd = d.get("boundary", [])
            if not isinstance(bd, list) or any(not (isinstance(e, list) and len(e) == 2) for e in bd):
                diag.append(f"{where}: boundary must be a list of [id, sign] pairs")
                continue
            if not isinstance(d["dim"], int) or isinstance(d["dim"], bool):
                diag.append(f"{where}: dim must be an integer")
                continue
            depth = d.get("depth", 0)
            if not isinstance(depth, int) or isinstance(depth, bool) or depth < 0:
                diag.append(f"{where}: depth must be a non-negative integer")
                continue
            if any(not isinstance(s, int) or isinstance(s, bool) or s == 0 for _, s in bd):
                diag.append(f"{where}: incidence signs must be nonzero integers")
                continue
            verts = d.get("vertices")
            cells.append(Cell(str(d["id"]), d["dim"], [(str(f), s) for f, s in bd],
                              d.get("stratum"), depth,
                              None if verts is None else tuple(_hashable(v) for v in verts),
                              bool(d.get("on_boundary", False))))
        if diag:
            raise ComplexError(diag)
        seen = set()
        for k, c in enumerate(cells):
            if c.id in seen:
                diag.append(f"{_locate(text, c.id, k)}: duplicate id {c.id!r}")
            seen.add(c.id)
        if diag:
            raise ComplexError(diag)
        try:
            return cls(cells, name=str(data.get("name", "")))
        except ComplexError as e:
            raise ComplexError([_annotate(text, m) for m in e.diagnostics]) from None

    @classmethod
    def loads(cls, text: str) -> "StratifiedCellComplex":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ComplexError([f"line {e.lineno}: {e.msg}"]) from None
        return cls.from_json(data, text)

    @classmethod
    def load(cls, path) -> "StratifiedCellComplex":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def _simplex_id(s) -> str:
    return "[" + ",".join(str(v) for v in s) + "]"


def _jsonable(v):
    return list(_jsonable(x) for x in v) if isinstance(v, tuple) else v


def _hashable(v):
    return tuple(_hashable(x) for x in v) if isinstance(v, list) else v


def _line_of(text, cid):
    if text is None or cid is None:
        return None
    m = re.search(r'"id"\s*:\s*' + re.escape(json.dumps(cid)), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _locate(text, cid, k) -> str:
    line = _line_of(text, cid)
    return f"line {line}: cell {k}" if line else f"cell {k}"


def _annotate(text, msg: str) -> str:
    m = re.search(r"cell '([^']*)'", msg)
    line = _line_of(text, m.group(1)) if m else None
    return f"line {line}: {msg}" if line else msg
