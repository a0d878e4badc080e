"""Regular LDPC codes: PEG construction, systematic encoding, parity tests, alist I/O."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ConstructionFailed(RuntimeError):
    pass


def gf2_row_reduce(mat: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) and the pivot columns."""
    a = np.array(mat, dtype=np.uint8) & 1
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hit = np.nonzero(a[r:, c])[0]
        if hit.size == 0:
            continue
        p = r + hit[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def gf2_rank(mat: np.ndarray) -> int:
    return len(gf2_row_reduce(mat)[1])


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Parity-check matrix in systematic column order plus Tanner adjacency.

    Message bits sit in the first ``k`` codeword positions. ``column_order``
    maps those positions back to the columns of the matrix as constructed.
    """

    h: np.ndarray              # (N, n) uint8
    parity_map: np.ndarray     # (N, k): parity = parity_map @ v mod 2
    column_order: np.ndarray   # (n,)
    check_vars: np.ndarray     # (N, dc) variable index of every edge, check-major
    var_edges: np.ndarray      # (n, dv) flat edge ids (into check_vars.ravel())
    seed: int

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def N(self) -> int:
        return self.h.shape[0]

    @property
    def k(self) -> int:
        return self.n - self.N

    @classmethod
    def from_matrix(cls, h: np.ndarray, seed: int = 0) -> "LdpcCode":
        """Wrap a full-rank, column- and row-regular parity-check matrix."""
        h = np.asarray(h, dtype=np.uint8) & 1
        N, n = h.shape
        col_w = h.sum(0)
        row_w = h.sum(1)
        if len(set(col_w)) != 1 or len(set(row_w)) != 1:
            raise ValueError("only regular parity-check matrices are supported")
        _, pivots = gf2_row_reduce(h)
        if len(pivots) != N:
            raise ValueError(f"parity-check matrix has rank {len(pivots)} < {N}")
        info = [c for c in range(n) if c not in set(pivots)]
        order = np.array(info + pivots)
        hs = h[:, order]
        k = n - N
        # [Hp | Hi] -> [I | X] gives parity = X v
        reduced, piv = gf2_row_reduce(np.hstack([hs[:, k:], hs[:, :k]]))
        assert piv == list(range(N))
        parity_map = reduced[:, N:].copy()
        check_vars = np.array([np.nonzero(row)[0] for row in hs])
        flat = check_vars.ravel()
        var_edges = np.array([np.nonzero(flat == v)[0] for v in range(n)])
        for arr in (hs, parity_map, order, check_vars, var_edges):
            arr.setflags(write=False)
        return cls(hs, parity_map, order, check_vars, var_edges, seed)


def _peg(n: int, N: int, dv: int, dc: int, rng: np.random.Generator) -> np.ndarray | None:
    """Progressive edge growth with a hard check-degree cap."""
    var_nbrs: list[list[int]] = [[] for _ in range(n)]
    chk_nbrs: list[list[int]] = [[] for _ in range(N)]
    deg = np.zeros(N, dtype=int)
    for v in rng.permutation(n):
        for e in range(dv):
            open_ = (deg < dc)
            open_[var_nbrs[v]] = False
            if not open_.any():
                return None
            if e == 0:
                cand = np.nonzero(open_)[0]
            else:
                # breadth-first over the current graph; prefer checks not reached,
                # else those reached last
                seen_c = np.zeros(N, dtype=bool)
                seen_v = np.zeros(n, dtype=bool)
                seen_v[v] = True
                frontier = deque([v])
                last_layer = np.zeros(N, dtype=bool)
                while frontier:
                    layer = np.zeros(N, dtype=bool)
                    next_vars = deque()
                    for u in frontier:
                        for c in var_nbrs[u]:
                            if not seen_c[c]:
                                seen_c[c] = layer[c] = True
                    for c in np.nonzero(layer)[0]:
                        for u in chk_nbrs[c]:
                            if not seen_v[u]:
                                seen_v[u] = True
                                next_vars.append(u)
                    if layer.any():
                        last_layer = layer
                    if seen_c.all() or not next_vars:
                        break
                    frontier = next_vars
                unreached = open_ & ~seen_c
                if unreached.any():
                    cand = np.nonzero(unreached)[0]
                else:
                    cand = np.nonzero(open_ & last_layer)[0]
                    if cand.size == 0:
                        cand = np.nonzero(open_)[0]
            low = cand[deg[cand] == deg[cand].min()]
            c = int(rng.choice(low))
            var_nbrs[v].append(c)
            chk_nbrs[c].append(int(v))
            deg[c] += 1
    h = np.zeros((N, n), dtype=np.uint8)
    for v, cs in enumerate(var_nbrs):
        h[cs, v] = 1
    return h


def has_four_cycle(h: np.ndarray) -> bool:
    overlap = h.astype(np.int32).T @ h.astype(np.int32)
    np.fill_diagonal(overlap, 0)
    return bool((overlap > 1).any())


def build_ldpc(seed: int, Bc: int, dv: int = 3, dc: int = 6, retries: int = 64) -> LdpcCode:
    """Rate-1/2 (dv, dc)-regular code with ``Bc`` information bits and girth >= 6."""
    if Bc < dc or Bc % 2:
        raise ValueError("Bc must be even and >= 6")
    n, N = 2 * Bc, Bc
    for attempt in range(retries):
        rng = np.random.default_rng(np.random.SeedSequence([seed, Bc, attempt]))
        h = _peg(n, N, dv, dc, rng)
        if h is None or has_four_cycle(h) or gf2_rank(h) < N:
            continue
        return LdpcCode.from_matrix(h, seed)
    raise ConstructionFailed(f"no 4-cycle-free full-rank ({dv},{dc}) code for Bc={Bc}")


def ldpc_encode(code: LdpcCode, v_c) -> np.ndarray:
    v = np.asarray(v_c, dtype=np.uint8).ravel()
    if v.size != code.k:
        raise ValueError(f"expected {code.k} message bits, got {v.size}")
    parity = (code.parity_map.astype(np.int64) @ v) & 1
    return np.concatenate([v, parity.astype(np.uint8)])


def syndrome(code: LdpcCode, b) -> np.ndarray:
    return (code.h.astype(np.int64) @ np.asarray(b, dtype=np.int64).T) & 1


def parity_check(code: LdpcCode, b) -> bool:
    b = np.asarray(b).ravel()
    if b.size != code.n:
        raise ValueError(f"expected {code.n} bits, got {b.size}")
    return not syndrome(code, b).any()


# ----------------------------------------------------------------------
# alist (MacKay) format

def write_alist(h: np.ndarray, path: str | Path | None = None) -> str:
    h = np.asarray(h, dtype=np.uint8)
    N, n = h.shape
    col_w, row_w = h.sum(0), h.sum(1)
    lines = [f"{n} {N}", f"{col_w.max()} {row_w.max()}",
             " ".join(map(str, col_w)), " ".join(map(str, row_w))]
    lines += [" ".join(str(c + 1) for c in np.nonzero(h[:, v])[0]) for v in range(n)]
    lines += [" ".join(str(v + 1) for v in np.nonzero(h[c])[0]) for c in range(N)]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_alist(source: str | Path) -> np.ndarray:
    """Parse alist text, or a path to an alist file."""
    text = str(source)
    if "\n" not in text:
        text = Path(source).read_text()
    rows = [ln.split() for ln in text.strip().splitlines()]
    n, N = map(int, rows[0])
    h = np.zeros((N, n), dtype=np.uint8)
    for v in range(n):
        for c in rows[4 + v]:
            if int(c) > 0:
                h[int(c) - 1, v] = 1
    return h
