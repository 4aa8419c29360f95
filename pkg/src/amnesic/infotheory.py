"""
Exact finite-distribution toolkit.

Conditional min-entropy, smooth conditional min-entropy (LP ground truth plus
a greedy fast path), min-entropy splitting, statistical distance and an
exhaustive leftover-hash-lemma checker.

Tables are dense numpy arrays. A table whose dtype is ``object`` holding
``fractions.Fraction`` entries is treated as exact (rational mode); every
other table is float64.

Distances are the normalized (half L1) statistical distance. The
unnormalized L1 norm is exactly twice that and is reported alongside where
both matter.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

MASS_TOL = 1e-12
CMP_TOL = 1e-9
EXACT_MAX_ATOMS = 2**16


class DistributionError(ValueError):
    """Malformed table or invalid axis request."""


@dataclass(frozen=True)
class JointDistribution:
    """
    Dense probability table over a tuple of discrete variables.

    Attributes
    ----------
    axes : tuple of str
        Variable names, one per array dimension.
    alphabets : tuple of tuple
        Outcome labels per axis; ``len(alphabets[i]) == probs.shape[i]``.
    probs : np.ndarray
        Non-negative entries summing to one (within ``MASS_TOL``, exactly in
        rational mode).
    """

    axes: tuple
    alphabets: tuple
    probs: np.ndarray

    def __post_init__(self):
        axes = tuple(self.axes)
        alphabets = tuple(tuple(a) for a in self.alphabets)
        probs = np.asarray(self.probs)
        if probs.dtype != object:
            probs = probs.astype(np.float64)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "alphabets", alphabets)
        object.__setattr__(self, "probs", probs)
        if len(set(axes)) != len(axes):
            raise DistributionError(f"duplicate axis names in {axes}")
        if len(axes) != len(alphabets) or probs.ndim != len(axes):
            raise DistributionError("axes, alphabets and table rank disagree")
        if tuple(len(a) for a in alphabets) != probs.shape:
            raise DistributionError(
                f"alphabet sizes {[len(a) for a in alphabets]} != table shape {probs.shape}"
            )
        if self.exact:
            if probs.size > EXACT_MAX_ATOMS:
                raise DistributionError("rational mode is limited to 2^16 atoms")
            if any(p < 0 for p in probs.flat):
                raise DistributionError("negative probability")
            if sum(probs.flat, Fraction(0)) != 1:
                raise DistributionError("rational table does not sum to 1")
        else:
            if np.any(probs < -MASS_TOL):
                raise DistributionError("negative probability")
            if abs(probs.sum() - 1.0) > MASS_TOL:
                raise DistributionError(f"total mass {probs.sum()!r} != 1")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_mapping(cls, axes: Sequence[str], mapping: Mapping[tuple, Any],
                     alphabets: Sequence[Sequence[Hashable]] | None = None) -> "JointDistribution":
        """Build a table from ``{(v_1, ..., v_k): p}``; missing atoms get 0."""
        axes = tuple(axes)
        if alphabets is None:
            alphabets = [sorted({key[i] for key in mapping}, key=_label_key)
                         for i in range(len(axes))]
        alphabets = [tuple(a) for a in alphabets]
        index = [{v: j for j, v in enumerate(a)} for a in alphabets]
        exact = any(isinstance(p, Fraction) for p in mapping.values())
        shape = tuple(len(a) for a in alphabets)
        if exact:
            probs = np.empty(shape, dtype=object)
            probs.fill(Fraction(0))
        else:
            probs = np.zeros(shape)
        for key, p in mapping.items():
            if len(key) != len(axes):
                raise DistributionError(f"key {key!r} has wrong arity")
            pos = tuple(index[i][v] for i, v in enumerate(key))
            probs[pos] = probs[pos] + (Fraction(p) if exact else p)
        return cls(axes, alphabets, probs)

    @classmethod
    def uniform(cls, axes: Sequence[str], alphabets: Sequence[Sequence[Hashable]],
                exact: bool = False) -> "JointDistribution":
        shape = tuple(len(a) for a in alphabets)
        size = int(np.prod(shape))
        if exact:
            probs = np.empty(shape, dtype=object)
            probs.fill(Fraction(1, size))
        else:
            probs = np.full(shape, 1.0 / size)
        return cls(tuple(axes), tuple(tuple(a) for a in alphabets), probs)

    # -- queries ----------------------------------------------------------

    @property
    def exact(self) -> bool:
        return self.probs.dtype == object

    def axis_index(self, name: str) -> int:
        try:
            return self.axes.index(name)
        except ValueError:
            raise DistributionError(f"unknown axis {name!r}; have {self.axes}") from None

    def prob(self, *values) -> Any:
        pos = tuple(self.alphabets[i].index(v) for i, v in enumerate(values))
        return self.probs[pos]

    def as_dict(self, drop_zero: bool = True) -> dict:
        out = {}
        for pos in itertools.product(*(range(len(a)) for a in self.alphabets)):
            p = self.probs[pos]
            if drop_zero and p == 0:
                continue
            out[tuple(self.alphabets[i][j] for i, j in enumerate(pos))] = p
        return out

    def marginal(self, keep: Sequence[str]) -> "JointDistribution":
        """Marginalize onto ``keep`` (in the given order)."""
        keep = list(keep)
        idx = [self.axis_index(a) for a in keep]
        drop = tuple(i for i in range(len(self.axes)) if i not in idx)
        table = self.probs.sum(axis=drop) if drop else self.probs
        # remaining dims are in original order; permute to requested order
        remaining = [i for i in range(len(self.axes)) if i not in drop]
        perm = [remaining.index(i) for i in idx]
        table = np.transpose(table, perm) if perm else table
        return JointDistribution(tuple(keep), tuple(self.alphabets[i] for i in idx), table)

    def to_float(self) -> "JointDistribution":
        if not self.exact:
            return self
        return JointDistribution(self.axes, self.alphabets, self.probs.astype(np.float64))

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        """``{"axes": [{"name", "alphabet"}], "probs": [...] row-major}``."""
        probs = [str(p) if self.exact else float(p) for p in self.probs.flat]
        doc = {
            "axes": [{"name": n, "alphabet": [_jsonable(v) for v in a]}
                     for n, a in zip(self.axes, self.alphabets)],
            "probs": probs,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "JointDistribution":
        doc = json.loads(text)
        axes = [a["name"] for a in doc["axes"]]
        alphabets = [[_unjson(v) for v in a["alphabet"]] for a in doc["axes"]]
        shape = tuple(len(a) for a in alphabets)
        raw = doc["probs"]
        if raw and isinstance(raw[0], str):
            probs = np.empty(len(raw), dtype=object)
            probs[:] = [Fraction(p) for p in raw]
            probs = probs.reshape(shape)
        else:
            probs = np.asarray(raw, dtype=np.float64).reshape(shape)
        return cls(axes, alphabets, probs)

    def to_csv(self) -> str:
        """One row per atom: the axis values, then ``p``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.axes) + ["p"])
        for pos in itertools.product(*(range(len(a)) for a in self.alphabets)):
            row = [self.alphabets[i][j] for i, j in enumerate(pos)]
            p = self.probs[pos]
            writer.writerow(row + [str(p) if self.exact else repr(float(p))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "JointDistribution":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        axes = header[:-1]
        exact = any("/" in r[-1] for r in body)
        mapping = {}
        for r in body:
            key = tuple(r[:-1])
            mapping[key] = Fraction(r[-1]) if exact else float(r[-1])
        alphabets = []
        for i in range(len(axes)):
            seen = []
            for r in body:
                if r[i] not in seen:
                    seen.append(r[i])
            alphabets.append(seen)
        return cls.from_mapping(axes, mapping, alphabets)


def _label_key(v):
    return (str(type(v)), v) if not isinstance(v, (int, float)) else ("", v)


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _unjson(v):
    return tuple(v) if isinstance(v, list) else v


# ---------------------------------------------------------------------------
# min-entropy
# ---------------------------------------------------------------------------

def _conditional_matrix(d: JointDistribution, target_axes: Sequence[str],
                        cond_axes: Sequence[str]) -> np.ndarray:
    """Reshape to a (|target|, |cond|) matrix after marginalizing the rest."""
    target_axes, cond_axes = list(target_axes), list(cond_axes)
    if not target_axes:
        raise DistributionError("target axes must be non-empty")
    if set(target_axes) & set(cond_axes):
        raise DistributionError("target and conditioning axes overlap")
    m = d.marginal(target_axes + cond_axes)
    n_target = int(np.prod([len(a) for a in m.alphabets[:len(target_axes)]]))
    return m.probs.reshape(n_target, -1)


def guessing_probability(matrix: np.ndarray) -> Any:
    """``sum_z max_x p(x, z)`` for a (target, cond) matrix."""
    if matrix.dtype == object:
        return sum((max(matrix[:, j]) for j in range(matrix.shape[1])), Fraction(0))
    return float(matrix.max(axis=0).sum())


def min_entropy_cond(d: JointDistribution, target_axes: Sequence[str],
                     cond_axes: Sequence[str] = ()) -> float:
    """
    Conditional min-entropy ``-log2 sum_z p(z) max_x p(x|z)`` in bits.

    Axes not named in either list are marginalized out.
    """
    g = guessing_probability(_conditional_matrix(d, target_axes, cond_axes))
    return -math.log2(g)


def _smooth_guess_lp(matrix: np.ndarray, delta: float) -> float:
    """Minimal ``sum_z max_x q`` over ``0 <= q <= p`` with ``sum(p - q) <= delta``."""
    p = np.asarray(matrix, dtype=np.float64)
    nx, nz = p.shape
    nq = nx * nz
    # variables: q (row-major x, z) then t_z
    c = np.concatenate([np.zeros(nq), np.ones(nz)])
    rows = []
    for x in range(nx):
        for z in range(nz):
            row = np.zeros(nq + nz)
            row[x * nz + z] = 1.0
            row[nq + z] = -1.0
            rows.append(row)
    mass_row = np.concatenate([-np.ones(nq), np.zeros(nz)])
    a_ub = np.vstack(rows + [mass_row])
    b_ub = np.concatenate([np.zeros(nq), [delta - p.sum()]])
    bounds = [(0.0, float(v)) for v in p.flat] + [(0.0, None)] * nz
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"smoothing LP failed: {res.message}")
    return float(res.fun)


def _smooth_guess_greedy(matrix: np.ndarray, delta: float) -> float:
    """
    Water-filling: lower column maxima, always spending budget on the column
    whose cap currently touches the fewest entries. Optimal because each
    column's removal cost is convex piecewise-linear in the cap reduction.
    """
    p = np.asarray(matrix, dtype=np.float64)
    cols = [np.sort(p[:, j])[::-1] for j in range(p.shape[1])]
    levels = [float(c[0]) if c.size else 0.0 for c in cols]
    counts = []
    for c, lev in zip(cols, levels):
        counts.append(int(np.sum(c >= lev)) if lev > 0 else 0)
    budget = float(delta)
    while budget > 0:
        live = [j for j in range(len(cols)) if levels[j] > 0]
        if not live:
            break
        j = min(live, key=lambda k: (counts[k], k))
        c, k = cols[j], counts[j]
        nxt = float(c[k]) if k < c.size else 0.0
        drop = levels[j] - nxt
        cost = drop * k
        if cost <= budget:
            budget -= cost
            levels[j] = nxt
            counts[j] = int(np.sum(c >= nxt)) if nxt > 0 else 0
        else:
            levels[j] -= budget / k
            budget = 0.0
    return float(sum(levels))


def smooth_min_entropy_cond(d: JointDistribution, target_axes: Sequence[str],
                            cond_axes: Sequence[str] = (), delta: float = 0.0,
                            method: str = "greedy") -> float:
    """
    Smooth conditional min-entropy over the removal-only smoothing ball.

    The ball holds sub-normalized tables ``q <= p`` entrywise with removed
    mass ``sum(p - q) <= delta``. ``method`` is ``"lp"`` (ground truth) or
    ``"greedy"`` (water-filling; agrees with the LP).
    """
    if not 0 <= delta < 1:
        raise DistributionError(f"smoothing parameter must lie in [0, 1), got {delta}")
    matrix = _conditional_matrix(d, target_axes, cond_axes)
    if delta == 0:
        return min_entropy_cond(d, target_axes, cond_axes)
    if method == "lp":
        g = _smooth_guess_lp(matrix, delta)
    elif method == "greedy":
        g = _smooth_guess_greedy(matrix, delta)
    else:
        raise ValueError(f"unknown smoothing method {method!r}")
    return -math.log2(g)


# ---------------------------------------------------------------------------
# statistical distance
# ---------------------------------------------------------------------------

def statistical_distance(d1, d2) -> float:
    """Half the entrywise L1 distance between two same-shaped tables."""
    p = d1.probs if isinstance(d1, JointDistribution) else np.asarray(d1)
    q = d2.probs if isinstance(d2, JointDistribution) else np.asarray(d2)
    if p.shape != q.shape:
        raise DistributionError(f"shape mismatch {p.shape} vs {q.shape}")
    if isinstance(d1, JointDistribution) and isinstance(d2, JointDistribution):
        if d1.alphabets != d2.alphabets:
            raise DistributionError("alphabets differ")
    if p.dtype == object or q.dtype == object:
        return float(sum((abs(Fraction(a) - Fraction(b)) for a, b in zip(p.flat, q.flat)),
                         Fraction(0)) / 2)
    return float(0.5 * np.abs(p.astype(np.float64) - q.astype(np.float64)).sum())


# ---------------------------------------------------------------------------
# min-entropy splitting
# ---------------------------------------------------------------------------

@dataclass
class SplitResult:
    """Outcome of :func:`min_entropy_split` for one smoothing parameter."""

    alpha: float
    delta: float
    choice: dict            # (x0, x1, z) -> C
    bound: float            # alpha/2 - 1 - log2(1/delta)
    achieved: float         # smooth H of X_{1-C} given (Z, C)
    holds: bool
    exhaustive_best: float | None = None
    exhaustive_count: int | None = None


def split_distribution(d: JointDistribution, choice: Callable[[Any, Any, Any], int] | Mapping,
                       x0_axis: str = "X0", x1_axis: str = "X1",
                       z_axes: Sequence[str] = ("Z",)) -> JointDistribution:
    """Joint table of ``(V, Z..., C)`` with ``V = X_{1-C}``."""
    z_axes = list(z_axes)
    m = d.marginal([x0_axis, x1_axis] + z_axes).to_float()
    a0, a1 = m.alphabets[0], m.alphabets[1]
    v_alpha = tuple(dict.fromkeys(list(a0) + list(a1)))
    z_alpha = list(itertools.product(*m.alphabets[2:]))
    pick = choice if callable(choice) else (lambda x0, x1, z: choice.get((x0, x1, z), 0))
    out = np.zeros((len(v_alpha), len(z_alpha), 2))
    vi = {v: i for i, v in enumerate(v_alpha)}
    flat = m.probs.reshape(len(a0), len(a1), -1)
    for i0, x0 in enumerate(a0):
        for i1, x1 in enumerate(a1):
            for iz, z in enumerate(z_alpha):
                p = flat[i0, i1, iz]
                if p == 0:
                    continue
                zval = z[0] if len(z) == 1 else z
                c = int(pick(x0, x1, zval))
                v = x1 if c == 0 else x0
                out[vi[v], iz, c] += p
    zlabels = tuple(z[0] if len(z) == 1 else z for z in z_alpha)
    return JointDistribution(("V", "Z", "C"), (v_alpha, zlabels, (0, 1)), out)


def threshold_choice(d: JointDistribution, alpha: float, x0_axis: str = "X0",
                     x1_axis: str = "X1", z_axes: Sequence[str] = ("Z",)) -> dict:
    """``C = 0`` iff ``p(x1 | z) <= 2^(-alpha/2)``; ties go to 0."""
    z_axes = list(z_axes)
    m = d.marginal([x0_axis, x1_axis] + z_axes).to_float()
    a0, a1 = m.alphabets[0], m.alphabets[1]
    z_alpha = list(itertools.product(*m.alphabets[2:]))
    flat = m.probs.reshape(len(a0), len(a1), -1)
    p_x1z = flat.sum(axis=0)            # (x1, z)
    p_z = p_x1z.sum(axis=0)
    threshold = 2.0 ** (-alpha / 2)
    choice = {}
    for i0, x0 in enumerate(a0):
        for i1, x1 in enumerate(a1):
            for iz, z in enumerate(z_alpha):
                if flat[i0, i1, iz] == 0:
                    continue
                cond = p_x1z[i1, iz] / p_z[iz]
                zval = z[0] if len(z) == 1 else z
                choice[(x0, x1, zval)] = 0 if cond <= threshold * (1 + 1e-12) else 1
    return choice


def split_bound(alpha: float, delta: float) -> float:
    return alpha / 2 - 1 - math.log2(1 / delta)


def min_entropy_split(d: JointDistribution, delta: float, x0_axis: str = "X0",
                      x1_axis: str = "X1", z_axes: Sequence[str] = ("Z",),
                      exhaustive_limit: int = 2**12) -> SplitResult:
    """
    Build the splitting bit ``C`` by conditional-probability thresholding and
    certify ``H^delta(X_{1-C} | Z, C) >= alpha/2 - 1 - log2(1/delta)``.

    When the number of ``C`` assignments over the support is at most
    ``exhaustive_limit``, every assignment is scored and the best achieved
    smooth entropy is recorded for comparison.
    """
    if not 0 < delta < 1:
        raise DistributionError("delta must lie in (0, 1)")
    z_axes = list(z_axes)
    alpha = min_entropy_cond(d, [x0_axis, x1_axis], z_axes)
    choice = threshold_choice(d, alpha, x0_axis, x1_axis, z_axes)
    achieved = smooth_min_entropy_cond(
        split_distribution(d, choice, x0_axis, x1_axis, z_axes), ["V"], ["Z", "C"], delta)
    bound = split_bound(alpha, delta)
    result = SplitResult(alpha=alpha, delta=delta, choice=choice, bound=bound,
                         achieved=achieved, holds=achieved >= bound - CMP_TOL)
    atoms = sorted(choice, key=repr)
    if 2 ** len(atoms) <= exhaustive_limit:
        best = -math.inf
        for bits in itertools.product((0, 1), repeat=len(atoms)):
            alt = dict(zip(atoms, bits))
            h = smooth_min_entropy_cond(
                split_distribution(d, alt, x0_axis, x1_axis, z_axes), ["V"], ["Z", "C"], delta)
            best = max(best, h)
        result.exhaustive_best = best
        result.exhaustive_count = 2 ** len(atoms)
    return result


# ---------------------------------------------------------------------------
# leftover hash lemma
# ---------------------------------------------------------------------------

@dataclass
class LhlReport:
    lhs: float            # normalized distance
    lhs_l1: float         # unnormalized L1 norm (= 2 * lhs)
    rhs: float
    smooth_entropy: float
    holds: bool
    seeds: int


def lhl_verify(x_and_y: JointDistribution, max_input_len: int, out_len: int,
               delta: float = 0.0, x_axis: str = "X", y_axis: str = "Y") -> LhlReport:
    """
    Exact check of the smooth leftover hash lemma for the Toeplitz family.

    Enumerates every seed, forms ``(<h>, h(X), Y)`` and ``(<h>, U, Y)`` and
    compares their distance against ``2^(-(H^delta(X|Y) - l)/2) + 2 delta``.
    ``X`` labels must be bitstrings of length at most ``max_input_len``.
    """
    from .hashing import hash_table

    m = x_and_y.marginal([x_axis, y_axis]).to_float()
    xs, p = m.alphabets[0], m.probs
    if len(xs) > 2**10:
        raise DistributionError("source alphabet exceeds 2^10")
    values = hash_table(max_input_len, out_len, xs)       # (seeds, |X|)
    n_seeds = values.shape[0]
    n_out = 2**out_len
    onehot = np.zeros((n_seeds, len(xs), n_out))
    np.put_along_axis(onehot, values[:, :, None], 1.0, axis=2)
    hashed = np.einsum("sxv,xy->svy", onehot, p)           # (seeds, v, y)
    uniform = np.broadcast_to(p.sum(axis=0)[None, None, :] / n_out, hashed.shape)
    lhs = float(0.5 * np.abs(hashed - uniform).sum() / n_seeds)
    h = smooth_min_entropy_cond(m, [x_axis], [y_axis], delta)
    rhs = 2.0 ** (-0.5 * (h - out_len)) + 2 * delta
    return LhlReport(lhs=lhs, lhs_l1=2 * lhs, rhs=rhs, smooth_entropy=h,
                     holds=lhs <= rhs + CMP_TOL, seeds=n_seeds)


def eq3_bound(lam: int, out_len: int) -> float:
    """``2 (2^(l - 0.0071 lam) + 2^(-lam/20))``: receiver-advantage bound."""
    if lam < 1 or out_len < 1:
        raise ValueError("lambda and output length must be >= 1")
    return 2 * (2.0 ** (out_len - 0.0071 * lam) + 2.0 ** (-lam / 20))


def random_table(rng: np.random.Generator, axes: Sequence[str],
                 sizes: Iterable[int], sparsity: float = 0.0) -> JointDistribution:
    """Random float table; each atom is zeroed with probability ``sparsity``."""
    sizes = tuple(sizes)
    while True:
        raw = rng.exponential(size=sizes)
        if sparsity:
            raw = raw * (rng.random(sizes) >= sparsity)
        if raw.sum() > 0:
            break
    return JointDistribution(tuple(axes), tuple(tuple(range(s)) for s in sizes),
                             raw / raw.sum())
