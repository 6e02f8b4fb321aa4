"""Composable covariance functions over mixed continuous/discrete inputs.

Kernels form a tree: leaves act on a single variable (``SE`` continuous,
``CS``/``LV`` discrete, ``Delta`` indicator on a dimensional variable) and
are combined with ``Product``, ``Sum`` and ``Scale``. Leaf variances are
fixed to one; magnitudes come from ``Scale`` nodes.

Inputs are :class:`Columns`: one array per variable name. Continuous
columns hold values normalized to [0, 1]; discrete columns hold level
*indices* (0..l-1), not level codes. Inactive variables may hold any finite
placeholder, as long as a ``Delta`` in an enclosing product masks them.

Free hyperparameters live in a transformed space: log for lengthscales and
variances, logit for compound-symmetry correlations, identity for latent
coordinates. :func:`pack` / :func:`unpack` convert between a tree and a flat
:class:`HyperparameterVector`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "CS",
    "Columns",
    "Delta",
    "HyperparameterVector",
    "Kernel",
    "KernelError",
    "LV",
    "Product",
    "SE",
    "Scale",
    "Sum",
    "evaluate",
    "gram",
    "k_cs",
    "k_lv",
    "k_se",
    "pack",
    "unpack",
]

SE_BOUNDS = (1e-3, 1e3)
CS_BOUNDS = (1e-6, 1.0 - 1e-6)
LV_BOUNDS = (-10.0, 10.0)
VARIANCE_BOUNDS = (1e-6, 1e3)

Backward = Callable[[np.ndarray], list]


class KernelError(ValueError):
    pass


# -- scalar reference formulas ---------------------------------------------


def k_se(x: float, x2: float, theta: float, variance: float = 1.0) -> float:
    """Squared exponential ``variance * exp(-theta * (x - x2)**2)``."""
    if not (math.isfinite(x) and math.isfinite(x2)):
        raise KernelError("non-finite input")
    if theta <= 0 or variance < 0:
        raise KernelError("theta must be positive and variance non-negative")
    return variance * math.exp(-theta * (x - x2) ** 2)


def k_cs(z: int, z2: int, theta: float, variance: float = 1.0, levels: Sequence[int] | None = None) -> float:
    """Compound symmetry: ``variance`` on the diagonal, ``theta * variance`` elsewhere."""
    if not 0.0 < theta < 1.0:
        raise KernelError("compound symmetry requires 0 < theta < 1")
    if levels is not None and (z not in levels or z2 not in levels):
        raise KernelError(f"level outside {tuple(levels)}")
    return variance if z == z2 else theta * variance


def k_lv(z: int, z2: int, coords: Mapping[int, Sequence[float]], variance: float = 1.0) -> float:
    """Latent-variable kernel ``variance * exp(-||phi(z) - phi(z2)||^2)``."""
    try:
        a, b = coords[z], coords[z2]
    except KeyError as exc:
        raise KernelError(f"unknown level {exc.args[0]!r}") from None
    d2 = (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2
    return variance * math.exp(-d2)


# -- inputs ----------------------------------------------------------------


class Columns:
    """Column-oriented encoded inputs with cached pairwise quantities.

    The caches assume the instance is used as the *training* set, i.e. for
    symmetric Gram matrices; they are never consulted for cross-covariances.
    """

    def __init__(self, data: Mapping[str, np.ndarray], n: int | None = None):
        self.data = {k: np.asarray(v) for k, v in data.items()}
        if n is None:
            lengths = {len(v) for v in self.data.values()}
            if len(lengths) != 1:
                raise KernelError("columns must share one length")
            n = lengths.pop()
        self.n = n
        self._cache: dict = {}

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.data[name]
        except KeyError:
            raise KernelError(f"missing variable {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.data

    def take(self, idx: np.ndarray, key=None) -> Columns:
        if key is not None and ("take", key) in self._cache:
            return self._cache[("take", key)]
        sub = Columns({k: v[idx] for k, v in self.data.items()}, n=len(idx))
        if key is not None:
            self._cache[("take", key)] = sub
        return sub

    def sqdist(self, name: str) -> np.ndarray:
        key = ("sqdist", name)
        if key not in self._cache:
            v = self[name].astype(float)
            self._cache[key] = (v[:, None] - v[None, :]) ** 2
        return self._cache[key]

    def sqstack(self, names: tuple[str, ...]) -> np.ndarray:
        """Squared differences of several variables, one flattened row each."""
        key = ("sqstack", names)
        if key not in self._cache:
            self._cache[key] = np.stack([self.sqdist(nm).ravel() for nm in names])
        return self._cache[key]

    def onehot(self, name: str, n_levels: int) -> np.ndarray:
        key = ("onehot", name)
        if key not in self._cache:
            v = self[name].astype(np.intp)
            self._cache[key] = (v[:, None] == np.arange(n_levels)[None, :]).astype(float)
        return self._cache[key]

    def concat(self, other: Columns) -> Columns:
        return Columns({k: np.concatenate([v, other[k]]) for k, v in self.data.items()})


# -- hyperparameter vector -------------------------------------------------


@dataclass(frozen=True)
class HyperparameterVector:
    """Free kernel parameters, flattened, in transformed coordinates."""

    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.values)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _sigmoid(u: float) -> float:
    return 1.0 / (1.0 + math.exp(-u))


# -- tree nodes ------------------------------------------------------------


class Kernel:
    """Base node. Subclasses are immutable dataclasses."""

    is_leaf = False

    def param_names(self) -> list[str]:
        return []

    def param_values(self) -> list[float]:
        return []

    def param_bounds(self) -> list[tuple[float, float]]:
        return []

    def n_free(self) -> int:
        nf = self.__dict__.get("_nf")
        if nf is None:
            nf = len(self.param_values())
            self.__dict__["_nf"] = nf
        return nf

    def _clone(self, **changes) -> Kernel:
        # cheap copy for the optimizer's inner loop (skips __init__ validation)
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.__dict__.update(changes)
        return new

    def with_values(self, values: Sequence[float]) -> Kernel:
        raise NotImplementedError

    def variables(self) -> set[str]:
        return set()

    def __call__(self, A: Columns, B: Columns) -> np.ndarray:
        raise NotImplementedError

    def diag(self, A: Columns) -> np.ndarray:
        raise NotImplementedError

    def forward(self, A: Columns) -> tuple[np.ndarray, Backward]:
        """Symmetric Gram over ``A`` and a function mapping dL/dK to dL/dparams."""
        raise NotImplementedError

    def evaluate(self, a: Mapping[str, float], b: Mapping[str, float]) -> float:
        raise NotImplementedError


class _Leaf(Kernel):
    is_leaf = True
    var: str

    def variables(self) -> set[str]:
        return {self.var}

    def gram(self, A: Columns) -> np.ndarray:
        raise NotImplementedError

    def log_grad(self, A: Columns, H: np.ndarray) -> list[float]:
        """Sum over entries of ``H * d log K / d param`` for each free parameter."""
        raise NotImplementedError

    def forward(self, A):
        K = self.gram(A)
        return K, lambda G: self.log_grad(A, G * K)

    def diag(self, A):
        return np.ones(A.n)

    def _get(self, p: Mapping[str, float]):
        try:
            return p[self.var]
        except KeyError:
            raise KernelError(f"missing value for {self.var!r}") from None


@dataclass(frozen=True)
class SE(_Leaf):
    """Squared exponential on one continuous variable (unit variance)."""

    var: str
    theta: float = 1.0

    def param_names(self):
        return [f"se[{self.var}].log_theta"]

    def param_values(self):
        return [math.log(self.theta)]

    def param_bounds(self):
        return [(math.log(SE_BOUNDS[0]), math.log(SE_BOUNDS[1]))]

    def with_values(self, values):
        (u,) = values
        return self._clone(theta=math.exp(u))

    def gram(self, A):
        return np.exp(-self.theta * A.sqdist(self.var))

    def log_grad(self, A, H):
        return [-self.theta * float(np.sum(H * A.sqdist(self.var)))]

    def __call__(self, A, B):
        a, b = A[self.var].astype(float), B[self.var].astype(float)
        return np.exp(-self.theta * (a[:, None] - b[None, :]) ** 2)

    def evaluate(self, a, b):
        return k_se(float(self._get(a)), float(self._get(b)), self.theta)


class _LevelLeaf(_Leaf):
    n_levels: int

    def level_matrix(self) -> np.ndarray:
        raise NotImplementedError

    def gram(self, A):
        E = A.onehot(self.var, self.n_levels)
        return E @ self.level_matrix() @ E.T

    def _aggregate(self, A, H) -> np.ndarray:
        """Sum of ``H`` over the entries of each level pair."""
        E = A.onehot(self.var, self.n_levels)
        return E.T @ H @ E

    def __call__(self, A, B):
        a = A[self.var].astype(np.intp)
        b = B[self.var].astype(np.intp)
        return self.level_matrix()[a[:, None], b[None, :]]

    def evaluate(self, a, b):
        ia, ib = int(self._get(a)), int(self._get(b))
        if not (0 <= ia < self.n_levels and 0 <= ib < self.n_levels):
            raise KernelError(f"{self.var}: level index outside 0..{self.n_levels - 1}")
        return float(self.level_matrix()[ia, ib])


@dataclass(frozen=True)
class CS(_LevelLeaf):
    """Compound symmetry on one discrete variable (unit variance)."""

    var: str
    n_levels: int
    theta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise KernelError("compound symmetry requires 0 < theta < 1")

    def param_names(self):
        return [f"cs[{self.var}].logit_theta"]

    def param_values(self):
        return [_logit(self.theta)]

    def param_bounds(self):
        return [(_logit(CS_BOUNDS[0]), _logit(CS_BOUNDS[1]))]

    def with_values(self, values):
        (u,) = values
        return self._clone(theta=min(max(_sigmoid(u), CS_BOUNDS[0]), CS_BOUNDS[1]))

    def level_matrix(self):
        m = np.full((self.n_levels, self.n_levels), self.theta)
        np.fill_diagonal(m, 1.0)
        return m

    def log_grad(self, A, H):
        m = self._aggregate(A, H)
        off = m.sum() - np.trace(m)
        # d log(theta) / d logit(theta) = 1 - theta
        return [(1.0 - self.theta) * float(off)]


@dataclass(frozen=True)
class LV(_LevelLeaf):
    """Latent-variable kernel: levels mapped to 2-D coordinates.

    The first level sits at the origin and the second on the first axis, so
    a variable with ``l`` levels has ``2 l - 3`` free coordinates.
    """

    var: str
    n_levels: int
    coords: tuple[tuple[float, float], ...] = field(default=None)

    def __post_init__(self):
        if self.n_levels < 2:
            raise KernelError("latent-variable kernel needs at least two levels")
        if self.coords is None:
            # spread default levels on a unit circle through the origin
            ang = np.linspace(0, np.pi, self.n_levels, endpoint=False)
            pts = np.stack([1 - np.cos(ang), np.sin(ang)], axis=1) * 0.5
            pts[1, 1] = 0.0
            object.__setattr__(self, "coords", tuple(map(tuple, pts)))
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (self.n_levels, 2):
            raise KernelError("coords must be an (l, 2) table")
        c[0] = 0.0
        c[1, 1] = 0.0
        object.__setattr__(self, "coords", tuple(map(tuple, c)))

    def param_names(self):
        names = [f"lv[{self.var}].c1_0"]
        for m in range(2, self.n_levels):
            names += [f"lv[{self.var}].c{m}_0", f"lv[{self.var}].c{m}_1"]
        return names

    def param_values(self):
        c = self.coords
        return [c[1][0]] + [v for m in range(2, self.n_levels) for v in c[m]]

    def param_bounds(self):
        return [LV_BOUNDS] * (2 * self.n_levels - 3)

    def with_values(self, values):
        values = list(values)
        c = [(0.0, 0.0), (values[0], 0.0)]
        c += [(values[1 + 2 * i], values[2 + 2 * i]) for i in range(self.n_levels - 2)]
        return self._clone(coords=tuple(c))

    def level_matrix(self):
        c = np.asarray(self.coords)
        d2 = ((c[:, None, :] - c[None, :, :]) ** 2).sum(-1)
        return np.exp(-d2)

    def log_grad(self, A, H):
        m = self._aggregate(A, H)
        s = m + m.T
        c = np.asarray(self.coords)
        # g[m, k] = -2 sum_b s[m, b] (c[m, k] - c[b, k])
        g = -2.0 * (c * s.sum(axis=1)[:, None] - s @ c)
        return [g[1, 0]] + g[2:].ravel().tolist()


@dataclass(frozen=True)
class Delta(Kernel):
    """Indicator ``1 if a == b == level else 0`` on a dimensional variable."""

    var: str
    level: int

    def variables(self):
        return {self.var}

    def phi(self, A: Columns) -> np.ndarray:
        return A[self.var] == self.level

    def with_values(self, values):
        return self

    def __call__(self, A, B):
        return (self.phi(A)[:, None] & self.phi(B)[None, :]).astype(float)

    def diag(self, A):
        return self.phi(A).astype(float)

    def forward(self, A):
        K = self(A, A)
        return K, lambda G: []

    def evaluate(self, a, b):
        try:
            return float(a[self.var] == self.level and b[self.var] == self.level)
        except KeyError as exc:
            raise KernelError(f"missing value for {exc.args[0]!r}") from None


class _Composite(Kernel):
    children: tuple[Kernel, ...]

    def param_names(self):
        return [n for c in self.children for n in c.param_names()]

    def param_values(self):
        return [v for c in self.children for v in c.param_values()]

    def param_bounds(self):
        return [b for c in self.children for b in c.param_bounds()]

    def with_values(self, values):
        values = list(values)
        kids, i = [], 0
        for c in self.children:
            k = c.n_free()
            kids.append(c.with_values(values[i : i + k]))
            i += k
        return self._clone(children=tuple(kids))

    def variables(self):
        out: set[str] = set()
        for c in self.children:
            out |= c.variables()
        return out


def _flatten(grads: Iterable[list]) -> list:
    return [g for part in grads for g in part]


def _others_products(mats: list[np.ndarray]) -> list[np.ndarray]:
    """For each i, the elementwise product of all matrices except ``mats[i]``."""
    n = len(mats)
    prefix = [None] * n
    acc = None
    for i in range(n):
        prefix[i] = acc
        acc = mats[i] if acc is None else acc * mats[i]
    out = [None] * n
    acc = None
    for i in reversed(range(n)):
        p = prefix[i]
        if p is None and acc is None:
            out[i] = np.ones_like(mats[i])
        elif p is None:
            out[i] = acc
        elif acc is None:
            out[i] = p
        else:
            out[i] = p * acc
        acc = mats[i] if acc is None else acc * mats[i]
    return out


@dataclass(frozen=True)
class Product(_Composite):
    """Elementwise product of children.

    ``Delta`` children are separable, so the remaining children are only
    evaluated on the rows where every indicator is one.
    """

    children: tuple[Kernel, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))

    @property
    def _deltas(self) -> list[Delta]:
        idx = self.__dict__.get("_didx")
        if idx is None:
            idx = [i for i, c in enumerate(self.children) if isinstance(c, Delta)]
            self.__dict__["_didx"] = idx
        return [self.children[i] for i in idx]

    @property
    def _rest(self) -> list[Kernel]:
        idx = self.__dict__.get("_ridx")
        if idx is None:
            idx = [i for i, c in enumerate(self.children) if not isinstance(c, Delta)]
            self.__dict__["_ridx"] = idx
        return [self.children[i] for i in idx]

    def _mask(self, A: Columns) -> np.ndarray | None:
        deltas = self._deltas
        if not deltas:
            return None
        key = ("phi", tuple((d.var, d.level) for d in deltas))
        phi = A._cache.get(key)
        if phi is None:
            phi = np.ones(A.n, dtype=bool)
            for d in deltas:
                phi &= d.phi(A)
            A._cache[key] = phi
        return phi

    def __call__(self, A, B):
        rest = self._rest
        ma, mb = self._mask(A), self._mask(B)
        if ma is None:
            K = np.ones((A.n, B.n))
            for c in rest:
                K = K * c(A, B)
            return K
        ia, ib = np.flatnonzero(ma), np.flatnonzero(mb)
        K = np.zeros((A.n, B.n))
        if len(ia) and len(ib):
            sub = np.ones((len(ia), len(ib)))
            As, Bs = A.take(ia), B.take(ib)
            for c in rest:
                sub = sub * c(As, Bs)
            K[np.ix_(ia, ib)] = sub
        return K

    def diag(self, A):
        out = np.ones(A.n)
        for c in self.children:
            out = out * c.diag(A)
        return out

    def forward(self, A):
        rest = self._rest
        mask = self._mask(A)
        if mask is None:
            return self._dense_forward(rest, A)
        idx = np.flatnonzero(mask)
        n_rest = sum(c.n_free() for c in rest)
        K = np.zeros((A.n, A.n))
        if len(idx) == 0:
            return K, lambda G: [0.0] * n_rest
        key = tuple((d.var, d.level) for d in self._deltas)
        sub = A.take(idx, key=key)
        Ks, back = self._dense_forward(rest, sub)
        block = A._cache.get(("block", key))
        if block is None:
            block = A._cache[("block", key)] = np.ix_(idx, idx)
        K[block] = Ks
        return K, lambda G: back(G[block])

    def _dense_forward(self, children: list[Kernel], A: Columns):
        # SE leaves share one stacked evaluation: exp(-sum_i theta_i D_i)
        se = [i for i, c in enumerate(children) if type(c) is SE]
        n = A.n
        if se:
            D = A.sqstack(tuple(children[i].var for i in se))
            theta = np.array([children[i].theta for i in se])
            KL = np.exp(-(theta @ D)).reshape(n, n)
        else:
            KL = np.ones((n, n))
        comp: list[tuple[int, np.ndarray, Backward]] = []
        for i, c in enumerate(children):
            if type(c) is SE:
                continue
            if c.is_leaf:
                KL = KL * c.gram(A)
            else:
                Kc, back = c.forward(A)
                comp.append((i, Kc, back))
        K = KL
        for _, Kc, _ in comp:
            K = K * Kc
        comp_mats = [Kc for _, Kc, _ in comp]

        def backward(G):
            H = G * K
            parts: list[list] = [None] * len(children)
            if se:
                g = -theta * (D @ H.ravel())
                for j, i in enumerate(se):
                    parts[i] = [float(g[j])]
            for i, c in enumerate(children):
                if c.is_leaf and parts[i] is None:
                    parts[i] = c.log_grad(A, H)
            if comp:
                others = _others_products(comp_mats)
                GL = G * KL
                for (i, _, back), o in zip(comp, others):
                    parts[i] = back(GL * o)
            return _flatten(parts)

        return K, backward

    def evaluate(self, a, b):
        # indicators first: a zero short-circuits before inactive variables are read
        out = 1.0
        for d in self._deltas:
            out *= d.evaluate(a, b)
            if out == 0.0:
                return 0.0
        for c in self._rest:
            out *= c.evaluate(a, b)
        return out


@dataclass(frozen=True)
class Sum(_Composite):
    children: tuple[Kernel, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))

    def __call__(self, A, B):
        K = np.zeros((A.n, B.n))
        for c in self.children:
            K = K + c(A, B)
        return K

    def diag(self, A):
        return sum((c.diag(A) for c in self.children), np.zeros(A.n))

    def forward(self, A):
        outs = [c.forward(A) for c in self.children]
        K = np.zeros((A.n, A.n))
        for Kc, _ in outs:
            K = K + Kc
        return K, lambda G: _flatten(back(G) for _, back in outs)

    def evaluate(self, a, b):
        return sum(c.evaluate(a, b) for c in self.children)


@dataclass(frozen=True)
class Scale(Kernel):
    """``variance * child`` with a free, log-transformed variance."""

    child: Kernel
    variance: float = 1.0

    def param_names(self):
        return ["scale.log_variance"] + self.child.param_names()

    def param_values(self):
        return [math.log(self.variance)] + self.child.param_values()

    def param_bounds(self):
        return [(math.log(VARIANCE_BOUNDS[0]), math.log(VARIANCE_BOUNDS[1]))] + self.child.param_bounds()

    def with_values(self, values):
        values = list(values)
        return self._clone(variance=math.exp(values[0]), child=self.child.with_values(values[1:]))

    def variables(self):
        return self.child.variables()

    def __call__(self, A, B):
        return self.variance * self.child(A, B)

    def diag(self, A):
        return self.variance * self.child.diag(A)

    def forward(self, A):
        Kc, back = self.child.forward(A)
        K = self.variance * Kc
        return K, lambda G: [float(np.sum(G * K))] + back(self.variance * G)

    def evaluate(self, a, b):
        return self.variance * self.child.evaluate(a, b)


# -- module-level helpers --------------------------------------------------


def evaluate(spec: Kernel, a: Mapping[str, float], b: Mapping[str, float]) -> float:
    """Scalar covariance between two encoded fragments (reference path)."""
    return spec.evaluate(a, b)


def gram(spec: Kernel, A: Columns, B: Columns | None = None) -> np.ndarray:
    if B is None:
        return spec.forward(A)[0]
    return spec(A, B)


def pack(spec: Kernel) -> HyperparameterVector:
    bounds = np.asarray(spec.param_bounds(), dtype=float).reshape(-1, 2)
    return HyperparameterVector(
        values=np.asarray(spec.param_values(), dtype=float),
        lower=bounds[:, 0],
        upper=bounds[:, 1],
        names=tuple(spec.param_names()),
    )


def unpack(spec: Kernel, values: HyperparameterVector | Sequence[float]) -> Kernel:
    if isinstance(values, HyperparameterVector):
        values = values.values
    values = np.asarray(values, dtype=float)
    if values.shape != (spec.n_free(),):
        raise KernelError(f"expected {spec.n_free()} hyperparameters, got {values.shape}")
    return spec.with_values(values.tolist())
