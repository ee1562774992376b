"""Synthetic two-domain data from structural causal models.

The domain indicator only enters through the cause mechanism; the label and
effect mechanisms are shared by both domains. Every generator is a pure
function of its configuration and seed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from semigen.data import CLASSIFICATION, REGRESSION, DomainDataset, Sample

ROLES = ("cause", "label", "effect", "domain", "hidden")


def _streams(seed, k):
    """``k`` independent generators derived from one seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(k)]


def _check_sizes(n_S, n_T, n_test):
    if n_S < 1:
        raise ValueError("n_S must be at least 1")
    if n_T < 0:
        raise ValueError("n_T must be non-negative")
    if n_test < 1:
        raise ValueError("n_test must be at least 1")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class ClassScmConfig:
    """Gaussian cause shifted to ``+-mu_C``, logistic label, Gaussian effect."""

    mu_C: float = -1.0
    m: float = 0.0
    mu_0: float = -0.5
    mu_1: float = 0.5
    allow_equal_means: bool = False

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.mu_C, self.m, self.mu_0, self.mu_1)):
            raise ValueError("ClassScmConfig values must be finite")
        if self.mu_0 == self.mu_1 and not self.allow_equal_means:
            raise ValueError("mu_0 == mu_1 makes x_E uninformative; set allow_equal_means")

    def cause_mean(self, domain: int) -> float:
        return self.mu_C if domain == 0 else -self.mu_C

    def density_ratio(self, x_c):
        """Target over source density of the cause; see ``known_importance_weight``."""
        return known_importance_weight(self, x_c)


def known_importance_weight(cfg: ClassScmConfig, x_c):
    """Exact ``p(x_C | D=1) / p(x_C | D=0)`` for the classification SCM.

    The two unit-variance Gaussians centred at ``-mu_C`` and ``mu_C`` give
    ``exp(-2 mu_C x_C)``.
    """
    x = np.asarray(x_c, dtype=float)
    w = np.exp(-2.0 * cfg.mu_C * x)
    return float(w) if w.ndim == 0 else w


def _class_rows(cfg: ClassScmConfig, domain, n, rng):
    xc = cfg.cause_mean(domain) + rng.standard_normal(n)
    y = (rng.random(n) <= _sigmoid(xc - cfg.m)).astype(float)
    xe = np.where(y == 1.0, cfg.mu_1, cfg.mu_0) + rng.standard_normal(n)
    return Sample(xc, xe, y)


def gen_classification(cfg: ClassScmConfig, n_S: int, n_T: int, n_test: int, seed):
    """Draw source (D=0), unlabelled target and labelled target test rows.

    Returns ``(DomainDataset, test_sample)``.
    """
    _check_sizes(n_S, n_T, n_test)
    r_s, r_t, r_test = _streams(seed, 3)
    source = _class_rows(cfg, 0, n_S, r_s)
    target = _class_rows(cfg, 1, n_T, r_t).unlabelled()
    test = _class_rows(cfg, 1, n_test, r_test)
    return DomainDataset(source, target, CLASSIFICATION), test


@dataclass(frozen=True)
class RegrScmConfig:
    """Linear-Gaussian chain ``x_C -> y -> x_E`` with a Gaussian cause per domain.

    ``cause_source`` and ``cause_target`` are ``(mean, std)`` pairs.
    """

    a: float = 0.0
    b: float = 1.0
    c: float = 0.0
    d: float = 1.0
    sigma_Y: float = 1.0
    sigma_E: float = 1.0
    cause_source: tuple[float, float] = (0.0, 1.0)
    cause_target: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d, self.sigma_Y, self.sigma_E, *self.cause_source, *self.cause_target)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("RegrScmConfig values must be finite")
        if self.sigma_Y <= 0 or self.sigma_E <= 0:
            raise ValueError("sigma_Y and sigma_E must be positive")
        if self.cause_source[1] <= 0 or self.cause_target[1] <= 0:
            raise ValueError("cause standard deviations must be positive")

    def density_ratio(self, x_c):
        x = np.asarray(x_c, dtype=float)
        (ms, ss), (mt, st) = self.cause_source, self.cause_target
        lr = math.log(ss / st) - 0.5 * ((x - mt) / st) ** 2 + 0.5 * ((x - ms) / ss) ** 2
        w = np.exp(lr)
        return float(w) if w.ndim == 0 else w


def _regr_rows(cfg: RegrScmConfig, domain, n, rng):
    mean, std = cfg.cause_source if domain == 0 else cfg.cause_target
    xc = mean + std * rng.standard_normal(n)
    y = cfg.a + cfg.b * xc + cfg.sigma_Y * rng.standard_normal(n)
    xe = cfg.c + cfg.d * y + cfg.sigma_E * rng.standard_normal(n)
    return Sample(xc, xe, y)


def gen_regression(cfg: RegrScmConfig, n_S: int, n_T: int, n_test: int, seed):
    _check_sizes(n_S, n_T, n_test)
    r_s, r_t, r_test = _streams(seed, 3)
    source = _regr_rows(cfg, 0, n_S, r_s)
    target = _regr_rows(cfg, 1, n_T, r_t).unlabelled()
    test = _regr_rows(cfg, 1, n_test, r_test)
    return DomainDataset(source, target, REGRESSION), test


# -- binary Bayes nets -------------------------------------------------------


@dataclass
class BayesNetConfig:
    """Binary Bayes net with node roles.

    ``nodes`` holds ``(name, parents)`` in declaration order; ``cpt[name]``
    maps each parent bit tuple to ``p(name = 1)``. The domain node is clamped
    during sampling, so its own table may be omitted. Nodes with role
    ``hidden`` are sampled but not returned.
    """

    nodes: list[tuple[str, tuple[str, ...]]]
    cpt: dict[str, dict[tuple[int, ...], float]]
    roles: dict[str, str]
    order: list[str] = field(init=False)

    def __post_init__(self):
        names = [n for n, _ in self.nodes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate node names")
        parents = dict(self.nodes)
        for n, ps in self.nodes:
            for p in ps:
                if p not in parents:
                    raise ValueError(f"node {n!r} has undeclared parent {p!r}")
        for n in names:
            if n not in self.roles:
                raise ValueError(f"node {n!r} has no role")
            if self.roles[n] not in ROLES:
                raise ValueError(f"node {n!r} has unknown role {self.roles[n]!r}")
        for n in self.roles:
            if n not in parents:
                raise ValueError(f"role given for unknown node {n!r}")
        for role in ("label", "domain"):
            k = sum(r == role for r in self.roles.values())
            if k != 1:
                raise ValueError(f"need exactly one {role} node, found {k}")
        if not self.cause_nodes or not self.effect_nodes:
            raise ValueError("need at least one cause and one effect node")
        dom = self.domain_node
        if parents[dom]:
            raise ValueError("the domain node must not have parents")
        for n in self.effect_nodes:
            if dom in parents[n]:
                raise ValueError(f"domain node may not be a parent of effect node {n!r}")
        self.order = _topological_order(self.nodes)
        for n, ps in self.nodes:
            if n == dom:
                continue
            table = self.cpt.get(n, {})
            expected = set(itertools.product((0, 1), repeat=len(ps)))
            missing = expected - set(table)
            if missing:
                raise ValueError(f"missing CPT entries for {n!r}: {sorted(missing)}")
            extra = set(table) - expected
            if extra:
                raise ValueError(f"CPT entries for {n!r} do not match its parents: {sorted(extra)}")
            for p in table.values():
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"probability {p} for {n!r} outside [0, 1]")

    def _role(self, role):
        return [n for n, _ in self.nodes if self.roles[n] == role]

    @property
    def cause_nodes(self):
        return self._role("cause")

    @property
    def effect_nodes(self):
        return self._role("effect")

    @property
    def label_node(self):
        return self._role("label")[0]

    @property
    def domain_node(self):
        return self._role("domain")[0]

    @property
    def parents(self):
        return dict(self.nodes)

    def _table(self, name, parent_values):
        """Vectorised lookup of ``p(name=1)`` for rows of parent bits."""
        ps = self.parents[name]
        tab = np.empty(2 ** len(ps))
        for bits, p in self.cpt[name].items():
            tab[sum(b << k for k, b in enumerate(bits))] = p
        idx = np.zeros(parent_values.shape[0], dtype=np.int64)
        for k in range(len(ps)):
            idx |= parent_values[:, k].astype(np.int64) << k
        return tab[idx]

    def exact_joint(self, domain_value: int) -> dict[tuple[int, ...], float]:
        """Probability of every assignment, keyed by bits in ``order``.

        Enumerates ``2**n`` assignments, so only for small nets.
        """
        if len(self.order) > 20:
            raise ValueError("too many nodes to enumerate")
        pos = {n: i for i, n in enumerate(self.order)}
        out = {}
        for bits in itertools.product((0, 1), repeat=len(self.order)):
            if bits[pos[self.domain_node]] != domain_value:
                continue
            prob = 1.0
            for n in self.order:
                if n == self.domain_node:
                    continue
                p1 = self.cpt[n][tuple(bits[pos[p]] for p in self.parents[n])]
                prob *= p1 if bits[pos[n]] else 1.0 - p1
            out[bits] = prob
        return out

    def cause_marginal(self, domain_value: int) -> dict[tuple[int, ...], float]:
        """Exact distribution of the cause bits (in declaration order)."""
        pos = {n: i for i, n in enumerate(self.order)}
        cols = [pos[n] for n in self.cause_nodes]
        out: dict[tuple[int, ...], float] = {}
        for bits, p in self.exact_joint(domain_value).items():
            key = tuple(bits[c] for c in cols)
            out[key] = out.get(key, 0.0) + p
        return out

    def density_ratio(self, x_c):
        """``P(x_C | D=1) / P(x_C | D=0)`` by enumeration, row-wise."""
        src, tgt = self.cause_marginal(0), self.cause_marginal(1)
        rows = np.atleast_2d(np.asarray(x_c, dtype=float)).astype(int)
        return np.array([tgt[tuple(r)] / src[tuple(r)] for r in rows])


def _topological_order(nodes):
    parents = {n: set(ps) for n, ps in nodes}
    order, done = [], set()
    remaining = [n for n, _ in nodes]
    while remaining:
        ready = [n for n in remaining if parents[n] <= done]
        if not ready:
            raise ValueError(f"graph has a cycle among {sorted(remaining)}")
        for n in ready:
            order.append(n)
            done.add(n)
        remaining = [n for n in remaining if n not in done]
    return order


def parse_bayesnet(text: str) -> BayesNetConfig:
    """Parse the text format.

    CPT rows look like ``node | parent1=0,parent2=1 | 0.35`` (root nodes leave
    the middle field empty) and roles like ``role node = cause``. Blank lines
    and ``#`` comments are ignored. Node order is order of first mention.
    """
    declared: list[str] = []
    parents: dict[str, tuple[str, ...]] = {}
    cpt: dict[str, dict[tuple[int, ...], float]] = {}
    roles: dict[str, str] = {}

    def declare(name):
        if name not in declared:
            declared.append(name)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("role ") and "|" not in line:
            name, sep, role = line[5:].partition("=")
            if not sep:
                raise ValueError(f"line {lineno}: expected 'role <node> = <role>'")
            name, role = name.strip(), role.strip()
            if name in roles:
                raise ValueError(f"line {lineno}: role of {name!r} given twice")
            roles[name] = role
            declare(name)
            continue
        fields = [f.strip() for f in line.split("|")]
        if len(fields) != 3:
            raise ValueError(f"line {lineno}: expected 'node | parents | p'")
        name, assign, prob = fields
        declare(name)
        names, bits = [], []
        if assign:
            for item in assign.split(","):
                pname, sep, val = item.partition("=")
                if not sep or val.strip() not in ("0", "1"):
                    raise ValueError(f"line {lineno}: bad parent assignment {item!r}")
                names.append(pname.strip())
                bits.append(int(val))
        names_t = tuple(names)
        if name in parents and parents[name] != names_t:
            raise ValueError(f"line {lineno}: parents of {name!r} differ from an earlier row")
        parents[name] = names_t
        try:
            p = float(prob)
        except ValueError:
            raise ValueError(f"line {lineno}: bad probability {prob!r}") from None
        table = cpt.setdefault(name, {})
        key = tuple(bits)
        if key in table:
            raise ValueError(f"line {lineno}: duplicate CPT entry for {name!r} {key}")
        table[key] = p
    for ps in list(parents.values()):
        for p in ps:
            declare(p)
    nodes = [(n, parents.get(n, ())) for n in declared]
    return BayesNetConfig(nodes, cpt, roles)


def load_bayesnet(path) -> BayesNetConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_bayesnet(fh.read())


def sample_bayesnet_nodes(cfg: BayesNetConfig, domain_value: int, n: int, seed) -> dict[str, np.ndarray]:
    """Ancestral sample of every node with the domain node clamped."""
    if domain_value not in (0, 1):
        raise ValueError("domain_value must be 0 or 1")
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    values: dict[str, np.ndarray] = {}
    for name in cfg.order:
        if name == cfg.domain_node:
            values[name] = np.full(n, domain_value, dtype=np.int8)
            continue
        ps = cfg.parents[name]
        pv = np.stack([values[p] for p in ps], axis=1) if ps else np.zeros((n, 0), dtype=np.int8)
        p1 = cfg._table(name, pv)
        values[name] = (rng.random(n) < p1).astype(np.int8)
    return values


def gen_bayesnet(cfg: BayesNetConfig, domain_value: int, n: int, seed) -> Sample:
    """Labelled rows ``(x_C, y, x_E)``; cause and effect bits follow
    declaration order."""
    v = sample_bayesnet_nodes(cfg, domain_value, n, seed)
    xc = np.stack([v[c] for c in cfg.cause_nodes], axis=1).astype(float)
    xe = np.stack([v[e] for e in cfg.effect_nodes], axis=1).astype(float)
    return Sample(xc, xe, v[cfg.label_node].astype(float))


def gen_bayesnet_dataset(cfg: BayesNetConfig, n_S: int, n_T: int, n_test: int, seed):
    _check_sizes(n_S, n_T, n_test)
    r_s, r_t, r_test = _streams(seed, 3)
    source = gen_bayesnet(cfg, 0, n_S, r_s)
    target = gen_bayesnet(cfg, 1, n_T, r_t).unlabelled()
    test = gen_bayesnet(cfg, 1, n_test, r_test)
    return DomainDataset(source, target, CLASSIFICATION), test
