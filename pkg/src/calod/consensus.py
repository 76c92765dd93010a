"""
Decentralized ADMM averaging of local statistics.

Every node i keeps a primal estimate ``x_i`` and a scaled dual ``alpha_i``
and, per iteration, exchanges one value with its neighbours:

    x_i   <- (rho d_i x_i + rho S_i - alpha_i + f_i) / (1 + 2 rho d_i)
    (broadcast the new x)
    alpha_i <- alpha_i + rho (d_i x_i - S_i')

where ``S_i`` is the neighbour aggregate of the previous broadcast and ``S_i'``
that of the broadcast just made.  The vanilla aggregate is the plain sum; the
robust variant uses :func:`gamma_p`, which discards the ``p`` smallest and
``p`` largest neighbour values.  Byzantine nodes run the honest update on
their true state but broadcast ``x + delta`` with ``delta ~ N(mu_x, sigma_x2)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from calod.topology import Topology, validate_for_trim


class ConsensusError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConsensusConfig:
    """ADMM parameters.

    `variant` is ``"vanilla"`` or ``"robust"``; `p` is the per-side trim
    count and is only used by the robust variant.  When `tol` is set the
    run stops early once no state moves by more than `tol` in one iteration.
    """

    rho: float = 1.0
    max_iters: int = 100
    variant: str = "vanilla"
    p: int = 1
    tol: Optional[float] = None

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.variant not in ("vanilla", "robust"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.p < 0:
            raise ValueError("p must be >= 0")

    @property
    def trim(self) -> Optional[int]:
        return self.p if self.variant == "robust" else None


@dataclass(frozen=True)
class AttackConfig:
    byzantine_ids: tuple[int, ...] = ()
    mu_x: float = 1.5
    sigma_x2: float = 0.1

    def __post_init__(self):
        ids = tuple(sorted(set(int(i) for i in self.byzantine_ids)))
        if any(i < 0 for i in ids):
            raise ValueError("byzantine ids must be non-negative")
        if not self.sigma_x2 >= 0:
            raise ValueError(f"sigma_x2 must be >= 0, got {self.sigma_x2}")
        object.__setattr__(self, "byzantine_ids", ids)


@dataclass
class NodeStates:
    """Per-node ADMM variables, stored as parallel arrays indexed by node."""

    x: np.ndarray
    alpha: np.ndarray
    f_local: np.ndarray

    def copy(self) -> NodeStates:
        return NodeStates(self.x.copy(), self.alpha.copy(), self.f_local.copy())


@dataclass
class ConvergenceTrace:
    """State values ``x_i^k``; row 0 is the initialization."""

    states: np.ndarray
    honest_mask: np.ndarray
    f_local: np.ndarray = field(repr=False)

    @property
    def n_iters(self) -> int:
        return self.states.shape[0] - 1

    @property
    def n_nodes(self) -> int:
        return self.states.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def target(self) -> float:
        return consensus_oracle(self.f_local)

    def honest_deviation(self, k: int = -1) -> float:
        """Largest |x_i - x*| over honest nodes at iteration `k`."""
        return float(np.max(np.abs(self.states[k, self.honest_mask] - self.target)))

    def to_csv(self, fh=None) -> str:
        """Write ``iter,node_id,x,is_byzantine`` rows; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "node_id", "x", "is_byzantine"])
        byz = (~self.honest_mask).astype(int)
        for k, row in enumerate(self.states):
            for i, x in enumerate(row):
                w.writerow([k, i, repr(float(x)), byz[i]])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def consensus_oracle(f_locals: Sequence[float]) -> float:
    """The consensus target: the minimizer of ``sum (x - f_i)^2 / 2``, i.e. the mean."""
    f = np.asarray(f_locals, dtype=float)
    if f.size == 0:
        raise ValueError("consensus_oracle needs at least one value")
    return float(np.mean(f))


def init_states(f_locals: Sequence[float]) -> NodeStates:
    f = np.array(f_locals, dtype=float).ravel()
    if f.size == 0:
        raise ValueError("need at least one node")
    return NodeStates(x=f.copy(), alpha=np.zeros_like(f), f_local=f)


def broadcast_round(x: np.ndarray, attack: Optional[AttackConfig],
                    rng: Optional[np.random.Generator]) -> np.ndarray:
    """Values announced by every node this round.

    Honest nodes announce their state; each Byzantine node adds a fresh
    ``N(mu_x, sigma_x2)`` draw.  One draw per Byzantine per round, seen
    identically by all neighbours.
    """
    announced = np.array(x, dtype=float)
    if attack is None or not attack.byzantine_ids:
        return announced
    ids = np.asarray(attack.byzantine_ids)
    if ids.max() >= announced.size:
        raise ValueError(f"byzantine id {ids.max()} out of range for {announced.size} nodes")
    if attack.sigma_x2 == 0:
        delta = np.full(ids.size, float(attack.mu_x))
    else:
        delta = rng.normal(attack.mu_x, np.sqrt(attack.sigma_x2), size=ids.size)
    announced[ids] += delta
    return announced


def gamma_p(neighbor_values: Iterable[float], p: int) -> float:
    """Trimmed neighbour sum.

    Sorts the values, replaces the ``p`` smallest and ``p`` largest with the
    mean of the remaining ``d - 2p`` and returns the sum of the result,
    which is ``d`` times the trimmed mean.  ``p = 0`` is the plain sum.
    """
    vals = np.asarray(list(neighbor_values), dtype=float)
    d = vals.size
    if p < 0:
        raise ValueError("p must be >= 0")
    if d <= 2 * p:
        raise ValueError(f"trimming p={p} per side needs more than {2 * p} values "
                         f"(every neighbourhood must satisfy |N_i| > 2p), got {d}")
    if p == 0:
        # left-to-right, so the result is the plain sum in the given order
        return float(sum(vals.tolist(), 0.0))
    middle = np.sort(vals, kind="stable")[p:d - p]
    return float(d * np.mean(middle))


def neighbor_sum(top: Topology, values: np.ndarray) -> np.ndarray:
    idx, mask = top.padded_neighbors
    return np.where(mask, values[idx], 0.0).sum(axis=1)


def neighbor_gamma(top: Topology, values: np.ndarray, p: int) -> np.ndarray:
    """:func:`gamma_p` applied to every node's neighbourhood at once."""
    if p == 0:
        return neighbor_sum(top, values)
    report = validate_for_trim(top, p)
    if not report.ok:
        raise ConsensusError(f"nodes {list(report.violating)} have degree <= 2p = {2 * p}")
    idx, mask = top.padded_neighbors
    d = top.degrees
    # padding sorts to the end of every row
    vals = np.sort(np.where(mask, values[idx], np.inf), axis=1, kind="stable")
    cols = np.arange(vals.shape[1])
    keep = (cols >= p) & (cols[None, :] < (d - p)[:, None])
    middle_sum = np.where(keep, vals, 0.0).sum(axis=1)
    return d * (middle_sum / (d - 2 * p))


Announcer = Callable[[np.ndarray], np.ndarray]


def _admm_step(states, top, s_now, rho, aggregate, announce):
    d = top.degrees
    x = (rho * d * states.x + rho * s_now - states.alpha + states.f_local) / (1.0 + 2.0 * rho * d)
    announced_next = announce(x) if announce is not None else x.copy()
    s_next = aggregate(announced_next)
    alpha = states.alpha + rho * (d * x - s_next)
    return NodeStates(x=x, alpha=alpha, f_local=states.f_local), announced_next, s_next


def vanilla_step(states: NodeStates, top: Topology, announced: np.ndarray, rho: float,
                 announce: Optional[Announcer] = None):
    """One ADMM iteration with plain neighbour sums.

    Parameters
    ----------
    states : NodeStates
        Variables at iteration k.
    top : Topology
    announced : ndarray
        Values broadcast at round k (used in the x-update).
    rho : float
    announce : callable, optional
        Maps the new states to the values broadcast at round k+1 (used in the
        dual update and returned for the next call).  Defaults to honest
        broadcasting.

    Returns
    -------
    states : NodeStates
        Variables at iteration k+1.
    announced : ndarray
        Round k+1 broadcast.
    """
    aggregate = lambda v: neighbor_sum(top, v)  # noqa: E731
    new, announced_next, _ = _admm_step(states, top, aggregate(announced), rho, aggregate, announce)
    return new, announced_next


def robust_step(states: NodeStates, top: Topology, announced: np.ndarray, rho: float,
                p: int, announce: Optional[Announcer] = None):
    """Same as :func:`vanilla_step` with every neighbour sum replaced by the trimmed sum."""
    report = validate_for_trim(top, p)
    if not report.ok:
        raise ConsensusError(f"robust ADMM with p={p}: nodes {list(report.violating)} "
                             f"have degree <= {2 * p}")
    aggregate = lambda v: neighbor_gamma(top, v, p)  # noqa: E731
    new, announced_next, _ = _admm_step(states, top, aggregate(announced), rho, aggregate, announce)
    return new, announced_next


def run_consensus(f_locals: Sequence[float], top: Topology,
                  config: ConsensusConfig = ConsensusConfig(),
                  attack: Optional[AttackConfig] = None,
                  rng: Optional[np.random.Generator] = None) -> ConvergenceTrace:
    """Run ADMM from the local statistics and record every iterate.

    Raises
    ------
    ConsensusError
        On a degree violation for the robust variant or if a state becomes
        non-finite.
    """
    states = init_states(f_locals)
    n = states.x.size
    if n != top.n_nodes:
        raise ValueError(f"{n} local statistics for a {top.n_nodes}-node topology")
    if attack is not None and attack.byzantine_ids:
        if max(attack.byzantine_ids) >= n:
            raise ValueError("byzantine id out of range")
        if rng is None and attack.sigma_x2 > 0:
            raise ValueError("a random attack needs an rng")
    p = config.trim
    if p is not None:
        report = validate_for_trim(top, p)
        if not report.ok:
            raise ConsensusError(f"robust ADMM with p={p}: nodes {list(report.violating)} "
                                 f"have degree <= {2 * p}")

    def announce(x):
        return broadcast_round(x, attack, rng)

    honest = np.ones(n, dtype=bool)
    if attack is not None:
        honest[list(attack.byzantine_ids)] = False

    if p is None:
        aggregate = lambda v: neighbor_sum(top, v)  # noqa: E731
    else:
        aggregate = lambda v: neighbor_gamma(top, v, p)  # noqa: E731

    rows = [states.x.copy()]
    # one broadcast per iteration; its aggregate feeds this dual update and the next x-update
    s_now = aggregate(announce(states.x))
    for k in range(1, config.max_iters + 1):
        new, _, s_now = _admm_step(states, top, s_now, config.rho, aggregate, announce)
        bad = ~(np.isfinite(new.x) & np.isfinite(new.alpha))
        if bad.any():
            raise ConsensusError(f"non-finite state at iteration {k}, node {int(np.flatnonzero(bad)[0])}")
        rows.append(new.x.copy())
        moved = np.max(np.abs(new.x - states.x))
        states = new
        if config.tol is not None and moved < config.tol:
            break
    return ConvergenceTrace(states=np.array(rows), honest_mask=honest, f_local=states.f_local)
