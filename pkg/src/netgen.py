"""
Interbank network generation.
Grows directed scale-free loan graphs, assigns power-law loan values calibrated
to a target concentration, and labels banks as shadow or regulated under the
random, asset-correlated and layered mixing structures.
"""

import math
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Union

import numpy as np
from scipy import stats

try:
    from .errors import InvalidParameterError, UnreachableConcentrationError
except ImportError:
    # Fallback for direct execution
    from errors import InvalidParameterError, UnreachableConcentrationError

logger = logging.getLogger(__name__)

Seed = Union[None, int, np.random.SeedSequence]

# Bisection bracket and step count for the weight exponent r
EXPONENT_CAP = 10.0
BISECTION_STEPS = 60
TOP_BANKS = 5


class BankClass(str, Enum):
    SHADOW = "S"
    REGULATED = "R"


class Layer(int, Enum):
    NONE = 0
    SHADOW = 1
    REGULATED = 2


def round_half_up(value: float) -> int:
    """Round to the nearest integer, halves going up (absorbs float noise like 0.1*5)."""
    return int(math.floor(value + 0.5 + 1e-9))


def as_seed_sequence(seed: Seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


@dataclass(frozen=True)
class Topology:
    """
    Directed interbank loan graph.

    adjacency[n, n2] is True when bank n2 borrows from bank n
    (n is the creditor, n2 the debtor).
    """
    adjacency: np.ndarray
    shadow: np.ndarray
    layer: np.ndarray

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray) -> "Topology":
        adjacency = np.asarray(adjacency, dtype=bool).copy()
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise InvalidParameterError(f"Adjacency must be square, got shape {adjacency.shape}")
        np.fill_diagonal(adjacency, False)
        n = adjacency.shape[0]
        return cls(
            adjacency=adjacency,
            shadow=np.zeros(n, dtype=bool),
            layer=np.full(n, Layer.NONE.value, dtype=np.int8),
        )

    @property
    def n_banks(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())

    @property
    def denseness(self) -> float:
        n = self.n_banks
        return self.n_edges / (n * (n - 1)) if n > 1 else 0.0

    @property
    def out_degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def in_degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=0)

    @property
    def bank_class(self) -> List[BankClass]:
        return [BankClass.SHADOW if s else BankClass.REGULATED for s in self.shadow]

    @property
    def n_shadow(self) -> int:
        return int(self.shadow.sum())

    def with_classes(self, shadow: np.ndarray) -> "Topology":
        shadow = np.asarray(shadow, dtype=bool)
        if shadow.shape != (self.n_banks,):
            raise InvalidParameterError(f"Class mask must have length {self.n_banks}")
        return replace(self, shadow=shadow.copy())


@dataclass(frozen=True)
class WeightedNetwork:
    """Topology plus loan values; weights[n, n2] is the loan from n to n2."""
    topology: Topology
    weights: np.ndarray
    exponent: float
    realized_concentration: float

    @property
    def n_banks(self) -> int:
        return self.topology.n_banks

    @property
    def loans(self) -> np.ndarray:
        """Interbank loans made by each bank (l_n)."""
        return self.weights.sum(axis=1)

    @property
    def borrowings(self) -> np.ndarray:
        """Interbank borrowings of each bank (b_n)."""
        return self.weights.sum(axis=0)

    def relabel(self, topology: Topology) -> "WeightedNetwork":
        if not np.array_equal(topology.adjacency, self.topology.adjacency):
            raise InvalidParameterError("Relabelled topology must keep the same edges")
        return replace(self, topology=topology)

    def scaled(self, factor: float) -> "WeightedNetwork":
        if factor <= 0:
            raise InvalidParameterError(f"Scale factor must be positive, got {factor}")
        return replace(self, weights=self.weights * factor)


def _check_denseness(denseness: float):
    if not 0 < denseness <= 1:
        raise InvalidParameterError(f"Denseness must lie in (0, 1], got {denseness}")


def _adjust_edge_count(adjacency: np.ndarray, target: int, rng: np.random.Generator):
    """Randomly drop or add edges until the graph has exactly `target` edges."""
    current = int(adjacency.sum())
    if current > target:
        edges = np.flatnonzero(adjacency)
        drop = rng.choice(edges, size=current - target, replace=False)
        adjacency.flat[drop] = False
    elif current < target:
        free = ~adjacency
        np.fill_diagonal(free, False)
        candidates = np.flatnonzero(free)
        add = rng.choice(candidates, size=target - current, replace=False)
        adjacency.flat[add] = True


def attachment_count(n_banks: int, denseness: float) -> int:
    """Loans lent and borrowed by each new bank during growth: ceil(denseness*(N-1))."""
    return math.ceil(denseness * (n_banks - 1) - 1e-9)


def generate_scale_free(n_banks: int, denseness: float, seed: Seed = None) -> Topology:
    """
    Grow a directed scale-free topology by preferential attachment.

    Starts from a clique of max(2, m) banks; every new bank lends to m existing
    banks and, independently, borrows from m existing banks, each picked with
    probability proportional to total degree + 1, where m = ceil(denseness*(N-1)).
    Growth overshoots the target by about a factor two; the edge count is then
    trimmed or topped up to round(denseness*N*(N-1)).
    """
    if n_banks < 2:
        raise InvalidParameterError(f"Need at least 2 banks, got {n_banks}")
    _check_denseness(denseness)

    rng = np.random.default_rng(seed)
    m = attachment_count(n_banks, denseness)
    if m < 1:
        raise InvalidParameterError(f"Denseness {denseness} yields no edges for N={n_banks}")
    m0 = min(n_banks, max(2, m))

    adjacency = np.zeros((n_banks, n_banks), dtype=bool)
    adjacency[:m0, :m0] = True
    np.fill_diagonal(adjacency, False)
    degree = adjacency.sum(axis=0) + adjacency.sum(axis=1)

    for new in range(m0, n_banks):
        attraction = degree[:new] + 1.0
        p = attraction / attraction.sum()
        k = min(m, new)
        debtors = rng.choice(new, size=k, replace=False, p=p)
        creditors = rng.choice(new, size=k, replace=False, p=p)
        adjacency[new, debtors] = True
        adjacency[creditors, new] = True
        degree[debtors] += 1
        degree[creditors] += 1
        degree[new] += 2 * k

    target = round_half_up(denseness * n_banks * (n_banks - 1))
    _adjust_edge_count(adjacency, target, rng)

    topology = Topology.from_adjacency(adjacency)
    logger.debug(f"Generated scale-free topology: N={n_banks}, edges={topology.n_edges}, m={m}")
    return topology


def _top_share(loans: np.ndarray) -> float:
    total = loans.sum()
    if total <= 0:
        return 0.0
    if loans.size <= TOP_BANKS:
        return 1.0
    top = np.partition(loans, loans.size - TOP_BANKS)[-TOP_BANKS:]
    return float(top.sum() / total)


def concentration(weights: np.ndarray) -> float:
    """Share of total interbank lending held by the five biggest lenders (all banks when N <= 5)."""
    return _top_share(np.asarray(weights).sum(axis=1))


class _EdgeWeighting:
    """Precomputed edge list and log-degree products for repeated weight evaluation."""

    def __init__(self, topology: Topology):
        self.n_banks = topology.n_banks
        self.rows, self.cols = np.nonzero(topology.adjacency)
        k_in = np.maximum(topology.in_degree, 1)
        k_out = np.maximum(topology.out_degree, 1)
        self.log_product = np.log(k_in[self.rows]) + np.log(k_out[self.cols])

    def edge_weights(self, exponent: float) -> np.ndarray:
        log_w = exponent * self.log_product
        w = np.exp(log_w - log_w.max())
        return w / w.sum()

    def concentration(self, exponent: float) -> float:
        loans = np.bincount(self.rows, weights=self.edge_weights(exponent), minlength=self.n_banks)
        return _top_share(loans)

    def matrix(self, exponent: float) -> np.ndarray:
        weights = np.zeros((self.n_banks, self.n_banks))
        weights[self.rows, self.cols] = self.edge_weights(exponent)
        return weights


def assign_weights(
    topology: Topology,
    target_concentration: float,
    tolerance: float = 0.02,
    exponent: Optional[float] = None,
    strict: bool = True,
) -> WeightedNetwork:
    """
    Set w[n, n2] proportional to (k_in[n] * k_out[n2])**r, normalised to sum 1.

    r is found by bisection on [0, EXPONENT_CAP] so that the top-5 loan share
    lands within `tolerance` of the target. Passing `exponent` skips the search.
    With strict=False an unreachable target falls back to the nearest end of the
    achievable range instead of raising.
    """
    if topology.n_edges < 1:
        raise InvalidParameterError("Topology has no edges to weight")
    if not 0 < target_concentration <= 1:
        raise InvalidParameterError(f"Target concentration must lie in (0, 1], got {target_concentration}")

    weighting = _EdgeWeighting(topology)

    if exponent is not None:
        if exponent < 0:
            raise InvalidParameterError(f"Weight exponent must be >= 0, got {exponent}")
        return WeightedNetwork(topology, weighting.matrix(exponent), float(exponent),
                               weighting.concentration(exponent))

    lowest = weighting.concentration(0.0)
    if target_concentration <= lowest + tolerance:
        if target_concentration < lowest - tolerance:
            if strict:
                raise UnreachableConcentrationError(
                    target_concentration, lowest, weighting.concentration(EXPONENT_CAP))
            logger.warning(f"Concentration {target_concentration} below uniform-weight level {lowest:.4f}; using r=0")
        return WeightedNetwork(topology, weighting.matrix(0.0), 0.0, lowest)

    highest = weighting.concentration(EXPONENT_CAP)
    if highest < target_concentration - tolerance:
        if strict:
            raise UnreachableConcentrationError(target_concentration, lowest, highest)
        logger.warning(f"Concentration {target_concentration} above level {highest:.4f} at r cap; using r={EXPONENT_CAP}")
        return WeightedNetwork(topology, weighting.matrix(EXPONENT_CAP), EXPONENT_CAP, highest)

    lo, hi = 0.0, EXPONENT_CAP
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if weighting.concentration(mid) < target_concentration:
            lo = mid
        else:
            hi = mid

    lo_gap = abs(weighting.concentration(lo) - target_concentration)
    hi_gap = abs(weighting.concentration(hi) - target_concentration)
    exponent = lo if lo_gap <= hi_gap else hi
    realized = weighting.concentration(exponent)
    if abs(realized - target_concentration) > tolerance:
        if strict:
            raise UnreachableConcentrationError(target_concentration, lowest, highest)
        logger.warning(f"Concentration search stopped at {realized:.4f} for target {target_concentration}")

    logger.debug(f"Weight exponent r={exponent:.6f} gives concentration {realized:.4f}")
    return WeightedNetwork(topology, weighting.matrix(exponent), float(exponent), realized)


def mix_random(topology: Topology, shadow_fraction: float, seed: Seed = None) -> Topology:
    """
    Label round(f*N) banks, drawn uniformly, as shadow banks; the rest are regulated.

    The shadow set is a prefix of one permutation of the seed, so a larger f
    only adds shadow banks.
    """
    if not 0 <= shadow_fraction <= 1:
        raise InvalidParameterError(f"Shadow fraction must lie in [0, 1], got {shadow_fraction}")
    rng = np.random.default_rng(seed)
    n = topology.n_banks
    n_shadow = min(n, round_half_up(shadow_fraction * n))
    shadow = np.zeros(n, dtype=bool)
    shadow[rng.permutation(n)[:n_shadow]] = True
    return topology.with_classes(shadow)


def mix_asset_correlated(
    network: WeightedNetwork,
    shadow_fraction: float,
    assets: Optional[np.ndarray] = None,
    params=None,
) -> Topology:
    """
    Label the ceil((1-f)*N) banks with the largest total assets as regulated.

    Assets default to the class-independent totals of balsheet.total_assets;
    ties rank the lower bank index as larger.
    """
    if not 0 <= shadow_fraction <= 1:
        raise InvalidParameterError(f"Shadow fraction must lie in [0, 1], got {shadow_fraction}")
    if assets is None:
        try:
            from .balsheet import SystemParams, total_assets
        except ImportError:
            from balsheet import SystemParams, total_assets
        assets = total_assets(network, params or SystemParams())

    assets = np.asarray(assets, dtype=float)
    n = network.n_banks
    if assets.shape != (n,):
        raise InvalidParameterError(f"Expected {n} asset values, got shape {assets.shape}")

    n_regulated = min(n, math.ceil((1 - shadow_fraction) * n - 1e-9))
    ranking = np.lexsort((np.arange(n), -assets))
    shadow = np.ones(n, dtype=bool)
    shadow[ranking[:n_regulated]] = False
    return network.topology.with_classes(shadow)


def combine_layers(shadow_layer: Topology, regulated_layer: Topology) -> Topology:
    """Block-diagonal union: shadow layer banks first, regulated layer banks after."""
    n_s, n_r = shadow_layer.n_banks, regulated_layer.n_banks
    n = n_s + n_r
    adjacency = np.zeros((n, n), dtype=bool)
    adjacency[:n_s, :n_s] = shadow_layer.adjacency
    adjacency[n_s:, n_s:] = regulated_layer.adjacency
    shadow = np.zeros(n, dtype=bool)
    shadow[:n_s] = True
    layer = np.full(n, Layer.REGULATED.value, dtype=np.int8)
    layer[:n_s] = Layer.SHADOW.value
    return Topology(adjacency=adjacency, shadow=shadow, layer=layer)


def build_layered(
    n_per_layer: int,
    denseness: float,
    relative_coupling: float,
    target_concentration: float,
    seed: Seed = None,
    tolerance: float = 0.02,
    strict: bool = True,
) -> WeightedNetwork:
    """
    Two independent scale-free layers (shadow, regulated) joined by
    round(q*denseness*2*n^2) inter-layer loans between uniformly chosen
    ordered cross-layer pairs; weights are assigned over the combined graph.
    """
    if n_per_layer < 2:
        raise InvalidParameterError(f"Need at least 2 banks per layer, got {n_per_layer}")
    if not 0 <= relative_coupling <= 1:
        raise InvalidParameterError(f"Relative coupling q must lie in [0, 1], got {relative_coupling}")
    _check_denseness(denseness)

    shadow_seed, regulated_seed, coupling_seed = as_seed_sequence(seed).spawn(3)
    combined = combine_layers(
        generate_scale_free(n_per_layer, denseness, shadow_seed),
        generate_scale_free(n_per_layer, denseness, regulated_seed),
    )

    n = n_per_layer
    cross_pairs = 2 * n * n
    n_inter = min(cross_pairs, round_half_up(relative_coupling * denseness * cross_pairs))
    if n_inter:
        rng = np.random.default_rng(coupling_seed)
        picks = rng.choice(cross_pairs, size=n_inter, replace=False)
        upper = picks < n * n
        local = np.where(upper, picks, picks - n * n)
        i, j = np.divmod(local, n)
        # shadow -> regulated for the first n^2 pairs, regulated -> shadow after
        creditors = np.where(upper, i, n + i)
        debtors = np.where(upper, n + j, j)
        adjacency = combined.adjacency.copy()
        adjacency[creditors, debtors] = True
        combined = replace(combined, adjacency=adjacency)

    logger.debug(f"Layered topology: 2x{n} banks, {n_inter} inter-layer loans (q={relative_coupling})")
    return assign_weights(combined, target_concentration, tolerance, strict=strict)


def inter_layer_edges(topology: Topology) -> int:
    """Number of loans whose creditor and debtor sit in different layers."""
    layer = topology.layer
    crossing = layer[:, None] != layer[None, :]
    return int((topology.adjacency & crossing).sum())


def tail_exponent(degrees: np.ndarray) -> float:
    """
    Estimate alpha of P(k) ~ k**-alpha from the log-log empirical CCDF above
    the median degree (least squares; CCDF slope is 1 - alpha).
    """
    degrees = np.asarray(degrees, dtype=float)
    tail = np.sort(degrees[degrees >= np.median(degrees)])
    tail = tail[tail > 0]
    values, first = np.unique(tail, return_index=True)
    if values.size < 2:
        raise InvalidParameterError("Need at least two distinct tail degrees to fit an exponent")
    ccdf = 1.0 - first / tail.size
    fit = stats.linregress(np.log(values), np.log(ccdf))
    return float(1.0 - fit.slope)
