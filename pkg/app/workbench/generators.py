"""Named generators for the worked markets used throughout the test suite and CLI."""

from fractions import Fraction
from typing import Callable, Dict, Mapping, Optional

from app.core.exception import MarketInputError
from app.core.logger import setup_logger
from app.markets.three_sided import ThreeSidedMarket
from app.markets.types import BipartiteMarket
from app.services.bundling import BundlingMarket
from app.utils.params import load_params
from app.utils.rational import RatLike, format_rat, to_rat
from app.workbench.instances import InstanceFile

params = load_params()
workbench_params = params.get("workbench_params", {})
markets_params = params.get("markets_params", {})

log_file_path = workbench_params.get("log_file_path", "workbench.log")
default_epsilon = markets_params.get("default_epsilon", "1/100")

logger = setup_logger("Generators", log_file_path)


def _rat(options: Mapping[str, object], key: str, default: RatLike) -> Fraction:
    return to_rat(str(options.get(key, default)))


def _int(options: Mapping[str, object], key: str, default: int, low: int = 1) -> int:
    try:
        value = int(options.get(key, default))
    except (TypeError, ValueError):
        raise MarketInputError(f"parameter {key!r} must be an integer")
    if value < low:
        raise MarketInputError(f"parameter {key!r} must be at least {low}, got {value}")
    return value


def no_pure(options: Mapping[str, object]) -> InstanceFile:
    """Three sellers, four buyers: no pure platform equilibrium at alpha = 1/2."""
    values = [
        ["1", "0", "0"],
        ["61/20", "1", "23/20"],
        ["0", "11/10", "1"],
        ["0", "0", "1/20"],
    ]
    market = BipartiteMarket(4, 3, values, frozenset({(0, 0), (1, 1), (2, 2)}))
    return InstanceFile("bipartite", market, "no-pure", "no pure platform equilibrium at alpha = 1/2")


def logn(options: Mapping[str, object]) -> InstanceFile:
    """Homogeneous market with values n + eps, n/2, ..., 1 and no world edges."""
    n = _int(options, "n", 3)
    eps = _rat(options, "eps", default_epsilon)
    values = [Fraction(n) + eps] + [Fraction(n, i) for i in range(2, n + 1)]
    market = BipartiteMarket.homogeneous(values, n)
    return InstanceFile(
        "bipartite", market, "logn", "price of anarchy approaching H_n",
        {"n": str(n), "eps": format_rat(eps)},
    )


def tight_poa(options: Mapping[str, object]) -> InstanceFile:
    """Three world pairs of value 1 and missing pairs of value (2 - a)/(1 - a) - eps."""
    alpha = _rat(options, "alpha", "1/2")
    eps = _rat(options, "eps", "1/1000")
    if not 0 <= alpha < 1:
        raise MarketInputError(f"alpha must lie in [0, 1), got {alpha}")
    high = (2 - alpha) / (1 - alpha) - eps
    values = [
        [1, 0, high],
        [high, 1, 0],
        [0, high, 1],
    ]
    market = BipartiteMarket(3, 3, values, frozenset({(0, 0), (1, 1), (2, 2)}))
    return InstanceFile(
        "bipartite", market, "tight-poa", "tight price of anarchy for fee alpha",
        {"alpha": format_rat(alpha), "eps": format_rat(eps)},
    )


def chain(options: Mapping[str, object]) -> InstanceFile:
    """b_1 values s_1 at 1; b_i values s_(i-1) and s_i at i. No world edges."""
    n = _int(options, "n", 5)
    values = [[Fraction(0)] * n for _ in range(n)]
    values[0][0] = Fraction(1)
    for i in range(1, n):
        values[i][i - 1] = values[i][i] = Fraction(i + 1)
    market = BipartiteMarket(n, n, values)
    return InstanceFile("bipartite", market, "chain", "adding all platform edges loses revenue", {"n": str(n)})


def conv_tight(options: Mapping[str, object]) -> InstanceFile:
    """
    Dummy buyers 0..k-1 value every seller at 1; buyer k+i values the real
    sellers k..2k-1 at 1/(i+1). Dummy sellers 0..k-1 have no world edges.
    """
    k = _int(options, "k", 3)
    values = [[Fraction(1)] * (2 * k) for _ in range(k)]
    for i in range(k):
        values.append([Fraction(0)] * k + [Fraction(1, i + 1)] * k)
    world = {(b, k + s) for b in range(2 * k) for s in range(k)}
    market = BipartiteMarket(2 * k, 2 * k, values, frozenset(world))
    return InstanceFile("bipartite", market, "conv-tight", "welfare-to-revenue conversion is tight", {"k": str(k)})


def swsh4(options: Mapping[str, object]) -> InstanceFile:
    """Homogeneous buyers 10, 9, 3, 1 with one world seller each (s2 shared by b2, b3)."""
    market = BipartiteMarket.homogeneous(["10", "9", "3", "1"], 4, [(0, 0), (1, 1), (2, 1), (3, 2)])
    return InstanceFile("bipartite", market, "swsh4", "cycle and chain decomposition")


def prm2(options: Mapping[str, object]) -> InstanceFile:
    """Two by two market whose revenue-optimal edges lose half the welfare as eps -> 0."""
    eps = _rat(options, "eps", default_epsilon)
    values = [[1, 1], [1, eps]]
    market = BipartiteMarket(2, 2, values, frozenset({(1, 0)}))
    return InstanceFile("bipartite", market, "prm2", "price of revenue maximization near 2", {"eps": format_rat(eps)})


def monopolization(options: Mapping[str, object]) -> InstanceFile:
    """One seller, buyers 1 and 1 + eps, world edge to the value-1 buyer."""
    eps = _rat(options, "eps", default_epsilon)
    market = BipartiteMarket.homogeneous([1, 1 + eps], 1, [(0, 0)])
    return InstanceFile("bipartite", market, "monopolization", "revenue 1 + eps for welfare gain eps", {"eps": format_rat(eps)})


def min_price_poa(options: Mapping[str, object]) -> InstanceFile:
    """Four-by-four market where clearing at minimum prices has unbounded price of anarchy."""
    eps = _rat(options, "eps", default_epsilon)
    H = _rat(options, "H", 100)
    values = [
        [1, eps, 0, 0],
        [3, 1, 0, 0],
        [0, 0, 1, 1],
        [0, 0, H, 1],
    ]
    world = {(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (2, 3)}
    market = BipartiteMarket(4, 4, values, frozenset(world))
    return InstanceFile(
        "bipartite", market, "min-price-poa", "minimum competitive prices can be arbitrarily bad",
        {"eps": format_rat(eps), "H": format_rat(H)},
    )


def tip_bad(options: Mapping[str, object]) -> InstanceFile:
    """One store, buyers valuing it 3 and 10, two couriers with costs (0, 11) and (1, 12)."""
    market = ThreeSidedMarket(
        [["3"], ["10"]],
        [[["0"], ["11"]], [["1"], ["12"]]],
        "store_split",
    )
    return InstanceFile("three_sided", market, "tip-bad", "without-tip equilibria lose welfare")


def no_without_tip(options: Mapping[str, object]) -> InstanceFile:
    """Two buyers, two stores, a single free courier: no without-tip equilibrium."""
    market = ThreeSidedMarket(
        [["4", "2"], ["1", "3"]],
        [[["0", "0"], ["0", "0"]]],
        "store_split",
    )
    return InstanceFile("three_sided", market, "no-without-tip", "no without-tip equilibrium exists")


def market_clearing(options: Mapping[str, object]) -> InstanceFile:
    """Unit values everywhere; every equilibrium loses welfare once kappa > 2."""
    kappa = _rat(options, "kappa", 3)
    if kappa <= 2:
        raise MarketInputError(f"kappa must exceed 2, got {kappa}")
    costs = [
        [[0, kappa], [kappa, Fraction(1, 2)]],
        [[kappa, Fraction(49, 100)], [Fraction(1, 2), kappa]],
    ]
    market = ThreeSidedMarket([[1, 1], [1, 1]], costs)
    return InstanceFile(
        "three_sided", market, "market-clearing", "only equilibria have welfare below optimum",
        {"kappa": format_rat(kappa)},
    )


def bundle4(options: Mapping[str, object]) -> InstanceFile:
    """Four sellers with qualities mu1, 1.1, 2.1, 3.1 and sigma = 1."""
    mu1 = float(options.get("mu1", 0.1))
    sigma = float(options.get("sigma", 1.0))
    market = BundlingMarket((mu1, 1.1, 2.1, 3.1), sigma)
    return InstanceFile(
        "bundling", market, "bundle4", "contiguous optimal bundle",
        {"mu1": repr(mu1), "sigma": repr(sigma)},
    )


GENERATORS: Dict[str, Callable[[Mapping[str, object]], InstanceFile]] = {
    "no-pure": no_pure,
    "logn": logn,
    "tight-poa": tight_poa,
    "chain": chain,
    "conv-tight": conv_tight,
    "swsh4": swsh4,
    "prm2": prm2,
    "monopolization": monopolization,
    "min-price-poa": min_price_poa,
    "tip-bad": tip_bad,
    "no-without-tip": no_without_tip,
    "market-clearing": market_clearing,
    "bundle4": bundle4,
}


def generate(generator_id: str, options: Optional[Mapping[str, object]] = None) -> InstanceFile:
    """
    Build a named instance.

    Args:
        generator_id (str): One of ``GENERATORS``.
        options (Mapping, optional): Generator parameters such as ``n``, ``eps``,
            ``alpha``, ``k`` or ``kappa``; rationals may be given as ``"p/q"``.

    Returns:
        InstanceFile: The generated instance.

    Raises:
        MarketInputError: On an unknown id or an out-of-range parameter.
    """
    if generator_id not in GENERATORS:
        raise MarketInputError(f"unknown generator {generator_id!r}; expected one of {sorted(GENERATORS)}")
    instance = GENERATORS[generator_id](dict(options or {}))
    logger.debug(f"Generated {generator_id} with {dict(instance.params)}")
    return instance
