import logging

from asymlab.errors import InvalidParams
from asymlab.operators.flux import Flux
from asymlab.operators.fluxes.combinations import BlendFlux, CallableFlux, ScaledFlux
from asymlab.operators.fluxes.minimal_graph import MinimalGraphFlux
from asymlab.operators.fluxes.p_laplacian import PLaplacianFlux
from asymlab.operators.fluxes.saturating import FORMULA_TABLE

logger = logging.getLogger(__name__)

KINDS = ("pLaplacian", "minimalGraph", "custom", "blend", "scaled")


def build_flux(kind, params=None):
    """
    Build a Flux object from an operator kind and its parameters.

    Args:
        kind (str): One of `KINDS`.
        params (dict): Kind specific parameters. Custom operators either name a
            `formula` of the formula table or supply callables and constants.
            Blends take `first`/`second` as nested `{kind: ..., ...}` mappings
            (or Flux objects) and a weight `t`.

    Returns:
        Flux: the flux implementation.
    """
    params = dict(params or {})

    if kind == "pLaplacian":
        return PLaplacianFlux(params)

    elif kind == "minimalGraph":
        return MinimalGraphFlux(params)

    elif kind == "custom":
        formula = params.get("formula")
        if formula is not None:
            if formula not in FORMULA_TABLE:
                raise InvalidParams(
                    f"unknown custom formula `{formula}` (known: {', '.join(sorted(FORMULA_TABLE))})")
            return FORMULA_TABLE[formula](params)
        return CallableFlux(params)

    elif kind == "blend":
        params["first"] = _nested(params.get("first"))
        params["second"] = _nested(params.get("second"))
        return BlendFlux(params)

    elif kind == "scaled":
        params["base"] = _nested(params.get("base"))
        return ScaledFlux(params)

    logger.warning(f"🔴 flux_loader >> operator kind ** {kind} ** has not been implemented")
    raise InvalidParams(f"unknown operator kind `{kind}` (known: {', '.join(KINDS)})")


def _nested(conf):
    if isinstance(conf, Flux):
        return conf
    if not isinstance(conf, dict) or "kind" not in conf:
        raise InvalidParams(f"nested operator must be a mapping with a `kind` (got {conf!r})")
    conf = dict(conf)
    return build_flux(conf.pop("kind"), conf)
