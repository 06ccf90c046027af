"""Planning domains and the Gaussian-mixture toy problem."""

from .binpack import BinPackDomain, BinPackState
from .reconfig import ReconfigDomain, ReconfigState


def get_domain(tag):
    if tag == "binpack":
        return BinPackDomain()
    if tag == "reconfig":
        return ReconfigDomain()
    raise ValueError(f"unknown planning domain {tag!r}")


__all__ = ["BinPackDomain", "BinPackState", "ReconfigDomain", "ReconfigState", "get_domain"]
