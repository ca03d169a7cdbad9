"""Grid energy trading costs and cloud power accounting.

A site consuming P watts against a local harvest of P_h watts buys the
deficit at price_buy and sells the surplus at price_sell. The kinked cost

    G(P) = price_buy * max(P - P_h, 0) - price_sell * max(P_h - P, 0)

equals the convex form psi*|P - P_h| + phi*(P - P_h) exactly when
psi = (price_buy - price_sell)/2 and phi = (price_buy + price_sell)/2,
which is what the solvers minimize (as an epigraph over |.|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TradePrices:
    """Half-difference / half-sum reparameterization of (buy, sell) prices."""

    psi: float
    phi: float

    def __post_init__(self):
        if not self.psi > 0:
            raise ValueError("degenerate prices: buying must cost strictly more than selling pays")
        if self.phi < self.psi:
            raise ValueError("prices imply a negative sell price")

    @classmethod
    def from_prices(cls, price_buy, price_sell):
        if not (0 <= price_sell < price_buy):
            raise ValueError("need 0 <= price_sell < price_buy")
        return cls(psi=(price_buy - price_sell) / 2.0, phi=(price_buy + price_sell) / 2.0)

    @property
    def price_buy(self):
        return self.phi + self.psi

    @property
    def price_sell(self):
        return self.phi - self.psi


def trade_cost(power, harvested, price_buy, price_sell):
    """Net trading cost of consuming `power` against `harvested` watts."""
    if not (0 <= price_sell < price_buy):
        raise ValueError("need 0 <= price_sell < price_buy")
    delta = np.asarray(power, dtype=float) - np.asarray(harvested, dtype=float)
    out = price_buy * np.maximum(delta, 0.0) - price_sell * np.maximum(-delta, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def trade_cost_convex(power, harvested, prices: TradePrices):
    """Convex reformulation psi*|P-Ph| + phi*(P-Ph); identical to trade_cost."""
    delta = np.asarray(power, dtype=float) - np.asarray(harvested, dtype=float)
    out = prices.psi * np.abs(delta) + prices.phi * delta
    return float(out) if np.ndim(out) == 0 else out


def cloud_power(mu_cubed, active, compute_coeff, backhaul_power):
    """Cloud-side consumption: compute load plus one backhaul link per
    active RRH."""
    mu_cubed = np.asarray(mu_cubed, dtype=float)
    active = np.asarray(active, dtype=float)
    if np.any(mu_cubed < 0):
        raise ValueError("cubed service rates must be >= 0")
    return float(compute_coeff * mu_cubed.sum() + backhaul_power * active.sum())
