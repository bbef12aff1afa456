"""Hodges indifference prices for a defaultable claim.

Prices a zero-recovery bond: buy price (1/gamma) ln(J(0,0)/J(0,xi)), selling
price as the negated buy price of the negated claim, and per-k price
approximations along the shared k schedule.  With zero risk premium the buy
price has the certainty-equivalent closed form -(1/gamma) ln E[exp(-gamma xi)].
"""
import json
import math

from defaultbsde import (DefaultIndicator, MarketModel, Quadrature,
                         RegimeCoefficients, SpaceGrid, TimeGrid,
                         indifference_price, wealth_scaling)

model = MarketModel(grid=TimeGrid(1.0, 100),
                    coeffs=RegimeCoefficients.constant(mu=0.0, sigma=0.2,
                                                       beta=0.0, lam=0.1),
                    gamma=1.0)
claim = DefaultIndicator(1.0, 0.0)
space = SpaceGrid.for_model(model, 80)
quad = Quadrature.gauss_hermite(7)

rep = indifference_price(model, claim, space, quad, k0=0.25, tol_rel=1e-6)
closed_buy = -math.log(math.exp(-1.1) + 1 - math.exp(-0.1))
closed_sell = math.log(math.exp(0.9) + 1 - math.exp(-0.1))
print(f"buy price  p  = {rep.buy_price:.6f}  (closed form {closed_buy:.6f})")
print(f"sell price p* = {rep.sell_price:.6f}  (closed form {closed_sell:.6f})")
print("per-k approximations:")
for k, p in rep.per_k:
    print(f"  k={k:5.2f}  p^k={p:.10f}")

# initial wealth scales both legs and cancels in the price
v = wealth_scaling(2.0, -rep.J0_claim, rep.gamma)
print(f"\nvalue with initial wealth 2.0: {v:.6f} "
      "(price unchanged, the factor cancels in the ratio)")
print("\nwire format:")
print(json.dumps(rep.to_json_dict(), indent=2)[:400], "...")
