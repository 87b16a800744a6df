"""Calibration harness for the staircase certificate case.

For each candidate parameter set this script checks the node-level
certificate identity, predicts the sweep minima through the collapsed
one-dimensional kernel acting on the deficit profile, then runs the full
3-D sweep and reports m(delta) and the fitted slope.  Constants frozen in
staircase_sweep_case were chosen from this output.
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from levicheck.levi import delta_tau_fields, tau_fields
from levicheck.mollify import (
    make_kernel,
    mollified_sign_certificate,
    staircase_deficit_fields,
)


def identity_residual(case):
    """Max deviation of -Delta_tau v from (c/16)(1+ghat^2)(1-P~) on interior nodes."""
    tau1, tau2 = tau_fields(case.phi)
    cert = -delta_tau_fields(case.v, tau1, tau2)
    n1, n2, n3 = case.v.grid.extents
    h = case.v.grid.spacing
    road_dd = np.empty((n1, n2))
    v12 = case.v.values[:, :, n3 // 2] / case.scale
    road_dd[1:-1, :] = (v12[2:, :] - 2.0 * v12[1:-1, :] + v12[:-2, :]) / h**2
    road_dd[0, :] = road_dd[-1, :] = np.nan
    model = (case.scale / 16.0) * (1.0 + case.ghat_values[None, :] ** 2) * (1.0 - road_dd)
    diff = cert[:, :, n3 // 2] - model
    return float(np.nanmax(np.abs(diff))), cert


def predict_sweep(case, deltas):
    """m(delta) via the 1-D collapsed kernel: the road is flat on the slab, so
    the mollified defect is the xi2-only sliding average of the deficit."""
    h = case.v.grid.spacing
    n1, n2, _ = case.v.grid.extents
    a1, b1 = case.road_top
    out = []
    for d in deltas:
        ker = make_kernel(d, h)
        w1 = ker.weights.sum(axis=(0, 2))
        M = ker.margin
        resp = np.convolve(case.deficit, w1[::-1], mode="same") - case.deficit
        # admissible xi2 nodes: inside U^delta and reachable from the plateau
        # top with the whole kernel footprint still on the flat part
        lo_u = a1 + (M + 1) * h
        hi_u = b1 - (M + 1) * h
        ok = np.zeros(n2, dtype=bool)
        for j in range(M, n2 - M):
            x2 = j * h
            lo_i = max(M, int(np.ceil((lo_u - x2) / h)))
            hi_i = min(n1 - 1 - M, int(np.floor((hi_u - x2) / h)))
            ok[j] = lo_i <= hi_i
        out.append(-(case.scale / 16.0) * float(resp[ok].max()))
    return out


def run_case(label, epsilon, alpha, p, **kwargs):
    t0 = time.time()
    case = staircase_deficit_fields(**kwargs)
    deltas = case.delta_sweep()
    res, cert = identity_residual(case)
    finite = np.isfinite(cert)
    pred = predict_sweep(case, deltas)
    rep = mollified_sign_certificate(
        case.v, case.phi, alpha=alpha, p=p, epsilon=epsilon, deltas=deltas
    )
    dt = time.time() - t0
    print(f"== {label} (declared alpha {case.holder_exponent:.2f}, "
          f"seminorm {case.holder_constant:.2f}, {dt:.1f}s)")
    print(f"   identity residual {res:.3e}   raw cert min {cert[finite].min():.3e}")
    print(f"   hypothesis_min {rep.hypothesis_min:.3e}   w2p {rep.w2p_estimate:.3f}")
    for d, m, q in zip(rep.deltas, rep.m_values, pred):
        print(f"   delta {d:.6f}   m {m: .6e}   1d-pred {q: .6e}")
    print(f"   fitted slope {rep.fitted_slope:.4f}   pass(m >= -eps) {rep.passed}")
    return rep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spacing", type=float, default=1.0 / 128.0)
    ap.add_argument("--epsilon", type=float, default=1e-2)
    ap.add_argument("--alpha", type=float, default=0.9)
    ap.add_argument("--p", type=float, default=6.0)
    ap.add_argument("--full", action="store_true", help="scan the candidate grid")
    args = ap.parse_args()

    base = dict(spacing=args.spacing)
    run_case("frozen defaults", args.epsilon, args.alpha, args.p, **base)
    if args.full:
        F = Fraction
        for alphas, stretch, name in [
            ((F(1, 5), F(7, 10), F(7, 10)), F(1), "schedule 0.2/0.7/0.7 unstretched"),
            ((F(1, 5), F(7, 10), F(3, 4)), F(1), "schedule 0.2/0.7/0.75"),
            ((F(3, 20), F(3, 4), F(3, 4)), F(1), "schedule 0.15/0.75/0.75"),
        ]:
            for scale in (0.125, 0.25):
                run_case(
                    f"{name} scale {scale}", args.epsilon, args.alpha, args.p,
                    alphas=alphas, stretch=stretch, scale=scale, **base,
                )


if __name__ == "__main__":
    main()
