"""Regenerates crates/core/tests/golden/constants.json with mpmath.

Independent of the Rust implementation: x_p is found with mpmath's root
finder on h(x) = 3^-q at 60 digits, then nudged by 1e-9 exactly as the
library does, and the rest of the chain is evaluated in high precision.
"""

import json
import pathlib

import mpmath as mp

mp.mp.dps = 60

PS = ["2", "1.5", "1.25"]
NS = [8, 16, 32, 48]


def h(x, q):
    return (x / 4 + mp.mpf(1) / 2 - 1 / x) ** q + ((x + 2) / 4) ** q - 1


def chain(p):
    p = mp.mpf(p)
    q = p / (p - 1)
    target = mp.mpf(3) ** (-q)
    root = mp.findroot(lambda x: h(x, q) - target, (mp.mpf("1.5"), mp.mpf(2)), solver="anderson")
    x_p = root + mp.mpf("1e-9")
    eps = 1 + x_p / 2 - 2 / x_p
    delta = 1 - (1 - (eps / 2) ** q) ** (1 / q)
    gap = 2 * delta - (2 - x_p) / 2
    c_prime = max((x_p + 2) / 2, 2 - gap)
    c_p = max(x_p, c_prime)
    return dict(p=p, q=q, x_p=x_p, eps=eps, delta=delta, gap=gap, c_prime=c_prime, c_p=c_p)


def pressure(n, lam):
    t = mp.log(2) + mp.log(lam) / n
    return t * t / 2 * n * n / mp.mpf(2) ** n


def num(x):
    return float(mp.nstr(x, 17, strip_zeros=False))


out = {"chains": [], "density_bounds": [], "pressure_formula": []}
for ps in PS:
    c = chain(ps)
    out["chains"].append({
        "p": num(c["p"]),
        "x_p": num(c["x_p"]),
        "eps_p": num(c["eps"]),
        "delta_at_eps": num(c["delta"]),
        "convexity_gap": num(c["gap"]),
        "c_prime": num(c["c_prime"]),
        "c_p": num(c["c_p"]),
    })
    log_ratio = mp.log(2 / c["c_p"])
    for n in NS:
        out["density_bounds"].append({
            "p": num(c["p"]),
            "n": n,
            "log_ratio": num(log_ratio),
            "bound": num(log_ratio * n / mp.mpf(2) ** n),
            "fugacity_threshold": num(c["c_p"] ** (-n) / n),
        })
        for label, lam in [("threshold", c["c_p"] ** (-n) / n), ("inverse_c_pow", c["c_p"] ** (-n)), ("one", mp.mpf(1))]:
            out["pressure_formula"].append({
                "p": num(c["p"]),
                "n": n,
                "fugacity_label": label,
                "fugacity": num(lam),
                "value": num(pressure(n, lam)),
            })

path = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/golden/constants.json"
path.write_text(json.dumps(out, indent=2) + "\n")
print(f"wrote {path}")
for c in out["chains"]:
    print(c["p"], c["x_p"], c["c_p"])
