#!/usr/bin/env python3
"""Smoke test for the copula_bvs_py extension module.

Build the module first:

    cargo build -p copula-bvs-py --release

then run this script from the repository root:

    python3 python/smoke_test.py
"""

import math
import os
import random
import shutil
import sys
import tempfile


def load_module():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    candidates = [
        os.path.join(root, "target", "release", "libcopula_bvs_py.so"),
        os.path.join(root, "target", "debug", "libcopula_bvs_py.so"),
        os.path.join(root, "target", "release", "copula_bvs_py.dll"),
        os.path.join(root, "target", "release", "libcopula_bvs_py.dylib"),
    ]
    built = next((c for c in candidates if os.path.exists(c)), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p copula-bvs-py --release")
    stage = tempfile.mkdtemp(prefix="copula_bvs_py_")
    ext = ".so" if not built.endswith(".dll") else ".pyd"
    shutil.copy(built, os.path.join(stage, "copula_bvs_py" + ext))
    sys.path.insert(0, stage)
    import copula_bvs_py

    return copula_bvs_py


def main():
    m = load_module()
    print(f"module version {m.version()}")

    rng = random.Random(7)

    # margins: PIT round trip on a fitted kernel estimate
    sample = [rng.gauss(0.0, 1.0) for _ in range(2000)]
    margin = m.MarginModel.fit(sample, "kde")
    assert 0.45 < margin.cdf(0.0) < 0.55
    z = margin.pit([0.3])[0]
    back = margin.inverse_pit(z)
    assert abs(back - 0.3) < 1e-6, back
    exact = m.MarginModel.normal(0.0, 1.0)
    assert abs(exact.pit([1.5])[0] - 1.5) < 1e-9
    print("margins: PIT round trip ok")

    # selection on a small synthetic problem with one strong covariate
    n, p = 300, 5
    x = [[rng.gauss(0.0, 1.0) for _ in range(p)] for _ in range(n)]
    y = [1.4 * row[1] + 1.0 * rng.gauss(0.0, 1.0) for row in x]
    fit = m.fit_selection(y, x, margin="kde", g_prior="zellner-siow", sweeps=800, burnin=200, seed=3)
    probs = fit.inclusion_probabilities()
    assert len(probs) == p
    assert probs[1] > 0.9, probs
    top = fit.top_models(3)
    assert top and top[0][0][1] == "1", top
    print(f"selection: inclusion probabilities {['%.2f' % v for v in probs]}")

    # predictive density integrates to about one
    grid = [(-6.0 + 12.0 * k / 400.0) for k in range(401)]
    dens = fit.predictive_density(x[0], grid)
    mass = sum(
        0.5 * (dens[k - 1] + dens[k]) * (grid[k] - grid[k - 1]) for k in range(1, len(grid))
    )
    assert abs(mass - 1.0) < 0.02, mass
    mean = fit.predictive_mean(x[0])
    assert math.isfinite(mean)
    print(f"predictive: unit mass {mass:.4f}, mean at row 0 = {mean:.3f}")

    # Bayes factor prefers the true support over the empty model
    lbf = m.log_bayes_factor(y, x, "01000", "00000", g_prior="zellner-siow")
    assert lbf > 5.0, lbf
    print(f"bayes factor: log BF(true|empty) = {lbf:.2f}")

    thr = m.activation_threshold()
    assert abs(thr - 0.8722) < 5e-4, thr
    print(f"spatial: activation threshold {thr:.4f}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
