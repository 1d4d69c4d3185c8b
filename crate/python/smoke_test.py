#!/usr/bin/env python3
"""Smoke test for the balayage_py extension module.

Builds nothing itself: it locates the compiled cdylib under target/
(release preferred), stages it under the importable name balayage_py.so,
and exercises the main types and operations end to end.

Usage:
    cargo build --release -p balayage-py
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def stage_module() -> None:
    candidates = [
        REPO / "target" / "release" / "libbalayage_py.so",
        REPO / "target" / "debug" / "libbalayage_py.so",
        REPO / "target" / "release" / "libbalayage_py.dylib",
        REPO / "target" / "debug" / "libbalayage_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("extension not built; run: cargo build --release -p balayage-py")
    stage = Path(tempfile.mkdtemp(prefix="balayage_py_"))
    shutil.copy(built, stage / "balayage_py.so")
    sys.path.insert(0, str(stage))


stage_module()
import balayage_py as bp  # noqa: E402

FAILURES = []


def check(label: str, ok: bool, detail: str = "") -> None:
    status = "ok  " if ok else "FAIL"
    print(f"[{status}] {label}" + (f"  ({detail})" if detail else ""))
    if not ok:
        FAILURES.append(label)


def close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def main() -> None:
    print(f"balayage_py {bp.__version__}")

    # circle: two atoms, the positive one is swept into the hole
    circle = bp.Manifold.circle(400)
    sigma = bp.Charge.atom(circle, 0.25, 1.0).add(bp.Charge.atom(circle, 0.75, -2.0))
    check("circle total volume", close(circle.total_volume, 1.0, 1e-12))
    check("normalized mass", close(bp.normalized_mass(circle, sigma), -1.0, 1e-12))
    result = bp.bal(circle, sigma)
    check("balayage converged", result.converged)
    nu = result.nu()
    b_node = 300  # x = 0.75
    l1 = sum(abs(v - (-1.0 if i == b_node else 0.0)) for i, v in enumerate(nu))
    check("nu = -delta_b", l1 < 1e-8, f"l1 deviation {l1:.2e}")
    check("mass conserved", close(sum(nu), sigma.total, 1e-10))
    check("bounds hold", result.bounds_ok())

    # Jordan decomposition
    plus, minus = sigma.jordan()
    check("jordan split", close(plus.total, 1.0, 1e-15) and close(minus.total, 2.0, 1e-15))

    # sphere kernel values
    v = bp.green_kernel_sphere((0.0, 0.0), None)
    check("kernel G(0, infinity)", close(v, -1.0 / (4.0 * math.pi), 1e-15))
    v01 = bp.green_kernel_sphere((0.0, 0.0), (1.0, 0.0))
    check(
        "kernel G(0, 1)",
        close(v01, -(math.log(0.5) + 1.0) / (4.0 * math.pi), 1e-15),
    )

    # harmonic ball on the sphere: t = pi fills the cap of angle pi/3
    sphere = bp.Manifold.sphere_polar(512)
    vol, _mask_vol, radius, _mask = bp.harmonic_ball(sphere, 0.0, math.pi)
    check("harmonic ball volume", close(vol, math.pi, 1e-3 * math.pi), f"vol {vol:.6f}")
    check(
        "harmonic ball radius",
        close(radius, math.pi / 3.0, 2.0 * sphere.grid_spacing),
        f"radius {radius:.4f}",
    )

    # growth volumes follow the schedule
    schedule = [0.5, 1.0, 2.0]
    volumes = bp.laplacian_growth(sphere, 0.0, schedule)
    ok = all(close(v, t, 1e-3 * t) for v, t in zip(volumes, schedule))
    check("growth volume law", ok, ", ".join(f"{v:.4f}" for v in volumes))

    # uniform equilibrium measure for a zero field
    mu, robin, slack, _support = bp.weighted_equilibrium(
        sphere, [0.0] * sphere.node_count, 0.3
    )
    check("uniform equilibrium mass", close(sum(mu), 0.3 * sphere.total_volume, 1e-6))
    check("robin constant zero", abs(robin) < 1e-9 and slack > -1e-9)

    # radial Neumann run against the mass-balance closed form
    s_num, s_closed, s_matched, q_r, _frac = bp.radial_solve(
        3, 0.8, 0.1, 2.0, "neumann", 1024
    )
    expect = (0.8**3 - 3 * 0.1) ** (1.0 / 3.0)
    check("neumann free boundary", close(s_num, expect, 3.0 * 2.0 / 1024), f"s {s_num:.5f}")
    check("neumann closed form", close(s_closed, expect, 1e-12))
    check("neumann keeps mass", abs(q_r) < 1e-9)
    check("matched equals closed (neumann)", close(s_matched, s_closed, 1e-12))

    # Dirichlet: the solver follows the matched route
    s_num, s_closed, s_matched, q_r, _frac = bp.radial_solve(
        3, 0.8, 0.1, 10.0, "dirichlet", 2048
    )
    check(
        "dirichlet matches the flux-matched root",
        close(s_num, s_matched, 1.5 * 10.0 / 2048),
        f"s {s_num:.5f} vs matched {s_matched:.5f} (reference closed form {s_closed:.5f})",
    )
    check("dirichlet loses mass", q_r > 0.0, f"q_R {q_r:.5f}")

    print()
    if FAILURES:
        print(f"{len(FAILURES)} check(s) failed: {FAILURES}")
        sys.exit(1)
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
