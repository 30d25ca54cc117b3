#!/usr/bin/env python3
"""Smoke test for the shapeopt Python bindings.

Builds the extension module if needed, then drives the full pipeline on a
coarse case: mesh generation, primal and adjoint solves, sensitivity
assembly, a p-Laplace descent direction, one mesh morph, and a short
optimization run.

Usage: python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import sysconfig
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_module() -> None:
    here = Path(__file__).resolve().parent
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    target = here / f"shapeopt_py{suffix}"
    lib = ROOT / "target" / "release" / "libshapeopt_py.so"
    if not target.exists() or (lib.exists() and lib.stat().st_mtime > target.stat().st_mtime):
        print("building shapeopt-py (cargo build --release -p shapeopt-py)...")
        subprocess.run(
            ["cargo", "build", "--release", "-p", "shapeopt-py"],
            cwd=ROOT,
            check=True,
        )
        shutil.copyfile(lib, target)
    sys.path.insert(0, str(here))


def approx(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def main() -> int:
    build_module()
    import shapeopt_py as so

    print("== mesh generation")
    mesh = so.Mesh.generate_channel(length=50.0, height=10.0, diameter=1.0, target_cells=400)
    print(f"   cells={mesh.cell_count} nodes={mesh.node_count}")
    vol = mesh.volume()
    assert approx(vol, 500.0 - math.pi / 4.0, 0.1), vol
    bx, by = mesh.barycenter()
    assert abs(bx) < 1e-6 and abs(by) < 1e-6, (bx, by)
    q = mesh.quality()
    assert q["max_aspect_ratio"] < 3.0, q

    print("== primal flow solve")
    fluid = so.Fluid(density=1.0, viscosity=1.0, inflow=(1.0, 0.0))
    state = so.solve_primal(mesh, fluid)
    print(f"   picard={state.picard_iterations} residual={state.residual_norm:.2e}")
    assert state.residual_norm < 1e-9

    auglag = so.AugLag(target_barycenter=(0.0, 0.0), target_volume=vol)
    j, parts = so.objective(mesh, state, fluid, auglag)
    print(f"   J = {j:.6f} (drag {parts['drag_term']:.6f})")
    assert parts["drag_term"] > 0.0
    fx, fy = so.force(mesh, state, fluid)
    assert fx < 0.0 and abs(fy) < 1e-5 * abs(fx), (fx, fy)

    print("== adjoint, sensitivity, descent direction")
    adj = so.solve_adjoint(mesh, state, fluid)
    gamma = so.shape_sensitivity(mesh, state, adj, fluid, auglag)
    assert gamma.max_abs() > 0.0
    u4 = so.solve_plaplace(mesh, gamma, p=4.0)
    assert u4.converged
    jp = so.shape_derivative(mesh, gamma, u4.u())
    print(f"   J'(u_p4) = {jp:.6f}")
    assert jp < 0.0, "descent certificate"
    u2 = so.solve_laplace(mesh, gamma)
    jp2 = so.shape_derivative(mesh, gamma, u2.u())
    assert jp2 < 0.0

    print("== morph along the descent direction")
    morphed = mesh.morph(u4.u(), 2e-3)
    vol2 = morphed.volume()
    assert abs(vol2 - vol) < 1.0, (vol, vol2)

    print("== gradient check at one design node")
    node = mesh.design_nodes()[0]
    rep = so.check_gradient(mesh, fluid, node, h=1e-6)
    print(f"   node {rep['node']}: rel_err = {rep['rel_err']:.2e}")
    assert rep["pass"], rep

    print("== short optimization run (8 steps)")
    final_mesh, history, al = so.run_optimization(
        mesh, fluid, auglag, p=4.0, max_total_steps=8
    )
    assert history[0]["j_over_j0"] == 1.0
    assert history[-1]["j"] < history[0]["j"], "objective decreased"
    print(
        f"   J/J0 after {history[-1]['step']} steps: {history[-1]['j_over_j0']:.5f}, "
        f"lambda_c = {al.lambda_c:.4f}"
    )

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
