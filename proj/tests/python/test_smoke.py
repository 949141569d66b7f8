"""Python smoke tests for the _filmlab extension module.

Run by ctest with FILMLAB_MODULE_DIR pointing at the built module. Each check
mirrors a library-level test so a binding regression is caught even when the
C++ suites pass.
"""

import math
import os
import sys

module_dir = os.environ.get("FILMLAB_MODULE_DIR")
if module_dir:
    sys.path.insert(0, module_dir)

import numpy as np  # noqa: E402

import _filmlab as fl  # noqa: E402


def test_operator_basics():
    div2 = fl.builtin_operator("div", 1, 2)
    assert div2.l == 1 and div2.m == 2
    sym = fl.evaluate_symbol(div2, np.array([1.0, 2.0]))
    assert np.allclose(sym, [[1.0, 2.0]])
    cert = fl.check_constant_rank(div2, 2000)
    assert cert["is_constant"] and cert["r"] == 1
    assert fl.check_antisymmetry(div2) == 0.0

    curl3 = fl.builtin_operator("curl", 1, 3)
    assert fl.check_constant_rank(curl3, 2000)["r"] == 2

    basis = fl.kernel_basis(np.array([[1.0, 0.0, 0.0]]))
    assert basis.shape == (3, 2)


def test_projection_roundtrip():
    div2 = fl.builtin_operator("div", 1, 2)
    n = 32
    x = (np.arange(n) + 0.5) / n
    u = np.zeros((2, n, n))
    u[0] = np.sin(2 * math.pi * x)[:, None]
    u[1] = np.cos(2 * math.pi * x)[None, :] * 0.5
    pu = fl.project_afree(div2, 1.0, u, keep_mean=False)
    residual = fl.h_minus1_norm(fl.apply_operator(div2, 1.0, pu))
    assert residual <= 1e-10
    ppu = fl.project_afree(div2, 1.0, pu, keep_mean=False)
    assert np.max(np.abs(ppu - pu)) <= 1e-12
    assert fl.l2_norm(pu) <= fl.l2_norm(u) + 1e-12


def test_laminate_cell_values():
    div2 = fl.builtin_operator("div", 1, 2)
    density = {"type": "quadratic_laminate", "axis": 0, "a_lo": 1.0, "a_hi": 4.0}
    res = fl.solve_cell(div2, density, np.array([0.0, 1.0]), [64, 64])
    assert res["converged"]
    assert abs(res["value"] - 0.8) <= 0.004
    res2 = fl.solve_cell(div2, density, np.array([1.0, 0.0]), [64, 64])
    assert abs(res2["value"] - 1.25) <= 0.007


def test_quartet_and_nonlocality():
    div2 = fl.builtin_operator("div", 1, 2)
    quartet = fl.construct_quartet(div2)
    assert quartet["certified"]
    reference = fl.verify_quartet(
        div2,
        np.array([0.0, 2.0]),
        np.array([0.0, -2.0]),
        np.array([1.0, -1.0]),
        np.array([1.0, 1.0]),
        0,
    )
    assert reference["certified"]

    report = fl.nonlocality_obstruction(div2, alpha=1.0, ladder=[2, 4], nd=32)
    assert report["oracle_floor"] > 0
    for row in report["rows"]:
        assert row["viol_half"] <= 1e-10
        assert row["viol_full"] >= 0.9 * report["oracle_floor"]
        assert all(abs(f - 0.25) < 1e-12 for f in row["phase_fractions"])


def main():
    tests = [
        test_operator_basics,
        test_projection_roundtrip,
        test_laminate_cell_values,
        test_quartet_and_nonlocality,
    ]
    for test in tests:
        test()
        print(f"ok {test.__name__}")
    print("python smoke tests passed")


if __name__ == "__main__":
    main()
