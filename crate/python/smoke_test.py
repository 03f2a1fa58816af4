"""Smoke test for the kmvnmf Python extension.

Build and run:

    cargo build -p kmvnmf-python --release
    python3 python/smoke_test.py

The script imports an installed ``kmvnmf`` module if there is one (e.g. from
``maturin develop`` in crates/python); otherwise it loads the freshly built
library from target/release.
"""

import importlib.machinery
import importlib.util
import pathlib
import sys


def load_module():
    try:
        import kmvnmf  # noqa: F401

        return sys.modules["kmvnmf"]
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for name in ("libkmvnmf_py.so", "libkmvnmf_py.dylib", "kmvnmf_py.dll"):
        lib = root / "target" / "release" / name
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("kmvnmf", str(lib))
            spec = importlib.util.spec_from_loader("kmvnmf", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("kmvnmf extension not found; run `cargo build -p kmvnmf-python --release`")


def main():
    km = load_module()

    data = km.Dataset.blobs(3, 60, [5, 5], 0.1, seed=0)
    assert (data.n, data.v) == (60, 2), data

    config = km.SolverConfig(3, theta=0.0, seed=0)
    state = km.fit(data, config)
    report = km.evaluate(data.labels, state.labels)
    print("kernel solver:", {k: round(v, 4) for k, v in report.items()}, "beta", state.beta)
    assert report["accuracy"] >= 0.9, report
    assert abs(sum(state.beta) - 1.0) < 1e-12
    trace = state.objective_trace
    assert all(b <= a * (1 + 1e-9) for a, b in zip(trace, trace[1:])), "objective increased"

    ranked = state.feature_importance(data, 0)
    assert len(ranked) == 5 and ranked[0][1] >= ranked[-1][1]

    scaled = data.minmax_scale()
    labels, _ = km.baseline(scaled, "mnmf", 3, theta=0.0, seed=0)
    print("mnmf accuracy:", round(km.evaluate(data.labels, labels)["accuracy"], 4))

    try:
        km.baseline(data, "mnmf", 3)
    except ValueError as err:
        assert "min-max" in str(err)
    else:
        raise AssertionError("negative data must be rejected by the NMF baselines")

    assert km.update_beta([1.0, 3.0], 2.0) == [0.75, 0.25]

    gaussian = km.SolverConfig(3, kernel="gaussian(sigma=1)", restarts=2, max_iter=20)
    try:
        km.fit(data, gaussian).feature_importance(data, 0)
    except ValueError as err:
        assert "linear kernel" in str(err)
    else:
        raise AssertionError("importance of a Gaussian-kernel view must be refused")

    print("smoke test passed")


if __name__ == "__main__":
    main()
