"""Smoke test for the rotlab Python extension.

Uses an installed `rotlab` module if present (e.g. after `maturin develop`),
otherwise loads target/{release,debug}/librotlab.so from the workspace.
"""

import importlib.util
import json
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import rotlab

        return rotlab
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "librotlab.so"
        if lib.exists():
            spec = importlib.util.spec_from_file_location("rotlab", lib)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("rotlab extension not found; run `cargo build -p rotlab-py --features extension-module`")


def main():
    rl = load()

    chain = rl.build_resonant_sequence(3)
    assert [(c["p"], c["q"]) for c in chain] == [
        ("100", "11"),
        ("1000000", "110001"),
        ("1000000000000000000000000", "110001000000000000000001"),
    ]
    assert rl.verify_chain(3) == []
    assert rl.reduce_phase("-1/4") == "3/4"
    assert rl.tail_bound(1) == "1/250000000000"

    field = rl.Field(m=2, bits=256)
    assert field.amplitude_sum() == "5000000001/500000000000"
    assert field.smoothness_bound(0)["majorant_rational"] == "5000000001/500000000000"
    try:
        field.smoothness_bound(-1)
    except ValueError:
        pass
    else:
        raise AssertionError("negative k accepted")

    max_err, ok = field.cross_validate("1", "1/10", "1e-8")
    assert ok and max_err < 1e-8

    traj = rl.Field(m=3).trajectory()
    dev = traj.deviation(1)
    assert dev["pass"] and math.isclose(dev["x3_float"], 15.91549431, rel_tol=1e-6)
    corr = traj.correlation(1, "1e12", "sin")
    assert abs(corr["value"] - 7.957747155) < 1e-3 and corr["pass"]
    rho3, bound, within = rl.Field(m=2).trajectory().weak_rotation("1e12")
    assert within and abs(rho3) <= 3.3e-7

    code, out, _ = rl.run_cli(["sequence", "--M", "1"])
    assert code == 0 and json.loads(out)[0]["q"] == "11"
    code, _, err = rl.run_cli(["sequence", "--M", "0"])
    assert code == 2 and "empty chain requested" in err

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
