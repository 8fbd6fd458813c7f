#!/usr/bin/env python3
"""Smoke test for the fastuss_py extension module.

Build the extension first:

    cargo build -p fastuss-py --release

then run this script; it locates the cdylib in target/, links it under the
importable name, and exercises the bindings.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / "release" / "libfastuss_py.so",
        REPO / "target" / "debug" / "libfastuss_py.so",
        REPO / "target" / "release" / "libfastuss_py.dylib",
        REPO / "target" / "debug" / "libfastuss_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("fastuss_py cdylib not found; run `cargo build -p fastuss-py --release`")
    stage = Path(tempfile.mkdtemp(prefix="fastuss-py-"))
    shutil.copy(built, stage / "fastuss_py.so")
    sys.path.insert(0, str(stage))
    import fastuss_py

    return fastuss_py


def check(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"{status} {name}" + (f" ({detail})" if detail else ""))
    if not ok:
        sys.exit(1)


def main():
    m = load_module()

    names = m.presets()
    check("presets listed", "ID1" in names and "TOY-CAUSAL" in names, f"{len(names)} presets")

    vocab = m.prompt_vocabulary()
    check("prompt vocabulary", vocab[0] == "Speech" and len(vocab) == 8)

    causal = m.mask("causal", 2, 3)
    expect = [
        [1, 1, 0, 0, 0],
        [1, 1, 0, 0, 0],
        [1, 1, 1, 0, 0],
        [1, 1, 1, 1, 0],
        [1, 1, 1, 1, 1],
    ]
    check("causal mask matrix", causal == expect)

    cfg = json.loads(m.preset_config("ID7"))
    check(
        "ID7 config",
        cfg["cross_prompt"]["freq"]["ffn2"]["stride"] == 4
        and cfg["cross_prompt"]["freq"]["ffn1"]["variant"] == "absent",
    )

    report = m.model_cost("ID7", 1.0)
    check(
        "ID7 cost near reference",
        abs(report["macs_g"] - 11.7) <= 0.3,
        f"{report['macs_g']:.2f} G",
    )
    comp_sum = sum(c["macs"] for c in report["components"].values())
    check("components sum to total", comp_sum == report["macs_total"])

    rows = m.table1()
    primary = [r for r in rows if r["primary"]]
    worst = max(abs(r["macs_g"] - r["target_macs_g"]) for r in primary)
    check("primary table rows within 0.3 G", worst <= 0.3, f"worst {worst:.3f} G")

    css = m.css_cost("ID1", 60.0, 4.0, 0.0)
    check("chunked cost near reference", abs(css / 1e12 - 2.7) <= 0.27, f"{css / 1e12:.2f} T")

    shares = m.breakdown("ID1", [1.0, 30.0])
    check(
        "conv share shrinks with duration",
        shares[0][1] > shares[1][1] and 0.85 <= shares[0][1] <= 0.95,
        f"{shares[0][1]:.3f} -> {shares[1][1]:.3f}",
    )

    sr = 8000
    samples = [
        0.4 * math.sin(2 * math.pi * 440 * i / sr)
        + 0.2 * math.sin(2 * math.pi * 97 * i / sr)
        for i in range(4 * sr)
    ]
    stems = m.separate(samples, sr, ["Speech", "SFX-mix"], "TOY", 42)
    check(
        "toy separation shapes",
        len(stems) == 2 and all(len(s) == len(samples) for s in stems),
    )
    again = m.separate(samples, sr, ["Speech", "SFX-mix"], "TOY", 42)
    check("separation deterministic", stems == again)

    streamed = m.separate_streaming(samples, sr, ["Speech"], "TOY-CAUSAL", 42)
    check(
        "streaming separation shapes",
        len(streamed) == 1 and len(streamed[0]) == len(samples),
    )

    calib = json.loads(m.calibrate())
    check(
        "calibration grid lands at 64 fps / 4 prompts",
        calib["calibration"]["frames_per_second"] == 64
        and calib["calibration"]["n_prompts"] == 4,
    )

    print("smoke test complete")


if __name__ == "__main__":
    main()
