"""CLI invocations that produce the committed golden fixtures.

Steps run in order inside one directory holding the input files; later steps
consume earlier outputs.  ``tests/golden/regenerate.py`` writes them into
``tests/golden``; the determinism acceptance check replays them elsewhere.
"""

INPUTS = [
    "table_k2m2.json",
    "table_k4m32.json",
    "sim_dynamic.json",
    "sim_calibration.json",
    "sim_fixed.json",
    "compare_config.json",
]

STEPS = [
    (["gen", "--table", "table_k2m2.json", "--n", "3", "--out", "candidates_k2m2.json", "--check"],
     ["candidates_k2m2.json"]),
    (["gen", "--table", "table_k4m32.json", "--n", "64", "--out", "candidates_k4m32.json"],
     ["candidates_k4m32.json"]),
    (["buffers", "--candidates", "candidates_k2m2.json", "--table", "table_k2m2.json",
      "--out", "buffers_k2m2.json"],
     ["buffers_k2m2.json"]),
    (["buffers", "--candidates", "candidates_k4m32.json", "--table", "table_k4m32.json",
      "--out", "buffers_k4m32.json", "--render", "pgm", "--scale", "4"],
     ["buffers_k4m32.json", "buffers_k4m32.pgm"]),
    (["simulate", "--config", "sim_dynamic.json", "--out", "stats_dynamic.json"],
     ["stats_dynamic.json"]),
    (["simulate", "--config", "sim_calibration.json", "--out", "stats_calibration.json",
      "--records", "calibration_counts.json"],
     ["stats_calibration.json", "calibration_counts.json"]),
    (["calibrate", "--stats", "calibration_counts.json", "--n", "64", "--out", "fixed_tree.json"],
     ["fixed_tree.json"]),
    (["simulate", "--config", "sim_fixed.json", "--out", "stats_fixed.json"],
     ["stats_fixed.json"]),
    (["compare", "--config", "compare_config.json", "--seeds", "10", "--out", "compare_default.json"],
     ["compare_default.json"]),
]


def run_all(workdir):
    """Run every step with --deterministic inside ``workdir``; return produced file names."""
    import os
    import warnings

    from dyntree.cli import main

    produced = []
    cwd = os.getcwd()
    os.chdir(workdir)
    try:
        for argv, outputs in STEPS:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                code = main(argv + ["--deterministic"])
            if code != 0:
                raise RuntimeError(f"{argv} exited {code}")
            produced.extend(outputs)
    finally:
        os.chdir(cwd)
    return produced
