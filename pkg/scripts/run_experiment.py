"""Run an experiment config and print the summary table.

    python scripts/run_experiment.py configs/toy_suite.ini [--output runs/x] [--seed N]

Set CSRFBS_THREADS to run (fixture, case, model) triples in parallel.
"""

import sys

from csrfbs.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    config = args.pop(0) if args and not args[0].startswith("-") else "configs/toy_suite.ini"
    sys.exit(main(["experiment", "--config", config, *args]))
