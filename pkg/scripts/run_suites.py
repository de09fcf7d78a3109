#!/usr/bin/env python3
"""
Local runner for the hauslab property suites.
Runs every suite through the CLI and writes one JSON report per suite.
"""

import sys
import subprocess
import argparse
from pathlib import Path

SUITES = [
    "metric-axioms",
    "neighborhood-oracle",
    "lemma-complements",
    "lift-lipschitz",
    "lift-expansive",
    "singleton-isometry",
    "chain-bounds",
    "nesting",
]

EXIT_MEANINGS = {0: "pass", 1: "violations found", 2: "bad input", 3: "ambient mismatch", 4: "nesting violation"}


def check_dependencies():
    """Check if required dependencies are installed."""
    try:
        import numpy
        import scipy
        import psutil
        print("✓ All required dependencies are installed")
        return True
    except ImportError as e:
        print(f"✗ Missing dependency: {e}")
        print("Run: pip install -e .")
        return False


def run_suite(suite: str, output_dir: Path, seed: int, trials=None, timing: bool = False) -> int:
    """Run one suite via main.py and return its exit code."""
    command = [sys.executable, "main.py", "props", suite, "--seed", str(seed),
               "--out", str(output_dir / f"{suite}.json")]
    if trials is not None:
        command += ["--trials", str(trials)]
    if timing:
        command.append("--timing")
    result = subprocess.run(command)
    mark = "✓" if result.returncode == 0 else "✗"
    print(f"{mark} {suite}: {EXIT_MEANINGS.get(result.returncode, 'failed')}")
    return result.returncode


def main():
    parser = argparse.ArgumentParser(description="Run all hauslab property suites locally")
    parser.add_argument("--suite", choices=SUITES, action="append",
                        help="Suite to run (repeatable; default: all)")
    parser.add_argument("--seed", type=int, default=42, help="Random seed (default: 42)")
    parser.add_argument("--trials", type=int, default=None, help="Trials per suite (default: suite default)")
    parser.add_argument("--out", default="output/suites", help="Report directory (default: output/suites)")
    parser.add_argument("--timing", action="store_true", help="Include wall time in reports")
    parser.add_argument("--skip-setup", action="store_true", help="Skip the dependency check")

    args = parser.parse_args()

    print("=" * 60)
    print("hauslab - Property Suite Runner")
    print("=" * 60)

    if not args.skip_setup and not check_dependencies():
        sys.exit(2)

    output_dir = Path(args.out)
    output_dir.mkdir(parents=True, exist_ok=True)

    codes = {}
    try:
        for suite in args.suite or SUITES:
            codes[suite] = run_suite(suite, output_dir, args.seed, args.trials, args.timing)
    except KeyboardInterrupt:
        print("\nStopped by user")
        sys.exit(130)

    failed = [s for s, code in codes.items() if code != 0]
    print(f"\n{len(codes) - len(failed)}/{len(codes)} suites passed; reports in {output_dir}")
    sys.exit(max(codes.values(), default=0))


if __name__ == "__main__":
    main()
