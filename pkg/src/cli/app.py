"""
Command dispatcher for the ``hauslab`` CLI.

Commands: dist, dhat, lift-check, sequence, gallery, props. Results go to stdout
(or --out); logs go to stderr. Exit codes: 0 ok, 1 property violation,
2 malformed input or bad parameter, 3 ambient mismatch, 4 nesting violation.
"""

import argparse
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from src.core.config import Config
from src.core.errors import DomainError
from src.core.suites import SuiteRunner
from src.data.storage import FileStore, rows_to_csv
from src.processors.gallery import GallerySpec, build_gallery
from src.processors.lift import default_family, duality_check, lifted_constants, map_constants
from src.processors.metric_core import (
    complement,
    diameter,
    directed_hausdorff,
    gap_functional,
    hausdorff,
    inscribed_radius_bound,
)
from src.processors.parallel_processor import ParallelProcessor
from src.processors.sequences import NestedFamily, classify
from src.utils.helpers import dumps, leq

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1

SEQUENCE_COLUMNS = ["n", "H_n", "partial_sum", "delta_n", "chain_step", "dhat_n", "isolation_n", "analytic_H_n"]
DEFAULT_HORIZON = 16


@dataclass
class RunConfig:
    """Resolved options of one CLI invocation."""

    command: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    output: Optional[Path] = None
    format: str = "json"
    seed: int = 42
    trials: Optional[int] = None
    tol: Optional[float] = None
    workers: Optional[int] = None
    timing: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace, defaults: Config) -> "RunConfig":
        inputs = {k: v for k, v in vars(args).items()
                  if k not in ("command", "out", "format", "seed", "trials", "tol", "workers", "timing", "verbose")}
        return cls(
            command=args.command,
            inputs=inputs,
            output=Path(args.out) if args.out else None,
            format=args.format,
            seed=defaults.DEFAULT_SEED if args.seed is None else args.seed,
            trials=getattr(args, "trials", None),
            tol=args.tol,
            workers=args.workers,
            timing=args.timing,
        )

    def make_config(self) -> Config:
        overrides = {"DEFAULT_SEED": self.seed}
        if self.workers is not None:
            overrides["MAX_PARALLEL_WORKERS"] = self.workers
        if self.tol is not None and self.command != "sequence":
            overrides["TOLERANCE"] = self.tol
        return Config(**overrides)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 42 or HAUSLAB_SEED)")
    common.add_argument("--format", choices=["json", "csv"], default="json", help="output format")
    common.add_argument("--out", help="output file (sequence: output directory)")
    common.add_argument("--tol", type=float, default=None, help="comparison tolerance override")
    common.add_argument("--workers", type=int, default=None, help="parallel workers for sup and pair loops")
    common.add_argument("--timing", action="store_true", help="include wall time in reports")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="hauslab", description="Hausdorff-metric computations on finite metric spaces")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", parents=[common], help="Hausdorff distance H(A,B)")
    p.add_argument("--space", help="ambient space file")
    p.add_argument("--a", required=True, help="subset file A")
    p.add_argument("--b", required=True, help="subset file B")
    p.add_argument("--directed", action="store_true", help="directed distance sup_{x in A} d(x,B)")

    p = sub.add_parser("dhat", parents=[common], help="gap functional, diameter and inscribed-radius bound of A")
    p.add_argument("--space", help="ambient space file")
    p.add_argument("--a", required=True, help="subset file A")

    p = sub.add_parser("lift-check", parents=[common], help="point and lifted Lipschitz/expansive constants of a map")
    p.add_argument("--map", required=True, help="map file")
    p.add_argument("--space", help="domain space file (overrides the map's domain)")
    p.add_argument("--family", nargs="+", help="subset files of the domain (default: all subsets or a random family)")

    p = sub.add_parser("sequence", parents=[common], help="classify a nested family")
    p.add_argument("--gallery", help="gallery name")
    p.add_argument("--config", help="sequence run config file")
    p.add_argument("--family", nargs="+", help="subset files K_1 .. K_N")
    p.add_argument("--space", help="ambient space for --family")
    p.add_argument("--n", type=int, help="horizon N")
    p.add_argument("--pitch", type=float, help="grid pitch for rasterized galleries")
    p.add_argument("--p", help="p for lp_basis (number or inf)")
    p.add_argument("--eps", type=float, default=None, help="chain eps in (0,1)")
    p.add_argument("--param", action="append", default=[], metavar="K=V", help="gallery parameter")

    p = sub.add_parser("gallery", parents=[common], help="build a gallery and emit its files")
    p.add_argument("name", help="gallery name")
    p.add_argument("--param", action="append", default=[], metavar="K=V", help="gallery parameter")
    p.add_argument("--n", type=int, help="horizon N of emitted sets")
    p.add_argument("--pitch", type=float, help="grid pitch")
    p.add_argument("--p", help="p for lp_basis (number or inf)")
    p.add_argument("--emit", help="write the ambient space file here")
    p.add_argument("--emit-family", dest="emit_family", help="write one subset file per set into this directory")

    p = sub.add_parser("props", parents=[common], help="run a property suite")
    p.add_argument("suite", help=", ".join(SuiteRunner.DEFAULT_TRIALS))
    p.add_argument("--trials", type=int, default=None, help="number of seeded trials")
    p.add_argument("--space", help="extra space checked alongside the seeded ones (not pre-validated)")
    return parser


class CommandRunner:
    """Executes one RunConfig and emits its report."""

    def __init__(self, run: RunConfig):
        self.run = run
        self.config = run.make_config()
        self.store = FileStore(self.config)
        self.processor = ParallelProcessor(self.config)

    def execute(self) -> int:
        start_time = time.time()
        handler = {
            "dist": self.cmd_dist,
            "dhat": self.cmd_dhat,
            "lift-check": self.cmd_lift_check,
            "sequence": self.cmd_sequence,
            "gallery": self.cmd_gallery,
            "props": self.cmd_props,
        }[self.run.command]
        record, rows, columns, code = handler()
        if self.run.timing:
            record["wall_time"] = time.time() - start_time
        self.emit(record, rows, columns)
        return code

    # ------------------------------------------------------------------
    # output
    # ------------------------------------------------------------------

    def emit(self, record: Dict[str, Any], rows: Optional[List[Dict[str, Any]]], columns: List[str]):
        if self.run.format == "csv":
            if rows is None:
                raise DomainError(f"'{self.run.command}' has no tabular output; use --format json")
            text = rows_to_csv(rows, columns)
        else:
            text = dumps(record)

        out = self.run.output
        if self.run.command == "sequence" and out is not None:
            self.store.write_bundle(out, {"summary.json": dumps(record),
                                         "series.csv": rows_to_csv(rows, columns)})
            sys.stdout.write(text)
        elif out is not None:
            if self.run.format == "json":
                self.store.write_json(out, record)
            else:
                self.store.write_csv(out, rows, columns)
        else:
            sys.stdout.write(text)

    # ------------------------------------------------------------------
    # commands
    # ------------------------------------------------------------------

    def _space(self, validate: bool = True):
        path = self.run.inputs.get("space")
        return self.store.load_space(path, validate=validate) if path else None

    def cmd_dist(self) -> Tuple[dict, list, list, int]:
        space = self._space()
        A = self.store.load_subset(self.run.inputs["a"], space)
        B = self.store.load_subset(self.run.inputs["b"], space or A.space)
        directed = self.run.inputs.get("directed", False)
        value = directed_hausdorff(A, B, self.processor) if directed else hausdorff(A, B, self.processor)
        record = {"command": "dist", "directed": directed, "A": A.ids, "B": B.ids, "value": value}
        logger.info(f"{'Directed h' if directed else 'H'}ausdorff distance: {value}")
        row = {"A": " ".join(A.ids), "B": " ".join(B.ids), "directed": directed, "value": value}
        return record, [row], ["A", "B", "directed", "value"], EXIT_OK

    def cmd_dhat(self) -> Tuple[dict, list, list, int]:
        space = self._space()
        A = self.store.load_subset(self.run.inputs["a"], space)
        dhat, delta, bound = gap_functional(A), diameter(A, self.processor), inscribed_radius_bound(A)
        record = {
            "command": "dhat",
            "A": A.ids,
            "dhat": dhat,
            "diameter": delta,
            "inscribed_radius_bound": bound,
            # undefined for A = X, where the complement is empty
            "dhat_within_diameter": None if math.isinf(dhat) else leq(dhat, delta, self.config.TOLERANCE),
        }
        row = {"A": " ".join(A.ids), "dhat": dhat, "diameter": delta, "inscribed_radius_bound": bound}
        return record, [row], ["A", "dhat", "diameter", "inscribed_radius_bound"], EXIT_OK

    def cmd_lift_check(self) -> Tuple[dict, list, list, int]:
        T = self.store.load_map(self.run.inputs["map"], domain=self._space())
        files = self.run.inputs.get("family")
        if files:
            family = self.store.load_family_sets(files, T.domain)
        else:
            family = default_family(T.domain, self.config, self.run.seed)
        lifted = lifted_constants(T, family, self.config.TOLERANCE, self.processor)
        record = {
            "command": "lift-check",
            "family_size": len(family),
            "map_constants": map_constants(T),
            "lifted_constants": lifted,
            "satisfied": lifted.satisfied,
        }
        if T.bijective:
            record["duality"] = duality_check(T, tol=1e-9)
        rows = [{"kind": v["kind"], "A": " ".join(v["A"]), "B": " ".join(v["B"]),
                 "H": v["H"], "H_lifted": v["H_lifted"]} for v in lifted.violations]
        return record, rows, ["kind", "A", "B", "H", "H_lifted"], EXIT_OK if lifted.satisfied else EXIT_VIOLATION

    def _gallery_spec(self, name: str, extra: Dict[str, Any]) -> GallerySpec:
        spec = GallerySpec.from_pairs(name, self.run.inputs.get("param") or [])
        params = dict(extra)
        params.update(spec.params)
        if self.run.inputs.get("pitch") is not None:
            params["pitch"] = self.run.inputs["pitch"]
        if self.run.inputs.get("p") is not None:
            params["p"] = self.run.inputs["p"]
        return GallerySpec(name, params)

    def _sequence_family(self) -> Tuple[NestedFamily, Dict[str, Any]]:
        settings: Dict[str, Any] = {}
        if self.run.inputs.get("config"):
            settings = self.store.load_run_config(self.run.inputs["config"])
        if self.run.inputs.get("gallery"):
            settings.pop("files", None)
            settings["gallery"] = self.run.inputs["gallery"]
        if self.run.inputs.get("family"):
            settings.pop("gallery", None)
            settings["files"] = self.run.inputs["family"]
        for key in ("n", "eps"):
            if self.run.inputs.get(key) is not None:
                settings["N" if key == "n" else key] = self.run.inputs[key]
        if self.run.tol is not None:
            settings["tol"] = self.run.tol

        if "files" in settings:
            sets = self.store.load_family_sets(settings["files"], self._space())
            family = NestedFamily.from_sets(sets[0].space, sets, label="files")
            settings.setdefault("N", len(sets))
            return family, settings
        if "gallery" not in settings:
            raise DomainError("sequence needs --gallery, --family or --config")

        N = settings.setdefault("N", DEFAULT_HORIZON)
        extra = dict(settings.get("params", {}))
        if "pitch" in settings:
            extra.setdefault("pitch", settings["pitch"])
        spec = self._gallery_spec(settings["gallery"], extra).with_horizon(N)
        family = build_gallery(spec, self.config).family
        if family is None:
            raise DomainError(f"Gallery '{spec.name}' has no nested family")
        return family, settings

    def cmd_sequence(self) -> Tuple[dict, list, list, int]:
        family, settings = self._sequence_family()
        N = settings["N"]
        report = classify(family, N, tol=settings.get("tol"), eps=settings.get("eps", self.config.DEFAULT_EPS),
                          processor=self.processor)
        rows = report.rows()
        record: Dict[str, Any] = {"command": "sequence", "report": report}
        if family.analytic_gap is not None:
            analytic = [family.analytic_gap(n) for n in range(1, N)]
            for row, value in zip(rows, analytic):
                row["analytic_H_n"] = value
            record["analytic_gaps"] = analytic
            record["max_gap_deviation"] = max(abs(a - g) for a, g in zip(analytic, report.series.gaps))
            if "pitch" in family.params:
                allowed = self.config.PITCH_TOLERANCE_FACTOR * family.params["pitch"]
                record["pitch_tolerance"] = allowed
                record["gaps_within_pitch_tolerance"] = record["max_gap_deviation"] <= allowed
        return record, rows, SEQUENCE_COLUMNS, EXIT_OK

    def cmd_gallery(self) -> Tuple[dict, list, list, int]:
        name = self.run.inputs["name"]
        spec = self._gallery_spec(name, {})
        N = self.run.inputs.get("n")
        if N is not None:
            spec = spec.with_horizon(N)
        gallery = build_gallery(spec, self.config)
        record: Dict[str, Any] = {"command": "gallery", "gallery": name, "params": spec.params,
                                  "points": len(gallery.space)}
        sets = dict(gallery.sets)
        rows = []
        if gallery.family is not None:
            family = gallery.family
            N = N or family.max_horizon
            record["params"] = family.params
            record["horizon"] = N
            family.validate(N)
            for n, K in enumerate(family.sets(N), start=1):
                sets[f"K_{n:03d}"] = K
                gap = family.analytic_gap(n) if family.analytic_gap and n < N else None
                rows.append({"n": n, "size": len(K), "analytic_H_n": gap})
            if family.limit is not None:
                record["limit_size"] = len(family.limit)
        else:
            A, B = sets["A"], sets["B"]
            record["A"], record["B"] = A.ids, B.ids
            record["H_AB"] = hausdorff(A, B)
            record["H_complements"] = hausdorff(complement(A), complement(B))
        record["sizes"] = {k: len(v) for k, v in sets.items()}

        if self.run.inputs.get("emit"):
            self.store.emit_space(self.run.inputs["emit"], gallery.space)
        if self.run.inputs.get("emit_family"):
            self.store.emit_sets(self.run.inputs["emit_family"], sets, self.run.inputs.get("emit"))
        return record, rows, ["n", "size", "analytic_H_n"], EXIT_OK

    def cmd_props(self) -> Tuple[dict, list, list, int]:
        spaces = []
        if self.run.inputs.get("space"):
            spaces.append(self._space(validate=False))
        runner = SuiteRunner(self.config, self.processor, timing=self.run.timing)
        report = runner.run(self.run.inputs["suite"], trials=self.run.trials, seed=self.run.seed, spaces=spaces)
        rows = [{"suite": report.suite, "cases": report.cases, "violations": report.violation_count,
                 "verdict": report.verdict}]
        return report.to_dict(), rows, ["suite", "cases", "violations", "verdict"], \
            EXIT_OK if report.passed else EXIT_VIOLATION
