"""Command-line front end.

``prevci ci`` computes intervals from a stratum file, an individual-weight
file or a single ``--x/--n`` count; ``prevci simulate`` runs a scenario file
and writes per-method coverage metrics as CSV.

Exit codes: 0 ok, 2 input error, 3 infeasible model, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .confdist import BinomialCount, StratifiedSample, WeightSumError
from .estimate import AssayCalibration, apparent_prevalence, g
from .intervals import (
    DEFAULT_MC_SAMPLES,
    LR_VARIANCE_FORMS,
    DegenerateAssayError,
    Interval,
    MCConfig,
    lang_reiczigel,
)
from .simlab import METHODS, InfeasibleScenarioError, ScenarioSpec, run_study
from .survey import SurveyFrame, normalized_weights

SCHEMA_VERSION = 1

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

MC_METHODS = {"meld-srs", "wprev-poisson", "wprev-binomial"}
ADJUSTING_METHODS = {"meld-srs", "lr", "wprev-poisson", "wprev-binomial"}
SRS_METHODS = {"cp", "meld-srs", "lr"}
SRS_NAMES = {"cp": "Clopper-Pearson", "meld-srs": "Melding", "lr": "Lang-Reiczigel"}

SIM_COLUMNS = ("cv_actual", "method", "coverage", "lower_error", "upper_error", "mean_width", "mc_se", "seed")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunReport:
    method: str
    alpha: float
    apparent: float
    corrected: float
    lower: float
    upper: float
    mc_samples: Optional[int]
    seed: Optional[int]
    input_digest: str
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "method": self.method,
                "alpha": self.alpha,
                "estimate": {"apparent": self.apparent, "corrected": self.corrected},
                "lower": self.lower,
                "upper": self.upper,
                "mc_samples": self.mc_samples,
                "seed": self.seed,
                "input_digest": self.input_digest,
                "warnings": list(self.warnings),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        return cls(
            method=d["method"],
            alpha=d["alpha"],
            apparent=d["estimate"]["apparent"],
            corrected=d["estimate"]["corrected"],
            lower=d["lower"],
            upper=d["upper"],
            mc_samples=d["mc_samples"],
            seed=d["seed"],
            input_digest=d["input_digest"],
            warnings=list(d["warnings"]),
        )

    def to_text(self) -> str:
        level = round(100 * (1 - self.alpha), 6)
        level_s = f"{level:g}%"
        return (
            f"{self.method}: {100 * self.lower:.2f}% to {100 * self.upper:.2f}% ({level_s} CI); "
            f"apparent {100 * self.apparent:.2f}%, corrected {100 * self.corrected:.2f}%"
        )


def _read_rows(path: Path, header: Sequence[str]) -> list[tuple[int, dict]]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise CliError(EXIT_INPUT, f"{path}: empty file") from None
        if [c.strip() for c in first] != list(header):
            raise CliError(EXIT_INPUT, f"{path}:1: expected header {','.join(header)}")
        rows = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CliError(EXIT_INPUT, f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append((lineno, dict(zip(header, (c.strip() for c in row)))))
    if not rows:
        raise CliError(EXIT_INPUT, f"{path}: no data rows")
    return rows


def _parse_float(s: str, where: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise CliError(EXIT_INPUT, f"{where}: not a number: {s!r}") from None
    if not math.isfinite(v):
        raise CliError(EXIT_INPUT, f"{where}: not finite: {s!r}")
    return v


def _parse_int(s: str, where: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise CliError(EXIT_INPUT, f"{where}: not an integer: {s!r}") from None


def read_stratum_file(path: Path) -> StratifiedSample:
    """CSV with header ``stratum,weight,n,x``."""
    w, n, x = [], [], []
    seen = set()
    for lineno, row in _read_rows(path, ("stratum", "weight", "n", "x")):
        where = f"{path}:{lineno}"
        if row["stratum"] in seen:
            raise CliError(EXIT_INPUT, f"{where}: duplicate stratum {row['stratum']!r}")
        seen.add(row["stratum"])
        wi = _parse_float(row["weight"], where)
        ni = _parse_int(row["n"], where)
        xi = _parse_int(row["x"], where)
        if wi <= 0:
            raise CliError(EXIT_INPUT, f"{where}: weight must be positive")
        if ni < 1 or not 0 <= xi <= ni:
            raise CliError(EXIT_INPUT, f"{where}: need n >= 1 and 0 <= x <= n")
        w.append(wi)
        n.append(ni)
        x.append(xi)
    try:
        return StratifiedSample(w, n, x)
    except WeightSumError as exc:
        raise CliError(EXIT_INPUT, f"{path}: {exc}") from exc


def read_individual_file(path: Path) -> StratifiedSample:
    """CSV with header ``weight,positive``; raw weights are always rescaled."""
    w, y = [], []
    for lineno, row in _read_rows(path, ("weight", "positive")):
        where = f"{path}:{lineno}"
        wi = _parse_float(row["weight"], where)
        if wi <= 0:
            raise CliError(EXIT_INPUT, f"{where}: weight must be positive")
        yi = row["positive"]
        if yi not in ("0", "1"):
            raise CliError(EXIT_INPUT, f"{where}: positive must be 0 or 1, got {yi!r}")
        w.append(wi)
        y.append(int(yi))
    return normalized_weights(SurveyFrame(y, weight_raw=w))


def _digest(parts: Sequence[bytes]) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(len(p).to_bytes(8, "little"))
        h.update(p)
    return "sha256:" + h.hexdigest()


def _load_sample(args) -> tuple[StratifiedSample, bytes]:
    modes = [args.stratum_file is not None, args.individual_file is not None, args.x is not None or args.n is not None]
    if sum(modes) != 1:
        raise CliError(EXIT_INPUT, "give exactly one of --stratum-file, --individual-file or --x/--n")
    if args.stratum_file is not None:
        path = Path(args.stratum_file)
        s = read_stratum_file(path)
        return s, b"stratum\0" + path.read_bytes()
    if args.individual_file is not None:
        path = Path(args.individual_file)
        s = read_individual_file(path)
        return s, b"individual\0" + path.read_bytes()
    if args.x is None or args.n is None:
        raise CliError(EXIT_INPUT, "--x and --n must be given together")
    if args.n < 1 or not 0 <= args.x <= args.n:
        raise CliError(EXIT_INPUT, "need n >= 1 and 0 <= x <= n")
    return StratifiedSample.single(args.x, args.n), f"count\0{args.x}/{args.n}".encode()


def _load_calibration(args) -> Optional[AssayCalibration]:
    vals = [args.spec_x, args.spec_n, args.sens_x, args.sens_n]
    if all(v is None for v in vals):
        return None
    if any(v is None for v in vals):
        raise CliError(EXIT_INPUT, "calibration needs all of --spec-x --spec-n --sens-x --sens-n")
    try:
        return AssayCalibration(c_n=args.spec_x, m_n=args.spec_n, c_p=args.sens_x, m_p=args.sens_n)
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc


def compute_reports(args) -> list[RunReport]:
    methods = args.method
    if not 0 < args.alpha < 1:
        raise CliError(EXIT_INPUT, "--alpha must lie in (0, 1)")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sample, raw = _load_sample(args)
    load_warnings = [str(w.message) for w in caught]
    calib = _load_calibration(args)

    needs_mc = any(m in MC_METHODS for m in methods)
    if needs_mc and args.seed is None:
        raise CliError(EXIT_INPUT, "--seed is required for Monte Carlo methods")
    for m in methods:
        if m in SRS_METHODS and sample.K != 1:
            raise CliError(EXIT_INPUT, f"{SRS_NAMES[m]} requires a simple random sample (one stratum)")
        if m in ADJUSTING_METHODS and calib is None:
            raise CliError(EXIT_INPUT, f"method {m} needs assay calibration (--spec-x --spec-n --sens-x --sens-n)")
    mc = None
    if needs_mc:
        try:
            mc = MCConfig(args.mc, args.seed)
        except ValueError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from exc

    cal_bytes = b"" if calib is None else json.dumps(asdict(calib), sort_keys=True).encode()
    digest = _digest([raw, cal_bytes])
    apparent = apparent_prevalence(sample)
    corrected = apparent if calib is None else g(apparent, calib.phi_n_hat, calib.phi_p_hat)
    run_calib = calib if calib is not None else AssayCalibration.perfect()

    reports = []
    for m in methods:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                if m == "lr":
                    iv: Interval = lang_reiczigel(
                        BinomialCount(int(sample.x[0]), int(sample.n[0])), run_calib, args.alpha, args.lr_variance
                    )
                else:
                    iv = METHODS[m](sample, run_calib, args.alpha, mc or MCConfig(1000, 0))
            except DegenerateAssayError as exc:
                raise CliError(EXIT_INFEASIBLE, f"{m}: {exc}") from exc
        notes = load_warnings + [str(w.message) for w in caught] + list(iv.diagnostics.get("warnings", []))
        is_mc = m in MC_METHODS
        reports.append(
            RunReport(
                method=m,
                alpha=args.alpha,
                apparent=apparent,
                corrected=corrected,
                lower=iv.lower,
                upper=iv.upper,
                mc_samples=mc.samples if is_mc else None,
                seed=mc.seed if is_mc else None,
                input_digest=digest,
                warnings=notes,
            )
        )
    return reports


def cmd_ci(args, out=None) -> int:
    out = out or sys.stdout
    for r in compute_reports(args):
        print(r.to_text() if args.format == "text" else r.to_json(), file=out)
    return EXIT_OK


def load_scenario(path: Path) -> ScenarioSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INPUT, f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise CliError(EXIT_INPUT, f"{path}: scenario must be a JSON object")
    try:
        return ScenarioSpec.from_dict(d)
    except InfeasibleScenarioError as exc:
        raise CliError(EXIT_INFEASIBLE, f"{path}: infeasible scenario: {exc}") from exc
    except KeyError as exc:
        raise CliError(EXIT_INPUT, f"{path}: {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"{path}: {exc}") from exc


def write_results_csv(fh, spec: ScenarioSpec, results) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SIM_COLUMNS)
    for res in results:
        for m, mm in res.methods.items():
            writer.writerow(
                [repr(float(res.cv_actual)), m, repr(mm.coverage), repr(mm.lower_error),
                 repr(mm.upper_error), repr(mm.mean_width), repr(mm.mc_se), spec.seed]
            )


def read_results_csv(path: Path) -> list[dict]:
    """Parse a file written by ``simulate``; floats round-trip exactly."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SIM_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            rec = {k: float(v) for k, v in row.items() if k not in ("method", "seed")}
            rec["method"] = row["method"]
            rec["seed"] = int(row["seed"])
            out.append(rec)
    return out


def cmd_simulate(args) -> int:
    spec = load_scenario(Path(args.scenario))
    out_path = Path(args.out)
    try:
        fh = open(out_path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out_path}: {exc.strerror}") from exc
    with fh:
        try:
            results = run_study(spec, workers=args.workers)
        except InfeasibleScenarioError as exc:
            raise CliError(EXIT_INFEASIBLE, f"infeasible scenario: {exc}") from exc
        write_results_csv(fh, spec, results)
    for res in results:
        for m, mm in res.methods.items():
            if mm.failures:
                print(f"warning: {m} failed on {mm.failures} replicate(s) in weight set {res.weight_set}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prevci", description="Confidence intervals for prevalence from surveys.")
    sub = parser.add_subparsers(dest="command", required=True)

    ci = sub.add_parser("ci", help="compute confidence intervals")
    ci.add_argument("--method", action="append", required=True, choices=sorted(METHODS),
                    help="interval method; repeat for several")
    ci.add_argument("--stratum-file", help="CSV with header stratum,weight,n,x")
    ci.add_argument("--individual-file", help="CSV with header weight,positive")
    ci.add_argument("--x", type=int, help="positives in a simple random sample")
    ci.add_argument("--n", type=int, help="size of a simple random sample")
    ci.add_argument("--spec-x", type=int, help="positives among negative controls")
    ci.add_argument("--spec-n", type=int, help="number of negative controls")
    ci.add_argument("--sens-x", type=int, help="positives among positive controls")
    ci.add_argument("--sens-n", type=int, help="number of positive controls")
    ci.add_argument("--alpha", type=float, default=0.05)
    ci.add_argument("--mc", type=int, default=DEFAULT_MC_SAMPLES, help="Monte Carlo samples per bound")
    ci.add_argument("--seed", type=int, help="required for Monte Carlo methods")
    ci.add_argument("--lr-variance", choices=LR_VARIANCE_FORMS, default="source")
    ci.add_argument("--format", choices=("json", "text"), default="json")
    ci.set_defaults(func=cmd_ci)

    sim = sub.add_parser("simulate", help="run a coverage simulation scenario")
    sim.add_argument("scenario", help="scenario JSON file")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--workers", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
