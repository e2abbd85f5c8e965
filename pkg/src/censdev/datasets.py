"""Dataset ingestion, serialization, bundled data and synthetic generation.

File format: comma-delimited UTF-8 with a mandatory header.  The first five
columns are fixed -- ``outcome, censor, cut1, cut2, trials`` -- and any
further columns are numeric covariates.  ``censor`` is one of ``none``,
``left``, ``right`` or ``interval``; censored rows leave ``outcome`` empty
(the missing-value encoding) and carry their cutoff(s) in the cut columns.
A single trailing empty field per row is tolerated, so files written with a
trailing comma still parse.

The bundled survival dataset is the classical acute myeloid leukemia
maintenance-chemotherapy series (23 patients, 5 right-censored follow-up
times; ``group`` = 1 for the maintained arm).  It ships verbatim from the
published table.  The rare-adverse-event binomial data used in drug-safety
meta-analyses are not publicly printed, so :func:`synthetic_ae_dataset`
generates a stand-in with the same shape: study-level counts for five drugs
in two drug classes, with small counts left-censored at study-specific
reporting cutoffs (a count below cutoff k is only known to be <= k - 1).
"""

from __future__ import annotations

import hashlib
import math
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit

from .exceptions import ParseError
from .likelihood import (
    CensoredDataset,
    CensorKind,
    IntervalCensored,
    LeftCensored,
    Observation,
    Observed,
    RightCensored,
)

__all__ = [
    "ingest",
    "parse_dataset",
    "serialize",
    "dataset_fingerprint",
    "aml_dataset",
    "synthetic_ae_dataset",
    "AE_COVARIATES",
    "DRUG_CLASSES",
]

FIXED_COLUMNS = ("outcome", "censor", "cut1", "cut2", "trials")
CENSOR_KINDS = ("none", "left", "right", "interval")

AE_COVARIATES = ("drug", "drug_class", "study")
# Five drugs in two mechanism classes (two in class 0, three in class 1).
DRUG_CLASSES = (0, 0, 1, 1, 1)


def _num(cell: str, line: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"expected a number, got {cell!r}", line, column) from None


def _opt_num(cell: str, line: int, column: str) -> Optional[float]:
    return None if cell == "" else _num(cell, line, column)


def _parse_row(cells: list[str], names: tuple[str, ...], line: int) -> Observation:
    fixed = dict(zip(FIXED_COLUMNS, cells[:5]))
    censor = fixed["censor"]
    if censor not in CENSOR_KINDS:
        raise ParseError(
            f"censor must be one of {CENSOR_KINDS}, got {censor!r}", line, "censor"
        )
    outcome_cell = fixed["outcome"]
    cut1 = _opt_num(fixed["cut1"], line, "cut1")
    cut2 = _opt_num(fixed["cut2"], line, "cut2")

    if censor == "none":
        if outcome_cell == "":
            raise ParseError("censor=none requires an outcome value", line, "outcome")
        if cut1 is not None or cut2 is not None:
            raise ParseError(
                "censor=none requires empty cut columns", line, "cut1"
            )
        kind: CensorKind = Observed(_num(outcome_cell, line, "outcome"))
    else:
        if outcome_cell != "":
            raise ParseError(
                "censored rows must leave the outcome empty", line, "outcome"
            )
        if cut1 is None:
            raise ParseError(f"censor={censor} requires cut1", line, "cut1")
        if censor == "left":
            if cut2 is not None:
                raise ParseError("censor=left takes no cut2", line, "cut2")
            kind = LeftCensored(cut1)
        elif censor == "right":
            if cut2 is not None:
                raise ParseError("censor=right takes no cut2", line, "cut2")
            kind = RightCensored(cut1)
        else:
            if cut2 is None:
                raise ParseError("censor=interval requires cut2", line, "cut2")
            if not cut1 < cut2:
                raise ParseError(
                    f"interval cutoffs out of order: {cut1} >= {cut2}", line, "cut1"
                )
            kind = IntervalCensored(cut1, cut2)

    trials_cell = fixed["trials"]
    trials = None
    if trials_cell != "":
        value = _num(trials_cell, line, "trials")
        if value != int(value) or value < 1:
            raise ParseError(
                f"trials must be a positive integer, got {trials_cell!r}",
                line,
                "trials",
            )
        trials = int(value)

    covariates = tuple(
        _num(cell, line, name) for cell, name in zip(cells[5:], names)
    )
    return Observation(outcome=kind, covariates=covariates, trials=trials)


def parse_dataset(text: str) -> CensoredDataset:
    """Parse dataset file contents; raises :class:`ParseError` with line context."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    header = [h.strip() for h in lines[0].split(",")]
    if tuple(header[:5]) != FIXED_COLUMNS:
        raise ParseError(
            f"header must start with {','.join(FIXED_COLUMNS)}, got {lines[0]!r}", 1
        )
    covariate_names = tuple(header[5:])
    n_cols = len(header)

    observations = []
    for offset, raw in enumerate(lines[1:], start=2):
        if raw.strip() == "":
            continue
        cells = [c.strip() for c in raw.split(",")]
        # Tolerate one trailing empty field (files written with a trailing comma).
        if len(cells) == n_cols + 1 and cells[-1] == "":
            cells = cells[:-1]
        if len(cells) != n_cols:
            raise ParseError(
                f"expected {n_cols} fields, got {len(cells)}", offset
            )
        observations.append(_parse_row(cells, covariate_names, offset))
    if not observations:
        raise ParseError("no data rows", len(lines))
    return CensoredDataset(tuple(observations), covariate_names)


def ingest(path: str | Path) -> CensoredDataset:
    """Read a dataset file from disk, preserving row order."""
    return parse_dataset(Path(path).read_text(encoding="utf-8"))


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def serialize(data: CensoredDataset) -> str:
    """Render a dataset in the file format; re-ingesting reproduces it exactly."""
    lines = [",".join(FIXED_COLUMNS + data.covariate_names)]
    for obs in data:
        outcome = obs.outcome
        if isinstance(outcome, Observed):
            fixed = [_fmt(outcome.value), "none", "", ""]
        elif isinstance(outcome, LeftCensored):
            fixed = ["", "left", _fmt(outcome.cut), ""]
        elif isinstance(outcome, RightCensored):
            fixed = ["", "right", _fmt(outcome.cut), ""]
        else:
            fixed = ["", "interval", _fmt(outcome.cut1), _fmt(outcome.cut2)]
        fixed.append("" if obs.trials is None else str(obs.trials))
        lines.append(",".join(fixed + [_fmt(c) for c in obs.covariates]))
    return "\n".join(lines) + "\n"


def dataset_fingerprint(data: CensoredDataset) -> str:
    """Stable content hash used to guard report comparability."""
    return hashlib.sha256(serialize(data).encode("utf-8")).hexdigest()[:16]


def aml_dataset() -> CensoredDataset:
    """The bundled acute myeloid leukemia maintenance series."""
    text = (
        resources.files("censdev").joinpath("data/aml.csv").read_text(encoding="utf-8")
    )
    return parse_dataset(text)


def synthetic_ae_dataset(
    n_studies: int = 25,
    seed: int = 20260801,
    base_incidence: float = 0.025,
    drug_effects: tuple[float, ...] = (-0.9, 0.7, -0.6, 0.2, 1.0),
) -> CensoredDataset:
    """Synthetic study-level adverse-event counts with reporting cutoffs.

    Each study tests one of five drugs; the true incidence sits on the logit
    scale at logit(base_incidence) + drug effect.  A study reports its count
    only when the count reaches its cutoff; smaller counts appear as
    left-censored at cutoff - 1, the non-ignorable pattern of rare-event
    reporting.
    """
    rng = np.random.default_rng(seed)
    n_drugs = len(drug_effects)
    base = math.log(base_incidence) - math.log1p(-base_incidence)
    incidences = expit(base + np.asarray(drug_effects))

    observations = []
    for study in range(n_studies):
        drug = study % n_drugs
        trials = int(np.clip(np.round(rng.lognormal(4.8, 0.55)), 30, 800))
        count = int(rng.binomial(trials, incidences[drug]))
        cutoff = int(rng.integers(2, 6))
        covariates = (float(drug), float(DRUG_CLASSES[drug]), float(study))
        if count < cutoff:
            outcome: CensorKind = LeftCensored(float(cutoff - 1))
        else:
            outcome = Observed(float(count))
        observations.append(
            Observation(outcome=outcome, covariates=covariates, trials=trials)
        )
    return CensoredDataset(tuple(observations), AE_COVARIATES)
