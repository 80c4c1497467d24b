"""Parameter sweeps that produce tidy result tables.

Each sweep point is evaluated independently; a failure at one point is
recorded in that row's ``error`` column and the sweep carries on. All
randomness is derived from ``(seed, point index, draw index)`` so reruns are
byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .closedform import ClosedFormNotApplicable, closed_form_rates
from .ndris import quantize, random_ndris
from .optimize import GaParams, ha1, ha2, run_ga
from .rate import baseline_rates, monte_carlo_rates, reduction
from .scenario import REFERENCE_USER_CENTER, Scenario, reference_preset

KINDS = ("random-histogram", "vs-M", "vs-N", "vs-P", "vs-distance", "vs-rician-bsris",
         "ga-convergence", "benchmark-compare", "onebit-compare")

DEFAULT_AXES = {
    "random-histogram": (128,),
    "vs-M": (32, 64, 128, 256),
    "vs-N": (8, 16, 32, 64),
    "vs-P": (0, 10, 20, 30, 40),
    "vs-distance": (5, 10, 15, 20, 25, 30),
    "vs-rician-bsris": (2, 4, 8, 16, 32),
    "ga-convergence": (2.0, 2.5, 2.8),
    "benchmark-compare": (32, 64, 128),
    "onebit-compare": (32, 64, 128),
}

AXIS_NAMES = {
    "random-histogram": "m", "vs-M": "m", "vs-N": "n", "vs-P": "p_dbm",
    "vs-distance": "bs_ris_distance_m", "vs-rician-bsris": "rician_bs_ris",
    "ga-convergence": "exponent_bs_ris", "benchmark-compare": "m", "onebit-compare": "n",
}

COLUMNS = ("experiment", "axis", "axis_value", "scheme", "draw", "epoch", "precoder",
           "mc_sum_rate", "mc_sum_rate_se", "cf_sum_rate", "baseline_sum_rate", "reduction",
           "per_user_rates", "seed", "build_id", "error")

BUILD_ID = f"ndcrack-{__version__}"
HEURISTIC_DRAWS = 10


@dataclass(frozen=True)
class SweepSpec:
    """One experiment: its kind, axis values and Monte Carlo budget.

    ``m``, ``n`` and ``p_dbm`` fix the parameters that are not swept; left as
    None they come from ``config`` or default to 128, 32 and 20 dBm.
    ``config`` holds scenario fields laid over the reference deployment.
    ``ga_overrides`` adjusts :class:`GaParams` fields.
    """

    kind: str
    axis: Sequence[float] = ()
    trials: int = 500
    draws: int = 50
    precoder: str = "mrt"
    seed: int = 0
    m: Optional[int] = None
    n: Optional[int] = None
    p_dbm: Optional[float] = None
    config: Optional[dict] = None
    ga_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment {self.kind!r}; choose from {', '.join(KINDS)}")
        if not self.axis:
            object.__setattr__(self, "axis", DEFAULT_AXES[self.kind])
        object.__setattr__(self, "axis", tuple(self.axis))
        if self.trials < 1 or self.draws < 1:
            raise ValueError("trials and draws must be at least 1")
        if self.precoder not in ("mrt", "zf"):
            raise ValueError("precoder must be 'mrt' or 'zf'")


_FIXED = (("num_bs_antennas", "m", 128), ("num_ris_elements", "n", 32),
          ("tx_power_per_user_dbm", "p_dbm", 20.0))


def _scenario(spec: SweepSpec, **over) -> Scenario:
    cfg = dict(spec.config or {})
    for key, attr, default in _FIXED:
        value = getattr(spec, attr)
        if value is not None:
            cfg[key] = value
        cfg.setdefault(key, default)
    cfg.update(over)
    m, n = cfg.pop("num_bs_antennas"), cfg.pop("num_ris_elements")
    return reference_preset(int(m), int(n), seed=spec.seed, **cfg)


def _ris_on_line(spec: SweepSpec, d: float) -> tuple:
    """RIS position at distance ``d`` from the BS toward the user-region centre."""
    bs = np.asarray(_scenario(spec).bs_position, float)
    u = np.asarray(REFERENCE_USER_CENTER, float) - bs
    return tuple(bs + d * u / np.linalg.norm(u))


def _cf(scn: Scenario, ris, precoder: str) -> Optional[float]:
    if precoder != "mrt":
        return None
    try:
        return closed_form_rates(scn, ris).sum_rate
    except ClosedFormNotApplicable:
        return None


def _row(spec: SweepSpec, x, **values) -> dict:
    row = dict.fromkeys(COLUMNS)
    row.update(experiment=spec.kind, axis=AXIS_NAMES[spec.kind], axis_value=x,
               precoder=spec.precoder, seed=spec.seed, build_id=BUILD_ID)
    row.update(values)
    return row


def _join(rates) -> str:
    return ";".join(repr(float(r)) for r in rates)


def _evaluate_surfaces(spec, scn, surfaces, mc_seed, baseline):
    """Average Monte Carlo (and closed-form) sum rate over a list of surfaces."""
    reports = [monte_carlo_rates(scn, r, spec.precoder, spec.trials, mc_seed) for r in surfaces]
    sums = np.array([rep.sum_rate for rep in reports])
    se = (float(sums.std(ddof=1) / math.sqrt(len(sums))) if len(sums) > 1
          else reports[0].sum_rate_se)
    cfs = [_cf(scn, r, spec.precoder) for r in surfaces]
    cf = None if any(c is None for c in cfs) else float(np.mean(cfs))
    mean = float(sums.mean())
    return dict(mc_sum_rate=mean, mc_sum_rate_se=se, cf_sum_rate=cf,
                baseline_sum_rate=baseline, reduction=reduction(mean, baseline),
                per_user_rates=_join(np.mean([rep.per_user_rate for rep in reports], axis=0)))


def _random_surfaces(spec, n, point, count=None, bits=None):
    count = spec.draws if count is None else count
    return [random_ndris(n, np.random.default_rng([spec.seed, point, d]), bits)
            for d in range(count)]


def _point_scenario(spec: SweepSpec, x) -> Scenario:
    k = spec.kind
    if k in ("vs-M", "random-histogram", "benchmark-compare"):
        return _scenario(spec, num_bs_antennas=int(x))
    if k in ("vs-N", "onebit-compare"):
        return _scenario(spec, num_ris_elements=int(x))
    if k == "vs-P":
        return _scenario(spec, tx_power_per_user_dbm=float(x))
    if k == "vs-distance":
        return _scenario(spec, ris_position=_ris_on_line(spec, float(x)))
    if k == "vs-rician-bsris":
        return _scenario(spec, rician_bs_ris=float(x))
    return _scenario(spec, exponent_bs_ris=float(x))


def _run_point(spec: SweepSpec, point: int, x) -> List[dict]:
    scn = _point_scenario(spec, x)
    mc_seed = [spec.seed, point]
    k = spec.kind

    if k == "ga-convergence":
        res = run_ga(scn, GaParams.for_scenario(scn, **spec.ga_overrides))
        return [_row(spec, x, scheme="ga", epoch=h.epoch, cf_sum_rate=h.best_sum_rate)
                for h in res.history]

    base = baseline_rates(scn, spec.precoder, spec.trials, mc_seed).sum_rate

    if k == "random-histogram":
        rows = []
        for d, r in enumerate(_random_surfaces(spec, scn.N, point)):
            vals = _evaluate_surfaces(spec, scn, [r], mc_seed, base)
            rows.append(_row(spec, x, scheme="random", draw=d, **vals))
        return rows

    if k == "onebit-compare":
        cont = _random_surfaces(spec, scn.N, point)
        return [_row(spec, x, scheme="continuous",
                     **_evaluate_surfaces(spec, scn, cont, mc_seed, base)),
                _row(spec, x, scheme="1-bit",
                     **_evaluate_surfaces(spec, scn, [quantize(r, 1) for r in cont],
                                          mc_seed, base))]

    if k == "benchmark-compare":
        h = min(spec.draws, HEURISTIC_DRAWS)
        rngs = [np.random.default_rng([spec.seed, point, d, 7]) for d in range(h)]
        ga_params = GaParams.for_scenario(scn, **spec.ga_overrides)
        schemes = [
            ("random", _random_surfaces(spec, scn.N, point)),
            ("ha1", [ha1(scn, g) for g in rngs]),
            ("ha2", [ha2(scn, ga_params, g) for g in rngs]),
            ("ga", [run_ga(scn, ga_params).best]),
        ]
        rows = [_row(spec, x, scheme="no-attack", mc_sum_rate=base, baseline_sum_rate=base,
                     reduction=0.0)]
        rows += [_row(spec, x, scheme=name, **_evaluate_surfaces(spec, scn, s, mc_seed, base))
                 for name, s in schemes]
        return rows

    surfaces = _random_surfaces(spec, scn.N, point)
    return [_row(spec, x, scheme="random", **_evaluate_surfaces(spec, scn, surfaces,
                                                                 mc_seed, base))]


def run_sweep(spec: SweepSpec) -> List[Dict]:
    """Evaluate every axis point of ``spec``; returns tidy rows with :data:`COLUMNS`."""
    rows = []
    for point, x in enumerate(spec.axis):
        try:
            rows.extend(_run_point(spec, point, x))
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rows.append(_row(spec, x, error=f"{type(exc).__name__}: {exc}"))
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def format_results(table: Sequence[dict], fmt: str) -> str:
    """Render rows as CSV or JSON text; the text depends only on the rows."""
    if not table:
        raise ValueError("refusing to format an empty result table")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in table:
            w.writerow([_cell(row.get(c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        rows = [{c: _json_value(row.get(c)) for c in COLUMNS} for row in table]
        return json.dumps(rows, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r} (expected 'csv' or 'json')")


def emit_results(table: Sequence[dict], fmt: str, path) -> None:
    """Write :func:`format_results` output to ``path``; nothing is written on error."""
    text = format_results(table, fmt)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
