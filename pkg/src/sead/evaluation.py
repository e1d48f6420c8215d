"""ROC-AUC, ensemble-size sweeps, combination studies and throughput reports."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .combiners import combine_labels, combine_scores, normalize, threshold_labels
from .core import DataStream
from .detectors import DEFAULT_WINDOW, DetectorSpec, op_count
from .pipeline import Pipeline, RunResult

REPORT_FIELDS = ("scheme", "dataset", "seed", "R", "auc_s", "auc_l", "time", "ops")


def auc_roc(scores, truth) -> float:
    """Rank-based ROC-AUC (Mann-Whitney U); tied pairs count one half."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(truth).reshape(-1)
    if s.shape != y.shape:
        raise ValueError("scores and truth differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("truth must be binary")
    pos = int(y.sum())
    neg = y.shape[0] - pos
    if pos == 0 or neg == 0:
        raise ValueError("degenerate ground truth: need both classes")
    ranks = rankdata(s)  # average ranks resolve ties as 0.5 per pair
    u = ranks[y == 1].sum() - pos * (pos + 1) / 2.0
    return float(u / (pos * neg))


def auc_pairwise(scores, truth) -> float:
    """Exhaustive pair enumeration; the reference for :func:`auc_roc`."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(truth)
    p, n = s[y == 1], s[y == 0]
    if p.size == 0 or n.size == 0:
        raise ValueError("degenerate ground truth: need both classes")
    diff = p[:, None] - n[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / (p.size * n.size))


@dataclass
class EvalReport:
    auc_score: Optional[float]
    auc_label: Optional[float]
    execution_time: float
    op_total: int
    mode: str = "sequential"

    @property
    def op_rate(self) -> float:
        """Operations per second."""
        if self.execution_time <= 0:
            return float("inf") if self.op_total else 0.0
        return self.op_total / self.execution_time

    @property
    def gops(self) -> float:
        return self.op_rate / 1e9

    def line(self) -> str:
        f = lambda v: "n/a" if v is None else f"{v:.4f}"
        return (f"{self.mode:<10} AUC-S {f(self.auc_score)}  AUC-L {f(self.auc_label)}  "
                f"time {self.execution_time:.4f}s  ops {self.op_total}  "
                f"rate {self.gops:.4f} GOPS")


# ---------------------------------------------------------------------------
# Scheme evaluation: per-slot normalization, thresholding, combination tree
# ---------------------------------------------------------------------------


def evaluate_outputs(pipeline: Pipeline, result: RunResult, contamination: float):
    """Normalized scores and labels for every slot, as the evaluation protocol sees them.

    Detector outputs are min-max normalized over the series and thresholded
    at ``contamination``. Combiners then merge their inputs' normalized
    scores with their score method and their inputs' labels with their
    label method, recursively. Returns ``(scores, labels)`` dicts keyed by
    slot id.
    """
    scores, labels = {}, {}
    for sid in pipeline.topological_order():
        slot = pipeline.slots[sid]
        ins = pipeline.routing.inputs_of(sid)
        if slot.kind == "combiner":
            c = slot.content
            scores[sid] = combine_scores(c.method, [scores[p] for p in ins], c.weights,
                                         c.conventional)
            labels[sid] = combine_labels(c.label_method, [labels[p] for p in ins])
        elif slot.kind == "identity" and ins:
            scores[sid], labels[sid] = scores[ins[0]], labels[ins[0]]
        else:
            scores[sid] = normalize(result.outputs[sid])
            labels[sid] = threshold_labels(scores[sid], contamination)
    return scores, labels


def sink_aucs(pipeline: Pipeline, result: RunResult, truth: Dict[str, np.ndarray],
              contamination: Dict[str, float]):
    """(AUC-S, AUC-L) per sink channel; ``truth`` and ``contamination`` keyed by channel."""
    out = {}
    for prod, ch in pipeline.routing.sinks.items():
        if ch not in truth:
            continue
        sc, lb = evaluate_outputs(pipeline, result, contamination[ch])
        out[ch] = (auc_roc(sc[prod], truth[ch]), auc_roc(lb[prod], truth[ch]))
    return out


def sink_streams(pipeline: Pipeline, streams: Dict[str, DataStream]) -> Dict[str, DataStream]:
    """Stream feeding each sink channel (first bound ancestor)."""
    out = {}
    for prod, ch in pipeline.routing.sinks.items():
        frontier = [prod]
        while frontier:
            u = frontier.pop(0)
            if u in pipeline.bindings:
                out[ch] = streams[pipeline.bindings[u]]
                break
            frontier.extend(pipeline.routing.inputs_of(u))
    return out


def _truth_for(pipeline, streams):
    truth, cont = {}, {}
    for ch, s in sink_streams(pipeline, streams).items():
        if s.labels is not None and 0 < s.labels.sum() < len(s):
            truth[ch] = s.labels
            cont[ch] = s.contamination
    return truth, cont


# ---------------------------------------------------------------------------
# Ensemble-size sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    kind: str
    R_list: List[int]
    seeds: List[int]
    auc: np.ndarray  # (len(R_list), len(seeds))

    @property
    def mean(self) -> np.ndarray:
        return self.auc.mean(axis=1)

    @property
    def variance(self) -> np.ndarray:
        return self.auc.var(axis=1)

    def table(self) -> str:
        lines = [f"{self.kind}: R, mean AUC, variance over {len(self.seeds)} seed(s)"]
        for R, m, v in zip(self.R_list, self.mean, self.variance):
            lines.append(f"  R={R:<5d} mean {m:.4f}  var {v:.3e}")
        return "\n".join(lines)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def sweep_ensemble(kind: str, stream: DataStream, R_list: Sequence[int], seeds: Sequence[int],
                   window: int = DEFAULT_WINDOW, options: Optional[dict] = None,
                   fixed_point: bool = False, threads: Optional[int] = None,
                   backend: Optional[str] = None) -> SweepResult:
    """Score-AUC for every (R, seed) cell; each detector calibrates on the first W samples."""
    if stream.labels is None:
        raise ValueError("sweep needs a labeled stream")
    cells = [(R, s) for R in R_list for s in seeds]

    def one(cell):
        R, s = cell
        spec = DetectorSpec(kind, int(R), window, int(s), 0, fixed_point, dict(options or {}))
        det = spec.build(stream.dimension, backend=backend).calibrate(stream.X[:window])
        return auc_roc(det.score_stream(stream.X), stream.labels)

    aucs = np.array(_map(one, cells, threads)).reshape(len(R_list), len(seeds))
    return SweepResult(kind, [int(r) for r in R_list], [int(s) for s in seeds], aucs)


# ---------------------------------------------------------------------------
# Combination study
# ---------------------------------------------------------------------------


@dataclass
class ComboCell:
    scheme: str
    dataset: str
    seeds: List[int]
    auc_s: np.ndarray
    auc_l: np.ndarray
    times: np.ndarray
    ops: int

    @property
    def stats(self):
        return (self.auc_s.mean(), self.auc_s.var(), self.auc_l.mean(), self.auc_l.var())


@dataclass
class ComboTable:
    cells: List[ComboCell] = field(default_factory=list)

    def get(self, scheme, dataset) -> ComboCell:
        for c in self.cells:
            if c.scheme == scheme and c.dataset == dataset:
                return c
        raise KeyError((scheme, dataset))

    def records(self):
        for c in self.cells:
            for i, s in enumerate(c.seeds):
                yield {"scheme": c.scheme, "dataset": c.dataset, "seed": s, "R": "",
                       "auc_s": c.auc_s[i], "auc_l": c.auc_l[i], "time": c.times[i],
                       "ops": c.ops}

    def table(self) -> str:
        schemes = list(dict.fromkeys(c.scheme for c in self.cells))
        datasets = list(dict.fromkeys(c.dataset for c in self.cells))
        lines = []
        for title, idx in (("Score AUC mean (variance x1e-3)", 0), ("Label AUC mean (variance x1e-3)", 2)):
            lines.append(title)
            lines.append("  " + "dataset".ljust(12) + "".join(s.rjust(16) for s in schemes))
            for d in datasets:
                row = "  " + d.ljust(12)
                for s in schemes:
                    st = self.get(s, d).stats
                    row += f"{st[idx]:.3f} ({st[idx + 1] * 1e3:.3f})".rjust(16)
                lines.append(row)
        return "\n".join(lines)


def combo_study(schemes: Dict[str, Pipeline], datasets: Dict[str, DataStream],
                seeds: Sequence[int], threads: Optional[int] = None) -> ComboTable:
    """Mean and variance of score and label AUC per (scheme, dataset) over seeds.

    Every scheme must read a single stream; each dataset is bound to it in turn.
    """
    table = ComboTable()
    for sname, pipe in schemes.items():
        names = {n for n in pipe.bindings.values()}
        if len(names) != 1:
            raise ValueError(f"scheme {sname} must read exactly one stream, reads {sorted(names)}")
        if len(pipe.routing.sinks) != 1:
            raise ValueError(f"scheme {sname} must have exactly one sink")
        bound = names.pop()
        ch = next(iter(pipe.routing.sinks.values()))
        for dname, stream in datasets.items():
            if stream.labels is None:
                raise ValueError(f"dataset {dname} is unlabeled")

            def one(seed):
                p = pipe.with_seed(seed)
                res = p.run({bound: stream})
                (a_s, a_l), = sink_aucs(p, res, {ch: stream.labels},
                                        {ch: stream.contamination}).values()
                return a_s, a_l, res.elapsed

            rows = np.array(_map(one, list(seeds), threads))
            ops = pipeline_op_total(pipe, {bound: stream})
            table.cells.append(ComboCell(sname, dname, [int(s) for s in seeds],
                                         rows[:, 0], rows[:, 1], rows[:, 2], ops))
    return table


# ---------------------------------------------------------------------------
# Throughput
# ---------------------------------------------------------------------------


def pipeline_op_total(pipeline: Pipeline, streams: Dict[str, DataStream]) -> int:
    """Analytic operation total of all detector slots.

    Slots running the same detector configuration on the same stream form
    one ensemble, so their sub-detectors are pooled into a single R before
    applying the formula. Identity and combiner slots cost nothing.
    """
    groups: Dict[tuple, int] = {}
    for slot in pipeline.detector_slots():
        spec = slot.content
        name = pipeline.bindings[slot.id]
        s = streams[name]
        key = (spec.kind, name, len(s), s.dimension, spec.rows, spec.k if spec.kind == "xstream" else 1)
        groups[key] = groups.get(key, 0) + spec.n_estimators
    total = 0
    for (kind, _, N, d, w, k), R in groups.items():
        total += op_count(kind, N, R, d, w, k)
    return total


@dataclass
class BenchResult:
    reports: List[EvalReport]
    op_total: int
    swap_costs: List[float] = field(default_factory=list)

    def table(self) -> str:
        return "\n".join(r.line() for r in self.reports)


def bench(pipeline: Pipeline, streams: Dict[str, DataStream],
          threads: Sequence[int] = (1,), block: Optional[int] = None,
          backend: Optional[str] = None) -> BenchResult:
    """Time the pipeline sequentially and in parallel with each thread count.

    Timing covers per-sample processing and combination only; loading and
    calibration are excluded. AUC is taken from the first labeled sink.
    """
    ops = pipeline_op_total(pipeline, streams)
    truth, cont = _truth_for(pipeline, streams)
    runs = [("sequential", None)] + [("parallel", t) for t in threads if t and t > 1]
    # Untimed warm-up so kernel loading is not charged to the first mode.
    warm = pipeline.with_mode("sequential", block=block)
    if backend is not None:
        warm.backend = backend
    warm.run(streams)
    reports = []
    for mode, t in runs:
        p = pipeline.with_mode(mode, threads=t, block=block)
        if backend is not None:
            p.backend = backend
        res = p.run(streams)
        a_s = a_l = None
        aucs = sink_aucs(p, res, truth, cont)
        if aucs:
            a_s, a_l = next(iter(aucs.values()))
        label = mode if t is None else f"par x{t}"
        reports.append(EvalReport(a_s, a_l, res.elapsed, ops, label))
    return BenchResult(reports, ops)


def write_report(records, path: str):
    """Flat CSV, one record per cell."""
    records = list(records)
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        w.writeheader()
        for r in records:
            w.writerow({k: r.get(k, "") for k in REPORT_FIELDS})


def sweep_records(sweep: SweepResult, dataset: str):
    for i, R in enumerate(sweep.R_list):
        for j, s in enumerate(sweep.seeds):
            yield {"scheme": sweep.kind, "dataset": dataset, "seed": s, "R": R,
                   "auc_s": sweep.auc[i, j], "auc_l": "", "time": "", "ops": ""}
