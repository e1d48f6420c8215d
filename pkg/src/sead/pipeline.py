"""Composable slot-and-switch pipelines with run-time slot swapping.

A pipeline holds detector slots (``position="rp"``), combiner slots
(``position="combo"``) and a routing table. Detector slots read a bound
stream; combiner slots read up to ``max_ports`` producers; sinks expose
slot outputs as named channels. Execution is lockstep: every slot finishes
sample ``t`` before any slot starts sample ``t + 1``.
"""

from __future__ import annotations

import configparser
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .combiners import LABEL_METHODS, SCORE_METHODS, WEIGHT_TOL, combine_scores
from .core import DataStream
from .detectors import CAPACITY, DEFAULT_WINDOW, DETECTORS, DetectorSpec

DEFAULT_RP_SLOTS = 7
DEFAULT_COMBO_SLOTS = 3
DEFAULT_PORTS = 4
POSITIONS = ("rp", "combo")


class PipelineError(ValueError):
    """Invalid pipeline, binding or swap request."""


@dataclass(frozen=True)
class Identity:
    """Pass-through content: copies its single input (or a stream's first feature)."""


IDENTITY = Identity()


@dataclass
class CombinerSpec:
    method: str = "averaging"
    label_method: str = "or"
    weights: Optional[List[float]] = None
    conventional: bool = False

    def __post_init__(self):
        if self.method not in SCORE_METHODS:
            raise PipelineError(f"unknown score combination {self.method!r}")
        if self.label_method not in LABEL_METHODS:
            raise PipelineError(f"unknown label combination {self.label_method!r}")
        if self.weights is not None:
            self.weights = [float(w) for w in self.weights]

    def apply(self, inputs):
        return combine_scores(self.method, inputs, self.weights, self.conventional)


Content = Union[DetectorSpec, CombinerSpec, Identity]


def content_kind(content) -> str:
    if isinstance(content, DetectorSpec):
        return "detector"
    if isinstance(content, CombinerSpec):
        return "combiner"
    if isinstance(content, Identity):
        return "identity"
    raise PipelineError(f"unsupported slot content {content!r}")


@dataclass
class Slot:
    """A reconfigurable region.

    ``capacity`` maps detector kind to its sub-detector budget and
    defaults to 35 Loda / 25 RS-Hash / 20 xStream.
    """

    id: str
    position: str
    content: Content = IDENTITY
    capacity: Dict[str, int] = field(default_factory=lambda: dict(CAPACITY))

    def __post_init__(self):
        if self.position not in POSITIONS:
            raise PipelineError(f"slot {self.id}: position must be 'rp' or 'combo'")

    @property
    def kind(self) -> str:
        return content_kind(self.content)


def fits(slot: Slot, content) -> List[str]:
    """Reasons ``content`` cannot occupy ``slot`` (empty if it can)."""
    kind = content_kind(content)
    if slot.position == "rp" and kind == "combiner":
        return [f"{slot.id}: kind mismatch, a combiner cannot occupy a detector slot"]
    if slot.position == "combo" and kind == "detector":
        return [f"{slot.id}: kind mismatch, a detector cannot occupy a combiner slot"]
    if kind == "detector":
        budget = slot.capacity.get(content.kind, 0)
        if content.n_estimators > budget:
            return [f"{slot.id}: capacity exceeded, {content.n_estimators} {content.kind} "
                    f"sub-detectors for a budget of {budget}"]
    return []


@dataclass(frozen=True)
class Edge:
    producer: str
    consumer: str
    port: int


@dataclass
class RoutingTable:
    edges: List[Edge] = field(default_factory=list)
    sinks: Dict[str, str] = field(default_factory=dict)  # producer slot -> channel

    def inputs_of(self, consumer: str) -> List[str]:
        ins = sorted((e.port, e.producer) for e in self.edges if e.consumer == consumer)
        return [p for _, p in ins]


@dataclass
class RunResult:
    """Per-channel sink series plus every slot's output series."""

    sinks: Dict[str, np.ndarray]
    outputs: Dict[str, np.ndarray]
    elapsed: float = 0.0


class Pipeline:
    """Slots, routing and stream bindings.

    Parameters
    ----------
    slots : sequence of Slot
    routing : RoutingTable
    bindings : dict
        Slot id to stream name, for slots that read a stream directly.
    mode : {"sequential", "parallel"}
        Parallel mode evaluates detector slots of one sample step on a
        thread pool; reductions stay in slot order so results are identical.
    threads : int, optional
        Pool size in parallel mode.
    block : int
        Samples per lockstep step; 1 is strict per-sample lockstep. Larger
        blocks give the same outputs with less dispatch overhead because
        detector slots are independent and combiners are element-wise.
    max_ports : int
        Input ports per combiner slot.
    backend : str, optional
        Kernel backend for detector slots.
    """

    def __init__(self, slots: Sequence[Slot], routing: RoutingTable,
                 bindings: Optional[Dict[str, str]] = None, mode: str = "sequential",
                 threads: Optional[int] = None, block: int = 1,
                 max_ports: int = DEFAULT_PORTS, backend: Optional[str] = None,
                 name: str = "pipeline"):
        if mode not in ("sequential", "parallel"):
            raise PipelineError(f"mode must be 'sequential' or 'parallel', got {mode!r}")
        if block < 1:
            raise PipelineError("block must be >= 1")
        self.slots = {}
        for s in slots:
            if s.id in self.slots:
                raise PipelineError(f"duplicate slot id {s.id}")
            self.slots[s.id] = s
        self.routing = routing
        self.bindings = dict(bindings or {})
        self.mode = mode
        self.threads = threads
        self.block = int(block)
        self.max_ports = int(max_ports)
        self.backend = backend
        self.name = name
        self._state = None

    # ------------------------------------------------------------------ checks

    def validate(self) -> List[str]:
        """Every routing or content violation; an empty list means valid."""
        v: List[str] = []
        ids = self.slots
        for e in self.routing.edges:
            for end in (e.producer, e.consumer):
                if end not in ids:
                    v.append(f"unknown slot {end} in edge {e.producer} -> {e.consumer}.{e.port}")
        for prod in self.routing.sinks:
            if prod not in ids:
                v.append(f"unknown slot {prod} in sinks")
        for sid in self.bindings:
            if sid not in ids:
                v.append(f"unknown slot {sid} in bindings")
        channels = list(self.routing.sinks.values())
        for ch in sorted({c for c in channels if channels.count(c) > 1}):
            v.append(f"duplicate sink channel {ch}")

        seen = {}
        for e in self.routing.edges:
            key = (e.consumer, e.port)
            if key in seen:
                v.append(f"duplicate producer on {e.consumer}.{e.port}: {seen[key]} and {e.producer}")
            else:
                seen[key] = e.producer
            if e.port < 0 or e.port >= self.max_ports:
                v.append(f"port budget exceeded: {e.consumer}.{e.port} (ports 0..{self.max_ports - 1})")

        for sid, slot in ids.items():
            try:
                v.extend(fits(slot, slot.content))
            except PipelineError as exc:
                v.append(str(exc))
                continue
            ins = self.routing.inputs_of(sid)
            kind = slot.kind
            if len(ins) > self.max_ports:
                v.append(f"port budget exceeded: {sid} has {len(ins)} inputs, max {self.max_ports}")
            if slot.position == "rp" and ins:
                v.append(f"{sid}: detector slots read streams, not slot outputs")
            if kind == "detector" and sid not in self.bindings:
                v.append(f"{sid}: detector slot is not bound to a stream")
            if kind == "combiner":
                if not ins:
                    v.append(f"{sid}: combiner has no inputs")
                if sid in self.bindings:
                    v.append(f"{sid}: combiner slots cannot be bound to a stream")
                c = slot.content
                if c.method == "weighted":
                    if c.weights is None:
                        v.append(f"{sid}: weighted combination needs weights")
                    elif len(c.weights) != len(ins):
                        v.append(f"{sid}: {len(c.weights)} weights for {len(ins)} inputs")
                    elif abs(sum(c.weights) - 1.0) > WEIGHT_TOL or min(c.weights) < 0:
                        v.append(f"{sid}: weights must be non-negative and sum to 1")
                elif c.weights is not None:
                    v.append(f"{sid}: weights given for {c.method} combination")
            if kind == "identity":
                n_src = len(ins) + (1 if sid in self.bindings else 0)
                if n_src != 1:
                    v.append(f"{sid}: identity slot needs exactly one source, has {n_src}")

        if not any(u.startswith("unknown slot") for u in v):
            cyc = self._cycle()
            if cyc:
                v.append("cycle: " + " -> ".join(cyc))
            else:
                reach = self._reaches_sink()
                for sid, slot in ids.items():
                    if slot.kind == "detector" and not reach.get(sid, False):
                        v.append(f"{sid}: detector output does not reach a sink")
        return v

    def _consumers(self, sid):
        return [e.consumer for e in self.routing.edges if e.producer == sid]

    def _cycle(self):
        color = dict.fromkeys(self.slots, 0)
        path = []

        def visit(u):
            color[u] = 1
            path.append(u)
            for w in self._consumers(u):
                if color[w] == 1:
                    return path[path.index(w):] + [w]
                if color[w] == 0:
                    found = visit(w)
                    if found:
                        return found
            color[u] = 2
            path.pop()
            return None

        for u in self.slots:
            if color[u] == 0:
                found = visit(u)
                if found:
                    return found
        return None

    def _reaches_sink(self):
        memo = {}

        def reach(u):
            if u not in memo:
                memo[u] = u in self.routing.sinks or any(reach(w) for w in self._consumers(u))
            return memo[u]

        return {u: reach(u) for u in self.slots}

    def topological_order(self) -> List[str]:
        indeg = {s: 0 for s in self.slots}
        for e in self.routing.edges:
            indeg[e.consumer] += 1
        order_key = list(self.slots)
        ready = [s for s in order_key if indeg[s] == 0]
        out = []
        while ready:
            u = ready.pop(0)
            out.append(u)
            for w in self._consumers(u):
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
            ready.sort(key=order_key.index)
        return out

    def require_valid(self):
        v = self.validate()
        if v:
            raise PipelineError("invalid pipeline:\n  " + "\n  ".join(v))

    # --------------------------------------------------------------- execution

    def _build(self, sid, stream: DataStream, start: int):
        spec = self.slots[sid].content
        det = spec.build(stream.dimension, backend=self.backend)
        det.calibrate(stream.X[start:start + spec.window])
        return det

    def start(self, streams: Dict[str, DataStream]):
        """Bind streams, calibrate detector slots and rewind to sample 0."""
        self.require_valid()
        order = self.topological_order()
        lengths = {}
        for sid in order:
            slot = self.slots[sid]
            if sid in self.bindings:
                name = self.bindings[sid]
                if name not in streams:
                    raise PipelineError(f"{sid}: no stream named {name!r}")
                lengths[sid] = len(streams[name])
            else:
                ins = self.routing.inputs_of(sid)
                ls = {lengths[p] for p in ins}
                if len(ls) != 1:
                    raise PipelineError(
                        f"{sid}: inputs have different stream lengths {sorted(ls)}")
                lengths[sid] = ls.pop()
        dets = {}
        for sid in order:
            if self.slots[sid].kind == "detector":
                stream = streams[self.bindings[sid]]
                dets[sid] = self._build(sid, stream, 0)
        self._state = {
            "streams": streams,
            "order": order,
            "lengths": lengths,
            "dets": dets,
            "t": 0,
            "out": {sid: np.empty(n) for sid, n in lengths.items()},
            "elapsed": 0.0,
        }
        return self

    @property
    def position(self) -> int:
        """Index of the next sample to process."""
        return self._require_started()["t"]

    def _require_started(self):
        if self._state is None:
            raise PipelineError("pipeline has not been started")
        return self._state

    def _eval_slot(self, sid, a, b):
        st = self._state
        slot = self.slots[sid]
        n = st["lengths"][sid]
        hi = min(b, n)
        if a >= hi:
            return
        out = st["out"][sid]
        kind = slot.kind
        if kind == "detector":
            X = st["streams"][self.bindings[sid]].X
            det = st["dets"][sid]
            if hi - a == 1:
                out[a] = det.process(X[a])
            else:
                out[a:hi] = det.score_stream(X[a:hi])
        elif kind == "identity":
            if sid in self.bindings:
                out[a:hi] = st["streams"][self.bindings[sid]].X[a:hi, 0]
            else:
                out[a:hi] = st["out"][self.routing.inputs_of(sid)[0]][a:hi]
        else:
            ins = [st["out"][p][a:hi] for p in self.routing.inputs_of(sid)]
            out[a:hi] = slot.content.apply(ins)

    def advance(self, n: Optional[int] = None) -> int:
        """Process up to ``n`` more samples (all remaining if None); return samples done."""
        st = self._require_started()
        total = max(st["lengths"].values()) if st["lengths"] else 0
        stop = total if n is None else min(total, st["t"] + int(n))
        order = st["order"]
        sources = [s for s in order if self.slots[s].position == "rp"]
        rest = [s for s in order if self.slots[s].position != "rp"]
        pool = None
        if self.mode == "parallel" and len(sources) > 1:
            pool = ThreadPoolExecutor(max_workers=self.threads or min(len(sources), os.cpu_count() or 1))
        t0 = time.perf_counter()
        try:
            t = st["t"]
            while t < stop:
                b = min(stop, t + self.block)
                if pool is None:
                    for sid in sources:
                        self._eval_slot(sid, t, b)
                else:
                    # Barrier: every source slot finishes this step before combining.
                    list(pool.map(lambda s: self._eval_slot(s, t, b), sources))
                for sid in rest:
                    self._eval_slot(sid, t, b)
                t = b
            st["t"] = t
        finally:
            if pool is not None:
                pool.shutdown()
        st["elapsed"] += time.perf_counter() - t0
        return st["t"]

    def finish(self) -> RunResult:
        """Run any remaining samples and collect series."""
        st = self._require_started()
        self.advance()
        outputs = {sid: arr.copy() for sid, arr in st["out"].items()}
        sinks = {ch: outputs[p] for p, ch in self.routing.sinks.items()}
        return RunResult(sinks, outputs, st["elapsed"])

    def run(self, streams: Dict[str, DataStream]) -> RunResult:
        """Process whole streams; every detector calibrates on its first W samples."""
        return self.start(streams).finish()

    def swap_slot(self, sid: str, content: Content):
        """Replace a slot's content between samples.

        A started pipeline builds the new detector fresh, calibrated on the
        next W samples of its stream, so later outputs equal a fresh
        pipeline started at the swap index.
        """
        if sid not in self.slots:
            raise PipelineError(f"unknown slot {sid}")
        slot = self.slots[sid]
        problems = fits(slot, content)
        if problems:
            raise PipelineError(problems[0])
        candidate = replace(slot, content=content)
        old = slot
        self.slots[sid] = candidate
        problems = self.validate()
        if problems:
            self.slots[sid] = old
            raise PipelineError("swap would invalidate the pipeline:\n  " + "\n  ".join(problems))
        st = self._state
        if st is not None:
            st["dets"].pop(sid, None)
            if candidate.kind == "detector":
                stream = st["streams"][self.bindings[sid]]
                st["dets"][sid] = self._build(sid, stream, st["t"])
        return self

    def measure_swap_cost(self, sid: str, content: Content) -> float:
        """Wall-clock seconds spent in :meth:`swap_slot`."""
        t0 = time.perf_counter()
        self.swap_slot(sid, content)
        return time.perf_counter() - t0

    def detector_slots(self):
        return [s for s in self.slots.values() if s.kind == "detector"]

    def with_seed(self, seed: int) -> "Pipeline":
        """Copy with every detector slot's master seed replaced."""
        slots = [replace(s, content=replace(s.content, seed=int(seed)))
                 if s.kind == "detector" else replace(s) for s in self.slots.values()]
        return Pipeline(slots, self.routing, self.bindings, self.mode, self.threads,
                        self.block, self.max_ports, self.backend, self.name)

    def with_mode(self, mode: str, threads: Optional[int] = None,
                  block: Optional[int] = None) -> "Pipeline":
        slots = [replace(s) for s in self.slots.values()]
        return Pipeline(slots, self.routing, self.bindings, mode,
                        self.threads if threads is None else threads,
                        self.block if block is None else block, self.max_ports,
                        self.backend, self.name)

    def __repr__(self):
        return f"Pipeline({self.name!r}, slots={list(self.slots)}, mode={self.mode})"


# ---------------------------------------------------------------------------
# Configuration files (INI)
# ---------------------------------------------------------------------------

_DETECTOR_OPTIONS = {
    "loda": {"bins": int},
    "rshash": {"rows": int, "mod": int},
    "xstream": {"rows": int, "mod": int, "k": int, "bins": float, "shift": "bool"},
}


def _split(value: str) -> List[str]:
    return [t.strip() for t in value.replace("\n", ",").split(",") if t.strip()]


def _parse_edge(text: str) -> Edge:
    try:
        prod, dest = (t.strip() for t in text.split("->"))
        consumer, port = dest.rsplit(".", 1)
        return Edge(prod, consumer.strip(), int(port))
    except ValueError:
        raise PipelineError(f"bad edge {text!r}, expected 'PRODUCER -> CONSUMER.PORT'") from None


def parse_config(text: str, name: str = "pipeline", backend: Optional[str] = None) -> Pipeline:
    """Build a pipeline from INI text; see the README for the format."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise PipelineError(f"config syntax error: {e}") from None
    top = cp["pipeline"] if cp.has_section("pipeline") else {}
    get = lambda sec, key, default=None: sec.get(key, top.get(key, default))
    slots, edges, bindings = [], [], {}
    rp_index = 0
    for sec_name in cp.sections():
        if not sec_name.startswith("slot:"):
            continue
        sid = sec_name[5:].strip()
        sec = cp[sec_name]
        position = sec.get("position", "rp")
        content_name = sec.get("content", "identity").strip().lower()
        capacity = dict(CAPACITY)
        for kind in CAPACITY:
            if f"capacity.{kind}" in sec:
                capacity[kind] = int(sec[f"capacity.{kind}"])
        try:
            if content_name == "identity":
                content = IDENTITY
            elif content_name == "combiner":
                weights = sec.get("weights")
                content = CombinerSpec(
                    method=sec.get("method", "averaging"),
                    label_method=sec.get("label_method", "or"),
                    weights=[float(w) for w in _split(weights)] if weights else None,
                    conventional=sec.getboolean("conventional", False),
                )
            elif content_name in DETECTORS:
                options = {}
                for key, typ in _DETECTOR_OPTIONS[content_name].items():
                    if key in sec:
                        options[key] = sec.getboolean(key) if typ == "bool" else typ(sec[key])
                n_est = int(sec.get("n_estimators", capacity[content_name]))
                fi = sec.get("first_index")
                content = DetectorSpec(
                    kind=content_name,
                    n_estimators=n_est,
                    window=int(get(sec, "window", DEFAULT_WINDOW)),
                    seed=int(get(sec, "seed", 0)),
                    first_index=int(fi) if fi is not None else rp_index * capacity[content_name],
                    fixed_point=str(get(sec, "fixed_point", "false")).lower() in ("1", "true", "yes", "on"),
                    options=options,
                )
            else:
                raise PipelineError(f"slot {sid}: unknown content {content_name!r}")
        except (TypeError, ValueError) as e:
            raise PipelineError(f"slot {sid}: {e}") from None
        if position == "rp":
            rp_index += 1
        slots.append(Slot(sid, position, content, capacity))
        if "bind" in sec:
            bindings[sid] = sec["bind"].strip()
        if "inputs" in sec:
            for port, prod in enumerate(_split(sec["inputs"])):
                edges.append(Edge(prod, sid, port))
    if cp.has_section("routing") and "edges" in cp["routing"]:
        edges.extend(_parse_edge(t) for t in cp["routing"]["edges"].splitlines() if t.strip())
    sinks = dict(cp["sinks"]) if cp.has_section("sinks") else {}
    sinks = {k: v.strip() for k, v in sinks.items()}
    return Pipeline(
        slots, RoutingTable(edges, sinks), bindings,
        mode=top.get("mode", "sequential"),
        threads=int(top["threads"]) if "threads" in top else None,
        block=int(top.get("block", 1)),
        max_ports=int(top.get("ports", DEFAULT_PORTS)),
        backend=backend,
        name=top.get("name", name),
    )


def load_config(path: str, backend: Optional[str] = None) -> Pipeline:
    """Load an INI config from a file path or a bundled name such as ``"fig-c"``."""
    if not os.path.exists(path):
        try:
            path = config_path(path)
        except FileNotFoundError:
            raise FileNotFoundError(f"config not found: {path}") from None
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, os.path.splitext(os.path.basename(path))[0], backend)


def config_path(name: str) -> str:
    """Path of a bundled config, e.g. ``"fig-c"`` or ``"combo/C223"``."""
    here = os.path.join(os.path.dirname(__file__), "configs")
    path = os.path.join(here, name if name.endswith(".cfg") else name + ".cfg")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no bundled config {name!r}")
    return path


def stream_names(pipeline: Pipeline) -> List[str]:
    """Distinct bound stream names in slot order."""
    out = []
    for sid in pipeline.slots:
        n = pipeline.bindings.get(sid)
        if n is not None and n not in out:
            out.append(n)
    return out
