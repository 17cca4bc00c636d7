"""Outlier sweeps comparing the consensus (cs) and spectral (sp) pipelines.

Config files are ``key = value`` lines grouped under ``[section]`` headers::

    [sweep]
    n = 20
    m = 50
    edge_fraction = 1.0, 0.5
    p = 0.1, 0.2, 0.3
    trials = 10
    seed = 0

    [consensus]
    max_iters = 1000

    [spectral]
    inner_mode = linear_consensus
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .assoc import accuracy, generate_synthetic
from .consensus import ConsensusConfig, round_labels, run_consensus
from .exceptions import ConfigError
from .graph import gen_graph
from .spectral import SpectralConfig, procrustes_correct, round_spectral, run_doi

log = logging.getLogger(__name__)


@dataclass
class ExperimentSpec:
    n: list = field(default_factory=lambda: [20])
    m: list = field(default_factory=lambda: [50])
    edge_fraction: list = field(default_factory=lambda: [1.0])
    p: list = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 10)])
    trials: int = 10
    seed: int = 0
    consensus: ConsensusConfig = field(default_factory=ConsensusConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    source_text: str = ""


@dataclass
class TrialResult:
    n: int
    m: int
    edge_fraction: float
    p: float
    trial: int
    acc_cs: float
    acc_sp: float
    rounds_cs: int
    converged_cs: bool
    outer_sp: int
    converged_sp: bool


_SWEEP_KEYS = {
    "n": ("list", int),
    "m": ("list", int),
    "edge_fraction": ("list", float),
    "p": ("list", float),
    "trials": ("scalar", int),
    "seed": ("scalar", int),
}
_CS_KEYS = {"max_iters": int, "conv_tol": float, "distinguished": int, "init": str}
_SP_KEYS = {"outer_iters": int, "inner_mode": str, "inner_iters": int, "epsilon": float,
            "chol_jitter": float, "anchor": int, "angle_tol": float, "init": str}


def _key_line(text: str, section: str, key: str):
    current = None
    for k, raw in enumerate(text.splitlines(), 1):
        ln = raw.strip()
        if ln.startswith("[") and ln.endswith("]"):
            current = ln[1:-1].strip()
        elif current == section and "=" in ln and ln.split("=", 1)[0].strip() == key:
            return k
    return None


def parse_config(text: str, path: str = "<config>") -> ExperimentSpec:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    def fail(section, key, msg):
        line = _key_line(text, section, key)
        where = f"{path}:{line}" if line else path
        raise ConfigError(f"{where}: [{section}] {key}: {msg}")

    known = {"sweep", "consensus", "spectral"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"{path}:{_section_line(text, section)}: unknown section [{section}]")
    experiment = ExperimentSpec(source_text=text)
    if parser.has_section("sweep"):
        for key, raw in parser.items("sweep"):
            if key not in _SWEEP_KEYS:
                fail("sweep", key, "unknown key")
            kind, conv = _SWEEP_KEYS[key]
            try:
                if kind == "list":
                    vals = [conv(v) for v in raw.replace(",", " ").split()]
                    if not vals:
                        raise ValueError("empty list")
                    setattr(experiment, key, vals)
                else:
                    setattr(experiment, key, conv(raw))
            except ValueError as exc:
                fail("sweep", key, f"bad value {raw!r} ({exc})")
    for section, keys, target in (("consensus", _CS_KEYS, experiment.consensus), ("spectral", _SP_KEYS, experiment.spectral)):
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in keys:
                fail(section, key, "unknown key")
            try:
                setattr(target, key, keys[key](raw))
            except ValueError as exc:
                fail(section, key, f"bad value {raw!r} ({exc})")
    if experiment.trials < 1:
        fail("sweep", "trials", "must be >= 1")
    if any(not 0 <= p <= 1 for p in experiment.p):
        fail("sweep", "p", "outlier fractions must lie in [0, 1]")
    if any(not 0 < f <= 1 for f in experiment.edge_fraction):
        fail("sweep", "edge_fraction", "must lie in (0, 1]")
    if any(n < 2 for n in experiment.n):
        fail("sweep", "n", "need at least 2 sensors")
    if any(m < 1 for m in experiment.m):
        fail("sweep", "m", "need at least 1 target")
    if experiment.spectral.inner_mode not in ("exact_average", "linear_consensus"):
        fail("spectral", "inner_mode", "must be exact_average or linear_consensus")
    return experiment


def _section_line(text, section):
    for k, raw in enumerate(text.splitlines(), 1):
        if raw.strip() == f"[{section}]":
            return k
    return "?"


def load_config(path) -> ExperimentSpec:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def trial_rng(seed: int, n: int, m: int, edge_fraction: float, p: float, trial: int) -> np.random.Generator:
    """Independent stream per sweep cell, keyed by its coordinates."""
    key = (n, m, int(round(edge_fraction * 1000)), int(round(p * 1000)), trial)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def graph_kind(edge_fraction: float) -> str:
    return "complete" if edge_fraction >= 1.0 else "random_subset"


def run_trial(experiment: ExperimentSpec, n, m, edge_fraction, p, trial) -> TrialResult:
    rng = trial_rng(experiment.seed, n, m, edge_fraction, p, trial)
    G = gen_graph(graph_kind(edge_fraction), n, edge_fraction, rng)
    A, truth = generate_synthetic(G, m, p, rng)
    cs = run_consensus(A, G, experiment.consensus, rng=rng)
    acc_cs = accuracy(round_labels(cs.relaxed), truth, experiment.consensus.distinguished)
    sp = run_doi(A, G, experiment.spectral, rng=rng)
    acc_sp = accuracy(round_spectral(procrustes_correct(sp.relaxed, experiment.spectral.anchor)), truth,
                      experiment.spectral.anchor)
    return TrialResult(n, m, edge_fraction, p, trial, acc_cs, acc_sp, cs.rounds, cs.converged,
                       sp.outer_rounds, sp.converged)


def _run_cell(args):
    experiment, cell = args
    return run_trial(experiment, *cell)


def sweep_cells(experiment: ExperimentSpec):
    for n in experiment.n:
        for m in experiment.m:
            for f in experiment.edge_fraction:
                for p in experiment.p:
                    for trial in range(experiment.trials):
                        yield (n, m, f, p, trial)


def run_sweep(experiment: ExperimentSpec, workers: int = 1) -> list:
    """All trials, in sweep order regardless of ``workers``."""
    cells = list(sweep_cells(experiment))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_cell, [(experiment, c) for c in cells], chunksize=1))
    results = []
    for c in cells:
        results.append(run_trial(experiment, *c))
        log.debug("trial %s done", c)
    return results


def summarize(results):
    """``{(n, m, edge_fraction): [(p, mean_cs, mean_sp), ...]}``."""
    groups = {}
    for r in results:
        groups.setdefault((r.n, r.m, r.edge_fraction), {}).setdefault(r.p, []).append(r)
    out = {}
    for key, by_p in groups.items():
        out[key] = [(p, float(np.mean([r.acc_cs for r in rs])), float(np.mean([r.acc_sp for r in rs])))
                    for p, rs in by_p.items()]
    return out


def summary_name(n, m, edge_fraction) -> str:
    if edge_fraction >= 1.0:
        tag = "full"
    elif math.isclose(edge_fraction, 0.5):
        tag = "half"
    else:
        tag = f"frac{edge_fraction:g}"
    return f"{tag}_K{m}_N{n}.txt"


def config_header(experiment: ExperimentSpec) -> list:
    """Comment lines that reproduce the run: the config text and the seed."""
    lines = [f"seed = {experiment.seed}", "config:"]
    text = experiment.source_text if experiment.source_text else _render_config(experiment)
    lines += [f"  {ln}" for ln in text.rstrip("\n").splitlines()]
    return lines


def _render_config(experiment: ExperimentSpec) -> str:
    buf = io.StringIO()
    buf.write("[sweep]\n")
    for key in ("n", "m", "edge_fraction", "p"):
        buf.write(f"{key} = {', '.join(repr(v) for v in getattr(experiment, key))}\n")
    buf.write(f"trials = {experiment.trials}\nseed = {experiment.seed}\n\n[consensus]\n")
    for k, v in asdict(experiment.consensus).items():
        buf.write(f"{k} = {v}\n")
    buf.write("\n[spectral]\n")
    for k, v in asdict(experiment.spectral).items():
        if v is not None:
            buf.write(f"{k} = {v}\n")
    return buf.getvalue()


def write_summary(path, rows, header_lines):
    with open(path, "w") as fh:
        for ln in header_lines:
            fh.write(f"# {ln}\n")
        fh.write("p mean_cs mean_sp\n")
        for p, cs, sp in rows:
            fh.write(f"{p:g} {cs:.6f} {sp:.6f}\n")


def write_trials_csv(path, results, header_lines):
    with open(path, "w", newline="") as fh:
        for ln in header_lines:
            fh.write(f"# {ln}\n")
        w = csv.writer(fh)
        cols = list(TrialResult.__dataclass_fields__)
        w.writerow(cols)
        for r in results:
            row = asdict(r)
            w.writerow([f"{row[c]:.6f}" if isinstance(row[c], float) else int(row[c]) if isinstance(row[c], bool)
                        else row[c] for c in cols])
