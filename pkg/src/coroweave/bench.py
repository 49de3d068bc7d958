"""Benchmark and equivalence driver over the kernel registry.

A bench run always executes the sequential baseline first (its results
double as the expected values), then each requested scheduling policy,
and fails loudly if any policy disagrees with the baseline on any
query.  Rows are deterministic in (kernel, seed, queries, elements):
the checksum folds every result in query order and does not depend on
thread count.

Python cannot overlap cache misses, so the throughput columns here
measure scheduling overhead, not the memory-level parallelism the
interleaving is designed to unlock on native targets; treat ratios as
informational.
"""

from __future__ import annotations

import csv
import io
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .codegen import emit_dynamic, emit_hybrid, emit_static, load_unit
from .kernels import KERNELS, Kernel, fold_checksum
from .schedulers import (
    SchedulerConfig,
    interleave_map,
    run_hybrid,
    run_push_pull,
    run_static_batch,
)

__all__ = [
    "BenchConfig",
    "BenchRow",
    "ConfigError",
    "EquivalenceError",
    "POLICIES",
    "CSV_COLUMNS",
    "run_bench",
    "rows_to_csv",
    "rows_to_json",
    "selftest",
]

POLICIES = ("simplest", "push_pull", "static", "hybrid")

CSV_COLUMNS = (
    "kernel",
    "variant",
    "policy",
    "width",
    "threads",
    "seed",
    "queries",
    "ops_per_sec",
    "total_ns",
    "checksum",
)

DEFAULT_ELEMENTS = 1 << 14


class ConfigError(ValueError):
    pass


class EquivalenceError(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class BenchConfig:
    kernel: str = "all"
    policies: tuple[str, ...] = ("simplest",)
    width: int = 48
    threads: int = 1
    seed: int = 1
    queries: int = 100_000
    elements: int | None = None
    size_bytes: int | None = None
    select: str = "arith"
    limit: int = 8
    verbose: bool = False

    def __post_init__(self) -> None:
        if self.kernel != "all" and self.kernel not in KERNELS:
            raise ConfigError(
                f"unknown kernel {self.kernel!r}; choose from"
                f" {', '.join(KERNELS)} or 'all'"
            )
        bad = [p for p in self.policies if p not in POLICIES]
        if bad:
            raise ConfigError(f"unknown policies: {', '.join(bad)}")
        if self.width < 1:
            raise ConfigError(f"width must be >= 1, got {self.width}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.queries < 1:
            raise ConfigError(f"queries must be >= 1, got {self.queries}")
        if self.elements is not None and self.elements < 1:
            raise ConfigError("elements must be >= 1")
        if self.kernel != "all":
            k = KERNELS[self.kernel]
            for p in self.policies:
                if p in ("static", "hybrid") and not k.static_capable:
                    raise ConfigError(
                        f"kernel {self.kernel!r} has data-dependent stage"
                        f" transitions; the {p} policy cannot run it"
                    )


@dataclass(frozen=True, slots=True)
class BenchRow:
    kernel: str
    variant: str
    policy: str
    width: int
    threads: int
    seed: int
    queries: int
    ops_per_sec: float
    total_ns: int
    checksum: int

    def as_dict(self) -> dict[str, Any]:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    phases_ns: dict[str, int] = field(default_factory=dict)


def _element_count(cfg: BenchConfig, k: Kernel) -> int:
    if cfg.elements is not None:
        return cfg.elements
    if cfg.size_bytes is not None:
        return max(16, cfg.size_bytes // k.bytes_per_element)
    return DEFAULT_ELEMENTS


def _check_memory(cfg: BenchConfig, k: Kernel, n: int) -> None:
    # Modeled element sizes understate Python object overhead by about
    # an order of magnitude; refuse configs that clearly cannot fit.
    try:
        avail = os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError):
        return
    need = n * k.bytes_per_element * 10 + cfg.queries * 64
    if need > avail:
        raise ConfigError(
            f"{n} elements of kernel {k.name!r} needs roughly {need // 2**20}"
            f" MiB, more than the {avail // 2**20} MiB available"
        )


def _build_queries(cfg: BenchConfig, k: Kernel, ds: Any) -> list[tuple]:
    if k.name == "sli":
        return k.make_queries(ds, cfg.queries, cfg.seed + 1, limit=cfg.limit)
    return k.make_queries(ds, cfg.queries, cfg.seed + 1)


def _build_def(cfg: BenchConfig, k: Kernel):
    if k.name == "bs":
        return k.build_def(cfg.select)
    return k.build_def()


def _policy_runner(
    cfg: BenchConfig, k: Kernel, policy: str, shared: tuple
) -> Callable[[list[tuple]], list[int]]:
    """Build a callable mapping a query slice to result-key ints."""
    result_key = k.result_key
    if policy == "sequential":
        baseline = k.baseline

        def run(queries: list[tuple]) -> list[int]:
            return [result_key(baseline(*shared, *q)) for q in queries]

        return run
    sched = SchedulerConfig(width=cfg.width)
    if policy == "simplest":
        cls = load_unit(emit_dynamic(_build_def(cfg, k)))(*shared)

        def run(queries: list[tuple]) -> list[int]:
            return [result_key(r) for r in interleave_map(sched, cls, queries)]

        return run
    if policy == "push_pull":
        cls = load_unit(emit_dynamic(_build_def(cfg, k)))(*shared)

        def run(queries: list[tuple]) -> list[int]:
            results: list[Any] = [None] * len(queries)
            slot_task = [0] * cfg.width
            nxt = 0

            def push(slot: int):
                nonlocal nxt
                if nxt >= len(queries):
                    return None
                slot_task[slot] = nxt
                inst = cls(*queries[nxt])
                nxt += 1
                return inst

            def pull(slot: int, inst) -> bool:
                results[slot_task[slot]] = inst.result()
                return True

            run_push_pull(sched, push, pull)
            return [result_key(r) for r in results]

        return run
    if policy == "static":
        unit = load_unit(emit_static(_build_def(cfg, k), cfg.width))(*shared)()

        def run(queries: list[tuple]) -> list[int]:
            out: list[Any] = [None] * len(queries)
            run_static_batch(sched, unit, queries, out)
            return [result_key(r) for r in out]

        return run
    if policy == "hybrid":
        assert k.build_hybrid_def is not None
        unit = load_unit(emit_hybrid(k.build_hybrid_def(), cfg.width))(*shared)()

        def run(queries: list[tuple]) -> list[int]:
            out: list[Any] = [None] * len(queries)
            run_hybrid(sched, unit, queries, out)
            return [result_key(r) for r in out]

        return run
    raise ConfigError(f"unknown policy {policy!r}")


def _timed_run(
    cfg: BenchConfig, runner: Callable[[list[tuple]], list[int]],
    factory: Callable[[], Callable[[list[tuple]], list[int]]],
    queries: list[tuple],
) -> tuple[list[int], int]:
    """Run the query phase, split across cfg.threads, and time the wall."""
    if cfg.threads == 1:
        t0 = time.perf_counter_ns()
        results = runner(queries)
        return results, time.perf_counter_ns() - t0
    chunk = (len(queries) + cfg.threads - 1) // cfg.threads
    slices = [queries[i:i + chunk] for i in range(0, len(queries), chunk)]
    runners = [runner] + [factory() for _ in slices[1:]]
    outs: list[list[int] | None] = [None] * len(slices)

    def work(ix: int) -> None:
        outs[ix] = runners[ix](slices[ix])

    workers = [threading.Thread(target=work, args=(ix,)) for ix in range(len(slices))]
    t0 = time.perf_counter_ns()
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    elapsed = time.perf_counter_ns() - t0
    results = []
    for o in outs:
        assert o is not None
        results.extend(o)
    return results, elapsed


def run_bench(cfg: BenchConfig) -> BenchReport:
    """Run baseline plus requested policies; verify; produce rows."""
    report = BenchReport()
    names = list(KERNELS) if cfg.kernel == "all" else [cfg.kernel]
    for name in names:
        k = KERNELS[name]
        n = _element_count(cfg, k)
        _check_memory(cfg, k, n)
        t0 = time.perf_counter_ns()
        ds = k.make_dataset(n, cfg.seed)
        shared = k.shared(ds)
        queries = _build_queries(cfg, k, ds)
        report.phases_ns[f"{name}:build"] = time.perf_counter_ns() - t0
        warmup = queries[: min(1000, len(queries) // 10)]

        policies = ["sequential"] + [
            p
            for p in cfg.policies
            if k.static_capable or p not in ("static", "hybrid")
        ]
        expected: list[int] | None = None
        for policy in policies:
            make = lambda: _policy_runner(cfg, k, policy, shared)  # noqa: E731
            runner = make()
            t0 = time.perf_counter_ns()
            if warmup:
                runner(warmup)
            report.phases_ns[f"{name}:{policy}:warmup"] = time.perf_counter_ns() - t0
            results, elapsed = _timed_run(cfg, runner, make, queries)
            if policy == "sequential":
                expected = results
            elif results != expected:
                bad = next(i for i, (a, b) in enumerate(zip(results, expected)) if a != b)
                raise EquivalenceError(
                    f"{name}/{policy}: result {bad} is {results[bad]},"
                    f" baseline says {expected[bad]}"
                )
            report.rows.append(
                BenchRow(
                    kernel=name,
                    variant="sequential" if policy == "sequential" else "interleaved",
                    policy="-" if policy == "sequential" else policy,
                    width=1 if policy == "sequential" else cfg.width,
                    threads=cfg.threads,
                    seed=cfg.seed,
                    queries=len(queries),
                    ops_per_sec=len(queries) / (elapsed / 1e9) if elapsed else 0.0,
                    total_ns=elapsed,
                    checksum=fold_checksum(results),
                )
            )
    return report


def rows_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(CSV_COLUMNS)
    for r in rows:
        d = r.as_dict()
        d["ops_per_sec"] = f"{r.ops_per_sec:.3f}"
        out.writerow([d[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_json(rows: list[BenchRow]) -> str:
    return json.dumps([r.as_dict() for r in rows], indent=2) + "\n"


def selftest(verbose: bool = False) -> list[str]:
    """Small equivalence pass over every kernel and applicable policy.

    Returns a list of failure messages; empty means healthy.
    """
    failures: list[str] = []
    cfg = BenchConfig(
        kernel="all",
        policies=POLICIES,
        width=8,
        queries=512,
        elements=512,
        verbose=verbose,
    )
    try:
        report = run_bench(cfg)
    except (EquivalenceError, ConfigError) as e:
        return [str(e)]
    seq = {r.kernel: r.checksum for r in report.rows if r.variant == "sequential"}
    for r in report.rows:
        if r.variant == "interleaved" and r.checksum != seq[r.kernel]:
            failures.append(
                f"{r.kernel}/{r.policy}: checksum {r.checksum:#x}"
                f" != sequential {seq[r.kernel]:#x}"
            )
    return failures
