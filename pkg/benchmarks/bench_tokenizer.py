#!/usr/bin/env python3
"""Benchmark the compiled token-counting kernel against the pure-Python path.

Token counting is the runtime's hot kernel: every prompt build, ledger
update and context-series point goes through it, over texts that grow to
tens of kilobytes per turn. This compares the Cython extension, the
regex-based fallback, and a naive per-character loop on representative
payloads.

Usage: python benchmarks/bench_tokenizer.py [--repeat N]
"""

import argparse
import statistics
import time

from ctxagent.dispatch import MODES, build_executor_base
from ctxagent.fixtures import fixture_registry, wifi_ticket_config
from ctxagent.tokenizer import _fallback, _kernel
from ctxagent.toolenv import deterministic_text


def naive_count(text: str) -> int:
    count = 0
    in_run = False
    for ch in text:
        if ("0" <= ch <= "9") or ("A" <= ch <= "Z") or ("a" <= ch <= "z"):
            if not in_run:
                count += 1
            in_run = True
        else:
            count += 1
            in_run = False
    return count


def payloads():
    registry = fixture_registry()
    config = wifi_ticket_config()
    cloud = deterministic_text("benchmark seed", 800)
    return {
        "tool block (19 compact schemas)": build_executor_base(MODES["baseline"], registry),
        "walkthrough base prompt (1710 tok)": config.executor_base_override,
        "verbose cloud response (800 tok)": cloud,
        "long full-history prompt (~40 KB)": (config.executor_base_override + cloud * 10),
    }


def bench(fn, text, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(text)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=30)
    args = parser.parse_args()

    impls = {"fallback (regex)": _fallback.count_tokens, "naive (char loop)": naive_count}
    if _kernel is not None:
        impls["kernel (cython)"] = _kernel.count_tokens
    else:
        print("compiled kernel not available; comparing pure-Python paths only\n")

    rows = []
    for label, text in payloads().items():
        size = len(text)
        counts = {name: fn(text) for name, fn in impls.items()}
        assert len(set(counts.values())) == 1, f"implementations disagree on {label}: {counts}"
        row = {"payload": label, "bytes": size}
        for name, fn in impls.items():
            best = bench(fn, text, args.repeat)
            row[name] = best
        rows.append(row)

    name_width = max(len(r["payload"]) for r in rows)
    impl_names = list(impls)
    header = f"{'payload'.ljust(name_width)}  {'bytes':>8}  " + "  ".join(f"{n:>18}" for n in impl_names)
    print(header)
    print("-" * len(header))
    for row in rows:
        cells = []
        for name in impl_names:
            mbps = row["bytes"] / row[name] / 1e6
            cells.append(f"{row[name]*1e6:8.1f}us {mbps:6.0f}MB/s")
        print(f"{row['payload'].ljust(name_width)}  {row['bytes']:>8}  " + "  ".join(f"{c:>18}" for c in cells))

    if _kernel is not None:
        speedups = [row["fallback (regex)"] / row["kernel (cython)"] for row in rows]
        print(f"\nkernel speedup over fallback: {statistics.fmean(speedups):.1f}x mean "
              f"({min(speedups):.1f}x..{max(speedups):.1f}x)")


if __name__ == "__main__":
    main()
