"""Compare the compiled and pure-Python edge kernels.

    python3 benchmarks/bench_kernels.py [--tools 200 500 1000] [--repeat 5]

Each graph is fully connected (``N*(N+1) + N`` edges), the worst case for
the per-update reweighting pass.
"""
import argparse
import timeit

import numpy as np

from toolnet import _kernels_py
from toolnet.graph import UpdateParams, new_graph
from toolnet.construction import _fvalues

try:
    from toolnet import _kernels as compiled
except ImportError:
    compiled = None


def bench(n_tools: int, repeat: int) -> dict:
    g = new_graph([f"t{i}" for i in range(n_tools)], UpdateParams())
    rng = np.random.default_rng(0)
    for node in g.nodes:
        node.accumulated_score = int(rng.integers(-20, 20))
    fv = _fvalues(g)
    args = (g._indptr, g._indices, g._prior, fv, 0.3, g.num_tools)
    n_nodes = g.num_tools + 2
    backends = {"python": _kernels_py}
    if compiled is not None:
        backends["cython"] = compiled
    row = {"tools": n_tools, "edges": g.num_edges}
    outputs = {}
    for name, mod in backends.items():
        out = g._current.copy()
        t = min(timeit.repeat(lambda: mod.reweight_rows(*args, out), number=1, repeat=repeat))
        t_in = min(
            timeit.repeat(
                lambda: mod.inbound_mean(g._indptr, g._indices, out, g.num_tools, n_nodes), number=1, repeat=repeat
            )
        )
        row[f"{name}_reweight_ms"] = t * 1e3
        row[f"{name}_inbound_ms"] = t_in * 1e3
        outputs[name] = out.tobytes()
    if len(outputs) == 2:
        row["identical"] = outputs["python"] == outputs["cython"]
    return row


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tools", type=int, nargs="+", default=[100, 300, 1000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; timing the fallback only")
    header = f"{'tools':>6} {'edges':>9} {'py reweight':>12} {'cy reweight':>12} {'speedup':>8} {'py inbound':>11} {'cy inbound':>11} {'identical':>9}"
    print(header)
    for n in args.tools:
        r = bench(n, args.repeat)
        cy = r.get("cython_reweight_ms")
        cyi = r.get("cython_inbound_ms")
        speed = f"{r['python_reweight_ms'] / cy:7.1f}x" if cy else "      -"
        print(
            f"{r['tools']:>6} {r['edges']:>9} {r['python_reweight_ms']:>10.2f}ms "
            f"{(f'{cy:10.3f}ms' if cy else '-'):>12} {speed:>8} {r['python_inbound_ms']:>9.2f}ms "
            f"{(f'{cyi:9.3f}ms' if cyi else '-'):>11} {str(r.get('identical', '-')):>9}"
        )


if __name__ == "__main__":
    main()
