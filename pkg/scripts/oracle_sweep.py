"""Compare the library against the brute-force oracles on random models.

    python scripts/oracle_sweep.py --samples 2000 --seed 7

Prints one agreement line per check and exits 1 on any disagreement.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from hypothesis import HealthCheck, Phase, given, settings  # noqa: E402
from hypothesis import seed as hseed  # noqa: E402

from blps.properties import CostModel, eval_computability, eval_traceability  # noqa: E402
from oracles import oracle_cf, oracle_mentions, oracle_slice  # noqa: E402
from strategies import budgets, models, trace_var_sets  # noqa: E402


def sweep(samples: int, seed: int, max_elements: int) -> dict[str, list[int]]:
    tally = {"cf": [0, 0], "cf-weighted": [0, 0], "slice": [0, 0]}
    failures: list[str] = []
    weights = {"DR": 2, "CR": 3}
    cost = CostModel.of(**weights)

    @settings(max_examples=samples, database=None, phases=[Phase.generate], deadline=None,
              suppress_health_check=list(HealthCheck))
    @given(models(max_elements=max_elements), budgets(), trace_var_sets())
    def one(m, budget, vars_):
        for key, cm, w in (("cf", CostModel(), None), ("cf-weighted", cost, weights)):
            got = {str(i) for i in eval_computability(m, cm, budget)[0]}
            ok = got == oracle_cf(m, budget, w)
            tally[key][0] += ok
            tally[key][1] += 1
            if not ok and len(failures) < 5:
                failures.append(f"{key} budget={budget}: {m}")
        traced = vars_ & oracle_mentions(m)
        if traced:
            ok = {str(i) for i in eval_traceability(m, traced)} == oracle_slice(m, traced)
            tally["slice"][0] += ok
            tally["slice"][1] += 1
            if not ok and len(failures) < 5:
                failures.append(f"slice {sorted(traced)}: {m}")

    hseed(seed)(one)()
    for f in failures:
        print("disagreement:", f)
    return tally


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-elements", type=int, default=12)
    a = p.parse_args(argv)
    start = time.perf_counter()
    tally = sweep(a.samples, a.seed, a.max_elements)
    bad = False
    for key, (ok, n) in tally.items():
        print(f"{key:12s} {ok}/{n} agree")
        bad |= ok != n
    print(f"{time.perf_counter() - start:.1f}s")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
