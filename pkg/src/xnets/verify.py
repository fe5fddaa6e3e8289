"""Multi-seed verification suites over random expanders.

Each suite builds fresh graphs per seed, runs one connectivity check and
returns a :class:`~xnets.connectivity.VerificationResult`.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

from .connectivity import (
    VerificationResult,
    exhaustive_mixing_check,
    random_walk_mixing,
    sensitivity_map,
)
from .graphs import grouped_graph, random_expander
from .spectral import expansion_violations, spectral_gap


def default_depth(n: int) -> int:
    """``2 * ceil(log2 n)`` layers."""
    return 2 * math.ceil(math.log2(n)) if n > 1 else 1


def layer_seed(trial_seed: int, layer: int) -> int:
    return trial_seed * 10_000 + layer


def expander_stack(n: int, degree: int, depth: int, seed: int) -> list:
    return [random_expander(n, n, degree, seed=layer_seed(seed, i)) for i in range(depth)]


def verify_sensitivity(n: int, degree: int, depth: Optional[int] = None,
                       seeds: Sequence[int] = range(10)) -> VerificationResult:
    depth = depth or default_depth(n)
    result = VerificationResult("sensitivity", {"n": n, "degree": degree, "depth": depth},
                                list(seeds), 0)
    for s in seeds:
        smap = sensitivity_map(expander_stack(n, degree, depth, s))
        frac = smap.fraction
        result.details.append({"seed": s, "fraction": frac})
        if frac == 1.0:
            result.pass_count += 1
        else:
            v, u = divmod(int((~smap.reachable).argmax()), n)
            result.fail_witnesses.append({"seed": s, "fraction": frac, "output": v, "input": u})
    return result


def verify_grouped_sensitivity(n: int, groups: int, depth: int = 3) -> VerificationResult:
    """Grouped stacks reach exactly ``1 / groups`` of the pairs."""
    g = grouped_graph(n, n, groups)
    frac = sensitivity_map([g] * depth).fraction
    ok = frac == 1.0 / groups
    return VerificationResult(
        "grouped_sensitivity", {"n": n, "groups": groups, "depth": depth}, [0], int(ok),
        [] if ok else [{"fraction": frac}], [{"fraction": frac}],
    )


def verify_mixing(n: int = 10, degree: int = 3, max_size: int = 5,
                  seeds: Sequence[int] = range(5)) -> VerificationResult:
    result = VerificationResult("mixing", {"n": n, "degree": degree, "max_size": max_size},
                                list(seeds), 0)
    for s in seeds:
        g = random_expander(n, n, degree, seed=s)
        rep = exhaustive_mixing_check(g, max_size)
        rep_small = {k: v for k, v in rep.items() if k != "fail_witnesses"}
        result.details.append({"seed": s, **rep_small})
        if rep["pass_count"] == rep["pairs"]:
            result.pass_count += 1
        else:
            result.fail_witnesses.extend({"seed": s, **w} for w in rep["fail_witnesses"])
    return result


def verify_walk(n: int = 64, degree: int = 8, steps: Optional[int] = None,
                threshold: float = 0.01, seeds: Sequence[int] = range(10)) -> VerificationResult:
    steps = default_depth(n) if steps is None else steps
    result = VerificationResult(
        "walk", {"n": n, "degree": degree, "steps": steps, "threshold": threshold}, list(seeds), 0
    )
    for s in seeds:
        g = random_expander(n, n, degree, seed=s)
        tv = max(random_walk_mixing(g, v, steps) for v in range(n))
        result.details.append({"seed": s, "worst_tv": tv})
        if tv <= threshold:
            result.pass_count += 1
        else:
            result.fail_witnesses.append({"seed": s, "worst_tv": tv})
    return result


def verify_expansion(n: int = 16, degree: int = 4,
                     seeds: Sequence[int] = range(5)) -> VerificationResult:
    """Every ``|S| <= n/2`` must satisfy ``|N(S)| >= min(n, (1 + gap)|S|)``."""
    result = VerificationResult("expansion", {"n": n, "degree": degree}, list(seeds), 0)
    for s in seeds:
        g = random_expander(n, n, degree, seed=s)
        gap = spectral_gap(g).gap
        bad = expansion_violations(g, gap)
        result.details.append({"seed": s, "gap": gap, "violations": len(bad)})
        if not bad:
            result.pass_count += 1
        else:
            result.fail_witnesses.extend(
                {"seed": s, "subset": list(S), "neighbors": k, "bound": b} for S, k, b in bad[:5]
            )
    return result


def verify_spectral(n: int = 64, degree: int = 8, min_gap: float = 0.2,
                    seeds: Sequence[int] = range(20)) -> VerificationResult:
    result = VerificationResult("spectral", {"n": n, "degree": degree, "min_gap": min_gap},
                                list(seeds), 0)
    for s in seeds:
        rep = spectral_gap(random_expander(n, n, degree, seed=s))
        top_err = abs(rep.singular_values[0] - degree)
        result.details.append({"seed": s, "gap": rep.gap, "top_error": top_err})
        if rep.gap >= min_gap and top_err <= 1e-9:
            result.pass_count += 1
        else:
            result.fail_witnesses.append({"seed": s, "gap": rep.gap, "top_error": top_err})
    return result
