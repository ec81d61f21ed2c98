"""Request satisfaction, resource utilization, and fragmentation reporting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

from .model import AllocationTensor, Scenario, TOL


@dataclass
class MetricsReport:
    app_satisfaction: Dict[int, float] = field(default_factory=dict)
    provider_satisfaction: Dict[int, float] = field(default_factory=dict)
    provider_utilization: Dict[int, float] = field(default_factory=dict)
    app_fragmentation: Dict[int, int] = field(default_factory=dict)
    mean_fragmentation: float = 0.0


def request_satisfaction(s: Scenario, x: AllocationTensor):
    """Per app: mean of allocated/requested over demanded resource types; per provider: mean over native apps."""
    per_app: Dict[int, float] = {}
    for a in s.applications:
        totals = x.total_for_app(a.id, s.K)
        ratios = [
            min(1.0, totals[k] / a.request[k]) for k in range(s.K) if a.request[k] > 0
        ]
        per_app[a.id] = sum(ratios) / len(ratios) if ratios else 1.0
    per_provider: Dict[int, float] = {}
    for p in s.providers:
        vals = [per_app[j] for j in p.native_apps]
        per_provider[p.id] = sum(vals) / len(vals) if vals else 1.0
    return per_app, per_provider


def resource_utilization(s: Scenario, x: AllocationTensor) -> Dict[int, float]:
    out: Dict[int, float] = {}
    for p in s.providers:
        total_cap = sum(p.capacity)
        if total_cap <= 0:
            out[p.id] = 0.0
            continue
        used = sum(x.used_by_provider(p.id, s.K))
        out[p.id] = min(1.0, used / total_cap)
    return out


def fragmentation_index(s: Scenario, x: AllocationTensor):
    """Per app: count of distinct remote providers serving it; aggregate: mean over remotely served apps."""
    per_app: Dict[int, int] = {}
    for a in s.applications:
        remotes = {
            n
            for (n, j), vec in x.entries.items()
            if j == a.id and n != a.owner and any(v > TOL for v in vec)
        }
        per_app[a.id] = len(remotes)
    served = [c for c in per_app.values() if c > 0]
    aggregate = sum(served) / len(served) if served else 0.0
    return per_app, aggregate


def compute_metrics(s: Scenario, x: AllocationTensor) -> MetricsReport:
    app_sat, prov_sat = request_satisfaction(s, x)
    util = resource_utilization(s, x)
    frag, mean_frag = fragmentation_index(s, x)
    return MetricsReport(
        app_satisfaction=app_sat,
        provider_satisfaction=prov_sat,
        provider_utilization=util,
        app_fragmentation=frag,
        mean_fragmentation=mean_frag,
    )
