"""Full qualitative portrait of one characteristic foliation."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .config import AnalysisConfig, DEFAULT_CONFIG
from .cycles import ClosedLeaf, detect_closed_leaves, probe_orbits
from .foliation import FoliationField
from .geom import wrap_delta
from .integrate import (LIMIT_BUDGET, LIMIT_CLOSED_LEAF, LIMIT_SINGULARITY,
                        LeafPath)
from .singularities import (Separatrix, Singularity, SingularLocus,
                            find_singularities, trace_separatrices)


@dataclass
class Connection:
    """A leaf joining two saddle-like zeros, oriented by the flow."""

    source: int
    target: int
    retrograde: bool
    separatrix: Separatrix

    def summary(self, singularities):
        return {
            "source": self.source,
            "target": self.target,
            "source_sign": int(singularities[self.source].sign),
            "target_sign": int(singularities[self.target].sign),
            "retrograde": bool(self.retrograde),
        }


@dataclass
class FoliationAnalysis:
    field: FoliationField
    cfg: AnalysisConfig
    singularities: list
    loci: list
    separatrices: dict            # saddle index -> [Separatrix]
    closed_leaves: list
    connections: list
    pb_satisfied: bool
    pre_lagrangian: bool
    warnings: list
    probes: list = dc_field(default_factory=list)

    @property
    def is_generic(self):
        return not self.loci

    @property
    def saddles(self):
        return [i for i, s in enumerate(self.singularities) if s.is_saddle_like]

    @property
    def retrograde_connections(self):
        return [c for c in self.connections if c.retrograde]

    @property
    def degenerate_leaves(self):
        return [l for l in self.closed_leaves if l.degenerate]

    def summary(self):
        return {
            "field": self.field.name,
            "singularities": [s.summary() for s in self.singularities],
            "non_generic_loci": [l.summary() for l in self.loci],
            "closed_leaves": [l.summary() for l in self.closed_leaves],
            "connections": [c.summary(self.singularities) for c in self.connections],
            "pb_satisfied": bool(self.pb_satisfied),
            "pre_lagrangian": bool(self.pre_lagrangian),
            "generic": bool(self.is_generic),
            "warnings": list(self.warnings),
        }


def _collect_connections(analysis_sings, separatrices):
    out = []
    for si, seps in separatrices.items():
        for sep in seps:
            if sep.stability == "stable":
                continue
            kind, ref = sep.limit
            if kind == LIMIT_SINGULARITY and ref is not None:
                target = analysis_sings[ref]
                if target.is_saddle_like:
                    retro = analysis_sings[si].sign < 0 < target.sign
                    out.append(Connection(si, ref, retro, sep))
    out.sort(key=lambda c: (c.source, c.target))
    return out


def _limits_resolved(paths, closed_leaves, field, cfg):
    for path in paths:
        if path.limit_kind != LIMIT_BUDGET:
            continue
        end = path.points[-1]
        near_leaf = any(
            np.hypot(*wrap_delta(leaf.points, end, field.periods).T).min()
            < 5 * cfg.capture_eps
            for leaf in closed_leaves)
        if not near_leaf:
            return False
    return True


def _pre_lagrangian(field, cfg):
    pts = np.stack(np.meshgrid(np.linspace(0.05, 0.95, 7),
                               np.linspace(0.1, 0.9, 7), indexing="ij"), axis=-1)
    db = np.array([[abs(float(field.dbeta(p, cfg.dbeta_step))) for p in row]
                   for row in pts])
    scale = float(np.max(field.speed(pts))) + 1e-30
    return bool(np.max(db) < 1e-10 * max(scale, 1.0))


def analyze_field(field: FoliationField, cfg: AnalysisConfig = DEFAULT_CONFIG) -> FoliationAnalysis:
    """Run the whole qualitative pipeline on one foliation field."""
    sings, loci, warnings = find_singularities(field, cfg)

    separatrices = {}
    for i, s in enumerate(sings):
        if s.is_saddle_like:
            separatrices[i] = trace_separatrices(field, sings, i, cfg, loci)

    probes = probe_orbits(field, cfg, sings, loci)
    leaves, cwarn = detect_closed_leaves(field, cfg, sings, loci, orbits=probes)
    warnings.extend(cwarn)

    connections = _collect_connections(sings, separatrices)

    all_paths = list(probes)
    for seps in separatrices.values():
        all_paths.extend(s.path for s in seps)
    pb = _limits_resolved(all_paths, leaves, field, cfg)

    return FoliationAnalysis(field, cfg, sings, loci, separatrices, leaves,
                             connections, pb, _pre_lagrangian(field, cfg),
                             warnings, probes)


def analyze_foliation(model, surface, cfg: AnalysisConfig = DEFAULT_CONFIG) -> FoliationAnalysis:
    """Characteristic-foliation portrait of a surface in a contact model."""
    return analyze_field(FoliationField.from_surface(model, surface), cfg)
