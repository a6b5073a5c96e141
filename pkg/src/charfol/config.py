"""Tolerances and resolution knobs shared by the whole pipeline.

Every figure in a report is reproducible from the configuration echoed in
the report itself, so all defaults live here and can be overridden from a
key=value config file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class AnalysisConfig:
    # singularity search
    grid_n: int = 48                # seed grid (per axis)
    newton_tol: float = 1e-10      # |Y| at an accepted zero
    newton_max_iter: int = 40
    merge_radius: float = 1e-6     # duplicate-zero merge distance
    trace_rel_tol: float = 1e-7    # |trace| below this (relative) is a sign error
    eig_split_tol: float = 1e-6    # relative tolerance in eigenvalue tests

    # non-generic loci
    locus_rel_tol: float = 0.05    # |Y| threshold relative to field scale
    locus_refine_tol: float = 1e-8
    locus_min_points: int = 6

    # leaf integration
    capture_eps: float = 1e-3      # terminal ball radius around singularities
    connection_tol: float = 1e-3   # separatrix endpoint to saddle
    arclength_budget: float = 1000.0
    probe_budget: float = 60.0     # budget for the probe orbits of one analysis
    probe_grid: int = 4            # probe seeds per axis
    separatrix_budget: float = 60.0
    separatrix_offset: float = 1e-4
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = 0.2
    sample_ds: float = 0.01        # dense sampling step for event tests

    # closed leaves
    degenerate_band: float = 1e-4  # |pi'(0) - 1| below this is degenerate
    cycle_tol: float = 1e-9        # |pi(x) - x| at an accepted fixed point
    return_fd_step: float = 1e-3   # finite-difference step for pi'
    transversal_halfwidth: float = 0.05
    recurrence_radius: float = 0.05
    max_return_arc: float = 30.0

    # derivatives
    jacobian_step: float = 1e-6
    gradient_step: float = 1e-5
    dbeta_step: float = 1e-5

    # dividing sets
    dividing_radius: float = 0.05  # neighborhood radius around the Giroux graph
    dividing_grid: int = 96        # label grid for the region decomposition
    gamma_step: float = 0.02       # sampling step when tracing dividing curves
    margin_min: float = 0.05       # minimal angle (radians) to the foliation
    dividing_max_shrink: int = 3

    # movies
    t_tol: float = 1e-3            # event bracket width
    track_radius: float = 0.1      # singularity matching between frames
    event_cap: int = 4             # events per bracket before reporting accumulation
    gap_arclength: float = 0.08    # transversal placement along a stable separatrix

    def replace(self, **kw) -> "AnalysisConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT_CONFIG = AnalysisConfig()

_BOOL = {"true": True, "false": False, "yes": True, "no": False}


def _coerce(field_type, raw: str):
    raw = raw.strip()
    if field_type is int:
        return int(raw)
    if field_type is float:
        return float(raw)
    if field_type is bool:
        return _BOOL[raw.lower()]
    return raw


def parse_config_text(text: str, base: AnalysisConfig = DEFAULT_CONFIG) -> AnalysisConfig:
    """Parse ``key = value`` lines (``#`` comments) into an AnalysisConfig."""
    fields = {f.name: f.type for f in dataclasses.fields(AnalysisConfig)}
    types = {"int": int, "float": float, "bool": bool}
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in fields:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        ftype = fields[key]
        if isinstance(ftype, str):
            ftype = types.get(ftype, str)
        overrides[key] = _coerce(ftype, raw)
    return base.replace(**overrides)


def load_config(path, base: AnalysisConfig = DEFAULT_CONFIG) -> AnalysisConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)
