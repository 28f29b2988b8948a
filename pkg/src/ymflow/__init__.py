"""Lattice simulator for the Yang-Mills alpha-flow on a periodic 4-torus."""

from .lattice import (
    ConnectionField,
    GaugeField,
    GaugeTransform,
    Lattice,
    LatticeMismatch,
    apply_gauge,
    cold_start,
    hot_start,
    instanton,
    random_gauge,
    sample_continuum,
)
from .action import alpha_action, clover_curvature, sup_curvature, topological_charge, ym_energy
from .flow import FlowParams, NonFinite, StepCollapse, TraceRecord, find_critical, force, run_flow

__version__ = "0.1.0"
