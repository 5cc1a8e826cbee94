"""Slot-level simulation of chain decoding and the baseline schemes."""
from .bic import bic_parameters, bic_performance, evaluate_bic
from .engine import (Scenario, Scheme, ScriptedSlot, SimMetrics, SlotRecord, analytic_throughput, delay_cdf,
                     run_simulation, write_trace_csv)
from .graph import FRESH, CdGraph, cd_protocol_select

__all__ = [
    "Scenario", "Scheme", "ScriptedSlot", "SimMetrics", "SlotRecord", "run_simulation",
    "delay_cdf", "write_trace_csv", "analytic_throughput", "CdGraph", "cd_protocol_select", "FRESH",
    "bic_parameters", "bic_performance", "evaluate_bic",
]
