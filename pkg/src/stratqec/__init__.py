"""Logical error rate estimation by stratified fault injection and S-curve fitting."""

from __future__ import annotations

__version__ = "0.1.0"

from .circuit import Circuit, CodeSpec, enumerate_fault_locations, generate_code, parse_circuit, \
    serialize_circuit
from .decoders import LookupDecoder, MwpmDecoder, build_detector_graph
from .pipeline import AdapSamConfig, EstimateReport, estimate_logical_error_rate, run_scaler
from .qepg import FaultSet, Qepg, compile_qepg
from .sampling import SamplerConfig, SubspaceStats, binomial_weight_probability, \
    sample_baseline, sample_until_errors, sample_weight_w
from .scurve import SCurveModel, compute_w_sat, compute_w_sweet, eval_f, fit

__all__ = [
    "AdapSamConfig", "Circuit", "CodeSpec", "EstimateReport", "FaultSet", "LookupDecoder",
    "MwpmDecoder", "Qepg", "SCurveModel", "SamplerConfig", "SubspaceStats",
    "binomial_weight_probability", "build_detector_graph", "compile_qepg", "compute_w_sat",
    "compute_w_sweet", "enumerate_fault_locations", "estimate_logical_error_rate", "eval_f",
    "fit", "generate_code", "parse_circuit", "run_scaler", "sample_baseline",
    "sample_until_errors", "sample_weight_w", "serialize_circuit",
]
