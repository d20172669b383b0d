"""Time-domain simulation of computing fabrics and oscillator-neuron networks.

Spatial distances are turned into times by a finite interaction speed, so
processing, transfer, arbitration and conduction all live on one time axis.
"""

__version__ = "0.1.0"

from .timespace import (ConeTrace, DomainError, EventTiming, InteractionSpeed,
                        SpatialPoint, TimeVector, apparent_processing_time,
                        light_cone_trace, propagation_delay, to_time_vector)
from .engine import CausalityError, Engine, EventKind, SimEvent, TraceRecord

__all__ = [
    "ConeTrace", "DomainError", "EventTiming", "InteractionSpeed", "SpatialPoint",
    "TimeVector", "apparent_processing_time", "light_cone_trace",
    "propagation_delay", "to_time_vector", "CausalityError", "Engine",
    "EventKind", "SimEvent", "TraceRecord",
]
