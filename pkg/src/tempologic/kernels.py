"""
Hot numeric loops, compiled with numba when available.

Every kernel exists twice: a ``_nb`` variant decorated with ``@njit`` and a
``_np`` variant written against plain numpy.  The public names bind to the
numba variant unless numba is missing or ``TEMPOLOGIC_DISABLE_NUMBA`` is set
to a truthy value in the environment before import.

Usage::

    from tempologic import kernels
    ta = kernels.apparent_time_grid(tp, tt)
    kernels.BACKEND   # "numba" or "numpy"
"""

import os

import numpy as np

try:
    from numba import njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return decorator


def _flag_set(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = NUMBA_AVAILABLE and not _flag_set("TEMPOLOGIC_DISABLE_NUMBA")
BACKEND = "numba" if USE_NUMBA else "numpy"

SPIKE_NONE = 0
SPIKE_VOLTAGE = 1
SPIKE_CURRENT = 2


# =============================================================================
# Apparent processing time over a grid
# =============================================================================

def _apparent_time_grid_np(tp, tt):
    tp = np.asarray(tp, dtype=np.float64)
    tt = np.asarray(tt, dtype=np.float64)
    return np.sqrt(tt * tt + (2.0 * tp + tt) ** 2)


@njit(cache=True)
def _apparent_time_grid_nb(tp, tt):
    out = np.empty(tp.shape[0], dtype=np.float64)
    for i in range(tp.shape[0]):
        a = 2.0 * tp[i] + tt[i]
        out[i] = np.sqrt(tt[i] * tt[i] + a * a)
    return out


def apparent_time_grid(tp, tt):
    """Elementwise ``sqrt(Tt**2 + (2*Tp + Tt)**2)`` for broadcastable arrays."""
    tp, tt = np.broadcast_arrays(np.asarray(tp, dtype=np.float64),
                                 np.asarray(tt, dtype=np.float64))
    if not USE_NUMBA:
        return _apparent_time_grid_np(tp, tt)
    shape = tp.shape
    flat = _apparent_time_grid_nb(np.ascontiguousarray(tp).ravel(),
                                  np.ascontiguousarray(tt).ravel())
    return flat.reshape(shape)


# =============================================================================
# Leaky integration with a voltage and a synaptic-current threshold
# =============================================================================

def _leaky_integrate_np(potential, phase, rc, v_th, i_th, dt, currents,
                        phase_rate):
    n = currents.shape[0]
    potentials = np.empty(n, dtype=np.float64)
    phases = np.empty(n, dtype=np.float64)
    spikes = np.zeros(n, dtype=np.int8)
    decay = np.exp(-dt / rc)
    two_pi = 2.0 * np.pi
    dphase = two_pi * dt * phase_rate
    for i in range(n):
        i_syn = currents[i]
        potential = potential * decay + i_syn * dt
        phase = (phase + dphase) % two_pi
        if i_syn >= i_th:
            spikes[i] = SPIKE_CURRENT
            potential = 0.0
            phase = 0.0
        elif potential >= v_th:
            spikes[i] = SPIKE_VOLTAGE
            potential = 0.0
        potentials[i] = potential
        phases[i] = phase
    return potentials, phases, spikes


_leaky_integrate_nb = njit(cache=True)(_leaky_integrate_np)


def leaky_integrate(potential, phase, rc, v_th, i_th, dt, currents,
                    phase_rate=0.0):
    """Run the dual-threshold leaky integrator over a current series.

    Parameters
    ----------
    potential, phase : float
        Initial membrane value and phase (radians).
    rc : float
        Membrane time constant, seconds.
    v_th, i_th : float
        Voltage threshold and synaptic-current threshold.
    dt : float
        Step length, seconds.
    currents : array_like
        Synaptic current applied during each step.
    phase_rate : float
        Free-running phase advance in cycles per second.

    Returns
    -------
    potentials, phases : ndarray of float64
        State after each step.
    spikes : ndarray of int8
        ``SPIKE_NONE``, ``SPIKE_VOLTAGE`` or ``SPIKE_CURRENT`` per step.
    """
    currents = np.ascontiguousarray(currents, dtype=np.float64)
    fn = _leaky_integrate_nb if USE_NUMBA else _leaky_integrate_np
    return fn(float(potential), float(phase), float(rc), float(v_th),
              float(i_th), float(dt), currents, float(phase_rate))


# =============================================================================
# Serial bus: arbitration pipeline followed by exclusive delivery
# =============================================================================

def _serial_bus_completions_np(arbitration, delivery):
    n = delivery.shape[0]
    starts = np.empty(n, dtype=np.float64)
    ends = np.empty(n, dtype=np.float64)
    bus_free = 0.0
    for k in range(n):
        ready = (k + 1) * arbitration
        start = ready if ready > bus_free else bus_free
        starts[k] = start
        bus_free = start + delivery[k]
        ends[k] = bus_free
    return starts, ends


_serial_bus_completions_nb = njit(cache=True)(_serial_bus_completions_np)


def serial_bus_completions(arbitration, delivery):
    """Delivery start and end times for grants served back to back.

    The k-th grant (1-based) has its data on the bus at ``k * arbitration``;
    the bus then carries one delivery at a time, each lasting
    ``delivery[k-1]``.
    """
    delivery = np.ascontiguousarray(delivery, dtype=np.float64)
    fn = _serial_bus_completions_nb if USE_NUMBA else _serial_bus_completions_np
    return fn(float(arbitration), delivery)


def warmup():
    """Trigger JIT compilation of every kernel."""
    if not USE_NUMBA:
        return
    apparent_time_grid(np.ones(2), np.ones(2))
    leaky_integrate(0.0, 0.0, 1.0, 1.0, 10.0, 0.1, np.zeros(2))
    serial_bus_completions(1.0, np.zeros(2))
