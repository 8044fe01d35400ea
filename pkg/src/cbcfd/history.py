"""Composite-midpoint quadrature state for the Volterra memory term.

The flux law carries an integral of (b/a) times the auxiliary velocity from
time zero; on the uniform time grid it is approximated by the composite
midpoint rule over half steps.  Only the running sum is stored — one array
per face orientation — except in debug mode, where the per-step samples are
retained so the accumulator can be replayed from scratch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def midpoint_integral(samples, dt, include_final_half=False):
    """Composite midpoint sum of half-step samples.

    Every sample carries weight ``dt``; with ``include_final_half`` the last
    one carries ``dt/2`` instead (the quadrature form used mid-step).  An
    empty sample sequence integrates to zero.
    """
    samples = list(samples)
    if not samples:
        return 0.0
    acc = samples[0] * dt
    for s in samples[1:]:
        acc = acc + s * dt
    if include_final_half:
        acc = acc - samples[-1] * (dt / 2.0)
    return acc


@dataclass(frozen=True)
class HistoryState:
    """Running sum S_n of the half-step samples (b/a * u_tilde)^{l+1/2}.

    The memory integral up to t_n is ``dt * S_n``.  ``samples`` is populated
    only in debug mode.
    """

    weighted_sum: np.ndarray
    n: int
    dt: float
    samples: tuple = field(default_factory=tuple, repr=False)
    debug: bool = False

    @classmethod
    def zero(cls, shape, dt, debug=False):
        s = np.zeros(shape)
        s.setflags(write=False)
        return cls(weighted_sum=s, n=0, dt=dt, samples=(), debug=debug)

    def replay_deviation(self):
        """Max relative gap between the running sum and a from-scratch resum.

        Only meaningful in debug mode (otherwise the samples are not kept and
        the deviation is trivially zero).
        """
        if not self.samples:
            return 0.0
        scratch = np.sum(np.stack(self.samples), axis=0)
        scale = max(float(np.max(np.abs(scratch))), 1e-300)
        return float(np.max(np.abs(scratch - self.weighted_sum))) / scale


def advance_history(state: HistoryState, b_mid, a, u_old, u_new) -> HistoryState:
    """Fold one half-step sample (b_mid/a) * (u_old + u_new)/2 into the sum.

    ``b_mid`` is the coefficient at the half-step time; ``u_old``/``u_new``
    are the auxiliary velocities at the bracketing whole steps.
    """
    b_mid = np.asarray(b_mid, dtype=float)
    a = np.asarray(a, dtype=float)
    u_old = np.asarray(u_old, dtype=float)
    u_new = np.asarray(u_new, dtype=float)
    if not (b_mid.shape == a.shape == u_old.shape == u_new.shape == state.weighted_sum.shape):
        raise ValueError("history advance: face-field shapes disagree")
    sample = (b_mid / a) * 0.5 * (u_old + u_new)
    total = state.weighted_sum + sample
    total.setflags(write=False)
    kept = state.samples + (sample,) if state.debug else ()
    return HistoryState(weighted_sum=total, n=state.n + 1, dt=state.dt, samples=kept, debug=state.debug)
