"""Benchmark problem interface.

A Problem bundles the spatial operator applied to an expansion, the domain
samplers, initial/boundary data, and (when available) an analytic oracle.
Concrete problems subclass this; anything matching the same surface plugs
into the training loop unchanged.
"""

from __future__ import annotations

import numpy as np

from ..rbf import KernelTables, RbfState, ScaleMap


class Problem:
    name: str = "problem"
    dim: int
    n_fields: int = 1
    horizon: float
    scale_map: ScaleMap = ScaleMap()
    metric_mode: str = "at_time"       # or "time_averaged"; see training.error_metrics
    has_boundary: bool = True
    init_scale: float = 1.0
    net_inputs: np.ndarray | None = None   # appended to the network input (family variant)

    # -- sampling ------------------------------------------------------------

    def sample_interior(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample_boundary(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample_eval(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Law of the fixed held-out evaluation set (defaults to interior law)."""
        return self.sample_interior(rng, n)

    def center_init(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Initial kernel centers for the initial-condition fit."""
        raise NotImplementedError

    def contains(self, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- data ----------------------------------------------------------------

    def initial(self, xs: np.ndarray) -> np.ndarray:
        """u(x, 0): (P, m)."""
        raise NotImplementedError

    def boundary_values(self, ys: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def oracle(self, xs: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def has_oracle(self) -> bool:
        cls = type(self)
        return cls.oracle is not Problem.oracle

    # -- operator ------------------------------------------------------------

    def operator_bundle(self, state: RbfState, xs: np.ndarray, t: float,
                        tables: KernelTables | None = None):
        """A(u_N) at the points, plus a cotangent closure.

        Returns (values (P, m), vjp) where vjp(w) with w of shape (P, m)
        yields the flat-parameter cotangent of sum w * A(u_N).
        """
        raise NotImplementedError

    def operator_values(self, state: RbfState, xs: np.ndarray, t: float,
                        tables: KernelTables | None = None) -> np.ndarray:
        vals, _ = self.operator_bundle(state, xs, t, tables)
        return vals
