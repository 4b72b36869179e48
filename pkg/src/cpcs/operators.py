"""Dense operator helpers and density-matrix diagnostics."""

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


def projector(m, n, dim):
    """Return the transition operator |m><n| on a ``dim``-level space."""
    if not (0 <= m < dim and 0 <= n < dim):
        raise IndexError(f"state indices ({m}, {n}) out of range for dim={dim}")
    op = np.zeros((dim, dim), dtype=complex)
    op[m, n] = 1.0
    return op


def dag(op):
    return op.conj().T


def is_hermitian(op, tol=1e-12):
    return np.max(np.abs(op - dag(op)), initial=0.0) < tol


def ket_projector(k, dim):
    return projector(k, k, dim)


@dataclass
class DensityReport:
    hermiticity_defect: float
    trace: float
    trace_deviation: float
    min_eigenvalue: float
    valid: bool
    problems: list


def validate_density(rho, normalized=True, tol=1e-8, repair=False):
    """Check Hermiticity, trace and positivity of ``rho``.

    For a normalized state the trace must be 1; a conditional (unnormalized)
    state only needs a non-negative trace (it may exceed 1 for multi-photon states). Returns ``(report, rho)`` where
    ``rho`` is re-symmetrized if ``repair`` is set, otherwise returned as is.
    """
    rho = np.asarray(rho, dtype=complex)
    herm = float(np.max(np.abs(rho - dag(rho)), initial=0.0))
    if repair and herm > 0:
        log.debug("hermiticity defect %.3e repaired", herm)
        rho = 0.5 * (rho + dag(rho))
    tr = float(np.real(np.trace(rho)))
    evals = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))
    min_ev = float(evals[0])

    problems = []
    if herm > max(tol, 1e-12) and not repair:
        problems.append("hermiticity")
    if normalized:
        dev = abs(tr - 1.0)
        if dev > tol:
            problems.append("trace")
    else:
        dev = max(0.0, -tr)
        if tr < -tol:
            problems.append("trace")
    if min_ev < -tol:
        problems.append("positivity")
    report = DensityReport(herm, tr, dev, min_ev, not problems, problems)
    return report, rho
