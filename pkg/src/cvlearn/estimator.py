"""Characteristic-function estimation from Bell records.

The plug-in estimator averages

    exp(exp(-2 r_eff) |beta|^2) * exp(zeta^dag beta - beta^dag zeta)

over samples; every summand has modulus ``exp(exp(-2 r_eff)|beta|^2)``.

Drift correction: when outcomes are distorted as ``zeta = A alpha + noise``
with one global 2x2 affine matrix A acting on each mode's (x, p) pair, the
phase ``Im(zeta^dag beta')`` equals ``Im(alpha^dag beta)`` plus noise exactly when
``beta' = A beta / det(A)`` (the inverse-transpose of A with respect to the
symplectic form).  Evaluating the plain estimator at ``beta'`` is then unbiased.
For rotations this is ``A beta``; it is *not* ``A^{-1} beta`` in general.
"""

import math

import numpy as np

from .errors import RejectedInput
from .measurement import PilotTag, RecordSet, apply_affine, as_outcomes, noise_factor
from .process import as_complex_vec

__all__ = [
    "SUM_BLOCK",
    "phase_projection",
    "estimator_summands",
    "estimate_char_fn",
    "estimate_affine",
    "dual_transform",
    "estimate_char_fn_corrected",
    "reconstruct_slice",
]

# Fixed partition for the mean; partial sums are combined with fsum, so the
# value is independent of how blocks are scheduled.
SUM_BLOCK = 1 << 16


def phase_projection(zeta, beta):
    """``Im(zeta_i^dag beta)`` for every row of ``zeta``."""
    return np.imag(np.conj(zeta) @ beta)


def estimator_summands(records, beta, r_eff):
    """Per-sample estimator terms (complex array of length N)."""
    zeta = as_outcomes(records)
    beta = as_complex_vec(beta, n=zeta.shape[1], name="beta")
    pref = math.exp(noise_factor(r_eff) * float(np.vdot(beta, beta).real))
    return pref * np.exp(2j * phase_projection(zeta, beta))


def _blocked_mean(zeta, beta):
    re_parts, im_parts = [], []
    for lo in range(0, zeta.shape[0], SUM_BLOCK):
        ph = np.exp(2j * phase_projection(zeta[lo : lo + SUM_BLOCK], beta))
        s = ph.sum()
        re_parts.append(s.real)
        im_parts.append(s.imag)
    count = zeta.shape[0]
    return complex(math.fsum(re_parts) / count, math.fsum(im_parts) / count)


def estimate_char_fn(records, beta, r_eff):
    """Unbiased estimate of lambda(beta); pilot records are ignored."""
    zeta = as_outcomes(records)
    if zeta.shape[0] == 0:
        raise RejectedInput("no (non-pilot) records")
    beta = as_complex_vec(beta, n=zeta.shape[1], name="beta")
    pref = math.exp(noise_factor(r_eff) * float(np.vdot(beta, beta).real))
    return pref * _blocked_mean(zeta, beta)


def estimate_affine(pilot_records, amplitude=10.0):
    """Drift matrix from pilot means.

    Column 0 is the mean pilot-x outcome (x, p) over ``amplitude``, column 1
    the mean pilot-p outcome, averaged over all modes of all pilot records.
    """
    if not amplitude > 0:
        raise RejectedInput("amplitude must be positive")
    if not isinstance(pilot_records, RecordSet):
        pilot_records = RecordSet.from_records(pilot_records)
    px = pilot_records.pilots(PilotTag.PILOT_X)
    pp = pilot_records.pilots(PilotTag.PILOT_P)
    if px.size == 0 or pp.size == 0:
        raise RejectedInput("need at least one pilot_x and one pilot_p record")
    mx, mp = px.mean(), pp.mean()
    return np.array([[mx.real, mp.real], [mx.imag, mp.imag]]) / amplitude


def dual_transform(affine, beta):
    """Map a dual point through the drift: ``A beta / det(A)`` per mode."""
    a = np.asarray(affine, dtype=float)
    if a.shape != (2, 2):
        raise RejectedInput("affine must be 2x2")
    det = float(np.linalg.det(a))
    if not math.isfinite(det) or abs(det) < 1e-12:
        raise RejectedInput("affine matrix is singular")
    if np.array_equal(a, np.eye(2)):
        return beta
    return apply_affine(a, np.asarray(beta, dtype=np.complex128)) / det


def estimate_char_fn_corrected(records, beta, r_eff, affine):
    """Drift-corrected estimate; identical to the plain one for ``affine = I``."""
    return estimate_char_fn(records, dual_transform(affine, beta), r_eff)


def reconstruct_slice(records, direction, b_grid, r_eff, affine=None):
    """Estimate lambda along ``beta = b * direction`` for each ``b`` in the grid.

    Returns a list of ``(b, complex)`` pairs.
    """
    zeta = as_outcomes(records)
    if zeta.shape[0] == 0:
        raise RejectedInput("no (non-pilot) records")
    direction = as_complex_vec(direction, n=zeta.shape[1], name="direction")
    if not np.any(direction):
        raise RejectedInput("direction must be nonzero")
    b_grid = np.asarray(b_grid, dtype=float)
    if np.any(b_grid < 0):
        raise RejectedInput("grid values must be >= 0")
    if affine is not None:
        direction = dual_transform(affine, direction)
    proj = phase_projection(zeta, direction)
    c = noise_factor(r_eff)
    dsq = float(np.vdot(direction, direction).real)
    out = []
    for b in b_grid:
        pref = math.exp(c * dsq * b * b)
        out.append((float(b), complex(pref * np.mean(np.exp(2j * b * proj)))))
    return out
