"""Finite matrix product states and operators over a fixed physical dimension.

The MPS here represent *vectorized operators* (physical dimension d**2 per
site, Choi layout from :mod:`.superops`), but nothing in this module assumes
that. Tensor index order is ``(phys, left, right)``; boundary bonds have
extent 1. MPO tensors are ordered ``(wl, out, in, wr)`` with boundary vectors
already absorbed, so end bonds also have extent 1.
"""

from __future__ import annotations

import numpy as np

from .tensors import TruncationSpec, truncated_svd

__all__ = ["Mps", "Mpo", "CompressionInfo"]


class CompressionInfo:
    """Per-bond Schmidt spectra and discarded weights from a compression."""

    __slots__ = ("spectra", "discarded_weights")

    def __init__(self, spectra, discarded_weights):
        self.spectra = spectra
        self.discarded_weights = discarded_weights

    @property
    def total_discarded(self):
        return float(sum(self.discarded_weights))


class Mps:
    """Finite MPS with open boundaries; tensors indexed ``(phys, left, right)``."""

    __slots__ = ("tensors",)

    def __init__(self, tensors):
        tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if not tensors:
            raise ValueError("an MPS needs at least one site")
        if tensors[0].shape[1] != 1 or tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have extent 1")
        for i in range(len(tensors) - 1):
            if tensors[i].shape[2] != tensors[i + 1].shape[1]:
                raise ValueError(f"bond mismatch between sites {i} and {i + 1}")
        self.tensors = tensors

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_product(cls, vectors):
        return cls([np.asarray(v, dtype=complex).reshape(-1, 1, 1) for v in vectors])

    @classmethod
    def zeros(cls, length, phys_dim):
        return cls([np.zeros((phys_dim, 1, 1), dtype=complex) for _ in range(length)])

    @classmethod
    def random(cls, length, phys_dim, chi, rng, norm=1.0):
        """Random MPS with bond dimension <= chi, rescaled to the given norm."""
        tensors = []
        for i in range(length):
            dl = min(chi, phys_dim**i, phys_dim ** (length - i))
            dr = min(chi, phys_dim ** (i + 1), phys_dim ** (length - i - 1))
            t = rng.standard_normal((phys_dim, dl, dr)) + 1j * rng.standard_normal(
                (phys_dim, dl, dr)
            )
            tensors.append(t)
        out = cls(tensors)
        n = out.norm()
        if n > 0 and norm is not None:
            out = out.scaled(norm / n)
        return out

    @classmethod
    def from_dense(cls, vec, length, phys_dim, spec=None):
        """Exact (or truncated) MPS factorization of a dense vector."""
        vec = np.asarray(vec, dtype=complex)
        if vec.size != phys_dim**length:
            raise ValueError("dense vector length does not match chain")
        tensors = []
        rest = vec.reshape(1, -1)
        for _ in range(length - 1):
            l = rest.shape[0]
            mat = rest.reshape(l * phys_dim, -1)
            u, s, vh, _ = truncated_svd(mat, spec)
            tensors.append(u.reshape(l, phys_dim, -1).transpose(1, 0, 2))
            rest = s[:, None] * vh
        tensors.append(rest.reshape(-1, phys_dim, 1).transpose(1, 0, 2))
        return cls(tensors)

    # -- basic structure ---------------------------------------------------

    def __len__(self):
        return len(self.tensors)

    @property
    def phys_dim(self):
        return self.tensors[0].shape[0]

    @property
    def bond_dims(self):
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self):
        return max(self.bond_dims, default=1)

    def copy(self):
        return Mps([t.copy() for t in self.tensors])

    def scaled(self, alpha):
        out = [t.copy() for t in self.tensors]
        out[0] = alpha * out[0]
        return Mps(out)

    # -- linear algebra ----------------------------------------------------

    def inner(self, other):
        """``<self|other>`` with complex conjugation on `self`."""
        if len(other) != len(self):
            raise ValueError("length mismatch in inner product")
        env = np.ones((1, 1), dtype=complex)
        for a, b in zip(self.tensors, other.tensors):
            # env[la, lb] -> env'[ra, rb]
            tmp = np.tensordot(env, a.conj(), axes=([0], [1]))  # [lb, p, ra]
            env = np.tensordot(tmp, b, axes=([0, 1], [1, 0]))  # [ra, rb]
        return complex(env[0, 0])

    def norm(self):
        return float(np.sqrt(max(self.inner(self).real, 0.0)))

    def add(self, other):
        """Direct-sum addition; bond dimensions add up."""
        if len(other) != len(self) or other.phys_dim != self.phys_dim:
            raise ValueError("can only add MPS of identical geometry")
        if len(self) == 1:
            return Mps([self.tensors[0] + other.tensors[0]])
        p = self.phys_dim
        out = []
        for i, (a, b) in enumerate(zip(self.tensors, other.tensors)):
            if i == 0:
                t = np.concatenate([a, b], axis=2)
            elif i == len(self) - 1:
                t = np.concatenate([a, b], axis=1)
            else:
                t = np.zeros(
                    (p, a.shape[1] + b.shape[1], a.shape[2] + b.shape[2]),
                    dtype=complex,
                )
                t[:, : a.shape[1], : a.shape[2]] = a
                t[:, a.shape[1] :, a.shape[2] :] = b
            out.append(t)
        return Mps(out)

    def contract_with_product_dual(self, vectors):
        """Chain contraction with one dual vector per site (no conjugation).

        For a vectorized density matrix and per-site vectors ``vec(A_i^T)``
        this evaluates ``Tr((A_1 (x) ... (x) A_L) rho)``.
        """
        if len(vectors) != len(self):
            raise ValueError("need one dual vector per site")
        env = np.ones((1,), dtype=complex)
        for v, t in zip(vectors, self.tensors):
            site = np.tensordot(np.asarray(v, dtype=complex), t, axes=([0], [0]))
            env = env @ site
        return complex(env[0])

    def dagger_reflect(self, site_dim):
        """Adjoint of the represented operator: swap Choi sublegs and conjugate."""
        d = site_dim
        if d * d != self.phys_dim:
            raise ValueError("phys_dim is not a perfect square")
        out = []
        for t in self.tensors:
            r = t.reshape(d, d, t.shape[1], t.shape[2])
            out.append(r.transpose(1, 0, 2, 3).conj().reshape(d * d, t.shape[1], t.shape[2]))
        return Mps(out)

    def to_dense(self):
        """Dense vector of the full state (exponential; small chains only)."""
        acc = self.tensors[0][:, 0, :]  # [p, r]
        for t in self.tensors[1:]:
            acc = np.tensordot(acc, t, axes=([1], [1]))  # [P, p, r]
            acc = acc.reshape(-1, t.shape[2])
        return acc[:, 0]

    # -- canonical forms and compression ------------------------------------

    def canonicalize(self, spec=None):
        """Left-to-right QR then right-to-left truncated SVD.

        Returns ``(mps, info)`` with the new state left-gauged (orthogonality
        center at site 0) and `info` carrying the per-bond Schmidt spectra and
        relative discarded weights, ordered by bond index (0 .. L-2).
        """
        spec = spec or TruncationSpec()
        tensors = [t.copy() for t in self.tensors]
        n = len(tensors)
        # Right-moving QR pass: tensors 0..n-2 become left-orthonormal.
        for i in range(n - 1):
            p, l, r = tensors[i].shape
            q, rmat = np.linalg.qr(tensors[i].reshape(p * l, r))
            tensors[i] = q.reshape(p, l, -1)
            tensors[i + 1] = np.tensordot(rmat, tensors[i + 1], axes=([1], [1])).transpose(
                1, 0, 2
            )
        spectra = [None] * (n - 1)
        weights = [0.0] * (n - 1)
        # Left-moving SVD pass with truncation; Schmidt values are genuine
        # because everything to the left is orthonormal at that point.
        for i in range(n - 1, 0, -1):
            p, l, r = tensors[i].shape
            u, s, vh, w = truncated_svd(tensors[i].transpose(1, 0, 2).reshape(l, p * r), spec)
            spectra[i - 1] = s
            weights[i - 1] = w
            tensors[i] = vh.reshape(-1, p, r).transpose(1, 0, 2)
            us = u * s[None, :]
            tensors[i - 1] = np.tensordot(tensors[i - 1], us, axes=([2], [0]))
        return Mps(tensors), CompressionInfo(spectra, weights)

    def mixed_canonical(self, center, spec=None):
        """Gauge with left-orthonormal tensors < center and right-orthonormal > center."""
        out, _ = self.canonicalize(spec)  # left gauge, center at 0
        tensors = out.tensors
        for i in range(center):
            p, l, r = tensors[i].shape
            q, rmat = np.linalg.qr(tensors[i].reshape(p * l, r))
            tensors[i] = q.reshape(p, l, -1)
            tensors[i + 1] = np.tensordot(rmat, tensors[i + 1], axes=([1], [1])).transpose(
                1, 0, 2
            )
        return Mps(tensors)

    def apply_mpo(self, mpo, spec=None):
        """Apply an MPO and recompress with the given truncation."""
        if len(mpo) != len(self):
            raise ValueError("MPO/MPS length mismatch")
        out = []
        for w, t in zip(mpo.tensors, self.tensors):
            # w[wl, po, pi, wr], t[pi, l, r] -> [po, wl*l, wr*r]
            tmp = np.tensordot(w, t, axes=([2], [0]))  # [wl, po, wr, l, r]
            tmp = tmp.transpose(1, 0, 3, 2, 4)
            out.append(
                tmp.reshape(w.shape[1], w.shape[0] * t.shape[1], w.shape[3] * t.shape[2])
            )
        result = Mps(out)
        if spec is not None:
            result, _ = result.canonicalize(spec)
        return result


class Mpo:
    """Finite MPO with boundary vectors absorbed into the end tensors."""

    __slots__ = ("tensors",)

    def __init__(self, tensors):
        tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if not tensors:
            raise ValueError("an MPO needs at least one site")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[3] != 1:
            raise ValueError("boundary bonds must have extent 1")
        for i in range(len(tensors) - 1):
            if tensors[i].shape[3] != tensors[i + 1].shape[0]:
                raise ValueError(f"bond mismatch between sites {i} and {i + 1}")
        self.tensors = tensors

    def __len__(self):
        return len(self.tensors)

    @property
    def phys_dim(self):
        return self.tensors[0].shape[1]

    @property
    def bond_dims(self):
        return [t.shape[3] for t in self.tensors[:-1]]

    @property
    def max_bond(self):
        return max(self.bond_dims, default=1)

    @property
    def boundary_left(self):
        """Left boundary vector (trivial after absorption)."""
        return np.ones(1, dtype=complex)

    @property
    def boundary_right(self):
        return np.ones(1, dtype=complex)

    @classmethod
    def identity(cls, length, phys_dim):
        eye = np.eye(phys_dim, dtype=complex).reshape(1, phys_dim, phys_dim, 1)
        return cls([eye.copy() for _ in range(length)])

    @classmethod
    def from_local_terms(cls, length, phys_dim, terms, compress_cutoff=1e-13):
        """Assemble ``sum_k O_k`` from windowed dense terms.

        `terms` is an iterable of ``(start, matrix)`` with `matrix` acting on
        ``width = log_{phys_dim} extent`` consecutive sites from `start`. The
        assembly uses the standard pending/done automaton over virtual bonds
        and is compressed afterwards with a relative cutoff that only removes
        numerically zero directions.
        """
        merged = {}
        for start, matrix in terms:
            matrix = np.asarray(matrix, dtype=complex)
            width = int(round(np.log(matrix.shape[0]) / np.log(phys_dim)))
            if phys_dim**width != matrix.shape[0]:
                raise ValueError("term extent is not a power of phys_dim")
            if start < 0 or start + width > length:
                raise ValueError(
                    f"term on sites [{start}, {start + width}) leaves the chain"
                )
            key = (start, width)
            merged[key] = matrix if key not in merged else merged[key] + matrix
        factor_lists = [
            (start, _mpo_factors(matrix, width, phys_dim))
            for (start, width), matrix in sorted(merged.items())
        ]
        if not factor_lists:
            return cls(
                [np.zeros((1, phys_dim, phys_dim, 1), dtype=complex) for _ in range(length)]
            )
        # Bond layout per cut: slot 0 = "no term started", slot 1 = "term done",
        # then one block per term currently crossing the cut.
        crossing = [[] for _ in range(length + 1)]  # cut i sits left of site i
        for term_id, (start, factors) in enumerate(factor_lists):
            width = len(factors)
            for cut in range(start + 1, start + width):
                crossing[cut].append(term_id)
        offsets = []
        dims = []
        for cut in range(length + 1):
            off = {}
            pos = 2
            for term_id in crossing[cut]:
                start, factors = factor_lists[term_id]
                k = cut - start  # factor index whose right bond crosses this cut
                off[term_id] = pos
                pos += factors[k - 1].shape[2]
            offsets.append(off)
            dims.append(pos)
        eye = np.eye(phys_dim, dtype=complex)
        tensors = []
        for i in range(length):
            dl, dr = dims[i], dims[i + 1]
            w = np.zeros((dl, phys_dim, phys_dim, dr), dtype=complex)
            w[0, :, :, 0] = eye
            w[1, :, :, 1] = eye
            for term_id, (start, factors) in enumerate(factor_lists):
                width = len(factors)
                if not (start <= i < start + width):
                    continue
                k = i - start
                f = factors[k]  # [bl, out*in, br]
                blk = f.reshape(f.shape[0], phys_dim, phys_dim, f.shape[2])
                lo = 0 if k == 0 else offsets[i][term_id]
                l_slice = slice(0, 1) if k == 0 else slice(lo, lo + f.shape[0])
                if k == width - 1:
                    w[l_slice, :, :, 1:2] += blk
                else:
                    ro = offsets[i + 1][term_id]
                    w[l_slice, :, :, ro : ro + f.shape[2]] += blk
            tensors.append(w)
        # Absorb boundary selectors: start in slot 0, finish in slot 1.
        tensors[0] = tensors[0][0:1]
        last = tensors[-1]
        # A width-L term ends in slot 1; but for length-1 chains slot 0 never fed it.
        tensors[-1] = last[:, :, :, 1:2]
        out = cls(tensors)
        if compress_cutoff:
            out = out.compressed(TruncationSpec(weight_cutoff=compress_cutoff))
        return out

    def compressed(self, spec):
        """SVD compression, treating the MPO as an MPS with fused physical legs."""
        fused = Mps(
            [
                t.transpose(1, 2, 0, 3).reshape(t.shape[1] * t.shape[2], t.shape[0], t.shape[3])
                for t in self.tensors
            ]
        )
        comp, _ = fused.canonicalize(spec)
        p = self.phys_dim
        out = []
        for t in comp.tensors:
            out.append(
                t.reshape(p, p, t.shape[1], t.shape[2]).transpose(2, 0, 1, 3)
            )
        return Mpo(out)

    def adjoint(self):
        """MPO of the adjoint map: conjugate and swap the physical legs sitewise."""
        return Mpo([t.conj().transpose(0, 2, 1, 3) for t in self.tensors])

    def scaled(self, alpha):
        out = [t.copy() for t in self.tensors]
        out[0] = alpha * out[0]
        return Mpo(out)

    def add(self, other):
        """Direct sum of two MPOs of identical geometry."""
        if len(other) != len(self) or other.phys_dim != self.phys_dim:
            raise ValueError("can only add MPOs of identical geometry")
        if len(self) == 1:
            return Mpo([self.tensors[0] + other.tensors[0]])
        p = self.phys_dim
        out = []
        for i, (a, b) in enumerate(zip(self.tensors, other.tensors)):
            if i == 0:
                t = np.concatenate([a, b], axis=3)
            elif i == len(self) - 1:
                t = np.concatenate([a, b], axis=0)
            else:
                t = np.zeros(
                    (a.shape[0] + b.shape[0], p, p, a.shape[3] + b.shape[3]),
                    dtype=complex,
                )
                t[: a.shape[0], :, :, : a.shape[3]] = a
                t[a.shape[0] :, :, :, a.shape[3] :] = b
            out.append(t)
        return Mpo(out)

    def to_dense(self):
        """Dense matrix of the full MPO (small chains only)."""
        acc = self.tensors[0][0]  # [out, in, wr]
        dim_o, dim_i = acc.shape[0], acc.shape[1]
        for t in self.tensors[1:]:
            acc = np.tensordot(acc, t, axes=([2], [0]))  # [O, I, out, in, wr]
            acc = acc.transpose(0, 2, 1, 3, 4)
            dim_o *= t.shape[1]
            dim_i *= t.shape[2]
            acc = acc.reshape(dim_o, dim_i, t.shape[3])
        return acc[:, :, 0]


def _mpo_factors(matrix, width, phys_dim):
    """Sequential SVD of a windowed operator into per-site MPO factors.

    Returns factors of shape ``[bl, out*in, br]`` whose bond product rebuilds
    the matrix exactly (numerically zero singular values are dropped).
    """
    if width == 1:
        return [matrix.reshape(1, phys_dim * phys_dim, 1)]
    # Reorder [o1..ow, i1..iw] -> [(o1 i1), (o2 i2), ...]
    tensor = matrix.reshape((phys_dim,) * (2 * width))
    perm = [x for k in range(width) for x in (k, width + k)]
    tensor = tensor.transpose(perm).reshape((phys_dim * phys_dim,) * width)
    factors = []
    rest = tensor.reshape(1, -1)
    spec = TruncationSpec(weight_cutoff=1e-14)
    for _ in range(width - 1):
        l = rest.shape[0]
        mat = rest.reshape(l * phys_dim * phys_dim, -1)
        u, s, vh, _ = truncated_svd(mat, spec)
        factors.append(u.reshape(l, phys_dim * phys_dim, -1))
        rest = s[:, None] * vh
    factors.append(rest.reshape(rest.shape[0], phys_dim * phys_dim, 1))
    return factors
