import itertools
import random

import pytest
import torch

from ndpca.allocation import (
    BandwidthAllocation,
    CompressedBlock,
    allocate_components,
    compress,
    equal_split,
    reassemble,
)
from ndpca.pca import PcaBasis, fit_local_pca, joint_pca_truncate, lift, project
from ndpca.wire import decode_block, encode_block, payload_bits


def _basis_with(singular_values):
    v = len(singular_values)
    return PcaBasis(
        mean=torch.zeros(v, dtype=torch.float64),
        directions=torch.eye(v, dtype=torch.float64),
        singular_values=torch.tensor(singular_values, dtype=torch.float64),
    )


def _axis_data(n=4000, seed=0):
    g = torch.Generator().manual_seed(seed)
    x = torch.randn(n, 2, generator=g, dtype=torch.float64)
    return x * torch.tensor([3.0, 1.0], dtype=torch.float64)


def _exhaustive_best(bases, budget):
    prefix = [[0.0] + list(itertools.accumulate(b.singular_values.tolist())) for b in bases]
    best = None
    for ks in itertools.product(*(range(b.width + 1) for b in bases)):
        if sum(ks) != budget:
            continue
        energy = sum(p[k] for p, k in zip(prefix, ks))
        best = energy if best is None else max(best, energy)
    return best


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------


class TestFitLocalPca:
    def test_axis_aligned(self):
        basis = fit_local_pca(_axis_data())
        assert abs(float(basis.directions[0, 0])) == pytest.approx(1.0, abs=1e-2)
        assert float(basis.directions[0, 0]) > 0

    def test_orthonormal_and_sorted(self):
        z = torch.randn(50, 6, generator=torch.Generator().manual_seed(2), dtype=torch.float64)
        basis = fit_local_pca(z)
        u = basis.directions
        assert torch.allclose(u.T @ u, torch.eye(6, dtype=torch.float64), atol=1e-6)
        s = basis.singular_values
        assert torch.all(s[:-1] >= s[1:])

    def test_identical_rows(self):
        basis = fit_local_pca(torch.ones(10, 3, dtype=torch.float64))
        assert torch.all(basis.singular_values == 0)

    def test_full_reconstruction(self):
        z = torch.randn(30, 5, generator=torch.Generator().manual_seed(3), dtype=torch.float64)
        basis = fit_local_pca(z)
        assert torch.allclose(lift(project(z, basis, 5), basis), z, atol=1e-6)

    def test_fewer_samples_than_width(self):
        z = torch.randn(3, 6, generator=torch.Generator().manual_seed(4), dtype=torch.float64)
        basis = fit_local_pca(z)
        assert basis.directions.shape == (6, 6)
        assert torch.all(basis.singular_values[2:] < 1e-9)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError, match="at least 2"):
            fit_local_pca(torch.zeros(1, 3))

    def test_state_round_trip(self):
        basis = fit_local_pca(_axis_data(100))
        again = PcaBasis.from_state(basis.state_dict())
        assert torch.equal(again.directions, basis.directions)


class TestProject:
    def test_zero_components(self):
        basis = fit_local_pca(_axis_data(100))
        assert project(torch.ones(2, dtype=torch.float64), basis, 0).shape == (0,)

    def test_mean_projects_to_zero(self):
        basis = fit_local_pca(_axis_data(100))
        assert torch.allclose(project(basis.mean, basis, 2), torch.zeros(2, dtype=torch.float64))

    def test_k_too_large(self):
        basis = fit_local_pca(_axis_data(100))
        with pytest.raises(ValueError, match="outside"):
            project(basis.mean, basis, 3)


# ---------------------------------------------------------------------------
# Allocation
# ---------------------------------------------------------------------------


class TestAllocateComponents:
    def test_two_sources(self):
        alloc = allocate_components([_basis_with([3, 1]), _basis_with([2, 0.5])], 2, [1, 2])
        assert alloc.per_source == {1: 1, 2: 1}

    def test_full_budget(self):
        alloc = allocate_components([_basis_with([3, 1]), _basis_with([2, 0.5, 0.1])], 5)
        assert alloc.per_source == {0: 2, 1: 3}

    def test_empty_budget(self):
        alloc = allocate_components([_basis_with([3, 1]), _basis_with([2])], 0)
        assert alloc.per_source == {0: 0, 1: 0}

    def test_ties_go_to_lower_source(self):
        alloc = allocate_components([_basis_with([1, 1]), _basis_with([1, 1])], 3)
        assert alloc.per_source == {0: 2, 1: 1}

    def test_budget_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            allocate_components([_basis_with([1, 1])], 3)

    def test_matches_exhaustive_search(self):
        r = random.Random(0)
        for _ in range(40):
            n_src = r.randint(1, 3)
            bases = []
            for _ in range(n_src):
                v = r.randint(1, 8)
                bases.append(_basis_with(sorted((r.uniform(0, 10) for _ in range(v)), reverse=True)))
            total = sum(b.width for b in bases)
            for budget in range(total + 1):
                alloc = allocate_components(bases, budget)
                got = sum(float(b.singular_values[:alloc.per_source[i]].sum()) for i, b in enumerate(bases))
                assert got == pytest.approx(_exhaustive_best(bases, budget), abs=1e-9)


class TestEqualSplit:
    def test_even(self):
        assert equal_split({0: 4, 1: 4, 2: 4, 3: 4}, 8).per_source == {0: 2, 1: 2, 2: 2, 3: 2}

    def test_remainder(self):
        assert equal_split({0: 4, 1: 4, 2: 4, 3: 4}, 10).per_source == {0: 3, 1: 3, 2: 2, 3: 2}

    def test_exceeds_width(self):
        with pytest.raises(ValueError, match="exceeds"):
            equal_split({0: 1, 1: 8}, 6)


class TestAllocationTypes:
    def test_sum_must_match_budget(self):
        with pytest.raises(ValueError, match="does not sum"):
            BandwidthAllocation(per_source={0: 1, 1: 1}, budget=3)

    def test_block_lengths_checked(self):
        alloc = BandwidthAllocation(per_source={0: 2}, budget=2)
        with pytest.raises(ValueError, match="allocation says 2"):
            CompressedBlock(coeffs={0: torch.zeros(3)}, allocation=alloc)


# ---------------------------------------------------------------------------
# Compression round trips
# ---------------------------------------------------------------------------


class TestReassemble:
    def _setup(self):
        g = torch.Generator().manual_seed(5)
        latents = {0: torch.randn(40, 3, generator=g, dtype=torch.float64), 1: torch.randn(40, 2, generator=g, dtype=torch.float64)}
        bases = {sid: fit_local_pca(z) for sid, z in latents.items()}
        return latents, bases

    def test_full_budget_is_exact(self):
        latents, bases = self._setup()
        alloc = allocate_components([bases[0], bases[1]], 5)
        zhat = reassemble(compress(latents, bases, alloc), bases, alloc)
        assert torch.allclose(zhat, torch.cat([latents[0], latents[1]], dim=1), atol=1e-6)

    def test_zero_budget_gives_means(self):
        latents, bases = self._setup()
        alloc = allocate_components([bases[0], bases[1]], 0)
        zhat = reassemble(compress(latents, bases, alloc), bases, alloc)
        means = torch.cat([bases[0].mean, bases[1].mean])
        assert torch.allclose(zhat, means.expand(40, 5))

    def test_half_budget_keeps_dominant_axis(self):
        z = _axis_data(4000)
        basis = fit_local_pca(z)
        alloc = BandwidthAllocation(per_source={0: 1}, budget=1)
        zhat = reassemble(compress({0: z}, {0: basis}, alloc), {0: basis}, alloc)
        assert float((zhat[:, 0] - z[:, 0]).pow(2).mean()) < 0.01 * float(z[:, 0].var())

    def test_allocation_mismatch(self):
        latents, bases = self._setup()
        block = compress(latents, bases, BandwidthAllocation(per_source={0: 1, 1: 1}, budget=2))
        with pytest.raises(ValueError, match="block allocation"):
            reassemble(block, bases, BandwidthAllocation(per_source={0: 2, 1: 0}, budget=2))


class TestJointTruncate:
    def test_full_width_identity(self):
        z = torch.randn(20, 4, generator=torch.Generator().manual_seed(6), dtype=torch.float64)
        assert torch.allclose(joint_pca_truncate(z, 4), z, atol=1e-6)

    def test_zero_budget_is_mean(self):
        z = torch.randn(20, 4, generator=torch.Generator().manual_seed(6), dtype=torch.float64)
        assert torch.allclose(joint_pca_truncate(z, 0), z.mean(dim=0).expand(20, 4))

    def test_error_equals_discarded_eigenvalues(self):
        g = torch.Generator().manual_seed(7)
        n = 20000
        scales = torch.tensor([4.0, 2.0, 1.0, 0.5], dtype=torch.float64)
        q, _ = torch.linalg.qr(torch.randn(4, 4, generator=g, dtype=torch.float64))
        z = (torch.randn(n, 4, generator=g, dtype=torch.float64) * scales) @ q.T
        err = float((joint_pca_truncate(z, 2) - z).pow(2).sum(dim=1).mean())
        assert err == pytest.approx(1.0 + 0.25, rel=0.05)


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------


class TestWire:
    def test_encode_decode(self):
        alloc = BandwidthAllocation(per_source={0: 2, 3: 0, 5: 1}, budget=3)
        block = CompressedBlock(
            coeffs={0: torch.tensor([1.5, -2.0]), 3: torch.zeros(0), 5: torch.tensor([0.25])},
            allocation=alloc,
        )
        raw = encode_block(block)
        assert raw[:2] == b"\x03\x00"
        assert len(raw) == 2 + 3 * 4 + 3 * 4
        assert payload_bits(block) == 8 * len(raw)
        back = decode_block(raw)
        assert back.allocation.per_source == alloc.per_source
        assert back.coeffs[0].tolist() == [1.5, -2.0]
        assert back.coeffs[5].tolist() == [0.25]

    def test_truncated_payload(self):
        alloc = BandwidthAllocation(per_source={0: 2}, budget=2)
        raw = encode_block(CompressedBlock(coeffs={0: torch.ones(2)}, allocation=alloc))
        with pytest.raises(ValueError, match="header implies"):
            decode_block(raw[:-1])

    def test_batched_block_rejected(self):
        alloc = BandwidthAllocation(per_source={0: 1}, budget=1)
        with pytest.raises(ValueError, match="one sample"):
            encode_block(CompressedBlock(coeffs={0: torch.ones(4, 1)}, allocation=alloc))
