import numpy as np
import pytest

from randtensor.families import (
    FAMILY_NAMES,
    UnknownFamilyError,
    default_signs,
    generate_family,
    lattice_ball,
)
from randtensor.tensor_core import l1_norm


def test_family_names_pinned():
    assert FAMILY_NAMES == ("dense-gaussian", "sparse-gaussian",
                            "diagonal-pairing", "rank-one", "random-sign")


def test_default_signs_alternate():
    assert default_signs(1) == (1,)
    assert default_signs(4) == (1, -1, 1, -1)


def test_lattice_ball_counts():
    assert len(lattice_ball(1, 3)) == 7
    # d = 2: 1 + 2d + ... centered l1 ball, N = 1 has 5 points
    assert len(lattice_ball(2, 1)) == 5
    assert all(l1_norm(pt) <= 2 for pt in lattice_ball(3, 2))


def test_generation_is_deterministic():
    a = generate_family("sparse-gaussian", k=2, d=1, N=6, seed=42)
    b = generate_family("sparse-gaussian", k=2, d=1, N=6, seed=42)
    assert a.entries == b.entries
    c = generate_family("sparse-gaussian", k=2, d=1, N=6, seed=43)
    assert a.entries != c.entries


def test_families_differ_from_each_other():
    seen = set()
    for name in FAMILY_NAMES:
        h = generate_family(name, k=2, d=1, N=4, seed=7)
        seen.add(tuple(sorted(h.entries.items())))
    assert len(seen) == len(FAMILY_NAMES)


def test_support_budget_respected():
    for name in FAMILY_NAMES:
        h = generate_family(name, k=3, d=1, N=16, seed=1, support_budget=500)
        assert h.nnz <= 500


def test_support_stays_in_ball():
    h = generate_family("dense-gaussian", k=2, d=2, N=3, seed=5)
    for key in h.entries:
        assert all(l1_norm(pt) <= 3 for pt in key)


def test_diagonal_pairing_structure():
    h = generate_family("diagonal-pairing", k=1, d=1, N=5, seed=3)
    # every entry ties all axes to one site with unit weight
    assert h.nnz == len(lattice_ball(1, 5))
    for key, value in h.entries.items():
        assert len(set(key)) == 1
        assert value == 1.0 + 0.0j
    deep = generate_family("diagonal-pairing", k=3, d=1, N=4, seed=3)
    for key in deep.entries:
        assert len(set(key)) == 1


def test_rank_one_has_rank_one_flattenings():
    h = generate_family("rank-one", k=1, d=1, N=8, seed=11)
    from randtensor.norms import matricize
    from randtensor.tensor_core import Partition

    j = h.labels_in_group("J")
    rest = tuple(l for l in h.labels if l not in j)
    m = matricize(h, Partition(frozenset(j), frozenset(rest)))
    s = np.linalg.svd(m.matrix, compute_uv=False)
    assert s[0] > 0
    assert s[1] <= 1e-12 * s[0]


def test_random_sign_values():
    h = generate_family("random-sign", k=2, d=1, N=8, seed=13)
    assert all(v in (1 + 0j, -1 + 0j) for v in h.entries.values())


def test_label_layout():
    h = generate_family("dense-gaussian", k=2, d=1, N=3, seed=1, na=2, nb=1)
    assert [l.group for l in h.labels] == ["J", "J", "A", "A", "B"]


def test_unknown_family_raises():
    with pytest.raises(UnknownFamilyError):
        generate_family("mystery", k=1, d=1, N=2, seed=0)
    with pytest.raises(ValueError):
        generate_family("rank-one", k=0, d=1, N=2, seed=0)


def test_sparse_density_scales_support():
    lo = generate_family("sparse-gaussian", k=2, d=1, N=10, seed=2, density=0.01)
    hi = generate_family("sparse-gaussian", k=2, d=1, N=10, seed=2, density=0.05)
    assert lo.nnz < hi.nnz
