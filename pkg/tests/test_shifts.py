import math

import numpy as np
import pytest

from shiftlab.errors import InvalidArgumentError
from shiftlab.geometry import angle_between, normalize_rows, sample_prior
from shiftlab.intensity import ball99
from shiftlab.shifts import (
    FAMILY_CODES,
    RADIUS_GRID_DEFAULT,
    THETA_GRID_DEFAULT,
    ShiftSpec,
    TargetPair,
    apply_shift,
    derive_targets,
    in_support,
    reconstruct_spec,
    sample_shifted_batch,
)


def ortho_targets(d=3):
    t1 = np.zeros(d)
    t2 = np.zeros(d)
    t1[0] = 1.0
    t2[1] = 1.0
    return TargetPair(t1, t2)


# -- targets --------------------------------------------------------------


def test_derive_targets_deterministic_and_unit():
    a = derive_targets(7, 16)
    b = derive_targets(7, 16)
    assert np.array_equal(a.t1, b.t1) and np.array_equal(a.t2, b.t2)
    assert abs(np.linalg.norm(a.t1) - 1.0) < 1e-9
    assert abs(np.linalg.norm(a.t2) - 1.0) < 1e-9
    assert 0.0 < a.angle < math.pi
    c = derive_targets(8, 16)
    assert not np.array_equal(a.t1, c.t1)


def test_derive_targets_independent_of_data_stream():
    # Targets come from a reserved stream; drawing data with the same
    # seed must not collide with them.
    targets = derive_targets(7, 16)
    data = sample_prior(16, 2, 7)
    assert not np.allclose(normalize_rows(data.values)[0], targets.t1)


def test_target_pair_validation():
    with pytest.raises(InvalidArgumentError):
        TargetPair(np.array([1.0, 0.0]), np.array([2.0, 0.0]))  # non-unit
    with pytest.raises(InvalidArgumentError):
        TargetPair(np.array([1.0, 0.0]), np.array([1.0, 0.0]))  # zero angle
    with pytest.raises(InvalidArgumentError):
        TargetPair(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))  # antipodal


# -- spec validation ------------------------------------------------------


def test_spec_constructors_and_param():
    t = ortho_targets()
    assert ShiftSpec.prior(4).param == 0.0
    assert ShiftSpec.extend(0.3, t).param == 0.3
    assert ShiftSpec.overlap(0.4, t).param == 0.4
    assert ShiftSpec.truncation(0.8, 5).param == 0.8


def test_spec_rejects_bad_parameters():
    t = ortho_targets()
    with pytest.raises(InvalidArgumentError):
        ShiftSpec.extend(-0.1, t)
    with pytest.raises(InvalidArgumentError):
        ShiftSpec.extend(math.pi / 2 + 0.01, t)
    with pytest.raises(InvalidArgumentError):
        ShiftSpec.truncation(0.0, 3)
    with pytest.raises(InvalidArgumentError):
        ShiftSpec.truncation(-1.0, 3)
    with pytest.raises(InvalidArgumentError):
        ShiftSpec.truncation(math.nan, 3)
    with pytest.raises(InvalidArgumentError):
        ShiftSpec(family="warp", dim=3)
    with pytest.raises(InvalidArgumentError):
        ShiftSpec(family="prior", dim=3, theta=0.2)
    with pytest.raises(InvalidArgumentError):
        ShiftSpec(family="truncation", dim=3, radius=1.0, theta=0.2)
    with pytest.raises(InvalidArgumentError):
        ShiftSpec(family="extend", dim=5, theta=0.2, targets=ortho_targets(3))


def test_truncation_allows_dim_1():
    spec = ShiftSpec.truncation(0.8, 1)
    assert spec.dim == 1
    with pytest.raises(InvalidArgumentError):
        ShiftSpec(family="extend", dim=1, theta=0.1, targets=None)


def test_train_baseline():
    t = ortho_targets()
    assert ShiftSpec.extend(0.5, t).train_baseline().theta == 0.0
    assert ShiftSpec.overlap(0.5, t).train_baseline().theta == 0.0
    assert ShiftSpec.truncation(1.1, 3).train_baseline().radius == 0.8
    p = ShiftSpec.prior(3)
    assert p.train_baseline() is p


def test_grids_pinned():
    assert THETA_GRID_DEFAULT == (0.0, math.pi / 12, math.pi / 6, math.pi / 4,
                                  math.pi / 3, 5 * math.pi / 12, math.pi / 2)
    assert RADIUS_GRID_DEFAULT == (0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1)
    assert FAMILY_CODES == {"prior": 0, "extend": 1, "overlap": 2, "truncation": 3}


# -- transforms -----------------------------------------------------------


def test_prior_is_identity_copy():
    z = np.random.default_rng(0).standard_normal((5, 3))
    out = apply_shift(z, ShiftSpec.prior(3))
    assert np.array_equal(out, z)
    assert out is not z


def test_truncation_scales_norms_exactly():
    z = np.random.default_rng(1).standard_normal((100, 4))
    out = apply_shift(z, ShiftSpec.truncation(0.8, 4))
    assert np.allclose(out, 0.8 * z)
    assert np.array_equal(np.linalg.norm(out, axis=1),
                          np.linalg.norm(0.8 * z, axis=1))


def test_extend_theta_zero_gives_hemisphere():
    t = ortho_targets(3)
    spec = ShiftSpec.extend(0.0, t, dim=3)
    z = np.random.default_rng(2).standard_normal((2000, 3))
    out = apply_shift(z, spec)
    angles = np.array([angle_between(row, t.t1) for row in out])
    assert np.all(angles <= math.pi / 2 + 1e-9)
    assert angles.max() > math.pi / 2 - 0.1  # fills the hemisphere boundary


@pytest.mark.parametrize("theta", [0.0, math.pi / 6, math.pi / 3, math.pi / 2])
def test_extend_support_cap_radius(theta):
    # Containment in d=6; boundary coverage in d=3 where the angular
    # density leaves real mass near the antipode.
    for d, n in ((6, 2000), (3, 4000)):
        t = ortho_targets(d)
        spec = ShiftSpec.extend(theta, t, dim=d)
        z = np.random.default_rng(3).standard_normal((n, d))
        out = apply_shift(z, spec)
        assert np.allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-9)
        angles = np.array([angle_between(row, t.t1) for row in out])
        cap = math.pi / 2 + theta
        assert np.all(angles <= cap + 1e-9)
        assert np.all(in_support(out, spec))
        if d == 3:  # the image really reaches the cap boundary
            assert angles.max() > cap - 0.15


def test_extend_halves_angle_to_target():
    # theta=0 is the midpoint slerp: the angle to t1 exactly halves.
    t = ortho_targets(4)
    spec = ShiftSpec.extend(0.0, t, dim=4)
    z = np.random.default_rng(4).standard_normal((50, 4))
    out = apply_shift(z, spec)
    for zi, oi in zip(z, out):
        assert angle_between(oi, t.t1) == pytest.approx(
            0.5 * angle_between(zi, t.t1), abs=1e-9)


def test_extend_shrink_tau_convention():
    # Alternate convention: theta=pi/2 collapses onto the target axis.
    t = ortho_targets(3)
    spec = ShiftSpec.extend(math.pi / 2, t, dim=3)
    z = np.random.default_rng(5).standard_normal((20, 3))
    out = apply_shift(z, spec, shrink_tau=True)
    assert np.allclose(out, t.t1, atol=1e-9)
    # Default convention: theta=pi/2 leaves directions unchanged.
    out_default = apply_shift(z, spec)
    unit = z / np.linalg.norm(z, axis=1, keepdims=True)
    assert np.allclose(out_default, unit, atol=1e-12)


def test_overlap_axis_moves_with_theta():
    t = ortho_targets(5)
    assert np.array_equal(ShiftSpec.overlap(0.0, t, dim=5).hemisphere_axis(), t.t1)
    assert np.allclose(ShiftSpec.overlap(math.pi / 2, t, dim=5).hemisphere_axis(),
                       t.t2, atol=1e-12)
    mid = ShiftSpec.overlap(math.pi / 4, t, dim=5).hemisphere_axis()
    assert angle_between(mid, t.t1) == pytest.approx(t.angle / 2, abs=1e-9)


@pytest.mark.parametrize("theta", [0.0, math.pi / 8, math.pi / 4, math.pi / 2])
def test_overlap_support_hemisphere(theta):
    for d, n in ((6, 2000), (3, 4000)):
        t = ortho_targets(d)
        spec = ShiftSpec.overlap(theta, t, dim=d)
        z = np.random.default_rng(6).standard_normal((n, d))
        out = apply_shift(z, spec)
        axis = spec.hemisphere_axis()
        assert np.allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-9)
        assert np.all(out @ axis >= -1e-9)
        assert np.all(in_support(out, spec))
        if d == 3:  # the hemisphere is filled out to its equator
            assert (out @ axis).min() < 0.05


def test_apply_shift_rejects_zero_vector():
    t = ortho_targets(3)
    with pytest.raises(InvalidArgumentError):
        apply_shift(np.zeros(3), ShiftSpec.extend(0.1, t))


def test_apply_shift_rejects_dim_mismatch():
    with pytest.raises(InvalidArgumentError):
        apply_shift(np.ones(4), ShiftSpec.prior(3))


# -- support predicates ---------------------------------------------------


def test_in_support_prior_always_true():
    spec = ShiftSpec.prior(3)
    assert in_support(np.array([1e6, 0.0, 0.0]), spec) is True
    assert np.all(in_support(np.random.default_rng(0).standard_normal((10, 3)), spec))


def test_in_support_truncation_ball():
    spec = ShiftSpec.truncation(0.8, 3)
    r = 0.8 * ball99(3)
    assert in_support(np.array([r - 1e-9, 0.0, 0.0]), spec)
    assert not in_support(np.array([r + 1e-6, 0.0, 0.0]), spec)


def test_in_support_extend_rejects_off_sphere():
    t = ortho_targets(3)
    spec = ShiftSpec.extend(0.2, t)
    assert in_support(t.t1, spec)
    assert not in_support(1.1 * t.t1, spec)
    # just past the cap boundary
    cap = math.pi / 2 + 0.2
    x = np.array([math.cos(cap + 0.01), math.sin(cap + 0.01), 0.0])
    assert not in_support(x, spec)
    x_in = np.array([math.cos(cap - 0.01), math.sin(cap - 0.01), 0.0])
    assert in_support(x_in, spec)


def test_in_support_monotone_in_theta():
    # extend support grows with theta: samples at small theta remain in
    # the support of every larger theta.
    t = ortho_targets(6)
    z = np.random.default_rng(8).standard_normal((500, 6))
    thetas = [0.0, 0.3, 0.8, math.pi / 2]
    for lo, hi in zip(thetas, thetas[1:]):
        out = apply_shift(z, ShiftSpec.extend(lo, t, dim=6))
        assert np.all(in_support(out, ShiftSpec.extend(hi, t, dim=6)))


def test_in_support_file_loaded_spec_needs_targets():
    spec = reconstruct_spec(FAMILY_CODES["extend"], 0.3, 4)
    with pytest.raises(InvalidArgumentError):
        in_support(np.ones(4) / 2.0, spec)


# -- batch sampling -------------------------------------------------------


def test_sample_shifted_batch_deterministic():
    t = ortho_targets(6)
    spec = ShiftSpec.overlap(0.5, t, dim=6)
    a = sample_shifted_batch(spec, 64, 9, n_classes=2)
    b = sample_shifted_batch(spec, 64, 9, n_classes=2)
    assert np.array_equal(a.batch.values, b.batch.values)
    assert np.array_equal(a.batch.labels, b.batch.labels)
    assert a.count == 64
    assert a.source_seed == 9
    c = sample_shifted_batch(spec, 64, 10, n_classes=2)
    assert not np.array_equal(a.batch.values, c.batch.values)


def test_sample_shifted_batch_prefix_purity():
    t = ortho_targets(6)
    spec = ShiftSpec.extend(0.4, t, dim=6)
    big = sample_shifted_batch(spec, 100, 3)
    small = sample_shifted_batch(spec, 30, 3)
    assert np.array_equal(big.batch.values[:30], small.batch.values)


def test_sample_shifted_batch_truncation_tail_allowed():
    # truncation draws may exceed the nominal 99%-mass ball; generation
    # must not reject them.
    spec = ShiftSpec.truncation(1.0, 2)
    shifted = sample_shifted_batch(spec, 2000, 0)
    inside = in_support(shifted.batch.values, spec)
    assert 0.97 < inside.mean() <= 1.0


def test_reconstruct_spec_round_trip():
    assert reconstruct_spec(0, 0.0, 3).family == "prior"
    assert reconstruct_spec(3, 0.9, 1).radius == 0.9
    ext = reconstruct_spec(1, 0.7, 8)
    assert ext.family == "extend" and ext.theta == 0.7 and ext.targets is None
    with pytest.raises(InvalidArgumentError):
        reconstruct_spec(9, 0.0, 3)
