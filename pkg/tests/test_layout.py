import json
import math
from importlib import resources

import numpy as np
import pytest

from kitchencell.layout import (
    AnnealConfig,
    ApplianceSpec,
    LayoutProblem,
    NoFeasibleFound,
    Obb,
    Placement,
    body_box,
    corridor_box,
    evaluate_layout,
    key_point,
    obb_overlap,
    optimize_layout,
)
from kitchencell.schemas import layout_problem_from_json


@pytest.fixture(scope="module")
def cell_problem():
    doc = json.loads(
        (resources.files("kitchencell") / "data" / "layout_cell.json").read_text()
    )
    return layout_problem_from_json(doc)


def cube(center, half=0.5, yaw=0.0):
    c, s = math.cos(yaw), math.sin(yaw)
    return Obb(
        center=tuple(center),
        half_extents=(half, half, half),
        rotation=((c, -s, 0.0), (s, c, 0.0), (0.0, 0.0, 1.0)),
    )


def test_obb_rotation_must_be_orthonormal():
    with pytest.raises(ValueError):
        Obb((0, 0, 0), (1, 1, 1), ((2, 0, 0), (0, 1, 0), (0, 0, 1)))


def test_unit_cubes_separated_and_coincident():
    assert obb_overlap(cube((0, 0, 0)), cube((3, 0, 0))) == 0.0
    assert obb_overlap(cube((0, 0, 0)), cube((0, 0, 0))) == pytest.approx(1.0)
    # face contact at distance 1: overlap depth exactly 0.5
    assert obb_overlap(cube((0, 0, 0)), cube((0.5, 0, 0))) == pytest.approx(0.5)


def test_overlap_is_symmetric_and_rigid_invariant():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = cube(rng.uniform(-1, 1, 3), half=0.4, yaw=rng.uniform(0, np.pi))
        b = cube(rng.uniform(-1, 1, 3), half=0.6, yaw=rng.uniform(0, np.pi))
        d_ab = obb_overlap(a, b)
        d_ba = obb_overlap(b, a)
        assert d_ab == pytest.approx(d_ba, abs=1e-12)
        # translate both by the same vector: depth unchanged
        t = rng.uniform(-2, 2, 3)
        a2 = Obb(tuple(np.array(a.center) + t), a.half_extents, a.rotation)
        b2 = Obb(tuple(np.array(b.center) + t), b.half_extents, b.rotation)
        assert obb_overlap(a2, b2) == pytest.approx(d_ab, abs=1e-9)


def test_rotated_cubes_narrow_gap():
    # a 45-degree cube whose corner reaches into the gap
    a = cube((0, 0, 0))
    b = cube((1.2, 0, 0), yaw=math.pi / 4)
    # corner of b extends sqrt(2)/2 toward a: they overlap
    assert obb_overlap(a, b) > 0
    assert obb_overlap(a, cube((1.8, 0, 0), yaw=math.pi / 4)) == 0.0


def test_corridor_box_spans_key_point_to_center():
    spec = ApplianceSpec(
        name="a",
        half_extents=(0.3, 0.2, 0.4),
        z=0.4,
        key_point_offset=(0.0, 0.3, 0.1),
        corridor_cross_section=(0.1, 0.1),
    )
    pl = Placement(1.0, 0.0, yaw=0.0)
    v = (0.0, 0.0, 0.5)
    k = key_point(spec, pl)
    box = corridor_box(spec, pl, v)
    mid = (np.asarray(v) + k) / 2
    assert np.allclose(box.center, mid, atol=1e-12)
    assert box.half_extents[0] == pytest.approx(np.linalg.norm(k - np.asarray(v)) / 2)
    assert box.half_extents[1:] == (0.1, 0.1)


def test_evaluate_layout_reports_violations(cell_problem):
    # stack all appliances on the same spot: bodies overlap
    placements = [Placement(0.0, 0.6) for _ in cell_problem.appliances]
    objective, report = evaluate_layout(cell_problem, placements)
    assert not report.feasible
    assert report.body_body
    assert report.total_violation() > 0
    # spread them far outside the workspace: ellipsoid violations instead
    far = [Placement(5.0 * (i + 1), 0.0) for i in range(3)]
    _, report2 = evaluate_layout(cell_problem, far)
    assert report2.ellipsoid and not report2.body_body


def test_optimizer_finds_feasible_cell_layout(cell_problem):
    layout = optimize_layout(cell_problem, seed=0)
    assert layout.report.feasible
    obj, report = evaluate_layout(cell_problem, layout.placements)
    assert obj == pytest.approx(layout.objective)
    assert report.feasible
    # every key point inside the workspace ellipsoid
    v = np.asarray(cell_problem.workspace_center)
    A = np.asarray(cell_problem.workspace_matrix)
    for spec, pl in zip(cell_problem.appliances, layout.placements):
        k = key_point(spec, pl)
        assert float((k - v) @ A @ (k - v)) <= 1.0 + 1e-9


def test_optimizer_is_deterministic_per_seed(cell_problem):
    config = AnnealConfig(iterations=800, restarts=1)
    a = optimize_layout(cell_problem, seed=3, config=config)
    b = optimize_layout(cell_problem, seed=3, config=config)
    assert a.placements == b.placements
    assert a.objective == b.objective


def test_single_appliance_polish_reaches_center():
    spec = ApplianceSpec(
        name="solo",
        half_extents=(0.2, 0.2, 0.2),
        z=0.5,
        key_point_offset=(0.0, 0.0, 0.0),
    )
    problem = LayoutProblem(
        appliances=(spec,),
        workspace_center=(0.0, 0.0, 0.5),
        workspace_matrix=tuple(tuple(row) for row in np.eye(3).tolist()),
        search_radius=1.0,
    )
    layout = optimize_layout(problem, seed=0)
    assert layout.objective < 1e-3


def test_infeasible_problem_raises_with_best_attempt():
    # two appliances whose key points are their centers, inside a workspace
    # ellipsoid so tight both bodies must coincide
    tiny = tuple(tuple(row) for row in (1e6 * np.eye(3)).tolist())
    specs = tuple(
        ApplianceSpec(name=f"a{i}", half_extents=(0.3, 0.3, 0.3), z=0.0)
        for i in range(2)
    )
    problem = LayoutProblem(
        appliances=specs,
        workspace_center=(0.0, 0.0, 0.0),
        workspace_matrix=tiny,
        search_radius=0.5,
    )
    config = AnnealConfig(iterations=300, restarts=1)
    with pytest.raises(NoFeasibleFound) as info:
        optimize_layout(problem, seed=0, config=config)
    assert info.value.best is not None
    assert not info.value.best.report.feasible


def test_body_box_follows_placement_yaw():
    spec = ApplianceSpec(name="a", half_extents=(0.4, 0.2, 0.3), z=0.4)
    box = body_box(spec, Placement(1.0, 2.0, yaw=math.pi / 2))
    assert box.center == pytest.approx((1.0, 2.0, 0.4))
    R = np.asarray(box.rotation)
    assert np.allclose(R @ np.array([1, 0, 0]), [0, 1, 0], atol=1e-12)
