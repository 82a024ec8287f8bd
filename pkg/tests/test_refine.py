"""Deviation measurement, refinement planning and the fit-measure-split loop."""

from types import SimpleNamespace

import numpy as np
import pytest
from scipy.optimize import brentq

from ipatch.fitting import FitConfig, fit_face
from ipatch.implicit import FaithfulField
from ipatch.mesh import TriMesh, closest_points
from ipatch.network import network_from_dict
from ipatch.primitives import (
    cube_network,
    ellipsoid,
    ellipsoid_band_network,
    icosphere,
)
from ipatch.refine import (
    PatchMeasure,
    execute_plan,
    fit_patchwork,
    measure_patch,
    plan_refinement,
    refine_until,
)
from ipatch.tessellate import tessellate_patch

BAND_AXES = (1.0, 0.9, 0.8)


@pytest.fixture(scope="module")
def sphere_mesh():
    return icosphere(subdivisions=3)


@pytest.fixture(scope="module")
def sphere_net_frozen(sphere_mesh):
    return network_from_dict(cube_network(), sphere_mesh)


@pytest.fixture()
def sphere_net(sphere_net_frozen):
    return sphere_net_frozen.clone()


@pytest.fixture(scope="module")
def band_mesh():
    return ellipsoid(BAND_AXES, subdivisions=4)


@pytest.fixture()
def band_net(band_mesh):
    return network_from_dict(ellipsoid_band_network(BAND_AXES), band_mesh)


def _measure_stub(fid, max_pct, boundary=None):
    return PatchMeasure(
        face_id=fid,
        avg=0.0,
        max=0.0,
        avg_pct=0.5 * max_pct,
        max_pct=max_pct,
        samples=100,
        boundary_pct=dict(boundary or {}),
    )


# ---------------------------------------------------------------------------
# measure_patch
# ---------------------------------------------------------------------------

def test_measure_against_own_tessellation(sphere_net):
    """A patch measured against its own tessellation deviates by ~nothing."""
    fp = fit_face(sphere_net, 2)
    tess = tessellate_patch(fp.patch, resolution=32)
    fake = SimpleNamespace(mesh=tess, faces=sphere_net.faces, edges=sphere_net.edges)
    fake.mesh.scale  # materialize the cached diagonal
    m = measure_patch(fake, fp, resolution=32)
    assert m.avg <= m.max
    assert m.max < 1e-6 * tess.scale


def test_measure_sphere_face_small_and_keyed_by_loop(sphere_net):
    fp = fit_face(sphere_net, 2)
    m = measure_patch(sphere_net, fp, resolution=32)
    assert 0.0 <= m.avg <= m.max
    assert m.max_pct < 0.5
    assert m.samples > 200
    assert set(m.boundary_pct) == {eid for eid, _ in sphere_net.faces[2].loop}
    assert all(pct < 0.1 for pct in m.boundary_pct.values())


def test_measure_matches_dense_sampling_oracle(sphere_net):
    """Deviation stats agree with an independent dense sampling of the patch.

    The oracle walks a gnomonic grid of directions over the top face,
    projects each ray onto the patch surface by bisecting the distance-like
    channel, and measures those points against the mesh directly.
    """
    fp = fit_face(sphere_net, 2)
    field = FaithfulField(fp.patch)
    u = np.linspace(-1.0, 1.0, 41)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    dirs = np.stack(
        [uu.ravel(), vv.ravel(), np.ones(uu.size)], axis=1
    ) / np.sqrt(uu.ravel() ** 2 + vv.ravel() ** 2 + 1.0)[:, None]
    pts = []
    for d in dirs:
        t = brentq(lambda t: field.value(t * d), 0.8, 1.2, xtol=1e-12)
        p = t * d
        if fp.patch.inside(p, tol=-1e-3):   # strictly interior rays only
            pts.append(p)
    pts = np.asarray(pts)
    assert len(pts) > 1000
    _, oracle_dev, _ = closest_points(sphere_net.mesh, pts)

    m = measure_patch(sphere_net, fp, resolution=48)
    assert m.avg == pytest.approx(float(oracle_dev.mean()), rel=0.05)
    assert m.max == pytest.approx(float(oracle_dev.max()), rel=0.05)


# ---------------------------------------------------------------------------
# plan_refinement
# ---------------------------------------------------------------------------

def test_plan_empty_when_within_tolerance(sphere_net):
    patches = {fid: SimpleNamespace(center=np.zeros(3)) for fid in sphere_net.faces}
    measures = {fid: _measure_stub(fid, 0.05, {1: 0.02}) for fid in sphere_net.faces}
    plan = plan_refinement(sphere_net, patches, measures, tol_pct=0.3)
    assert plan.is_empty()


def test_plan_pure_face_split_keeps_edges(sphere_net):
    """A face out of tolerance with healthy boundaries plans no edge splits."""
    centers = {fid: SimpleNamespace(center=np.full(3, fid)) for fid in sphere_net.faces}
    measures = {fid: _measure_stub(fid, 0.05, {1: 0.02}) for fid in sphere_net.faces}
    measures[3] = _measure_stub(3, 0.9, {eid: 0.05 for eid, _ in sphere_net.faces[3].loop})
    plan = plan_refinement(sphere_net, centers, measures, tol_pct=0.3)
    assert plan.edges == ()
    assert set(plan.faces) == {3}
    assert np.array_equal(plan.faces[3], centers[3].center)


def test_plan_shared_edge_judged_by_worse_face(sphere_net):
    """A boundary within tolerance on one side but not the other is split."""
    shared = next(
        eid for eid, _ in sphere_net.faces[3].loop
        if len(sphere_net.faces_of_edge(eid)) == 2
    )
    patches = {fid: SimpleNamespace(center=np.zeros(3)) for fid in sphere_net.faces}
    measures = {fid: _measure_stub(fid, 0.05) for fid in sphere_net.faces}
    measures[3] = _measure_stub(3, 0.05, {shared: 0.8})
    plan = plan_refinement(sphere_net, patches, measures, tol_pct=0.3)
    assert plan.edges == (shared,)
    assert plan.faces == {}


# ---------------------------------------------------------------------------
# execute_plan
# ---------------------------------------------------------------------------

def test_execute_edge_split_refits_both_halves(sphere_net):
    """A planned boundary split replaces the edge everywhere and refits."""
    from ipatch.refine import RefinePlan

    old_ribbon = sphere_net.edges[1].ribbon
    faces_before = sphere_net.faces_of_edge(1)
    touched = execute_plan(sphere_net, RefinePlan((1,), {}))
    c1, c2 = sphere_net.edges[1].children
    for cid in (c1, c2):
        child = sphere_net.edges[cid]
        assert not child.inherited
        assert child.ribbon is not old_ribbon       # own, refit ribbon
    for fid in faces_before:
        loop_ids = [eid for eid, _ in sphere_net.faces[fid].loop]
        assert 1 not in loop_ids
        assert c1 in loop_ids and c2 in loop_ids
        assert fid in touched


def test_execute_face_split_inherits_healthy_edges(sphere_net):
    """A planned face split leaves within-tolerance boundaries inherited."""
    from ipatch.refine import RefinePlan

    fp = fit_face(sphere_net, 2)
    ribbons_before = {eid: sphere_net.edges[eid].ribbon for eid, _ in sphere_net.faces[2].loop}
    touched = execute_plan(sphere_net, RefinePlan((), {2: fp.center}))
    assert 2 not in sphere_net.faces
    new_faces = touched - {2}
    assert len(new_faces) == 4
    for eid, ribbon in ribbons_before.items():
        c1, c2 = sphere_net.edges[eid].children
        assert sphere_net.edges[c1].ribbon is ribbon
        assert sphere_net.edges[c2].ribbon is ribbon


def test_execute_empty_plan_is_identity(sphere_net):
    from ipatch.refine import RefinePlan

    edges_before = dict(sphere_net.edges)
    faces_before = dict(sphere_net.faces)
    assert execute_plan(sphere_net, RefinePlan((), {})) == set()
    assert sphere_net.edges == edges_before
    assert sphere_net.faces == faces_before


# ---------------------------------------------------------------------------
# refine_until
# ---------------------------------------------------------------------------

def test_loose_tolerance_converges_without_splitting(sphere_net):
    res = refine_until(sphere_net, tol_pct=5.0, max_iter=5, resolution=32)
    assert res.converged
    assert len(res.report) == 1
    assert res.report[0]["iteration"] == 0
    assert res.report[0]["patch_count"] == 6
    assert len(res.patchwork) == 6
    assert len(sphere_net.faces) == 6           # untouched network


def test_zero_budget_equals_direct_fit(sphere_net):
    config = FitConfig()
    res = refine_until(sphere_net, tol_pct=1e-6, max_iter=0, resolution=32, config=config)
    assert not res.converged
    assert len(res.report) == 1
    direct = fit_patchwork(sphere_net, config)
    for a, b in zip(res.patchwork, direct):
        assert a.face_id == b.face_id
        assert np.array_equal(a.patch.weights, b.patch.weights)


def test_band_refines_to_tolerance(band_net):
    res = refine_until(band_net, tol_pct=0.2, max_iter=5, resolution=32)
    assert res.converged
    rows = res.report
    assert 2 <= len(rows) <= 6                   # actually iterated
    for a, b in zip(rows, rows[1:]):
        assert b["avg_pct"] <= a["avg_pct"] + 1e-12
        assert b["max_pct"] <= a["max_pct"] + 1e-12
    assert rows[-1]["max_pct"] <= 0.2
    assert rows[-1]["patch_count"] == len(res.patchwork)
    assert all(m.max_pct <= 0.2 for m in res.measures.values())


def test_band_refinement_exercises_t_nodes(band_net):
    refine_until(band_net, tol_pct=0.2, max_iter=5, resolution=32)
    inherited = [
        e for e in band_net.edges.values() if e.inherited and e.parent is not None
    ]
    assert inherited
    for child in inherited:
        assert child.ribbon is band_net.edges[child.parent].ribbon
        assert child.bounding is band_net.edges[child.parent].bounding


def test_untouched_faces_keep_their_patches(band_net, band_mesh):
    """Faces never split by a round reproduce their fit bit for bit."""
    fresh = network_from_dict(ellipsoid_band_network(BAND_AXES), band_mesh)
    res = refine_until(band_net, tol_pct=0.2, max_iter=5, resolution=32)
    survivors = [fid for fid in fresh.faces if fid in band_net.faces]
    assert survivors                              # at least one face was good enough
    by_id = {fp.face_id: fp for fp in res.patchwork}
    for fid in survivors:
        again = fit_face(fresh, fid)
        assert np.array_equal(by_id[fid].patch.weights, again.patch.weights)
        assert by_id[fid].rms == again.rms


def test_refine_report_row_shape(band_net):
    res = refine_until(band_net, tol_pct=0.2, max_iter=5, resolution=32)
    for row in res.report:
        assert set(row) == {
            "iteration", "patch_count", "avg_pct", "max_pct", "worst_boundary_pct"
        }
        assert row["avg_pct"] <= row["max_pct"]
        assert row["worst_boundary_pct"] >= 0.0
