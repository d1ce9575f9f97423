import math

import numpy as np
import pytest
import sympy as sp

from travgen import expr as ex
from travgen.flow import (BudgetExceeded, DegenerateMetric, FieldSpec, FlowSystem, ImplicitDomain,
                          Tolerances, geodesic_field, integrate_trajectory, local_model_system,
                          tangency_multiplicity, trace)
from travgen.flow.cache import CacheFormatError, read_cache, write_cache, write_jsonl
from travgen.flow.domain import metric_speed_squared
from travgen.flow.scatter import (boundary_curves, explicit_entries, geodesic_entries,
                                  reversal_errors, scattering_map, traversing_report)
from travgen.local_models import IllConditioned

from oracles import annulus_chord_type, chord_exit_disk, line_circle_exit

DISK = "x^2 + y^2 - 1"
ANNULUS = "(x^2 + y^2 - 1)*(x^2 + y^2 - 4)"


@pytest.fixture(scope="module")
def disk():
    return ImplicitDomain(DISK, bbox=[(-1.2, 1.2)] * 2)


@pytest.fixture(scope="module")
def annulus():
    return ImplicitDomain(ANNULUS, bbox=[(-2.2, 2.2)] * 2)


@pytest.fixture(scope="module")
def disk_geo(disk):
    return FlowSystem(disk, geodesic_field("1", disk))


@pytest.fixture(scope="module")
def annulus_geo(annulus):
    return FlowSystem(annulus, geodesic_field("1", annulus))


# ---------------------------------------------------------------- domains and fields

def test_expression_grammar_rejects_unknowns():
    with pytest.raises(ex.ExpressionError):
        ex.parse("x + w", ["x", "y"])
    with pytest.raises(ex.ExpressionError):
        ex.parse("x; import os", ["x"])
    assert ex.parse("sin(x)^2 + cos(x)^2", ["x"]).simplify() == 1


def test_domain_sign_convention(disk):
    assert disk.z([[0, 0]])[0] < 0
    assert disk.z([[1.1, 0]])[0] > 0
    pts = disk.sample_interior(100, np.random.default_rng(0))
    assert (disk.z(pts) < 0).all()


def test_boundary_curves_regular(annulus):
    curves = boundary_curves(annulus)
    assert len(curves) == 2
    radii = [np.hypot(*c.T) for c in curves]
    assert np.allclose(radii[0], 2.0) and np.allclose(radii[1], 1.0)
    for c in curves:
        assert annulus.check_regular(c).all()


def test_flat_metric_has_no_turning():
    f = geodesic_field("1")
    assert sp.simplify(f.components[2]) == 0
    f = geodesic_field("exp(2*3)")
    assert sp.simplify(f.components[2]) == 0


def test_degenerate_metric_rejected(disk):
    with pytest.raises(DegenerateMetric):
        geodesic_field([["1", "0"], ["0", "x"]], disk)


def test_warped_metric_conserves_speed():
    dom = ImplicitDomain(DISK, bbox=[(-1.2, 1.2)] * 2)
    f = geodesic_field([["1", "0"], ["0", "(1 + 0.1*x)^2"]], dom)
    assert sp.simplify(f.components[2]) != 0
    sys_ = FlowSystem(dom, f)
    rec = integrate_trajectory(sys_, (-1.0, 0.0, 0.7), record_path=True)
    speeds = metric_speed_squared(f, np.array(rec.states))
    assert np.max(np.abs(speeds - 1.0)) <= 1e-8 * max(1.0, rec.flight_time)
    turn = [s[2] for s in rec.states]
    assert max(turn) - min(turn) > 1e-4


# ---------------------------------------------------------------- golden trajectories

def test_disk_chord(disk):
    sys_ = FlowSystem(disk, FieldSpec.explicit(["1", "0"]))
    rec = integrate_trajectory(sys_, (-1.0, 0.0))
    assert rec.pattern.entries == (1, 1)
    assert rec.exit_state == pytest.approx((1.0, 0.0), abs=1e-9)
    assert rec.flight_time == pytest.approx(2.0, abs=1e-9)
    assert rec.m == 2 and rec.m_reduced == 0


def test_annulus_inner_tangent(annulus_geo):
    rec = integrate_trajectory(annulus_geo, (-math.sqrt(3), 1.0, 0.0))
    assert rec.pattern.entries == (1, 2, 1)
    pts = [e.state[:2] for e in rec.events]
    assert np.allclose(pts, [(-math.sqrt(3), 1), (0, 1), (math.sqrt(3), 1)], atol=1e-7)
    assert [e.time for e in rec.events] == sorted(e.time for e in rec.events)


def test_disk_tangent_singleton(disk_geo):
    rec = integrate_trajectory(disk_geo, (1.0, 0.0, math.pi / 2))
    assert rec.pattern.entries == (2,)


def test_interior_point_finds_whole_trajectory(disk):
    sys_ = FlowSystem(disk, FieldSpec.explicit(["1", "0"]))
    rec = trace(sys_, [(0.3, 0.2)])[0]
    assert rec.start_state == pytest.approx((-math.sqrt(0.96), 0.2), abs=1e-9)
    assert rec.entry_time == pytest.approx(0.3 + math.sqrt(0.96), abs=1e-9)


def test_disk_chords_match_formula(disk_geo):
    rng = np.random.default_rng(1)
    n = 500
    phi = rng.uniform(0, 2 * np.pi, n)
    alpha = rng.uniform(-1.5, 1.5, n)
    th = phi + np.pi + alpha
    E = np.column_stack([np.cos(phi), np.sin(phi), th])
    recs = trace(disk_geo, E)
    p = E[:, :2]
    w = np.column_stack([np.cos(th), np.sin(th)])
    want, t = chord_exit_disk(p, w)
    got = np.array([r.exit_state[:2] for r in recs])
    assert np.max(np.abs(got - want)) < 1e-6
    assert np.max(np.abs(np.array([r.flight_time for r in recs]) - t)) < 1e-6


def test_annulus_exits_match_line_circle(annulus_geo):
    rng = np.random.default_rng(2)
    E = []
    for _ in range(200):
        phi = rng.uniform(0, 2 * np.pi)
        a = rng.uniform(-1.5, 1.5)
        E.append((2 * math.cos(phi), 2 * math.sin(phi), phi + math.pi + a))
    recs = trace(annulus_geo, np.array(E))
    for e, r in zip(E, recs):
        w = (math.cos(e[2]), math.sin(e[2]))
        pt, _ = line_circle_exit(e[:2], w)
        pat, gap = annulus_chord_type(e[:2], w)
        if gap < 1e-6:
            continue
        assert str(r.pattern) == pat
        assert np.allclose(r.exit_state[:2], pt, atol=1e-6)


# ---------------------------------------------------------------- multiplicity

@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_local_model_multiplicity(j):
    sys_ = local_model_system(j)
    tol = Tolerances()
    assert tangency_multiplicity(sys_, [0.0] * j, tol) == j
    assert tangency_multiplicity(sys_, [0.0] * j, tol.halved()) == j


def test_multiplicity_examples(disk):
    dom = ImplicitDomain("u^2 + x", ["u", "x"])
    sys_ = FlowSystem(dom, FieldSpec.explicit(["1", "0"], ["u", "x"]))
    assert tangency_multiplicity(sys_, (0.0, 0.0)) == 2
    chord = FlowSystem(disk, FieldSpec.explicit(["1", "0"]))
    assert tangency_multiplicity(chord, (-1.0, 0.0)) == 1
    with pytest.raises(ValueError):
        tangency_multiplicity(chord, (0.0, 0.0))


def test_multiplicity_ill_conditioned():
    dom = ImplicitDomain("x", ["x", "y"])
    sys_ = FlowSystem(dom, FieldSpec.explicit(["0", "1"]))
    with pytest.raises(IllConditioned):
        tangency_multiplicity(sys_, (0.0, 0.3))


@pytest.mark.parametrize("z,bbox", [
    ("x^2/4 + y^2 - 1", 2.3),
    ("(x^2 + y^2)^2 - 2*x*(x^2 + y^2) - y^2 + 0.3*x^2 - 0.6", 2.5),
])
def test_multiplicity_stable_under_halving(z, bbox):
    dom = ImplicitDomain(z, bbox=[(-bbox, bbox)] * 2)
    sys_ = FlowSystem(dom, geodesic_field("1", dom))
    E = geodesic_entries(dom, 40, 9)
    a = trace(sys_, E, Tolerances())
    b = trace(sys_, E, Tolerances().halved())
    for ra, rb in zip(a, b):
        assert ra.status == rb.status
        assert [e.multiplicity for e in ra.events] == [e.multiplicity for e in rb.events]


def test_dimension_cap_flag():
    dom = ImplicitDomain("y - x^3 + (x^2 + y^2)^2", bbox=[(-1.5, 1.5)] * 2)
    sys_ = FlowSystem(dom, FieldSpec.explicit(["1", "0"]))
    rec = trace(sys_, [(0.0, 0.0)])[0]
    assert rec.pattern.entries == (3, 1)
    assert "dimension-cap" in rec.flags


# ---------------------------------------------------------------- scattering

def test_scattering_disk_explicit(disk):
    sys_ = FlowSystem(disk, FieldSpec.explicit(["1", "0"]))
    res = scattering_map(sys_, [(-1.0, 0.0), (0.5, 0.5)])
    assert res.samples[0].exit == pytest.approx((1.0, 0.0), abs=1e-9)
    assert res.failed == [(1, "entry not on the boundary")]


def test_explicit_entries_include_tangents(disk):
    sys_ = FlowSystem(disk, FieldSpec.explicit(["1", "0"]))
    E = explicit_entries(sys_, 64)
    assert (E[:, 0] <= 1e-9).all()
    assert np.min(np.abs(E[:, 1] - 1.0)) < 1e-9
    assert np.min(np.abs(E[:, 1] + 1.0)) < 1e-9


def test_annulus_inner_hits_exit_on_inner_circle(annulus_geo):
    res = scattering_map(annulus_geo, [(2.0, 0.0, math.pi)])
    ex_pt = np.array(res.samples[0].exit[:2])
    assert np.allclose(ex_pt, (1.0, 0.0), atol=1e-9)


@pytest.mark.parametrize("name", ["disk", "annulus"])
def test_scattering_reversal(name, disk_geo, annulus_geo, disk, annulus):
    sys_, dom = (disk_geo, disk) if name == "disk" else (annulus_geo, annulus)
    res = scattering_map(sys_, geodesic_entries(dom, 40, 11))
    s11 = [s for s in res.samples if s.pattern == "11"]
    assert s11
    assert np.max(reversal_errors(sys_, s11)) < 1e-6


def test_traversing_reports(disk, annulus):
    rep = traversing_report(FlowSystem(disk, FieldSpec.explicit(["1", "0"])), 50)
    assert rep.exit_fraction == 1.0 and rep.traversing
    rot = FlowSystem(annulus, FieldSpec.explicit(["-y", "x"]))
    rep = traversing_report(rot, 5, tol=Tolerances(t_max=50.0))
    assert rep.trapped_witnesses and rep.exit_fraction == 0.0


def test_budget_exceeded(annulus):
    rot = FlowSystem(annulus, FieldSpec.explicit(["-y", "x"]))
    with pytest.raises(BudgetExceeded):
        integrate_trajectory(rot, (1.5, 0.0), Tolerances(t_max=20.0))


def test_batch_matches_single(annulus_geo, annulus):
    E = geodesic_entries(annulus, 12, 5)
    batch = trace(annulus_geo, E)
    for e, rb in zip(E[::7], batch[::7]):
        rs = trace(annulus_geo, [e])[0]
        assert [ev.multiplicity for ev in rs.events] == [ev.multiplicity for ev in rb.events]
        assert np.allclose([ev.time for ev in rs.events], [ev.time for ev in rb.events], atol=1e-12)


# ---------------------------------------------------------------- cache

def test_cache_round_trip(tmp_path, annulus_geo):
    recs = trace(annulus_geo, [(-math.sqrt(3), 1.0, 0.0), (2.0, 0.0, math.pi)])
    path = tmp_path / "t.trvk"
    write_cache(path, recs)
    assert path.read_bytes()[:5] == b"TRVK1"
    back = read_cache(path)
    assert [str(r.pattern) for r in back] == ["121", "11"]
    assert back[0].events[1].state == recs[0].events[1].state
    write_jsonl(tmp_path / "t.jsonl", recs)
    assert len((tmp_path / "t.jsonl").read_text().splitlines()) == 2


def test_cache_rejects_garbage(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"NOPE!" + b"\0" * 10)
    with pytest.raises(CacheFormatError):
        read_cache(p)
    p.write_bytes(b"TRVK1" + b"\x01\x00" + b"\x05\x00\x00\x00")
    with pytest.raises(CacheFormatError):
        read_cache(p)


def test_warped_geodesic_matches_second_order_oracle():
    # g = diag(1, h^2), h = 1 + 0.1 x: x'' = h h_x y'^2, y'' = -2 (h_x / h) x' y'
    from scipy.integrate import solve_ivp

    dom = ImplicitDomain(DISK, bbox=[(-1.2, 1.2)] * 2)
    sys_ = FlowSystem(dom, geodesic_field([["1", "0"], ["0", "(1 + 0.1*x)^2"]], dom))
    rec = integrate_trajectory(sys_, (-1.0, 0.0, 0.7))

    def rhs(t, s):
        x, y, vx, vy = s
        h = 1 + 0.1 * x
        return [vx, vy, h * 0.1 * vy * vy, -2 * 0.1 / h * vx * vy]

    def leave(t, s):
        return s[0] ** 2 + s[1] ** 2 - 1 if t > 1e-3 else -1.0
    leave.terminal = True
    leave.direction = 1
    c, s = math.cos(0.7), math.sin(0.7)
    speed = math.sqrt(c * c + (0.9 * s) ** 2)  # h = 0.9 at x = -1
    sol = solve_ivp(rhs, (0, 10), [-1.0, 0.0, c / speed, s / speed], events=leave,
                    rtol=1e-12, atol=1e-13)
    want = sol.y_events[0][0][:2]
    assert np.allclose(rec.exit_state[:2], want, atol=1e-7)
    assert rec.flight_time == pytest.approx(sol.t_events[0][0], abs=1e-7)


def test_jet_tower_matches_symbolic():
    from travgen.jets import lie_tower_numeric

    dom = ImplicitDomain("exp(x)*sin(y) + sqrt(2 + x) - 3", bbox=[(-1, 1)] * 2)
    fld = FieldSpec.explicit(["1 + y^2", "cos(x)"])
    sys_ = FlowSystem(dom, fld, max_order=5)
    assert sys_.tower_route == "symbolic"
    Y = np.random.default_rng(0).uniform(-0.5, 0.5, (20, 2))
    syms = [ex.symbol("x"), ex.symbol("y")]
    J = lie_tower_numeric(dom.z_expr, fld.components, syms, Y, 5)
    assert np.allclose(sys_.tower(Y), J, rtol=1e-10, atol=1e-10)
    back = sys_.reversed()
    J_back = lie_tower_numeric(dom.z_expr, [-c for c in fld.components], syms, Y, 5)
    assert np.allclose(back.tower(Y), J_back, rtol=1e-10, atol=1e-10)


def test_geodesic_tower_uses_jets_for_warped_metric():
    dom = ImplicitDomain(DISK, bbox=[(-1.2, 1.2)] * 2)
    sys_ = FlowSystem(dom, geodesic_field([["1", "0"], ["0", "(1 + 0.1*x)^2"]], dom))
    assert sys_.tower_route == "jets"
    Y = np.array([[0.3, -0.2, 0.7]])
    low = np.array([sys_._eval(fn, Y)[0] for fn in sys_._tower])
    assert np.allclose(sys_.tower(Y)[0, : len(low)], low, rtol=1e-12)
