import json

import numpy as np
import pytest
import torch

from gcgrasp.contact import ContactMap, ContactPoint
from gcgrasp.errors import InputError, OptimizationError
from gcgrasp.hand import HandPose
from gcgrasp.optim import (GraspObjective, LossReport, OptimizerConfig,
                           optimize_pose, save_report, sdf_values_torch)
from gcgrasp.sdf import build_sdf
from gcgrasp.shapes import box, icosphere


@pytest.fixture(scope="module")
def sphere_sdf():
    return build_sdf(icosphere(2.0, subdivisions=3), resolution=48)


def _map_from(points, regions=None, weights=None):
    regions = regions or ["palm"] * len(points)
    weights = weights or [1.0] * len(points)
    cps = [ContactPoint(position=np.asarray(p, dtype=np.float64),
                        region=r, weight=w)
           for p, r, w in zip(points, regions, weights)]
    return ContactMap(points=cps, n_samples=len(points), tau_c=0.2)


def test_config_roundtrip():
    cfg = OptimizerConfig(iterations=17, lr_translation=0.5,
                          w_penetration=3.0, betas=(0.8, 0.9))
    back = OptimizerConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert back == cfg
    assert isinstance(back.betas, tuple)


def test_config_defaults():
    cfg = OptimizerConfig()
    assert cfg.iterations == 1000
    assert cfg.w_penetration > cfg.w_contact  # push beats pull by default


def test_sdf_lookup_matches_numpy(sphere_sdf):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.8, 1.8, size=(200, 3))
    want, _, _ = sphere_sdf.query(pts)
    got = sdf_values_torch(sphere_sdf, torch.from_numpy(pts)).numpy()
    assert np.abs(got - want).max() < 1e-12


def test_sdf_lookup_gradient_flows(sphere_sdf):
    p = torch.tensor([[1.2, 0.3, -0.4]], dtype=torch.float64,
                     requires_grad=True)
    v = sdf_values_torch(sphere_sdf, p).sum()
    v.backward()
    g = p.grad.numpy()[0]
    # SDF gradient of a sphere points radially outward
    assert np.dot(g, [1.2, 0.3, -0.4]) > 0


def test_penetration_zero_iff_no_negative(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]])
    obj = GraspObjective(template, cmap, sphere_sdf)

    far = torch.tensor([[10.0, 10.0, 10.0], [5.0, 0.0, 0.0]],
                       dtype=torch.float64)
    assert obj.penetration_term(far).item() == 0.0

    inside = torch.tensor([[0.0, 0.0, 0.0]], dtype=torch.float64)
    assert obj.penetration_term(inside).item() > 0.0

    mixed = torch.cat([far, inside])
    assert obj.penetration_term(mixed).item() == pytest.approx(
        obj.penetration_term(inside).item())


def test_anatomy_zero_at_rest(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]])
    obj = GraspObjective(template, cmap, sphere_sdf)
    joints = torch.zeros((20, 3), dtype=torch.float64)
    assert obj.anatomy_term(joints).item() == 0.0


def test_anatomy_within_limits_free(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]])
    obj = GraspObjective(template, cmap, sphere_sdf)
    joints = torch.zeros((20, 3), dtype=torch.float64)
    # flex the index MCP to half its range: legal, no penalty
    mcp = 5
    axis = template.joint_axes[mcp, 0]
    half = 0.5 * template.joint_limits[mcp, 0, 1]
    joints[mcp - 1] = torch.from_numpy(axis * half)
    assert obj.anatomy_term(joints).item() == 0.0


def test_anatomy_penalizes_overflex_quadratically(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]])
    obj = GraspObjective(template, cmap, sphere_sdf)
    mcp = 5
    axis = template.joint_axes[mcp, 0]
    hi = template.joint_limits[mcp, 0, 1]

    def cost(excess):
        joints = torch.zeros((20, 3), dtype=torch.float64)
        joints[mcp - 1] = torch.from_numpy(axis * (hi + excess))
        return obj.anatomy_term(joints).item()

    assert cost(0.1) == pytest.approx(0.1 ** 2, abs=1e-9)
    assert cost(0.2) == pytest.approx(0.2 ** 2, abs=1e-9)


def test_anatomy_forbidden_axis(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]])
    obj = GraspObjective(template, cmap, sphere_sdf)
    # distal joints have zero abduction range: any motion on that axis costs
    dip = 7
    lo, hi = template.joint_limits[dip, 1]
    assert lo == 0.0 and hi == 0.0
    joints = torch.zeros((20, 3), dtype=torch.float64)
    joints[dip - 1] = torch.from_numpy(template.joint_axes[dip, 1] * 0.3)
    assert obj.anatomy_term(joints).item() == pytest.approx(0.3 ** 2, abs=1e-9)


def test_unknown_region_rejected(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]], regions=["tentacle"])
    with pytest.raises(InputError, match="tentacle"):
        GraspObjective(template, cmap, sphere_sdf)


def test_optimize_decreases_loss(template, sphere_sdf):
    # ring of contacts around the sphere equator, palm region
    ang = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    pts = np.stack([2.0 * np.cos(ang), 2.0 * np.sin(ang), np.zeros(12)], 1)
    cmap = _map_from(pts.tolist())
    init = HandPose.zero()
    init.global_trans[:] = (6.0, 0.0, 0.0)
    cfg = OptimizerConfig(iterations=60)
    pose, report = optimize_pose(template, cmap, sphere_sdf,
                                 init_pose=init, config=cfg)
    assert report.total[-1] < report.total[0]
    assert report.best_total <= report.total.min() + 1e-12
    assert isinstance(pose, HandPose)


def test_report_total_is_weighted_sum(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0], [2.0, 0.0, 0.0]])
    cfg = OptimizerConfig(iterations=25, w_contact=1.5, w_anatomy=2.0,
                          w_penetration=7.0)
    _, report = optimize_pose(template, cmap, sphere_sdf, config=cfg)
    want = (1.5 * report.contact + 2.0 * report.anatomy
            + 7.0 * report.penetration)
    assert np.array_equal(report.total, want)


def test_best_so_far_non_increasing(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0], [0.0, 2.0, 0.0]])
    cfg = OptimizerConfig(iterations=40)
    _, report = optimize_pose(template, cmap, sphere_sdf, config=cfg)
    curve = report.best_so_far()
    assert np.all(np.diff(curve) <= 0.0)
    assert curve[-1] == report.best_total


def test_best_pose_reproduces_best_total(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0], [1.4, 1.4, 0.0]])
    cfg = OptimizerConfig(iterations=30)
    pose, report = optimize_pose(template, cmap, sphere_sdf, config=cfg)
    obj = GraspObjective(template, cmap, sphere_sdf, cfg)
    terms = obj.terms(torch.from_numpy(pose.global_rot),
                      torch.from_numpy(pose.global_trans),
                      torch.from_numpy(pose.joints))
    total = (cfg.w_contact * float(terms["contact"])
             + cfg.w_anatomy * float(terms["anatomy"])
             + cfg.w_penetration * float(terms["penetration"]))
    assert total == pytest.approx(report.best_total, rel=1e-12)


def test_converged_semantics(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]])
    _, report = optimize_pose(template, cmap, sphere_sdf,
                              config=OptimizerConfig(iterations=12))
    # short runs cannot satisfy the plateau test
    assert report.converged == (report.best_iteration < 12 - 12)


def test_non_finite_raises(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]])
    init = HandPose.zero()
    init.global_trans[:] = np.nan
    with pytest.raises(OptimizationError, match="iteration 0"):
        optimize_pose(template, cmap, sphere_sdf, init_pose=init,
                      config=OptimizerConfig(iterations=5))


def test_zero_iterations_rejected(template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]])
    with pytest.raises(InputError):
        optimize_pose(template, cmap, sphere_sdf,
                      config=OptimizerConfig(iterations=0))


def test_report_json(tmp_path, template, sphere_sdf):
    cmap = _map_from([[0.0, 0.0, 2.0]])
    _, report = optimize_pose(template, cmap, sphere_sdf,
                              config=OptimizerConfig(iterations=8))
    save_report(report, tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["schema"] == "loss_report"
    assert len(data["total"]) == 8
    assert data["config"]["iterations"] == 8
    assert data["best_iteration"] == report.best_iteration


def test_gradcheck_objective(template, sphere_sdf):
    # central differences against autograd on the full weighted loss
    cmap = _map_from([[0.0, 0.0, 2.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    cfg = OptimizerConfig()
    obj = GraspObjective(template, cmap, sphere_sdf, cfg)

    rng = np.random.default_rng(12)
    g_rot = torch.tensor(rng.normal(scale=0.2, size=3), requires_grad=True)
    g_trans = torch.tensor(rng.normal(scale=1.0, size=3) + [4.0, 0.0, 0.0],
                           requires_grad=True)
    joints = torch.tensor(rng.normal(scale=0.05, size=(20, 3)),
                          requires_grad=True)

    def loss_of(gr, gt, jr):
        t = obj.terms(gr, gt, jr)
        return (cfg.w_contact * t["contact_soft"]
                + cfg.w_anatomy * t["anatomy"]
                + cfg.w_penetration * t["penetration"])

    loss = loss_of(g_rot, g_trans, joints)
    loss.backward()

    eps = 1e-6
    for par, grad in ((g_trans, g_trans.grad), (g_rot, g_rot.grad)):
        flat = par.detach().numpy().ravel()
        for i in range(flat.size):
            up = flat.copy(); up[i] += eps
            dn = flat.copy(); dn[i] -= eps
            args = {id(g_rot): g_rot.detach(), id(g_trans): g_trans.detach(),
                    id(joints): joints.detach()}
            args[id(par)] = torch.from_numpy(up.reshape(par.shape))
            f_up = loss_of(args[id(g_rot)], args[id(g_trans)],
                           args[id(joints)]).item()
            args[id(par)] = torch.from_numpy(dn.reshape(par.shape))
            f_dn = loss_of(args[id(g_rot)], args[id(g_trans)],
                           args[id(joints)]).item()
            fd = (f_up - f_dn) / (2 * eps)
            an = grad.numpy().ravel()[i]
            assert an == pytest.approx(fd, rel=1e-4, abs=1e-7)
