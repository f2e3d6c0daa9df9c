import json
import os
import tempfile
import unittest
from itertools import combinations, product

import numpy as np

from CosmoTime.minkowski import (mink_vec, lorentz_dot, lorentz_norm2, is_future_timelike, hyperbolic_point,
                                 normalize_timelike, hyperbolic_distance, normal_pairing_bound, separating_normal_bound,
                                 causal_class, CausalClass, TIMELIKE, LIGHTLIKE, SPACELIKE, ZERO, FUTURE, PAST, NONE)
from CosmoTime.lamination import Leaf, MeasuredLamination, SpineComplex, build_spine, tree_distance, leaves_cross, POINTS
from CosmoTime.domain import RegularDomain, GradientLine, flow, EDGE
from CosmoTime.sampling import Sampling, stream_id
from CosmoTime.levelset import (MeshSettings, ConvexSurface, mesh_level, level_distance, richardson, affine_limit,
                                project_curve_length, random_level_polylines, tangent_sign_check, compare_levels,
                                pairing_bound_check, estimate_gauss_curvature, write_sweep_csv, DistanceEstimate,
                                past_sweep, future_sweep)
from CosmoTime.wick import (WickGeometry, ds_time, ads_time, wick_bilip_bounds, curvature_transport,
                            wick_gauss_curvature, ds_k_barrier, ds_k_barrier_gap_limit, wick_normal_pairing,
                            wick_pairing_bound, wick_level_distance, FLAT, DE_SITTER, ANTI_DE_SITTER)
from CosmoTime.metrics import (SampledMetric, cat0_four_point, tree_four_point, approx_midpoint_defect,
                               bilipschitz_ratio, sample_quadruples, margin_histogram, quadruple_error)
from CosmoTime.cli import parse_scenario, run, main
from CosmoTime.utils import (load, NumpyEncoder, CrossingLeaves, AchronalityViolation, OutsideDomain, DimensionMismatch,
                             InvalidGradientLine, BoundaryNode, InvalidRange, FocalPoint, MetricViolation,
                             IdMismatch, ScenarioError)

dir = os.path.dirname(os.path.abspath(__file__))
scenarios = os.path.join(dir, "scenarios")


def cone():
    return RegularDomain(SpineComplex(np.zeros((1, 3)), kind=POINTS))


def one_leaf():
    lam = MeasuredLamination([Leaf((-1.2, 1.2), 1.0)])
    graph = lam.validate()
    return lam, graph, RegularDomain(build_spine(lam, graph))


def metric(ids, d):
    return SampledMetric(ids, np.asarray(d, dtype=float))


class MinkowskiTest(unittest.TestCase):

    def test_lorentz_dot(self):
        e0 = mink_vec(1.0, [0.0, 0.0])
        self.assertEqual(lorentz_dot(e0, e0), -1.0)
        self.assertEqual(lorentz_norm2(mink_vec(0.0, [3.0, 4.0])), 25.0)
        self.assertTrue(is_future_timelike(e0))
        self.assertFalse(is_future_timelike(-e0))

    def test_hyperbolic_distance_of_boosts(self):
        u = hyperbolic_point([0.0, 0.0])
        v = hyperbolic_point([1.0, 0.0])
        self.assertAlmostEqual(float(hyperbolic_distance(u, v)), 1.0, places=12)
        self.assertAlmostEqual(float(lorentz_norm2(hyperbolic_point([0.3, -0.8]))), -1.0, places=12)

    def test_pairing_bounds(self):
        self.assertAlmostEqual(normal_pairing_bound(2.0, 1.0), 2.0)
        self.assertAlmostEqual(normal_pairing_bound(2.0, 1.0, "ds"), np.sinh(2.0) / np.sinh(1.0))
        n1, n2 = hyperbolic_point([1.0, 0.0]), hyperbolic_point([-1.0, 0.0])
        self.assertAlmostEqual(separating_normal_bound(n1, n2), 1.0 / np.sqrt(np.cosh(2.0) ** 2 - 1.0))

    def test_causal_class(self):
        self.assertEqual(causal_class(mink_vec(1.0, [0.0, 0.0])), CausalClass(TIMELIKE, FUTURE))
        self.assertEqual(causal_class(mink_vec(-2.0, [1.0, 0.0])), CausalClass(TIMELIKE, PAST))
        self.assertEqual(causal_class(mink_vec(1.0, [0.6, 0.8])), CausalClass(LIGHTLIKE, FUTURE))
        self.assertEqual(causal_class(mink_vec(-1.0, [0.0, 1.0])), CausalClass(LIGHTLIKE, PAST))
        self.assertEqual(causal_class(mink_vec(0.5, [1.0, 0.0])), CausalClass(SPACELIKE, NONE))
        self.assertEqual(causal_class(mink_vec(0.0, [0.0, 0.0])), CausalClass(ZERO, NONE))
        with self.assertRaises(AssertionError):
            CausalClass(SPACELIKE, FUTURE)

    def test_bilinearity(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            a, b, c = rng.normal(size=(3, 3))
            s, t = rng.normal(size=2)
            self.assertAlmostEqual(lorentz_dot(s * a + t * b, c), s * lorentz_dot(a, c) + t * lorentz_dot(b, c), places=12)
            self.assertEqual(lorentz_dot(a, b), lorentz_dot(b, a))
        with self.assertRaises(DimensionMismatch):
            lorentz_dot(np.zeros(3), np.zeros(4))

    def test_reverse_cauchy_schwarz(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(10000, 2))
        A = np.column_stack([np.linalg.norm(X, axis=1) + rng.uniform(0.01, 2.0, 10000), X])
        B = A[rng.permutation(10000)]
        bound = -np.sqrt(-lorentz_norm2(A)) * np.sqrt(-lorentz_norm2(B))
        self.assertTrue(np.all(lorentz_dot(A, B) <= bound + 1e-12 * np.abs(bound)))

    def test_hyperbolic_triangle_inequality(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            u, v, w = (hyperbolic_point(beta) for beta in rng.normal(scale=1.5, size=(3, 2)))
            d = float(hyperbolic_distance(u, w))
            self.assertLessEqual(d, float(hyperbolic_distance(u, v) + hyperbolic_distance(v, w)) + 1e-9)
            self.assertAlmostEqual(float(hyperbolic_distance(u, w)), float(hyperbolic_distance(w, u)), places=9)

    def test_pairing_bound_holds_on_domain_points(self):
        # the plane through p with normal x supports the level a = max_q <q,x> - <p,x>
        _, _, dom = one_leaf()
        P = Sampling(300, 2, seed=6, stream="pairing-bound").domain_points(dom)
        boosts = np.random.default_rng(6).normal(scale=1.5, size=(300, 2))
        for p, beta in zip(P, boosts):
            ev = dom.cosmological_time(p)
            x = hyperbolic_point(beta)
            a = float(np.max(lorentz_dot(dom.spine.vertices, x)) - lorentz_dot(p, x))
            self.assertGreaterEqual(a, ev.T - 1e-9)
            bound = normal_pairing_bound(max(a, ev.T), ev.T)
            self.assertLessEqual(abs(float(lorentz_dot(ev.N, x))), bound + 1e-9)


class LaminationTest(unittest.TestCase):

    def test_leaves_cross(self):
        self.assertTrue(leaves_cross(Leaf((0.0, 2.0), 1.0), Leaf((1.0, 3.0), 1.0)))
        self.assertFalse(leaves_cross(Leaf((0.0, 1.0), 1.0), Leaf((2.0, 3.0), 1.0)))
        # asymptotic leaves share an endpoint
        self.assertFalse(leaves_cross(Leaf((0.0, 2.0), 1.0), Leaf((2.0, 4.0), 1.0)))

    def test_crossing_lamination(self):
        lam = MeasuredLamination([Leaf((0.0, 2.0), 1.0), Leaf((1.0, 3.0), 1.0)])
        with self.assertRaises(CrossingLeaves):
            lam.validate()

    def test_coincident_leaves_merge(self):
        lam = MeasuredLamination([Leaf((0.0, 1.0), 0.5), Leaf((1.0, 0.0), 0.25)])
        self.assertEqual(len(lam), 1)
        self.assertAlmostEqual(lam.leaves[0].weight, 0.75)

    def test_empty_lamination_is_cone(self):
        lam = MeasuredLamination([])
        spine = build_spine(lam, lam.validate())
        self.assertEqual(spine.kind, POINTS)
        self.assertTrue(np.all(spine.vertices == 0.0))

    def test_one_leaf_spine(self):
        lam, graph, dom = one_leaf()
        self.assertEqual(len(dom.spine.vertices), 2)
        self.assertAlmostEqual(dom.spine.edge_length(0), 1.0, places=12)

    def test_nested_tree_distance(self):
        lam = MeasuredLamination([Leaf((-1.2, 1.2), 0.5), Leaf((-0.6, 0.6), 0.7)])
        graph = lam.validate()
        spine = build_spine(lam, graph)
        self.assertAlmostEqual(tree_distance(graph, lam, 0, 2), 1.2, places=12)
        self.assertAlmostEqual(tree_distance(graph, lam, 1, 2), 0.7, places=12)
        lengths = sorted(spine.edge_length(k) for k in range(len(spine.edges)))
        self.assertAlmostEqual(lengths[0], 0.5, places=12)
        self.assertAlmostEqual(lengths[1], 0.7, places=12)

    def test_timelike_edge(self):
        with self.assertRaises(AchronalityViolation):
            SpineComplex([[0.0, 0.0, 0.0], [1.0, 0.1, 0.0]], [(0, 1)]).check_achronal()

    def test_saving_and_loading(self):
        lam = MeasuredLamination([Leaf((-1.2, 1.2), 0.5), Leaf((-0.6, 0.6), 0.7)])
        with tempfile.TemporaryDirectory() as tmp:
            filename = os.path.join(tmp, "lamination.json")
            lam.save(filename)
            loaded = load(filename)
        self.assertEqual(len(loaded), 2)
        self.assertAlmostEqual(loaded.leaves[1].weight, 0.7)

    def test_regions_in_a_path(self):
        lam = MeasuredLamination([Leaf((0.0, np.pi), 0.5), Leaf((np.pi / 4, 3 * np.pi / 4), 0.7)])
        graph = lam.validate()
        self.assertEqual(len(graph.regions), 3)
        degrees = {r: 0 for r in graph.regions}
        for r1, r2, _ in graph.adjacency:
            degrees[r1] += 1
            degrees[r2] += 1
        self.assertEqual(sorted(degrees.values()), [1, 1, 2])
        ends = [r for r, k in degrees.items() if k == 1]
        self.assertAlmostEqual(tree_distance(graph, lam, *ends), 1.2, places=12)

    def test_tree_distance_is_zero_hyperbolic(self):
        lam = MeasuredLamination([Leaf((0.3, 1.1), 0.4), Leaf((2.0, 3.0), 0.6), Leaf((4.0, 5.2), 0.5),
                                  Leaf((2.2, 2.8), 0.3)])
        graph = lam.validate()
        ids = [str(r) for r in graph.regions]
        d = np.array([[tree_distance(graph, lam, r1, r2) for r2 in graph.regions] for r1 in graph.regions])
        m = SampledMetric(ids, d)
        for x, y, z, w in product(graph.regions, repeat=4):
            lhs = d[x, y] + d[z, w]
            self.assertLessEqual(lhs, max(d[x, z] + d[y, w], d[x, w] + d[y, z]) + 1e-12)
            self.assertLessEqual(tree_four_point(m, (ids[x], ids[y], ids[z], ids[w])), 1e-12)


class DomainTest(unittest.TestCase):

    def test_cone_time(self):
        dom = cone()
        ev = dom.cosmological_time(np.array([2.0, 0.0, 0.0]))
        self.assertAlmostEqual(ev.T, 2.0)
        self.assertTrue(np.allclose(ev.r, 0.0))
        self.assertTrue(np.allclose(ev.N, [1.0, 0.0, 0.0]))
        ev = dom.cosmological_time(np.array([2.0, 1.0, 0.0]))
        self.assertAlmostEqual(ev.T, np.sqrt(3.0))
        self.assertTrue(np.allclose(ev.N, np.array([2.0, 1.0, 0.0]) / np.sqrt(3.0)))

    def test_contains(self):
        dom = cone()
        self.assertTrue(dom.contains(np.array([1.0, 0.0, 0.0])))
        self.assertFalse(dom.contains(np.array([-1.0, 0.0, 0.0])))
        with self.assertRaises(OutsideDomain):
            dom.cosmological_time(np.array([-1.0, 0.0, 0.0]))
        with self.assertRaises(DimensionMismatch):
            dom.cosmological_time(np.array([1.0, 0.0, 0.0, 0.0]))

    def test_flow(self):
        line = GradientLine(np.zeros(3), np.array([1.0, 0.0, 0.0]), None)
        self.assertTrue(np.allclose(flow(line, 3.0), [3.0, 0.0, 0.0]))

    def test_null_support_boundary(self):
        dom = cone()
        self.assertAlmostEqual(dom.null_support_boundary(np.zeros(2)), 0.0)
        self.assertAlmostEqual(dom.null_support_boundary(np.array([1.0, 0.0])), 1.0)

    def test_level_graph_of_cone(self):
        X = np.random.default_rng(0).uniform(-2, 2, (50, 2))
        graph = cone().level_graph(1.0, X)
        self.assertTrue(np.allclose(graph["t"], np.sqrt(1.0 + np.sum(X ** 2, axis=1))))

    def test_reconstruction(self):
        _, _, dom = one_leaf()
        P = Sampling(1000, 2, seed=3, stream="reconstruction").domain_points(dom)
        result = dom.cosmological_time_batch(P)
        self.assertTrue(np.all(result["valid"]))
        self.assertTrue(np.allclose(result["T"], np.sqrt(-lorentz_norm2(P - result["r"]))))
        self.assertLess(np.max(np.abs(P - result["r"] - result["T"][:, None] * result["N"])), 1e-10)

    def test_gradient_lines(self):
        _, graph, dom = one_leaf()
        line = dom.edge_line(0, 0.5)
        self.assertEqual(line.stratum.kind, EDGE)
        ev = dom.cosmological_time(line.point_at(2.0))
        self.assertAlmostEqual(ev.T, 2.0, places=10)
        beyond = graph.points[1] / np.sqrt(-lorentz_norm2(graph.points[1]))
        with self.assertRaises(InvalidGradientLine):
            dom.gradient_line(dom.spine.vertices[0], beyond)

    def test_singular_set(self):
        lam, graph, dom = one_leaf()
        singular = dom.singular_set()
        self.assertAlmostEqual(singular.distance(0, 1), 1.0, places=12)
        self.assertAlmostEqual(singular.distance(dom.spine.vertices[0], dom.spine.vertices[1]), 1.0, places=12)
        self.assertAlmostEqual(cone().singular_set().distance(0, 0), 0.0)

    def test_square_polygon(self):
        scenario = parse_scenario(os.path.join(scenarios, "square_polygon.json"))
        self.assertAlmostEqual(scenario.domain.singular_set().distance(0, 2), 2 * np.sqrt(2.0), places=12)
        ev = scenario.domain.cosmological_time(np.array([1.0, 0.0, 0.0, 0.0]))
        self.assertAlmostEqual(ev.T, 1.0)
        self.assertEqual(ev.stratum.kind, "face")

    def test_time_is_concave(self):
        _, _, dom = one_leaf()
        P = Sampling(500, 2, seed=7, stream="concave-p").domain_points(dom)
        Q = Sampling(500, 2, seed=7, stream="concave-q").domain_points(dom)
        lam = np.random.default_rng(7).uniform(0.0, 1.0, (500, 1))
        T = dom.cosmological_time_batch(np.vstack([P, Q, lam * P + (1 - lam) * Q]))
        self.assertTrue(np.all(T["valid"]))
        TP, TQ, TM = np.split(T["T"], 3)
        self.assertTrue(np.all(TM >= lam[:, 0] * TP + (1 - lam[:, 0]) * TQ - 1e-9))

    def test_time_grows_along_timelike_directions(self):
        _, _, dom = one_leaf()
        P = Sampling(300, 2, seed=8, stream="monotone").domain_points(dom)
        rng = np.random.default_rng(8)
        V = np.array([hyperbolic_point(beta) for beta in rng.normal(size=(300, 2))])
        s = rng.uniform(0.01, 1.0, (300, 1))
        before = dom.cosmological_time_batch(P)["T"]
        after = dom.cosmological_time_batch(P + s * V)["T"]
        # T(p + s v) >= T(p) + s for unit future timelike v
        self.assertTrue(np.all(after >= before + s[:, 0] - 1e-9))


class SamplingTest(unittest.TestCase):

    def test_random_uniform_with_bounds(self):
        samples = Sampling(100, 3, seed=1)
        bounds = np.vstack([np.array([-1.3, 2.0])] * 3)
        samples.set_domainBounds(bounds)
        samples.random_uniform()

        self.assertEqual(np.shape(samples.samples()), (100, 3))
        self.assertTrue(np.all(samples.samples() >= bounds[:, 0]))
        self.assertTrue(np.all(samples.samples() <= bounds[:, 1]))
        with self.assertRaises(AttributeError):
            samples.random_uniform()

    def test_streams(self):
        first = Sampling(10, 2, seed=5, stream="cat0")
        first.random_uniform()
        again = Sampling(10, 2, seed=5, stream="cat0")
        again.random_uniform()
        other = Sampling(10, 2, seed=5, stream="pairing")
        other.random_uniform()
        self.assertTrue(np.all(first.samples() == again.samples()))
        self.assertFalse(np.all(first.samples() == other.samples()))
        self.assertEqual(stream_id("cat0"), stream_id("cat0"))
        self.assertEqual(stream_id(7), 7)

    def test_quadruples(self):
        quads = Sampling(1, 1, seed=2).quadruples(50, 6)
        self.assertEqual(quads.shape, (50, 4))
        self.assertTrue(all(len(set(q)) == 4 for q in quads))
        self.assertTrue(np.all((quads >= 0) & (quads < 6)))

    def test_saving_and_loading(self):
        samples = Sampling(20, 2, seed=9, stream="save")
        samples.random_uniform()
        samples.assign_values(lambda x: np.sum(x))
        with tempfile.TemporaryDirectory() as tmp:
            filename = os.path.join(tmp, "samples.json")
            samples.save(filename)
            loaded = load(filename)
        self.assertTrue(np.all(samples.samples() == loaded.samples()))
        self.assertTrue(np.all(samples.values() == loaded.values()))

    def test_random_lamination(self):
        lam = Sampling(1, 1, seed=4, stream="lamination").random_lamination(3, (0.3, 1.0))
        again = Sampling(1, 1, seed=4, stream="lamination").random_lamination(3, (0.3, 1.0))
        other = Sampling(1, 1, seed=5, stream="lamination").random_lamination(3, (0.3, 1.0))
        self.assertEqual([(l.endpoints, l.weight) for l in lam.leaves], [(l.endpoints, l.weight) for l in again.leaves])
        self.assertNotEqual([l.weight for l in lam.leaves], [l.weight for l in other.leaves])
        weights = sorted(l.weight for l in lam.leaves)
        self.assertTrue(all(0.3 <= w <= 1.0 for w in weights))

        graph = lam.validate()
        self.assertEqual(len(graph.regions), 4)
        # Caps hang off a single center region
        degrees = {r: 0 for r in graph.regions}
        for r1, r2, _ in graph.adjacency:
            degrees[r1] += 1
            degrees[r2] += 1
        center = max(degrees, key=degrees.get)
        self.assertEqual(degrees[center], 3)
        caps = sorted(tree_distance(graph, lam, center, r) for r in graph.regions if r != center)
        self.assertTrue(np.allclose(caps, weights, atol=1e-12))


class LevelsetTest(unittest.TestCase):

    def test_mesh_on_hyperboloid(self):
        mesh = mesh_level(cone(), 1.0, np.array([[-1.0, 1.0], [-1.0, 1.0]]), 0.25)
        self.assertEqual(mesh.shape, (9, 9))
        self.assertTrue(np.allclose(mesh.points[:, 0], np.sqrt(1.0 + np.sum(mesh.X ** 2, axis=1))))

    def test_richardson(self):
        value, error = richardson([1.1, 1.025, 1.00625])
        self.assertAlmostEqual(value, 1.0)
        self.assertAlmostEqual(error, 0.00625)

    def test_affine_limit(self):
        limit, error = affine_limit([0.3, 0.2, 0.1], [1.3, 1.2, 1.1], [0.0, 0.0, 0.0])
        self.assertAlmostEqual(limit, 1.0)
        self.assertLess(error, 1e-9)

    def test_cone_distance(self):
        dom = cone()
        line1, line2 = dom.vertex_line(0), dom.vertex_line(0, [1.0, 0.0])
        estimate = level_distance(dom, 1.0, line1, line2, MeshSettings(h=0.1, refinements=3))
        self.assertLess(abs(estimate.extrapolated - 1.0), 0.02)
        self.assertGreaterEqual(estimate.value, 1.0 - 1e-6)
        values = [v for _, v in estimate.history]
        self.assertTrue(all(v2 <= v1 for v1, v2 in zip(values, values[1:])))
        self.assertLess(tangent_sign_check(estimate), 0.2)

    def test_scaled_estimate(self):
        estimate = DistanceEstimate(1.0, [(0.1, 1.0)], 0.9, 0.1)
        scaled = estimate.scaled(2.0)
        self.assertAlmostEqual(scaled.value, 2.0)
        self.assertAlmostEqual(scaled.extrapolated, 1.8)
        self.assertAlmostEqual(scaled.error, 0.2)

    def test_projection_on_cone(self):
        dom = cone()
        sampler = Sampling(5, 2, seed=4, stream="projection")
        sampler.set_domainBounds(np.array([[-1.0, 1.0], [-1.0, 1.0]]))
        for polyline in random_level_polylines(dom, 0.5, 5, sampler):
            Lb, La = project_curve_length(dom, polyline, 1.0)
            self.assertAlmostEqual(La, 2.0 * Lb, places=10)

    def test_compare_levels_on_cone(self):
        dom = cone()
        pairs = [(dom.vertex_line(0), dom.vertex_line(0, [0.0, 1.0]))]
        report = compare_levels(dom, 1.0, 0.5, pairs, MeshSettings(h=0.1, refinements=2))
        self.assertEqual(report["violations"], [])
        self.assertLess(abs(report["ratios"][0] - 2.0), 0.05)

    def test_cone_curvature(self):
        mesh = mesh_level(cone(), 1.0, np.array([[-1.0, 1.0], [-1.0, 1.0]]), 0.05)
        center = mesh.nearest_node(np.zeros(2))
        self.assertLess(abs(estimate_gauss_curvature(mesh, center) + 1.0), 0.05)
        with self.assertRaises(BoundaryNode):
            estimate_gauss_curvature(mesh, 0)

    def test_pairing_bound_on_shifted_cone(self):
        dom = cone()
        surf = ConvexSurface.shifted(dom, [0.05, 0.0, 0.0], 1.0, np.array([[-1.0, 1.0], [-1.0, 1.0]]))
        surf.validate(dom, Sampling(200, 2, seed=0, stream="validate"))
        report = pairing_bound_check(dom, surf, 2000, seed=0)
        self.assertGreaterEqual(report["margin"], -1e-9)
        self.assertGreater(report["bound"], 1.0)

    def test_sweep_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            filename = os.path.join(tmp, "sweep.csv")
            write_sweep_csv(filename, [{"pair_id": "x-y", "a": 0.1, "value": 1.0, "error": 0.0, "oracle": 1.0, "gap": 0.0}])
            with open(filename) as f:
                lines = f.read().splitlines()
        self.assertEqual(lines[0], "pair_id,a,value,error,oracle,gap")
        self.assertEqual(len(lines), 2)

    def test_band_distance_is_constant(self):
        _, _, dom = one_leaf()
        line1, line2 = dom.edge_line(0, 0.2), dom.edge_line(0, 0.8)
        for a in (0.1, 0.5, 2.0):
            estimate = level_distance(dom, a, line1, line2, MeshSettings(h=0.1, refinements=2))
            self.assertAlmostEqual(estimate.extrapolated, 0.6, places=3)

    def test_second_order_convergence(self):
        dom = cone()
        estimate = level_distance(dom, 1.0, dom.vertex_line(0), dom.vertex_line(0, [1.0, 0.0]),
                                  MeshSettings(h=0.1, refinements=3))
        v1, v2, v3 = [v for _, v in estimate.history]
        order = np.log2((v1 - v2) / (v2 - v3))
        self.assertGreater(order, 1.5)
        self.assertLess(order, 2.5)

    def test_past_sweep_nested(self):
        lam = MeasuredLamination([Leaf((-1.2, 1.2), 0.5), Leaf((-0.6, 0.6), 0.7)])
        graph = lam.validate()
        dom = RegularDomain(build_spine(lam, graph))
        lines = [dom.gradient_line(dom.spine.vertices[dom.spine.region_vertex[r]], normalize_timelike(graph.points[r]))
                 for r in (0, 2)]
        result = past_sweep(dom, [("base-inner", *lines)], [0.4, 0.2, 0.1], MeshSettings(h=0.1, refinements=3),
                            oracles=[1.2])
        summary = result["summary"][0]
        self.assertEqual(len(result["rows"]), 3)
        self.assertEqual(summary["levels"], [0.4, 0.2, 0.1])
        self.assertLessEqual(abs(summary["limit"] - 1.2), 0.024 + summary["error"])
        self.assertTrue(summary["passed"])
        # the intrinsic distance on the initial singularity is the tree distance
        self.assertAlmostEqual(dom.singular_set().distance(lines[0].r, lines[1].r), 1.2, places=6)

    def test_future_sweep_on_cone(self):
        dom = cone()
        pairs = [("o-x", dom.vertex_line(0), dom.vertex_line(0, [1.0, 0.0]))]
        result = future_sweep(dom, pairs, [1.0, 2.0, 4.0], MeshSettings(h=0.1, refinements=2))
        summary = result["summary"][0]
        self.assertAlmostEqual(summary["target"], 1.0, places=12)
        self.assertTrue(all(abs(v - 1.0) < 0.02 for v in summary["values"]))
        self.assertTrue(summary["passed"])

    def test_cat0_on_level_distances(self):
        dom = cone()
        ids = [f"p{k}" for k in range(5)]
        angles = 2 * np.pi * np.arange(5) / 5
        lines = [dom.vertex_line(0, 0.7 * np.array([np.cos(t), np.sin(t)])) for t in angles]
        d, e = np.zeros((5, 5)), np.zeros((5, 5))
        for i, j in combinations(range(5), 2):
            estimate = level_distance(dom, 1.0, lines[i], lines[j], MeshSettings(h=0.1, refinements=2))
            d[i, j] = d[j, i] = estimate.extrapolated
            e[i, j] = e[j, i] = estimate.error
        m = SampledMetric(ids, d, e)
        for x, y, z, w in combinations(ids, 4):
            for quadruple in ((x, y, z, w), (x, z, y, w), (x, w, y, z)):
                self.assertGreaterEqual(cat0_four_point(m, quadruple), -3 * quadruple_error(m, quadruple))


class WickTest(unittest.TestCase):

    def test_times(self):
        self.assertAlmostEqual(ds_time(0.5), np.arctanh(0.5))
        self.assertAlmostEqual(ads_time(1.0), np.pi / 4)
        with self.assertRaises(InvalidRange):
            ds_time(1.0)
        with self.assertRaises(InvalidRange):
            ads_time(0.0)

    def test_geometry(self):
        geom = WickGeometry(DE_SITTER, cone())
        a = np.arctanh(0.5)
        self.assertAlmostEqual(geom.flat_level(a), 0.5)
        self.assertAlmostEqual(geom.length_factor(a), 1.0 / np.sqrt(0.75))
        with self.assertRaises(AssertionError):
            WickGeometry(DE_SITTER, RegularDomain(SpineComplex(np.zeros((1, 4)), kind=POINTS)))

    def test_bilip_bounds(self):
        lower, upper = wick_bilip_bounds(DE_SITTER, 2.0, 1.0)
        self.assertEqual(lower, 1.0)
        self.assertAlmostEqual(upper, (np.sinh(2.0) / np.sinh(1.0)) ** 2)
        lower, upper = wick_bilip_bounds(ANTI_DE_SITTER, 1.0, 0.5)
        self.assertAlmostEqual(lower, (np.cos(1.0) / np.cos(0.5)) ** 2)
        self.assertAlmostEqual(upper, (np.sin(1.0) / np.sin(0.5)) ** 2)
        with self.assertRaises(InvalidRange):
            wick_bilip_bounds(DE_SITTER, 1.0, 2.0)

    def test_curvature_transport(self):
        self.assertAlmostEqual(curvature_transport(0.5, 2.0, 0.0), -1.0)
        self.assertAlmostEqual(curvature_transport(1.0, 1.0, 1.0), -0.25)
        a0, a = 0.3, 0.4
        lam = 1.0 / np.tanh(a0)
        self.assertAlmostEqual(curvature_transport(lam, lam, a, DE_SITTER), -1.0 / np.tanh(a0 + a) ** 2)
        self.assertAlmostEqual(1.0 + curvature_transport(lam, lam, a, DE_SITTER), -1.0 / np.sinh(a0 + a) ** 2)
        self.assertAlmostEqual(curvature_transport(1.0, 2.0, 0.3, DE_SITTER), -1.4477923, places=6)
        for geometry in (FLAT, DE_SITTER):
            self.assertEqual(curvature_transport(1.0, 1.0, 0.0, geometry), -1.0)
            self.assertAlmostEqual(curvature_transport(0.7, 3.0, 0.0, geometry), -2.1)
        with self.assertRaises(FocalPoint):
            curvature_transport(-1.0, 1.0, 1.0)

    def test_wick_curvature(self):
        self.assertAlmostEqual(wick_gauss_curvature(-4.0, 0.5, DE_SITTER), -3.0)
        self.assertAlmostEqual(wick_gauss_curvature(-4.0, 0.5, ANTI_DE_SITTER), -5.0)

    def test_barriers(self):
        lower, upper = ds_k_barrier(2.0)
        self.assertAlmostEqual(lower, np.arctanh(np.sqrt(18.0) / 6.0))
        self.assertAlmostEqual(upper, np.arctanh(np.sqrt(0.8)))
        lower, upper = ds_k_barrier(1e3)
        self.assertAlmostEqual(upper - lower, ds_k_barrier_gap_limit(), places=4)
        with self.assertRaises(InvalidRange):
            ds_k_barrier(1.0)

    def test_pairing(self):
        N = hyperbolic_point([0.2, 0.1])
        self.assertAlmostEqual(float(wick_normal_pairing(N, N, 0.5, DE_SITTER)), 1.0)
        self.assertAlmostEqual(wick_pairing_bound(0.5, 0.5, DE_SITTER), 1.0)
        self.assertAlmostEqual(wick_pairing_bound(2.0, 1.0, ANTI_DE_SITTER), 2.0)

    def test_wick_level_distance(self):
        dom = cone()
        line1, line2 = dom.vertex_line(0), dom.vertex_line(0, [1.0, 0.0])
        settings = MeshSettings(h=0.05, refinements=3)
        a, b = 1.0, 0.5
        ads = WickGeometry(ANTI_DE_SITTER, dom)
        da = wick_level_distance(ads, a, line1, line2, settings)
        self.assertAlmostEqual(da.value, np.cos(a) * level_distance(dom, np.tan(a), line1, line2, settings).value, places=12)
        self.assertLess(abs(da.extrapolated - np.sin(a)), 0.02)
        db = wick_level_distance(ads, b, line1, line2, settings)
        lower, upper = wick_bilip_bounds(ANTI_DE_SITTER, a, b)
        ratio = da.extrapolated / db.extrapolated
        self.assertGreaterEqual(ratio, np.sqrt(lower) - 0.02)
        self.assertLessEqual(ratio, np.sqrt(upper) + 0.02)
        ds = wick_level_distance(WickGeometry(DE_SITTER, dom), b, line1, line2, settings)
        self.assertLess(abs(ds.extrapolated - np.sinh(b)), 0.02)


class MetricsTest(unittest.TestCase):

    def setUp(self) -> None:
        s = np.sqrt(2.0)
        self.square = metric(["x1", "y1", "x2", "y2"], [[0, 1, s, 1], [1, 0, 1, s], [s, 1, 0, 1], [1, s, 1, 0]])

    def test_square_is_flat(self):
        self.assertAlmostEqual(cat0_four_point(self.square, ("x1", "y1", "x2", "y2")), 0.0, places=9)

    def test_star_tree(self):
        m = metric(["l1", "c", "l2", "l3"], [[0, 1, 2, 2], [1, 0, 1, 1], [2, 1, 0, 2], [2, 1, 2, 0]])
        self.assertGreaterEqual(cat0_four_point(m, ("l1", "c", "l2", "l3")), -1e-9)
        self.assertAlmostEqual(tree_four_point(m, ("l1", "c", "l2", "l3")), 0.0)

    def test_sphere_fails(self):
        q = np.pi / 2
        m = metric(["x1", "y1", "x2", "y2"], [[0, q, np.pi, q], [q, 0, q, q], [np.pi, q, 0, q], [q, q, q, 0]])
        margin = cat0_four_point(m, ("x1", "y1", "x2", "y2"))
        self.assertLess(margin, 0.0)
        # the hinge closes at |x1 x2| = pi, which puts y1 and y2 at the same point
        self.assertAlmostEqual(margin, -np.pi / 2)
        self.assertAlmostEqual(cat0_four_point(m, ("x2", "y2", "x1", "y1")), margin, places=10)
        self.assertAlmostEqual(cat0_four_point(m.scaled(3.0), ("x1", "y1", "x2", "y2")), 3 * margin, places=6)

    def test_cat0_attainable_diagonal(self):
        # rhombus with sides 1: |y1 y2| = sqrt(4 - d(x1,x2)^2)
        m = metric(["x1", "y1", "x2", "y2"], [[0, 1, 1.2, 1], [1, 0, 1, 1.5], [1.2, 1, 0, 1], [1, 1.5, 1, 0]])
        self.assertAlmostEqual(cat0_four_point(m, ("x1", "y1", "x2", "y2")), np.sqrt(4 - 1.44) - 1.5)

    def test_tree_defect_of_square(self):
        self.assertAlmostEqual(tree_four_point(self.square, ("x1", "x2", "y1", "y2")), 2 * np.sqrt(2.0) - 2)
        # sides on the left hand side: the diagonals dominate and the ordered defect vanishes
        self.assertEqual(tree_four_point(self.square, ("x1", "y1", "x2", "y2")), 0.0)
        self.assertEqual(tree_four_point(self.square, ("x1", "y1", "x1", "y2")), 0.0)

    def test_violations(self):
        with self.assertRaises(MetricViolation):
            metric(["x", "y"], [[0, 1], [2, 0]])
        with self.assertRaises(MetricViolation):
            metric(["x", "y", "z"], [[0, 1, 3], [1, 0, 1], [3, 1, 0]])

    def test_midpoint_defect(self):
        self.assertAlmostEqual(approx_midpoint_defect(metric(["x", "y"], [[0, 1], [1, 0]]), "x", "y"), 0.5)

    def test_bilipschitz(self):
        low, high = bilipschitz_ratio(self.square.scaled(2.0), self.square)
        self.assertAlmostEqual(low, 2.0)
        self.assertAlmostEqual(high, 2.0)
        with self.assertRaises(IdMismatch):
            bilipschitz_ratio(self.square, metric(["x", "y"], [[0, 1], [1, 0]]))

    def test_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            filename = os.path.join(tmp, "metric.csv")
            self.square.to_csv(filename)
            loaded = SampledMetric.from_csv(filename)
        self.assertAlmostEqual(loaded.distance("x1", "x2"), np.sqrt(2.0))
        self.assertEqual(sorted(loaded.ids), ["x1", "x2", "y1", "y2"])

    def test_quadruples_and_histogram(self):
        points = np.random.default_rng(1).uniform(-1, 1, (8, 2))
        d = np.linalg.norm(points[:, None] - points[None], axis=-1)
        m = SampledMetric([f"p{k}" for k in range(8)], d)
        quads = sample_quadruples(m, 30, Sampling(1, 1, seed=0, stream="quadruples"))
        self.assertEqual(len(quads), 30)
        margins = [cat0_four_point(m, q) for q in quads]
        self.assertTrue(all(v >= -1e-9 for v in margins))
        counts, _ = margin_histogram(margins, bins=5)
        self.assertEqual(int(np.sum(counts)), 30)


class CliTest(unittest.TestCase):

    def write(self, tmp, data):
        filename = os.path.join(tmp, "scenario.json")
        with open(filename, "w") as f:
            f.write(data if isinstance(data, str) else json.dumps(data))
        return filename

    def test_parse_cone(self):
        scenario = parse_scenario(os.path.join(scenarios, "cone.json"))
        self.assertEqual(scenario.name, "cone")
        self.assertEqual(len(scenario.probes), 4)
        self.assertEqual(len(scenario.pairs), 3)
        self.assertEqual(len(scenario.digest), 64)

    def test_scenario_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ScenarioError) as context:
                parse_scenario(self.write(tmp, '{"schema": 1,\n "name": }'))
            self.assertEqual(context.exception.field, "json")
            with self.assertRaises(ScenarioError) as context:
                parse_scenario(self.write(tmp, {"schema": 1, "dimension": 3, "geometry": "ds",
                                                "spine": {"vertices": [[0, 0, 0, 0]], "kind": "points"}}))
            self.assertEqual(context.exception.field, "geometry")
            with self.assertRaises(ScenarioError) as context:
                parse_scenario(self.write(tmp, {"schema": 1, "lamination": {"leaves": []},
                                                "probes": [{"region": 4}]}))
            self.assertEqual(context.exception.field, "probes[0]")
            with self.assertRaises(CrossingLeaves):
                parse_scenario(self.write(tmp, {"schema": 1, "lamination": {"leaves": [[0, 2, 1], [1, 3, 1]]}}))

    def test_eval_report(self):
        scenario = parse_scenario(os.path.join(scenarios, "cone.json"))
        with tempfile.TemporaryDirectory() as tmp:
            report = run("eval", scenario, out=tmp)
            again = run("eval", scenario, out=tmp, threads=2)
        self.assertEqual(report["status"], "pass")
        checks = {c["name"]: c for c in report["checks"]}
        self.assertAlmostEqual(checks["eval:000"]["values"]["T"], 2.0)
        self.assertFalse(checks["eval:002"]["values"]["contains"])
        self.assertEqual([c["name"] for c in report["checks"]], sorted(checks))
        self.assertEqual(json.dumps(report, sort_keys=True, default=str), json.dumps(again, sort_keys=True, default=str))

    def test_exit_codes(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(main(["eval", "--scenario", os.path.join(tmp, "missing.json"), "--out", tmp]), 2)
            self.assertEqual(main(["eval", "--scenario", os.path.join(scenarios, "cone.json"), "--out", tmp]), 0)
            self.assertTrue(os.path.exists(os.path.join(tmp, "cone_eval.json")))
            with self.assertRaises(SystemExit):
                main(["unknown", "--scenario", "cone.json"])

    def test_wick_on_flat_scenario(self):
        scenario = parse_scenario(os.path.join(scenarios, "cone.json"))
        with tempfile.TemporaryDirectory() as tmp:
            report = run("wick", scenario, out=tmp)
        self.assertEqual(report["status"], "fail")

    def test_random_lamination_scenario(self):
        filename = os.path.join(scenarios, "random_three.json")
        leaves = []
        for seed in range(5):
            scenario = parse_scenario(filename, seed=seed)
            self.assertEqual(scenario.seed, seed)
            self.assertEqual(len(scenario.graph.regions), 4)
            self.assertEqual(len(scenario.probes), 4)
            singular = scenario.domain.singular_set().vertex_matrix()
            vertex = scenario.domain.spine.region_vertex
            for r in scenario.graph.regions:
                self.assertAlmostEqual(singular[vertex[0], vertex[r]],
                                       tree_distance(scenario.graph, scenario.lamination, 0, r), places=12)
            leaves.append(tuple((l.endpoints, l.weight) for l in scenario.lamination.leaves))
        self.assertEqual(len(set(leaves)), 5)
        again = parse_scenario(filename, seed=3)
        self.assertEqual(tuple((l.endpoints, l.weight) for l in again.lamination.leaves), leaves[3])
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ScenarioError) as context:
                parse_scenario(self.write(tmp, {"schema": 1, "lamination": {"random": {"leaves": 0}}}))
            self.assertEqual(context.exception.field, "lamination.random")

    def test_wick_on_anti_de_sitter_scenario(self):
        scenario = parse_scenario(os.path.join(scenarios, "one_leaf_ads.json"))
        with tempfile.TemporaryDirectory() as tmp:
            report = run("wick", scenario, out=tmp)
            self.assertTrue(os.path.exists(os.path.join(tmp, "one_leaf_ads_wick_ads.csv")))
        check = report["checks"][0]
        self.assertEqual(check["name"], "wick:base-beyond")
        self.assertLessEqual(check["values"]["identity"], 1e-12)
        self.assertAlmostEqual(check["values"]["oracle"], 1.0, places=9)
        for bound in check["values"]["ratios"]:
            self.assertGreaterEqual(bound["ratio"], bound["lower"] - bound["error"])
            self.assertLessEqual(bound["ratio"], bound["upper"] + bound["error"])

    def test_report_without_nan(self):
        encoded = json.dumps({"ratio": float("nan"), "values": np.array([1.0, np.nan, np.inf]), "n": np.int64(2)},
                             cls=NumpyEncoder, allow_nan=False)
        self.assertEqual(json.loads(encoded), {"ratio": None, "values": [1.0, None, None], "n": 2})


if __name__ == '__main__':
    unittest.main()
