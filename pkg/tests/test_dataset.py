"""
Unit tests for sampling, labelling and the dataset CSV format.
"""

import math
import unittest
from unittest.mock import patch

import numpy as np
import numpy.testing as npt

from gridgenius.logic.data_sources.data_loader_base import (
    Dataset, DatasetFormatError, DatasetRow, dataset_header, feature_names,
)
from gridgenius.logic.data_sources.data_loader_csv import (
    DatasetCSVLoader, export_dataset, import_dataset,
)
from gridgenius.logic.data_sources.point_labeler import (
    generate_dataset, label_point, solution_features,
)
from gridgenius.logic.data_sources.sample_generator import (
    PlanSpace, SamplingPlan, SamplingPlanError, band_radius, boundary_band,
    densify, latin_hypercube, sample,
)
from gridgenius.logic.power_flow.newton_solver import PowerFlowError, solve
from tests.test_base import GridGeniusTestBase


def make_row(network, index, di, feasible=True):
    n_features = len(feature_names(network))
    return DatasetRow(
        index=index,
        demand_mw=300.0 + index,
        sg_share=0.3,
        gfm_share=0.5,
        u=np.array([0.5, 0.6, 1.0, 1.01, 0.99]),
        features=np.linspace(0.0, 1.0, n_features) + index / 3.0,
        di=di,
        stable=di < 1.0,
        feasible=feasible,
    )


class TestDatasetColumns(GridGeniusTestBase):

    def test_feature_names(self):
        names = feature_names(self.network)
        self.assertEqual(len(names), 30)
        self.assertEqual(names[:2], ['V1', 'V2'])
        self.assertIn('theta9', names)
        self.assertEqual(names[18:20], ['Pg1', 'Qg1'])
        self.assertEqual(names[-2:], ['Pl8', 'Ql8'])

    def test_header(self):
        header = dataset_header(self.network)
        self.assertEqual(len(header), 42)
        self.assertEqual(header[:5], ['index', 'demand_mw', 'sg_share', 'gfm_share', 'u_P_SG2'])
        self.assertEqual(header[-3:], ['DI', 'stable', 'feasible'])

    def test_matrix_and_class_balance(self):
        rows = [make_row(self.network, 0, 0.9), make_row(self.network, 1, 1.1),
                make_row(self.network, 2, math.nan, feasible=False)]
        dataset = Dataset(feature_names(self.network), list(self.network.controls), rows)
        self.assertEqual(len(dataset), 3)
        self.assertEqual(dataset.matrix().shape, (2, 30))
        npt.assert_allclose(dataset.matrix(['V2']).ravel(), [rows[0].features[1], rows[1].features[1]])
        npt.assert_allclose(dataset.target(), [0.9, 1.1])
        self.assertEqual(dataset.class_balance(), (1, 1))


class TestDatasetCSV(GridGeniusTestBase):

    def test_export_skips_infeasible_rows(self):
        rows = [make_row(self.network, 0, 0.95), make_row(self.network, 1, math.nan, feasible=False),
                make_row(self.network, 2, 1.02)]
        path = self.temp_dir / 'dataset.csv'
        written = export_dataset(rows, path, self.network)
        self.assertEqual(written, 2)
        lines = path.read_text(encoding='utf-8').splitlines()
        self.assertEqual(len(lines), 3)
        self.assertEqual(lines[0], ','.join(dataset_header(self.network)))

    def test_written_values_read_back_exactly(self):
        rows = [make_row(self.network, 0, 0.95), make_row(self.network, 1, 1.0 + 1e-13)]
        path = self.temp_dir / 'dataset.csv'
        export_dataset(rows, path, self.network)
        dataset = import_dataset(path, self.network)
        self.assertEqual(len(dataset), 2)
        for original, loaded in zip(rows, dataset.rows):
            self.assertEqual(loaded.index, original.index)
            self.assertEqual(loaded.di, original.di)
            npt.assert_array_equal(loaded.features, original.features)
            npt.assert_array_equal(loaded.u, original.u)
            self.assertEqual(loaded.stable, original.stable)

    def test_single_class_warning(self):
        path = self.temp_dir / 'dataset.csv'
        export_dataset([make_row(self.network, 0, 0.5)], path, self.network)
        result = DatasetCSVLoader(self.network).load(path)
        self.assertTrue(result.success)
        self.assertEqual(result.records_loaded, 1)
        self.assertEqual(len(result.warnings), 1)

    def test_header_mismatch(self):
        path = self.temp_dir / 'dataset.csv'
        path.write_text('index,demand_mw\n0,1\n', encoding='utf-8')
        result = DatasetCSVLoader(self.network).load(path)
        self.assertFalse(result.success)
        self.assertIn('Header mismatch', result.error_message)
        with self.assertRaises(DatasetFormatError):
            import_dataset(path, self.network)

    def test_bad_flag(self):
        path = self.temp_dir / 'dataset.csv'
        export_dataset([make_row(self.network, 0, 0.5)], path, self.network)
        text = path.read_text(encoding='utf-8').rstrip('\n')
        path.write_text(text[:-1] + '2\n', encoding='utf-8')
        with self.assertRaises(DatasetFormatError):
            import_dataset(path, self.network)

    def test_stable_flag_must_agree_with_damping_index(self):
        path = self.temp_dir / 'dataset.csv'
        export_dataset([make_row(self.network, 0, 0.5), make_row(self.network, 1, 1.2)], path, self.network)
        header, stable_row, unstable_row = path.read_text(encoding='utf-8').splitlines()
        self.assertTrue(stable_row.endswith(',1,1'))

        path.write_text('\n'.join([header, stable_row[:-4] + ',0,1', unstable_row]) + '\n', encoding='utf-8')
        with self.assertRaises(DatasetFormatError) as ctx:
            import_dataset(path, self.network)
        self.assertIn('contradicts', str(ctx.exception))

        path.write_text('\n'.join([header, stable_row, unstable_row[:-4] + ',1,1']) + '\n', encoding='utf-8')
        result = DatasetCSVLoader(self.network).load(path)
        self.assertFalse(result.success)
        self.assertIn('Line 3', result.error_message)

    def test_missing_file(self):
        result = DatasetCSVLoader(self.network).load(self.temp_dir / 'nope.csv')
        self.assertFalse(result.success)
        self.assertIn('not found', result.error_message)


class TestSamplingPlan(GridGeniusTestBase):

    def test_pass_sizes(self):
        plan = SamplingPlan(n_points=5000, boundary_densify_fraction=0.3)
        self.assertEqual(plan.second_pass_size(), 1500)
        self.assertEqual(plan.first_pass_size(), 3500)

    def test_validation(self):
        plan = SamplingPlan(n_points=0, sg_share_range=(0.7, 0.2), boundary_densify_fraction=1.0)
        result = plan.validate()
        self.assertFalse(result.is_valid)
        self.assertEqual(len(result.errors), 3)
        with self.assertRaises(SamplingPlanError):
            PlanSpace(self.network, plan)

    def test_unknown_plan_label(self):
        with self.assertRaises(SamplingPlanError):
            PlanSpace(self.network, SamplingPlan(share_label='P_SG7'))

    def test_plan_space_bounds(self):
        space = PlanSpace(self.network, SamplingPlan())
        self.assertEqual(space.dimension, 6)
        npt.assert_allclose(space.lower, [215.4, 0.1, 0.2, 0.9, 0.9, 0.9])
        npt.assert_allclose(space.upper, [775.5, 0.6, 0.9, 1.1, 1.1, 1.1])

    def test_setpoints_from_shares(self):
        space = PlanSpace(self.network, SamplingPlan())
        point = space.point(0, np.zeros(6), 1)
        point.demand_mw, point.sg_share, point.gfm_share = 400.0, 0.25, 0.5
        setpoints = space.to_setpoints(point)
        self.assertAlmostEqual(setpoints.u[0], 100.0 / 270.0)
        # 150 MW requested from a 125 MVA unit clips at the upper limit
        self.assertAlmostEqual(setpoints.u[1], 0.95)
        npt.assert_allclose(setpoints.u[2:], [0.9, 0.9, 0.9])
        self.assertEqual(setpoints.demand_mw, 400.0)


class TestSampler(GridGeniusTestBase):

    def test_latin_hypercube_is_stratified(self):
        points = latin_hypercube(3, 20, seed=7)
        self.assertEqual(points.shape, (20, 3))
        for column in points.T:
            npt.assert_array_equal(np.sort(np.floor(column * 20)), np.arange(20))
        npt.assert_array_equal(points, latin_hypercube(3, 20, seed=7))

    def test_boundary_band(self):
        coords = np.array([[0.0], [0.1], [0.2], [0.3], [0.42], [0.6], [0.7], [0.8]])
        stable = [True] * 4 + [False] * 4
        npt.assert_array_equal(boundary_band(coords, stable, neighbours=2), [3, 4, 5])

    def test_boundary_band_ignores_infeasible_points(self):
        # a stable region next to an infeasible strip: no stability transition
        coords = np.array([[0.0], [0.1], [0.2], [0.3], [0.4], [0.5], [0.6], [0.7]])
        stable = [True] * 4 + [None] * 4
        self.assertEqual(boundary_band(coords, stable, neighbours=2).size, 0)

        # infeasible points between the classes neither join nor hide the band
        coords = np.array([[0.0], [0.12], [0.3], [0.32], [0.34], [0.36], [0.5], [0.65]])
        stable = [True, True, True, None, None, False, False, False]
        npt.assert_array_equal(boundary_band(coords, stable, neighbours=1), [2, 5])

    def test_boundary_band_single_class(self):
        coords = latin_hypercube(2, 10, seed=1)
        self.assertEqual(boundary_band(coords, [True] * 10, neighbours=3).size, 0)

    def test_densify_stays_near_band(self):
        coords = latin_hypercube(2, 50, seed=3)
        band = np.array([4, 9])
        extra = densify(coords, band, 30, 0.05, np.random.default_rng(0))
        self.assertEqual(extra.shape, (30, 2))
        distance = np.min(
            np.max(np.abs(extra[:, None, :] - coords[band][None, :, :]), axis=2), axis=1
        )
        self.assertTrue(np.all(distance <= 0.05 + 1e-12))
        self.assertTrue(np.all((extra >= 0.0) & (extra <= 1.0)))

    def test_band_radius_shrinks(self):
        plan = SamplingPlan()
        self.assertGreater(band_radius(plan, 100, 6), band_radius(plan, 10000, 6))

    def test_sample_without_classifier(self):
        points = sample(SamplingPlan(n_points=25), self.network)
        self.assertEqual(len(points), 25)
        self.assertTrue(all(p.pass_index == 1 for p in points))

    def test_two_pass_sample(self):
        plan = SamplingPlan(n_points=40, boundary_densify_fraction=0.25)
        points = sample(plan, self.network, lambda pts: [p.coords[0] < 0.5 for p in pts])
        self.assertEqual(len(points), 40)
        self.assertEqual([p.index for p in points], list(range(40)))
        self.assertEqual(sum(1 for p in points if p.pass_index == 2), 10)

    def test_two_pass_without_transition(self):
        plan = SamplingPlan(n_points=20, boundary_densify_fraction=0.5)
        with self.assertLogs('gridgenius.logic.data_sources.sample_generator', level='WARNING'):
            points = sample(plan, self.network, lambda pts: [True] * len(pts))
        self.assertEqual(len(points), 20)


class TestLabeler(GridGeniusTestBase):

    def setUp(self):
        super().setUp()
        self.plan = SamplingPlan(n_points=6, demand_range=(300.0, 330.0))
        self.space = PlanSpace(self.network, self.plan)

    def test_label_feasible_point(self):
        point = self.space.point(0, np.full(6, 0.5), 1)
        row = label_point(self.network, self.plan, point)
        self.assertTrue(row.feasible)
        self.assertEqual(len(row.features), 30)
        self.assertTrue(np.isfinite(row.di))
        self.assertEqual(row.stable, row.di < 1.0)

        sol = solve(self.network, self.space.to_setpoints(point))
        npt.assert_allclose(row.features, solution_features(self.network, sol))

    def test_power_flow_failure_marks_point_infeasible(self):
        point = self.space.point(3, np.full(6, 0.5), 1)
        with patch('gridgenius.logic.data_sources.point_labeler.solve',
                   side_effect=PowerFlowError('diverged')):
            row = label_point(self.network, self.plan, point)
        self.assertFalse(row.feasible)
        self.assertTrue(math.isnan(row.di))
        self.assertEqual(row.index, 3)

    def test_generate_small_dataset(self):
        plan = SamplingPlan(n_points=8, demand_range=(250.0, 500.0), boundary_densify_fraction=0.25)
        generated = generate_dataset(self.network, plan)
        stats = generated.stats
        self.assertEqual(stats['n_points'], 8)
        self.assertEqual(stats['second_pass'], 2)
        self.assertEqual(stats['feasible'] + stats['infeasible'], 8)
        self.assertEqual(stats['stable'] + stats['unstable'], stats['feasible'])
        self.assertEqual([row.index for row in generated.dataset.rows], list(range(8)))


if __name__ == '__main__':
    unittest.main()
