"""
Unit tests for the hinge-function surrogate: evaluation, file format and fitting.
"""

import unittest

import numpy as np
import numpy.testing as npt

from gridgenius.logic.data_sources.data_loader_base import Dataset, DatasetRow
from gridgenius.logic.regression.feature_selection import select_features
from gridgenius.logic.regression.mars_fit import (
    FitConfig, candidate_knots, fit, fit_dataset, fit_report, gcv_score, train_test_split,
)
from gridgenius.logic.regression.mars_model import (
    HingeDirection, HingeTerm, MarsModel, MarsModelError, load_model, model_from_dict,
    r2, reference_model, save_model,
)
from tests.test_base import GridGeniusTestBase


class TestReferenceModel(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.model = reference_model()

    def test_value_at_knots(self):
        self.assertAlmostEqual(self.model.predict([0.9757, 0.9269]), 0.9991, places=12)

    def test_value_above_v1_knot(self):
        self.assertAlmostEqual(self.model.predict([1.01, 0.9269]), 1.000095, places=6)

    def test_gradient_on_both_sides_of_knot(self):
        npt.assert_allclose(self.model.gradient([0.98, 0.95]), [0.0290, -0.0071], atol=1e-12)
        npt.assert_allclose(self.model.gradient([0.97, 0.90]), [0.0295, -0.0036], atol=1e-12)

    def test_batch_prediction(self):
        X = np.array([[0.9757, 0.9269], [1.01, 0.9269]])
        npt.assert_allclose(self.model.predict(X), [0.9991, 1.0000947], atol=1e-9)

    def test_lipschitz_constant(self):
        self.assertAlmostEqual(self.model.lipschitz_constant(), 0.0692, places=12)

    def test_extrapolation_flag(self):
        value, flag = self.model.predict_with_flag([1.2, 1.0])
        self.assertTrue(flag)
        self.assertTrue(np.isfinite(value))
        self.assertFalse(self.model.extrapolating([1.0, 1.0]))

    def test_dimension_mismatch(self):
        with self.assertRaises(MarsModelError):
            self.model.predict([1.0, 1.0, 1.0])
        with self.assertRaises(MarsModelError):
            self.model.gradient(np.ones((2, 2)))

    def test_describe(self):
        text = self.model.describe()
        self.assertTrue(text.startswith('0.9991'))
        self.assertIn('+ 0.029*max(0, V1 - 0.9757)', text)
        self.assertIn('- 0.0295*max(0, 0.9757 - V1)', text)


class TestModelFile(GridGeniusTestBase):

    def _document(self):
        return reference_model().to_dict()

    def test_save_then_load(self):
        model = reference_model()
        path = save_model(model, self.temp_dir / 'model.yaml')
        self.assert_file_contains(path, 'gridgenius-mars')
        self.assertEqual(load_model(path), model)

    def test_wrong_format(self):
        document = self._document()
        document['format'] = 'other'
        with self.assertRaises(MarsModelError):
            model_from_dict(document)

    def test_unknown_direction(self):
        document = self._document()
        document['terms'][0]['direction'] = 'both'
        with self.assertRaises(MarsModelError):
            model_from_dict(document)

    def test_unknown_feature(self):
        document = self._document()
        document['terms'][0]['feature'] = 'V9'
        with self.assertRaises(MarsModelError):
            model_from_dict(document)

    def test_knot_outside_training_range(self):
        document = self._document()
        document['terms'][0]['knot'] = 1.5
        with self.assertRaises(MarsModelError):
            model_from_dict(document)

    def test_missing_file(self):
        with self.assertRaises(MarsModelError):
            load_model(self.temp_dir / 'absent.yaml')


class TestMetrics(unittest.TestCase):

    def test_r2(self):
        self.assertAlmostEqual(r2([0.0, 1.0, 2.0], [0.0, 1.0, 1.0]), 0.5)

    def test_r2_rejects_constant_target(self):
        with self.assertRaises(MarsModelError):
            r2([1.0, 1.0], [1.0, 1.0])

    def test_gcv_score(self):
        self.assertAlmostEqual(gcv_score(2.0, 100, 0, 3.0), 0.02 / 0.99 ** 2)
        self.assertEqual(gcv_score(1.0, 5, 4, 3.0), float('inf'))

    def test_candidate_knots_thinning(self):
        column = np.arange(1000) / 1000.0
        knots = candidate_knots(column, min_span=1, max_knots=200)
        self.assertEqual(len(knots), 200)
        self.assertEqual(knots[1] - knots[0], 0.005)
        self.assertEqual(len(candidate_knots(np.repeat([0.1, 0.2], 5))), 2)


class TestFitting(unittest.TestCase):

    def setUp(self):
        self.x = (np.arange(101) / 100.0).reshape(-1, 1)

    def test_recovers_single_hinge(self):
        y = 2.0 + 3.0 * np.maximum(0.0, self.x[:, 0] - 0.5)
        model = fit(self.x, y, ['x'])
        plus = [t for t in model.terms if t.direction == HingeDirection.PLUS]
        self.assertEqual(len(plus), 1)
        self.assertAlmostEqual(plus[0].knot, 0.5, places=12)
        self.assertAlmostEqual(plus[0].coefficient, 3.0, places=8)
        self.assertAlmostEqual(model.intercept, 2.0, places=8)
        npt.assert_allclose(model.predict(self.x), y, atol=1e-9)

    def test_recovers_absolute_value_as_two_hinges(self):
        y = np.abs(self.x[:, 0] - 0.3)
        model = fit(self.x, y, ['x'])
        self.assertEqual(len(model.terms), 2)
        self.assertEqual({t.direction for t in model.terms}, {HingeDirection.PLUS, HingeDirection.MINUS})
        for term in model.terms:
            self.assertAlmostEqual(term.knot, 0.3, places=12)
            self.assertAlmostEqual(term.coefficient, 1.0, places=8)
        self.assertAlmostEqual(model.intercept, 0.0, places=8)

    def test_training_ranges_and_validity(self):
        y = np.sin(3.0 * self.x[:, 0])
        report = fit_report(self.x, y, ['x'], FitConfig(max_terms=6))
        self.assertTrue(report.model.validate().is_valid)
        self.assertEqual(report.model.training_ranges, ((0.0, 1.0),))
        self.assertLessEqual(report.forward_terms, 6)
        self.assertEqual(report.pruning_path[0][0], report.forward_terms)
        self.assertEqual(report.pruning_path[-1][0], 0)
        self.assertEqual(report.gcv, min(score for _, _, score in report.pruning_path))

    def test_rejects_small_or_bad_input(self):
        with self.assertRaises(MarsModelError):
            fit(self.x[:5], np.arange(5.0), ['x'])
        with self.assertRaises(MarsModelError):
            fit(self.x, np.arange(101.0), ['x', 'y'])
        bad = np.arange(101.0)
        bad[3] = np.nan
        with self.assertRaises(MarsModelError):
            fit(self.x, bad, ['x'])
        with self.assertRaises(MarsModelError):
            fit(self.x, np.arange(101.0), ['x'], FitConfig(max_terms=0))


class TestFeatureSelection(unittest.TestCase):

    def test_drops_correlated_and_constant_columns(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(size=50)
        b = rng.uniform(size=50)
        X = np.column_stack([a, 2.0 * a + 1.0, np.ones(50), b])
        self.assertEqual(select_features(X, ['a', 'a2', 'c', 'b'], 0.95), ['a', 'b'])

    def test_all_dropped(self):
        with self.assertRaises(MarsModelError):
            select_features(np.ones((5, 2)), ['c1', 'c2'])


class TestDatasetFit(unittest.TestCase):

    def _dataset(self, n=80):
        rng = np.random.default_rng(5)
        rows = []
        for i in range(n):
            v1, v6 = rng.uniform(0.9, 1.1, size=2)
            features = np.array([v1, v6, 2.0 * v6])
            di = 0.95 + 0.4 * max(0.0, v1 - 1.0) - 0.1 * max(0.0, 0.95 - v6)
            rows.append(DatasetRow(
                index=i, demand_mw=300.0, sg_share=0.3, gfm_share=0.5, u=np.zeros(5),
                features=features, di=di, stable=di < 1.0, feasible=True,
            ))
        return Dataset(feature_names=['V1', 'V6', 'V6x2'], control_labels=[], rows=rows)

    def test_train_test_split(self):
        train, test = train_test_split(50, 0.2, seed=3)
        self.assertEqual(len(test), 10)
        self.assertEqual(len(train), 40)
        npt.assert_array_equal(np.sort(np.concatenate([train, test])), np.arange(50))
        again = train_test_split(50, 0.2, seed=3)
        npt.assert_array_equal(again[1], test)
        with self.assertRaises(MarsModelError):
            train_test_split(50, 1.0)

    def test_fit_dataset(self):
        result = fit_dataset(self._dataset(), seed=1)
        self.assertEqual(result.features, ['V1', 'V6'])
        self.assertEqual(result.n_train + result.n_test, 80)
        self.assertGreater(result.train_r2, 0.999)
        self.assertGreater(result.test_r2, 0.99)
        self.assertEqual(result.model.feature_names, ('V1', 'V6'))

    def test_candidate_restriction(self):
        result = fit_dataset(self._dataset(), candidates=['V1'])
        self.assertEqual(result.features, ['V1'])
        with self.assertRaises(MarsModelError):
            fit_dataset(self._dataset(), candidates=['V9'])


class TestModelValidation(unittest.TestCase):

    def test_inverted_training_range(self):
        model = MarsModel(
            intercept=1.0,
            terms=(HingeTerm(0, 0.5, HingeDirection.PLUS, 1.0),),
            feature_names=('x',),
            training_ranges=((1.0, 0.0),),
        )
        self.assertFalse(model.validate().is_valid)


if __name__ == '__main__':
    unittest.main()
