"""
Tests for the command-line interface.
"""

import logging
import unittest
from unittest.mock import Mock, patch

import yaml

from gridgenius.cli import main_cli
from gridgenius.cli.main_cli import build_parser, main
from tests.test_base import GridGeniusTestBase


class TestParser(unittest.TestCase):

    def setUp(self):
        self.parser = build_parser()

    def test_global_options(self):
        args = self.parser.parse_args(['--seed', '3', '--out', 'res', 'run-ofo', '--cases', 'low', '--sssc'])
        self.assertEqual(args.seed, 3)
        self.assertEqual(args.out, 'res')
        self.assertEqual(args.command, 'run-ofo')
        self.assertEqual(args.cases, ['low'])
        self.assertTrue(args.sssc)

    def test_opf_modes(self):
        self.assertEqual(self.parser.parse_args(['run-opf']).mode, ['mars', 'plain', 'v1cap'])
        self.assertEqual(self.parser.parse_args(['run-opf', '--mode', 'v1cap']).mode, ['v1cap'])

    def test_dataset_and_model_out_files(self):
        args = self.parser.parse_args(['--out', 'res', 'gen-dataset', '--plan', 'p.yaml', '--out', 'd.csv'])
        self.assertEqual(args.out, 'res')
        self.assertEqual(args.plan, 'p.yaml')
        self.assertEqual(args.dataset, 'd.csv')
        args = self.parser.parse_args(['fit', '--dataset', 'd.csv', '--config', 'c.yaml', '--out', 'm.yaml'])
        self.assertEqual(args.model, 'm.yaml')
        self.assertEqual(args.sub_config, 'c.yaml')
        self.assertIsNone(args.out)

    def test_run_opf_scenario_file(self):
        args = self.parser.parse_args(['run-opf', '--scenario', 's.yaml', '--mode', 'plain', '--out', 'dir'])
        self.assertEqual(args.scenario, 's.yaml')
        self.assertEqual(args.mode, ['plain'])
        self.assertEqual(args.run_out, 'dir')

    def test_rejected_arguments(self):
        for argv in (['run-ofo', '--sssc', '--plain'], [], ['run-opf', '--mode', 'exact']):
            with self.subTest(argv=argv):
                with patch('sys.stderr'):
                    with self.assertRaises(SystemExit):
                        self.parser.parse_args(argv)


class TestMain(GridGeniusTestBase):

    def setUp(self):
        super().setUp()
        self.config_path = self.write_config()

    def tearDown(self):
        root = logging.getLogger()
        for handler in root.handlers[:]:
            root.removeHandler(handler)
            handler.close()
        super().tearDown()

    def write_config(self, **extra):
        data = {
            'output_directory': str(self.output_dir),
            'logging': {'log_to_file': False, 'level': 'WARNING'},
            'controller': {'max_iter': 2, 'sqp_max_iter': 3},
            'scenarios': [{'name': 'medium', 'realized_demand_mw': 318.55}],
        }
        data.update(extra)
        path = self.temp_dir / 'config.yaml'
        path.write_text(yaml.safe_dump(data), encoding='utf-8')
        return path

    def test_missing_config(self):
        self.assertEqual(main(['--config', str(self.temp_dir / 'none.yaml'), 'compare']), 1)

    def test_invalid_config(self):
        path = self.write_config(controller={'theta': 2.0})
        self.assertEqual(main(['--config', str(path), 'compare']), 1)

    def test_compare_without_runs(self):
        self.assertEqual(main(['--config', str(self.config_path), 'compare']), 1)

    def test_run_opf(self):
        code = main(['--config', str(self.config_path), 'run-opf', '--mode', 'v1cap'])
        self.assertIn(code, (0, 1))
        self.assert_file_exists(self.output_dir / 'medium_opf_v1cap' / 'report.json')

    def test_run_then_compare(self):
        self.assertEqual(main(['--config', str(self.config_path), 'run-ofo', '--plain']), 1)
        self.assertEqual(main(['--config', str(self.config_path), 'compare']), 1)
        self.assert_file_exists(self.output_dir / 'comparison.csv')
        self.assert_file_exists(self.output_dir / 'comparison.md')

    def test_out_override(self):
        other = self.temp_dir / 'other'
        main(['--config', str(self.config_path), '--out', str(other), 'run-ofo', '--plain'])
        self.assert_file_exists(other / 'medium_ofo' / 'report.json')

    def test_run_opf_scenario_file(self):
        scenario = self.temp_dir / 'scenario.yaml'
        scenario.write_text(yaml.safe_dump({'name': 'shoulder', 'realized_demand_mw': 400.0}), encoding='utf-8')
        run_dir = self.temp_dir / 'runs'
        code = main(['--config', str(self.config_path), 'run-opf', '--scenario', str(scenario),
                     '--mode', 'v1cap', '--out', str(run_dir)])
        self.assertIn(code, (0, 1))
        self.assert_file_exists(run_dir / 'shoulder_opf_v1cap' / 'report.json')
        self.assertFalse((self.output_dir / 'medium_opf_v1cap').exists())

    def test_bad_scenario_file(self):
        scenario = self.temp_dir / 'scenario.yaml'
        scenario.write_text(yaml.safe_dump({'name': 'x', 'demand': 1.0}), encoding='utf-8')
        self.assertEqual(main(['--config', str(self.config_path), 'run-opf', '--scenario', str(scenario)]), 1)

    def test_gen_dataset_out_file(self):
        plan = self.temp_dir / 'plan.yaml'
        plan.write_text(yaml.safe_dump({'n_points': 6, 'boundary_densify_fraction': 0.0}), encoding='utf-8')
        target = self.temp_dir / 'data' / 'points.csv'
        code = main(['--config', str(self.config_path), 'gen-dataset', '--plan', str(plan), '--out', str(target)])
        self.assertEqual(code, 0)
        self.assert_file_exists(target)
        self.assertFalse((self.output_dir / 'dataset.csv').exists())

    def test_unexpected_error(self):
        failing = Mock(side_effect=RuntimeError('boom'))
        with patch.dict(main_cli.COMMANDS, {'compare': failing}):
            self.assertEqual(main(['--config', str(self.config_path), 'compare']), 1)
        failing.assert_called_once()


if __name__ == '__main__':
    unittest.main()
