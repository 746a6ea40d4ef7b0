"""
Tests for configuration loading, validation and the logging utilities.
"""

from dataclasses import asdict, replace
import json
import logging
import unittest

import yaml

from gridgenius.logic.utilities.config_utils import (
    DEFAULT_CONFIG_PATH, ConfigError, ConfigManager, ConfigValidator, ControllerSettings,
    PipelineConfig, ScenarioSettings, apply_overrides, config_from_dict, get_config_manager,
    load_scenarios,
)
from gridgenius.logic.utilities.logging_utils import (
    LOG_FILE_NAME, LoggingConfigurator, OperationTimer, SessionLogger,
)
from tests.test_base import GridGeniusTestBase


class TestConfigLoading(GridGeniusTestBase):

    def setUp(self):
        super().setUp()
        self.manager = ConfigManager()

    def test_shipped_file_matches_defaults(self):
        shipped = asdict(self.manager.load(DEFAULT_CONFIG_PATH))
        defaults = asdict(PipelineConfig())
        self.assertAlmostEqual(shipped['controller'].pop('theta'), defaults['controller'].pop('theta'), places=12)
        self.assertEqual(shipped, defaults)

    def test_defaults_without_file(self):
        config = self.manager.load(None)
        self.assertEqual(config.seed, 42)
        self.assertEqual([s.name for s in config.scenarios], ['low', 'medium', 'high'])
        self.assertAlmostEqual(config.controller.theta, 1.0 - 1e-5)

    def test_partial_file_keeps_defaults(self):
        path = self.temp_dir / 'partial.yaml'
        path.write_text("seed: 7\ncontroller:\n  max_iter: 50\n", encoding='utf-8')
        config = self.manager.load(path)
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.controller.max_iter, 50)
        self.assertEqual(config.controller.sqp_max_iter, 200)
        self.assertEqual(len(config.scenarios), 3)

    def test_scenarios_replace_defaults(self):
        config = config_from_dict({'scenarios': [{'name': 'only', 'realized_demand_mw': 400.0}]})
        self.assertEqual([s.name for s in config.scenarios], ['only'])
        self.assertEqual(config.scenario('only').metric, [1.0, 1.0, 0.2, 0.2, 0.2])
        with self.assertRaises(ConfigError):
            config.scenario('medium')

    def test_scenario_file_forms(self):
        single = self.temp_dir / 'single.yaml'
        single.write_text(yaml.safe_dump({'name': 'peak', 'realized_demand_mw': 700.0}), encoding='utf-8')
        [peak] = load_scenarios(single)
        self.assertEqual(peak.name, 'peak')
        self.assertEqual(peak.realized_demand_mw, 700.0)
        self.assertEqual(peak.initial_u, ScenarioSettings().initial_u)

        listed = self.temp_dir / 'listed.yaml'
        listed.write_text(yaml.safe_dump({'scenarios': [{'name': 'a'}, {'name': 'b', 'alpha': 1e-3}]}),
                          encoding='utf-8')
        self.assertEqual([s.name for s in load_scenarios(listed)], ['a', 'b'])

        for content in ('[]\n', '{name: x, unknown: 1}\n', 'name: [unclosed\n'):
            with self.subTest(content=content):
                bad = self.temp_dir / 'bad.yaml'
                bad.write_text(content, encoding='utf-8')
                with self.assertRaises(ConfigError):
                    load_scenarios(bad)
        with self.assertRaises(ConfigError):
            load_scenarios(self.temp_dir / 'missing.yaml')

    def test_json_file(self):
        path = self.temp_dir / 'config.json'
        path.write_text(json.dumps({'output_directory': 'elsewhere'}), encoding='utf-8')
        self.assertEqual(self.manager.load(path).output_directory, 'elsewhere')

    def test_malformed_input(self):
        cases = {
            'unknown.yaml': "colour: blue\n",
            'section.yaml': "controller: 3\n",
            'key.yaml': "controller:\n  thetta: 0.9\n",
            'list.yaml': "scenarios: {name: x}\n",
            'syntax.yaml': "seed: [1, 2\n",
            'config.toml': "seed = 1\n",
        }
        for name, text in cases.items():
            path = self.temp_dir / name
            path.write_text(text, encoding='utf-8')
            with self.subTest(name=name):
                with self.assertRaises(ConfigError):
                    self.manager.load(path)
        with self.assertRaises(ConfigError):
            self.manager.load(self.temp_dir / 'missing.yaml')
        with self.assertRaises(ConfigError):
            config_from_dict([1, 2])

    def test_save_and_reload(self):
        config = replace(PipelineConfig(), seed=3, controller=ControllerSettings(max_iter=10))
        for suffix in ('yaml', 'json'):
            path = self.manager.save(config, self.temp_dir / f"saved.{suffix}")
            self.assertEqual(asdict(self.manager.load(path)), asdict(config))
        with self.assertRaises(ConfigError):
            self.manager.save(config, self.temp_dir / 'saved.txt')

    def test_overrides(self):
        config = PipelineConfig()
        self.assertIs(apply_overrides(config), config)
        changed = apply_overrides(config, seed=5, output_directory=self.temp_dir)
        self.assertEqual(changed.seed, 5)
        self.assertEqual(changed.output_directory, str(self.temp_dir))
        self.assertEqual(config.seed, 42)

    def test_global_manager(self):
        self.assertIs(get_config_manager(), get_config_manager())


class TestConfigValidator(unittest.TestCase):

    def setUp(self):
        self.validator = ConfigValidator()

    def test_defaults_are_valid(self):
        self.assertEqual(self.validator.validate(PipelineConfig()), [])

    def test_controller_errors(self):
        config = replace(PipelineConfig(), controller=ControllerSettings(theta=1.5, max_iter=0))
        errors = self.validator.validate(config)
        self.assertEqual(len(errors), 2)
        self.assertTrue(any('theta' in e for e in errors))

    def test_scenario_errors(self):
        bad = ScenarioSettings(name='x', metric=[1.0, 0.0], gamma={'ofo': 1.0})
        config = replace(PipelineConfig(), scenarios=[bad, ScenarioSettings(name='x')])
        errors = self.validator.validate(config)
        self.assertTrue(any('Duplicate' in e for e in errors))
        self.assertTrue(any('lengths differ' in e for e in errors))
        self.assertTrue(any('metric entries' in e for e in errors))
        self.assertTrue(any('gamma needs' in e for e in errors))

    def test_no_scenarios(self):
        errors = self.validator.validate(replace(PipelineConfig(), scenarios=[]))
        self.assertEqual(errors, ["At least one scenario is required"])

    def test_log_level(self):
        config = PipelineConfig()
        config.logging.level = 'LOUD'
        self.assertEqual(self.validator.validate(config), ["Invalid log level: LOUD"])


class TestLoggingUtils(GridGeniusTestBase):

    def tearDown(self):
        root = logging.getLogger()
        for handler in root.handlers[:]:
            root.removeHandler(handler)
            handler.close()
        super().tearDown()

    def test_session_records_stages(self):
        session = SessionLogger(self.temp_dir / 'logs', session_id='unit')
        with OperationTimer('fit', session, {'rows': 10}) as timer:
            pass
        self.assertIsNotNone(timer.duration_ms)
        with self.assertRaises(ValueError):
            with OperationTimer('run', session):
                raise ValueError('boom')
        session.artifact_written(self.temp_dir / 'model.yaml')
        session.end_session()

        summary = session.get_summary()
        self.assertEqual(summary['stages'], {'total': 2, 'successful': 1, 'failed': 1})
        self.assertEqual(summary['issues']['errors'], 1)
        self.assertEqual(summary['artifacts'], 1)
        data = json.loads(session.session_file.read_text(encoding='utf-8'))
        self.assertEqual(session.session_file.name, 'session_unit.json')
        failed = [e for e in data['entries'] if e['level'] == 'ERROR']
        self.assertIn('boom', failed[0]['error_details'])

    def test_file_logging(self):
        log_dir = self.temp_dir / 'logs'
        self.assertTrue(LoggingConfigurator().setup_application_logging('WARNING', True, log_dir))
        logging.getLogger('gridgenius.test').debug('written to file only')
        for handler in logging.getLogger().handlers:
            handler.flush()
        self.assert_file_contains(log_dir / LOG_FILE_NAME, 'written to file only')

    def test_bad_level(self):
        self.assertFalse(LoggingConfigurator().setup_application_logging('LOUD', False))


if __name__ == '__main__':
    unittest.main()
