import contextlib
import io
import json
import os
import tempfile
import unittest

from pcfec import main
from pcfec.modem import DATA_DIR, bundled_constellation
from pcfec.sim import CSV_COLUMNS, ConfigError, read_csv


def temp_path(suffix: str) -> str:
    fd, path = tempfile.mkstemp(suffix=suffix)
    os.close(fd)
    return path


def write_json(d) -> str:
    path = temp_path('.json')
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(d, f)
    return path


def run(*argv: str):
    out = io.StringIO()
    with contextlib.redirect_stdout(out):
        status = main.main(['--quiet', *argv])
    return status, out.getvalue()


class RangeTestCase(unittest.TestCase):
    def test_ranges(self):
        self.assertEqual(main.parse_snr_range('6'), [6.0])
        self.assertEqual(main.parse_snr_range('6:7:0.25'), [6.0, 6.25, 6.5, 6.75, 7.0])
        self.assertEqual(main.parse_snr_range('1:2:0.1')[-1], 2.0)
        for bad in ('a:b:c', '1:2', '1:2:0', ''):
            with self.assertRaises(ConfigError, msg=bad):
                main.parse_snr_range(bad)


class CommandTestCase(unittest.TestCase):
    def test_validate_constellation(self):
        status, out = run('validate-constellation', os.path.join(DATA_DIR, 'pm8qam_star.json'))
        self.assertEqual(status, 0)
        self.assertIn('64 points', out)

        d = bundled_constellation('pm8qam_star').to_dict()
        d['points'] = d['points'][:63]
        self.assertEqual(run('validate-constellation', write_json(d))[0], 2)
        self.assertEqual(run('validate-constellation', '/nonexistent.json')[0], 1)

    def test_simulate(self):
        config = write_json({'snr_points': [5.0], 'max_frames': 1, 'decoders': ['tpd']})
        output = temp_path('.csv')
        status, _ = run('simulate', '--config', config, '--snr', '20:20.5:0.5',
                        '--decoder', 'ibdd', '--decoder', 'sabm-sr', '--output', output)
        self.assertEqual(status, 0)
        rows = read_csv(output).rows
        self.assertEqual([(r.snr_db, r.decoder) for r in rows],
                         [(20.0, 'ibdd'), (20.0, 'sabm-sr'), (20.5, 'ibdd'), (20.5, 'sabm-sr')])
        with open(output) as f:
            self.assertEqual(f.readline().strip(), ','.join(CSV_COLUMNS))

    def test_simulate_config_errors(self):
        output = temp_path('.csv')
        status, _ = run('simulate', '--config', '/nonexistent.json', '--output', output)
        self.assertEqual(status, 1)
        config = write_json({'snr_points': [5.0], 'max_frames': -3})
        self.assertEqual(run('simulate', '--config', config, '--output', output)[0], 1)
        config = write_json({'snr_points': [5.0], 'constellation': 'no_such_format'})
        self.assertEqual(run('simulate', '--config', config, '--output', output)[0], 2)

    def test_sweep_delta(self):
        config = write_json({'snr_points': [5.0], 'max_frames': 1})
        status, out = run('sweep-delta', '--config', config, '--snr', '20',
                          '--deltas', '2:3:1')
        self.assertEqual(status, 0)
        self.assertIn('best delta', out)
        self.assertEqual(run('sweep-delta', '--config', config, '--snr', '5:6:1')[0], 1)

    def test_bdd_selftest(self):
        status, out = run('bdd-selftest', '--census', '200')
        self.assertEqual(status, 0)
        self.assertIn('weight 1-2: 32896 patterns, 0 wrong', out)
        self.assertIn('weight 3: 200 samples, 200 failures', out)


if __name__ == '__main__':
    unittest.main()
