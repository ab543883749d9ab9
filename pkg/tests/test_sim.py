import math
import os
import tempfile
import unittest

import numpy as np

from pcfec.decoders import DecoderConfig
from pcfec.modem import bundled_constellation
from pcfec.sim import (CSV_COLUMNS, ConfigError, FrameSeeds, SweepConfig, SweepResult,
                       SweepRow, emit_csv, pre_fec_at_post_fec, read_csv, run_frame,
                       run_sweep, snr_at_ber, sweep_delta, wilson_interval)


DEFAULT_CONFIG = os.path.join(os.path.dirname(__file__), '..', 'configs', 'default.json')
STAR = bundled_constellation('pm8qam_star')
ALL_DECODERS = ('ibdd', 'sabm', 'sabm-sr', 'mf-ibdd', 'tpd')


def temp_path(suffix: str) -> str:
    fd, path = tempfile.mkstemp(suffix=suffix)
    os.close(fd)
    return path


def row(snr, decoder, pre, post, frames=10):
    return SweepRow(snr, decoder, 'pm8qam_star', frames, 0, pre, 0, post, 0.0, 1.0)


class SweepConfigTestCase(unittest.TestCase):
    def test_default_file(self):
        cfg = SweepConfig.from_json(DEFAULT_CONFIG)
        self.assertEqual(cfg.decoders, ALL_DECODERS)
        self.assertEqual(cfg.decoder_cfg, DecoderConfig())
        self.assertEqual(SweepConfig.from_dict(cfg.to_dict()), cfg)

    def test_default_grid_sits_on_the_waterfall(self):
        # The middle SNR of the default sweep must give star-8QAM a pre-FEC
        # BER around 1e-2, where iBDD turns over.
        cfg = SweepConfig.from_json(DEFAULT_CONFIG)
        snr = cfg.snr_points[len(cfg.snr_points) // 2]
        result = run_frame(snr, ('ibdd',), FrameSeeds.derive(cfg.master_seed, 0, 0),
                           STAR, cfg.decoder_cfg)
        pre_fec_ber = result.pre_fec_errors / result.pre_fec_bits
        self.assertGreater(pre_fec_ber, 5e-3)
        self.assertLess(pre_fec_ber, 2e-2)

    def test_invalid(self):
        for bad in ({'snr_points': []},
                    {'snr_points': [5.0], 'max_frames': 0},
                    {'snr_points': [5.0], 'decoders': ['bcjr']},
                    {'snr_points': [5.0], 'decoders': ['ibdd', 'ibdd']},
                    {'snr_points': [5.0], 'master_seed': -1},
                    {'snr_points': [5.0], 'workers': 0},
                    {'snr_points': [5.0], 'colour': 'red'},
                    {'snr_points': [5.0], 'decoder_cfg': {'m': 11}},
                    {'max_frames': 3}):
            with self.assertRaises(ConfigError, msg=bad):
                SweepConfig.from_dict(bad)

    def test_unreadable_file(self):
        with self.assertRaises(ConfigError):
            SweepConfig.from_json('/nonexistent/sweep.json')
        path = temp_path('.json')
        with open(path, 'w') as f:
            f.write('[1, 2]')
        with self.assertRaises(ConfigError):
            SweepConfig.from_json(path)


class FrameTestCase(unittest.TestCase):
    def test_seeds_are_counter_based(self):
        a = FrameSeeds.derive(1, 0, 5)
        b = FrameSeeds.derive(1, 0, 5)
        c = FrameSeeds.derive(1, 1, 5)
        draw = lambda s: np.random.default_rng(s.noise).random(4)  # noqa: E731
        np.testing.assert_array_equal(draw(a), draw(b))
        self.assertFalse(np.array_equal(draw(a), draw(c)))
        self.assertFalse(np.array_equal(draw(a), np.random.default_rng(a.info).random(4)))

    def test_noiseless_frame_is_error_free(self):
        result = run_frame(math.inf, ALL_DECODERS, FrameSeeds.derive(0, 0, 0), STAR,
                           DecoderConfig())
        self.assertEqual(result.pre_fec_errors, 0)
        self.assertEqual((result.pre_fec_bits, result.info_bits), (65536, 57121))
        self.assertEqual(result.post_fec_errors, {name: 0 for name in ALL_DECODERS})
        self.assertTrue(all(result.converged.values()))

    def test_deterministic(self):
        args = (6.0, ('ibdd', 'sabm'), FrameSeeds.derive(3, 0, 1), STAR, DecoderConfig())
        self.assertEqual(run_frame(*args), run_frame(*args))

    def test_genie_never_does_worse_on_noisy_frames(self):
        for frame in range(3):
            result = run_frame(6.0, ('ibdd', 'mf-ibdd'), FrameSeeds.derive(9, 0, frame),
                               STAR, DecoderConfig())
            self.assertGreater(result.pre_fec_errors, 0)
            if result.stats['mf-ibdd'].genie_vetoes == 0:
                self.assertEqual(result.post_fec_errors['mf-ibdd'],
                                 result.post_fec_errors['ibdd'])


class SweepTestCase(unittest.TestCase):
    def test_high_snr_runs_every_frame(self):
        cfg = SweepConfig((20.0,), max_frames=2, batch_frames=1, decoders=ALL_DECODERS)
        result = run_sweep(cfg)
        self.assertEqual(len(result.rows), 5)
        for r in result.rows:
            self.assertEqual((r.frames, r.post_fec_errors, r.post_fec_ber), (2, 0, 0.0))
            self.assertEqual(r.constellation, 'pm8qam_star')
            self.assertEqual(r.ci_low, 0.0)
            self.assertGreater(r.ci_high, 0.0)

    def test_decoders_share_the_channel(self):
        cfg = SweepConfig((5.5, 6.0), max_frames=2, decoders=('ibdd', 'sabm'), master_seed=4)
        result = run_sweep(cfg)
        for snr in cfg.snr_points:
            a, b = result.row(snr, 'ibdd'), result.row(snr, 'sabm')
            self.assertGreater(a.pre_fec_errors, 0)
            self.assertEqual((a.frames, a.pre_fec_errors), (b.frames, b.pre_fec_errors))
            self.assertEqual(a.pre_fec_ber, a.pre_fec_errors / (a.frames * 65536))
            self.assertEqual(a.post_fec_ber, a.post_fec_errors / (a.frames * 57121))
        self.assertGreater(result.stats[(6.0, 'sabm')].bdd_calls, 0)

    def test_stops_once_every_decoder_has_enough_errors(self):
        cfg = SweepConfig((6.0,), max_frames=10, batch_frames=2, min_bit_errors=0,
                          decoders=('ibdd',))
        self.assertEqual(run_sweep(cfg).rows[0].frames, 2)

    def test_worker_count_does_not_change_results(self):
        cfg = SweepConfig((6.0,), max_frames=4, batch_frames=2, decoders=('ibdd', 'sabm'),
                          master_seed=8)
        serial = run_sweep(cfg)
        parallel = run_sweep(cfg.replace(workers=2))
        self.assertEqual(serial, parallel)
        self.assertEqual(run_sweep(cfg), serial)

    def test_sweep_delta(self):
        cfg = SweepConfig((20.0,), max_frames=1)
        table = sweep_delta(cfg, 6.0, [2.0, 4.0], 'sabm')
        self.assertEqual([delta for delta, _ in table], [2.0, 4.0])
        self.assertTrue(all(r.decoder == 'sabm' and r.snr_db == 6.0 for _, r in table))
        # Same frames for every threshold.
        self.assertEqual(table[0][1].pre_fec_errors, table[1][1].pre_fec_errors)
        with self.assertRaises(ConfigError):
            sweep_delta(cfg, 6.0, [-1.0])


class CsvTestCase(unittest.TestCase):
    def test_empty_sweep_is_header_only(self):
        path = temp_path('.csv')
        emit_csv(SweepResult(), path)
        with open(path) as f:
            self.assertEqual(f.read().splitlines(), [','.join(CSV_COLUMNS)])
        self.assertEqual(read_csv(path), SweepResult())

    def test_round_trip(self):
        result = SweepResult([
            SweepRow(6.25, 'sabm-sr', 'pm8qam_star', 12, 7000, 7000 / (12 * 65536),
                     3, 3 / (12 * 57121), *wilson_interval(3, 12 * 57121)),
            SweepRow(math.inf, 'tpd', 'pm8qam_star', 1, 0, 0.0, 0, 0.0, 0.0, 1e-4),
        ])
        path = temp_path('.csv')
        emit_csv(result, path)
        with open(path) as f:
            lines = f.read().splitlines()
        self.assertEqual(len(CSV_COLUMNS), 10)
        self.assertTrue(all(len(line.split(',')) == 10 for line in lines))
        self.assertEqual(read_csv(path), result)

    def test_rejects_foreign_columns(self):
        path = temp_path('.csv')
        with open(path, 'w') as f:
            f.write('snr,ber\n1,2\n')
        with self.assertRaises(ValueError):
            read_csv(path)


class AnalysisTestCase(unittest.TestCase):
    def test_wilson(self):
        self.assertEqual(wilson_interval(0, 0), (0.0, 1.0))
        low, high = wilson_interval(0, 1000)
        self.assertEqual(low, 0.0)
        self.assertGreater(high, 0.0)
        low, high = wilson_interval(100, 1000)
        self.assertLess(low, 0.1)
        self.assertGreater(high, 0.1)

    def test_interpolation(self):
        result = SweepResult([row(7.0, 'ibdd', 1e-3, 1e-5), row(6.0, 'ibdd', 1e-2, 1e-3),
                              row(8.0, 'ibdd', 1e-4, 0.0), row(6.0, 'sabm', 1e-2, 1e-6)])
        self.assertAlmostEqual(snr_at_ber(result, 'ibdd', 1e-4), 6.5)
        self.assertAlmostEqual(math.log10(pre_fec_at_post_fec(result, 'ibdd', 1e-4)), -2.5)
        self.assertIsNone(snr_at_ber(result, 'ibdd', 1e-7))
        self.assertIsNone(snr_at_ber(result, 'sabm', 1e-4))


if __name__ == '__main__':
    unittest.main()
