"""Monte Carlo acceptance checks.

These take tens of minutes, so they only run with PCFEC_SLOW_TESTS=1:

    PCFEC_SLOW_TESTS=1 python3 -m tests.test_acceptance

The 4D-64PRS comparison also needs a coordinate file, either
pcfec/data/4d64prs.json or the path in PCFEC_4D64PRS.
"""

import os
import unittest

from pcfec.decoders import DecoderConfig
from pcfec.modem import DATA_DIR, load_constellation
from pcfec.sim import SweepConfig, pre_fec_at_post_fec, run_sweep, snr_at_ber, sweep_delta
from pcfec.utils import frange


SLOW = os.environ.get('PCFEC_SLOW_TESTS') == '1'
WORKERS = int(os.environ.get('PCFEC_WORKERS', os.cpu_count() or 1))


def prs_file():
    path = os.environ.get('PCFEC_4D64PRS', os.path.join(DATA_DIR, '4d64prs.json'))
    return path if os.path.exists(path) else None


@unittest.skipUnless(SLOW, "set PCFEC_SLOW_TESTS=1 to run Monte Carlo acceptance tests")
class DecoderOrderingTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        # Locate the iBDD waterfall first with a coarse, cheap sweep.
        coarse = run_sweep(SweepConfig(tuple(frange(10.8, 12.4, 0.1)), max_frames=20,
                                       min_bit_errors=200, decoders=('ibdd',),
                                       master_seed=101, workers=WORKERS))
        in_range = [r for r in coarse.rows if 1e-4 <= r.post_fec_ber <= 1e-3]
        assert in_range, "no SNR in the coarse grid puts iBDD in [1e-4, 1e-3]"
        cls.snr = in_range[len(in_range) // 2].snr_db

        cls.result = run_sweep(SweepConfig(
            (cls.snr,), max_frames=400, min_bit_errors=100,
            decoders=('ibdd', 'sabm', 'sabm-sr', 'mf-ibdd', 'tpd'),
            master_seed=202, workers=WORKERS))

    def assertNotWorse(self, better, worse):
        a = self.result.row(self.snr, better)
        b = self.result.row(self.snr, worse)
        self.assertLessEqual(a.post_fec_ber, b.ci_high,
                             "{} ({:.3e}) vs {} ({:.3e}) at {} dB".format(
                                 better, a.post_fec_ber, worse, b.post_fec_ber, self.snr))

    def test_enough_errors(self):
        r = self.result.row(self.snr, 'ibdd')
        self.assertGreaterEqual(r.post_fec_errors, 100)

    def test_ordering(self):
        self.assertNotWorse('mf-ibdd', 'ibdd')
        self.assertNotWorse('sabm', 'ibdd')
        self.assertNotWorse('sabm-sr', 'sabm')
        self.assertNotWorse('tpd', 'sabm-sr')

    def test_mechanisms_fire(self):
        self.assertGreater(self.result.stats[(self.snr, 'sabm')].miscorrections_detected, 0)
        self.assertGreater(self.result.stats[(self.snr, 'mf-ibdd')].genie_vetoes, 0)


@unittest.skipUnless(SLOW, "set PCFEC_SLOW_TESTS=1 to run Monte Carlo acceptance tests")
class WaterfallTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.result = run_sweep(SweepConfig(
            tuple(frange(10.6, 12.2, 0.1)), max_frames=300, min_bit_errors=100,
            decoders=('ibdd', 'sabm-sr'), master_seed=303, workers=WORKERS))

    def test_gain_of_scaled_reliabilities(self):
        ibdd = snr_at_ber(self.result, 'ibdd', 1e-4)
        sabm_sr = snr_at_ber(self.result, 'sabm-sr', 1e-4)
        self.assertIsNotNone(ibdd)
        self.assertIsNotNone(sabm_sr)
        self.assertGreaterEqual(ibdd - sabm_sr, 0.15)
        self.assertLessEqual(ibdd - sabm_sr, 1.0)

    def test_ibdd_threshold(self):
        pre_fec = pre_fec_at_post_fec(self.result, 'ibdd', 1e-4)
        self.assertIsNotNone(pre_fec)
        self.assertGreaterEqual(pre_fec, 6e-3)
        self.assertLessEqual(pre_fec, 1.2e-2)


@unittest.skipUnless(SLOW, "set PCFEC_SLOW_TESTS=1 to run Monte Carlo acceptance tests")
class MarkingThresholdTestCase(unittest.TestCase):
    def test_default_delta_is_the_best_of_the_sweep(self):
        default = DecoderConfig().delta
        cfg = SweepConfig((11.3,), max_frames=24, min_bit_errors=10 ** 9,
                          decoders=('sabm',), master_seed=505, workers=WORKERS)
        table = dict(sweep_delta(cfg, 11.3, [3.0, default, 12.0], 'sabm'))
        for delta, r in table.items():
            self.assertLessEqual(table[default].post_fec_errors, r.post_fec_errors,
                                 "delta {} beats the default {}".format(delta, default))


@unittest.skipUnless(SLOW, "set PCFEC_SLOW_TESTS=1 to run Monte Carlo acceptance tests")
class FourDimensionalFormatTestCase(unittest.TestCase):
    def test_prs_beats_star_before_decoding(self):
        path = prs_file()
        if path is None:
            self.skipTest("no 4D-64PRS coordinate file; put one at pcfec/data/4d64prs.json "
                          "or point PCFEC_4D64PRS at it")
        prs = load_constellation(path)
        self.assertTrue(prs.constant_modulus)
        star_cfg = SweepConfig((11.4,), max_frames=20, min_bit_errors=0, decoders=('ibdd',),
                               master_seed=404, workers=WORKERS)
        star = run_sweep(star_cfg).rows[0]
        other = run_sweep(star_cfg.replace(constellation=path)).rows[0]
        self.assertLess(other.pre_fec_ber, star.pre_fec_ber)


if __name__ == '__main__':
    unittest.main()
