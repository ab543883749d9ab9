import contextlib
import io
import unittest

from pcfec.utils import drain, frange


class UtilsTestCase(unittest.TestCase):
    def test_drain(self):
        err = io.StringIO()
        with contextlib.redirect_stderr(err):
            self.assertEqual(drain(iter(range(12)), progress=True, label="6.00 dB"), 12)
        self.assertEqual(err.getvalue(), "6.00 dB .........10..\n")
        self.assertEqual(drain([]), 0)

    def test_drain_stops_on_the_first_match(self):
        self.assertEqual(drain(range(10), stop=lambda x: x == 3), 4)
        self.assertEqual(drain(range(3), stop=lambda x: False), 3)

        pulled = []

        def producer():
            for i in range(10):
                pulled.append(i)
                yield i

        # The stop test sees state the producer updated before yielding,
        # and nothing past the stopping item is pulled.
        self.assertEqual(drain(producer(), stop=lambda _: len(pulled) >= 2), 2)
        self.assertEqual(pulled, [0, 1])

    def test_frange(self):
        self.assertEqual(frange(5.6, 6.0, 0.1), [5.6, 5.7, 5.8, 5.9, 6.0])
        self.assertEqual(frange(1.0, 0.0, 1.0), [])
        with self.assertRaises(ValueError):
            frange(0.0, 1.0, -0.5)


if __name__ == '__main__':
    unittest.main()
