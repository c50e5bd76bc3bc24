from __future__ import annotations

import gzip
import io
import os
import tempfile
import unittest

from snan.streams import iter_csv_dicts, open_text, open_text_stream, write_csv


class TestOpenTextLocal(unittest.TestCase):
    def test_local_plain_text(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "spikes.csv")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write("step,unit_id\n0,1\n2,3\n")

            with open_text(path) as handle:
                header = handle.readline()
                rows = list(handle)

        self.assertEqual(header, "step,unit_id\n")
        self.assertEqual(rows, ["0,1\n", "2,3\n"])

    def test_local_gzip_text(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "drive.csv.gz")
            content = "tick,active_inputs\n0,1 2\n"
            with gzip.open(path, "wb") as handle:
                handle.write(content.encode("utf-8"))

            with open_text(path) as handle:
                data = handle.read()

        self.assertEqual(data, content)

    def test_gzip_sniffed_from_stream(self):
        payload = gzip.compress(b"a,b\n1,2\n")
        with open_text_stream(io.BytesIO(payload)) as handle:
            self.assertEqual(handle.read(), "a,b\n1,2\n")

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            open_text("/nonexistent/spikes.csv")


class TestCsv(unittest.TestCase):
    def test_write_then_iterate(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_csv(os.path.join(tmpdir, "a", "b.csv"), ("x", "y"), [(1, 2), (3, 4)])
            rows = list(iter_csv_dicts(path, ("x", "y")))
        self.assertEqual(rows, [{"x": "1", "y": "2"}, {"x": "3", "y": "4"}])

    def test_header_mismatch(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_csv(os.path.join(tmpdir, "b.csv"), ("x", "y"), [])
            with self.assertRaises(ValueError):
                list(iter_csv_dicts(path, ("step", "unit_id")))

    def test_gzip_writes_are_reproducible(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "drive.csv.gz")
            write_csv(path, ("tick", "active_inputs"), [(0, "1 2")])
            with open(path, "rb") as handle:
                first = handle.read()
            write_csv(path, ("tick", "active_inputs"), [(0, "1 2")])
            with open(path, "rb") as handle:
                second = handle.read()
            self.assertEqual(first[:2], b"\x1f\x8b")
            self.assertEqual(first, second)
            self.assertEqual([r["tick"] for r in iter_csv_dicts(path, ("tick", "active_inputs"))], ["0"])

    def test_unwritable_path_is_named(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            blocker = os.path.join(tmpdir, "file")
            with open(blocker, "w", encoding="utf-8") as handle:
                handle.write("x")
            target = os.path.join(blocker, "out.csv")
            with self.assertRaises(OSError) as ctx:
                write_csv(target, ("x",), [])
            self.assertIn(target, str(ctx.exception))


if __name__ == "__main__":
    unittest.main()
