#!/usr/bin/env python
# -*- coding: utf-8 -*

import io
import os
import sys
import shutil
import tempfile
import unittest
from contextlib import redirect_stdout
import numpy as np

import semwire
from semwire.tools import Tee, contract, run_external, git_version

TMP = tempfile.mkdtemp(prefix='semwire-tools-')


def tearDownModule():
    shutil.rmtree(TMP, ignore_errors=True)


class KnownValues(unittest.TestCase):
    def test_contract(self):
        a = np.arange(24.).reshape(2, 3, 4)
        w = np.array([.299, .587, .114, 0.])
        self.assertTrue(np.allclose(contract('hwc,c->hw', a, w), np.einsum('hwc,c->hw', a, w)))

    @unittest.skipUnless(shutil.which('cp') and shutil.which('false'), 'coreutils unavailable')
    def test_run_external(self):
        src = os.path.join(TMP, 'in file.txt')
        with open(src, 'w') as handle:
            handle.write('payload')
        dst = os.path.join(TMP, 'out file.txt')
        # paths with blanks are quoted
        run_external('cp {src} {dst}', {'src': src, 'dst': dst})
        with open(dst) as handle:
            self.assertEqual(handle.read(), 'payload')
        for template in ('false {src}', 'cp {src} {missing}', '', 'semwire-no-such-binary {src}'):
            with self.subTest(template=template):
                with self.assertRaises(semwire.ExternalError):
                    run_external(template, {'src': src})

    def test_tee(self):
        path = os.path.join(TMP, 'run.log')
        buf = io.StringIO()
        with redirect_stdout(buf):
            with Tee(path) as tee:
                self.assertIs(sys.stdout, tee)
                print('sweep info')
            self.assertIs(sys.stdout, buf)
            # quiet tees only write the log
            with Tee(path, echo=False):
                print('workers = 2')
        self.assertEqual(buf.getvalue(), 'sweep info\n')
        with open(path, encoding='utf-8') as handle:
            self.assertEqual(handle.read(), 'sweep info\nworkers = 2\n')
        with self.assertRaises(semwire.IoError):
            Tee(os.path.join(TMP, 'no-dir', 'run.log'))

    def test_git_version(self):
        self.assertIsInstance(git_version(), str)
        self.assertEqual(git_version(cwd=TMP), 'Unknown')

if __name__ == '__main__':
    print('test: tools')
    unittest.main()
