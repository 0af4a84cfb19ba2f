#!/usr/bin/env python
# -*- coding: utf-8 -*

import os
import shutil
import struct
import tempfile
import unittest
import numpy as np

import semwire
from semwire.container import Entry, PayloadContainer, Tags, KNOWN_TAGS, MAGIC, HEADER, write_container, \
                              read_container, make_meta, parse_meta

TMP = tempfile.mkdtemp(prefix='semwire-container-')

ENTRIES = [Entry(Tags.seg, b'\x01' * 17), Entry(Tags.edg, b'\x02' * 300), \
           Entry(Tags.cap, 'a street'.encode('utf-8')), Entry(Tags.met, make_meta(width=64, height=32))]


def tearDownModule():
    shutil.rmtree(TMP, ignore_errors=True)


class KnownValues(unittest.TestCase):
    def test_layout(self):
        data = write_container(ENTRIES[:1])
        self.assertEqual(data[:4], MAGIC)
        self.assertEqual(data[4:7], b'SEG')
        self.assertEqual(struct.unpack('<I', data[7:11])[0], 17)
        self.assertEqual(len(data), 4 + HEADER.size + 17)

    def test_round_trip(self):
        container = PayloadContainer(ENTRIES)
        data = container.to_bytes()
        self.assertEqual(container.total_bytes, len(data))
        self.assertEqual(PayloadContainer.from_bytes(data), container)
        self.assertEqual(container.tags, ['SEG', 'EDG', 'CAP', 'MET'])
        self.assertEqual(container.overhead, 4 + 4 * 7)
        self.assertEqual(container.entry_sizes()[Tags.edg], 300)
        path = os.path.join(TMP, 'payload.smc')
        self.assertEqual(container.to_file(path), os.path.getsize(path))
        self.assertEqual(PayloadContainer.from_file(path), container)

    def test_random_entries(self):
        rng = np.random.default_rng(2024)
        for trial in range(50):
            n = int(rng.integers(0, 7))
            entries = [Entry(KNOWN_TAGS[int(rng.integers(len(KNOWN_TAGS)))], \
                             rng.integers(0, 256, size=int(rng.integers(1, 500)), dtype=np.uint8).tobytes()) \
                       for _ in range(n)]
            with self.subTest(trial=trial):
                data = write_container(entries)
                self.assertEqual(len(data), len(MAGIC) + sum(HEADER.size + len(e.body) for e in entries))
                self.assertEqual(read_container(data), entries)
                self.assertEqual(write_container(read_container(data)), data)

    def test_unknown_tag(self):
        data = write_container(ENTRIES[:1]) + HEADER.pack(b'XYZ', 3) + b'abc'
        with self.assertLogs('semwire.container', level='WARNING'):
            entries = read_container(data)
        self.assertEqual(entries[1], Entry('XYZ', b'abc', True))
        # opaque entries survive a rewrite
        self.assertEqual(write_container(entries), data)
        with self.assertRaises(semwire.ContainerError):
            write_container([Entry('XYZ', b'abc')])

    def test_errors(self):
        data = PayloadContainer(ENTRIES).to_bytes()
        for name, bad in (('magic', b'SMC2' + data[4:]), ('header', data + b'SE'), \
                          ('body', data[:-1]), ('empty', MAGIC + HEADER.pack(b'CAP', 0)), \
                          ('ascii', MAGIC + HEADER.pack(b'\xff\xfeA', 1) + b'x')):
            with self.subTest(case=name):
                with self.assertRaises(semwire.ContainerError):
                    PayloadContainer.from_bytes(bad)
        with self.assertRaises(semwire.ContainerError):
            write_container([Entry(Tags.cap, b'')])
        with self.assertRaises(semwire.ContainerError):
            write_container([Entry('CA', b'x')])
        with self.assertRaises(semwire.ContainerError):
            PayloadContainer(ENTRIES[:2]).require(Tags.cap)
        with self.assertRaises(semwire.IoError):
            PayloadContainer.from_file(os.path.join(TMP, 'missing.smc'))

    def test_meta(self):
        body = make_meta(width=64, height=32, grid=[4, 8])
        self.assertEqual(body, b'{"grid":[4,8],"height":32,"width":64}')
        self.assertEqual(parse_meta(body), {'width': 64, 'height': 32, 'grid': [4, 8]})
        with self.assertRaises(semwire.ContainerError):
            parse_meta(b'[1, 2]')
        with self.assertRaises(semwire.ContainerError):
            parse_meta(b'{broken')

if __name__ == '__main__':
    print('test: container')
    unittest.main()
