#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
tools module
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import sys
import os
import shlex
import subprocess
import numpy as np
try:
    import opt_einsum as oe
    OE_AVAILABLE = True
except ImportError:
    OE_AVAILABLE = False
from subprocess import PIPE
from typing import Dict, List, Optional, TextIO, Union

from .core import ExternalError, IoError

# default timeout (in seconds) of external commands
EXT_TIMEOUT = 600.
# git runs with a neutral locale
GIT_ENV = ('SYSTEMROOT', 'PATH', 'HOME')


class Tee(object):
        """
        this class copies everything printed during a sweep into the run log (<out>/semwire.log);
        installing it replaces sys.stdout until close() hands the terminal back
        """
        __slots__ = ('terminal', 'log', 'echo')

        def __init__(self, path: str, echo: bool = True) -> None:
                self.terminal: TextIO = sys.stdout
                try:
                    self.log = open(path, 'a', encoding='utf-8')
                except OSError as err:
                    raise IoError(f'cannot open run log {path}: {err}') from err
                self.echo = echo

        def install(self) -> 'Tee':
                sys.stdout = self
                return self

        def write(self, message: str) -> int:
                self.log.write(message)
                if self.echo:
                    self.terminal.write(message)
                return len(message)

        def flush(self) -> None:
                self.log.flush()
                if self.echo:
                    self.terminal.flush()

        def close(self) -> None:
                if not self.log.closed:
                    self.log.close()
                if sys.stdout is self:
                    sys.stdout = self.terminal

        def __enter__(self) -> 'Tee':
                return self.install()

        def __exit__(self, *exc: object) -> None:
                self.close()


def git_version(cwd: Optional[str] = None) -> str:
        """
        this function returns `git describe` of the source tree (e.g. 3f2a1c9-dirty), or 'Unknown'
        outside a checkout
        """
        env = {k: os.environ[k] for k in GIT_ENV if k in os.environ}
        env.update(LANGUAGE='C', LANG='C', LC_ALL='C')
        try:
            proc = subprocess.run(['git', 'describe', '--always', '--dirty'], stdout=PIPE, stderr=PIPE, env=env, \
                                  cwd=cwd or os.path.dirname(os.path.abspath(__file__)), timeout=10.)
        except (OSError, subprocess.TimeoutExpired):
            return 'Unknown'
        if proc.returncode != 0:
            return 'Unknown'
        return proc.stdout.decode('ascii', 'replace').strip() or 'Unknown'


def contract(eqn: str, *tensors: np.ndarray) -> np.ndarray:
        """
        interface to optimized einsum operation
        """
        if OE_AVAILABLE:
            return oe.contract(eqn, *tensors)
        else:
            return np.einsum(eqn, *tensors, optimize=True)


def run_external(template: str, fields: Dict[str, str], timeout: Union[float, None] = EXT_TIMEOUT) -> None:
        """
        this function runs an external command built from a template with {placeholders}
        """
        # substitute quoted paths into the template
        try:
            cmd: Union[str, List[str]] = shlex.split(template.format(**{k: shlex.quote(str(v)) for k, v in fields.items()}))
        except (KeyError, IndexError, ValueError) as err:
            raise ExternalError(f'invalid command template: {template!r} ({err})') from err
        if not cmd:
            raise ExternalError('empty command template')
        # run command
        try:
            proc = subprocess.run(cmd, stdout=PIPE, stderr=PIPE, timeout=timeout)
        except subprocess.TimeoutExpired as err:
            raise ExternalError(f'external command timed out after {timeout} s: {cmd[0]}') from err
        except OSError as err:
            raise ExternalError(f'external command could not be started: {cmd[0]} ({err})') from err
        if proc.returncode != 0:
            raise ExternalError(f'external command exited with status {proc.returncode}: ' \
                                f'{proc.stderr.decode("utf-8", "replace").strip()}')
