"""Shared pytest fixtures; the repo root goes on sys.path so tests import the flat modules."""
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from lattice import Box  # noqa: E402
from renewal import full_rank_kernel, geometric_kernel, three_atom_kernel  # noqa: E402


@pytest.fixture
def cube_box():
    """2x2x2 vertices, 12 edges."""
    return Box.from_sides((2, 2, 2))


@pytest.fixture
def strip_box():
    """[-1,2] x [-1,1] in d=2: 17 edges, 0 and u1 at shell distance 1."""
    return Box((-1, -1), (2, 1))


@pytest.fixture
def geometric():
    return geometric_kernel(2, 0.5)


@pytest.fixture
def three_atom():
    return three_atom_kernel(2, 0.4, 0.3)


@pytest.fixture
def full_rank_2d():
    return full_rank_kernel(2)


@pytest.fixture
def full_rank_3d():
    return full_rank_kernel(3)
