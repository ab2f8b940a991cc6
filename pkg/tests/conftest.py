from pathlib import Path

import numpy as np
import pytest

from ratinterp.matpoly import MatrixPolynomial
from ratinterp.problem import InterpolationProblem
from ratinterp.structure import StructureSpec

DATA = Path(__file__).resolve().parent.parent / "data"

SIGMA_COEFF = np.array([[1.0, 0.3], [0.2, 0.3], [0.1, 0.4], [0.7, 0.2]])

# Reference solution (four decimals) for the pure covariance-extension data of example2().
REFERENCE_A = np.array([[0.9467, -0.1737], [0.3603, 0.3583], [-0.0445, 1.0925], [0.2147, 0.7364]])
REFERENCE_B = np.array([[-0.0533, 0.2263], [-0.3517, -0.2893], [-0.2445, 0.0925], [0.2406, -0.9739]])


def example_sigma(indices=(2, 2)) -> MatrixPolynomial:
    return MatrixPolynomial(StructureSpec(2, 2, tuple(indices)), SIGMA_COEFF, "Sigma")


def example1() -> InterpolationProblem:
    return InterpolationProblem.from_lists(
        2, [0.0, 0.5], [1, 2],
        [[0.5 * np.eye(2)], [np.array([[1.0, 0.0], [0.0, 0.4]]), np.array([[2.0, 0.1], [0.0, 0.1]])]],
    )


def example2() -> InterpolationProblem:
    C1 = np.array([[-0.5, 0.2], [-0.1, -0.5]])
    C2 = 2 * np.array([[0.1, -0.6], [0.1, -0.3]])
    return InterpolationProblem.from_lists(2, [0.0], [3], [[0.5 * np.eye(2), C1, C2 / 2]])


@pytest.fixture
def ex1():
    return example1()


@pytest.fixture
def ex2():
    return example2()


@pytest.fixture
def sigma():
    return example_sigma()
