import numpy as np

from ptspectra.ode import PotentialSpec
from ptspectra.oracle import hamiltonian_matrix, hermite_oracle, lowest_eigenvalues


def test_harmonic_exact():
    res = hermite_oracle(PotentialSpec.test_only([0.0, 1.0]), count=4, sizes=(60, 80, 100), scale=1.0)
    assert np.allclose(res.eigenvalues, [1, 3, 5, 7], atol=1e-10)


def test_matrix_is_complex_symmetric():
    h = hamiltonian_matrix(PotentialSpec.canonical(1), 40, 0.5)
    assert np.allclose(h, h.T, atol=1e-12)


def test_cubic_converges_in_basis_size(oracle):
    assert oracle.sizes[0] >= 400
    assert np.all(oracle.error_estimate < 1e-7 * np.abs(oracle.eigenvalues))
    # the basis sizes agree with each other far below the acceptance tolerance
    spread = np.abs(oracle.raw - oracle.raw[-1]).max(axis=0)
    assert np.all(spread < 1e-9 * np.abs(oracle.eigenvalues))


def test_cubic_oracle_real_and_increasing(oracle):
    ev = oracle.eigenvalues
    assert np.all(np.abs(ev.imag) < 1e-8 * np.abs(ev))
    assert np.all(np.diff(ev.real) > 0)


def test_lowest_eigenvalues_sorted():
    ev = lowest_eigenvalues(PotentialSpec.test_only([0.0, 1.0]), 50, 3, scale=1.0)
    assert np.allclose(ev, [1, 3, 5], atol=1e-10)
