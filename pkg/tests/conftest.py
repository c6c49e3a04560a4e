import numpy as np
import pytest

from bilevel_ggm.linalg import SubjectData


def random_pd(rng, p, cond=10.0):
    """Random symmetric PD matrix with eigenvalues in [1, cond]."""
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    vals = rng.uniform(1.0, cond, size=p)
    A = (Q * vals) @ Q.T
    return (A + A.T) / 2


def random_subjects(rng, K, p, n):
    return [SubjectData(rng.standard_normal((n, p)) @ np.linalg.cholesky(random_pd(rng, p, 3.0)).T)
            for _ in range(K)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
