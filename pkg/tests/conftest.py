import numpy as np
import pytest
import scipy.linalg as la

from luremor import StateSpace


def random_poles(rng, count, re_lo, re_hi, complex_frac=0.5):
    """Real parts uniform in [re_lo, re_hi]; roughly ``complex_frac`` of the
    poles come in conjugate pairs."""
    poles = []
    while len(poles) < count:
        re = rng.uniform(re_lo, re_hi)
        if count - len(poles) >= 2 and rng.random() < complex_frac:
            im = rng.uniform(0.3, 4.0)
            poles += [complex(re, im), complex(re, -im)]
        else:
            poles.append(complex(re, 0.0))
    return poles


def realize(rng, poles, m, l, cond=5.0):
    """Random real realization with the given spectrum.

    The modal basis is a random orthogonal matrix times a diagonal scaling
    with condition number ``cond``, so similarity stays well conditioned.
    """
    blocks = []
    i = 0
    while i < len(poles):
        p = poles[i]
        if p.imag != 0:
            blocks.append(np.array([[p.real, p.imag], [-p.imag, p.real]]))
            i += 2
        else:
            blocks.append(np.array([[p.real]]))
            i += 1
    J = la.block_diag(*blocks)
    n = J.shape[0]
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    D = np.diag(np.geomspace(1.0, cond, n)[rng.permutation(n)])
    V = Q @ D
    A = V @ J @ np.linalg.inv(V)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((l, n))
    return StateSpace(A, B, C)


def random_stable(rng, n, m=1, l=1, rate=0.0, re_range=(-6.0, -0.5)):
    """System with ``A + rate I`` Hurwitz."""
    lo, hi = re_range
    return realize(rng, random_poles(rng, n, lo - rate, hi - rate), m, l)


def random_mixed(rng, n, n_dom, m=1, l=1, rate=0.0):
    """``n_dom`` poles right of ``-rate`` and ``n - n_dom`` left of it, with
    a gap of at least 0.5 around the splitting line."""
    dom = random_poles(rng, n_dom, -rate + 0.5, -rate + 4.0) if n_dom else []
    rest = random_poles(rng, n - n_dom, -rate - 6.0, -rate - 0.5)
    return realize(rng, dom + rest, m, l)


def random_points(rng, count, scale=3.0):
    return scale * (rng.standard_normal(count) + 1j * rng.standard_normal(count))


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def grid_sup(sys, rate, num=1_000_000, lo=-4, hi=4):
    """Maximum of sigma_max(G(i w - rate)) on a log grid plus w = 0.

    Evaluated through the eigendecomposition of ``A``, independently of the
    library's Hessenberg-based frequency response.
    """
    lam, V = la.eig(sys.A)
    Bm = la.solve(V, sys.B.astype(complex))
    Cm = sys.C @ V
    scale = max(1.0, float(np.max(np.abs(lam + rate))))
    omega = np.concatenate([[0.0], scale * np.logspace(lo, hi, num)])
    best, w_best = 0.0, 0.0
    for start in range(0, omega.size, 50_000):
        w = omega[start:start + 50_000]
        R = 1.0 / (1j * w[:, None] - rate - lam[None, :])          # (N, n)
        G = np.einsum("ln,Nn,nm->Nlm", Cm, R, Bm)
        if G.shape[1] == 1 or G.shape[2] == 1:
            s = np.sqrt(np.sum(np.abs(G) ** 2, axis=(1, 2)))
        else:
            s = np.linalg.svd(G, compute_uv=False)[:, 0]
        k = int(np.argmax(s))
        if s[k] > best:
            best, w_best = float(s[k]), float(w[k])
    return best, w_best


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
