"""The two-to-one cover S^3 = SU(2) -> SO(3) and the Z_4 lift of the antipodal map.

Points of S^3 are pairs (z1, z2) of complex numbers with |z1|^2 + |z2|^2 = 1,
identified with U = [[z1, z2], [-conj(z2), conj(z1)]] in SU(2).  A rotation
is the matrix of M -> U* M U on traceless Hermitian matrices written in the
Pauli basis.  That is a right action, so the product rule reads
cover_pi(x * y) == cover_pi(y) @ cover_pi(x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

_FLIP = np.diag([-1.0, -1.0, 1.0])


def antipodal_frame(R) -> np.ndarray:
    """[q, u, q x u] -> [-q, -u, q x u]: negate the first two columns."""
    return np.asarray(R) @ _FLIP


@dataclass(frozen=True)
class SpherePoint3:
    z1: complex
    z2: complex

    def __post_init__(self):
        r = np.sqrt(abs(self.z1) ** 2 + abs(self.z2) ** 2)
        if r == 0:
            raise ValueError("(0, 0) is not on S^3")
        object.__setattr__(self, "z1", complex(self.z1) / r)
        object.__setattr__(self, "z2", complex(self.z2) / r)

    def su2(self) -> np.ndarray:
        z1, z2 = self.z1, self.z2
        return np.array([[z1, z2], [-np.conj(z2), np.conj(z1)]])

    @classmethod
    def from_su2(cls, U) -> "SpherePoint3":
        return cls(U[0, 0], U[0, 1])

    def __neg__(self):
        return SpherePoint3(-self.z1, -self.z2)

    def __mul__(self, other: "SpherePoint3") -> "SpherePoint3":
        return SpherePoint3.from_su2(self.su2() @ other.su2())

    def as_array(self) -> np.ndarray:
        return np.array([self.z1, self.z2])


@dataclass(frozen=True)
class TracelessHermitian:
    a: float
    b: float
    c: float

    def matrix(self) -> np.ndarray:
        return np.tensordot([self.a, self.b, self.c], PAULI, axes=1)

    @classmethod
    def from_matrix(cls, M, atol: float = 1e-12) -> "TracelessHermitian":
        M = np.asarray(M)
        if abs(np.trace(M)) > atol or np.abs(M - M.conj().T).max() > atol:
            raise ValueError("matrix is not traceless Hermitian")
        return cls(M[0, 1].real, -M[0, 1].imag, M[0, 0].real)

    def norm(self) -> float:
        # sqrt(-det M) equals the Euclidean norm of (a, b, c)
        return float(np.sqrt(max(-np.linalg.det(self.matrix()).real, 0.0)))

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])


def cover_pi(x: SpherePoint3) -> np.ndarray:
    """Explicit rotation matrix of the double cover at (z1, z2)."""
    z1, z2 = x.z1, x.z2
    cz2 = np.conj(z2)
    return np.array([
        [(z1 ** 2 - cz2 ** 2).real, -(z1 ** 2 + cz2 ** 2).imag, 2 * (z1 * cz2).real],
        [(z1 ** 2 - cz2 ** 2).imag, (z1 ** 2 + cz2 ** 2).real, 2 * (z1 * cz2).imag],
        [-2 * (z1 * z2).real, 2 * (z1 * z2).imag, abs(z1) ** 2 - abs(z2) ** 2],
    ])


def conjugation_action(x: SpherePoint3, m: TracelessHermitian) -> TracelessHermitian:
    U = x.su2()
    return TracelessHermitian.from_matrix(U.conj().T @ m.matrix() @ U)


def z4_lift(x: SpherePoint3) -> SpherePoint3:
    return SpherePoint3(1j * x.z1, 1j * x.z2)


def preimages(R) -> tuple[SpherePoint3, SpherePoint3]:
    """The two points of S^3 over a rotation matrix, {z, -z}.

    Reads off z1^2, z2^2, z1 z2 and z1 conj(z2) from the entries and picks
    the branch by the largest candidate modulus, which keeps the division
    well conditioned near half turns.
    """
    R = np.asarray(R, dtype=float)
    # entries in terms of z1, z2
    s = 0.5 * (R[0, 0] + R[1, 1])  # Re z1^2
    t = 0.5 * (R[1, 0] - R[0, 1])  # Im z1^2
    z1sq = complex(s, t)
    abs1 = 0.5 * (1 + R[2, 2])  # |z1|^2
    abs2 = 0.5 * (1 - R[2, 2])  # |z2|^2
    if abs1 >= abs2:
        z1 = np.sqrt(z1sq)
        if abs(z1) == 0:
            z1 = complex(np.sqrt(abs1))
        z1 = z1 / abs(z1) * np.sqrt(abs1)
        # z1 conj(z2) = (R02 + i R12)/2  ->  z2 = conj((R02 + i R12) / (2 z1))
        z2 = np.conj(complex(R[0, 2], R[1, 2]) / (2 * z1))
    else:
        # conj(z2)^2 = ((R11 - R00) - i(R01 + R10)) / 2  from the first two columns
        cz2sq = complex(0.5 * (R[1, 1] - R[0, 0]), -0.5 * (R[0, 1] + R[1, 0]))
        cz2 = np.sqrt(cz2sq)
        if abs(cz2) == 0:
            cz2 = complex(np.sqrt(abs2))
        cz2 = cz2 / abs(cz2) * np.sqrt(abs2)
        z2 = np.conj(cz2)
        z1 = complex(R[0, 2], R[1, 2]) / (2 * cz2)
    z = SpherePoint3(z1, z2)
    return z, -z


def random_sphere_points(n: int, rng: np.random.Generator) -> list[SpherePoint3]:
    g = rng.normal(size=(n, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return [SpherePoint3(complex(a, b), complex(c, d)) for a, b, c, d in g]


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def rotation_residuals(R) -> tuple[float, float]:
    """(||R^T R - I||_max, |det R - 1|)."""
    R = np.asarray(R)
    return float(np.abs(R.T @ R - np.eye(3)).max()), float(abs(np.linalg.det(R) - 1))


def property_battery(samples: int = 1000, seed: int = 0) -> dict:
    """Worst-case residuals of every identity of the cover over random samples."""
    rng = np.random.default_rng(seed)
    xs = random_sphere_points(samples, rng)
    ys = random_sphere_points(samples, rng)
    worst = dict.fromkeys(
        ["identity", "orthogonality", "determinant", "two_to_one", "homomorphism",
         "conjugation", "norm", "z4_equivariance", "z4_order", "preimage"], 0.0)
    worst["identity"] = float(np.abs(cover_pi(SpherePoint3(1, 0)) - np.eye(3)).max())
    for x, y in zip(xs, ys):
        R = cover_pi(x)
        orth, det = rotation_residuals(R)
        worst["orthogonality"] = max(worst["orthogonality"], orth)
        worst["determinant"] = max(worst["determinant"], det)
        worst["two_to_one"] = max(worst["two_to_one"], float(np.abs(cover_pi(-x) - R).max()))
        worst["homomorphism"] = max(worst["homomorphism"],
                                    float(np.abs(cover_pi(x * y) - cover_pi(y) @ R).max()))
        m = TracelessHermitian(*rng.normal(size=3))
        conj = conjugation_action(x, m)
        worst["conjugation"] = max(worst["conjugation"], float(np.abs(conj.as_array() - R @ m.as_array()).max()))
        worst["norm"] = max(worst["norm"], abs(conj.norm() - m.norm()))
        worst["z4_equivariance"] = max(worst["z4_equivariance"],
                                       float(np.abs(cover_pi(z4_lift(x)) - antipodal_frame(R)).max()))
        x4 = z4_lift(z4_lift(z4_lift(z4_lift(x))))
        worst["z4_order"] = max(worst["z4_order"], float(np.abs(x4.as_array() - x.as_array()).max()))
        Rr = axis_angle_matrix(rng.normal(size=3), rng.uniform(0, np.pi))
        z, mz = preimages(Rr)
        worst["preimage"] = max(worst["preimage"], float(np.abs(cover_pi(z) - Rr).max()),
                                float(np.abs(cover_pi(mz) - Rr).max()))
    return worst
