"""Small example fans used throughout the test-suite and the CLI."""

from __future__ import annotations

from .exactlin import LatticeWithAction
from .fan import GaloisFan

SWAP = ((0, 1), (1, 0))
REFLECT = ((1, 0), (0, -1))


def projective_plane() -> GaloisFan:
    """Split projective plane: rays e0=(-1,-1), e1=(1,0), e2=(0,1), trivial action."""
    lat = LatticeWithAction.standard(2)
    rays = ((-1, -1), (1, 0), (0, 1))
    return GaloisFan(lat, rays, ((0, 1), (1, 2), (0, 2)), boundary_rays=(0,), name="P2")


def projective_line() -> GaloisFan:
    lat = LatticeWithAction.standard(1)
    return GaloisFan(lat, ((-1,), (1,)), ((0,), (1,)), boundary_rays=(0,), name="P1")


def quadratic_severi_brauer() -> GaloisFan:
    """Projective plane whose torus splits over a real quadratic field (the swap exchanges e1, e2).

    The real place splits, so its decomposition subgroup is trivial.
    """
    lat = LatticeWithAction.standard(2, [SWAP])
    rays = ((-1, -1), (1, 0), (0, 1))
    return GaloisFan(lat, rays, ((0, 1), (1, 2), (0, 2)), boundary_rays=(0,), place=(0,), name="quadratic-SB")


def antenna() -> GaloisFan:
    """Complete surface fan with an index-2 cone whose reflection action is not convex."""
    lat = LatticeWithAction.standard(2, [REFLECT])
    rays = ((-1, 0), (0, 1), (0, -1), (1, 1), (1, -1))
    cones = ((1, 3), (3, 4), (2, 4), (0, 1), (0, 2))
    return GaloisFan(lat, rays, cones, boundary_rays=(0,), name="antenna")


def incompatible_example() -> GaloisFan:
    """Rank-3 fan with a coordinate swap whose flag {a, b} is stable yet fails compatibility.

    Against the positive-octant polyhedron the projected pair has Jacobian [[1,1],[-1,1]].
    """
    swap23 = ((1, 0, 0), (0, 0, 1), (0, 1, 0))
    lat = LatticeWithAction.standard(3, [swap23])
    rays = ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 3, -1), (-1, 2, 0), (1, -1, 3), (-1, 0, 2))
    cones = ((0, 1, 2), (3, 4), (5, 6))
    return GaloisFan(lat, rays, cones, boundary_rays=(0,), name="incompatible")


EXAMPLES = {
    "P2": projective_plane,
    "P1": projective_line,
    "quadratic-SB": quadratic_severi_brauer,
    "antenna": antenna,
    "incompatible": incompatible_example,
}
