"""Holonomy of a geodesic triangle on the unit sphere against the enclosed area.

Prints the rotation-angle error for a doubling sequence of step counts and the
ratio between successive errors (about 16 for RK4).
"""
import argparse
import math

from deformed_transport.deformed_group import deformation_for
from deformed_transport.loops import geodesic_triangle, triangle_area
from deformed_transport.manifolds import catalog_manifold
from deformed_transport.transport import holonomy, rotation_angle

TRIANGLE = [(math.pi / 2, 0.3), (math.pi / 2, 1.5), (0.5, 0.9)]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--start", type=int, default=6)
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--method", choices=["rk4", "lambda"], default="rk4")
    args = p.parse_args()

    d = deformation_for(catalog_manifold("sphere2"))
    loop = geodesic_triangle(TRIANGLE)
    area = triangle_area(TRIANGLE)
    print(f"enclosed area {area:.15f}")
    print(f"{'steps':>8} {'angle':>20} {'error':>12} {'ratio':>8}")
    prev = None
    for i in range(args.levels):
        steps = args.start * 2**i
        angle = rotation_angle(holonomy(d, loop, steps, args.method))
        err = abs(angle - area)
        ratio = "" if prev is None or err == 0 else f"{prev / err:8.2f}"
        print(f"{steps:8d} {angle:20.15f} {err:12.3e} {ratio:>8}")
        prev = err


if __name__ == "__main__":
    main()
