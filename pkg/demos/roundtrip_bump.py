"""Transform a K-type bump on H^3, invert it and report the reconstruction error.

Usage: python demos/roundtrip_bump.py [radius]
"""
import sys

import numpy as np

from hyperharm import (
    CalibrationRegistry,
    Grids,
    KTypeIndex,
    ModelParams,
    SpatialFunction,
    bump_profile,
    calibrate_plancherel,
    helgason_fourier,
    inverse_helgason,
)


def main(radius=2.0):
    mp = ModelParams(3)
    grids = Grids()
    registry = CalibrationRegistry()
    record = calibrate_plancherel(mp, grids, registry)
    print(f"inversion constant {record.constant_inversion:.15g} (held-out spread {record.spread:.1e})")

    delta = KTypeIndex(3, 1)
    f = SpatialFunction.from_profile(mp, bump_profile(radius, 4, degree=1), delta, np.array([1.0, 0.5, -0.25]),
                                     grid=grids.radial)
    psi = helgason_fourier(f, grids.spectral)
    back = inverse_helgason(psi, grids.radial, registry=registry)
    err = back.sub(f).sup() / f.sup()
    print(f"bump radius {radius:g}, K-type l=1: relative sup error of the round trip {err:.2e}")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 2.0)
