import numpy as np
import pytest

from stillmap.core import PoseSE3
from stillmap.synthetic import (
    SceneSpec,
    StaticBox,
    generate_pass,
    parked_car,
    straight_path,
)

GROUND_Z = -1.7


def structured_spec(seed=0, frames=1, step=0.5, dynamics=(), noise=0.02, density=3.0):
    """A street-block scene: noisy ground plus assorted buildings and walls."""
    gz = GROUND_Z
    statics = (
        StaticBox(center=(18.0, 9.0, gz + 4.0), size=(10.0, 6.0, 8.0)),
        StaticBox(center=(-12.0, -14.0, gz + 2.5), size=(16.0, 1.0, 5.0)),
        StaticBox(center=(-16.0, 12.0, gz + 3.0), size=(5.0, 7.0, 6.0)),
        StaticBox(center=(8.0, -16.0, gz + 2.0), size=(6.0, 4.0, 4.0)),
        StaticBox(center=(26.0, -6.0, gz + 1.5), size=(2.0, 12.0, 3.0)),
        StaticBox(center=(-5.0, 20.0, gz + 2.0), size=(8.0, 2.0, 4.0)),
    )
    return SceneSpec(
        seed=seed,
        ground_z=gz,
        ground_extent=60.0,
        ground_noise_sigma=noise,
        static_structures=statics,
        dynamic_objects=tuple(dynamics),
        sensor_path=straight_path(frames, step),
        points_per_surface=density,
    )


@pytest.fixture(scope="session")
def structured_scan():
    """One sensor-frame scan of the static street block."""
    return generate_pass(structured_spec(), "first").scans[0]


def random_pose(rng, max_translation=5.0):
    yaw = rng.uniform(-np.pi, np.pi)
    t = rng.uniform(-max_translation, max_translation, size=3)
    return PoseSE3.from_yaw(yaw, t)
