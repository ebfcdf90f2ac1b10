"""Overlapped FMM for the regularized 2D Biot-Savart kernel."""

from ._core import (
    __version__,
    coefficients,
    compute_velocities,
    direct_sum,
    lattice_particles,
    min_b_cover,
    min_particles_per_process,
    optimal_b,
    powers_of_four,
    random_particles,
    sweep_min_size,
    timeline_simulate,
    total_time,
    work_direct,
    work_init,
)

__all__ = [
    "coefficients",
    "compute_velocities",
    "direct_sum",
    "lattice_particles",
    "min_b_cover",
    "min_particles_per_process",
    "optimal_b",
    "powers_of_four",
    "random_particles",
    "sweep_min_size",
    "timeline_simulate",
    "total_time",
    "work_direct",
    "work_init",
]
