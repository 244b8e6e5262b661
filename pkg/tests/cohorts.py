"""Synthetic two-class cohorts for pipeline tests."""

import numpy as np

from palmpp.core import RngStream, ThomasParams, Window
from palmpp.inference import CohortDataset, Image, Patient
from palmpp.sim import simulate

UNIT = Window.unit()


def make_cohort(n_patients, stroma_D, images=2, seed=0, nu=5.0, sigma=0.02,
                tumour=ThomasParams(30, 5, 0.02), spread=0.25):
    """Cohort whose stroma parent density depends on outcome.

    ``stroma_D`` maps outcome (0, 1) to the group's mean parent density.
    Patient-level densities are lognormal around the group mean with
    coefficient of variation about ``spread``. Outcomes alternate 0, 1, ...
    """
    rng = np.random.default_rng(seed)
    patients = []
    for i in range(n_patients):
        outcome = i % 2
        mean = stroma_D[outcome]
        D = mean * float(np.exp(spread * rng.standard_normal() - spread ** 2 / 2))
        imgs = []
        for k in range(images):
            s = RngStream(seed, 1000 * i + k)
            imgs.append(Image(f"p{i:03d}i{k}", simulate(tumour, UNIT, s.child(0)),
                              simulate(ThomasParams(D, nu, sigma), UNIT, s.child(1))))
        patients.append(Patient(f"p{i:03d}", outcome, tuple(imgs)))
    return CohortDataset(tuple(patients))
