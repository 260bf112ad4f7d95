"""Built-in invariant suites run by ``conicstab selftest``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import Lorentz, Orthant, PolyCone, PowerSurface, Product
from .errors import ConicError
from .geometry import recover_multiplier
from .numdiff import forward_difference
from .problem_io import bundled_path, load_problem
from .projcalc import extended_polyhedricity
from .stability import certify_isolated_calmness

FD_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def catalogue(rng: np.random.Generator) -> dict:
    """Cones with closed-form polar and projection derivative."""
    return {
        "orthant3": Orthant(3),
        "lorentz3": Lorentz(3),
        "lorentz4-axis3": Lorentz(4, axis=2),
        "polyhedral3": PolyCone(rng.standard_normal((4, 3))),
        "product": Product([Orthant(2), Lorentz(3)]),
    }


def _samples(K, rng, count):
    return rng.standard_normal((count, K.dim))


def fd_consistency(rng, count: int = 12) -> list:
    out = []
    for name, K in catalogue(rng).items():
        worst = 0.0
        for u in _samples(K, rng, count):
            h = rng.standard_normal(K.dim)
            d = np.asarray(K.projection_derivative(u)(h))
            fd = forward_difference(K.project, u, h)
            worst = max(worst, float(np.linalg.norm(d - fd)) / max(1.0, float(np.linalg.norm(d))))
        out.append(CheckResult(f"fd-consistency[{name}]", worst <= FD_TOL, f"max rel error {worst:.2e}"))
    return out


def duality(rng, count: int = 20) -> list:
    out = []
    for name, K in catalogue(rng).items():
        P, D = K.polar(), K.dual()
        worst_moreau = worst_pair = 0.0
        for u in _samples(K, rng, count):
            p, q = K.project(u), P.project(u)
            worst_moreau = max(worst_moreau, float(np.linalg.norm(u - p - q)), abs(float(p @ q)))
            worst_pair = max(worst_pair, -float(p @ D.project(u)))
        ok = worst_moreau <= 1e-7 and worst_pair <= 1e-7
        out.append(CheckResult(f"duality[{name}]", ok,
                               f"moreau {worst_moreau:.2e}, dual pairing {max(worst_pair, 0.0):.2e}"))
    return out


def homogeneity(rng, count: int = 10) -> list:
    out = []
    for name, K in catalogue(rng).items():
        worst = 0.0
        for u in _samples(K, rng, count):
            a = float(rng.uniform(0.1, 5.0))
            h = rng.standard_normal(K.dim)
            worst = max(worst, float(np.linalg.norm(K.project(a * u) - a * K.project(u))))
            D = K.projection_derivative(u)
            worst = max(worst, float(np.linalg.norm(D(a * h) - a * D(h))))
        out.append(CheckResult(f"homogeneity[{name}]", worst <= 1e-7, f"max deviation {worst:.2e}"))
    # iterative projection: homogeneity of the map only
    K, worst = PowerSurface(), 0.0
    for u in _samples(K, rng, 3):
        a = float(rng.uniform(0.1, 5.0))
        worst = max(worst, float(np.linalg.norm(K.project(a * u) - a * K.project(u))))
    out.append(CheckResult("homogeneity[power_surface]", worst <= 1e-7, f"max deviation {worst:.2e}"))
    return out


def worked_examples() -> list:
    out = []
    spec = load_problem(bundled_path("example_6_4"))
    P = spec.problem
    lam = recover_multiplier(P).lam
    err = float(np.max(np.abs(lam - np.array([1.0, 0.0, -1.0]))))
    out.append(CheckResult("example[6.4 multiplier]", err <= 1e-9, f"|lambda - (1,0,-1)| = {err:.1e}"))
    v = certify_isolated_calmness(P, seed=spec.options.seed)
    out.append(CheckResult("example[6.4 calmness]", v.status == "certified" and v.necessary,
                           f"{v.status}, necessary={v.necessary}"))
    ps = PowerSurface()
    flat = extended_polyhedricity(ps, [1.0, 0.0, 0.0]).status
    curved = extended_polyhedricity(ps, [1.0, 1.0, 1.0]).status
    out.append(CheckResult("example[power surface]", flat == "holds" and curved == "fails",
                           f"(1,0,0) {flat}, (1,1,1) {curved}"))
    return out


def run_all(seed: int = 0) -> list:
    suites = (
        ("fd", lambda rng: fd_consistency(rng)),
        ("duality", lambda rng: duality(rng)),
        ("homogeneity", lambda rng: homogeneity(rng)),
        ("examples", lambda rng: worked_examples()),
    )
    results = []
    for i, (name, fn) in enumerate(suites):
        rng = np.random.default_rng([seed, i])
        try:
            results.extend(fn(rng))
        except ConicError as exc:
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
