"""Synthetic data: subspace Gaussian mixtures and full-rank classes with a fixed condition number.

Spec files are INI documents with a [global] section and one [class N]
section per class::

    [global]
    k = 3
    p = 100
    n = 1000
    seed = 7

    [class 1]
    proportion = 0.4
    dim = 2
    a = 150
    b = 15

A [global] ``kind = full-rank`` section with ``condition_number`` builds a
FullRankSpec instead.
"""
import logging
import configparser
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from src.errors import DataParseError, DataReadError, InvalidInputError
from src.state.shared_state import (
    AStructure,
    BStructure,
    ClassSpec,
    Family,
    FullRankSpec,
    MixtureParams,
    ModelKind,
    SimSpec,
    SimulatedData,
)

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, None]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_orientation(p: int, d: int, seed: SeedLike = None) -> np.ndarray:
    """p x d matrix with orthonormal columns, Haar distributed."""
    if not 1 <= d <= p:
        raise InvalidInputError(f"cannot draw {d} orthonormal columns in dimension {p}")
    rng = _rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((p, d)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _sphere_point(p: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    direction = rng.standard_normal(p)
    return radius * direction / np.linalg.norm(direction)


def simulate(spec: SimSpec) -> SimulatedData:
    rng = np.random.default_rng(spec.seed)
    k, p, n = spec.k, spec.p, spec.n
    proportions = np.array([c.proportion for c in spec.classes])

    shared = random_orientation(p, spec.classes[0].dim, rng) if spec.shared_orientation else None
    orientations, means, a_values = [], [], []
    for c in spec.classes:
        orientations.append(shared if shared is not None else random_orientation(p, c.dim, rng))
        radius = c.mean_radius if c.mean_radius is not None else spec.mean_radius
        means.append(_sphere_point(p, np.sqrt(c.b) if radius is None else radius, rng))
        a_values.append(c.a_vector())

    labels = rng.choice(k, size=n, p=proportions)
    values = np.empty((n, p))
    for i, c in enumerate(spec.classes):
        rows = np.flatnonzero(labels == i)
        if rows.size == 0:
            continue
        Q = orientations[i]
        signal = rng.standard_normal((rows.size, c.dim)) * np.sqrt(a_values[i])
        noise = rng.standard_normal((rows.size, p))
        noise -= (noise @ Q) @ Q.T
        values[rows] = means[i] + signal @ Q.T + np.sqrt(c.b) * noise

    truth = MixtureParams(
        proportions=proportions,
        means=np.vstack(means),
        dims=[c.dim for c in spec.classes],
        orientations=[Q.copy() for Q in orientations],
        a=a_values,
        b=np.array([c.b for c in spec.classes]),
    )
    logger.debug(f"Simulated {n} points in R^{p} from {k} subspace classes (seed {spec.seed})")
    return SimulatedData(values=values, labels=labels, truth=truth)


def full_rank_spectrum(p: int, condition_number: float, rng: np.random.Generator) -> np.ndarray:
    """Descending spectrum from condition_number down to 1, log-uniform inside."""
    if p == 2:
        return np.array([condition_number, 1.0])
    interior = np.exp(rng.uniform(0.0, np.log(condition_number), size=p - 2))
    return np.concatenate([[condition_number], np.sort(interior)[::-1], [1.0]])


def simulate_full_rank(spec: FullRankSpec) -> SimulatedData:
    rng = np.random.default_rng(spec.seed)
    k, p, n = spec.k, spec.p, spec.n
    proportions = np.full(k, 1.0 / k) if spec.proportions is None else np.asarray(spec.proportions)
    radius = np.sqrt(spec.condition_number) if spec.mean_radius is None else spec.mean_radius

    covariances, factors, means = [], [], []
    for _ in range(k):
        spectrum = full_rank_spectrum(p, spec.condition_number, rng)
        Q = random_orientation(p, p, rng)
        covariances.append((Q * spectrum) @ Q.T)
        factors.append(Q * np.sqrt(spectrum))
        means.append(_sphere_point(p, radius, rng))

    labels = rng.choice(k, size=n, p=proportions)
    values = np.empty((n, p))
    for i in range(k):
        rows = np.flatnonzero(labels == i)
        values[rows] = means[i] + rng.standard_normal((rows.size, p)) @ factors[i].T
    return SimulatedData(values=values, labels=labels, covariances=covariances)


def hyper_param_spec(p: int = 100, n: int = 1000, seed: int = 0, dims: Sequence[int] = (2, 5, 10)) -> SimSpec:
    """Three classes with dims {2,5,10}, proportions {0.4,0.3,0.3}, a {150,100,75}, b 15."""
    classes = [
        ClassSpec(proportion=pi, dim=d, a=[a], b=15.0)
        for pi, d, a in zip((0.4, 0.3, 0.3), dims, (150.0, 100.0, 75.0))
    ]
    return SimSpec(k=3, p=p, n=n, classes=classes, seed=seed)


def model_spec(model: ModelKind, p: int = 100, n: int = 1000, seed: int = 0) -> SimSpec:
    """Generator for one of the six free-orientation models with per-class dimensions."""
    if model.family != Family.FREE_ORIENTATION or model.common_dimension:
        raise InvalidInputError(f"no simulation design for {model.name}")
    dims = (2, 5, 10)
    a_levels = (150.0, 100.0, 75.0)
    b_levels = (15.0, 10.0, 20.0) if model.b_structure == BStructure.PER_CLASS else (15.0, 15.0, 15.0)
    classes = []
    for pi, d, a_level, b in zip((0.4, 0.3, 0.3), dims, a_levels, b_levels):
        if model.a_structure == AStructure.PER_CLASS_PER_DIM:
            a = list(np.linspace(a_level, a_level / 2.0, d))
        elif model.a_structure == AStructure.PER_CLASS:
            a = [a_level]
        else:
            a = [100.0]
        classes.append(ClassSpec(proportion=pi, dim=d, a=a, b=b))
    return SimSpec(k=3, p=p, n=n, classes=classes, seed=seed)


def _float_list(raw: str) -> List[float]:
    return [float(item) for item in raw.replace(";", ",").split(",") if item.strip()]


def parse_sim_spec(text: str) -> Union[SimSpec, FullRankSpec]:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise DataParseError(f"malformed spec file: {exc}") from exc
    if not parser.has_section("global"):
        raise DataParseError("spec file has no [global] section")
    g = parser["global"]

    try:
        if g.get("kind", "subspace").strip().lower() == "full-rank":
            proportions = g.get("proportions")
            return FullRankSpec(
                k=g.getint("k"),
                p=g.getint("p"),
                n=g.getint("n"),
                condition_number=g.getfloat("condition_number"),
                proportions=_float_list(proportions) if proportions else None,
                mean_radius=g.getfloat("mean_radius", fallback=None),
                seed=g.getint("seed", fallback=0),
            )

        sections = sorted(
            (s for s in parser.sections() if s.lower().startswith("class")),
            key=lambda s: int(s.split()[-1]),
        )
        classes = []
        for name in sections:
            c = parser[name]
            classes.append(ClassSpec(
                proportion=c.getfloat("proportion"),
                dim=c.getint("dim"),
                a=_float_list(c.get("a", "")),
                b=c.getfloat("b"),
                mean_radius=c.getfloat("mean_radius", fallback=None),
            ))
        return SimSpec(
            k=g.getint("k"),
            p=g.getint("p"),
            n=g.getint("n"),
            classes=classes,
            shared_orientation=g.getboolean("shared_orientation", fallback=False),
            mean_radius=g.getfloat("mean_radius", fallback=None),
            seed=g.getint("seed", fallback=0),
        )
    except ValidationError as exc:
        raise InvalidInputError(f"invalid simulation spec: {exc.errors()[0]['msg']}") from exc
    except (TypeError, ValueError) as exc:
        raise DataParseError(f"invalid value in spec file: {exc}") from exc


def read_sim_spec(path: Union[str, Path]) -> Union[SimSpec, FullRankSpec]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataReadError(f"cannot read spec file {path}: {exc}") from exc
    return parse_sim_spec(text)


def generate(spec: Union[SimSpec, FullRankSpec], seed: Optional[int] = None) -> SimulatedData:
    if seed is not None:
        spec = spec.model_copy(update={"seed": seed})
    if isinstance(spec, FullRankSpec):
        return simulate_full_rank(spec)
    return simulate(spec)
