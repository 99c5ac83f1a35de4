# bpire/catalog.py
import math
from typing import Callable, Dict, List, Union

from env import from_spec, make_env
from exceptions import ConfigError
from schemas import BuiltinEnvSpec, EnvModel, EnvSpec, LinearFractional, Poisson, Table

E = math.e


def single_state() -> EnvModel:
    return make_env([(LinearFractional(m=0.5, b=0.5), Poisson(lam=1.0), 1.0)], label="D1")


def weak_lattice() -> EnvModel:
    """Log-means +-1 with P(+1) = 0.3: the tilted walk is simple symmetric."""
    return make_env(
        [
            (LinearFractional(m=E, b=2.0), Poisson(lam=1.0), 0.3),
            (LinearFractional(m=1.0 / E, b=0.5), Poisson(lam=1.0), 0.7),
        ],
        label="E_weak",
    )


def weak_nonlattice() -> EnvModel:
    return make_env(
        [
            (LinearFractional(m=2.5, b=2.0), Poisson(lam=1.0), 0.3),
            (LinearFractional(m=0.3, b=0.5), Poisson(lam=1.0), 0.7),
        ],
        label="E_weak2",
    )


def intermediate() -> EnvModel:
    p = 1.0 / (1.0 + E * E)
    return make_env(
        [
            (LinearFractional(m=E, b=2.0), Poisson(lam=1.0), p),
            (LinearFractional(m=1.0 / E, b=0.5), Poisson(lam=1.0), 1.0 - p),
        ],
        label="E_inter",
    )


def strong_nonlattice() -> EnvModel:
    return make_env(
        [
            (LinearFractional(m=1.5, b=1.0), Poisson(lam=1.0), 0.3),
            (LinearFractional(m=0.3, b=0.5), Poisson(lam=1.0), 0.7),
        ],
        label="E_strong2",
    )


def weak_light_immigration() -> EnvModel:
    """E_weak2 offspring with rare single immigrants, so that r H(r) stays below 1 up to 1/gamma."""
    light = Table(p=(0.9, 0.1))
    return make_env(
        [
            (LinearFractional(m=2.5, b=2.0), light, 0.3),
            (LinearFractional(m=0.3, b=0.5), light, 0.7),
        ],
        label="E_case2",
    )


BUILTIN: Dict[str, Callable[[], EnvModel]] = {
    "D1": single_state,
    "E_weak": weak_lattice,
    "E_weak2": weak_nonlattice,
    "E_inter": intermediate,
    "E_strong2": strong_nonlattice,
    "E_case2": weak_light_immigration,
}


def names() -> List[str]:
    return list(BUILTIN)


def get(name: str) -> EnvModel:
    if name not in BUILTIN:
        raise ConfigError(f"unknown built-in environment {name!r}; choose one of {', '.join(BUILTIN)}")
    return BUILTIN[name]()


def resolve(spec: Union[BuiltinEnvSpec, EnvSpec]) -> EnvModel:
    if isinstance(spec, BuiltinEnvSpec):
        return get(spec.builtin)
    return from_spec(spec)
