"""Benchmark utility structures for the Swissmetro mode-choice case.

Three nested linear-in-parameters structures of increasing richness, plus
the network-backed structure where every taste coefficient is an output of
the network. Cost carries a fixed -1 everywhere so estimated time and
headway coefficients live in the willingness-to-pay space.

Alternative-specific constants: car is the reference (no constant).
"""
from __future__ import annotations

from .choice import FIXED, NET, PARAM, Term, UtilitySpec
from .data import swissmetro_schema
from .mlp import MlpSpec

ALTS = ("train", "sm", "car")

AGE_LEVELS = ("AGE_1", "AGE_2", "AGE_3", "AGE_4")
INCOME_LEVELS = ("INCOME_1", "INCOME_2", "INCOME_3")
PURPOSE_LEVELS = ("PURPOSE_1", "PURPOSE_2", "PURPOSE_3")
LUGGAGE_LEVELS = ("LUGGAGE_1", "LUGGAGE_2")
WHO_LEVELS = ("WHO_1", "WHO_2")

# every expanded characteristic, in schema order
ALL_Z = ("MALE",) + AGE_LEVELS + INCOME_LEVELS + ("FIRST",) + WHO_LEVELS \
    + PURPOSE_LEVELS + LUGGAGE_LEVELS + ("GA",)


def _fixed_cost() -> list[Term]:
    return [Term(alt, FIXED, -1.0, attr="cost") for alt in ALTS]


def _mode_specific(name: str, attr: str, alts) -> list[Term]:
    return [Term(alt, PARAM, f"{name}_{alt}", attr=attr) for alt in alts]


def utility_mnl_a() -> UtilitySpec:
    """Mode-specific time/headway, seats, GA, age in train, luggage in car."""
    terms = [Term("train", PARAM, "asc_train"), Term("sm", PARAM, "asc_sm")]
    terms += _fixed_cost()
    terms += _mode_specific("time", "time", ALTS)
    terms += _mode_specific("headway", "headway", ("train", "sm"))
    terms += [Term("sm", PARAM, "seats_sm", attr="seats")]
    terms += [Term(alt, PARAM, f"ga_{alt}", z_cols=("GA",)) for alt in ("train", "sm")]
    terms += [Term("train", PARAM, f"age{i}_train", z_cols=(col,))
              for i, col in enumerate(AGE_LEVELS, start=1)]
    terms += [Term("car", PARAM, f"luggage{i}_car", z_cols=(col,))
              for i, col in enumerate(LUGGAGE_LEVELS, start=1)]
    return UtilitySpec(ALTS, tuple(terms))


def utility_mnl_b() -> UtilitySpec:
    """MNL-A plus time interactions with age, income, and trip purpose."""
    terms = list(utility_mnl_a().terms)
    for group in (AGE_LEVELS, INCOME_LEVELS, PURPOSE_LEVELS):
        for col in group:
            for alt in ALTS:
                terms.append(Term(alt, PARAM, f"time_{col.lower()}_{alt}",
                                  attr="time", z_cols=(col,)))
    return UtilitySpec(ALTS, tuple(terms))


# coefficient slots of the fully-interacted structure: (name, alt, attr)
C_SLOTS = (
    ("time_train", "train", "time"),
    ("time_sm", "sm", "time"),
    ("time_car", "car", "time"),
    ("headway_train", "train", "headway"),
    ("headway_sm", "sm", "headway"),
    ("seats_sm", "sm", "seats"),
    ("asc_train", "train", None),
    ("asc_sm", "sm", None),
)


def utility_mnl_c() -> UtilitySpec:
    """Every coefficient slot interacted with every characteristic.

    Equivalent to a zero-hidden-layer network with identity outputs; kept
    parametric here so it estimates like the other benchmarks.
    """
    terms = _fixed_cost()
    for name, alt, attr in C_SLOTS:
        terms.append(Term(alt, PARAM, name, attr=attr))
        for col in ALL_Z:
            terms.append(Term(alt, PARAM, f"{name}_{col.lower()}", attr=attr, z_cols=(col,)))
    return UtilitySpec(ALTS, tuple(terms))


def utility_tastenet() -> UtilitySpec:
    """All eight coefficient slots produced by the network."""
    terms = _fixed_cost()
    for k, (_, alt, attr) in enumerate(C_SLOTS):
        terms.append(Term(alt, NET, k, attr=attr))
    return UtilitySpec(ALTS, tuple(terms))


def tastenet_network(hidden_size: int = 80, activation: str = "relu",
                     sign_transform: str = "neg_exp") -> MlpSpec:
    """Network for :func:`utility_tastenet`.

    Time and headway outputs are sign-constrained; seats and the constants
    are unconstrained.
    """
    constrained = {"time_train", "time_sm", "time_car", "headway_train", "headway_sm"}
    transforms = tuple(sign_transform if name in constrained else "identity"
                       for name, _, _ in C_SLOTS)
    input_dim = len(swissmetro_schema().characteristic_names())
    return MlpSpec(input_dim=input_dim, hidden_sizes=(hidden_size,),
                   activations=(activation,), transforms=transforms)
