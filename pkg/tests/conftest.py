import copy
import json
from importlib import resources

import pytest

from kitchencell import schemas


def load_data(name: str) -> dict:
    return json.loads(
        (resources.files("kitchencell") / "data" / name).read_text()
    )


@pytest.fixture(scope="session")
def machines_doc():
    return load_data("machines.json")


@pytest.fixture(scope="session")
def recipes_doc():
    return load_data("recipes_steak_frites.json")


@pytest.fixture()
def scenario_base():
    return copy.deepcopy(load_data("scenario_base.json"))


@pytest.fixture()
def scenario_dicer_fault():
    return copy.deepcopy(load_data("scenario_dicer_fault.json"))


@pytest.fixture()
def scenario_second_fries():
    return copy.deepcopy(load_data("scenario_second_fries.json"))


@pytest.fixture(scope="session")
def machines(machines_doc):
    ms, pairs = schemas.machines_from_json(machines_doc)
    return ms


@pytest.fixture(scope="session")
def incompatible_pairs(machines_doc):
    _, pairs = schemas.machines_from_json(machines_doc)
    return pairs


@pytest.fixture(scope="session")
def orders(recipes_doc):
    return schemas.orders_from_json(recipes_doc)
