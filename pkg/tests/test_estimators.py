import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bigmas.estimators import BaseLLMSolver, BigmasSolver, ReActSolver, ToTSolver, check_instances
from bigmas.gateway import ScriptedGateway
from bigmas.tasks import generate_instances


@pytest.fixture(scope="module")
def instances():
    return generate_instances("game24", 3, 0) + generate_instances("tol", 3, 0)


@pytest.mark.parametrize("cls", [BigmasSolver, BaseLLMSolver, ReActSolver, ToTSolver])
def test_oracle_solvers_score_one(cls, instances):
    est = cls().fit(instances)
    assert est.task_kinds_ == ["game24", "tol"] and est.n_instances_seen_ == 6
    pred = est.predict(instances)
    assert isinstance(pred, np.ndarray) and pred.dtype == object and len(pred) == 6
    assert est.score(instances) == 1.0


def test_clone_and_params():
    est = BigmasSolver(t_max=9, r=2)
    params = clone(est).get_params()
    assert params["t_max"] == 9 and params["r"] == 2
    assert ToTSolver(n_thoughts=2).set_params(max_rounds=3).get_params()["max_rounds"] == 3


def test_predict_before_fit(instances):
    with pytest.raises(NotFittedError):
        BigmasSolver().predict(instances)


def test_dict_inputs_and_validation(instances):
    assert check_instances([i.to_dict() for i in instances]) == instances
    with pytest.raises(ValueError):
        check_instances([])
    with pytest.raises(TypeError):
        check_instances(instances[0])
    with pytest.raises(TypeError):
        check_instances([1, 2])
    with pytest.raises(ValueError):
        check_instances([{"kind": "chess"}])


def test_callable_gateway(instances):
    est = BaseLLMSolver(gateway=lambda inst: ScriptedGateway({"baseline": ["ANSWER: nope"]})).fit(instances)
    assert est.score(instances) == 0.0
