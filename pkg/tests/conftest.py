import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from matchkit.heterogeneity import MEN, WOMEN, Logit
from matchkit.market import make_market

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def logit_pair():
    return Logit(1.0, MEN), Logit(1.0, WOMEN)


@pytest.fixture
def symmetric_market():
    return make_market([1.0], [1.0], ["a"], ["b"])


# a 3x2 instance with closed-form (fsolve on the logit margin equations) answers
ORACLE_N = [1.0, 0.5, 2.0]
ORACLE_M = [1.5, 0.75]
ORACLE_PHI = np.array([[0.3, -1.0], [1.2, 0.0], [-0.5, 0.8]])
ORACLE_MU = np.array([[0.43101364176124324, 0.11877080672035344],
                      [0.312893565348278, 0.09064211830089361],
                      [0.4504084499262033, 0.4554157502767494]])
ORACLE_MU_X0 = np.array([0.4502155515184034, 0.09646431635082828, 1.0941757997970472])
ORACLE_MU_0Y = np.array([0.3056843429642756, 0.08517132470200363])
ORACLE_U = np.array([[-0.04358673043205077, -1.332530829399429],
                     [1.1766899246884863, -0.06225417427889188],
                     [-0.8876018269978937, -0.8765459259652716]])
ORACLE_WELFARE_U = np.array([1.3752444724305692, 2.2226506021116976, 1.1803614598588288])
# central difference (step 1e-6) of mu in n_1, same oracle
ORACLE_DMU_DN1 = np.array([[0.23565969958783128, 0.07288233397351185],
                           [-0.02556319508850713, -0.00134311847060919],
                           [-0.07488507225428265, -0.04525869351512668]])


@pytest.fixture
def oracle_instance():
    return make_market(ORACLE_N, ORACLE_M), ORACLE_PHI


def random_market(rng, X, Y):
    return make_market(rng.uniform(0.5, 2.0, X), rng.uniform(0.5, 2.0, Y)), \
        rng.uniform(-2.0, 2.0, (X, Y))
