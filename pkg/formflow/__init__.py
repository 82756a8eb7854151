from .core.expr import Expression, parse, evaluate, differentiate, substitute, to_text
from .core.grid import Axis, Grid
from .core.forms import DifferentialForm, Connection, wedge, exterior_derivative, d, is_closed
from .core.relations import (FunctionalRelation, analyze_relation, verify_integrating_factor,
                             find_integrating_factor, degeneracy_scan, reconstruct_potential)
from .core.characteristics import (FirstOrderPDE, HamiltonJacobiProblem, CauchyData, build_characteristic_system,
                                   build_canonical_system, integrate, build_bundle, verify_closure)
from .core.thermo import ThermoScenario, run_thermo
from .core.gasdynamics import GasScenario, build_gas_evolutionary_relation, classify_instability
from .core.electromagnetics import EMScenario, run_em
from .core.classification import classify, enumerate_cycle
from .core.config import RunConfig
from .core.report import Report
from .core.assertions import Assertions
from .core.expect import Expect
from .core.test import Test
from .core.schema import SchemaValidator
