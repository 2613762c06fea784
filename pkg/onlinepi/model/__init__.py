from .mdp import Action, State, MdpInstance, StationaryPolicy, CostVector, ValidationReport
from .mdp import InstanceError, InstanceValidationError, InvalidAction, InvalidPolicy
from .mdp import cost_vector, validate
from .serial import InstanceParseError, load_instance, save_instance, read_instance, write_instance, instance_digest
from .instances import GeneratorError, COUNTEREXAMPLE_NAME, COUNTEREXAMPLE_POLICIES, BUILTIN_INSTANCES
from .instances import build_counterexample, build_self_loop, generate_random, named_policy
