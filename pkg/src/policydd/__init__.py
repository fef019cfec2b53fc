"""First-match policy decision diagrams, their worst-case size bounds and rule minimization."""

from .bounds import (BoundParams, f_bound, format_sci, g_bound, old_bound, partitions,
                     worst_case_policy)
from .diagram import (Diagram, build_diagram, leaf_count, leaf_report, resolve_batch,
                      resolve_diagram, root_edges)
from .errors import (InvariantViolation, PartitionCapExceeded, PolicyDDError,
                     PolicySyntaxError, ResourceBudgetExceeded, SchemaError, ValidationError)
from .experiment import fuzz_validate, sweep_bounds
from .generator import GeneratorConfig, generate_policy, generate_worst_case
from .metrics import compute_metrics, rule_profile
from .minimizer import (brute_force_minimum, build_policy_formula, min_one_sat,
                        minimize_policy)
from .model import (ACCEPT, DISCARD, FieldSchema, Interval, Policy, RouteEntry, RouteKind,
                    Rule, format_policy, parse_policy, resolve_first_match,
                    routes_to_first_match)

__version__ = "0.1.0"
