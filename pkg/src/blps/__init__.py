"""Business-logic property analysis and service integration."""

from .audit import diff_models, impact
from .codec import BlpsDocument, deserialize, generate_blps, generate_integrated, serialize, to_model
from .contract import Contract, load_contract
from .flow import FlowGraph, abstract_flow, build_flow
from .integrator import BindingSpec, integrate, parse_binding
from .model import ElementIndex, LogicElement, LogicModel, ServiceDef
from .parser import parse_source, print_model
from .properties import CostModel, PropertySets, evaluate_all

__version__ = "0.1.0"

__all__ = [
    "BindingSpec", "BlpsDocument", "Contract", "CostModel", "ElementIndex", "FlowGraph", "LogicElement",
    "LogicModel", "PropertySets", "ServiceDef", "abstract_flow", "build_flow", "deserialize", "diff_models",
    "evaluate_all", "generate_blps", "generate_integrated", "impact", "integrate", "load_contract",
    "parse_binding", "parse_source", "print_model", "serialize", "to_model",
]
