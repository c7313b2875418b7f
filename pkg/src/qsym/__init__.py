"""Quantum structure from finite statistical models under a symmetry group."""
from .ensemble import (Ensemble, Experiment, GroupAction, StateSpace, close_group,
                       validate_ensemble)
from .hilbert import DensityOperatorFit, DensityState, ProjectorFamily, build_dynamics, gleason_fit
from .inference import HaarBayesEstimator, estimate, posterior
from .logic import PropositionPoset, build_poset, check_distributive, check_orthomodular
from .modelfile import ModelDocument, ParseError, parse_model, serialize_model
from .repspace import ConditionalMeanProjector, regular_rep
from .symmetry import ParametricFunction, check_permissible, enumerate_permissible

__all__ = [
    "ConditionalMeanProjector", "DensityOperatorFit", "DensityState", "Ensemble", "Experiment",
    "GroupAction", "HaarBayesEstimator", "ModelDocument", "ParametricFunction", "ParseError",
    "ProjectorFamily", "PropositionPoset", "StateSpace", "build_dynamics", "build_poset",
    "check_distributive", "check_orthomodular", "check_permissible", "close_group",
    "enumerate_permissible", "estimate", "gleason_fit", "parse_model", "posterior",
    "regular_rep", "serialize_model", "validate_ensemble",
]
__version__ = "0.1.0"
