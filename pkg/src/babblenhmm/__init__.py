"""
babblenhmm: gamma-HMM speech and gamma-NHMM babble models for single-channel speech enhancement.

This package provides:
- EM training of a gamma-HMM speech prior and a babble prior over its basis
- An online MMSE enhancer with recursive tracking of speech and babble levels
- Objective measures, shadow filtering and the cross-predictive model-fit test
- Synthetic corpora and a command-line interface tying it together
"""

__version__ = "0.1.0"

from babblenhmm.babble import BabbleNhmm
from babblenhmm.config import RunConfig
from babblenhmm.enhancer import CompositeModel
from babblenhmm.errors import BabbleNhmmError, InputError, NumericalError
from babblenhmm.gamma_hmm import SpeechHmm

__all__ = [
    "__version__",
    "BabbleNhmm",
    "BabbleNhmmError",
    "CompositeModel",
    "InputError",
    "NumericalError",
    "RunConfig",
    "SpeechHmm",
]
