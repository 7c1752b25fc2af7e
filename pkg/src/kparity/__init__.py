"""Non-adaptive k-parity testing and one-way k-disjointness simulation."""
from .commsim import (
    KSetInstance,
    OneWayChannel,
    Outcome,
    Transcript,
    disjointness_protocol,
    rac_encode,
    rac_probe,
    rac_roundtrip,
    tester_to_protocol,
)
from .fourier import distance_to_k_parities, nearest_k_parity, walsh_coefficients
from .hadamard import DecodeParams, blr_linearity_test, self_correct
from .influence import influence_test, noisy_influence_test
from .oracles import (
    NoisyParityOracle,
    ParityOracle,
    ParitySpec,
    QueryLedger,
    TruthTableOracle,
    make_noisy_parity,
)
from .points import Point
from .tester import TesterParams, Verdict, query_budget, test_k_parity

__version__ = "0.1.0"

__all__ = [
    "KSetInstance", "OneWayChannel", "Outcome", "Transcript", "disjointness_protocol", "rac_encode",
    "rac_probe", "rac_roundtrip", "tester_to_protocol", "distance_to_k_parities", "nearest_k_parity",
    "walsh_coefficients", "DecodeParams", "blr_linearity_test", "self_correct", "influence_test",
    "noisy_influence_test", "NoisyParityOracle", "ParityOracle", "ParitySpec", "QueryLedger",
    "TruthTableOracle", "make_noisy_parity", "Point", "TesterParams", "Verdict", "query_budget",
    "test_k_parity",
]
