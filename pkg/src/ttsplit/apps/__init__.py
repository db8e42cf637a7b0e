"""Application drivers: Henon-Heiles dynamics and Newton-Schultz QTT inversion."""

from .henon_heiles import HenonHeilesSpec, build_henon_heiles, propagate
from .newton_schultz import NewtonSchultzSpec, newton_schultz
from .qtt import build_qtt_laplace
from .spectrum import spectrum
