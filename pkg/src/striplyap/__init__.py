"""Lyapunov spectra of the Anderson model on a strip.

Transfer-matrix Monte Carlo for the full non-negative exponent family,
weak-disorder channel formulas evaluated on measured weight statistics, and
a numerical verification suite for the underlying symplectic identities.
"""

from .errors import (HyperbolicPresent, InvalidCase, MissingMoments,
                     NumericalDegeneracy, OutsideSpectrum, ParabolicChannel,
                     RankCollapse, StripLyapError)
from .frames import (SymplecticFrame, WeightStats, channel_weights,
                     frame_action, random_frame, run_trajectory)
from .lyapunov import (LyapunovEstimate, estimate_partial_sum,
                       estimate_spectrum, estimate_spectrum_raw)
from .model import (DisorderLaw, StripModel, build_transfer, laplacian,
                    sample_column, substream, symplectic_form)
from .normalform import (FourierPotential, NormalFormData,
                         PerturbationMatrix, build_normal_form, build_P,
                         fourier_potential, moment_targets)
from .perturbative import (MeanFieldWeights, gamma_bottom_bounds,
                           gamma_bottom_formula, gamma_sum_formula,
                           gamma_top_formula, meanfield_residual,
                           meanfield_stats, meanfield_weights)
from .spectral import (Channel, ChannelData, HypothesisReport,
                       channel_spectrum, check_main_hypothesis,
                       free_spectrum_interval, h_av_squared)
from .verify import VerifyReport, verify_algebra, verify_dynamics, verify_moments

__version__ = "0.1.0"
