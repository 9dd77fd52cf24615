"""Two-frame phase-shifting demodulation.

Fringe patterns are normalized with a Gabor filter bank, the phase step is
read off a two-coefficient Lissajous ellipse fit (least squares or robust
IRLS with a Leclerc potential), and the phase follows from a two-step
arctangent formula.
"""

__version__ = "0.1.0"

from .errors import (DataError, DegenerateCloudError, DegenerateFitError, DegenerateResponseError,
                     DomainError, InsufficientDataError, InvariantError, NumericalError, ParseError,
                     RobustCollapseError, SizeError, SlefError)
from .field import ComplexField, FieldStats, ScalarField, field_mean, wrap_to_pi
from .io import load_field, save_field
from .synth import InterferogramPair, ModulationSpec, NoiseSpec, PairSpec, PhaseSpec, generate_pair, standard_suite
from .gfb import GfbConfig, GfbResponse, build_bank, filter_image, low_freq_blend, normalize
from .ellipse import (EllipseFit2, EllipseFit5, LissajousCloud, RobustConfig, build_cloud, fit_ls2,
                      fit_ls5, fit_robust)
from .demod import (ErrorReport, Formula, Method, PhaseMapResult, PhaseStepEstimate, phase_lef,
                    phase_two_step, step_from_fit, wrapped_error)
from .pipeline import PipelineConfig, SweepResult, compare_phase, demodulate, sweep
