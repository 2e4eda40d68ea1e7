"""Classification and Monte Carlo verification of excited Brownian motions."""

__version__ = "0.1.0"

from .criteria import ClassificationReport, Verdict, big_h, classify, criterion_integral, sigma
from .excitation import ExcitationProfile, delta_total, eval_h, eval_phi, make_profile, reflected, truncated

__all__ = [
    "__version__",
    "ClassificationReport",
    "ExcitationProfile",
    "Verdict",
    "big_h",
    "classify",
    "criterion_integral",
    "delta_total",
    "eval_h",
    "eval_phi",
    "make_profile",
    "reflected",
    "sigma",
    "truncated",
]
