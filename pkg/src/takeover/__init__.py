"""Driver takeover behavior prediction from pre-alarm multimodal signals.

Submodules:
    dsp       filtering, normalization, GSR peak detection
    hrv       beat detection and RR-interval statistics
    features  windowing, feature extraction, fusion, matrix IO
    labeling  takeover events and class boundary rules
    sampling  SMOTE balancing and grouped splits
    nn        feed-forward network, Adam training, model bundles
    baselines logistic regression and random forest references
    metrics   accuracy, weighted F1, AUC/ROC, report artifacts
    synth     synthetic session generator and session-directory IO
    cli       command-line pipeline front end
"""

__version__ = "0.1.0"

__all__ = [
    "baselines",
    "cli",
    "dsp",
    "errors",
    "features",
    "hrv",
    "labeling",
    "metrics",
    "nn",
    "sampling",
    "synth",
]
