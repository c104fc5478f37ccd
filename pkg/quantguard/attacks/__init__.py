from .fgsm import (
    FAMILIES,
    QUANTIZER_GRADIENT,
    AdversarialSet,
    AttackSpec,
    adversarial_testset,
    clean_accuracy,
    fgsm,
    input_gradient,
    perturb,
    rfgsm,
    sample_noise,
)
from .store import load_adversarial_set, save_adversarial_set

__all__ = [
    "FAMILIES",
    "QUANTIZER_GRADIENT",
    "AdversarialSet",
    "AttackSpec",
    "adversarial_testset",
    "clean_accuracy",
    "fgsm",
    "input_gradient",
    "load_adversarial_set",
    "perturb",
    "rfgsm",
    "sample_noise",
    "save_adversarial_set",
]
