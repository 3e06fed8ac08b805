"""Adversarial robustness toolkit for volumetric segmentation models.

Thin Python layer over the C++ core: phantom data, toy differentiable
segmenters, pixel- and frequency-domain attacks, DSC/HD95 metrics, and the
experiment harness (white-box, transfer, frequency-band analysis).
"""

from ._volrob import (
    SegModel,
    VolrobError,
    build_model,
    cospgd,
    dct3,
    dsc,
    fgsm,
    filter_perturbation,
    forward,
    frequency_analysis,
    gaussian_noise,
    generate_phantom,
    hd95,
    idct3,
    input_gradient,
    load_model,
    loss_value,
    make_band_mask,
    pgd,
    predict_labels,
    read_nifti_labels,
    read_nifti_volume,
    run_cli,
    save_model,
    sliding_window_infer,
    softmax_channels,
    train_model,
    transfer_eval,
    vafa,
    whitebox_eval,
    write_nifti_labels,
    write_nifti_volume,
)

__all__ = [
    "SegModel",
    "VolrobError",
    "build_model",
    "cospgd",
    "dct3",
    "dsc",
    "fgsm",
    "filter_perturbation",
    "forward",
    "frequency_analysis",
    "gaussian_noise",
    "generate_phantom",
    "hd95",
    "idct3",
    "input_gradient",
    "load_model",
    "loss_value",
    "make_band_mask",
    "pgd",
    "predict_labels",
    "read_nifti_labels",
    "read_nifti_volume",
    "run_cli",
    "save_model",
    "sliding_window_infer",
    "softmax_channels",
    "train_model",
    "transfer_eval",
    "vafa",
    "whitebox_eval",
    "write_nifti_labels",
    "write_nifti_volume",
]

__version__ = "0.1.0"
