"""Contrastive pretraining toolkit: losses, queues, augmentations and view metrics."""

# The compiled module may live in a build tree separate from this source
# directory, so search every contrastlab directory on sys.path.
from pkgutil import extend_path

__path__ = extend_path(__path__, __name__)

from ._clab import (  # noqa: E402
    UNLABELED,
    NegativeQueue,
    base_view,
    cutmix,
    cutout,
    default_config,
    diversity,
    dot,
    filter_negatives,
    invariance,
    l2_normalize,
    load_cifar10,
    loss_full,
    loss_self,
    loss_semi,
    make_views,
    metrics,
    mixup,
    parse_cifar10,
    pretrain,
    random_erasing,
    run_gradcheck,
    synth_dataset,
)

__all__ = [
    "UNLABELED",
    "NegativeQueue",
    "base_view",
    "cutmix",
    "cutout",
    "default_config",
    "diversity",
    "dot",
    "filter_negatives",
    "invariance",
    "l2_normalize",
    "load_cifar10",
    "loss_full",
    "loss_self",
    "loss_semi",
    "make_views",
    "metrics",
    "mixup",
    "parse_cifar10",
    "pretrain",
    "random_erasing",
    "run_gradcheck",
    "synth_dataset",
]
