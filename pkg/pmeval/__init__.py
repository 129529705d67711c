from pmeval._config import config  # noqa: F401
from pmeval import utils  # noqa: F401
from pmeval.backend.io import (  # noqa: F401
    ContainerFormatError,
    load_checkpoint,
    load_dataset,
    read_container,
    save_checkpoint,
    save_dataset,
    write_container,
)
from pmeval.model import (  # noqa: F401
    Classifier,
    LabeledBatch,
    ModelSpec,
    init_classifier,
    train,
)
from pmeval.losses import LossKind, loss_and_grad  # noqa: F401
from pmeval.attacks import (  # noqa: F401
    ATTACKS,
    AttackConfig,
    AttackOutcome,
    get_attack,
)
from pmeval import lid, synthetic  # noqa: F401
from pmeval.lid import EmbeddingSet, lid_mle, mad_median_filter  # noqa: F401
from pmeval.synthetic import generate_synthetic  # noqa: F401
from pmeval.reporting import (  # noqa: F401
    ComputationError,
    Reporter,
    RobustnessReport,
    build_reporter,
    cascade_ensemble,
    evaluate,
    pma_plus_one,
    relative_robustness,
    sweep,
)
from pmeval.reporting.computations import robust_accuracy  # noqa: F401

__version__ = '0.1.0'
