"""Ensembles of attacks and the relative robustness metric.

Every function here builds a :class:`.Reporter` graph with one stage per
attack. A stage only attacks the samples that survived all earlier stages;
a sample is broken by the ensemble if any stage breaks it. Each attack's
seed is derived from the global seed and the attack's display name, so the
final union does not depend on the order of the sequence.

Stages start fresh from the clean inputs; no adversarial example is carried
from one stage to the next.
"""
import logging

import pandas as pd

from pmeval.attacks import Attack, AttackConfig, get_attack, parse_descriptor
from pmeval.model import LabeledBatch
from . import Reporter, RUNTIME_KEYS


log = logging.getLogger(__name__)


def _resolve(cfg, seed):
    if cfg is None:
        cfg = AttackConfig.from_config()
    if seed is None:
        seed = cfg.seed
    return cfg, int(seed)


def build_reporter(model, batch, descriptors, cfg=None, seed=None,
                   mode='standard', individual=False, timing=True,
                   config=None, paths=()):
    """Prepare a :class:`.Reporter` for *descriptors* applied in order.

    Parameters
    ----------
    descriptors : list of str, dict or .Attack
        Attacks; see :func:`.parse_descriptor`.
    cfg : .AttackConfig, optional
        Options shared by all attacks. Default:
        :meth:`.AttackConfig.from_config`.
    seed : int, optional
        Global seed. Default: *cfg.seed*.
    mode : 'standard' or 'relative'
    individual : bool
        Also run every attack after the first on all samples, to report its
        own robust accuracy.
    timing : bool
        If :obj:`False`, wall times are reported as 0.0.
    config : dict, optional
        Further run configuration echoed into the report.
    paths : list of path-like
        Input files whose contents enter the config digest.
    """
    if not len(descriptors):
        raise ValueError('need at least one attack')

    cfg, seed = _resolve(cfg, seed)
    attacks = [d if isinstance(d, Attack) else get_attack(d, cfg, seed)
               for d in descriptors]

    options = cfg.to_dict()
    for key in RUNTIME_KEYS:
        options.pop(key, None)

    reporter = Reporter(**(config or {}))
    reporter.configure(
        seed=seed,
        timing=timing,
        early_stop=cfg.early_stop,
        attack_options=options,
        sequence=[a.name for a in attacks],
        paths=[str(p) for p in paths],
    )
    reporter.add_inputs(model, batch, mode)
    for attack in attacks:
        reporter.add_attack(attack, individual=individual)
    return reporter


def evaluate(model, batch, descriptors, **kwargs):
    """Evaluate *model* on *batch* against *descriptors*.

    Accepts the same arguments as :func:`build_reporter`.

    Returns
    -------
    .RobustnessReport
    """
    return build_reporter(model, batch, descriptors, **kwargs).get('report')


def pma_plus_one(model, batch, cfg_pma=None, other='mt', seed=None,
                 **kwargs):
    """PMA followed by *other* on the samples PMA did not break.

    The report holds the robust accuracy of each attack on its own and the
    robust accuracy of the union.
    """
    return evaluate(model, batch, ['pma', other], cfg=cfg_pma, seed=seed,
                    individual=True, **kwargs)


def cascade_ensemble(model, batch, sequence, cfg=None, seed=None, **kwargs):
    """Apply the attacks in *sequence* in order, each to the samples still
    robust.

    The report's cumulative robust accuracies are non-increasing; the last
    of them, the ensemble robust accuracy, is the same for any ordering of
    *sequence*.
    """
    return evaluate(model, batch, sequence, cfg=cfg, seed=seed, **kwargs)


def relative_robustness(model, inputs, descriptor, cfg=None, seed=None):
    """Fraction of *inputs* whose prediction under attack equals the clean
    prediction.

    *inputs* is an array or a :class:`.LabeledBatch`; labels, if any, are
    ignored.
    """
    batch = inputs if isinstance(inputs, LabeledBatch) \
        else LabeledBatch(inputs)
    report = evaluate(model, batch, [descriptor], cfg=cfg, seed=seed,
                      mode='relative', timing=False)
    return report.ensemble_robust_accuracy


def sweep(model, batch, descriptor, param, values, cfg=None, seed=None):
    """Robust accuracy of one attack for each of *values* of *param*.

    *param* is any descriptor option, e.g. 'k1', 'n', 'beta' or 'eps'.

    Returns
    -------
    pandas.DataFrame
        Columns *param*, attack, robust_acc and wall_time_s; one row per
        value, in the order of *values*.
    """
    cfg, seed = _resolve(cfg, seed)
    kind, options = parse_descriptor(descriptor)

    rows = []
    for value in values:
        _, extra = parse_descriptor({'attack': kind, param: value})
        attack = get_attack(dict(options, attack=kind, **extra), cfg, seed)
        record = evaluate(model, batch, [attack], cfg=cfg, seed=seed,
                          config=dict(sweep={param: value})).attacks[0]
        log.info(f'{param}={value}: {attack.name} robust accuracy '
                 f'{record.robust_acc}')
        rows.append((value, record.attack, record.robust_acc,
                     record.wall_time_s))

    return pd.DataFrame(rows, columns=[param, 'attack', 'robust_acc',
                                       'wall_time_s'])
