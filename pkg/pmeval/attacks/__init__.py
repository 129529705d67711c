import logging

from pmeval.utils import derive_seed

from .adaptive import AdaptiveAttack
from .base import (  # noqa: F401
    Attack,
    AttackConfig,
    AttackOutcome,
    ConstraintViolation,
    InvalidAttackConfig,
    as_bool,
    check_constraints,
    cosine_step_size,
    project_linf,
)
from .pgd import PGDAttack
from .pma import MDAttack, PMAttack, TwoStageAttack  # noqa: F401
from .targeted import MultiTargetAttack, rank_targets  # noqa: F401


log = logging.getLogger(__name__)

#: Mapping from names to available attacks. To register additional attacks,
#: add elements to this variable.
ATTACKS = {
    'pgd': PGDAttack,
    'pma': PMAttack,
    'md': MDAttack,
    'mt': MultiTargetAttack,
    'adaptive': AdaptiveAttack,
}

#: Short option names accepted in descriptors.
ALIASES = {
    'eps': 'epsilon',
    'k': 'steps',
    'k1': 'stage1',
    'n': 'restarts',
    'step': 'step_rule',
    'update': 'update_rule',
    'early-stop': 'early_stop',
    't': 'targets',
}


def parse_descriptor(descriptor):
    """Split an attack *descriptor* into its kind and options.

    *descriptor* is either a string ``'<attack>[:key=value,...]'``, e.g.
    ``'pgd:loss=ce,eps=0.1'``, or a :class:`dict` with an 'attack' key and
    option keys. The option ``beta=B`` is shorthand for ``loss=pm:beta=B``.

    Returns
    -------
    tuple
        (kind, dict of options using :class:`AttackConfig` names).
    """
    if isinstance(descriptor, dict):
        options = dict(descriptor)
        try:
            kind = options.pop('attack')
        except KeyError:
            raise InvalidAttackConfig(f"descriptor {descriptor} has no "
                                      "'attack' key") from None
    else:
        kind, _, text = str(descriptor).partition(':')
        options = {}
        # Loss names may themselves contain ':' and '='
        for item in filter(None, text.split(',')):
            key, sep, value = item.partition('=')
            if not sep:
                raise InvalidAttackConfig(f'option {item!r} in {descriptor!r}'
                                          ' is not key=value')
            options[key.strip()] = value.strip()

    kind = kind.strip().lower()
    result = {}
    for key, value in options.items():
        key = ALIASES.get(key, key).replace('-', '_')
        if key == 'beta':
            key, value = 'loss', f'pm:beta={value}'
        result[key] = value
    return kind, result


def get_attack(descriptor, cfg=None, seed=None):
    """Return an :class:`Attack` for *descriptor*.

    Parameters
    ----------
    descriptor : str or dict
        See :func:`parse_descriptor`.
    cfg : AttackConfig, optional
        Base options, overridden by those in *descriptor*.
    seed : int, optional
        Global seed. If given, the attack's seed is derived from *seed* and
        the attack's display name, so it does not depend on where the attack
        appears in an ensemble.

    Raises
    ------
    InvalidAttackConfig
        For an unknown attack or option.
    """
    kind, options = parse_descriptor(descriptor)
    try:
        cls = ATTACKS[kind]
    except KeyError:
        raise InvalidAttackConfig(f'unknown attack {kind!r}; expected one of '
                                  f'{sorted(ATTACKS)}') from None

    cfg = cfg or AttackConfig()
    attack = cls(cfg, **options)

    if seed is not None:
        attack = cls(attack.cfg, seed=derive_seed(seed, attack.name))

    log.debug(f'{descriptor!r} → {attack!r}')
    return attack


def pgd_attack(model, batch, cfg):
    """Run :class:`PGDAttack` with *cfg*; see :meth:`Attack.run`."""
    return PGDAttack(cfg).run(model, batch)


def pma_attack(model, batch, cfg):
    """Run :class:`PMAttack` with *cfg*."""
    return PMAttack(cfg).run(model, batch)


def md_attack(model, batch, cfg):
    """Run :class:`MDAttack` with *cfg*."""
    return MDAttack(cfg).run(model, batch)


def multi_target_attack(model, batch, cfg):
    """Run :class:`MultiTargetAttack` with *cfg*."""
    return MultiTargetAttack(cfg).run(model, batch)


def adaptive_update_attack(model, batch, cfg):
    """Run :class:`AdaptiveAttack` with *cfg*."""
    return AdaptiveAttack(cfg).run(model, batch)


__all__ = [
    'ATTACKS',
    'AdaptiveAttack',
    'Attack',
    'AttackConfig',
    'AttackOutcome',
    'ConstraintViolation',
    'InvalidAttackConfig',
    'MDAttack',
    'MultiTargetAttack',
    'PGDAttack',
    'PMAttack',
    'adaptive_update_attack',
    'check_constraints',
    'cosine_step_size',
    'get_attack',
    'md_attack',
    'multi_target_attack',
    'parse_descriptor',
    'pgd_attack',
    'pma_attack',
    'project_linf',
]
