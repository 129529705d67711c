from pmeval.losses import LossKind

from .base import Attack, InvalidAttackConfig


class PGDAttack(Attack):
    """Projected sign-gradient ascent on a single loss.

    Each restart starts from uniform noise in the ε-ball. With
    ``step_rule='fixed'`` every step has size ``cfg.step_size`` (ε/4 unless
    *alpha* is given); with ``step_rule='cosine'`` the two-stage cosine
    schedule with boundary ``cfg.stage1`` is used.

    The plain probability margin loss 'pm' is ascended with
    β = :attr:`pm_beta`; give 'pm:beta=1' for the unweighted margin.
    """
    kind = 'pgd'
    default_loss = 'ce'

    #: Weight on p_max when the loss is 'pm'.
    pm_beta = 0.75

    def __init__(self, cfg=None, **kwargs):
        super().__init__(cfg, **kwargs)
        if self.cfg.loss.tag == 'pm':
            self.cfg = self.cfg.replace(
                loss=LossKind('pm_weighted', beta=self.pm_beta))

    @property
    def name(self):
        suffix = '_cosine' if self.cfg.step_rule == 'cosine' else ''
        return f'PGD_{self.cfg.loss.name}{suffix}'

    def check_config(self):
        check_sign_update(self)

    def attack_block(self, model, tracker, indices):
        cfg = self.cfg
        if cfg.step_rule == 'cosine':
            step_size = self.cosine_steps(cfg.stage1)
        else:
            def step_size(k):
                return cfg.step_size

        for r in range(1, cfg.restarts + 1):
            x0 = self.noise_init(tracker, indices, r)
            self.sign_ascent(model, tracker, x0, step_size,
                             lambda k: cfg.loss)


def check_sign_update(attack):
    if attack.cfg.update_rule != 'sign':
        raise InvalidAttackConfig(
            f"{attack.kind}: update_rule must be 'sign'; use the 'adaptive' "
            'attack for adaptive updates')
