"""Two-stage attacks with a cosine step schedule and alternating stage-1
terms."""
from pmeval.losses import MARGIN, PM, stage_kind

from .base import Attack, InvalidAttackConfig
from .pgd import check_sign_update


class TwoStageAttack(Attack):
    """Common control flow of :class:`PMAttack` and :class:`MDAttack`.

    For each restart r = 1 … n, starting from uniform noise, steps
    k = 1 … K use :func:`.cosine_step_size` with boundary K1 and ascend
    :func:`.stage_kind` (k, K1, r, loss). The best iterate is chosen by
    :attr:`tracked_loss` over all steps and restarts.
    """
    #: Losses accepted by the attack.
    losses = ()

    def check_config(self):
        check_sign_update(self)
        if self.cfg.loss.tag not in self.losses:
            raise InvalidAttackConfig(
                f'{self.kind}: loss must be one of {list(self.losses)}; got '
                f'{self.cfg.loss.name!r}')

    def attack_block(self, model, tracker, indices):
        cfg = self.cfg
        step_size = self.cosine_steps(cfg.stage1)

        for r in range(1, cfg.restarts + 1):
            x0 = self.noise_init(tracker, indices, r)
            self.sign_ascent(
                model, tracker, x0, step_size,
                lambda k: stage_kind(k, cfg.stage1, r, cfg.loss))  # noqa: B023


class PMAttack(TwoStageAttack):
    """Probability margin attack.

    Stage 1 ascends −p_y on odd restarts and p_max on even restarts; stage 2
    ascends β·p_max − p_y (β = 1 unless the loss is ``pm:beta=…``). The
    returned iterate maximises the plain probability margin p_max − p_y.
    """
    kind = 'pma'
    default_loss = 'pm'
    losses = ('pm', 'pm_weighted')

    @property
    def name(self):
        if self.cfg.loss.tag == 'pm':
            return 'PMA'
        return f'PMA_{self.cfg.loss.name}'

    @property
    def tracked_loss(self):
        return PM


class MDAttack(TwoStageAttack):
    """Margin decomposition attack: as :class:`PMAttack`, with stage-1 terms
    z_max / −z_y and the logit margin z_max − z_y in stage 2."""
    kind = 'md'
    default_loss = 'mg'
    losses = ('margin',)

    @property
    def name(self):
        return 'MD'

    @property
    def tracked_loss(self):
        return MARGIN
