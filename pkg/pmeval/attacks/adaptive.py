import numpy as np

from pmeval.losses import loss_and_grad
from pmeval.utils import sample_rng

from .base import Attack, broadcast_rows, check_constraints

#: Added to the root of the second moment.
ADAM_EPS = 1e-8


class AdaptiveAttack(Attack):
    """Moment-scaled ascent on a tanh-parameterised perturbation.

    The free variable *u* gives the example ``clip(x + ε·tanh(u), 0, 1)``,
    which lies in the ε-ball for any *u*. Each step is an Adam update of *u*
    with bias-corrected first and second moments (``cfg.lr``,
    ``cfg.beta1``, ``cfg.beta2``) ascending ``cfg.loss``. Restart 1 starts
    at u = 0; later restarts at u uniform in [−1, 1].
    """
    kind = 'adaptive'
    default_loss = 'pm'

    def __init__(self, cfg=None, **kwargs):
        kwargs.setdefault('update_rule', 'adaptive')
        super().__init__(cfg, **kwargs)

    def initial_u(self, tracker, indices, r):
        if r == 1:
            return np.zeros_like(tracker.x)
        shape = tracker.x.shape[1:]
        return np.stack([
            sample_rng(self.cfg.seed, i, r).uniform(-1, 1, size=shape)
            for i in indices])

    def attack_block(self, model, tracker, indices):
        cfg = self.cfg
        x, eps = tracker.x, cfg.epsilon

        for r in range(1, cfg.restarts + 1):
            u = self.initial_u(tracker, indices, r)
            m = np.zeros_like(x)
            v = np.zeros_like(x)

            for k in range(1, cfg.steps + 2):
                shifted = x + eps * np.tanh(u)
                x_adv = np.clip(shifted, 0.0, 1.0)
                check_constraints(x_adv, x, eps)

                z, caches = model.forward_cached(x_adv)
                tracker.update(x_adv, z)
                moving = tracker.live
                if k > cfg.steps or not moving.any():
                    break

                _, grad_z = loss_and_grad(cfg.loss, z, tracker.reference)
                grad = model.backward(caches, grad_z)

                # Chain rule through tanh; zero where the clip is active
                inside = (shifted > 0) & (shifted < 1)
                g = grad * eps * (1 - np.tanh(u) ** 2) * inside

                m = cfg.beta1 * m + (1 - cfg.beta1) * g
                v = cfg.beta2 * v + (1 - cfg.beta2) * g ** 2
                m_hat = m / (1 - cfg.beta1 ** k)
                v_hat = v / (1 - cfg.beta2 ** k)

                step = u + cfg.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
                u = np.where(broadcast_rows(moving, u), step, u)
                tracker.steps[moving] += 1
