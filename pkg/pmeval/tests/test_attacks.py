"""Tests for pmeval.attacks."""
import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from pmeval.attacks import (
    AdaptiveAttack,
    AttackConfig,
    ConstraintViolation,
    InvalidAttackConfig,
    MDAttack,
    MultiTargetAttack,
    PGDAttack,
    PMAttack,
    as_bool,
    check_constraints,
    cosine_step_size,
    get_attack,
    parse_descriptor,
    project_linf,
    rank_targets,
)
from pmeval.attacks.base import Tracker
from pmeval.losses import MARGIN
from pmeval.model import LabeledBatch, ModelSpec, init_classifier
from pmeval.testing import assert_logs
from pmeval.utils import derive_seed


def adv(outcomes):
    return np.stack([o.adv_example for o in outcomes])


def success(outcomes):
    return np.array([o.success for o in outcomes])


def test_project_linf():
    x = np.array([0.0, 0.5, 1.0, 0.98])
    result = project_linf([-0.5, 0.9, 0.5, 1.2], x, 0.1)
    assert_allclose(result, [0.0, 0.6, 0.9, 1.0])

    with pytest.raises(ValueError, match='shape mismatch'):
        project_linf(np.zeros(2), np.zeros(3), 0.1)


def test_cosine_step_size():
    eps = 0.05
    values = [cosine_step_size(k, 25, 100, eps) for k in range(1, 101)]

    # Both stages start at 2ε and decay to 0
    assert values[0] == pytest.approx(2 * eps)
    assert values[24] == pytest.approx(2 * eps)
    assert values[23] < values[0]
    assert values[-1] == pytest.approx(0, abs=1e-12)
    assert all(0 <= v <= 2 * eps + 1e-12 for v in values)

    # Single-stage schedule
    assert cosine_step_size(1, 1, 10, eps) == pytest.approx(2 * eps)
    assert cosine_step_size(6, 1, 10, eps) < 2 * eps
    # K1 = K: the last step restarts
    assert cosine_step_size(10, 10, 10, eps) == pytest.approx(2 * eps)

    with pytest.raises(ValueError, match='outside'):
        cosine_step_size(0, 25, 100, eps)
    with pytest.raises(ValueError, match='stage boundary'):
        cosine_step_size(1, 101, 100, eps)


def test_check_constraints():
    x = np.full((2, 3), 0.5)
    check_constraints(x + 0.1, x, 0.1)
    check_constraints(x + 0.1 + 5e-7, x, 0.1)

    with pytest.raises(ConstraintViolation, match='exceeds'):
        check_constraints(x + 0.11, x, 0.1)
    with pytest.raises(ConstraintViolation, match='outside \\[0, 1\\]'):
        check_constraints(x + 0.6, x, 1.0)


def test_config():
    cfg = AttackConfig()
    assert cfg.epsilon == 0.05 and cfg.steps == 100 and cfg.stage1 == 25
    assert cfg.step_size == 0.0125
    assert AttackConfig(alpha=0.01).step_size == 0.01

    # stage1 is capped at steps, and follows a changed steps when defaulted
    short = AttackConfig(steps=10)
    assert short.stage1 == 10
    assert short.replace(steps=50).stage1 == 25
    assert AttackConfig(steps=10, stage1=3).replace(steps=50).stage1 == 3

    # ε = 0 is allowed
    assert AttackConfig(epsilon=0).epsilon == 0

    assert AttackConfig(early_stop='off').early_stop is False

    # Early stopping is on, unless trajectories are recorded
    assert cfg.early_stop is True
    assert AttackConfig(record=True).early_stop is False
    assert AttackConfig(record=True, early_stop=True).early_stop is True
    assert AttackConfig(record=True).replace(record=False).early_stop is True
    assert cfg == AttackConfig(seed=0)
    assert cfg.to_dict()['loss'] is None


@pytest.mark.parametrize('kwargs, match', [
    (dict(epsilon=-0.1), 'epsilon must be finite'),
    (dict(epsilon=float('inf')), 'epsilon must be finite'),
    (dict(steps=0), 'steps must be >= 1'),
    (dict(steps=10, stage1=11), 'stage1 must be in \\[1, 10\\]'),
    (dict(restarts=0), 'restarts must be >= 1'),
    (dict(step_rule='linear'), 'step_rule must be'),
    (dict(update_rule='momentum'), 'update_rule must be'),
    (dict(alpha=0), 'alpha must be > 0'),
    (dict(beta1=1.0), 'beta1, beta2'),
    (dict(chunk_size=0), 'chunk_size'),
    (dict(threads=0), 'threads'),
    (dict(steps='many'), 'invalid literal'),
    (dict(early_stop='maybe'), 'expected on/off'),
    (dict(foo=1), "unknown attack option\\(s\\) \\['foo'\\]"),
])
def test_config_invalid(kwargs, match):
    with pytest.raises(InvalidAttackConfig, match=match):
        AttackConfig(**kwargs)


def test_as_bool():
    assert as_bool('ON') is True
    assert as_bool('0') is False
    assert as_bool(1) is True


def test_parse_descriptor():
    assert parse_descriptor('pgd') == ('pgd', {})
    assert parse_descriptor('PGD:loss=dlr, eps=0.1') == \
        ('pgd', dict(loss='dlr', epsilon='0.1'))
    assert parse_descriptor('pma:beta=0.5,k1=10') == \
        ('pma', dict(loss='pm:beta=0.5', stage1='10'))
    assert parse_descriptor(dict(attack='mt', t=3)) == ('mt', dict(targets=3))
    assert parse_descriptor('pgd:early-stop=off') == \
        ('pgd', dict(early_stop='off'))

    with pytest.raises(InvalidAttackConfig, match='is not key=value'):
        parse_descriptor('pgd:eps')
    with pytest.raises(InvalidAttackConfig, match="no 'attack' key"):
        parse_descriptor(dict(eps=0.1))


def test_get_attack():
    cfg = AttackConfig(steps=20)

    attack = get_attack('pgd:loss=dlr,eps=0.1', cfg)
    assert isinstance(attack, PGDAttack)
    assert attack.name == 'PGD_dlr'
    assert (attack.cfg.epsilon, attack.cfg.steps) == (0.1, 20)

    assert get_attack('pgd:loss=mg,step=cosine').name == 'PGD_mg_cosine'
    assert get_attack('pma').name == 'PMA'
    assert get_attack('pma:beta=0.5').name == 'PMA_pm:beta=0.5'
    assert get_attack('md').name == 'MD'
    assert get_attack('mt').name == 'MT_mg'
    assert get_attack('adaptive').cfg.update_rule == 'adaptive'

    # Standalone PGD weights p_max by 0.75; PMA keeps the plain margin
    pgd_pm = get_attack('pgd:loss=pm')
    assert pgd_pm.cfg.loss.weight == 0.75
    assert pgd_pm.name == 'PGD_pm:beta=0.75'
    assert get_attack('pgd:loss=pm:beta=1').cfg.loss.weight == 1.0
    assert get_attack('pma').cfg.loss.weight == 1.0

    # The seed is derived from the display name
    assert get_attack('pma', seed=4).cfg.seed == derive_seed(4, 'PMA')
    assert get_attack('pma', seed=4).cfg.seed != \
        get_attack('md', seed=4).cfg.seed
    assert get_attack('pma', AttackConfig(seed=7)).cfg.seed == 7


@pytest.mark.parametrize('descriptor, match', [
    ('nope', "unknown attack 'nope'"),
    ('pgd:foo=1', 'unknown attack option'),
    ('pma:loss=mg', 'loss must be one of'),
    ('md:loss=pm', 'loss must be one of'),
    ('pgd:update=adaptive', "update_rule must be 'sign'"),
    ('mt:t=0', 'targets must be >= 1'),
])
def test_get_attack_invalid(descriptor, match):
    with pytest.raises(InvalidAttackConfig, match=match):
        get_attack(descriptor)


def test_run_errors(linear_model, blobs):
    batch = blobs[1]
    attack = PGDAttack(steps=2)
    with pytest.raises(ValueError, match='no reference labels'):
        attack.run(linear_model, LabeledBatch(batch.inputs))
    with pytest.raises(ValueError, match='reference labels outside'):
        attack.run(linear_model, batch, reference=np.full(len(batch), 4))
    with pytest.raises(ValueError, match='reference labels for'):
        attack.run(linear_model, batch, reference=[0, 1])


@pytest.mark.parametrize('descriptor', ['pgd', 'pgd:loss=dlr', 'pma', 'md',
                                        'mt:t=2', 'adaptive'])
def test_constraints(linear_model, blobs, descriptor):
    batch = blobs[1]
    eps = 0.1
    attack = get_attack(descriptor, AttackConfig(epsilon=eps, steps=10,
                                                 restarts=2, seed=1))
    outcomes = attack.run(linear_model, batch)

    assert len(outcomes) == len(batch)
    x_adv = adv(outcomes)
    assert x_adv.dtype == np.float32
    assert np.abs(x_adv - batch.inputs).max() <= eps + 1e-6
    assert x_adv.min() >= 0 and x_adv.max() <= 1

    # Success agrees with the model's prediction on the returned example
    assert_array_equal(success(outcomes),
                       linear_model.predict(x_adv) != batch.labels)
    assert all(o.error is None for o in outcomes)


@pytest.mark.parametrize('descriptor', ['pgd', 'pma', 'mt:t=3', 'adaptive'])
def test_zero_epsilon(linear_model, blobs, descriptor):
    batch = blobs[1]
    outcomes = get_attack(descriptor, AttackConfig(epsilon=0, steps=5)) \
        .run(linear_model, batch)

    assert_array_equal(adv(outcomes), batch.inputs)
    # Only samples misclassified to begin with are broken
    assert_array_equal(success(outcomes),
                       linear_model.predict(batch.inputs) != batch.labels)


def test_md_single_stage_is_cosine_pgd(mlp_model, blobs):
    cfg = AttackConfig(epsilon=0.1, steps=10, stage1=1, restarts=2, seed=5)
    md = MDAttack(cfg).run(mlp_model, blobs[1])
    pgd = PGDAttack(cfg, loss='mg', step_rule='cosine').run(mlp_model,
                                                            blobs[1])

    assert_array_equal(adv(md), adv(pgd))
    assert [o.best_loss for o in md] == [o.best_loss for o in pgd]


def test_threads_and_active(mlp_model, blobs):
    batch = blobs[1]
    cfg = AttackConfig(epsilon=0.1, steps=10, chunk_size=16, seed=2)

    base = PMAttack(cfg).run(mlp_model, batch)
    threaded = PMAttack(cfg, threads=4).run(mlp_model, batch)
    assert adv(base).tobytes() == adv(threaded).tobytes()

    # Inactive samples are unchanged; active ones are unaffected
    active = np.arange(len(batch)) % 3 == 0
    partial = PMAttack(cfg).run(mlp_model, batch, active=active)
    for i, (a, b) in enumerate(zip(base, partial)):
        if active[i]:
            assert a.adv_example.tobytes() == b.adv_example.tobytes()
            assert a.success == b.success
        else:
            assert_array_equal(b.adv_example, batch.inputs[i])
            assert not b.success
            assert np.isnan(b.best_loss)
            assert b.steps_used == 0


def test_chunk_size(mlp_model, blobs):
    batch = blobs[1]
    cfg = AttackConfig(epsilon=0.1, steps=10, seed=2)
    a = success(PMAttack(cfg, chunk_size=7).run(mlp_model, batch))
    b = success(PMAttack(cfg, chunk_size=256).run(mlp_model, batch))
    assert abs(a.mean() - b.mean()) <= 0.02


def test_record(linear_model, blobs):
    batch = blobs[1].subset(slice(0, 10))
    cfg = AttackConfig(epsilon=0.1, steps=6, restarts=2, record=True)
    outcomes = PGDAttack(cfg).run(linear_model, batch)

    for o in outcomes:
        # Clean input, then K + 1 evaluations per restart
        assert o.trajectory.shape == (1 + 2 * 7,)
        assert np.all(np.diff(o.trajectory) >= 0)
        assert o.trajectory[-1] == o.best_loss
        assert o.steps_used == 12

    assert PGDAttack(cfg, record=False).run(linear_model, batch)[0] \
        .trajectory is None


def test_early_stop(linear_model, blobs):
    batch = blobs[1]
    cfg = AttackConfig(epsilon=0.3, steps=20, seed=3)
    outcomes = PGDAttack(cfg).run(linear_model, batch)
    broken = [o for o in outcomes if o.success]
    assert broken
    # Broken samples stop before using every step
    assert min(o.steps_used for o in broken) < 20


def test_pma_is_stronger_with_more_restarts(mlp_model, blobs):
    batch = blobs[1]
    cfg = AttackConfig(epsilon=0.1, steps=10, seed=0)
    one = success(PMAttack(cfg).run(mlp_model, batch))
    three = success(PMAttack(cfg, restarts=3).run(mlp_model, batch))
    # Restart 1 is shared, so more restarts never lose a success
    assert np.all(three >= one)


def test_rank_targets():
    logits = np.array([[3.0, 1.0, 2.0, 2.0], [0.0, 5.0, 4.0, -1.0]])
    assert_array_equal(rank_targets(logits, [0, 1], 2), [[2, 3], [2, 0]])


def test_multi_target_classes(caplog):
    # Two classes: a single target
    spec = ModelSpec.mlp(3, (), 2)
    model = init_classifier(spec, 0)
    batch = LabeledBatch(np.full((5, 3), 0.5), np.zeros(5))
    attack = MultiTargetAttack(targets=9, steps=3)
    assert attack.target_count(2) == 1

    caplog.set_level(logging.INFO, logger='pmeval')
    with assert_logs(caplog, 'using 1 target instead of 9'):
        assert len(attack.run(model, batch)) == 5

    # T must be less than N
    model = init_classifier(ModelSpec.mlp(3, (), 4), 0)
    with pytest.raises(InvalidAttackConfig, match='targets must be < 4'):
        MultiTargetAttack(targets=4, steps=3).run(model, batch)
    MultiTargetAttack(targets=3, steps=3).run(model, batch)


def test_adaptive(mlp_model, blobs):
    batch = blobs[1]
    cfg = AttackConfig(epsilon=0.1, steps=10, restarts=2, seed=0)
    attack = AdaptiveAttack(cfg)
    assert attack.cfg.update_rule == 'adaptive'
    assert attack.name == 'ADAPTIVE_pm'

    a = attack.run(mlp_model, batch)
    b = AdaptiveAttack(cfg).run(mlp_model, batch)
    assert adv(a).tobytes() == adv(b).tobytes()
    # Loss never decreases from the clean value
    assert all(o.best_loss >= -1 for o in a)


def test_tracker_rounds_iterates():
    class Threshold:
        """Predicts class 1 above a threshold float32 cannot represent."""
        def predict(self, x):
            return (np.asarray(x, dtype=np.float64)[:, 0] > 0.5 + 1e-12) \
                .astype(np.int64)

    tracker = Tracker(Threshold(), np.full((1, 1), 0.4), np.array([0]),
                      MARGIN, [True], early_stop=True, record=False)

    # Misclassified in 64 bits only: the sample stays live
    tracker.update(np.full((1, 1), 0.5 + 2e-12), np.array([[0.0, 1e-12]]))
    assert not tracker.success[0] and tracker.live[0]
    assert not tracker.outcomes()[0].success

    tracker.update(np.full((1, 1), 0.6), np.array([[0.0, 0.1]]))
    assert tracker.success[0] and not tracker.live[0]
    assert tracker.outcomes()[0].success


def two_class_linear():
    """Linear 4-input, 2-class model; w₁ − w₀ = [-2, 2, -1, 0.25]."""
    weight = np.array([[1, -1], [-1, 1], [0.5, -0.5], [0, 0.25]])
    model = init_classifier(ModelSpec.mlp(4, (), 2), 0)
    return model.with_params([dict(weight=weight, bias=np.zeros(2))])


def clean_margin(model, batch):
    z = model.forward(batch.inputs)
    rows = np.arange(len(batch))
    return z[rows, batch.labels] - z[rows, 1 - batch.labels]


@pytest.mark.parametrize('eps, expected', [
    (0.1, [True, True, False, False, False]),
    (0.2, [True] * 5),
])
def test_pgd_linear_oracle(eps, expected):
    model = two_class_linear()
    inputs = np.full((5, 4), 0.5)
    inputs[:, 0] += [0, 0.05, 0.1, 0.15, 0.2]
    batch = LabeledBatch(inputs, np.zeros(5))

    # One full-length sign step is optimal; it succeeds exactly when
    # ε·‖w₁ − w₀‖₁ exceeds the clean margin
    margin = clean_margin(model, batch)
    assert_allclose(margin, [0.375, 0.475, 0.575, 0.675, 0.775], atol=1e-6)
    assert_array_equal(eps * 5.25 > margin, expected)

    cfg = AttackConfig(epsilon=eps, steps=1, alpha=2 * eps, loss='mg')
    outcomes = PGDAttack(cfg).run(model, batch)
    assert_array_equal(success(outcomes), expected)

    # Robust samples end at the corner of the ε-ball
    robust = ~np.array(expected)
    assert_allclose(np.abs(adv(outcomes) - batch.inputs)[robust], eps,
                    atol=1e-6)


def test_pgd_epsilon_monotone():
    model = two_class_linear()
    inputs = np.random.default_rng(5).uniform(0.2, 0.8, size=(200, 4))
    batch = LabeledBatch(inputs, model.predict(inputs.astype(np.float32)))
    margin = clean_margin(model, batch)

    previous = np.zeros(len(batch), dtype=bool)
    for eps in (0.025, 0.05, 0.1):
        cfg = AttackConfig(epsilon=eps, steps=1, alpha=2 * eps, loss='mg',
                           seed=2)
        result = success(PGDAttack(cfg).run(model, batch))

        # Closed form, away from the decision boundary
        clear = np.abs(eps * 5.25 - margin) > 1e-4
        assert_array_equal(result[clear], (eps * 5.25 > margin)[clear])

        # Doubling ε keeps every success
        assert np.all(result[previous])
        previous = result


def test_multi_target_covers_single_target(mlp_model, blobs):
    batch = blobs[1]
    cfg = AttackConfig(epsilon=0.3, steps=10, seed=7)
    single = success(MultiTargetAttack(cfg, targets=1).run(mlp_model, batch))
    union = success(MultiTargetAttack(cfg, targets=3).run(mlp_model, batch))

    assert single.any()
    assert np.all(union[single])
    assert union.sum() >= single.sum()
