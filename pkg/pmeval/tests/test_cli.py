"""Tests for the command-line interface."""
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

import pmeval
from pmeval.backend.io import load_dataset, read_container, read_ids
from pmeval.model import LabeledBatch


@pytest.fixture(scope='module')
def workspace(pmeval_cli, tmp_path_factory):
    """Generated data and a trained model."""
    base = tmp_path_factory.mktemp('cli')
    r = pmeval_cli.invoke([
        '--seed', '1', 'generate', '--classes', '3', '--dim', '4',
        '--train-count', '150', '--eval-count', '60', '--out',
        str(base / 'data')])
    assert r.exit_code == 0, r.output

    r = pmeval_cli.invoke([
        'train', '--data', str(base / 'data' / 'train'), '--hidden', '8',
        '--epochs', '5', '--lr', '0.5', '--out', str(base / 'model')])
    assert r.exit_code == 0, r.output
    return base


def attack_args(base, *args):
    return ['--model', str(base / 'model'), '--data',
            str(base / 'data' / 'eval'), '--steps', '5'] + list(args)


def test_main(pmeval_cli):
    r = pmeval_cli.invoke(['--help'])
    assert r.exit_code == 0
    for command in ('generate', 'train', 'attack', 'ensemble', 'relative',
                    'filter', 'report', 'config'):
        assert command in r.output


def test_generate(workspace):
    train = load_dataset(workspace / 'data' / 'train')
    evaluation = load_dataset(workspace / 'data' / 'eval')
    assert train.inputs.shape == (150, 4)
    assert len(evaluation) == 60
    assert set(np.unique(train.labels)) == {0, 1, 2}


def test_generate_deterministic(pmeval_cli, tmp_path):
    for name in 'ab':
        r = pmeval_cli.invoke(['--seed', '3', 'generate', '--kind', 'rings',
                               '--classes', '2', '--dim', '2',
                               '--train-count', '20', '--eval-count', '10',
                               '--out', str(tmp_path / name)])
        assert r.exit_code == 0, r.output
    for path in ('train/inputs.pmat', 'eval/labels.pmat'):
        assert (tmp_path / 'a' / path).read_bytes() == \
            (tmp_path / 'b' / path).read_bytes()


def test_train(workspace):
    model = pmeval.load_checkpoint(workspace / 'model')
    assert model.spec == pmeval.ModelSpec.mlp(4, (8,), 3)


def test_attack(pmeval_cli, workspace, tmp_path):
    out = tmp_path / 'report'
    r = pmeval_cli.invoke(['attack'] + attack_args(
        workspace, '--attack', 'pgd:loss=ce', '--out', str(out),
        '--dump-adv', str(tmp_path / 'adv.pmat')))
    assert r.exit_code == 0, r.output
    assert 'PGD_ce' in r.output

    assert {p.name for p in out.iterdir()} == \
        {'report.yaml', 'report.csv', 'report.txt'}
    info = yaml.safe_load((out / 'report.yaml').read_text())
    assert info['mode'] == 'standard'
    assert info['sample_count'] == 60
    assert info['attacks'][0]['attack'] == 'PGD_ce'
    assert info['config']['attack_options']['steps'] == 5

    table = pd.read_csv(out / 'report.csv')
    assert list(table.columns) == ['attack', 'robust_acc',
                                   'cumulative_robust_acc', 'wall_time_s']

    adv = read_container(tmp_path / 'adv.pmat')
    assert adv.shape == (60, 4)


def test_attack_options(pmeval_cli, workspace, tmp_path):
    out = tmp_path / 'report'
    r = pmeval_cli.invoke([
        'attack', '--model', str(workspace / 'model'), '--data',
        str(workspace / 'data' / 'eval'), '--attack', 'pgd', '--loss', 'ce',
        '--eps', '0.05', '--steps', '5', '--k1', '2', '--restarts', '1',
        '--targets', '3', '--seed', '1', '--early-stop', 'on', '--out',
        str(out)])
    assert r.exit_code == 0, r.output
    assert 'PGD_ce' in r.output

    options = yaml.safe_load((out / 'report.yaml').read_text())['config'][
        'attack_options']
    assert options['loss'] == 'ce'
    assert options['stage1'] == 2
    assert options['targets'] == 3
    assert options['early_stop'] is True

    # --loss replaces the loss of the descriptor
    r = pmeval_cli.invoke(['attack'] + attack_args(
        workspace, '--attack', 'pgd:loss=dlr', '--loss', 'mg'))
    assert r.exit_code == 0, r.output
    assert 'PGD_mg' in r.output and 'PGD_dlr' not in r.output


def test_report_rerender(pmeval_cli, workspace, tmp_path):
    out = tmp_path / 'report'
    r = pmeval_cli.invoke(['attack'] + attack_args(workspace, '--out',
                                                   str(out)))
    assert r.exit_code == 0, r.output

    before = {p.name: p.read_bytes() for p in out.iterdir()}
    r = pmeval_cli.invoke(['report', str(out)])
    assert r.exit_code == 0, r.output
    assert before['report.txt'].decode() in r.output
    assert {p.name: p.read_bytes() for p in out.iterdir()} == before


def test_no_timing_deterministic(pmeval_cli, workspace, tmp_path):
    results = []
    for threads in ('1', '3'):
        out = tmp_path / threads
        r = pmeval_cli.invoke(['--no-timing', '--threads', threads,
                               'ensemble'] + attack_args(
            workspace, '--attack', 'pma', '--attack', 'mt:t=2', '--out',
            str(out)))
        assert r.exit_code == 0, r.output
        results.append((out / 'report.yaml').read_bytes())

    assert results[0] == results[1]
    info = yaml.safe_load(results[0])
    assert all(a['wall_time_s'] == 0.0 for a in info['attacks'])
    assert 'threads' not in info['config']


def test_ensemble(pmeval_cli, workspace):
    r = pmeval_cli.invoke(['ensemble'] + attack_args(
        workspace, '--attack', 'pma', '--attack', 'pgd:loss=ce',
        '--individual'))
    assert r.exit_code == 0, r.output
    assert 'PMA' in r.output and 'PGD_ce' in r.output
    assert 'Ensemble robust accuracy' in r.output
    assert 'diff (PM' in r.output


def test_run_config(pmeval_cli, workspace, tmp_path):
    path = tmp_path / 'run.yaml'
    path.write_text(yaml.safe_dump(dict(
        model=str(workspace / 'model'), data=str(workspace / 'data' / 'eval'),
        steps=3, attacks=['md'], seed=5, out=str(tmp_path / 'out'))))

    r = pmeval_cli.invoke(['--config', str(path), 'ensemble'])
    assert r.exit_code == 0, r.output

    info = yaml.safe_load((tmp_path / 'out' / 'report.yaml').read_text())
    assert info['seed'] == 5
    assert [a['attack'] for a in info['attacks']] == ['MD']
    assert str(path) in info['config']['paths']


def test_relative(pmeval_cli, workspace, tmp_path):
    data = load_dataset(workspace / 'data' / 'eval')
    pmeval.save_dataset(LabeledBatch(data.inputs), tmp_path / 'unlabeled')

    r = pmeval_cli.invoke(['relative', '--model', str(workspace / 'model'),
                           '--data', str(tmp_path / 'unlabeled'), '--steps',
                           '5', '--out', str(tmp_path / 'out')])
    assert r.exit_code == 0, r.output
    assert 'relative mode' in r.output

    info = yaml.safe_load((tmp_path / 'out' / 'report.yaml').read_text())
    assert info['clean_accuracy'] is None
    assert 0 <= info['ensemble_robust_accuracy'] <= 1


def test_sweep(pmeval_cli, workspace, tmp_path):
    r = pmeval_cli.invoke(['attack'] + attack_args(
        workspace, '--sweep', 'k1=1,5', '--out', str(tmp_path)))
    assert r.exit_code == 0, r.output

    table = pd.read_csv(tmp_path / 'sweep.csv')
    assert table['k1'].tolist() == [1, 5]
    assert table['attack'].tolist() == ['PMA', 'PMA']

    r = pmeval_cli.invoke(['attack'] + attack_args(workspace, '--sweep',
                                                   'k1'))
    assert r.exit_code == 1


def test_filter(pmeval_cli, tmp_path):
    vectors = np.random.default_rng(0).uniform(size=(40, 3)) \
        .astype(np.float32)
    pmeval.write_container(tmp_path / 'e.pmat', vectors)
    (tmp_path / 'e.ids').write_text(''.join(f'x{i}\n' for i in range(40)))

    r = pmeval_cli.invoke(['filter', '--embeddings', str(tmp_path / 'e.pmat'),
                           '--ids', str(tmp_path / 'e.ids'), '--k', '5',
                           '--m', '10', '--out', str(tmp_path / 'sel')])
    assert r.exit_code == 0, r.output
    assert 'Selected 10 of 40 points' in r.output

    ids = read_ids(tmp_path / 'sel.ids')
    assert len(ids) == 10 and all(i.startswith('x') for i in ids)
    assert len(pd.read_csv(tmp_path / 'sel.csv')) == 40


def test_config(pmeval_cli):
    try:
        r = pmeval_cli.invoke(['config', 'set', 'lid k', '7'])
        assert r.exit_code == 0, r.output
        assert pmeval.config.get('lid k') == 7

        r = pmeval_cli.invoke(['config', 'get', 'lid k'])
        assert r.exit_code == 0, r.output
        assert r.output.strip().endswith('7')
    finally:
        pmeval.config.clear()

    assert pmeval_cli.invoke(['config', 'get', 'lid k', '3']).exit_code == 1
    assert pmeval_cli.invoke(['config', 'set', 'nope', '3']).exit_code == 1


@pytest.mark.parametrize('args', [
    ['nope'],
    ['generate', '--bad-option'],
    ['generate'],
    ['attack', '--model', 'm'],
], ids=['command', 'option', 'missing-out', 'missing-data'])
def test_usage_errors(pmeval_cli, args):
    assert pmeval_cli.invoke(args).exit_code == 1


def test_exit_codes(pmeval_cli, workspace, tmp_path):
    # Invalid configuration
    r = pmeval_cli.invoke(['attack'] + attack_args(workspace, '--eps',
                                                   '-0.1'))
    assert r.exit_code == 1
    assert 'epsilon must be finite' in r.output

    # Missing and malformed files
    r = pmeval_cli.invoke(['attack', '--model', str(tmp_path / 'none'),
                           '--data', str(workspace / 'data' / 'eval')])
    assert r.exit_code == 2

    bad = tmp_path / 'bad'
    bad.mkdir()
    (bad / 'inputs.pmat').write_bytes(b'XXXX')
    r = pmeval_cli.invoke(['attack', '--model', str(workspace / 'model'),
                           '--data', str(bad)])
    assert r.exit_code == 2
    assert 'truncated header' in r.output

    # Diverging training
    r = pmeval_cli.invoke(['train', '--data',
                           str(workspace / 'data' / 'train'), '--lr', '1e300',
                           '--epochs', '2', '--out', str(tmp_path / 'm')])
    assert r.exit_code == 3
    assert not Path(tmp_path / 'm').exists()
