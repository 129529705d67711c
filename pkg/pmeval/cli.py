"""Command-line interface.

Exit codes:

- 0: success.
- 1: invalid configuration or usage.
- 2: input/output error, including malformed files.
- 3: numeric failure, e.g. diverging training or a violated constraint.
"""
from pathlib import Path

import click
import yaml

import pmeval
from pmeval.attacks import AttackConfig, ConstraintViolation
from pmeval.backend.io import ContainerFormatError

#: Exit codes by category.
EXIT_CODES = dict(config=1, io=2, numeric=3)


class CommandError(click.ClickException):
    """Failure of a command, with one of :data:`EXIT_CODES`."""
    def __init__(self, message, exit_code=1):
        super().__init__(message)
        self.exit_code = exit_code


def exit_code(exc):
    """Return the exit code for an exception raised by a command."""
    # Failures inside a Reporter graph are classified by their cause
    cause = getattr(exc, 'cause', None)
    if isinstance(exc, pmeval.ComputationError) and cause is not None:
        return exit_code(cause)
    elif isinstance(exc, (OSError, ContainerFormatError, yaml.YAMLError)):
        return EXIT_CODES['io']
    elif isinstance(exc, (ArithmeticError, ConstraintViolation)):
        return EXIT_CODES['numeric']
    return EXIT_CODES['config']


class Group(click.Group):
    """Command group that maps exceptions to :data:`EXIT_CODES`."""
    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as e:
            e.exit_code = EXIT_CODES['config']
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_CODES['config']
            raise
        except (click.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except Exception as e:
            cause = getattr(e, 'cause', None) or e
            raise CommandError(f'{type(cause).__name__}: {cause}',
                               exit_code(e)) from e


@click.group(cls=Group)
@click.option('--config', 'run_config', type=click.Path(dir_okay=False),
              help='YAML run configuration; options given on the command '
                   'line take precedence.')
@click.option('--seed', type=int, help='Global seed.')
@click.option('--threads', type=int, help='Worker threads.')
@click.option('--no-timing', is_flag=True, default=None,
              help='Report wall times as 0.0.')
@click.option('--early-stop', type=click.Choice(['on', 'off']),
              help='Freeze samples once misclassified.')
@click.pass_context
def main(ctx, run_config, seed, threads, no_timing, early_stop):
    pmeval.utils.logger()

    values = {}
    if run_config:
        with open(run_config) as f:
            values = yaml.safe_load(f) or {}
        if not isinstance(values, dict):
            raise click.UsageError(f'{run_config} is not a YAML mapping')
        values['paths'] = values.get('paths', []) + [run_config]

    values.update(_given(threads=threads, early_stop=early_stop))
    if no_timing:
        values['timing'] = False
    values['seed'] = pmeval.config.global_seed(
        seed if seed is not None else values.get('seed'))

    ctx.obj = values


def _given(**options):
    return {k: v for k, v in options.items() if v is not None}


def _resolve(run, **options):
    """Combine the run configuration *run* with command *options*."""
    result = dict(run)
    result.update(_given(**options))
    return result


def _required(values, *keys):
    missing = [k for k in keys if values.get(k) is None]
    if missing:
        raise click.UsageError(f'missing {", ".join(missing)}; give them as '
                               'options or in the --config file')
    return [values[k] for k in keys]


def _attack_config(values):
    """:class:`.AttackConfig` from the resolved *values*."""
    options = {k: values[k] for k in AttackConfig.defaults if k in values}
    return AttackConfig.from_config(pmeval.config, **options)


def _paths(values, *keys):
    return list(values.get('paths', [])) + [values[k] for k in keys
                                            if values.get(k)]


def _echo_config(values, *drop):
    return {k: v for k, v in values.items()
            if k not in drop + ('paths', 'seed')}


# Options shared by attack commands
_attack_options = [
    click.option('--model', 'model', help='Checkpoint directory.'),
    click.option('--data', 'data', help='Dataset directory.'),
    click.option('--eps', 'epsilon', type=float, help='L∞ budget ε.'),
    click.option('--steps', type=int, help='Iterations K.'),
    click.option('--k1', 'stage1', type=int, help='Stage boundary K1.'),
    click.option('--restarts', type=int, help='Restarts n.'),
    click.option('--targets', type=int,
                 help='Target classes T of the multi-target attack.'),
    click.option('--seed', type=int, help='Global seed.'),
    click.option('--early-stop', type=click.Choice(['on', 'off']),
                 help='Freeze samples once misclassified.'),
    click.option('--out', help='Report directory.'),
]

_loss_option = click.option(
    '--loss', help="Loss of the attack, e.g. 'ce' or 'pm:beta=0.75'; "
                   'overrides a loss in the descriptor.')


def attack_options(func):
    for option in reversed(_attack_options):
        func = option(func)
    return func


def _descriptor(values):
    """The 'attack' descriptor of *values*, with any 'loss' appended."""
    descriptor, loss = values['attack'], values.get('loss')
    if not loss:
        return descriptor
    elif isinstance(descriptor, dict):
        return dict(descriptor, loss=loss)
    sep = ',' if ':' in descriptor else ':'
    return f'{descriptor}{sep}loss={loss}'


def _load(values):
    model_path, data_path = _required(values, 'model', 'data')
    return (pmeval.load_checkpoint(model_path),
            pmeval.load_dataset(data_path))


def _finish(report, values):
    if values.get('out'):
        report.write(values['out'])
    print(report.to_text(), end='')


@main.command()
@click.option('--kind', type=click.Choice(['blobs', 'rings']))
@click.option('--classes', type=int, help='Number of classes N.')
@click.option('--dim', type=int, help='Input dimension d.')
@click.option('--train-count', type=int, help='Training samples.')
@click.option('--eval-count', type=int, help='Evaluation samples.')
@click.option('--separation', type=float,
              help='Blob separation in standard deviations.')
@click.option('--out', help='Output directory.')
@click.pass_obj
def generate(run, **options):
    """Generate a synthetic dataset.

    Writes the directories OUT/train and OUT/eval.
    """
    values = dict(kind='blobs', classes=10, dim=32, train_count=2000,
                  eval_count=1000, separation=5.0)
    values.update(_resolve(run, **options))
    out, = _required(values, 'out')

    data = pmeval.generate_synthetic(
        values['kind'], int(values['classes']), int(values['dim']),
        int(values['train_count']) + int(values['eval_count']),
        values['seed'], float(values['separation']))
    train, evaluation = pmeval.synthetic.split(data,
                                               int(values['train_count']))
    pmeval.save_dataset(train, Path(out, 'train'))
    pmeval.save_dataset(evaluation, Path(out, 'eval'))
    print(f'Wrote {len(train)} training and {len(evaluation)} evaluation '
          f'samples to {out}')


@main.command()
@click.option('--data', help='Training dataset directory.')
@click.option('--hidden', help="Hidden layer widths, e.g. '64' or '32,64'; "
                               "'' for a linear model.")
@click.option('--epochs', type=int)
@click.option('--lr', type=float, help='Learning rate.')
@click.option('--batch-size', type=int)
@click.option('--adversarial-eps', type=float,
              help='Train on PGD examples with this budget.')
@click.option('--adversarial-steps', type=int,
              help='PGD iterations for adversarial training.')
@click.option('--out', help='Checkpoint directory.')
@click.pass_obj
def train(run, **options):
    """Train a classifier."""
    values = dict(hidden='64', epochs=20, lr=0.1, batch_size=32,
                  adversarial_steps=10)
    values.update(_resolve(run, **options))
    data_path, out = _required(values, 'data', 'out')

    data = pmeval.load_dataset(data_path)
    if data.labels is None:
        raise click.UsageError(f'{data_path} has no labels')
    classes = values.get('classes') or int(data.labels.max(initial=1)) + 1
    hidden = [int(h) for h in pmeval.utils.as_str_list(values['hidden'])]
    spec = pmeval.ModelSpec.mlp(data.inputs.shape[1], hidden, int(classes))
    model = pmeval.init_classifier(spec, values['seed'])

    adversarial = None
    if values.get('adversarial_eps') is not None:
        adversarial = _attack_config(dict(
            values, epsilon=values['adversarial_eps'],
            steps=int(values['adversarial_steps'])))

    model = pmeval.train(model, data, int(values['epochs']),
                         float(values['lr']), int(values['batch_size']),
                         adversarial=adversarial, seed=values['seed'])
    pmeval.save_checkpoint(model, out)

    accuracy = float((model.predict(data.inputs) == data.labels).mean())
    print(f'Training accuracy {100 * accuracy:.2f}%; saved to {out}')


@main.command()
@attack_options
@_loss_option
@click.option('--attack', 'attack', help="Attack descriptor, e.g. 'pma' or "
                                         "'pgd:loss=ce'.")
@click.option('--sweep', 'sweep',
              help="Parameter values, e.g. 'k1=15,20,25'.")
@click.option('--dump-adv', help='Write the adversarial examples to this '
                                 'container file.')
@click.pass_obj
def attack(run, **options):
    """Evaluate one attack."""
    values = dict(attack='pma')
    values.update(_resolve(run, **options))
    model, data = _load(values)
    cfg = _attack_config(values)

    if values.get('sweep'):
        param, _, text = values['sweep'].partition('=')
        choices = pmeval.utils.as_str_list(text)
        if not param or not choices:
            raise click.UsageError(f"--sweep must be 'param=v1,v2,…'; got "
                                   f"{values['sweep']!r}")
        table = pmeval.sweep(model, data, _descriptor(values), param.strip(),
                             choices, cfg=cfg, seed=values['seed'])
        if values.get('out'):
            out = Path(values['out'])
            out.mkdir(parents=True, exist_ok=True)
            pmeval.utils.atomic_write(
                out / 'sweep.csv',
                table.to_csv(index=False, na_rep='NA',
                             float_format='%.6f').encode())
        print(table.to_string(index=False))
        return

    reporter = pmeval.build_reporter(
        model, data, [_descriptor(values)], cfg=cfg, seed=values['seed'],
        timing=values.get('timing', True),
        config=_echo_config(values, 'model', 'data', 'out', 'dump_adv'),
        paths=_paths(values, 'model', 'data'))
    _finish(reporter.get('report'), values)

    if values.get('dump_adv'):
        pmeval.write_container(values['dump_adv'],
                               reporter.adversarial_examples(0))


@main.command()
@attack_options
@click.option('--attack', 'attacks', multiple=True,
              help='Attack descriptor; repeat for each stage, in order.')
@click.option('--individual', is_flag=True, default=None,
              help='Also report the robust accuracy of each attack alone.')
@click.pass_obj
def ensemble(run, **options):
    """Evaluate a cascade of attacks.

    Each attack only runs on the samples that all earlier attacks failed to
    break. For PMA+1, give '--attack pma --attack OTHER --individual'.
    """
    options['attacks'] = list(options['attacks']) or None
    values = dict(attacks=['pma', 'mt'])
    values.update(_resolve(run, **options))
    model, data = _load(values)

    report = pmeval.evaluate(
        model, data, values['attacks'], cfg=_attack_config(values),
        seed=values['seed'], individual=bool(values.get('individual')),
        timing=values.get('timing', True),
        config=_echo_config(values, 'model', 'data', 'out'),
        paths=_paths(values, 'model', 'data'))
    _finish(report, values)


@main.command()
@attack_options
@_loss_option
@click.option('--attack', 'attack', help='Attack descriptor.')
@click.pass_obj
def relative(run, **options):
    """Evaluate relative robustness; labels are not needed."""
    values = dict(attack='pma')
    values.update(_resolve(run, **options))
    model, data = _load(values)

    report = pmeval.evaluate(
        model, data, [_descriptor(values)], cfg=_attack_config(values),
        seed=values['seed'], mode='relative',
        timing=values.get('timing', True),
        config=_echo_config(values, 'model', 'data', 'out'),
        paths=_paths(values, 'model', 'data'))
    _finish(report, values)


@main.command()
@click.option('--embeddings', help='Container file of [M, d] embeddings.')
@click.option('--ids', help='Newline-delimited identifiers.')
@click.option('--k', 'k', type=int, help='Neighbourhood size.')
@click.option('--m', 'm', type=int, help='Number of points to select.')
@click.option('--score', type=click.Choice(pmeval.lid.SCORES))
@click.option('--out', help='Output path; .ids and .csv are written.')
@click.pass_obj
def filter(run, **options):
    """Select the points whose LID is closest to the median."""
    values = dict(score='deviation', k=pmeval.config.get('lid k'))
    values.update(_resolve(run, **options))
    path, m, out = _required(values, 'embeddings', 'm', 'out')

    embeds = pmeval.EmbeddingSet.read(path, values.get('ids'))
    scores = pmeval.lid_mle(embeds, int(values['k']),
                            threads=int(values.get('threads', 1)))
    table = pmeval.lid.filter_table(scores, int(m), values['score'])
    ids_path, _ = pmeval.lid.write_selection(table, out)
    print(f'Selected {int(table["selected"].sum())} of {len(embeds)} points; '
          f'{len(scores.errors)} without an estimate. Wrote {ids_path}')


@main.command()
@click.argument('path')
@click.pass_obj
def report(run, path):
    """Re-render the report in directory PATH."""
    result = pmeval.RobustnessReport.read(path)
    if Path(path).is_dir():
        result.write(path)
    print(result.to_text(), end='')


@main.command()
@click.argument('action', type=click.Choice(['set', 'get']))
@click.argument('key', metavar='KEY')
@click.argument('value', nargs=-1)
def config(action, key, value):
    """Set/get configuration keys."""
    if action == 'get':
        if len(value):
            raise click.BadArgumentUsage("VALUE given for 'get' action")
        print(pmeval.config.get(key))
    elif action == 'set':
        if len(value) != 1:
            raise click.BadArgumentUsage("give one VALUE for 'set' action")
        pmeval.config.set(key, value[0])

        # Save the configuration to file
        pmeval.config.save()
