"""Robustness reports and their files.

A report directory holds three files:

- ``report.yaml``: the canonical document, read back by
  :meth:`RobustnessReport.read`.
- ``report.csv``: one row per attack with columns attack, robust_acc,
  cumulative_robust_acc, wall_time_s.
- ``report.txt``: a human-readable rendering.

All three are functions of the document alone, so re-rendering a read report
reproduces the files byte for byte.
"""
from collections import namedtuple
import logging
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from pmeval.utils import atomic_write


log = logging.getLogger(__name__)

#: File names in a report directory.
FILES = dict(yaml='report.yaml', csv='report.csv', txt='report.txt')

#: Columns of the CSV twin.
COLUMNS = ['attack', 'robust_acc', 'cumulative_robust_acc', 'wall_time_s']

#: Per-attack record. *robust_acc* is :obj:`None` when the attack was only
#: run on the samples surviving earlier attacks.
AttackRecord = namedtuple(
    'AttackRecord',
    'attack robust_acc cumulative_robust_acc wall_time_s broken errors',
    defaults=(0, 0),
)


def is_ours(name):
    """:obj:`True` for attacks using the probability margin."""
    lower = name.lower()
    return lower.startswith('pma') or '_pm' in lower


class RobustnessReport:
    """Results of evaluating one model against one or more attacks.

    Parameters
    ----------
    mode : 'standard' or 'relative'
        In relative mode, the reference labels are the model's clean
        predictions.
    sample_count : int
    clean_accuracy : float or None
        :obj:`None` for unlabeled data.
    attacks : list of AttackRecord
        In the order applied.
    seed : int
    config : dict
        Resolved configuration, echoed into the document.
    config_digest : str
    early_stop : bool
    """
    def __init__(self, mode, sample_count, clean_accuracy, attacks, seed,
                 config=None, config_digest='', early_stop=True):
        if mode not in ('standard', 'relative'):
            raise ValueError(f'unknown report mode {mode!r}')
        self.mode = mode
        self.sample_count = int(sample_count)
        self.clean_accuracy = None if clean_accuracy is None \
            else float(clean_accuracy)
        self.attacks = [AttackRecord(*a) if not isinstance(a, AttackRecord)
                        else a for a in attacks]
        self.seed = int(seed)
        self.config = dict(config or {})
        self.config_digest = str(config_digest)
        self.early_stop = bool(early_stop)

    @property
    def ensemble_robust_accuracy(self):
        """Robust accuracy under the union of all attacks."""
        if not self.attacks:
            return 1.0 if self.mode == 'relative' else self.clean_accuracy
        return self.attacks[-1].cumulative_robust_acc

    @property
    def robust_accuracies(self):
        """Mapping of attack name → robust accuracy, where known."""
        return {a.attack: a.robust_acc for a in self.attacks
                if a.robust_acc is not None}

    def diff(self):
        """Best robust accuracy of probability-margin attacks minus that of
        the other attacks; :obj:`None` unless both groups are present.

        Negative values mean the probability-margin attacks are stronger.
        """
        ours = [v for k, v in self.robust_accuracies.items() if is_ours(k)]
        base = [v for k, v in self.robust_accuracies.items()
                if not is_ours(k)]
        if ours and base:
            return min(ours) - min(base)
        return None

    # Conversion

    def table(self):
        """Per-attack :class:`pandas.DataFrame` with :data:`COLUMNS`."""
        df = pd.DataFrame([a[:4] for a in self.attacks], columns=COLUMNS)
        return df.astype({c: float for c in COLUMNS[1:]})

    def to_dict(self):
        return dict(
            mode=self.mode,
            sample_count=self.sample_count,
            seed=self.seed,
            config_digest=self.config_digest,
            early_stop=self.early_stop,
            clean_accuracy=self.clean_accuracy,
            attacks=[a._asdict() for a in self.attacks],
            ensemble_robust_accuracy=self.ensemble_robust_accuracy,
            diff=self.diff(),
            config=self.config,
        )

    @classmethod
    def from_dict(cls, info):
        return cls(
            info['mode'],
            info['sample_count'],
            info['clean_accuracy'],
            [AttackRecord(**a) for a in info.get('attacks', [])],
            info['seed'],
            info.get('config'),
            info.get('config_digest', ''),
            info.get('early_stop', True),
        )

    # Rendering

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False,
                              default_flow_style=False)

    def to_csv(self):
        return self.table().to_csv(index=False, na_rep='NA',
                                   float_format='%.6f')

    def to_text(self):
        def pct(value):
            return 'NA' if value is None or pd.isna(value) \
                else f'{100 * value:.2f}%'

        lines = [
            f'Robustness report ({self.mode} mode)',
            f'  samples:        {self.sample_count}',
            f'  seed:           {self.seed}',
            f'  config digest:  {self.config_digest}',
            f'  early stop:     {"on" if self.early_stop else "off"}',
            f'  clean accuracy: {pct(self.clean_accuracy)}',
            '',
        ]

        if self.attacks:
            table = self.table()
            for column in COLUMNS[1:3]:
                table[column] = table[column].map(pct)
            table['wall_time_s'] = table['wall_time_s'].map('{:.2f}'.format)
            lines.extend([table.to_string(index=False), ''])

            lines.append('Cumulative robust accuracy:')
            lines.extend(f'  {i + 1}. {a.attack:<24} '
                         f'{pct(a.cumulative_robust_acc)}'
                         for i, a in enumerate(self.attacks))
            lines.append('')

        lines.append(f'Ensemble robust accuracy: '
                     f'{pct(self.ensemble_robust_accuracy)}')
        diff = self.diff()
        if diff is not None:
            lines.append(f'diff (PM − best baseline): {100 * diff:+.2f} pp')
        return '\n'.join(lines) + '\n'

    # Files

    def write(self, path):
        """Write :data:`FILES` to the directory *path*; return their paths."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        paths = []
        for kind, render in (('yaml', self.to_yaml), ('csv', self.to_csv),
                             ('txt', self.to_text)):
            paths.append(path / FILES[kind])
            atomic_write(paths[-1], render().encode())
        log.info(f'Wrote report to {path}')
        return paths

    @classmethod
    def read(cls, path):
        """Read a report from a directory or a ``report.yaml`` file."""
        path = Path(path)
        if path.is_dir():
            path = path / FILES['yaml']
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f))

    def __repr__(self):
        return (f'<RobustnessReport {self.mode}, {self.sample_count} samples,'
                f' {len(self.attacks)} attack(s)>')


def build_report(mode, correct, stages, robust, individual, config, seed,
                 digest, labeled=True):
    """Assemble a :class:`RobustnessReport` from :class:`.Reporter` results.

    Parameters
    ----------
    correct : numpy.ndarray of bool
        Clean correctness with respect to the reference labels.
    stages : list of dict
        Output of :func:`.run_attack` for each stage, in order.
    robust : list of numpy.ndarray
        Samples still robust after each stage.
    individual : list
        For each stage, the output of the same attack run on all clean-
        correct samples, or :obj:`None`.
    """
    n = len(correct)
    records = []
    for i, (stage, survived, single) in enumerate(
            zip(stages, robust, individual)):
        if single is None and i == 0:
            single = stage
        robust_acc = None
        if single is not None:
            broken = np.array([o.success for o in single['outcomes']])
            robust_acc = float((correct & ~broken).mean()) if n else None

        records.append(AttackRecord(
            stage['name'],
            robust_acc,
            float(np.mean(survived)) if n else None,
            round(float(stage['wall_time']), 6),
            int(sum(o.success for o in stage['outcomes'])),
            int(sum(o.error is not None for o in stage['outcomes'])),
        ))

    clean = float(np.mean(correct)) if (labeled and n) else None
    return RobustnessReport(mode, n, clean, records, seed, config, digest,
                            config.get('early_stop', True))
