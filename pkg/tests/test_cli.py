import json
import os

import pytest
from click.testing import CliRunner

from steerguard.core.cli import cli, run_command
from steerguard.models import load_model


@pytest.fixture
def invoke(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv('STEERGUARD_ENV', 'testing')
    runner = CliRunner()

    def run(*args):
        return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)
    return run


@pytest.fixture
def workspace(invoke):
    """Six 8px samples and a model trained on them"""
    assert invoke('gen-data', '--n', 6, '--input-size', 8, '--seed', 1, '--out', 'data').exit_code == 0
    result = invoke('train', '--data', 'data', '--epochs', 1, '--batch-size', 3, '--out', 'model')
    assert result.exit_code == 0, result.output
    return invoke


def read(path):
    with open(path, 'rb') as handle:
        return handle.read()


class TestGlobal:
    def test_version(self, invoke):
        result = invoke('--version')
        assert result.exit_code == 0
        assert 'steerguard' in result.output

    def test_unknown_subcommand(self, invoke):
        assert invoke('defuse').exit_code == 1

    def test_bad_flag_value(self, invoke):
        assert invoke('gen-data', '--n', 'many', '--out', 'x').exit_code == 1

    def test_run_command_returns_the_code(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert run_command(['--env', 'testing', 'nonsense']) == 1


class TestGenData:
    def test_deterministic(self, invoke):
        for out in ('one', 'two'):
            assert invoke('gen-data', '--n', 6, '--input-size', 8, '--seed', 4, '--out', out).exit_code == 0
        assert read('one/manifest.csv') == read('two/manifest.csv')
        for name in os.listdir('one/images'):
            assert read(f'one/images/{name}') == read(f'two/images/{name}')

    def test_split(self, invoke):
        result = invoke('gen-data', '--n', 8, '--input-size', 8, '--test-fraction', 0.25, '--out', 'd')
        assert result.exit_code == 0
        assert len(read('d/train/manifest.csv').splitlines()) == 7
        assert len(read('d/test/manifest.csv').splitlines()) == 3


class TestSettings:
    def test_resolved_config_layers_file_under_flags(self, invoke, tmp_path):
        (tmp_path / 'run.cfg').write_text('# experiment\nseed=9\ninput-size=16\nn=2\n')
        result = invoke('--config', 'run.cfg', 'gen-data', '--input-size', 8, '--out', 'd')
        assert result.exit_code == 0, result.output
        resolved = (tmp_path / 'd' / 'resolved_config.txt').read_text().splitlines()
        assert 'seed=9' in resolved
        assert 'input_size=8' in resolved
        assert len(read('d/manifest.csv').splitlines()) == 3

    def test_malformed_config_file(self, invoke, tmp_path):
        (tmp_path / 'bad.cfg').write_text('seed=1\nthis line has no equals\n')
        result = invoke('--config', 'bad.cfg', 'gen-data', '--out', 'd')
        assert result.exit_code == 1
        assert ':2:' in result.output


class TestPipeline:
    def test_train_outputs(self, workspace, tmp_path):
        metrics = json.loads((tmp_path / 'model' / 'metrics.json').read_text())
        assert metrics['arch_id'] == 'EpochS'
        assert len(metrics['history']) == 1
        assert load_model(str(tmp_path / 'model' / 'model.bin')).input_size == 8

    def test_attack(self, workspace, tmp_path):
        result = workspace('attack', '--model', 'model/model.bin', '--data', 'data', '--method', 'it_fgsm',
                           '--out', 'atk')
        assert result.exit_code == 0, result.output
        summary = json.loads((tmp_path / 'atk' / 'summary.json').read_text())
        assert summary['attack_id'] == 'it_fgsm' and summary['samples'] == 6
        rows = (tmp_path / 'atk' / 'examples.csv').read_text().splitlines()
        assert len(rows) == 7
        assert (tmp_path / 'atk' / 'perturbations.bin').exists()

    def test_universal_attack_saves_its_perturbation(self, workspace, tmp_path):
        result = workspace('attack', '--model', 'model/model.bin', '--data', 'data', '--method', 'opt_uni',
                           '--max-iters', 5, '--out', 'uni')
        assert result.exit_code == 0, result.output
        assert (tmp_path / 'uni' / 'perturbation.bin').exists()
        replay = workspace('attack', '--model', 'model/model.bin', '--data', 'data', '--method', 'opt_uni',
                           '--perturbation', 'uni/perturbation.bin', '--out', 'replay')
        assert replay.exit_code == 0
        assert read('uni/examples.csv') == read('replay/examples.csv')

    def test_missing_model(self, workspace):
        result = workspace('attack', '--data', 'data', '--out', 'atk')
        assert result.exit_code == 1
        assert '--model' in result.output

    def test_unreadable_model(self, workspace, tmp_path):
        (tmp_path / 'bad.bin').write_bytes(b'not an artifact')
        result = workspace('attack', '--model', 'bad.bin', '--data', 'data', '--out', 'atk')
        assert result.exit_code == 2

    def test_unknown_attack(self, workspace):
        result = workspace('attack', '--model', 'model/model.bin', '--data', 'data', '--method', 'deepfool',
                           '--out', 'atk')
        assert result.exit_code == 1

    def test_detect_squeeze(self, workspace, tmp_path):
        result = workspace('detect', 'squeeze', '--model', 'model/model.bin', '--data', 'data',
                           '--method', 'it_fgsm', '--delta', 0.01, '--threshold', 0.01, '--threshold', 0.001,
                           '--out', 'det')
        assert result.exit_code == 0, result.output
        rows = (tmp_path / 'det' / 'detection.csv').read_text().splitlines()
        assert rows[0] == 'threshold,recall,false_positive_rate,attack_id,model_id'
        assert rows[1].startswith('0.001,') and ',original,' in rows[1]

    def test_sweep_delta(self, workspace, tmp_path):
        result = workspace('sweep-delta', '--model', 'model/model.bin', '--data', 'data',
                           '--method', 'it_fgsm', '--sweep-delta', 0.1, '--sweep-delta', 0.01, '--out', 'sw')
        assert result.exit_code == 0, result.output
        rows = (tmp_path / 'sw' / 'sweep.csv').read_text().splitlines()
        assert [r.split(',')[2] for r in rows[1:]] == ['0.01', '0.1']

    def test_report_is_reproducible(self, workspace, tmp_path):
        args = ('report', '--model', 'model/model.bin', '--data', 'data', '--method', 'it_fgsm',
                '--sweep-delta', 0.05, '--threshold', 0.01)
        assert workspace(*args, '--out', 'r1').exit_code == 0
        assert workspace(*args, '--out', 'r2').exit_code == 0
        assert read('r1/report.json') == read('r2/report.json')
        report = json.loads(read('r1/report.json'))
        assert report['profiles'] == []
        assert os.path.exists('r1/report_csv/white_box.csv')

    def test_adv_train_records_provenance(self, workspace, tmp_path):
        result = workspace('defend', 'adv-train', '--model', 'model/model.bin', '--data', 'data',
                           '--method', 'it_fgsm', '--alpha', 0.5, '--epochs', 1, '--out', 'hard')
        assert result.exit_code == 0, result.output
        hardened = load_model(str(tmp_path / 'hard' / 'model.bin'))
        assert hardened.provenance['defense'] == 'adv_train'
        assert hardened.provenance['parameter'] == 0.5
