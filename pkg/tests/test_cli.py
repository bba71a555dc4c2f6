"""
Tests for the popcorn-dim command-line driver.
"""

import json
import os
from fractions import Fraction

import pytest

from popcorn_dimension.cli import (
    EXIT_COST_GUARD,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VERIFICATION,
    RunConfig,
    UsageError,
    main,
    preset_meshes,
    run,
)


def test_count_csv(capsys):
    """Test the basic count command."""
    assert main(['count', '--mesh', '1/4']) == EXIT_OK
    assert capsys.readouterr().out == "mesh_num,mesh_den,count,method,q_max\n1,4,8,strip-fast,4\n"


def test_count_several_meshes(capsys):
    """Test comma-separated and repeated mesh flags."""
    assert main(['count', '--mesh', '1/2,1/4', '--mesh', '1/8']) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4
    assert lines[1] == "1,2,3,strip-fast,2"


def test_count_reciprocal_and_strip(capsys):
    """Test the demo set and single-strip counts."""
    assert main(['count', '--mesh', '1/4', '--set', 'reciprocal']) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[1].split(',')[2] == '4'
    assert main(['count', '--mesh', '1/4', '--strip', '1']) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[1].split(',')[2] == '3'


def test_decimal_mesh_is_usage_error():
    """Test that decimals are rejected with exit code 64."""
    with pytest.raises(SystemExit) as exc_info:
        main(['count', '--mesh', '0.25'])
    assert exc_info.value.code == EXIT_USAGE


def test_missing_command_is_usage_error():
    """Test that a bare invocation exits with 64."""
    with pytest.raises(SystemExit) as exc_info:
        main([])
    assert exc_info.value.code == EXIT_USAGE


def test_invalid_mesh_values(capsys):
    """Test increasing meshes, coarse meshes and a missing mesh."""
    assert main(['count', '--mesh', '1/8,1/4']) == EXIT_USAGE
    assert main(['count', '--mesh', '3/4']) == EXIT_USAGE
    assert main(['count']) == EXIT_USAGE
    assert 'Error' in capsys.readouterr().err


def test_cost_guard_exit(capsys):
    """Test that a tripped guard exits with 3 and names the parameter."""
    assert main(['count', '--mesh', '1/4096', '--cost-guard', '10']) == EXIT_COST_GUARD
    assert 'mesh' in capsys.readouterr().err


def test_json_is_deterministic_across_workers(capsys):
    """Test byte-identical JSON for different worker counts."""
    assert main(['count', '--preset', 'pow2', '--kmin', '2', '--kmax', '9', '--format', 'json', '--workers', '1']) == 0
    first = capsys.readouterr().out
    assert main(['count', '--preset', 'pow2', '--kmin', '2', '--kmax', '9', '--format', 'json', '--workers', '2']) == 0
    second = capsys.readouterr().out
    assert first == second
    payload = json.loads(first)
    assert payload['meta']['config']['preset'] == 'pow2'
    assert 'workers' not in payload['meta']['config']
    assert 'wall_time_seconds' not in payload['meta']
    counts = [row['count'] for row in payload['counts']]
    assert counts[0] == 8
    assert counts == sorted(counts)


def test_timing_flag(capsys):
    """Test that --timing adds wall time to the meta block."""
    assert main(['count', '--mesh', '1/4', '--format', 'json', '--timing']) == EXIT_OK
    assert 'wall_time_seconds' in json.loads(capsys.readouterr().out)['meta']


def test_boxdim_json(capsys):
    """Test the box-dimension fit report."""
    assert main(['boxdim', '--preset', 'pow2', '--kmin', '4', '--kmax', '9']) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert 1.0 < payload['fit']['slope'] < 2.0
    assert len(payload['fit']['pair_slopes']) == 5
    assert all(row['method'] == 'strip-fast' for row in payload['counts'])


def test_boxdim_png_plot(temp_test_dir):
    """Test that a PNG plot is written to the requested path."""
    path = os.path.join(temp_test_dir, 'boxdim.png')
    assert main(['boxdim', '--preset', 'pow2', '--kmin', '3', '--kmax', '7', '--format', 'png', '--output', path]) == 0
    assert os.path.exists(path)


def test_output_file_backup(temp_test_dir):
    """Test that a second run backs up the first report."""
    path = os.path.join(temp_test_dir, 'counts.csv')
    assert main(['count', '--mesh', '1/4', '--output', path]) == EXIT_OK
    assert main(['count', '--mesh', '1/8', '--output', path]) == EXIT_OK
    with open(f"{path}.backup") as f:
        assert '1,4,8' in f.read()


def test_oracle_agreement_and_mismatch(capsys):
    """Test oracle cross-checks and the truncated mismatch."""
    assert main(['oracle', '--mesh', '1/4,1/8,1/16']) == EXIT_OK
    assert capsys.readouterr().out.count('True') == 3
    assert main(['oracle', '--mesh', '1/8', '--qmax', '4']) == EXIT_VERIFICATION


def test_verify_strip_lemma(capsys):
    """Test a passing and a failing strip-lemma run."""
    assert main(['verify', '--suite', 'strip-lemma', '--delta', '1/1000000', '--kmax', '99']) == EXIT_OK
    assert json.loads(capsys.readouterr().out)['results'][0]['passed'] is True
    assert main(['verify', '--suite', 'strip-lemma', '--delta', '1/1000000', '--kmax', '500']) == EXIT_VERIFICATION
    payload = json.loads(capsys.readouterr().out)
    assert payload['results'][0]['passed'] is False
    assert payload['exit_status'] == EXIT_VERIFICATION


def test_verify_totient_and_ds(capsys):
    """Test quick verification suites."""
    assert main(['verify', '--suite', 'totient', '--lo', '3', '--hi', '2000']) == EXIT_OK
    result = json.loads(capsys.readouterr().out)['results'][0]
    assert result['suite'] == 'totient'
    assert result['passed'] is True
    assert main(['verify', '--suite', 'duffin-schaeffer', '--nmax', '20', '--delta', '1/10000000']) == EXIT_OK
    assert main(['verify', '--suite', 'upper-bound', '--mesh', '1/16,1/32', '--format', 'csv']) == EXIT_OK


def test_verify_has_no_plot():
    """Test that plot formats are refused for verify."""
    assert main(['verify', '--suite', 'totient', '--hi', '100', '--format', 'svg']) == EXIT_USAGE


def test_spectrum_json(capsys):
    """Test a small spectrum run."""
    assert main(['spectrum', '--theta', '1/2', '--nmin', '2', '--nmax', '4']) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload['spectrum'][0]['closed_form'] == '5/3'
    assert [row['n'] for row in payload['windows']] == [2, 3, 4]


def test_spectrum_cost_guard(capsys):
    """Test that an oversize window exits with 3 naming n."""
    assert main(['spectrum', '--theta', '1/2', '--nmin', '3', '--nmax', '5', '--cost-guard', '100']) == EXIT_COST_GUARD
    assert '(n)' in capsys.readouterr().err


def test_preset_meshes():
    """Test the named mesh sequences."""
    assert preset_meshes('pow2', 2, 4) == (Fraction(1, 4), Fraction(1, 8), Fraction(1, 16))
    assert preset_meshes('proof', nmax=3) == (Fraction(1, 64), Fraction(1, 46656), Fraction(1, 2985984))
    with pytest.raises(UsageError):
        preset_meshes('pow2', 5, 4)
    with pytest.raises(UsageError):
        preset_meshes('fibonacci')


def test_run_config_validation():
    """Test RunConfig invariants and a direct run."""
    with pytest.raises(UsageError):
        RunConfig(command='count', meshes=(Fraction(1, 8), Fraction(1, 4)))
    with pytest.raises(UsageError):
        RunConfig(command='spectrum', thetas=(Fraction(3, 2),))
    with pytest.raises(UsageError):
        RunConfig(command='plot')
    result = run(RunConfig(command='count', meshes=(Fraction(1, 4),)))
    assert result.status == EXIT_OK
    assert result.rows[0]['count'] == 8
