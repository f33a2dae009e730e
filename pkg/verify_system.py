import sys
import os
import tempfile
import logging
import numpy as np

# ensure src is in path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__))))

from src.errors import ConfigError
from src.etl.config_file import parse_config
from src.etl.models import LratmConfig
from src.etl.run_log import read_log
from src.etl.tensor_file import read_tensor, write_tensor
from src.math.linalg import numerical_rank
from src.math.metrics import report
from src.math.solver import solve
from src.math.synthetic import synth_lowrank
from src.math.tensor import DenseTensor, fold, project, relative_error, sample_mask, unfold
from src.pipeline import run_completion

def test_config():
    print("Testing Configuration...")
    # Valid Case
    try:
        c = parse_config("ranks = 3,3,3\ngamma_A = 2.3\n")
        if c.ranks == [3, 3, 3] and c.gamma_A == 2.3:
            print("  [PASS] Valid Config")
        else:
            print(f"  [FAIL] Valid Config parsed as {c}")
    except Exception as e:
        print(f"  [FAIL] Valid Config: {e}")

    # Weights not summing to 1 (Should Fail)
    try:
        parse_config("alpha = 0.5,0.5,0.5\n")
        print("  [FAIL] Alpha Check (Expected failure)")
    except ConfigError as e:
        if e.line == 1:
             print("  [PASS] Alpha Check")
        else:
             print(f"  [FAIL] Wrong line number: {e}")

def test_tensor():
    print("\nTesting Tensor Core...")
    t = DenseTensor.from_flat((2, 2, 2), np.arange(1, 9))
    if np.array_equal(unfold(t, 1).matrix, [[1, 2, 5, 6], [3, 4, 7, 8]]):
        print("  [PASS] Mode-2 Unfolding")
    else:
        print(f"  [FAIL] Mode-2 Unfolding: {unfold(t, 1).matrix.tolist()}")

    if fold(unfold(t, 2), t.shape, 2) == t:
        print("  [PASS] Fold/Unfold Roundtrip")
    else:
        print("  [FAIL] Fold/Unfold Roundtrip")

    s = synth_lowrank((20, 20, 20), (3, 3, 3), seed=7)
    ranks = [numerical_rank(unfold(s, n).matrix) for n in range(3)]
    print(f"  Synthetic n-ranks: {ranks} (Expected [3, 3, 3])")

def test_solver():
    print("\nTesting Solver...")
    truth = synth_lowrank((20, 20, 20), (3, 3, 3), seed=7)
    mask = sample_mask(truth.shape, 0.3, seed=8)

    result = solve(project(truth, mask), mask, LratmConfig(ranks=[3, 3, 3]))
    err = relative_error(result.tensor, truth)
    print(f"  Iterations: {result.iterations}, converged: {result.converged}")
    print(f"  Relative Error: {err:.3e} (Target <= 1e-2)")

    if err <= 1e-2:
        print("  [PASS] Synthetic Recovery")
    else:
        print("  [FAIL] Synthetic Recovery")

    quality = report(truth, result.tensor)
    print(f"  Mean PSNR: {quality.mean_psnr:.2f} dB, Mean SSIM: {quality.mean_ssim:.4f}")

def test_files():
    print("\nTesting Files...")
    truth = synth_lowrank((12, 12, 4), (2, 2, 2), seed=1)
    mask = sample_mask(truth.shape, 0.5, seed=2)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "truth.tnsr")
        write_tensor(path, truth)
        if read_tensor(path) == truth and os.path.getsize(path) == 9 + 8 * 3 + 8 * truth.size:
             print("  [PASS] TNSR Roundtrip")
        else:
             print("  [FAIL] TNSR Roundtrip")

        log_path = os.path.join(tmp, "log.csv")
        run = run_completion(project(truth, mask), mask, LratmConfig(ranks=[2, 2, 2], max_iter=20), log_path=log_path)
        rows = read_log(log_path)
        if len(rows) == run.result.iterations:
             print("  [PASS] Log Rows")
        else:
             print(f"  [FAIL] Log Rows. Got {len(rows)} for {run.result.iterations} iterations")

if __name__ == "__main__":
    logging.basicConfig(level=logging.WARNING, format='%(levelname)s: %(message)s')
    test_config()
    test_tensor()
    test_solver()
    test_files()
