import time

import pytest

from core.errors import DataError, NumericalError
from pipelines.frame_executor import FrameExecutor


def slow_square(x: int) -> int:
    # les premiers finissent en dernier
    time.sleep(0.01 * (5 - x))
    return x * x


@pytest.mark.parametrize("jobs", [1, 4])
def test_results_keep_input_order(jobs):
    assert FrameExecutor(jobs).map(slow_square, list(range(5))) == [0, 1, 4, 9, 16]


@pytest.mark.parametrize("jobs", [1, 3])
def test_errors_carry_frame_context(jobs):
    def job(x):
        if x == 2:
            raise NumericalError("non-finite logits")
        return x

    with pytest.raises(NumericalError) as info:
        FrameExecutor(jobs).map(job, [0, 1, 2, 3])
    assert str(info.value) == "frame 2: non-finite logits"
    assert info.value.exit_code == 4


def test_custom_contexts():
    def job(x):
        raise DataError("bad frame")

    with pytest.raises(DataError, match="^seq_0001/frame 0: bad frame$"):
        FrameExecutor(2).map(job, [0], contexts=["seq_0001/frame 0"])


def test_other_errors_pass_through():
    def job(x):
        raise ValueError("boom")

    with pytest.raises(ValueError, match="^boom$"):
        FrameExecutor(2).map(job, [0, 1])


def test_jobs_floor():
    assert FrameExecutor(0).jobs == 1


def test_write_files(tmp_path):
    files = [(tmp_path / "a" / f"frame_{i:06d}.txt", f"{i}\n") for i in range(4)]
    paths = FrameExecutor(2).write_files(files)
    assert paths == [p for p, _ in files]
    assert (tmp_path / "a" / "frame_000003.txt").read_text(encoding="utf-8") == "3\n"
