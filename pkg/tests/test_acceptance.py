import pytest

from acceptance import Scale, event_algebra, run_criteria
from events import Direction
from lattice import Box
from records import loads
from sampler import estimate_kernels


@pytest.fixture
def small_scale(tmp_path):
    # a pre-filled kernel estimate keeps the event-algebra criterion cheap
    points = [(1, 0, 0), (2, 0, 0)]
    estimate = estimate_kernels(0.35, Direction.axis(3, 0), points, Box.cube(3, 3), 200, seed=1)
    scale_ = Scale(quick=True, threads=1, seed=1, out=tmp_path)
    scale_.cache["estimate"] = (estimate, points, 200, 3)
    return scale_


class TestScaleReporting:
    def test_check_carries_scale(self, small_scale):
        check = event_algebra(small_scale)
        assert check.passed
        assert check.scale.startswith("box 7^3")
        assert "target 24^3" in check.scale

    def test_summary_and_jsonl_record_scale(self, small_scale):
        summary = run_criteria(small_scale, only=[8])
        assert [row["id"] for row in summary] == [8]
        assert summary[0]["scale"].startswith("box 7^3")
        lines = (small_scale.out / "acceptance.jsonl").read_text().splitlines()
        record = loads(lines[0])
        assert record["quick"] is True
        assert record["scale"] == summary[0]["scale"]
