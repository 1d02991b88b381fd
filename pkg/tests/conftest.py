import json
import pathlib

import numpy as np
import pytest

GOLDEN_DIR = pathlib.Path(__file__).parent / "golden"

# verdict lines recorded by the acceptance tests, printed after the run
ACCEPTANCE_VERDICTS = {}


def record_verdict(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_VERDICTS[number] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_VERDICTS):
        ok, detail = ACCEPTANCE_VERDICTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")


def _encode(v):
    if isinstance(v, dict):
        return {str(k): _encode(x) for k, x in sorted(v.items())}
    if isinstance(v, np.ndarray):
        return _encode(v.tolist())
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return {"im": float(v.imag), "re": float(v.real)}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, str):
        return v
    raise TypeError(f"cannot encode {type(v)!r} into a golden file")


def _assert_close(stored, fresh, atol, path):
    if isinstance(stored, dict):
        assert isinstance(fresh, dict) and set(stored) == set(fresh), f"{path}: structure changed"
        for k in stored:
            _assert_close(stored[k], fresh[k], atol, f"{path}.{k}")
    elif isinstance(stored, list):
        assert isinstance(fresh, list) and len(stored) == len(fresh), f"{path}: length changed"
        for i, (a, b) in enumerate(zip(stored, fresh)):
            _assert_close(a, b, atol, f"{path}[{i}]")
    elif isinstance(stored, (int, float)) and not isinstance(stored, bool):
        assert abs(stored - fresh) <= atol, f"{path}: stored {stored!r} vs fresh {fresh!r} (atol={atol})"
    else:
        assert stored == fresh, f"{path}: stored {stored!r} vs fresh {fresh!r}"


@pytest.fixture
def golden_check():
    """Compare a computed value against tests/golden/<name>.json.

    First run with no stored file seals the computed value; later runs compare
    against the sealed copy within ``atol``. Delete a golden file to reseal.
    """

    def check(name, value, atol=1e-10):
        GOLDEN_DIR.mkdir(exist_ok=True)
        path = GOLDEN_DIR / f"{name}.json"
        fresh = _encode(value)
        if not path.exists():
            path.write_text(json.dumps(fresh, indent=1, sort_keys=True) + "\n")
            return
        stored = json.loads(path.read_text())
        _assert_close(stored, fresh, atol, name)

    return check
