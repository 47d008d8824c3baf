"""Smoke test for the Python bindings.

Build the extension and put it on the path first, e.g.

    cargo build --release -p mixsaem-py
    cp target/release/libmixsaem_py.so python/mixsaem_py.so
    python3 python/smoke_test.py
"""

import json
import math
import tempfile
from pathlib import Path

import mixsaem_py as ms


def main():
    full = ms.simulate(n=400, seed=3)
    assert len(full) == 400 and full.missing_count() == 0
    assert full.columns == ["x1", "x2", "x3", "x4", "x5", "x6", "x7"]

    data = full.inject(0.3, seed=4)
    frac = data.missing_count() / (400 * 7)
    assert abs(frac - 0.3) < 0.05, frac
    assert any(v is None for row in data.rows() for v in row)

    fit = ms.fit(data, iterations=80, seed=1)
    params = fit.params
    assert len(params.beta) == 8
    assert len(fit.beta_trajectory) == 80
    assert 0.0 < fit.acceptance_rate <= 1.0
    assert all(abs(sum(p) - 1.0) < 1e-12 for p in params.discrete_probs)

    probs = params.predict_proba(data, samples=50, seed=2)
    assert len(probs) == 400 and all(0.0 <= p <= 1.0 for p in probs)
    assert probs == params.predict_proba(data, samples=50, seed=2)
    scores = ms.metrics(probs, data.outcomes)
    assert 0.5 < scores["auc"] <= 1.0, scores

    mm = ms.fit_baseline(data, "mm")
    assert len(mm.beta) == 8
    try:
        ms.fit_baseline(data, "mice")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown baseline accepted")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        data.to_csv(tmp / "data.csv")
        data.save_schema(tmp / "schema.json")
        again = ms.Dataset.from_csv(tmp / "data.csv", tmp / "schema.json")
        assert again.missing_count() == data.missing_count()
        params.save(tmp / "params.json")
        assert ms.Params.load(tmp / "params.json").beta == params.beta

        config = {"runs": 2, "design": {"n": 200}, "saem": {"iterations": 20}, "methods": ["saem", "mm"]}
        text = ms.benchmark(json.dumps(config), out_dir=str(tmp / "bench"))
        assert "saem" in text
        assert (tmp / "bench" / "bias_rmse.csv").exists()

    assert not any(math.isnan(b) for b in params.beta)
    print("python smoke test passed")


if __name__ == "__main__":
    main()
