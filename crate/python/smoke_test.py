"""Smoke test for the pydcfr extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""

import os
import tempfile

import pydcfr


def main():
    data = pydcfr.admission(2000, seed=5)
    assert len(data) == 2000 and data.n_features == 3
    train, val, test = data.split([0.6, 0.2, 0.2], 0)

    w = train.weights("cf")
    assert len(w) == len(train) and min(w) >= 0.0

    report = test.evaluate(test.y)
    assert report["accuracy"] == 1.0 and report["delta_eo"] == 0.0

    config = pydcfr.TrainConfig(preset="compas", mode="cf", lambda_=5.0, seed=1, epochs=50)
    model = pydcfr.fit(train, val, test, config)
    prob, pred = model.predict(test)
    assert len(prob) == len(test) and set(pred) <= {0, 1}
    assert abs(test.evaluate(pred)["delta_cf"] - model.metrics["delta_cf"]) < 1e-12
    assert model.trace_csv().startswith("phase,epoch")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.json")
        model.save(path)
        again = pydcfr.Model.load(path)
        assert again.predict(test) == (prob, pred)
        assert again.config.lambda_ == 5.0

    assert pydcfr.pareto_front([(0.8, 0.2), (0.7, 0.1), (0.6, 0.3)]) == [1, 0]

    checks = pydcfr.verify_theory(seed=0, joints=50, trials=50, samples=20000)
    assert all(c["passed"] for c in checks), checks

    try:
        pydcfr.TrainConfig(mode="nope")
    except ValueError:
        pass
    else:
        raise AssertionError("bad mode accepted")

    print("pydcfr smoke test passed:", model.metrics["accuracy"], model.metrics["delta_cf"])


if __name__ == "__main__":
    main()
