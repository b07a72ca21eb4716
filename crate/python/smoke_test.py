"""Smoke test for the vislearn_py extension.

Uses an installed `vislearn_py` if there is one, otherwise loads the library
cargo built under target/ (run `cargo build -p vislearn-py` first).
"""

import importlib.machinery
import importlib.util
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import vislearn_py

        return vislearn_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libvislearn_py.so", "libvislearn_py.dylib", "vislearn_py.dll"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                loader = importlib.machinery.ExtensionFileLoader("vislearn_py", str(lib))
                found = importlib.util.spec_from_loader("vislearn_py", loader)
                module = importlib.util.module_from_spec(found)
                loader.exec_module(module)
                return module
    sys.exit("vislearn_py not found; build it with `cargo build -p vislearn-py`")


def main():
    vl = load()

    assert vl.status(0.96, 0.95) == 2
    assert vl.status(0.7, 0.95) == 1
    assert vl.status(0.3, 0.95) == 0
    assert vl.status(0.3, 0.95, provided=True) == 2
    assert vl.delta_acc_level(0.70, 0.75) == 1
    assert vl.threshold_reward(0.70, 0.75) == 100 * (0.75 - 0.70)
    assert vl.apply_threshold_action(0.95, "Increase") == 0.95
    assert vl.apply_threshold_action(0.90, "Decrease") == 0.85
    assert vl.global_reward(5.0, 2) == 1.0
    assert abs(vl.r_perf(0.4, 200.0) - 0.002) < 1e-15
    try:
        vl.r_perf(0.1, 0.0)
        raise AssertionError("zero cost accepted")
    except ValueError:
        pass

    train, test = vl.generate_dataset(seed=1, train_size=120, test_size=60)
    assert len(train) == 120 and len(test) == 60
    gm = vl.GroundingMap()
    before = gm.accuracy(test)
    for obj in train:
        gm.learn(obj, obj.colour)
        gm.learn(obj, obj.shape)
    after = gm.accuracy(test)
    assert after["colour"] > before["colour"] and after["shape"] >= 0.95, after
    word, conf = gm.best_prediction(test[0], "colour")
    assert 0.0 <= conf <= 1.0
    assert vl.GroundingMap.from_text(gm.to_text()).to_text() == gm.to_text()

    lex = vl.Lexicon()
    assert lex.parse("tutor", "no, it is blue.") == "Reject() Inform(colour:blue)"
    assert lex.parse("tutor", "flarp") is None
    said = lex.generate("learner", "Inform(colour:red&shape:square)")
    assert lex.parse("learner", said) == "Inform(colour:red&shape:square)"

    session = vl.LiveSession("rule-constant95", world_seed=7)
    obj = session.advance()[0]
    assert obj["type"] == "object" and obj["state"]["objects_remaining"] == 499
    tutor, learner = session.step("")
    assert learner["type"] == "learner" and learner["act"]
    tutor, learner = session.step("wug dax")
    assert learner["act"] == "CLrRequest()" and tutor["cost"] == 0.0
    summary = session.end()
    assert summary["type"] == "summary"

    rows = vl.run_experiment(
        "folds = 2\nconditions = ['constant95', 'decay05']\n[world]\ntrain_size = 60\ntest_size = 30\n"
    )
    assert [r["condition"] for r in rows] == ["constant95", "decay05"]
    print("vislearn_py smoke test passed")


if __name__ == "__main__":
    main()
