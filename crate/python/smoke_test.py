"""Smoke test for the scour Python extension.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import json

import scour

TABLE_STRINGS = ["ss-(336,168)-32-0", "ss2-(720,168)-32-0.2", "fcn-5-256-5-256-0.0", "dcn-3-128-5-256-0.2"]

CONFIG = """
seed = 4
model = "ss-(24,12)-4-0"

[data.synth]
kind = "seasonal"
years = 0.3
noise_std = 0.1
flood_count = 1
rho = 0.8
seed = 2

[budget]
train_stride = 6
eval_stride = 6

[budget.train]
max_epochs = 3
patience = 2
"""


def main():
    for text in TABLE_STRINGS:
        cfg = scour.ModelConfig(text)
        assert str(cfg) == text, (cfg, text)
    assert scour.ModelConfig("ss-(336,168)-32-0").window == (336, 168)
    try:
        scour.ModelConfig("xyz-1")
    except scour.ScourError:
        pass
    else:
        raise AssertionError("bad configuration accepted")

    frame = scour.Frame.synth("seasonal", 0.2, 0.1, 1, 0.8, 7)
    assert len(frame) == 1752 and "sonar" in frame.channels
    again = scour.Frame.from_csv(frame.to_csv())
    assert again.values("sonar") == frame.values("sonar")

    sensor = "timestamp,channel,value\n" + "".join(
        f"2021-01-01T{h:02d}:00:00Z,sonar,{10.0 + 0.01 * h}\n" for h in range(24)
    )
    cleaned, report = scour.preprocess(sensor)
    assert len(cleaned) == 24 and json.loads(report)["malformed"] == 0

    for text in ["ss-(6,3)-4-0", "fcn-3-4-2-3-0", "dcn-2-4-2-4-0.2"]:
        err = scour.gradient_check(text)
        assert err < 1e-4, (text, err)

    mean, lower, upper = scour.ensemble([[1.0, 5.0], [-1.0, 5.0]])
    assert mean == [0.0, 5.0] and lower[1] == upper[1] == 5.0

    first = scour.train(CONFIG)
    assert first == scour.train(CONFIG)
    fold = json.loads(first)["folds"][0]["report"]
    assert fold["val"]["m"] == fold["val"]["ft"] * 0.3048
    print("smoke test passed: validation MAE %.4f ft" % fold["val"]["ft"])


if __name__ == "__main__":
    main()
