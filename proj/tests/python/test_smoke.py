"""Python smoke tests for the _core extension module."""

import json
import math
import os
import sys
import tempfile

import _core as bof


def test_scenario_sampling():
    s1 = bof.sample_scenario(7)
    s2 = bof.sample_scenario(7)
    assert s1.to_json() == s2.to_json()
    assert 5.0 <= s1.charge.mass <= 50.0
    obs = s1.obstacles
    assert len(obs) == 3
    assert obs[0].x_min < obs[0].x_max
    round_trip = bof.Scenario.from_json(s1.to_json())
    assert round_trip.to_json() == s1.to_json()


def test_inputs_and_oracle():
    s = bof.sample_scenario(3)
    g = bof.GridSpec.square(33)
    values, coords = bof.build_model_input(s, g)
    assert values.shape == (33, 33, 4)
    assert coords.shape == (33, 33, 2)
    assert float(values[..., 3].min()) > 0.0

    p = bof.oracle_pressure(s, g)
    assert p.shape == (33, 33)
    assert float(p.min()) >= 101325.0


def test_sdf():
    o = bof.Obstacle()
    o.x_min, o.x_max, o.y_min, o.y_max, o.z_min, o.z_max = 0, 1, 0, 1, 0, 1
    assert bof.box_sdf_footprint(0.5, 0.5, o) == -1.0
    assert abs(bof.box_sdf_footprint(2.0, 0.5, o) - 1.0) < 1e-12
    assert abs(bof.box_sdf_footprint(2.0, 2.0, o) - math.sqrt(2.0)) < 1e-12


def test_pipeline_train_eval_predict():
    with tempfile.TemporaryDirectory() as tmp:
        ds = os.path.join(tmp, "ds")
        train, val, test = bof.generate_dataset(16, 5, 9, ds)
        assert (train, val, test) == (12, 2, 2)

        config = json.dumps(
            {
                "train": {"max_epochs": 5, "early_stop_patience": 5, "lr": 1e-3,
                          "batch_size": 4, "seed": 1},
                "model": {"patch_size": 3, "input_embed": 16, "seq_embed": 32,
                          "encoder_layers": 1, "heads": 2, "rff_dim": 8, "model_seed": 2},
            }
        )
        ckpt = os.path.join(tmp, "m.ckpt")
        best_val, best_epoch, epochs = bof.train("blastoformer", ds, config, ckpt)
        assert epochs == 5 and best_epoch >= 1 and math.isfinite(best_val)

        report = json.loads(bof.evaluate(ckpt, ds, "test"))
        assert math.isfinite(report["log"]["r2"])
        assert report["inference_ms"] > 0
        assert "reference_table" in report

        field = bof.predict(ckpt, bof.sample_scenario(99).to_json())
        assert field.shape == (9, 9)
        assert float(field.min()) > 0

        ms = bof.benchmark_inference(ckpt, 11)
        assert ms > 0

        img = os.path.join(tmp, "f.ppm")
        bof.render_map(field, "jet", img)
        with open(img, "rb") as fh:
            head = fh.read(2)
        assert head == b"P6"


def test_metrics():
    import numpy as np

    t = np.arange(6, dtype=np.float32).reshape(2, 3) + 1.0
    assert abs(bof.metric_r2([t], [t]) - 1.0) < 1e-12
    assert bof.metric_mae([t], [t]) == 0.0
    p = (t * 1.1).astype(np.float32)
    assert abs(bof.metric_mape([p], [t]) - 10.0) < 1e-4
    e = bof.error_map(p, t)
    assert e.shape == (2, 3)


def test_probe_parsing():
    text = (
        "# Probe 0 (0 0 1)\n# Probe 1 (1 0 1)\n# Probe 2 (0 1 1)\n# Probe 3 (1 1 1)\n"
        "# Time p0 p1 p2 p3\n"
        "1e-7 1 4 7 10\n"
        "2e-7 3 5 8 11\n"
    )
    # a 2x2 lattice with unit spacing matches GridSpec.square? no -- use the
    # library's own square(2): spacing 9.8, origin -4.9 -> remap coordinates
    remapped = text.replace("(0 0 1)", "(-4.9 -4.9 1)").replace("(1 0 1)", "(4.9 -4.9 1)")
    remapped = remapped.replace("(0 1 1)", "(-4.9 4.9 1)").replace("(1 1 1)", "(4.9 4.9 1)")
    f = bof.parse_probe_file(remapped, 2)
    assert f.shape == (2, 2)
    assert f[0, 0] == 3.0 and f[1, 1] == 11.0


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"ok {t.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()
