"""Smoke test for the shapestyle_py extension module.

Builds nothing itself: run `cargo build --release -p shapestyle-py` first.
The script loads the freshly built shared library from target/release.
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    candidates = [ROOT / "target" / "release" / name for name in ("libshapestyle_py.so", "libshapestyle_py.dylib", "shapestyle_py.dll")]
    lib = next((c for c in candidates if c.exists()), None)
    if lib is None:
        sys.exit("build the extension first: cargo build --release -p shapestyle-py")
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / ("shapestyle_py.pyd" if lib.suffix == ".dll" else "shapestyle_py.so")
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("shapestyle_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    ss = load_module()

    a = ss.PointCloud([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    b = ss.PointCloud([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    assert ss.chamfer(a, a) == 0.0
    assert math.isclose(ss.chamfer(a, b), a.chamfer(b))
    assert ss.chamfer(a, b) > 0.0

    data = ss.Dataset.synthetic(16, 8, n_points=64, seed=0)
    f1, f2 = data.clouds(1, "train"), data.clouds(2, "train")
    assert len(f1) == 16 and len(f2) == 16 and len(f1[0]) == 64

    config = """
[model]
content_dim = 16
style_dim = 8
encoder_widths = [8, 16]
decoder_hidden = [32, 16]
primitives = 2
n_points = 64
mapping_hidden = 16
disc_bottleneck = 16
disc_hidden = [16, 8]
multimodal = true

[train]
epochs = 2
batch_size = 8
lr_decay_epochs = []
"""
    trainer = ss.Trainer(config)
    while not trainer.finished:
        losses = trainer.run_epoch(f1, f2)
        assert all(math.isfinite(g) and math.isfinite(d) for g, d in losses)
    model = trainer.model()

    out = model.translate(f1[0], 1, f2[0], 2)
    assert len(out) == model.n_points
    try:
        model.translate(f1[0], 1, f2[0], 1)
    except ValueError as e:
        assert "same-domain" in str(e)
    else:
        raise AssertionError("same-family translation must fail")

    frames = model.interpolate(f1[0], f1[1], 1, 1, 4)
    assert len(frames) == 4
    c, s = model.encode(f1[0], 1)
    assert frames[0].points() == model.decode(c, s, 1).points()
    assert len(model.sample(f1[0], 2, seed=3)) == model.n_points

    with tempfile.TemporaryDirectory() as tmp:
        path = pathlib.Path(tmp) / "model.ckpt"
        trainer.save(str(path))
        again = ss.Model.load(str(path))
        assert again.translate(f1[0], 1, f2[0], 2).points() == out.points()

    extractor = ss.FeatureExtractor.fit(ss.Dataset.synthetic(60, 20, n_points=128, seed=1))
    assert extractor.val_accuracy >= 0.9
    assert extractor.lpips(f1[0], f1[0]) == 0.0
    assert extractor.lpips(f1[0], f2[0]) == extractor.lpips(f2[0], f1[0])
    mean, se = extractor.mean_sts(model, data.clouds(1, "val"), 1, data.clouds(2, "val"))
    assert math.isfinite(mean) and se >= 0.0
    div = extractor.diversity(model, 2, f1, n_samples=4, pairs_per_sample=3)
    assert div >= 0.0

    print("python smoke test passed")


if __name__ == "__main__":
    main()
