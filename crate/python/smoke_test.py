"""Smoke test for the ganlip_py extension module.

Build and stage the module first:

    cargo build --release -p ganlip-py
    cp target/release/libganlip_py.so python/ganlip_py.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import ganlip_py as g  # noqa: E402


def check(name, ok, detail=""):
    print(("ok   " if ok else "FAIL ") + name + (f" ({detail})" if detail else ""))
    return ok


def main():
    results = []
    rng = np.random.default_rng(10)

    a = g.ImageTensor(16, 16, 1, rng.random(256).tolist())
    b = g.ImageTensor(16, 16, 1, rng.random(256).tolist())
    results.append(check("shape", a.shape == (16, 16, 1)))
    results.append(check("ssim self", abs(g.ssim(a, a) - 1.0) < 1e-9))
    s = g.ssim(g.ImageTensor.filled(16, 16, 1, 0.2), g.ImageTensor.filled(16, 16, 1, 0.8))
    results.append(check("ssim constant", abs(s - 0.47067) < 1e-4, f"{s:.5f}"))
    results.append(check("psnr identical", math.isinf(g.psnr(a, a))))
    p = g.psnr(g.ImageTensor.filled(4, 4, 1, 0.0), g.ImageTensor.filled(4, 4, 1, 0.1))
    results.append(check("psnr 20 dB", abs(p - 20.0) < 1e-9, f"{p}"))

    eye = np.eye(2)
    d = g.frechet_distance([0.0, 0.0], eye.tolist(), [3.0, 4.0], eye.tolist())
    results.append(check("frechet mean shift", abs(d - 25.0) < 1e-8, f"{d}"))
    d = g.frechet_distance([0.0, 0.0], (4 * eye).tolist(), [0.0, 0.0], (9 * eye).tolist())
    results.append(check("frechet diagonal", abs(d - 2.0) < 1e-6, f"{d}"))

    # numpy reference for Gaussian fits of random embeddings
    x = rng.normal(size=(200, 3))
    y = rng.normal(loc=0.5, size=(200, 3))
    ours = g.frechet_from_embeddings(x.tolist(), y.tolist())
    m1, m2 = x.mean(0), y.mean(0)
    c1, c2 = np.cov(x, rowvar=False), np.cov(y, rowvar=False)
    w, v = np.linalg.eigh(c1)
    r1 = v @ np.diag(np.sqrt(np.maximum(w, 0))) @ v.T
    w2 = np.linalg.eigvalsh(r1 @ c2 @ r1)
    ref = float(((m1 - m2) ** 2).sum() + np.trace(c1) + np.trace(c2) - 2 * np.sqrt(np.maximum(w2, 0)).sum())
    results.append(check("frechet vs numpy", abs(ours - ref) < 1e-8, f"{ours:.6f} vs {ref:.6f}"))

    scores = [0.5, 0.7, 0.9, 0.95, float("inf")]
    summ = g.summarize(scores)
    results.append(check("summary", summ["n"] == 4 and summ["n_infinite"] == 1
                         and abs(summ["median"] - np.median(scores[:4])) < 1e-12))

    t = np.arange(16000) / 16000.0
    n_mels, n_frames, data = g.log_mel(np.sin(2 * np.pi * 440 * t).tolist())
    results.append(check("log mel", n_mels == 80 and len(data) == n_mels * n_frames, f"{n_mels}x{n_frames}"))

    run = g.train_toy(
        "l1wgan-gp",
        '{"learning_rate": 1e-3, "batch_size": 8, "hidden": 16, "max_iters": 50, "loss_log_every": 10}',
        '{"n_videos": 4, "frames_per_video": 8, "image_size": 12, "channels": 1}',
    )
    results.append(check("training schedule", run.generator_updates == 10 and run.discriminator_updates == 50))
    results.append(check("training log", run.log_csv().startswith("iter,loss_G,loss_D")))
    samples = run.held_out_samples()
    results.append(check("held-out samples", len(samples) == 8 and samples[0][0].shape == (12, 12, 1)))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "m.ckpt")
        run.save_checkpoint(path)
        results.append(check("checkpoint", os.path.getsize(path) > 0))

    try:
        g.train_toy("dcgan")
        results.append(check("bad model rejected", False))
    except ValueError:
        results.append(check("bad model rejected", True))

    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
