import math

import numpy as np
import pytest
from pytest import approx

from vbdeblur.grids import conv2d_valid
from vbdeblur.pipeline import (
    SPIKE_COUNT,
    SPIKE_KERNEL_LEN,
    SPIKE_LENGTH,
    DeblurConfig,
    align_kernel,
    benchmark_manifest,
    blind_deblur,
    kernel_l2_error,
    kernel_tv_distance,
    make_kernel,
    make_patch_scene,
    make_test_image,
    nonblind_deconv,
    psnr,
    ratio_histogram,
    run_spike_case,
    spike_benchmark_1d,
    ssd_error_ratio,
    synth_case,
    worker_count,
)


def test_synth_case_infinite_snr_is_exact_convolution():
    sharp = make_test_image(48, seed=1)
    k = make_kernel("uniform", 5, width=3)
    case = synth_case(sharp, k, math.inf, seed=3)
    assert np.array_equal(case.observed, conv2d_valid(sharp, k))


def test_synth_case_is_seed_deterministic():
    sharp = make_test_image(48, seed=1)
    k = make_kernel("random", 5, seed=2)
    a = synth_case(sharp, k, 30.0, seed=7)
    b = synth_case(sharp, k, 30.0, seed=7)
    assert np.array_equal(a.observed, b.observed)
    c = synth_case(sharp, k, 30.0, seed=8)
    assert not np.array_equal(a.observed, c.observed)


def test_synth_case_noise_variance_matches_target():
    sharp = make_test_image(64, seed=0)
    k = make_kernel("uniform", 7, width=3)
    case = synth_case(sharp, k, 40.0, seed=0)
    clean = conv2d_valid(sharp, k)
    target = float(np.var(clean)) * 10.0 ** (-4.0)
    measured = float(np.var(case.observed - clean))
    assert abs(measured - target) / target < 0.05


def test_spike_cases_share_generator_contract():
    uni, rnd = spike_benchmark_1d(seed=4)
    assert np.all(uni.kernel == uni.kernel[0, 0])
    assert uni.kernel.shape == rnd.kernel.shape == (1, SPIKE_KERNEL_LEN)
    l0 = int(np.count_nonzero(uni.sharp))
    assert l0 == SPIKE_COUNT
    assert l0 <= 0.10 * SPIKE_LENGTH
    assert np.array_equal(uni.sharp, rnd.sharp)

    uni2, rnd2 = spike_benchmark_1d(seed=4)
    assert np.array_equal(uni.observed, uni2.observed)
    assert np.array_equal(rnd.observed, rnd2.observed)


def test_nonblind_identity_kernel_returns_input():
    y = make_test_image(40, seed=2)
    out = nonblind_deconv(y, np.array([[1.0]]), p=0.8, lam_nb=1e-10)
    assert out == approx(y, abs=1e-6)


def test_nonblind_improves_psnr_with_known_kernel():
    sharp = make_test_image(64, seed=3)
    k = make_kernel("uniform", 7, width=3)
    case = synth_case(sharp, k, 40.0, seed=3)
    restored = nonblind_deconv(case.observed, k)
    pad = 3
    blurry_full = np.pad(case.observed, pad, mode="edge")
    assert psnr(restored, sharp) > psnr(blurry_full, sharp)


def test_nonblind_regularization_tradeoff():
    sharp = make_test_image(48, seed=5)
    k = make_kernel("random", 5, seed=5)
    y = conv2d_valid(sharp, k)

    def resid(lam_nb):
        x = nonblind_deconv(y, k, p=0.8, lam_nb=lam_nb)
        return float(np.sum((y - conv2d_valid(x, k)) ** 2))

    assert resid(4e-3) >= resid(2e-3)


def test_nonblind_rejects_bad_exponent():
    with pytest.raises(ValueError):
        nonblind_deconv(np.ones((8, 8)), np.array([[1.0]]), p=1.5)


def test_error_ratio_exact_one_for_true_kernel(rng):
    gt = rng.random((20, 20))
    est = gt + rng.normal(0.0, 0.1, gt.shape)
    assert ssd_error_ratio(est, est, gt) == 1.0


def test_error_ratio_rejects_exact_reference(rng):
    gt = rng.random((12, 12))
    with pytest.raises(ValueError):
        ssd_error_ratio(gt + 0.1, gt, gt)


def test_error_ratio_crop_drops_border(rng):
    gt = rng.random((16, 16))
    ref = gt + 0.05
    est = gt.copy()
    est[0, :] = 9.0  # damage confined to the border
    assert ssd_error_ratio(est, ref, gt, crop=2) == approx(0.0)


def test_ratio_histogram_matches_hand_binning():
    ratios = [1.0, 1.2, 1.9, 2.5, 7.0]
    counts = ratio_histogram(ratios, edges=(1.0, 1.5, 2.0, 3.0, 5.0, math.inf))
    assert counts == [2, 1, 1, 0, 1]
    assert sum(counts) == len(ratios)


def test_psnr_basics():
    a = np.zeros((4, 4))
    assert psnr(a, a) == math.inf
    b = a + 0.1
    assert psnr(a, b) == approx(20.0, rel=1e-9)


def test_kernel_metrics_on_shifted_delta():
    k = np.zeros((5, 5))
    k[1, 1] = 1.0
    ref = np.zeros((5, 5))
    ref[2, 2] = 1.0
    aligned = align_kernel(k, ref)
    assert kernel_l2_error(aligned, ref) == approx(0.0, abs=1e-12)
    assert kernel_tv_distance(ref, ref) == 0.0
    other = np.full((5, 5), 1.0 / 25.0)
    assert 0.0 <= kernel_tv_distance(other, ref) <= 1.0


def test_kernel_factory_contracts():
    for kind in ("uniform", "random", "line"):
        k = make_kernel(kind, 7, seed=1)
        assert k.shape == (7, 7)
        assert np.all(k >= 0)
        assert float(k.sum()) == approx(1.0, abs=1e-12)
    box = make_kernel("uniform", 7, width=3)
    taps = box[box > 0]
    assert np.all(taps == taps[0])
    with pytest.raises(ValueError):
        make_kernel("gaussian", 7)


def test_test_image_factory_contracts():
    for kind in ("blocks", "mixed", "textured"):
        img = make_test_image(64, seed=0, kind=kind)
        assert img.shape == (64, 64)
        assert float(img.min()) >= 0.0 and float(img.max()) <= 1.0
    assert np.array_equal(make_test_image(64, seed=0), make_test_image(64, seed=0))


def test_patch_scene_has_flat_and_textured_zones():
    scene = make_patch_scene(seed=0)
    assert scene.shape == (225, 225)
    assert float(scene.min()) >= 0.0 and float(scene.max()) <= 1.0
    dx = np.diff(scene, axis=1)
    assert np.any(dx == 0.0)
    assert np.count_nonzero(dx) > 0
    with pytest.raises(ValueError):
        make_patch_scene(size=120, seed=0)


def test_benchmark_manifest_grid():
    cases = benchmark_manifest()
    assert len(cases) == 12  # 3 images x 2 kernels x 2 noise levels
    seeds = [c["seed"] for c in cases]
    assert len(set(seeds)) == len(seeds)
    kinds = {c["kernel"]["kind"] for c in cases}
    assert kinds == {"line", "uniform"}
    assert {c["noise_db"] for c in cases} == {40.0, 30.0}
    assert cases == benchmark_manifest()


def test_deblur_config_validation():
    with pytest.raises(ValueError):
        DeblurConfig(kernel_size=6)
    with pytest.raises(ValueError):
        blind_deblur(np.zeros((16, 16)), DeblurConfig(kernel_size=5))
    with pytest.raises(ValueError):
        blind_deblur(np.full((48, 48), 0.5), DeblurConfig(kernel_size=5))
    with pytest.raises(ValueError):
        blind_deblur(np.zeros((40, 40)), DeblurConfig(kernel_size=15))


def test_blind_deblur_identity_case():
    sharp = make_test_image(64, seed=0)
    result = blind_deblur(sharp, DeblurConfig(kernel_size=7, max_iters=60))
    k = result.kernel
    assert np.all(k >= 0)
    assert float(k.sum()) == approx(1.0, abs=1e-9)
    assert float(k[3, 3]) >= 0.9
    # the restored latent canvas extends the input by the kernel radius
    assert result.restored.shape == (70, 70)
    assert set(result.timings) >= {"level_0", "nonblind"}


def test_blind_deblur_recovers_known_kernel():
    sharp = make_test_image(64, seed=1, kind="blocks")
    k = make_kernel("uniform", 7, width=3)
    case = synth_case(sharp, k, 40.0, seed=1)
    result = blind_deblur(case.observed, DeblurConfig(kernel_size=7))
    tv = kernel_tv_distance(align_kernel(result.kernel, k), k)
    assert tv < 0.35


def test_blind_deblur_is_deterministic():
    sharp = make_test_image(48, seed=2)
    k = make_kernel("random", 5, seed=2)
    case = synth_case(sharp, k, 40.0, seed=2)
    cfg = DeblurConfig(kernel_size=5, max_iters=40)
    a = blind_deblur(case.observed, cfg)
    b = blind_deblur(case.observed, cfg)
    assert np.array_equal(a.kernel, b.kernel)
    assert np.array_equal(a.restored, b.restored)


def test_spike_case_report_shape():
    case, _ = spike_benchmark_1d(seed=0)
    rep = run_spike_case(case, "vb")
    assert set(rep) >= {"mode", "kernel_l2", "kernel_tv", "signal_l0",
                        "sweeps", "kernel", "signal"}
    assert rep["mode"] == "vb"
    assert rep["kernel_l2"] >= 0.0
    assert 0 <= rep["signal_l0"] <= rep["signal"].size


def test_worker_count_env_cap(monkeypatch):
    monkeypatch.setenv("VBDEBLUR_THREADS", "2")
    assert worker_count() == 2
    assert worker_count(8) == 2
    assert worker_count(1) == 1
    monkeypatch.delenv("VBDEBLUR_THREADS")
    assert worker_count(1) == 1
    assert worker_count() >= 1
