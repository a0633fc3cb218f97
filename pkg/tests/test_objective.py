import numpy as np
import pytest
import torch
from torch.nn import functional as F

from soundseg.errors import ShapeError
from soundseg.mask_head import MaskLogits
from soundseg.masks import BinaryMask
from soundseg.objective import (
    CostConfig,
    dice_cost,
    focal_cost,
    match,
    resize_targets,
    sound_cost,
    training_loss,
)


def _mask(grid):
    return BinaryMask(np.asarray(grid, dtype=np.uint8))


def test_dice_perfect_prediction_near_zero():
    y = torch.tensor([[[1.0, 0.0], [0.0, 1.0]]])
    logits = torch.where(y > 0, 100.0, -100.0)
    assert float(dice_cost(logits, y)) < 1e-6


def test_dice_empty_vs_empty_is_zero():
    logits = torch.full((1, 4, 4), -100.0)
    y = torch.zeros(1, 4, 4)
    assert float(dice_cost(logits, y)) < 1e-6


def test_dice_hand_case_two_thirds():
    logits = torch.zeros(1, 2, 2)  # p = 0.5 everywhere
    y = torch.tensor([[[1.0, 0.0], [0.0, 0.0]]])
    # 1 - (2*0.5 + eps) / (2 + 1 + eps)
    assert abs(float(dice_cost(logits, y)) - 2.0 / 3.0) < 1e-6


def test_focal_gamma_zero_alpha_half_is_half_bce():
    g = torch.Generator().manual_seed(0)
    logits = torch.randn(2, 4, 4, generator=g, dtype=torch.float64)
    y = (torch.rand(2, 4, 4, generator=g) > 0.5).double()
    cfg = CostConfig(focal_gamma=0.0, focal_alpha=0.5)
    got = float(focal_cost(logits, y, cfg))
    bce = float(F.binary_cross_entropy_with_logits(logits, y))
    assert abs(got - 0.5 * bce) < 1e-9


def test_focal_perfect_prediction_near_zero():
    y = torch.tensor([[[1.0, 0.0], [0.0, 1.0]]])
    logits = torch.where(y > 0, 100.0, -100.0)
    assert float(focal_cost(logits, y)) < 1e-6


def test_focal_half_probability_hand_formula():
    logits = torch.zeros(1, 2, 2)  # p_t = 0.5 for either class
    y = torch.tensor([[[1.0, 0.0], [1.0, 0.0]]])
    # per pixel: -alpha_t * (1 - 0.5)^2 * log(0.5)
    per_pos = -0.25 * 0.25 * np.log(0.5)
    per_neg = -0.75 * 0.25 * np.log(0.5)
    expect = (2 * per_pos + 2 * per_neg) / 4
    assert abs(float(focal_cost(logits, y)) - expect) < 1e-6


def test_sound_cost_values():
    softplus = np.log1p(np.exp(-10.0))  # ~4.54e-5
    assert abs(float(sound_cost(torch.tensor(0.0), 1.0)) - np.log(2.0)) < 1e-6
    assert abs(float(sound_cost(torch.tensor(10.0, dtype=torch.float64), 1.0)) - softplus) < 1e-12
    assert abs(float(sound_cost(torch.tensor(-10.0, dtype=torch.float64), 0.0)) - softplus) < 1e-12


def test_costs_nonnegative_and_finite():
    g = torch.Generator().manual_seed(1)
    for _ in range(20):
        logits = torch.randn(1, 4, 4, generator=g) * 5
        y = (torch.rand(1, 4, 4, generator=g) > 0.5).float()
        d = float(dice_cost(logits, y))
        f = float(focal_cost(logits, y))
        assert 0.0 <= d < 1.0 + 1e-9 and np.isfinite(d)
        assert f >= 0.0 and np.isfinite(f)


def test_cost_shape_validation():
    with pytest.raises(ShapeError):
        dice_cost(torch.zeros(4, 4), torch.zeros(4, 4))
    with pytest.raises(ShapeError):
        focal_cost(torch.zeros(1, 4, 4), torch.zeros(1, 2, 2))


def test_resize_targets_shape_and_binarization():
    gt = _mask(np.ones((8, 8)))
    out = resize_targets(gt, 4, 4)
    assert tuple(out.shape) == (1, 4, 4)
    assert torch.equal(out, torch.ones(1, 4, 4))


def _random_pred(rng, n_q=4, h=8, w=8):
    return MaskLogits(
        logits=torch.from_numpy(rng.normal(size=(n_q, 1, h, w))),
        sounding_scores=torch.from_numpy(rng.normal(size=n_q)),
    )


def test_match_saturated_query_wins():
    grid = np.zeros((8, 8), dtype=np.uint8)
    grid[:4] = 1
    gt = BinaryMask(grid)
    rng = np.random.default_rng(3)
    logits = torch.from_numpy(rng.normal(size=(4, 1, 8, 8)))
    logits[2, 0] = torch.where(torch.from_numpy(grid.astype(bool)), 100.0, -100.0)
    scores = torch.tensor([0.0, 0.0, 100.0, 0.0], dtype=torch.float64)
    pred = MaskLogits(logits=logits, sounding_scores=scores)
    assert match(pred, gt).winner_index == 2


def test_match_single_query():
    rng = np.random.default_rng(4)
    pred = _random_pred(rng, n_q=1)
    gt = _mask(rng.integers(0, 2, size=(8, 8)))
    assert match(pred, gt).winner_index == 0


def test_match_against_brute_force_oracle():
    cfg = CostConfig()
    rng = np.random.default_rng(5)
    for _ in range(100):
        pred = _random_pred(rng)
        gt = _mask(rng.integers(0, 2, size=(8, 8)))
        result = match(pred, gt, cfg)
        target = resize_targets(gt, 8, 8)
        totals = []
        for i in range(4):
            d = float(dice_cost(pred.logits[i], target, cfg))
            f = float(focal_cost(pred.logits[i], target, cfg))
            s = float(sound_cost(pred.sounding_scores[i], 1.0))
            totals.append(cfg.lambda_dice * d + cfg.lambda_focal * f + cfg.lambda_sound * s)
        expect = min(range(4), key=lambda i: totals[i])
        assert result.winner_index == expect
        assert abs(result.total_cost - totals[expect]) < 1e-9


def test_match_invariant_under_uniform_lambda_scaling():
    rng = np.random.default_rng(6)
    for _ in range(20):
        pred = _random_pred(rng)
        gt = _mask(rng.integers(0, 2, size=(8, 8)))
        base = match(pred, gt, CostConfig()).winner_index
        scaled = match(
            pred, gt, CostConfig(lambda_dice=7.0, lambda_focal=14.0, lambda_sound=7.0)
        ).winner_index
        assert base == scaled


def test_match_tie_breaks_to_lowest_index():
    logits = torch.zeros(3, 1, 8, 8, dtype=torch.float64)
    scores = torch.zeros(3, dtype=torch.float64)
    pred = MaskLogits(logits=logits, sounding_scores=scores)
    gt = _mask(np.eye(8))
    result = match(pred, gt)
    assert result.winner_index == 0
    assert result.per_query_totals[0] == result.per_query_totals[1]


def test_match_deterministic():
    rng = np.random.default_rng(7)
    pred = _random_pred(rng)
    gt = _mask(rng.integers(0, 2, size=(8, 8)))
    a = match(pred, gt)
    b = match(pred, gt)
    assert a == b


def test_training_loss_perfect_prediction_near_zero():
    grid = np.zeros((8, 8), dtype=np.uint8)
    grid[2:6, 2:6] = 1
    gt = BinaryMask(grid)
    on = torch.where(torch.from_numpy(grid.astype(bool)), 100.0, -100.0)[None]
    logits = torch.stack([on, torch.full((1, 8, 8), -100.0, dtype=torch.float64)])
    scores = torch.tensor([100.0, -100.0], dtype=torch.float64)
    loss = training_loss(MaskLogits(logits=logits, sounding_scores=scores), gt)
    assert float(loss) < 1e-6


def test_training_loss_lambda_sound_zero_equals_seg_cost():
    rng = np.random.default_rng(8)
    pred = _random_pred(rng, n_q=2)
    gt = _mask(rng.integers(0, 2, size=(8, 8)))
    cfg = CostConfig(lambda_sound=0.0)
    result = match(pred, gt, cfg)
    target = resize_targets(gt, 8, 8)
    i = result.winner_index
    expect = cfg.lambda_dice * float(dice_cost(pred.logits[i], target, cfg))
    expect += cfg.lambda_focal * float(focal_cost(pred.logits[i], target, cfg))
    assert abs(float(training_loss(pred, gt, cfg)) - expect) < 1e-9


def test_training_loss_linear_in_dice_weight():
    rng = np.random.default_rng(9)
    pred = _random_pred(rng, n_q=2)
    gt = _mask(rng.integers(0, 2, size=(8, 8)))
    base = CostConfig(lambda_focal=0.0, lambda_sound=0.0)
    tripled = CostConfig(lambda_dice=3.0, lambda_focal=0.0, lambda_sound=0.0)
    assert abs(
        float(training_loss(pred, gt, tripled)) - 3.0 * float(training_loss(pred, gt, base))
    ) < 1e-9


def test_cost_gradients_match_finite_differences():
    rng = np.random.default_rng(10)
    y = torch.from_numpy(rng.integers(0, 2, size=(1, 4, 4)).astype(np.float64))
    x0 = rng.normal(size=(1, 4, 4))
    h = 1e-5
    for fn in (dice_cost, focal_cost):
        logits = torch.from_numpy(x0.copy()).requires_grad_(True)
        fn(logits, y).backward()
        for _ in range(5):
            idx = (0, int(rng.integers(4)), int(rng.integers(4)))
            analytic = float(logits.grad[idx])
            up = x0.copy()
            up[idx] += h
            down = x0.copy()
            down[idx] -= h
            numeric = (
                float(fn(torch.from_numpy(up), y)) - float(fn(torch.from_numpy(down), y))
            ) / (2 * h)
            denom = max(abs(analytic), abs(numeric), 1e-12)
            assert abs(analytic - numeric) / denom < 1e-5, fn.__name__
