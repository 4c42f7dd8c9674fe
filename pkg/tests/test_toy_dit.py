import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parents[1]))

from core.errors import ConfigError, DivergenceError, ShapeError  # noqa: E402
from core.tensor import tape as F  # noqa: E402
from core.tensor.tape import Tape, grad_of  # noqa: E402
from core.toy_dit import (  # noqa: E402
    Adam,
    DistillConfig,
    FlowSample,
    ForwardResult,
    SyntheticTask,
    ToyDit,
    ToyDitConfig,
    batch_losses,
    distill_losses,
    draw_batch,
    euler_sample,
    euler_trajectory,
    flow_matching_loss,
    generate_teacher_dataset,
    is_attention_param,
    load_checkpoint,
    pretrain_teacher,
    save_checkpoint,
    time_steps,
    train_distill,
)

SMALL = ToyDitConfig(
    height=4,
    width=4,
    n_text=2,
    dim=16,
    n_heads=2,
    n_blocks=2,
    latent_channels=2,
    text_channels=4,
    n_classes=2,
    time_dim=8,
)


def small_sample(config=SMALL, seed=0):
    task = SyntheticTask.create(config)
    data = task.sample(1, np.random.default_rng(seed))
    return FlowSample.draw(data.z0[0], data.y[0], np.random.default_rng(seed + 1))


class FixedVelocity:
    def __init__(self, velocity):
        self.velocity = velocity

    def forward(self, z_t, t, y, params=None):
        return ForwardResult(velocity=self.velocity)


def test_config_validation():
    with pytest.raises(ValueError):
        ToyDitConfig(dim=30, n_heads=4)
    with pytest.raises(ValueError):
        ToyDitConfig(dim=24, n_heads=4)
    with pytest.raises(ValueError):
        ToyDitConfig(clip_mode="local")
    with pytest.raises(ValueError):
        ToyDitConfig(depth=3)
    assert DistillConfig().layers_for(4) == [2, 3]
    with pytest.raises(ConfigError):
        DistillConfig(attn_loss_layers=[5]).layers_for(4)


def test_with_config_reports_invalid_updates_as_config_errors():
    model = ToyDit.initialise(SMALL, seed=3)
    for radius in (0.0, -2.0):
        with pytest.raises(ConfigError):
            model.with_config(clip_mode="remote", clip_radius=radius)
    clipped = model.with_config(clip_mode="local", clip_radius=1.5)
    assert clipped.config.clip_radius == 1.5
    assert clipped.params is model.params


def test_forward_shapes_and_capture():
    model = ToyDit.initialise(SMALL, seed=0)
    s = small_sample()
    out = model.forward(s.z_t, s.t, s.y, keep_maps=True)
    assert out.velocity.shape == (16, 2)
    assert len(out.attn_outputs) == 2
    assert out.attn_outputs[0].shape == (18, 16)
    assert len(out.maps) == 2 and len(out.maps[0]) == 2
    assert np.allclose(out.maps[1][0].sum(axis=1), 1.0)


def test_forward_is_deterministic():
    model = ToyDit.initialise(SMALL, seed=3)
    s = small_sample()
    a = model.predict(s.z_t, s.t, s.y)
    b = model.predict(s.z_t, s.t, s.y)
    assert np.array_equal(a, b)


def test_zero_output_projection_gives_zero_prediction():
    model = ToyDit.initialise(SMALL, seed=0)
    model.params["head.out"][:] = 0.0
    s = small_sample()
    assert np.all(model.predict(s.z_t, s.t, s.y) == 0.0)


def test_forward_rejects_wrong_shapes():
    model = ToyDit.initialise(SMALL)
    s = small_sample()
    with pytest.raises(ShapeError):
        model.forward(s.z_t[:-1], s.t, s.y)
    with pytest.raises(ShapeError):
        model.forward(s.z_t, s.t, s.y[:, :3])


def test_covering_clear_student_matches_teacher():
    teacher = ToyDit.initialise(SMALL, seed=1)
    student = teacher.student("clear", r=10.0)
    s = small_sample()
    assert np.allclose(
        student.predict(s.z_t, s.t, s.y), teacher.predict(s.z_t, s.t, s.y), atol=1e-10, rtol=0
    )


def test_student_copies_weights():
    teacher = ToyDit.initialise(SMALL, seed=1)
    student = teacher.student("clear", r=2.0)
    for name, p in teacher.params.items():
        assert np.array_equal(student.params[name], p)
        assert student.params[name] is not p
    assert student.masks[0].popcount() < teacher.masks[0].popcount()


def test_flow_sample_interpolant():
    z0 = np.ones((3, 2))
    eps = np.full((3, 2), 3.0)
    s = FlowSample(z0, eps, 0.25, np.zeros((1, 1)))
    assert np.allclose(s.z_t, 1.5)
    assert np.allclose(s.target, 2.0)
    with pytest.raises(ConfigError):
        FlowSample(z0, eps, 1.5, np.zeros((1, 1)))


def test_flow_matching_loss_limits():
    rng = np.random.default_rng(0)
    s = FlowSample(rng.standard_normal((4, 2)), rng.standard_normal((4, 2)), 0.3, np.zeros((1, 1)))
    assert float(flow_matching_loss(FixedVelocity(s.target), s)) == 0.0
    zero = float(flow_matching_loss(FixedVelocity(np.zeros((4, 2))), s))
    assert zero == pytest.approx(np.mean((s.eps - s.z0) ** 2))
    pred = rng.standard_normal((4, 2))
    manual = np.mean((s.target - pred) ** 2)
    assert float(flow_matching_loss(FixedVelocity(pred), s)) == pytest.approx(manual)


def test_euler_sampler():
    assert time_steps(2) == [(1.0, 0.5), (0.5, 0.0)]
    rng = np.random.default_rng(1)
    z0, eps = rng.standard_normal((5, 2)), rng.standard_normal((5, 2))
    out = euler_sample(lambda z, t, y: eps - z0, eps, None, steps=1)
    assert np.allclose(out, z0, atol=1e-12)
    traj = euler_trajectory(lambda z, t, y: eps - z0, eps, None, steps=4)
    assert len(traj) == 4
    assert np.allclose(traj[1], 0.5 * z0 + 0.5 * eps)
    with pytest.raises(ConfigError):
        time_steps(0)


def test_identical_student_has_zero_distillation_losses():
    teacher = ToyDit.initialise(SMALL, seed=2)
    student = teacher.student("full")
    losses = distill_losses(student, teacher, small_sample(), DistillConfig())
    assert float(losses["L_pred"]) == 0.0
    assert float(losses["L_attn"]) == 0.0
    assert float(losses["L_fm"]) > 0.0


def test_empty_layer_set_means_no_attention_loss():
    teacher = ToyDit.initialise(SMALL, seed=2)
    student = teacher.student("clear", r=1.5)
    losses = distill_losses(student, teacher, small_sample(), DistillConfig(attn_loss_layers=[]))
    assert float(losses["L_attn"]) == 0.0
    assert float(losses["L_pred"]) > 0.0
    with pytest.raises(ConfigError):
        distill_losses(student, teacher, small_sample(), DistillConfig(attn_loss_layers=[2]))


def test_one_block_attention_loss_is_output_gap():
    config = SMALL.model_copy(update={"n_blocks": 1})
    teacher = ToyDit.initialise(config, seed=4)
    student = teacher.student("clear", r=1.5)
    s = small_sample(config)
    losses = distill_losses(student, teacher, s, DistillConfig(attn_loss_layers=[0]))
    gap = (
        student.forward(s.z_t, s.t, s.y).attn_outputs[0]
        - teacher.forward(s.z_t, s.t, s.y).attn_outputs[0]
    )
    assert float(losses["L_attn"]) == pytest.approx(np.mean(gap**2), rel=1e-12)


def test_distillation_gradient_matches_finite_differences():
    config = SMALL.model_copy(update={"n_blocks": 1})
    teacher = ToyDit.initialise(config, seed=5)
    student = teacher.student("clear", r=2.0)
    cfg = DistillConfig(attn_loss_layers=[0])
    task = SyntheticTask.create(config)
    samples = draw_batch(task.sample(2, np.random.default_rng(0)), 2, np.random.default_rng(1))

    tape = Tape()
    bound = student.bind(tape, student.attention_names())
    total = batch_losses(student, teacher, samples, cfg, bound)["total"]
    names = student.attention_names()
    grads = dict(zip(names, grad_of(total, [bound[n] for n in names])))

    def loss_now():
        return float(F.value(batch_losses(student, teacher, samples, cfg)["total"]))

    rng = np.random.default_rng(6)
    eps = 1e-6
    for _ in range(20):
        name = names[rng.integers(len(names))]
        idx = tuple(rng.integers(s) for s in student.params[name].shape)
        old = student.params[name][idx]
        student.params[name][idx] = old + eps
        hi = loss_now()
        student.params[name][idx] = old - eps
        lo = loss_now()
        student.params[name][idx] = old
        numeric = (hi - lo) / (2 * eps)
        assert grads[name][idx] == pytest.approx(numeric, rel=1e-4, abs=1e-8)


def test_adam_updates_named_entries_only():
    params = {"a": np.ones(3), "b": np.ones(3)}
    Adam(lr=0.1).step(params, {"a": np.array([1.0, -1.0, 0.0])})
    assert np.allclose(params["a"], [0.9, 1.1, 1.0])
    assert np.array_equal(params["b"], np.ones(3))


def test_zero_step_distillation_leaves_student_unchanged():
    teacher = ToyDit.initialise(SMALL, seed=7)
    student = teacher.student("clear", r=2.0)
    data = SyntheticTask.create(SMALL).sample(8, np.random.default_rng(0))
    result = train_distill(student, teacher, data, DistillConfig(steps=0, holdout_size=2))
    assert result.curve == []
    for name, p in teacher.params.items():
        assert np.array_equal(result.student.params[name], p)


def test_distillation_trains_attention_weights_only():
    teacher = ToyDit.initialise(SMALL, seed=8)
    student = teacher.student("clear", r=2.0)
    data = SyntheticTask.create(SMALL).sample(8, np.random.default_rng(0))
    cfg = DistillConfig(steps=3, batch_size=2, holdout_size=2, learning_rate=1e-2)
    result = train_distill(student, teacher, data, cfg)
    assert [row["step"] for row in result.curve] == [1, 2, 3]
    assert set(result.curve[0]) == {"step", "L_fm", "L_pred", "L_attn", "total"}
    changed = [
        name
        for name, p in teacher.params.items()
        if not np.array_equal(result.student.params[name], p)
    ]
    assert changed
    assert all(is_attention_param(name) for name in changed)


def test_distillation_is_reproducible():
    teacher = ToyDit.initialise(SMALL, seed=9)
    data = SyntheticTask.create(SMALL).sample(8, np.random.default_rng(0))
    cfg = DistillConfig(steps=2, batch_size=2, holdout_size=2)
    a = train_distill(teacher.student("clear", r=2.0), teacher, data, cfg)
    b = train_distill(teacher.student("clear", r=2.0), teacher, data, cfg)
    assert a.curve == b.curve


def test_divergence_is_reported(monkeypatch):
    teacher = ToyDit.initialise(SMALL, seed=10)
    student = teacher.student("clear", r=2.0)
    data = SyntheticTask.create(SMALL).sample(4, np.random.default_rng(0))

    def exploding(*args, **kwargs):
        nan = np.asarray(np.nan)
        return {"L_fm": nan, "L_pred": nan, "L_attn": nan, "total": nan}

    monkeypatch.setattr("core.toy_dit.distill.batch_losses", exploding)
    with pytest.raises(DivergenceError):
        train_distill(student, teacher, data, DistillConfig(steps=1, batch_size=1, holdout_size=1))


def test_teacher_dataset_is_reproducible():
    teacher = ToyDit.initialise(SMALL, seed=11)
    task = SyntheticTask.create(SMALL)
    a = generate_teacher_dataset(teacher, 3, 2, task=task, seed=5)
    b = generate_teacher_dataset(teacher, 3, 2, task=task, seed=5)
    assert np.array_equal(a.z0, b.z0)
    assert np.array_equal(a.labels, b.labels)
    assert a.z0.shape == (3, 16, 2)
    assert a.y.shape == (3, 2, 4)


def test_pretraining_updates_every_parameter():
    teacher = ToyDit.initialise(SMALL, seed=12)
    before = {name: p.copy() for name, p in teacher.params.items()}
    curve = pretrain_teacher(teacher, SyntheticTask.create(SMALL), steps=2, batch_size=2)
    assert len(curve) == 2
    assert all(np.isfinite(row["L_fm"]) for row in curve)
    assert all(not np.array_equal(teacher.params[n], before[n]) for n in before)


def test_checkpoint_round_trip(tmp_path):
    model = ToyDit.initialise(SMALL, seed=13).student("swin", window=2, shift=1)
    path = tmp_path / "ckpt" / "student.ckpt"
    save_checkpoint(path, model)
    loaded = load_checkpoint(path)
    assert loaded.config == model.config
    assert loaded.mask_method == "swin"
    assert loaded.mask_params == {"window": 2, "shift": 1}
    assert loaded.masks == model.masks
    for name, p in model.params.items():
        assert np.array_equal(loaded.params[name], p)


def test_checkpoint_rejects_bad_files(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"garbage")
    with pytest.raises(ConfigError):
        load_checkpoint(path)
    save_checkpoint(path, ToyDit.initialise(SMALL))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ConfigError):
        load_checkpoint(path)


@pytest.mark.slow
def test_clear_distillation_halves_prediction_gap():
    config = ToyDitConfig()
    teacher = ToyDit.initialise(config, seed=0)
    task = SyntheticTask.create(config)
    pretrain_teacher(teacher, task, steps=200, batch_size=4)
    dataset = generate_teacher_dataset(teacher, 32, 20, task=task, seed=0)
    student = teacher.student("clear", r=3.0)
    result = train_distill(student, teacher, dataset, DistillConfig(steps=2000))
    assert result.final_holdout <= 0.5 * result.initial_holdout
    for name, p in teacher.params.items():
        if not is_attention_param(name):
            assert np.array_equal(result.student.params[name], p)
