"""Analytic gradients against central finite differences (float64)."""

import numpy as np
import pytest

from gradcheck import (fd_gradient, full_gradient_check, make_toy_batch,
                       make_toy_model, relative_error)
from zsar.model import PARAM_NAMES
from zsar.objective import loss_and_grads

TOL = 1e-4


class TestFullObjective:
    def test_every_tensor_matches_finite_differences(self):
        errors = full_gradient_check(tau=0.1, er_weight=1.0)
        assert set(errors) == set(PARAM_NAMES)
        for name, err in errors.items():
            assert err < TOL, f"{name}: relative error {err:.3e}"

    def test_recognition_only(self):
        errors = full_gradient_check(tau=0.1, er_weight=0.0)
        for name, err in errors.items():
            assert err < TOL, f"{name}: relative error {err:.3e}"

    def test_averaged_heads(self):
        errors = full_gradient_check(tau=0.2, er_weight=1.0, average_heads=True)
        for name, err in errors.items():
            assert err < TOL, f"{name}: relative error {err:.3e}"


class TestLinearity:
    def test_total_gradient_is_sum_of_parts(self):
        # grad(ar + lam*er) == grad(ar) + lam*grad(er), via FD on each part
        model = make_toy_model()
        batch = make_toy_batch()
        lam = 0.7
        _, grads = loss_and_grads(model, batch, 0.2, lam)
        for name in ("w_class", "w_video", "w1_vo"):
            fd_total = fd_gradient(model, batch, 0.2, lam, name)
            assert relative_error(grads[name], fd_total) < TOL

    def test_er_weight_scales_er_gradient(self):
        model = make_toy_model()
        batch = make_toy_batch()
        _, g0 = loss_and_grads(model, batch, 0.2, 0.0)
        _, g1 = loss_and_grads(model, batch, 0.2, 1.0)
        _, g2 = loss_and_grads(model, batch, 0.2, 2.0)
        for name in PARAM_NAMES:
            er_part1 = g1[name] - g0[name]
            er_part2 = g2[name] - g0[name]
            np.testing.assert_allclose(er_part2, 2.0 * er_part1, atol=1e-10)


class TestProjectionGradientToyProblem:
    def test_class_projection_on_three_class_problem(self):
        # recognition-only toy: gradient of the text projection weight
        model = make_toy_model(seed=9)
        batch = make_toy_batch(n_videos=3, n_classes=3, seed=26)
        _, grads = loss_and_grads(model, batch, 0.5, 0.0)
        fd = fd_gradient(model, batch, 0.5, 0.0, "w_class")
        assert relative_error(grads["w_class"], fd) < TOL
