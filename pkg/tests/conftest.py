import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from nexttdnn.blocks import BlockParams, Variant  # noqa: E402
from nexttdnn.model import Model, ModelConfig  # noqa: E402

ACCEPTANCE_LINES = []


def random_block(rng, C=8, kernel_set=(7, 65), light=False, grn_scale=0.5, std=0.3):
    """BlockParams with every tensor random, including GRN and LN affines."""
    n = lambda *shape: rng.normal(0, std, size=shape).astype(np.float32)
    cb = C // len(kernel_set)
    h = 4 * C
    if light:
        in_proj, out_proj = (), None
        dconv = ((n(C, kernel_set[0]), n(C)),)
    else:
        in_proj = tuple((n(cb, C), n(cb)) for _ in kernel_set)
        dconv = tuple((n(cb, k), n(cb)) for k in kernel_set)
        out_proj = (n(C, len(kernel_set) * cb), n(C))
    return BlockParams(
        variant=Variant.TS_CONVNEXT_LIGHT if light else Variant.TS_CONVNEXT,
        channels=C,
        kernel_set=kernel_set,
        norm1=(1 + n(C), n(C)),
        msc_in_proj=in_proj,
        msc_dconv=dconv,
        msc_out_proj=out_proj,
        norm2=(1 + n(C), n(C)),
        ffn_up=(n(h, C), n(h)),
        grn_gamma=grn_scale * n(h),
        grn_beta=grn_scale * n(h),
        ffn_down=(n(C, h), n(C)),
    )


def randomize(model, rng, std=0.2):
    """Copy of ``model`` with every parameter (GRN and norms too) drawn at random."""
    params = {k: rng.normal(0, std, size=v.shape).astype(np.float32) for k, v in model.params.items()}
    for k in params:
        if k.endswith("gamma") and ".grn." not in k:
            params[k] = params[k] + 1
    return Model(model.config, params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_config():
    return ModelConfig(C=8, B=1, kernel_set=(3, 7), C_mel=10, d_att=6)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
