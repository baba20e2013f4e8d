"""Compact bilinear pooling: Random Maclaurin and Tensor Sketch approximations
of second-order pooling, with exact references and hand-derived gradients."""

from .bilinear import bilinear_pool, bilinear_pool_backward, exact_kernel
from .core import (
    FormatError,
    LocalDescriptorGrid,
    ParameterError,
    PooledDescriptor,
    PoolKind,
    SeededRng,
    ShapeError,
    TruncationError,
    ValidationError,
    descriptor_at,
)
from .io import LabelTable, read_grid, read_labels, write_grid, write_labels
from .postproc import (
    LinearModel,
    fewshot_eval,
    l2_normalize,
    l2_normalize_backward,
    normalize,
    predict,
    signed_sqrt,
    signed_sqrt_backward,
    train_logreg,
)
from .rm import RmParams, gen_rm, rm_backward, rm_pool, rm_project
from .sketch import (
    CountSketchParams,
    circ_conv_fast,
    circ_conv_naive,
    circ_corr,
    count_sketch,
    gen_count_sketch,
)
from .ts import TsParams, gen_ts, ts_backward, ts_pool, ts_project

__version__ = "0.1.0"
