"""Streaming Caratheodory-Steinitz pruning of positive quadrature rules."""

from .baselines import LpProblem, lp_prune, nnls_prune
from .basis import (
    BasisSpec,
    Family,
    IndexKind,
    MultiIndexSet,
    eval_row,
    eval_rows,
    multi_index_set,
    parse_basis,
    stream_moments,
)
from .errors import CaraPruneError, NumericalError, ValidationError
from .givens_qr import QrWindow, downdate_update, full_qr, givens, kernel_column
from .io_stream import (
    ArrayStream,
    DomainSpec,
    NodeStream,
    rejection_sampler,
    stream_from_binary,
    stream_from_csv,
    write_binary,
    write_csv,
)
from .measure import DiscreteMeasure, SupportAlignment, append_nodes, perturb_weights, total_mass, tv_distance
from .pruning import (
    KernelBackend,
    PruneResult,
    SigSelect,
    SigSelectPolicy,
    csp,
    gscsp,
    prune_rows,
    prune_step,
    scsp,
)

__version__ = "0.1.0"
