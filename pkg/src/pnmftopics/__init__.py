"""Topic model fitting through Poisson non-negative matrix factorization."""

from .bridge import (
    TopicFit,
    check_lemma1,
    pnmf_to_topic,
    recover_pnmf_map,
    recover_pnmf_mle,
    recover_topic_mle,
    topic_loglik,
    topic_to_pnmf,
)
from .count_matrix import CountMatrix, read_matrix_market, write_matrix_market
from .engine import (
    FitConfig,
    GammaPrior,
    PnmfFit,
    ProgressRecord,
    fit_pnmf,
    init_fit,
    kkt_residuals,
    rescale,
    update_block,
)
from .likelihood import pnmf_loglik, pnmf_loss
from .pois_reg import PoisRegProblem, fit_pois_reg
from .simulate import SimSpec, preset_sigma, simulate_corpus

__version__ = "0.1.0"
