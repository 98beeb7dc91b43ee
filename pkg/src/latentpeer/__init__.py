"""Binary-choice peer effects with group fixed effects and latent clusters of slopes.

Main entry points:

* :func:`latentpeer.data.load_panel` / :func:`latentpeer.data.save_panel`
* :func:`latentpeer.equilibrium.solve_equilibrium`
* :func:`latentpeer.npl.npl_fit` and :func:`latentpeer.npl.npl_fit_per_group`
* :func:`latentpeer.classo.classo_fit` and :func:`latentpeer.selection.select_clusters`
* :func:`latentpeer.bootstrap.bootstrap_draws` and :func:`latentpeer.bootstrap.bootstrap_contrast`
* :func:`latentpeer.pipeline.run_pipeline`
* :func:`latentpeer.dgp.generate_panel` and the studies in :mod:`latentpeer.simulation`
"""

from .bootstrap import bootstrap_contrast, bootstrap_draws
from .classo import ClassoConfig, classo_fit, post_classification_fit
from .data import GroupData, Panel, load_panel, save_panel
from .dgp import DgpConfig, generate_panel
from .equilibrium import solve_equilibrium
from .logit import GroupParams, SlopeParams
from .npl import NplConfig, NplFit, npl_fit, npl_fit_per_group, npl_fit_scopes
from .pipeline import PipelineOptions, pipeline_report, run_pipeline
from .selection import select_clusters
from .simulation import run_monte_carlo, run_oracle_study, run_pooled_study

__version__ = "0.1.0"

__all__ = [
    "ClassoConfig",
    "DgpConfig",
    "GroupData",
    "GroupParams",
    "NplConfig",
    "NplFit",
    "Panel",
    "PipelineOptions",
    "SlopeParams",
    "bootstrap_contrast",
    "bootstrap_draws",
    "classo_fit",
    "generate_panel",
    "load_panel",
    "npl_fit",
    "npl_fit_per_group",
    "npl_fit_scopes",
    "pipeline_report",
    "post_classification_fit",
    "run_monte_carlo",
    "run_oracle_study",
    "run_pipeline",
    "run_pooled_study",
    "save_panel",
    "select_clusters",
    "solve_equilibrium",
]
