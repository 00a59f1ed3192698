"""Persistent-homology turbulence indices for financial time series.

Submodules, bottom to top: :mod:`marketdata`, :mod:`embedding`,
:mod:`filtration`, :mod:`persistence`, :mod:`landscape`, :mod:`diagmetrics`,
:mod:`indices`, :mod:`analysis`, :mod:`backtest` and :mod:`cli`.
"""

__version__ = "0.1.0"

from .analysis import KMeans, PCA2, detect_ews, early_warning, elbow_select, normalize_indices
from .backtest import StrategySpec, exposure, performance, quintile_of, run_strategy
from .diagmetrics import bottleneck, wasserstein
from .embedding import TakensEmbedding, takens_embed
from .exceptions import PhturbError
from .filtration import vr_filtration
from .indices import IndexConfig, TurbulenceIndex, default_grid, turbulence_grid, turbulence_index
from .landscape import LandscapeTransformer, landscape_from_diagram, lp_norm
from .marketdata import PriceSeries, ReturnSeries, log_returns, parse_price_csv
from .persistence import PersistenceDiagram, VietorisRipsPersistence, compute_persistence, rips_persistence

__all__ = [
    "KMeans", "PCA2", "detect_ews", "early_warning", "elbow_select", "normalize_indices",
    "StrategySpec", "exposure", "performance", "quintile_of", "run_strategy",
    "bottleneck", "wasserstein",
    "TakensEmbedding", "takens_embed",
    "PhturbError",
    "vr_filtration",
    "IndexConfig", "TurbulenceIndex", "default_grid", "turbulence_grid", "turbulence_index",
    "LandscapeTransformer", "landscape_from_diagram", "lp_norm",
    "PriceSeries", "ReturnSeries", "log_returns", "parse_price_csv",
    "PersistenceDiagram", "VietorisRipsPersistence", "compute_persistence", "rips_persistence",
]
