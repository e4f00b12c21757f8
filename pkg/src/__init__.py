"""tradmem - Layered-memory multi-agent trading backtests"""

# Configure logging at module level
import logging

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

# Public API imports
from .agent import Action, Phase, RiskPreference, TraderCharacter, TradingAgent
from .backtest import Backtester, MetricsReport, compute_metrics
from .debate import DebateCoordinator
from .memory_engine import DEFAULT_LAYER_PARAMS, LayerKind, LayerParams, MemoryEngine
from .models.config import RunConfig, load_run_config
from .storage import Warehouse

# Version info
__version__ = "0.1.1"

# Public exports
__all__ = [
    "Action",
    "Backtester",
    "DEFAULT_LAYER_PARAMS",
    "DebateCoordinator",
    "LayerKind",
    "LayerParams",
    "MemoryEngine",
    "MetricsReport",
    "Phase",
    "RiskPreference",
    "RunConfig",
    "TraderCharacter",
    "TradingAgent",
    "Warehouse",
    "compute_metrics",
    "load_run_config",
]
