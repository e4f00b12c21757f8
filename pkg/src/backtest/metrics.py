"""
Performance metrics recomputed from a ledger and daily closes

    v_t          = cash_t + sum(shares_t * close_t)
    r_t          = v_t / v_{t-1} - 1
    cumulative   = v_end / v_start - 1
    volatility   = std(r, ddof=1) * sqrt(252)
    sharpe       = mean(r) / std(r, ddof=1) * sqrt(252)     (risk-free rate 0)
"""

import logging
from datetime import date
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

try:
    from ..agent import PortfolioState, TradeExecution
    from ..errors import MissingMarketData, UndefinedSharpe
    from .report import AGGREGATE_ID, AgentMetrics
except ImportError:
    from agent import PortfolioState, TradeExecution
    from errors import MissingMarketData, UndefinedSharpe
    from backtest.report import AGGREGATE_ID, AgentMetrics

logger = logging.getLogger(__name__)

TRADING_DAYS_PER_YEAR = 252
ANNUALIZATION = np.sqrt(TRADING_DAYS_PER_YEAR)


def portfolio_values(ledger: Sequence[TradeExecution], prices: pd.DataFrame,
                     initial_cash: float) -> pd.Series:
    """
    End-of-day portfolio values replayed from the ledger

    Args:
        ledger: Fills in execution order
        prices: Daily closes, index = dates (ascending), columns = tickers
        initial_cash: Cash before the first fill

    Returns:
        Series of values indexed like ``prices``

    Raises:
        MissingMarketData: If a held ticker has no close on a valued day
    """
    portfolio = PortfolioState(cash=initial_cash)
    pending = sorted(ledger, key=lambda t: t.timestamp)
    cursor = 0
    values = []
    for day in prices.index:
        while cursor < len(pending) and pending[cursor].timestamp.date() <= day:
            portfolio.apply(pending[cursor])
            cursor += 1
        closes = {}
        for ticker, position in portfolio.positions.items():
            if position.shares:
                close = prices.at[day, ticker] if ticker in prices.columns else np.nan
                if pd.isna(close):
                    raise MissingMarketData(
                        f"No close for held {ticker} on {day}", {"ticker": ticker, "date": str(day)}
                    )
                closes[ticker] = float(close)
        values.append(portfolio.market_value(closes))
    return pd.Series(values, index=prices.index, dtype="float64")


def daily_returns(values: pd.Series) -> pd.Series:
    return values.pct_change().dropna()


def sharpe_ratio(returns: pd.Series) -> float:
    """
    Annualized Sharpe ratio, risk-free rate 0

    Raises:
        UndefinedSharpe: If the sample std is zero or undefined
    """
    std = returns.std(ddof=1) if len(returns) > 1 else float("nan")
    if not np.isfinite(std) or std == 0:
        raise UndefinedSharpe("Standard deviation of daily returns is zero", {"n": len(returns)})
    return float(returns.mean() / std * ANNUALIZATION)


def metrics_from_values(agent_id: str, values: pd.Series, trade_count: int) -> AgentMetrics:
    """Metrics of one value series"""
    if values.empty:
        raise MissingMarketData(f"No trading day to value for {agent_id}")
    returns = daily_returns(values)
    std = returns.std(ddof=1) if len(returns) > 1 else 0.0
    volatility = float(std * ANNUALIZATION) if np.isfinite(std) else 0.0
    try:
        sharpe: Optional[float] = sharpe_ratio(returns)
    except UndefinedSharpe:
        sharpe = None

    start_value = float(values.iloc[0])
    final_value = float(values.iloc[-1])
    cumulative = final_value / start_value - 1.0 if start_value else 0.0
    return AgentMetrics(
        agent_id=agent_id,
        days=len(values),
        start_value=start_value,
        final_value=final_value,
        cumulative_return=cumulative,
        volatility=volatility,
        sharpe=sharpe,
        trade_count=trade_count,
    )


def compute_metrics(ledger: Sequence[TradeExecution], prices: pd.DataFrame,
                    span: Optional[Sequence[date]] = None, initial_cash: float = 0.0,
                    agent_id: str = AGGREGATE_ID) -> AgentMetrics:
    """
    Cumulative return, volatility and Sharpe of one ledger

    Args:
        ledger: Fills
        prices: Daily closes (dates x tickers)
        span: (start, end) inclusive; default: every date in ``prices``
        initial_cash: Cash before the first fill
        agent_id: Label of the result
    """
    if span is not None:
        start, end = span
        prices = prices.loc[(prices.index >= start) & (prices.index <= end)]
    values = portfolio_values(ledger, prices, initial_cash)
    return metrics_from_values(agent_id, values, trade_count=len(ledger))


def aggregate_metrics(ledgers: Mapping[str, Sequence[TradeExecution]], prices: pd.DataFrame,
                      initial_cash: Mapping[str, float],
                      span: Optional[Sequence[date]] = None) -> List[AgentMetrics]:
    """
    Per-agent metrics followed by the desk aggregate

    The aggregate values the sum of the agents' portfolios day by day.
    """
    if span is not None:
        start, end = span
        prices = prices.loc[(prices.index >= start) & (prices.index <= end)]

    results = []
    total: Optional[pd.Series] = None
    trades = 0
    for agent_id in sorted(ledgers):
        values = portfolio_values(ledgers[agent_id], prices, initial_cash[agent_id])
        results.append(metrics_from_values(agent_id, values, len(ledgers[agent_id])))
        total = values if total is None else total + values
        trades += len(ledgers[agent_id])

    if total is None:
        total = pd.Series([0.0] * len(prices), index=prices.index, dtype="float64")
    results.append(metrics_from_values(AGGREGATE_ID, total, trades))
    return results


def close_frame(closes: Mapping[str, Mapping[date, float]]) -> pd.DataFrame:
    """Dates x tickers frame from per-ticker close maps"""
    frame = pd.DataFrame({ticker: pd.Series(series, dtype="float64")
                          for ticker, series in sorted(closes.items())})
    return frame.sort_index()
