"""Decision cores for tradmem"""

try:
    from .base import DebatePackage, DecisionCore, PeerFeedback, render_prompt
    from .chat_completion import ChatCompletionCore
    from .rule_based import RuleBasedCore
except ImportError:
    from decision_cores.base import DebatePackage, DecisionCore, PeerFeedback, render_prompt
    from decision_cores.chat_completion import ChatCompletionCore
    from decision_cores.rule_based import RuleBasedCore


def create_core(core_config) -> DecisionCore:
    """
    Build the decision core named by a CoreConfig

    Args:
        core_config: models.config.CoreConfig

    Returns:
        DecisionCore instance
    """
    if core_config.kind == "rule_based":
        return RuleBasedCore(
            window=core_config.momentum_window,
            slight_threshold=core_config.slight_threshold,
            sig_threshold=core_config.sig_threshold,
            risk_multipliers=core_config.risk_multipliers,
        )
    if core_config.kind == "chat_completion":
        return ChatCompletionCore(
            endpoint=core_config.endpoint,
            model=core_config.model,
            api_key_env=core_config.api_key_env,
            timeout=core_config.timeout,
            temperature=core_config.temperature,
            strict=core_config.strict,
            parallelism=core_config.parallelism,
        )
    raise ValueError(f"Unknown decision core: {core_config.kind}")


__all__ = [
    "ChatCompletionCore",
    "DebatePackage",
    "DecisionCore",
    "PeerFeedback",
    "RuleBasedCore",
    "create_core",
    "render_prompt",
]
