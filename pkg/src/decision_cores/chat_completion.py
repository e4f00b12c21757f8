"""
Chat-completion decision core

Renders the phase prompt, posts it to an OpenAI-style endpoint and parses
the first line of the reply as one of the five actions.

Request:  POST {model, messages: [{role, content}], temperature}
Response: {choices: [{message: {content}}]}
"""

import logging
import os
import threading
from typing import Dict, List, Optional, Sequence

import httpx
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

try:
    from ..agent import Action, DecisionContext, Phase, Recommendation, parse_action
    from ..errors import CoreUnavailable
    from ..prompt_registry import PromptRegistry
    from .base import (DebatePackage, DecisionCore, PeerFeedback, render_messages,
                       render_revision_messages)
except ImportError:
    from agent import Action, DecisionContext, Phase, Recommendation, parse_action
    from errors import CoreUnavailable
    from prompt_registry import PromptRegistry
    from decision_cores.base import (DebatePackage, DecisionCore, PeerFeedback, render_messages,
                                     render_revision_messages)

logger = logging.getLogger(__name__)

PARSE_FAILURE = "parse-failure"
CORE_UNAVAILABLE = "core-unavailable"


def parse_reply(content: str) -> Recommendation:
    """First line is the action, the rest is rationale; anything else is Hold"""
    lines = (content or "").strip().splitlines()
    action = parse_action(lines[0]) if lines else None
    if action is None:
        return Recommendation(Action.HOLD, PARSE_FAILURE)
    rationale = " ".join(line.strip() for line in lines[1:] if line.strip())
    return Recommendation(action, rationale)


class ChatCompletionCore(DecisionCore):
    """Decision core backed by an external chat-completion endpoint"""

    name = "chat_completion"

    def __init__(self, endpoint: str, model: str, api_key_env: str = "TRADMEM_LLM_API_KEY",
                 timeout: float = 60.0, temperature: float = 0.0, strict: bool = True,
                 parallelism: int = 2, registry: Optional[PromptRegistry] = None,
                 client: Optional[httpx.Client] = None):
        """
        Initialize ChatCompletionCore

        Args:
            endpoint: Chat-completion URL
            model: Model name
            api_key_env: Environment variable holding the credential
            timeout: Request timeout in seconds
            temperature: Sampling temperature
            strict: Raise CoreUnavailable on endpoint failure (else Hold)
            parallelism: Maximum concurrent requests to the endpoint
            registry: Prompt templates (default: bundled templates)
            client: Optional preconfigured httpx client (tests)
        """
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = httpx.Timeout(timeout, connect=min(timeout, 10.0))
        self.temperature = temperature
        self.strict = strict
        self.registry = registry
        self._client = client
        self._slots = threading.Semaphore(parallelism)
        logger.info(f"Chat-completion core configured for {endpoint} (model={model})")

    def _get_headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=1, min=1, max=10),
        retry=retry_if_exception_type((httpx.TimeoutException, httpx.ConnectError)),
        reraise=True
    )
    def _post(self, payload: Dict) -> httpx.Response:
        client = self._client or httpx.Client(timeout=self.timeout)
        try:
            return client.post(self.endpoint, json=payload, headers=self._get_headers())
        finally:
            if self._client is None:
                client.close()

    def complete(self, messages: Dict[str, str]) -> str:
        """
        Send one system+user exchange

        Raises:
            CoreUnavailable: On transport failure, non-200 status or a malformed body
        """
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": messages["system"]},
                {"role": "user", "content": messages["user"]},
            ],
        }
        with self._slots:
            try:
                response = self._post(payload)
            except httpx.HTTPError as e:
                logger.error(f"Chat-completion endpoint unreachable: {e}")
                raise CoreUnavailable(f"Chat-completion endpoint unreachable: {e}")

        if response.status_code != 200:
            raise CoreUnavailable(
                f"Chat-completion endpoint returned {response.status_code}",
                {"body": response.text[:200]}
            )
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise CoreUnavailable(f"Malformed chat-completion response: {e}")

    def _ask(self, messages: Dict[str, str], agent_id: str) -> Recommendation:
        try:
            return parse_reply(self.complete(messages))
        except CoreUnavailable:
            if self.strict:
                raise
            logger.warning(f"[{agent_id}] core unavailable, holding")
            return Recommendation(Action.HOLD, CORE_UNAVAILABLE)

    def decide(self, context: DecisionContext) -> Recommendation:
        messages = render_messages(context, context.phase, registry=self.registry)
        return self._ask(messages, context.character.agent_id)

    def feedback(self, context: DecisionContext, package: DebatePackage) -> PeerFeedback:
        messages = render_messages(context, Phase.DEBATE, peers=[package], registry=self.registry)
        reply = self._ask(messages, context.character.agent_id)
        return PeerFeedback(
            sender_id=context.character.agent_id,
            receiver_id=package.agent_id,
            agrees=reply.action.direction == package.action.direction,
            action=reply.action,
            text=f"My view is {reply.action.value}. {reply.rationale}".strip(),
        )

    def revise(self, context: DecisionContext, original: Recommendation,
               feedback: Sequence[PeerFeedback]) -> Recommendation:
        messages = render_revision_messages(context, original, feedback, registry=self.registry)
        return self._ask(messages, context.character.agent_id)
