"""
Model endpoint clients.

Chat-completion and OCR clients speaking an OpenAI-compatible JSON wire
format over ``requests``, plus scripted stand-ins used by tests and by
mock-driven pipeline runs.

Messages are handled internally as ``{"role": ..., "content": ...}`` dicts
whose content is either a string or a list of parts. A part is either
``{"type": "text", "text": str}`` or ``{"type": "image", "image": PIL.Image}``;
images are PNG/base64 encoded only when a request is put on the wire.
"""

import base64
import io
import logging
import threading
import time
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence, Union

import requests
from PIL import Image

from .app_config import resolve_secret
from .models import EndpointConfig

# Initialize logger
logger = logging.getLogger("endpoints")

Message = Dict[str, Any]


class EndpointError(Exception):
    """Raised when an endpoint cannot produce a reply."""
    pass


class EndpointAuthError(EndpointError):
    """Raised when an endpoint rejects the configured credentials."""
    pass


class ChatEndpoint(Protocol):
    def complete(self, messages: List[Message]) -> str:
        ...


class OcrEndpoint(Protocol):
    def read(self, image: Image.Image) -> str:
        ...


def encode_image_b64(image: Image.Image) -> str:
    """PNG-encode an image and return it base64 encoded."""
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return base64.b64encode(buffer.getvalue()).decode("ascii")


def _wire_parts(content: Union[str, List[Dict[str, Any]]]) -> Union[str, List[Dict[str, Any]]]:
    if isinstance(content, str):
        return content
    parts = []
    for part in content:
        if part.get("type") == "image":
            parts.append({
                "type": "image_url",
                "image_url": {"url": f"data:image/png;base64,{encode_image_b64(part['image'])}"},
            })
        else:
            parts.append({"type": "text", "text": part["text"]})
    return parts


def to_wire_messages(messages: List[Message]) -> List[Dict[str, Any]]:
    """
    Convert internal messages into the chat-completion wire shape.

    Tool messages become user turns wrapped in ``<tool_response>`` tags.
    """
    wire = []
    for message in messages:
        role = message["role"]
        content = message["content"]
        if role == "tool":
            if isinstance(content, str):
                content = f"<tool_response>\n{content}\n</tool_response>"
            else:
                content = ([{"type": "text", "text": "<tool_response>\n"}] + list(content)
                           + [{"type": "text", "text": "\n</tool_response>"}])
            role = "user"
        wire.append({"role": role, "content": _wire_parts(content)})
    return wire


def classify_failure(error: Union[Exception, int]) -> str:
    """
    Classify a transport failure or HTTP status for retry handling.

    Returns:
        One of ``auth``, ``rate_limited``, ``server_error``, ``timeout``,
        ``connection_issue``, ``client_error`` or ``unknown``
    """
    if isinstance(error, int):
        if error in (401, 403):
            return "auth"
        if error == 429:
            return "rate_limited"
        if error >= 500:
            return "server_error"
        return "client_error"
    if isinstance(error, requests.Timeout):
        return "timeout"
    if isinstance(error, requests.ConnectionError):
        return "connection_issue"
    return "unknown"


RETRYABLE = {"rate_limited", "server_error", "timeout", "connection_issue"}


class _HttpClient:
    """Shared POST-with-retry logic for HTTP endpoints."""

    def __init__(self, config: EndpointConfig,
                 session: Optional[requests.Session] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.session = session or requests.Session()
        self.sleep = sleep
        self.headers = {"Content-Type": "application/json"}
        if config.api_key_env:
            secret = resolve_secret(config.api_key_env)
            if not secret:
                raise EndpointAuthError(f"Missing secret in environment variable {config.api_key_env}")
            value = f"{config.auth_scheme} {secret}".strip() if config.auth_scheme else secret
            self.headers[config.auth_header] = value

    def _retry_delay(self, error_type: str) -> float:
        delay = self.config.retry_delay
        if error_type == "rate_limited":
            return min(delay * 2, 60)
        if error_type == "server_error":
            return min(delay * 1.5, 30)
        return delay

    def post_json(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        """
        POST a JSON payload, retrying transient failures.

        Raises:
            EndpointAuthError: On 401/403
            EndpointError: On non-retryable failures or when retries run out
        """
        last_error = None
        for attempt in range(1, self.config.retry_attempts + 1):
            try:
                response = self.session.post(self.config.url, json=payload,
                                             headers=self.headers, timeout=self.config.timeout)
            except requests.RequestException as e:
                error_type = classify_failure(e)
                last_error = f"{error_type}: {e}"
            else:
                if response.status_code < 400:
                    try:
                        return response.json()
                    except ValueError as e:
                        raise EndpointError(f"Non-JSON reply from {self.config.url}: {e}")
                error_type = classify_failure(response.status_code)
                last_error = f"HTTP {response.status_code}"
                if error_type == "auth":
                    raise EndpointAuthError(f"{self.config.url} rejected credentials (HTTP {response.status_code})")

            if error_type not in RETRYABLE:
                raise EndpointError(f"Request to {self.config.url} failed: {last_error}")
            if attempt < self.config.retry_attempts:
                delay = self._retry_delay(error_type)
                logger.warning(f"Endpoint error (type: {error_type}) on attempt {attempt}/"
                               f"{self.config.retry_attempts}, retrying in {delay}s")
                self.sleep(delay)

        logger.error(f"Max retries exceeded for {self.config.url}: {last_error}")
        raise EndpointError(f"Max retries exceeded for {self.config.url}: {last_error}")


class HttpChatEndpoint(_HttpClient):
    """OpenAI-compatible chat-completion endpoint."""

    def complete(self, messages: List[Message]) -> str:
        payload = {
            "model": self.config.model,
            "messages": to_wire_messages(messages),
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        if self.config.seed is not None:
            payload["seed"] = self.config.seed

        data = self.post_json(payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise EndpointError(f"Malformed completion payload from {self.config.url}")
        logger.debug(f"Completion received: {len(content or '')} chars")
        return content or ""


class HttpOcrEndpoint(_HttpClient):
    """Image-in, text-out OCR endpoint (``{"image": b64}`` -> ``{"text": ...}``)."""

    def read(self, image: Image.Image) -> str:
        data = self.post_json({"image": encode_image_b64(image), "model": self.config.model})
        if not isinstance(data, dict) or "text" not in data:
            raise EndpointError(f"Malformed OCR payload from {self.config.url}")
        return data["text"]


class ScriptedEndpoint:
    """
    Chat endpoint replaying fixed replies.

    ``script`` is either a sequence of replies consumed in order or a callable
    mapping the message list to a reply. Every message list received is
    recorded in ``calls``.
    """

    def __init__(self, script: Union[Sequence[str], Callable[[List[Message]], str]],
                 default_reply: Optional[str] = None):
        self._script = script if callable(script) else list(script)
        self._position = 0
        self.default_reply = default_reply
        self.calls: List[List[Message]] = []
        self._lock = threading.RLock()

    def complete(self, messages: List[Message]) -> str:
        with self._lock:
            self.calls.append(list(messages))
            if callable(self._script):
                return self._script(messages)
            if self._position < len(self._script):
                reply = self._script[self._position]
                self._position += 1
                return reply
            if self.default_reply is not None:
                return self.default_reply
            raise EndpointError(f"Scripted endpoint exhausted after {len(self._script)} replies")


class ScriptedOcr:
    """OCR stand-in returning ``reader(image)`` or a fixed string."""

    def __init__(self, reader: Union[str, Callable[[Image.Image], str]]):
        self._reader = reader
        self.calls = 0

    def read(self, image: Image.Image) -> str:
        self.calls += 1
        return self._reader(image) if callable(self._reader) else self._reader


def create_chat_endpoint(config: EndpointConfig) -> ChatEndpoint:
    """
    Build a chat endpoint from its descriptor.

    Scripted descriptors get a fresh instance per call so replies restart.
    """
    if config.kind == "scripted":
        return ScriptedEndpoint(config.replies, default_reply=config.default_reply)
    return HttpChatEndpoint(config)


def create_ocr_endpoint(config: EndpointConfig) -> OcrEndpoint:
    if config.kind == "scripted":
        return ScriptedOcr(config.default_reply or "")
    return HttpOcrEndpoint(config)
