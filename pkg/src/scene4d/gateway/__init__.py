"""Tool schemas, executor, HTTP gateway, and session driver."""

from .executor import ROUND_DECIMALS, execute_tool
from .mock_llm import MockLLM
from .schemas import TOOL_NAMES, TOOLS, as_llm_tools, schema_dicts
from .server import GatewayServer
from .session import (
    PROMPT_VERSION,
    AgentAnswer,
    EndpointConfig,
    parse_answer,
    run_session,
    system_prompt,
)

__all__ = [
    "ROUND_DECIMALS",
    "execute_tool",
    "MockLLM",
    "TOOL_NAMES",
    "TOOLS",
    "as_llm_tools",
    "schema_dicts",
    "GatewayServer",
    "PROMPT_VERSION",
    "AgentAnswer",
    "EndpointConfig",
    "parse_answer",
    "run_session",
    "system_prompt",
]
