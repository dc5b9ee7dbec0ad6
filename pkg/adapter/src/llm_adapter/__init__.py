"""External-planner client for the driving-decision benchmark wire protocol."""

from .adapter import (
    FALLBACK_DECISION,
    PROTO_VERSION,
    AdapterServer,
    handle_frame,
    serve_socket,
    serve_stdio,
    split_reply_text,
)
from .endpoint import (
    CannedEndpoint,
    EndpointConfig,
    EndpointError,
    HttpChatEndpoint,
    make_endpoint,
    parse_endpoint_spec,
)
from .prompts import (
    EXPLANATION_PROMPTS,
    NAV_COMMAND_PHRASES,
    NAVIGATION_PROMPTS,
    PromptBundle,
    PromptError,
    render_prompt,
    render_scene,
)

__version__ = "0.1.0"
