"""
TexSeek MCP Server

This server exposes texture-based image retrieval, attribute embedding and
fidelity evaluation as tools and resources via the Model Context Protocol.
"""
import os
import pathlib
from dotenv import load_dotenv

# Load environment variables from .env file
env_path = pathlib.Path(__file__).parent.parent / '.env'
load_dotenv(dotenv_path=env_path)
from mcp.server.fastmcp import FastMCP
from starlette.applications import Starlette
from starlette.responses import JSONResponse
from starlette.routing import Mount, Route

from src.log_config import configure_logging

# Import tools
from src.tools.indexing import build_image_index
from src.tools.retrieval import search_similar_images
from src.tools.stego import embed_image_attributes, extract_image_attributes
from src.tools.evaluation import payload_fidelity_sweep

# Import resources
from src.resources.index import get_index_resource

SERVER_NAME = "TexSeek Image Retrieval"
SERVER_INSTRUCTIONS = (
    "Texture-based image retrieval: index PGM/PPM archives with Gabor features, "
    "hide features and attributes inside images, and search by example"
)


def create_server(**settings) -> FastMCP:
    """
    Create a FastMCP instance with every TexSeek tool and resource registered

    Args:
        **settings: Extra FastMCP settings (e.g. stateless_http, json_response)

    Returns:
        The configured server
    """
    server = FastMCP(SERVER_NAME, instructions=SERVER_INSTRUCTIONS, dependencies=["numpy", "scipy"], **settings)

    # Register tools
    server.tool()(build_image_index)
    server.tool()(search_similar_images)
    server.tool()(embed_image_attributes)
    server.tool()(extract_image_attributes)
    server.tool()(payload_fidelity_sweep)

    # Register resources
    server.resource("texseek-index://{path}")(get_index_resource)
    return server


mcp = create_server()


async def health_check(request):
    _ = request  # Suppress unused parameter warning
    return JSONResponse({"status": "healthy", "service": "texseek"})


def http_app(server_app):
    """Starlette app with the health check route and an MCP app mounted at the root"""
    return Starlette(
        routes=[
            Route("/health", health_check, methods=["GET"]),
            Mount("/", app=server_app),
        ]
    )


# Run the server if executed directly
if __name__ == "__main__":
    import argparse
    import sys

    parser = argparse.ArgumentParser(description="Run the TexSeek MCP Server")
    parser.add_argument("--sse", action="store_true", help="Run as an SSE server")
    parser.add_argument("--streamable-http", action="store_true", help="Run as a Streamable HTTP server")
    parser.add_argument("--stateless", action="store_true", help="Run in stateless mode (for Streamable HTTP)")
    parser.add_argument("--json-response", action="store_true", help="Use JSON responses instead of SSE streams")
    default_port = int(os.environ.get("PORT", 8000))
    default_host = os.environ.get("HOST", "0.0.0.0")
    parser.add_argument("--port", type=int, default=default_port, help=f"Port for server (default: {default_port})")
    parser.add_argument("--host", type=str, default=default_host, help=f"Host for server (default: {default_host})")

    args = parser.parse_args()
    configure_logging()

    # Check for conflicting transport options
    if args.sse and args.streamable_http:
        print("Error: Cannot specify both --sse and --streamable-http", file=sys.stderr)
        sys.exit(1)

    if args.sse:
        import uvicorn

        print(f"Starting TexSeek MCP Server (SSE mode) on http://{args.host}:{args.port}", file=sys.stderr)
        uvicorn.run(http_app(mcp.sse_app()), host=args.host, port=args.port)
    elif args.streamable_http:
        import uvicorn

        mode_desc = ("stateless" if args.stateless else "stateful") + (" JSON" if args.json_response else " SSE")
        print(f"Starting TexSeek MCP Server (Streamable HTTP {mode_desc} mode) on http://{args.host}:{args.port}", file=sys.stderr)
        print(f"Streamable HTTP endpoint: http://{args.host}:{args.port}/mcp/", file=sys.stderr)

        streamable_mcp = create_server(stateless_http=args.stateless, json_response=args.json_response)
        app = streamable_mcp.streamable_http_app()

        # Health check goes ahead of the MCP routes
        app.router.routes.insert(0, Route("/health", health_check, methods=["GET"]))
        uvicorn.run(app, host=args.host, port=args.port)
    else:
        # Run in stdio mode; stdout belongs to the protocol
        mcp.run()
