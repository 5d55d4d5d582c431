"""HTTP front end for the annotation store.

Endpoints (JSON bodies):
    GET  /health
    GET  /classes?status=pending|done
    GET  /classes/{id}/candidates
    POST /classes/{id}/annotation   {selected, text, annotator, duration_s,
                                     version}
    GET  /export?partial=1          final description records, one per line

When a UI directory is configured, anything else serves its static files, so
the built single-page app and the API share one origin. Requests run on a
thread pool; the store serializes writes internally and commits before the
response is sent.
"""

from __future__ import annotations

import json
import mimetypes
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .edstore import AnnotationStore
from .errors import (IncompleteExportError, InvalidArgumentError,
                     MalformedInputError)


def _handler_class(store: AnnotationStore, ui_dir: Path | None):

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        # -- helpers ----------------------------------------------------

        def _send_json(self, payload, status=200):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_text(self, text, status=200, content_type="text/plain"):
            body = text.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _error(self, status, message):
            self._send_json({"error": message}, status=status)

        def _serve_static(self, path: str):
            if ui_dir is None:
                self._error(404, "no such endpoint")
                return
            rel = path.lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) \
                    or not target.is_file():
                self._error(404, f"no such file: {rel}")
                return
            ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        # -- routes -------------------------------------------------------

        def do_GET(self):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            query = parse_qs(url.query)
            if url.path == "/health":
                self._send_json({"ok": True})
            elif url.path == "/classes":
                status = query.get("status", [None])[0]
                self._send_json({"classes": store.list_classes(status),
                                 "counts": store.counts()})
            elif len(parts) == 3 and parts[0] == "classes" \
                    and parts[2] == "candidates":
                try:
                    self._send_json(store.get_class(parts[1]))
                except KeyError:
                    self._error(404, f"unknown class {parts[1]!r}")
            elif url.path == "/export":
                partial = query.get("partial", ["0"])[0] in ("1", "true")
                try:
                    records = store.export_records(partial=partial)
                except IncompleteExportError as exc:
                    self._error(409, str(exc))
                    return
                lines = "".join(json.dumps(r, ensure_ascii=False) + "\n"
                                for r in records)
                self._send_text(lines, content_type="application/x-ndjson")
            else:
                self._serve_static(url.path)

        def do_POST(self):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            if len(parts) == 3 and parts[0] == "classes" \
                    and parts[2] == "annotation":
                length = int(self.headers.get("Content-Length", 0))
                try:
                    payload = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError as exc:
                    self._error(400, f"bad JSON body: {exc}")
                    return
                try:
                    result = store.submit_annotation(
                        parts[1],
                        selected=list(payload.get("selected", [])),
                        text=payload.get("text"),
                        annotator=payload.get("annotator", ""),
                        duration_s=payload.get("duration_s"),
                        expected_version=payload.get("version"))
                except KeyError:
                    self._error(404, f"unknown class {parts[1]!r}")
                    return
                except (InvalidArgumentError, MalformedInputError) as exc:
                    self._error(400, str(exc))
                    return
                self._send_json({"ok": True, **result})
            else:
                self._error(404, "no such endpoint")

    return Handler


def create_server(store: AnnotationStore, host: str = "127.0.0.1",
                  port: int = 0, ui_dir: str | Path | None = None) -> ThreadingHTTPServer:
    """Bound but not yet serving; port 0 picks a free port (tests)."""
    ui = Path(ui_dir) if ui_dir else None
    return ThreadingHTTPServer((host, port), _handler_class(store, ui))


def serve_annotation_api(store: AnnotationStore, host: str = "127.0.0.1",
                         port: int = 8765, ui_dir: str | Path | None = None) -> None:
    server = create_server(store, host, port, ui_dir)
    host, port = server.server_address[:2]
    print(f"annotation service listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
