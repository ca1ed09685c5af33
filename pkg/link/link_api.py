"""Link API: runs the link manager and exposes live budgets over HTTP."""

from __future__ import annotations

import datetime
import logging
import math
import os

import cherrypy

from link import link_state as ls
from link.link_manager import get_manager
from logging_setup import configure_logging

logger = logging.getLogger("link.api")

ENDPOINTS = ["/health", "/snapshot", "/budget?link_id=<id>&capacity_bps=<float>"]


def _ts() -> str:
    return datetime.datetime.now().strftime("%Y-%m-%d %H:%M:%S")


def _error(status: int, message: str) -> dict:
    cherrypy.response.status = status
    return {"error": message}


class LinkAPI:
    exposed = True

    def __init__(self, manager=None):
        self.manager = manager if manager is not None else get_manager()
        logger.info("Link API started.")

    @cherrypy.tools.json_out()
    def GET(self, *uri, **params):
        if not uri:
            return {"ok": True, "endpoints": ENDPOINTS}
        path = uri[0].lower()
        if path == "health":
            return {"ok": True, "ts": _ts(), "links": self.manager.link_ids()}
        if path == "snapshot":
            return ls.get_snapshot()
        if path == "budget":
            return self._budget(params)
        return _error(404, "invalid endpoint")

    def _budget(self, params: dict) -> dict:
        link_id = params.get("link_id")
        if not link_id:
            return _error(400, "link_id is required")
        try:
            capacity = float(params.get("capacity_bps", ""))
        except ValueError:
            return _error(400, "capacity_bps must be a number")
        if not math.isfinite(capacity) or capacity < 0:
            return _error(400, "capacity_bps must be finite and >= 0")
        try:
            return self.manager.plan(link_id, capacity)
        except KeyError:
            return _error(404, f"unknown link {link_id}")


def run() -> None:
    configure_logging()
    port = int(os.getenv("LINK_API_PORT", "8082"))
    cherrypy.config.update({"server.socket_host": "0.0.0.0", "server.socket_port": port})
    conf = {"/": {"request.dispatch": cherrypy.dispatch.MethodDispatcher()}}
    cherrypy.tree.mount(LinkAPI(), "/", conf)
    cherrypy.engine.start()
    cherrypy.engine.block()


if __name__ == "__main__":
    run()
