"""Flask HTTP API for ratelab."""

import logging
import threading
from collections import OrderedDict

from flask import Flask, jsonify, request
from flask_cors import CORS
from gunicorn.app.base import BaseApplication

from .channels import (
    bell_distribution_of,
    channel_from_document,
    channel_from_string,
    choi_min_eigenvalue,
    is_bell_diagonal,
    stokes_to_choi,
)
from .config import load_config
from .errors import BudgetExceededError, DomainError
from .oneway import RateQuery, compute_rate
from .sweeps import Settings, run_figure
from .twoway import BlockFunctions, rate_twoway

logger = logging.getLogger(__name__)

_TRUE = {"1", "true", "yes", "on"}


class ResultCache:
    """Thread-safe LRU cache for computed responses."""

    def __init__(self, size: int = 32):
        self.size = size
        self._entries = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            if key not in self._entries:
                return None
            self._entries.move_to_end(key)
            return self._entries[key]

    def put(self, key, value) -> None:
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self.size:
                self._entries.popitem(last=False)

    def get_or_compute(self, key, compute):
        value = self.get(key)
        if value is None:
            value = compute()
            self.put(key, value)
        return value


def _flag(name: str) -> bool:
    return request.args.get(name, "").lower() in _TRUE


def create_app(config: dict | None = None) -> Flask:
    if config is None:
        config = load_config()

    app = Flask(__name__)
    CORS(app, origins="*")

    cache = ResultCache(config.get("cache_size", 32))
    settings = Settings.from_config(config)
    psd_tol = config["tolerances"]["psd"]

    @app.errorhandler(BudgetExceededError)
    def budget_exceeded(exc):
        return jsonify({"error": str(exc)}), 422

    @app.errorhandler(DomainError)
    def domain_error(exc):
        return jsonify({"error": str(exc)}), 400

    @app.route("/api/health")
    def api_health():
        return jsonify({"status": "ok"})

    @app.route("/api/rate")
    def api_rate():
        channel = request.args.get("channel")
        if not channel:
            return jsonify({"error": "channel parameter required"}), 400
        protocol = request.args.get("protocol", "sixstate")
        estimation = request.args.get("estimation", "proposed")
        direction = request.args.get("direction", "direct")
        basis = request.args.get("basis", "z")
        noisy = request.args.get("noisy", type=float)
        functions = request.args.get("functions")
        key = ("rate", channel, protocol, estimation, direction, basis, noisy, functions,
               _flag("optimize_q"), _flag("two_way"))

        def compute():
            choi = stokes_to_choi(channel_from_string(channel, psd_tol), psd_tol)
            if _flag("two_way"):
                chi = BlockFunctions.parse(functions) if functions else None
                return rate_twoway(choi, protocol, direction, chi, basis, settings.prescan, settings.xatol).to_dict()
            query = RateQuery(choi, protocol, estimation, direction, basis,
                              noisy_preprocessing=noisy, optimize_flip=_flag("optimize_q"))
            return compute_rate(query, settings.grid_step, settings.prescan, settings.xatol).to_dict()

        return jsonify(cache.get_or_compute(key, compute))

    @app.route("/api/channel", methods=["POST"])
    def api_channel():
        data = request.get_json(silent=True)
        if not data:
            return jsonify({"error": "JSON body required"}), 400
        stokes = channel_from_document(data, psd_tol)
        result = {"stokes": stokes.to_dict(), "minEigenvalue": choi_min_eigenvalue(stokes.R, stokes.t)}
        if is_bell_diagonal(stokes):
            result["bell"] = bell_distribution_of(stokes).to_dict()
        return jsonify(result)

    @app.route("/api/figure/<name>")
    def api_figure(name):
        points = request.args.get("points", config["figures"]["points"], type=int)

        def compute():
            table = run_figure(name, points, config.get("threads", 1), settings)
            return {"name": name, "param": table.param, "columns": table.columns, "rows": table.to_records()}

        return jsonify(cache.get_or_compute(("figure", name, points), compute))

    return app


class GunicornServer(BaseApplication):
    """Serve ``create_app(config)`` from gunicorn pre-fork workers.

    Each worker builds its own app and so its own result cache.
    """

    def __init__(self, config: dict, workers: int):
        self.app_config = config
        self.worker_count = workers
        super().__init__()

    def load_config(self):
        host = self.app_config.get("server_host", "127.0.0.1")
        port = self.app_config.get("server_port", 19898)
        self.cfg.set("bind", f"{host}:{port}")
        self.cfg.set("workers", self.worker_count)

    def load(self):
        return create_app(self.app_config)


def run_server(config: dict | None = None, workers: int | None = None):
    """Run the API; with ``workers`` it runs under gunicorn instead of the Flask dev server."""
    if config is None:
        config = load_config()
    port = config.get("server_port", 19898)
    host = config.get("server_host", "127.0.0.1")
    if workers:
        logger.info("starting gunicorn with %d workers on %s:%s", workers, host, port)
        GunicornServer(config, workers).run()
        return
    app = create_app(config)
    print(f"ratelab API running on http://{host}:{port}")
    app.run(host=host, port=port, debug=False)
