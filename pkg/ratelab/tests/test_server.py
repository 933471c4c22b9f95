"""Tests for Flask server routes."""

import pytest

from ratelab.server import GunicornServer, ResultCache, create_app, run_server

from .helpers import slightly_unphysical_channel


class TestHealthRoute:
    def test_health_check(self, client):
        response = client.get("/api/health")
        assert response.status_code == 200
        assert response.get_json() == {"status": "ok"}


class TestRateRoute:
    def test_amplitude_damping(self, client):
        response = client.get("/api/rate?channel=amplitude_damping:0.2&direction=reverse")
        assert response.status_code == 200
        assert response.get_json()["rate"] == pytest.approx(0.531004, abs=1e-6)

    def test_two_way(self, client):
        response = client.get("/api/rate?channel=identity&two_way=1")
        assert response.status_code == 200
        assert response.get_json()["rate"] == pytest.approx(1.0, abs=1e-9)

    def test_missing_channel(self, client):
        response = client.get("/api/rate")
        assert response.status_code == 400
        assert "channel" in response.get_json()["error"]

    def test_bad_channel(self, client):
        response = client.get("/api/rate?channel=depolarizing:0.9")
        assert response.status_code == 400
        assert "error" in response.get_json()

    def test_repeated_request_is_stable(self, client):
        first = client.get("/api/rate?channel=depolarizing:0.1").get_json()
        second = client.get("/api/rate?channel=depolarizing:0.1").get_json()
        assert first == second


class TestChannelRoute:
    def test_depolarizing(self, client):
        response = client.post("/api/channel", json={"kind": "depolarizing", "params": {"e": 0.1}})
        assert response.status_code == 200
        data = response.get_json()
        assert data["bell"]["p00"] == pytest.approx(0.85)
        assert data["minEigenvalue"] >= 0.0

    def test_not_bell_diagonal(self, client):
        response = client.post("/api/channel", json={"kind": "amplitude_damping", "params": {"p": 0.2}})
        assert response.status_code == 200
        assert "bell" not in response.get_json()

    def test_rejects_unknown_field(self, client):
        response = client.post("/api/channel", json={"kind": "raw", "R": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
                                                     "t": [0, 0, 0], "label": "x"})
        assert response.status_code == 400

    def test_rejects_invalid_channel(self, client):
        response = client.post("/api/channel", json={"kind": "raw", "R": [[2, 0, 0], [0, 2, 0], [0, 0, 2]],
                                                     "t": [0, 0, 0]})
        assert response.status_code == 400

    def test_requires_body(self, client):
        assert client.post("/api/channel").status_code == 400

    def test_psd_tolerance_from_config(self, client, config):
        doc = slightly_unphysical_channel()
        assert client.post("/api/channel", json=doc).status_code == 400

        config["tolerances"] = {"psd": 1e-5}
        loose = create_app(config).test_client()
        response = loose.post("/api/channel", json=doc)
        assert response.status_code == 200
        assert -2e-6 < response.get_json()["minEigenvalue"] < 0


class TestFigureRoute:
    def test_small_grid(self, client):
        response = client.get("/api/figure/amp-damping-twoway?points=3")
        assert response.status_code == 200
        data = response.get_json()
        assert data["param"] == "p"
        assert len(data["rows"]) == 3
        assert data["rows"][0]["param"] == 0.0

    def test_unknown(self, client):
        assert client.get("/api/figure/fig-99").status_code == 400


class TestResultCache:
    def test_evicts_oldest(self):
        cache = ResultCache(size=2)
        cache.put("a", 1)
        cache.put("b", 2)
        cache.get("a")
        cache.put("c", 3)
        assert cache.get("b") is None
        assert cache.get("a") == 1

    def test_computes_once(self):
        cache = ResultCache()
        calls = []
        for _ in range(3):
            cache.get_or_compute("k", lambda: calls.append(1) or "v")
        assert len(calls) == 1


class TestGunicornServer:
    def test_bind_and_workers_from_config(self, config):
        config["server_port"] = 18080
        server = GunicornServer(config, workers=3)
        assert server.cfg.bind == ["127.0.0.1:18080"]
        assert server.cfg.workers == 3

    def test_loads_the_api(self, config):
        app = GunicornServer(config, workers=1).load()
        assert app.test_client().get("/api/health").get_json() == {"status": "ok"}

    def test_run_server_with_workers_uses_gunicorn(self, config, monkeypatch):
        started = []
        monkeypatch.setattr(GunicornServer, "run", lambda self: started.append(self.worker_count))
        run_server(config, workers=2)
        assert started == [2]
