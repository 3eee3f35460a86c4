"""HTTP service: endpoint shapes, error mapping and the CLI remote path."""

import json

import httpx
import pytest
from fastapi.testclient import TestClient

from partialbayes import cli
from partialbayes.service import handlers
from partialbayes.service.app import app
from partialbayes.errors import NumericError


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


class TestEndpoints:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200 and r.json()["status"] == "ok"

    def test_normal_known(self, client):
        r = client.post("/normal/known-tau", json={"observations": [0, 0, 0, 0], "tau": 1.0, "include_curve": True})
        body = r.json()
        assert r.status_code == 200
        assert body["lower"] == pytest.approx(-body["upper"])
        assert body["curve"] and max(p for _, p in body["curve"]) == pytest.approx(1.0, abs=1e-3)

    def test_normal_unknown(self, client):
        r = client.post("/normal/unknown-tau", json={"observations": [1.2, 0.1, -0.4, 0.9, 2.0, 0.3]})
        assert r.status_code == 200 and r.json()["lower"] < r.json()["upper"]

    def test_poisson(self, client):
        req = {"counts": [3, 2, 4, 1, 2], "shape_s": 2, "seed": 1, "mc_count": 300, "lambda_grid_size": 41}
        first = client.post("/poisson", json=req).json()
        again = client.post("/poisson", json=req).json()
        assert first == again and first["seed"] == 1
        classical = client.post("/poisson", json={**req, "method": "classical"}).json()
        assert classical["lower"] < 3 < classical["upper"]

    def test_binom(self, client):
        r = client.post("/binom-diff", json={"x": 7, "m": 20, "y": 12, "n": 25, "a": 2, "b": 2, "seed": 3, "mc_count": 300})
        assert r.status_code == 200 and -1 <= r.json()["lower"] < r.json()["upper"] <= 1

    def test_shotrates(self, client):
        records = [{"player": f"p{i}", "made": 10 + 3 * i, "attempts": 60} for i in range(8)]
        body = client.post("/shotrates", json={"records": records, "method": "eb"}).json()
        assert len(body["results"]) == 8 and body["theta_hat"] > 0

    def test_simulate(self, client):
        config = {"model": "normal-known-tau", "sample_sizes": [3], "replications": 100, "base_seed": 2}
        body = client.post("/simulate", json={"config": config}).json()
        assert body["rows"][0]["reps"] + body["rows"][0]["failures"] == 100
        assert body["flagged"] is False

    def test_fig1(self, client):
        body = client.post("/fig1", json={"n_values": [2]}).json()
        assert body["rows"][0]["eb_coverage"] == pytest.approx(0.8905, abs=5e-5)


class TestErrorMapping:
    def test_usage(self, client):
        r = client.post("/poisson", json={"counts": [1, 2, 3], "shape_s": 2})
        assert r.status_code == 400 and r.json()["kind"] == "usage"

    def test_data(self, client):
        r = client.post("/normal/known-tau", json={"observations": [], "tau": 1.0})
        assert r.status_code == 422 and r.json()["kind"] == "data"
        r = client.post("/binom-diff", json={"x": 5, "m": 2, "y": 1, "n": 2, "a": 2, "b": 2, "seed": 1})
        assert r.status_code == 422 and r.json()["kind"] == "data"

    def test_schema_violation(self, client):
        r = client.post("/normal/known-tau", json={"observations": [1.0], "tau": -1.0})
        assert r.status_code == 422

    def test_unknown_field(self, client):
        r = client.post("/fig1", json={"n_values": [2], "bogus": 1})
        assert r.status_code == 422

    def test_numeric(self, monkeypatch):
        def boom(req):
            raise NumericError("root bracketing failed")

        monkeypatch.setattr(handlers, "fig1", boom)
        r = TestClient(app).post("/fig1", json={"n_values": [2]})
        assert r.status_code == 500 and r.json() == {"kind": "numeric", "detail": "root bracketing failed"}


class TestRemoteCli:
    @pytest.fixture
    def routed(self, client, monkeypatch):
        def post(url, json=None, timeout=None):
            assert url.startswith("http://pb.test/")
            return client.post(url[len("http://pb.test"):], json=json)

        monkeypatch.setattr(httpx, "post", post)

    def test_matches_local(self, routed, tmp_path, capsys):
        path = tmp_path / "x.csv"
        path.write_text("x\n0.4\n-1.1\n0.3\n2.2\n")
        argv = ["normal-known", "--data", str(path), "--tau", "0.7"]
        assert cli.main(argv) == 0
        local = json.loads(capsys.readouterr().out)
        assert cli.main(argv + ["--server", "http://pb.test/"]) == 0
        remote = json.loads(capsys.readouterr().out)
        assert local == remote

    def test_remote_error_exit_codes(self, routed, capsys):
        base = ["binom-diff", "--m", "2", "--y", "1", "--n", "2", "--a", "2", "--b", "2", "--seed", "1"]
        assert cli.main(base + ["--x", "5", "--server", "http://pb.test"]) == 3
        assert "data error" in capsys.readouterr().err
        assert cli.main(["fig1", "--n", "2", "--tau", "-1", "--server", "http://pb.test"]) == 2

    def test_remote_fig1(self, routed, capsys):
        assert cli.main(["fig1", "--n", "2,3", "--server", "http://pb.test"]) == 0
        assert capsys.readouterr().out.splitlines()[1] == "2,0.890469,0.950000"
