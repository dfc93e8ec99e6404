import json
import threading
import urllib.error
import urllib.request

import pytest

from couplet.service import handle_couplet, handle_health, make_server


@pytest.fixture(scope="module")
def server(toy_pipeline):
    srv = make_server(toy_pipeline, "127.0.0.1", 0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield "http://%s:%d" % srv.server_address[:2]
    srv.shutdown()
    srv.server_close()


def request(url, body=None):
    data = None if body is None else (body if isinstance(body, bytes) else json.dumps(body).encode())
    req = urllib.request.Request(url, data=data, method="POST" if data is not None else "GET")
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()


def test_health(server, toy_pipeline):
    status, body = request(server + "/v1/health")
    assert status == 200
    payload = json.loads(body)
    assert payload["status"] == "ok"
    assert set(payload["models"]) == {"lm", "s2s"}


def test_valid_request(server):
    status, body = request(server + "/v1/couplet", {"input": "春福满门"})
    assert status == 200
    payload = json.loads(body)
    assert len(payload["candidates"]) == 16
    k1, k2 = payload["heads"]
    assert payload["best"]["antecedent"][0] == k1
    assert payload["best"]["subsequent"][0] == k2


def test_repeat_requests_identical(server):
    bodies = {request(server + "/v1/couplet", {"input": "花好月圆"})[1] for _ in range(3)}
    assert len(bodies) == 1


def test_concurrent_requests_independent(server):
    results = {}

    def hit(text):
        results[text] = request(server + "/v1/couplet", {"input": text})

    texts = ["春福满门", "花好月圆", "天山人家", "喜瑞富好"]
    threads = [threading.Thread(target=hit, args=(t,)) for t in texts]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for text in texts:
        assert results[text] == request(server + "/v1/couplet", {"input": text})


@pytest.mark.parametrize("body", [{"input": "春福满"}, {"input": "春福满门好"}, {"input": ""},
                                  {"text": "春福满门"}, {"input": 1234}, b"{not json", b"[1]"])
def test_bad_requests(server, body):
    status, raw = request(server + "/v1/couplet", body)
    assert status == 400
    assert "error" in json.loads(raw)


def test_three_characters_cite_constraint(toy_pipeline):
    status, payload = handle_couplet(toy_pipeline, json.dumps({"input": "春福满"}).encode())
    assert status == 400 and "4 characters" in payload["error"]


def test_unknown_route(server):
    assert request(server + "/v2/other")[0] == 404
    assert request(server + "/v2/other", {"input": "春福满门"})[0] == 404


def test_pipeline_failure_reports_stage(toy_pipeline, monkeypatch):
    from couplet.pipeline import GenerationError

    def boom(*a, **k):
        raise GenerationError("antecedent", "no hypothesis")

    monkeypatch.setattr(toy_pipeline, "generate_from_heads", boom)
    status, payload = handle_couplet(toy_pipeline, json.dumps({"input": "春福满门"}).encode())
    assert status == 500 and payload["stage"] == "antecedent"
    assert handle_health(toy_pipeline)[0] == 200
